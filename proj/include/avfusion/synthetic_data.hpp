#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "avfusion/core_math.hpp"

namespace avf {

struct IdentitySpec {
  std::string identity_id;
  Vector audio_prototype;  // unit norm
  Vector video_prototype;  // unit norm
};

// Desk profile by default; audio is the noisier modality.
struct DatasetConfig {
  std::size_t n_identities = 50;
  std::size_t samples_per_identity = 40;
  std::size_t audio_dim = 16;
  std::size_t video_dim = 32;
  double audio_noise_sigma = 0.45;
  double video_noise_sigma = 0.25;
  std::uint64_t seed = 4242;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// One synthetic pair of backbone outputs.
struct Sample {
  std::string identity_id;
  std::string sample_id;
  Vector audio;
  Vector video;

  bool operator==(const Sample&) const = default;
};

std::vector<IdentitySpec> generate_identities(const DatasetConfig& config);
// prototype + N(0, sigma^2 I) per modality, not re-normalized.
std::vector<Sample> sample_dataset(const std::vector<IdentitySpec>& specs, const DatasetConfig& config);

struct Split {
  std::vector<Sample> train;
  std::vector<Sample> val;
};

// Identity-stratified: each identity sends round(val_fraction * n) of its
// samples to val, which must leave at least one on each side.
Split split_dataset(const std::vector<Sample>& samples, double val_fraction, std::uint64_t seed);

// Sorted distinct identity ids.
std::vector<std::string> identity_ids(const std::vector<Sample>& samples);

}  // namespace avf
