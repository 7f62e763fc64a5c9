#include "avfusion/synthetic_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "avfusion/errors.hpp"
#include "avfusion/rng.hpp"

namespace avf {

void DatasetConfig::validate() const {
  if (n_identities < 1) throw ConfigError("n_identities must be at least 1");
  if (samples_per_identity < 1) throw ConfigError("samples_per_identity must be at least 1");
  if (audio_dim < 1) throw ConfigError("audio_dim must be at least 1");
  if (video_dim < 1) throw ConfigError("video_dim must be at least 1");
  if (!(audio_noise_sigma >= 0.0) || !std::isfinite(audio_noise_sigma)) {
    throw ConfigError("audio_noise_sigma must be a finite value >= 0");
  }
  if (!(video_noise_sigma >= 0.0) || !std::isfinite(video_noise_sigma)) {
    throw ConfigError("video_noise_sigma must be a finite value >= 0");
  }
}

namespace {

std::string format_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%04zu", prefix, i);
  return buf;
}

Vector unit_gaussian(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector v(dim);
  double n = 0.0;
  while (n == 0.0) {
    for (double& x : v) x = normal(rng);
    n = l2_norm(v);
  }
  for (double& x : v) x /= n;
  return v;
}

}  // namespace

std::vector<IdentitySpec> generate_identities(const DatasetConfig& config) {
  config.validate();
  std::vector<IdentitySpec> specs;
  specs.reserve(config.n_identities);
  for (std::size_t k = 0; k < config.n_identities; ++k) {
    Rng rng = make_stream(config.seed, "identity", k);
    IdentitySpec spec{format_id("id", k), unit_gaussian(config.audio_dim, rng),
                      unit_gaussian(config.video_dim, rng)};
    specs.push_back(std::move(spec));
  }
  return specs;
}

std::vector<Sample> sample_dataset(const std::vector<IdentitySpec>& specs, const DatasetConfig& config) {
  config.validate();
  if (specs.empty()) throw ConfigError("sample_dataset: no identities");
  std::vector<Sample> samples;
  samples.reserve(specs.size() * config.samples_per_identity);
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto& spec = specs[k];
    if (spec.audio_prototype.size() != config.audio_dim || spec.video_prototype.size() != config.video_dim) {
      throw ShapeError("sample_dataset: prototype dims disagree with config");
    }
    Rng rng = make_stream(config.seed, "samples", k);
    std::normal_distribution<double> audio_noise(0.0, config.audio_noise_sigma);
    std::normal_distribution<double> video_noise(0.0, config.video_noise_sigma);
    for (std::size_t s = 0; s < config.samples_per_identity; ++s) {
      Sample sample{spec.identity_id, spec.identity_id + format_id("_s", s), spec.audio_prototype,
                    spec.video_prototype};
      if (config.audio_noise_sigma > 0.0)
        for (double& x : sample.audio) x += audio_noise(rng);
      if (config.video_noise_sigma > 0.0)
        for (double& x : sample.video) x += video_noise(rng);
      samples.push_back(std::move(sample));
    }
  }
  return samples;
}

Split split_dataset(const std::vector<Sample>& samples, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("val_fraction must lie strictly between 0 and 1");
  }
  std::map<std::string, std::vector<std::size_t>> by_identity;
  std::set<std::string> seen_ids;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!seen_ids.insert(samples[i].sample_id).second) {
      throw ConfigError("split_dataset: duplicate sample id '" + samples[i].sample_id + "'");
    }
    by_identity[samples[i].identity_id].push_back(i);
  }

  Rng rng = make_stream(seed, "split");
  std::vector<bool> to_val(samples.size(), false);
  for (auto& [id, idx] : by_identity) {
    const auto n = idx.size();
    const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
    if (n_val == 0 || n_val >= n) {
      throw ConfigError("split_dataset: identity '" + id + "' has " + std::to_string(n) +
                        " samples, too few to stratify at val_fraction " + std::to_string(val_fraction));
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < n_val; ++i) to_val[idx[i]] = true;
  }

  Split split;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    (to_val[i] ? split.val : split.train).push_back(samples[i]);
  }
  return split;
}

std::vector<std::string> identity_ids(const std::vector<Sample>& samples) {
  std::set<std::string> ids;
  for (const auto& s : samples) ids.insert(s.identity_id);
  return {ids.begin(), ids.end()};
}

}  // namespace avf
