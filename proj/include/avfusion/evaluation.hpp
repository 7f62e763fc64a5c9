#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "avfusion/fusion_heads.hpp"
#include "avfusion/synthetic_data.hpp"

namespace avf {

enum class ModalityMode { AVxAV, AxA, VxV, AVxA, AVxV, AxV };
inline constexpr std::array<ModalityMode, 6> kAllModes{ModalityMode::AVxAV, ModalityMode::AxA,
                                                        ModalityMode::VxV,   ModalityMode::AVxA,
                                                        ModalityMode::AVxV,  ModalityMode::AxV};
std::string_view to_string(ModalityMode mode);
ModalityMode parse_modality_mode(std::string_view name);

struct Exposure {
  bool audio = false;
  bool video = false;
  bool operator==(const Exposure&) const = default;
};

// Left/right exposure. Mixed modes put the full-modality side on the left;
// AxV is audio-left, video-right.
std::pair<Exposure, Exposure> mode_exposures(ModalityMode mode);

struct Trial {
  std::size_t left = 0;  // indices into the sample list
  std::size_t right = 0;
  Exposure left_exposure;
  Exposure right_exposure;
  bool target = false;
};

struct TrialSet {
  ModalityMode mode = ModalityMode::AVxAV;
  std::vector<Trial> trials;
};

// Exactly n_positive within-identity and n_negative cross-identity pairs,
// each unordered pair at most once, no self-pairs. The pair list depends only
// on (samples, counts, seed), so every mode sees the same pairs.
TrialSet build_trials(const std::vector<Sample>& samples, ModalityMode mode, std::size_t n_positive,
                      std::size_t n_negative, std::uint64_t seed);

// Eval-mode embedding with unexposed modalities fed as NULL.
Vector fused_embedding(const FusionHead& head, const Sample& sample, Exposure exposure);
double score_trial(const FusionHead& head, const std::vector<Sample>& samples, const Trial& trial);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
  std::size_t n_target = 0;
  std::size_t n_nontarget = 0;
};

// Threshold sweep over the distinct scores with FAR(t) = P(nontarget >= t),
// FRR(t) = P(target < t); the crossing is interpolated linearly between the
// two thresholds that bracket it.
EerResult compute_eer(std::span<const double> scores, const std::vector<bool>& labels);
EerResult compute_eer_split(std::span<const double> target_scores, std::span<const double> nontarget_scores);

struct AngleReport {
  std::string family;    // audio_video, within_identity
  std::string modality;  // audio, video or audio_video
  std::map<std::string, std::vector<double>> per_identity;  // degrees
  std::size_t skipped = 0;  // degenerate (zero) embeddings

  std::vector<double> all() const;
};

struct CentroidAngles {
  std::string modality;
  std::vector<std::string> identities;
  Matrix degrees;  // symmetric, zero diagonal
  std::size_t skipped = 0;

  std::vector<double> off_diagonal() const;  // upper triangle
};

AngleReport audio_video_angles(const FusionHead& head, const std::vector<Sample>& samples);
AngleReport within_identity_angles(const FusionHead& head, const std::vector<Sample>& samples, Modality modality);
CentroidAngles centroid_angle_matrix(const FusionHead& head, const std::vector<Sample>& samples, Modality modality);

enum class Distance { Cosine, Euclidean };
// Mean silhouette; singleton clusters and a == b == 0 points contribute 0.
double silhouette_score(const std::vector<Vector>& points, std::span<const std::size_t> labels,
                        Distance distance = Distance::Cosine);
double silhouette_score(const Matrix& points, std::span<const std::size_t> labels,
                        Distance distance = Distance::Cosine);

struct BoxplotStats {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  double whisker_low = 0, whisker_high = 0;
  std::vector<double> outliers;
};

// Linear-interpolated quartiles, Tukey 1.5*IQR whiskers snapped to the
// extreme data points inside the fences.
BoxplotStats boxplot_stats(std::span<const double> values);

// Mean fusion only: angle between the branch output for a NULL input of
// `missing` and the centroid of that branch's per-class centroids, against
// the median angle to the individual class centroids.
struct NullProbeResult {
  double angle_to_centroid_of_centroids = 0.0;
  double median_angle_to_class_centroids = 0.0;
  std::size_t n_classes = 0;
  bool closer_than_median() const { return angle_to_centroid_of_centroids < median_angle_to_class_centroids; }
};
NullProbeResult null_representation_probe(const MeanFusionHead& head, const std::vector<Sample>& samples,
                                          Modality missing);

struct TrialConfig {
  std::size_t n_positive = 500;
  std::size_t n_negative = 500;
  std::uint64_t seed = 4242;
};

struct ModeResult {
  ModalityMode mode = ModalityMode::AVxAV;
  EerResult eer;
  std::vector<double> scores;
  std::vector<bool> labels;
  std::size_t skipped_trials = 0;
};

struct DiagnosticsReport {
  std::string model;
  std::vector<ModeResult> modes;  // kAllModes order
  AngleReport audio_video;
  AngleReport within_audio;
  AngleReport within_video;
  CentroidAngles between_audio;
  CentroidAngles between_video;
  double silhouette_audio = 0.0;
  double silhouette_video = 0.0;
  std::size_t warnings = 0;  // skipped degenerate embeddings and trials
};

// Angle families and silhouettes only; `modes` stays empty.
DiagnosticsReport run_diagnostics(const FusionHead& head, const std::vector<Sample>& samples,
                                  std::string model_label = {});
DiagnosticsReport run_full_evaluation(const FusionHead& head, const std::vector<Sample>& samples,
                                      const TrialConfig& trials, std::string model_label = {});

}  // namespace avf
