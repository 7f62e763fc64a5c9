#include "avfusion/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "avfusion/errors.hpp"
#include "avfusion/rng.hpp"

namespace avf {

std::string_view to_string(ModalityMode mode) {
  switch (mode) {
    case ModalityMode::AVxAV: return "AVxAV";
    case ModalityMode::AxA: return "AxA";
    case ModalityMode::VxV: return "VxV";
    case ModalityMode::AVxA: return "AVxA";
    case ModalityMode::AVxV: return "AVxV";
    case ModalityMode::AxV: return "AxV";
  }
  return "?";
}

ModalityMode parse_modality_mode(std::string_view name) {
  for (auto m : kAllModes)
    if (to_string(m) == name) return m;
  throw ConfigError("unknown modality mode '" + std::string(name) + "'");
}

std::pair<Exposure, Exposure> mode_exposures(ModalityMode mode) {
  constexpr Exposure av{true, true}, a{true, false}, v{false, true};
  switch (mode) {
    case ModalityMode::AVxAV: return {av, av};
    case ModalityMode::AxA: return {a, a};
    case ModalityMode::VxV: return {v, v};
    case ModalityMode::AVxA: return {av, a};
    case ModalityMode::AVxV: return {av, v};
    case ModalityMode::AxV: return {a, v};
  }
  return {av, av};
}

namespace {

std::map<std::string, std::vector<std::size_t>> group_by_identity(const std::vector<Sample>& samples) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i) groups[samples[i].identity_id].push_back(i);
  return groups;
}

ModalityInput exposed_input(const Sample& sample, Exposure exposure) {
  ModalityInput in;
  if (exposure.audio) in.audio = sample.audio;
  if (exposure.video) in.video = sample.video;
  return in;
}

Matrix embed_all(const FusionHead& head, const std::vector<Sample>& samples, Exposure exposure) {
  if (!exposure.audio && !exposure.video) throw DegenerateInputError("embedding request exposes no modality");
  std::vector<ModalityInput> inputs;
  inputs.reserve(samples.size());
  for (const auto& s : samples) inputs.push_back(exposed_input(s, exposure));
  return head.infer(inputs);
}

std::vector<std::size_t> identity_labels(const std::vector<Sample>& samples) {
  const auto ids = identity_ids(samples);
  std::vector<std::size_t> labels(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    labels[i] = static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), samples[i].identity_id) - ids.begin());
  }
  return labels;
}

constexpr Exposure exposure_of(Modality m) { return m == Modality::Audio ? Exposure{true, false} : Exposure{false, true}; }

}  // namespace

TrialSet build_trials(const std::vector<Sample>& samples, ModalityMode mode, std::size_t n_positive,
                      std::size_t n_negative, std::uint64_t seed) {
  const auto groups = group_by_identity(samples);
  if (groups.size() < 2) throw ConfigError("build_trials: need at least 2 identities");
  Rng rng = make_stream(seed, "trials");

  using Pair = std::pair<std::size_t, std::size_t>;
  std::vector<Pair> positives;
  for (const auto& [id, idx] : groups)
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = i + 1; j < idx.size(); ++j) positives.emplace_back(idx[i], idx[j]);
  if (positives.size() < n_positive) {
    throw ConfigError("build_trials: requested " + std::to_string(n_positive) + " target trials but only " +
                      std::to_string(positives.size()) + " within-identity pairs exist");
  }
  std::shuffle(positives.begin(), positives.end(), rng);
  positives.resize(n_positive);

  const std::size_t n = samples.size();
  std::size_t total_cross = n * (n - 1) / 2;
  for (const auto& [id, idx] : groups) total_cross -= idx.size() * (idx.size() - 1) / 2;
  if (total_cross < n_negative) {
    throw ConfigError("build_trials: requested " + std::to_string(n_negative) + " nontarget trials but only " +
                      std::to_string(total_cross) + " cross-identity pairs exist");
  }

  std::vector<Pair> negatives;
  if (total_cross <= 200000 || 2 * n_negative > total_cross) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (samples[i].identity_id != samples[j].identity_id) negatives.emplace_back(i, j);
    std::shuffle(negatives.begin(), negatives.end(), rng);
    negatives.resize(n_negative);
  } else {
    std::set<Pair> used;
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    while (negatives.size() < n_negative) {
      std::size_t i = pick(rng), j = pick(rng);
      if (samples[i].identity_id == samples[j].identity_id) continue;
      if (i > j) std::swap(i, j);
      if (used.insert({i, j}).second) negatives.emplace_back(i, j);
    }
  }

  const auto [left_exp, right_exp] = mode_exposures(mode);
  TrialSet set{mode, {}};
  set.trials.reserve(n_positive + n_negative);
  for (const auto& [l, r] : positives) set.trials.push_back({l, r, left_exp, right_exp, true});
  for (const auto& [l, r] : negatives) set.trials.push_back({l, r, left_exp, right_exp, false});
  std::shuffle(set.trials.begin(), set.trials.end(), rng);
  return set;
}

Vector fused_embedding(const FusionHead& head, const Sample& sample, Exposure exposure) {
  if (!exposure.audio && !exposure.video) throw DegenerateInputError("fused_embedding: empty exposure");
  return head.embed(exposed_input(sample, exposure));
}

double score_trial(const FusionHead& head, const std::vector<Sample>& samples, const Trial& trial) {
  if (trial.left >= samples.size() || trial.right >= samples.size()) {
    throw ConfigError("score_trial: sample index out of range");
  }
  return cosine_similarity(fused_embedding(head, samples[trial.left], trial.left_exposure),
                           fused_embedding(head, samples[trial.right], trial.right_exposure));
}

EerResult compute_eer_split(std::span<const double> targets, std::span<const double> nontargets) {
  if (targets.empty() || nontargets.empty()) {
    throw DegenerateInputError("compute_eer: need at least one target and one nontarget score");
  }
  std::vector<std::pair<double, bool>> all;
  all.reserve(targets.size() + nontargets.size());
  for (double s : targets) all.emplace_back(s, true);
  for (double s : nontargets) all.emplace_back(s, false);
  for (const auto& [s, t] : all)
    if (!std::isfinite(s)) throw DegenerateInputError("compute_eer: non-finite score");
  std::sort(all.begin(), all.end());

  const double nt = static_cast<double>(targets.size());
  const double nn = static_cast<double>(nontargets.size());
  // Walk the distinct thresholds upward. At threshold t, targets strictly
  // below t are rejected and nontargets at or above t are accepted.
  std::size_t targets_below = 0, nontargets_below = 0;
  double prev_far = 1.0, prev_frr = 0.0, prev_t = all.front().first;
  std::size_t i = 0;
  while (true) {
    double t, far, frr;
    if (i < all.size()) {
      t = all[i].first;
      far = (nn - static_cast<double>(nontargets_below)) / nn;
      frr = static_cast<double>(targets_below) / nt;
    } else {
      t = std::nextafter(all.back().first, std::numeric_limits<double>::infinity());
      far = 0.0;
      frr = 1.0;
    }
    if (far <= frr) {
      EerResult r{far, t, targets.size(), nontargets.size()};
      if (far < frr && i > 0) {
        const double d_prev = prev_far - prev_frr;
        const double d_cur = far - frr;
        const double alpha = d_prev / (d_prev - d_cur);
        r.eer = prev_far + alpha * (far - prev_far);
        r.threshold = prev_t + alpha * (t - prev_t);
      }
      return r;
    }
    prev_far = far;
    prev_frr = frr;
    prev_t = t;
    // Consume every score equal to t.
    while (i < all.size() && all[i].first == t) {
      (all[i].second ? targets_below : nontargets_below)++;
      ++i;
    }
  }
}

EerResult compute_eer(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("compute_eer: one label per score");
  std::vector<double> targets, nontargets;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] ? targets : nontargets).push_back(scores[i]);
  if (targets.empty() || nontargets.empty()) {
    throw DegenerateInputError("compute_eer: labels contain a single class");
  }
  return compute_eer_split(targets, nontargets);
}

std::vector<double> AngleReport::all() const {
  std::vector<double> out;
  for (const auto& [id, v] : per_identity) out.insert(out.end(), v.begin(), v.end());
  return out;
}

std::vector<double> CentroidAngles::off_diagonal() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < degrees.rows(); ++i)
    for (std::size_t j = i + 1; j < degrees.cols(); ++j) out.push_back(degrees(i, j));
  return out;
}

AngleReport audio_video_angles(const FusionHead& head, const std::vector<Sample>& samples) {
  if (samples.empty()) throw DegenerateInputError("audio_video_angles: no samples");
  const Matrix ea = embed_all(head, samples, {true, false});
  const Matrix ev = embed_all(head, samples, {false, true});
  AngleReport report{"audio_video", "audio_video", {}, 0};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (is_zero(ea.row(i)) || is_zero(ev.row(i))) {
      ++report.skipped;
      continue;
    }
    report.per_identity[samples[i].identity_id].push_back(angle_deg(ea.row(i), ev.row(i)));
  }
  return report;
}

AngleReport within_identity_angles(const FusionHead& head, const std::vector<Sample>& samples, Modality modality) {
  const Matrix e = embed_all(head, samples, exposure_of(modality));
  AngleReport report{"within_identity", std::string(to_string(modality)), {}, 0};
  std::vector<bool> zero(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    zero[i] = is_zero(e.row(i));
    if (zero[i]) ++report.skipped;
  }
  for (const auto& [id, idx] : group_by_identity(samples)) {
    auto& out = report.per_identity[id];
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = a + 1; b < idx.size(); ++b) {
        if (zero[idx[a]] || zero[idx[b]]) continue;
        out.push_back(angle_deg(e.row(idx[a]), e.row(idx[b])));
      }
    if (out.empty()) report.per_identity.erase(id);
  }
  return report;
}

CentroidAngles centroid_angle_matrix(const FusionHead& head, const std::vector<Sample>& samples, Modality modality) {
  const auto groups = group_by_identity(samples);
  if (groups.size() < 2) throw DegenerateInputError("centroid_angle_matrix: need at least 2 identities");
  const Matrix e = embed_all(head, samples, exposure_of(modality));
  CentroidAngles out{std::string(to_string(modality)), {}, {}, 0};
  std::vector<Vector> centroids;
  for (const auto& [id, idx] : groups) {
    std::vector<Vector> members;
    for (std::size_t i : idx) {
      if (is_zero(e.row(i))) continue;
      members.emplace_back(e.row(i).begin(), e.row(i).end());
    }
    if (members.empty()) {
      ++out.skipped;
      continue;
    }
    Vector c = centroid(members);
    if (is_zero(c)) {
      ++out.skipped;
      continue;
    }
    out.identities.push_back(id);
    centroids.push_back(std::move(c));
  }
  out.degrees = Matrix(centroids.size(), centroids.size());
  for (std::size_t i = 0; i < centroids.size(); ++i)
    for (std::size_t j = i + 1; j < centroids.size(); ++j) {
      const double a = angle_deg(centroids[i], centroids[j]);
      out.degrees(i, j) = a;
      out.degrees(j, i) = a;
    }
  return out;
}

double silhouette_score(const Matrix& points, std::span<const std::size_t> labels, Distance distance) {
  const std::size_t n = points.rows();
  if (labels.size() != n) throw ShapeError("silhouette_score: one label per point");
  std::set<std::size_t> clusters(labels.begin(), labels.end());
  if (clusters.size() < 2) throw DegenerateInputError("silhouette_score: need at least 2 clusters");
  const std::size_t k = *clusters.rbegin() + 1;

  std::vector<Vector> unit;
  if (distance == Distance::Cosine) {
    for (std::size_t i = 0; i < n; ++i) unit.push_back(l2_normalize(points.row(i)));
  }
  auto dist = [&](std::size_t i, std::size_t j) {
    if (distance == Distance::Cosine) return std::max(0.0, 1.0 - dot(unit[i], unit[j]));
    double s = 0.0;
    for (std::size_t d = 0; d < points.cols(); ++d) {
      const double diff = points(i, d) - points(j, d);
      s += diff * diff;
    }
    return std::sqrt(s);
  };

  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t l : labels) ++sizes[l];
  double total = 0.0;
  std::vector<double> sums(k);
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[labels[i]] == 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sums[labels[j]] += dist(i, j);
    const double a = sums[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c)
      if (c != labels[i] && sizes[c] > 0) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

double silhouette_score(const std::vector<Vector>& points, std::span<const std::size_t> labels, Distance distance) {
  if (points.empty()) throw DegenerateInputError("silhouette_score: no points");
  return silhouette_score(Matrix::from_rows(points), labels, distance);
}

BoxplotStats boxplot_stats(std::span<const double> values) {
  if (values.empty()) throw DegenerateInputError("boxplot_stats: no values");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  BoxplotStats s;
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  const double iqr = s.q3 - s.q1;
  const double low_fence = s.q1 - 1.5 * iqr;
  const double high_fence = s.q3 + 1.5 * iqr;
  s.whisker_low = *std::find_if(v.begin(), v.end(), [&](double x) { return x >= low_fence; });
  s.whisker_high = *std::find_if(v.rbegin(), v.rend(), [&](double x) { return x <= high_fence; });
  for (double x : v)
    if (x < s.whisker_low || x > s.whisker_high) s.outliers.push_back(x);
  return s;
}

NullProbeResult null_representation_probe(const MeanFusionHead& head, const std::vector<Sample>& samples,
                                          Modality missing) {
  const LinearLayer& branch = missing == Modality::Audio ? head.proj_audio : head.proj_video;
  const Vector null_rep = linear_forward(branch, Vector(branch.in_dim(), 0.0));
  std::vector<Vector> class_centroids;
  for (const auto& [id, idx] : group_by_identity(samples)) {
    std::vector<Vector> members;
    for (std::size_t i : idx) {
      members.push_back(linear_forward(branch, missing == Modality::Audio ? samples[i].audio : samples[i].video));
    }
    class_centroids.push_back(centroid(members));
  }
  if (class_centroids.size() < 2) throw DegenerateInputError("null_representation_probe: need at least 2 identities");
  NullProbeResult r;
  r.n_classes = class_centroids.size();
  r.angle_to_centroid_of_centroids = angle_deg(null_rep, centroid(class_centroids));
  std::vector<double> angles;
  for (const auto& c : class_centroids) angles.push_back(angle_deg(null_rep, c));
  r.median_angle_to_class_centroids = boxplot_stats(angles).median;
  return r;
}

DiagnosticsReport run_diagnostics(const FusionHead& head, const std::vector<Sample>& samples,
                                  std::string model_label) {
  DiagnosticsReport report;
  report.model = model_label.empty() ? std::string(to_string(head.kind())) : std::move(model_label);

  report.audio_video = audio_video_angles(head, samples);
  report.within_audio = within_identity_angles(head, samples, Modality::Audio);
  report.within_video = within_identity_angles(head, samples, Modality::Video);
  report.between_audio = centroid_angle_matrix(head, samples, Modality::Audio);
  report.between_video = centroid_angle_matrix(head, samples, Modality::Video);
  report.warnings += report.audio_video.skipped + report.within_audio.skipped + report.within_video.skipped +
                     report.between_audio.skipped + report.between_video.skipped;

  const auto labels = identity_labels(samples);
  auto silhouette = [&](const Matrix& e) {
    std::vector<Vector> pts;
    std::vector<std::size_t> lab;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (is_zero(e.row(i))) continue;
      pts.emplace_back(e.row(i).begin(), e.row(i).end());
      lab.push_back(labels[i]);
    }
    if (std::set<std::size_t>(lab.begin(), lab.end()).size() < 2) {
      ++report.warnings;  // too few live embeddings to cluster
      return std::numeric_limits<double>::quiet_NaN();
    }
    return silhouette_score(pts, lab, Distance::Cosine);
  };
  report.silhouette_audio = silhouette(embed_all(head, samples, {true, false}));
  report.silhouette_video = silhouette(embed_all(head, samples, {false, true}));
  return report;
}

DiagnosticsReport run_full_evaluation(const FusionHead& head, const std::vector<Sample>& samples,
                                      const TrialConfig& config, std::string model_label) {
  DiagnosticsReport report = run_diagnostics(head, samples, std::move(model_label));

  const Matrix emb_a = embed_all(head, samples, {true, false});
  const Matrix emb_v = embed_all(head, samples, {false, true});
  const Matrix emb_av = embed_all(head, samples, {true, true});
  auto embedding = [&](std::size_t i, Exposure e) {
    if (e.audio && e.video) return emb_av.row(i);
    return e.audio ? emb_a.row(i) : emb_v.row(i);
  };

  for (ModalityMode mode : kAllModes) {
    const TrialSet set = build_trials(samples, mode, config.n_positive, config.n_negative, config.seed);
    ModeResult mr;
    mr.mode = mode;
    for (const Trial& t : set.trials) {
      const auto l = embedding(t.left, t.left_exposure);
      const auto r = embedding(t.right, t.right_exposure);
      if (is_zero(l) || is_zero(r)) {
        ++mr.skipped_trials;
        continue;
      }
      mr.scores.push_back(cosine_similarity(l, r));
      mr.labels.push_back(t.target);
    }
    const auto n_target = static_cast<std::size_t>(std::count(mr.labels.begin(), mr.labels.end(), true));
    if (mr.skipped_trials > 0 && (n_target == 0 || n_target == mr.labels.size())) {
      // skipping emptied one side; EER undefined for this mode
      const double nan = std::numeric_limits<double>::quiet_NaN();
      mr.eer = {nan, nan, n_target, mr.labels.size() - n_target};
      ++report.warnings;
    } else {
      mr.eer = compute_eer(mr.scores, mr.labels);
    }
    report.warnings += mr.skipped_trials;
    report.modes.push_back(std::move(mr));
  }
  return report;
}

}  // namespace avf
