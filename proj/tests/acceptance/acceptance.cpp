// Acceptance suite: one line per criterion, "criterion N: PASS|FAIL|WARN ...".
// Usage: avfusion_acceptance [--workdir DIR] [--known-red N]...
// Exit status is nonzero when a criterion fails that is not listed as known-red.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "avfusion/cli.hpp"
#include "avfusion/errors.hpp"
#include "avfusion/evaluation.hpp"
#include "avfusion/io.hpp"
#include "avfusion/training.hpp"
#include "oracles.hpp"

using namespace avf;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

struct Outcome {
  enum Status { Pass, Fail, Warn } status = Fail;
  std::string detail;
};

void run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) throw std::runtime_error("avfusion " + args[2] + " exited " + std::to_string(code) + ": " + err.str());
}

// ---------------------------------------------------------------- 1

Outcome gradients() {
  const auto t0 = Clock::now();
  const HeadDims dims{16, 32, 8, 24};
  double worst = 0.0;
  std::string worst_at;
  std::size_t checked = 0;
  for (HeadKind kind : {HeadKind::Mean, HeadKind::Mlp, HeadKind::MultiView}) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      TrainingConfig cfg;
      cfg.seed = seed;
      Model m = make_model(kind, dims, 5, cfg);
      std::mt19937_64 rng(seed * 1000 + static_cast<std::uint64_t>(kind));
      std::vector<ModalityInput> batch;
      std::vector<std::size_t> labels;
      std::vector<MaskMode> masks;
      Rng mask_rng(seed);
      for (std::size_t i = 0; i < 10; ++i) {
        batch.push_back(ModalityInput::both(oracle::gaussian(16, rng), oracle::gaussian(32, rng)));
        labels.push_back(i % 5);
        masks.push_back(kind == HeadKind::MultiView ? MaskMode::None : sample_mask_mode(mask_rng));
      }
      const LossWeights w{0.5, 0.5};
      auto loss = [&] {
        Rng drop(seed + 77);
        return compute_batch_loss(*m.head, m.arc, batch, labels, masks, w, &drop).loss;
      };
      Rng drop(seed + 77);
      const auto analytic = compute_batch_loss(*m.head, m.arc, batch, labels, masks, w, &drop).gradients;
      const auto params = m.parameters();
      const auto numeric = oracle::finite_differences(params, loss, 1e-5);
      for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t i = 0; i < numeric[p].size(); ++i) {
          const double e = oracle::relative_error(analytic[p][i], numeric[p][i]);
          ++checked;
          if (e > worst) {
            worst = e;
            worst_at = std::string(to_string(kind)) + " seed " + std::to_string(seed) + " " + params[p].name;
          }
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = worst < 1e-4 && secs < 120.0;
  return {ok ? Outcome::Pass : Outcome::Fail,
          std::to_string(checked) + " partials, max rel err " + fmt("%.3g", worst) + " (" + worst_at + "), " +
              fmt("%.1f", secs) + " s"};
}

// ---------------------------------------------------------------- 2

Outcome margin_reduction() {
  std::mt19937_64 rng(2);
  double worst_logit = 0.0, worst_loss = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = 2 + rng() % 15, k = 2 + rng() % 10;
    Rng init(rng());
    ArcMarginHead head = ArcMarginHead::init(d, k, init, 1.0 + 30.0 * uniform01(init), 0.0);
    const Vector e = oracle::gaussian(d, rng);
    const std::size_t target = rng() % k;
    const Vector a = arc_margin_logits(head, e, target);
    const Vector c = cosine_logits(head, e);
    for (std::size_t j = 0; j < k; ++j) worst_logit = std::max(worst_logit, std::abs(a[j] - c[j]));
    worst_loss = std::max(worst_loss,
                          std::abs(arc_margin_loss(head, e, target).loss - softmax_cross_entropy(c, target)));
  }
  const bool ok = worst_logit <= 1e-12 && worst_loss <= 1e-12;
  return {ok ? Outcome::Pass : Outcome::Fail,
          "100 draws, max |logit diff| " + fmt("%.3g", worst_logit) + ", max |loss diff| " + fmt("%.3g", worst_loss)};
}

// ---------------------------------------------------------------- 3

Outcome eer_oracle() {
  const double example =
      compute_eer(std::vector<double>{0.9, 0.7, 0.3, 0.8, 0.2, 0.1}, {true, true, true, false, false, false}).eer;
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 2 + rng() % 199;
    const std::size_t nt = 1 + rng() % (n - 1);
    const bool coarse = t % 4 == 0;
    std::normal_distribution<double> g(0.0, 1.0);
    const double shift = 2.0 * uniform01(rng);
    auto draw = [&](double mu) {
      const double x = g(rng) + mu;
      return coarse ? std::round(x * 3.0) / 3.0 : x;
    };
    std::vector<double> tg, nn;
    for (std::size_t i = 0; i < nt; ++i) tg.push_back(draw(shift));
    for (std::size_t i = nt; i < n; ++i) nn.push_back(draw(0.0));
    worst = std::max(worst, std::abs(compute_eer_split(tg, nn).eer - oracle::brute_force_eer(tg, nn)));
  }
  const bool ok = worst <= 1e-9 && std::abs(example - 1.0 / 3.0) <= 1e-12;
  return {ok ? Outcome::Pass : Outcome::Fail,
          "500 sets, max |eer - oracle| " + fmt("%.3g", worst) + "; example " + fmt("%.12g", example)};
}

// ---------------------------------------------------- desk runs (4, 6, 7)

struct DeskRun {
  std::uint64_t seed = 0;
  std::map<std::string, DiagnosticsReport> reports;  // by head name
  io::Checkpoint mean;
  std::vector<Sample> test;
  double seconds = 0.0;
};

DeskRun desk_run(const fs::path& root, std::uint64_t seed) {
  const auto t0 = Clock::now();
  const fs::path dir = root / ("seed_" + std::to_string(seed));
  fs::remove_all(dir);
  const std::string s = std::to_string(seed);
  run_cli({"--seed", s, "generate", "--out", (dir / "data").string()});
  std::vector<std::string> eval{"--seed", s, "evaluate", "--test", (dir / "data" / "test.avfe").string(), "--out",
                                (dir / "eval").string(), "--positive", "500", "--negative", "500", "--format",
                                "structured"};
  for (const std::string head : {"mean", "mlp", "multiview"}) {
    run_cli({"--seed", s, "train", "--train", (dir / "data" / "train.avfe").string(), "--val",
             (dir / "data" / "val.avfe").string(), "--out", (dir / head).string(), "--head", head, "--epochs", "10",
             "--batch-size", "128"});
    eval.push_back("--checkpoint");
    eval.push_back((dir / head / "checkpoint.avfc").string());
  }
  run_cli(eval);
  DeskRun r;
  r.seed = seed;
  r.seconds = seconds_since(t0);
  for (auto& rep : io::read_structured_report(dir / "eval" / "report.json")) r.reports[rep.model] = rep;
  r.mean = io::load_checkpoint(dir / "mean" / "checkpoint.avfc", HeadKind::Mean);
  r.test = io::read_embeddings(dir / "data" / "test.avfe");
  return r;
}

Outcome desk_training(const DeskRun& run) {
  bool ok = run.seconds < 300.0;
  std::string detail;
  for (const char* head : {"mean", "mlp", "multiview"}) {
    const auto& rep = run.reports.at(head);
    std::map<ModalityMode, double> eer;
    for (const auto& m : rep.modes) eer[m.mode] = m.eer.eer;
    const bool pass = eer[ModalityMode::AVxAV] < 0.05 && eer[ModalityMode::AxA] < 0.25 && eer[ModalityMode::VxV] < 0.25;
    ok = ok && pass;
    detail += std::string(head) + " AVxAV " + fmt("%.3f", eer[ModalityMode::AVxAV]) + " AxA " +
              fmt("%.3f", eer[ModalityMode::AxA]) + " VxV " + fmt("%.3f", eer[ModalityMode::VxV]) + "; ";
  }
  detail += "limits AVxAV < 0.05, AxA/VxV < 0.25; " + fmt("%.1f", run.seconds) + " s";
  return {ok ? Outcome::Pass : Outcome::Fail, detail};
}

// ---------------------------------------------------------------- 5

Outcome null_equals_zero() {
  std::mt19937_64 rng(5);
  std::size_t mismatches = 0, checked = 0;
  for (HeadKind kind : {HeadKind::Mean, HeadKind::Mlp}) {
    Rng init(55);
    auto head = make_head(kind, HeadDims::desk(), init, DropoutSpec{0.1});
    if (auto* mlp = dynamic_cast<MlpFusionHead*>(head.get())) {
      for (auto& b : mlp->buffers())
        for (double& x : b.values) x = 0.25 + uniform01(init);
    }
    for (int i = 0; i < 1000; ++i) {
      const Vector a = oracle::gaussian(16, rng), v = oracle::gaussian(32, rng);
      const bool drop_audio = i % 2 == 0;
      const ModalityInput null_in = drop_audio ? ModalityInput::video_only(v) : ModalityInput::audio_only(a);
      const ModalityInput zero_in =
          drop_audio ? ModalityInput::both(Vector(16, 0.0), v) : ModalityInput::both(a, Vector(32, 0.0));
      ++checked;
      if (head->embed(null_in) != head->embed(zero_in)) ++mismatches;
    }
  }
  return {mismatches == 0 ? Outcome::Pass : Outcome::Fail,
          std::to_string(checked) + " inputs, " + std::to_string(mismatches) + " not bit-identical"};
}

// ---------------------------------------------------------------- 6

Outcome null_probe(const std::vector<DeskRun>& runs) {
  int closer = 0;
  std::string detail;
  for (const auto& r : runs) {
    const auto& mean = dynamic_cast<const MeanFusionHead&>(*r.mean.head);
    const auto p = null_representation_probe(mean, r.test, Modality::Audio);
    if (p.closer_than_median()) ++closer;
    detail += "seed " + std::to_string(r.seed) + ": " + fmt("%.2f", p.angle_to_centroid_of_centroids) + " vs median " +
              fmt("%.2f", p.median_angle_to_class_centroids) + " deg; ";
  }
  detail += std::to_string(closer) + "/3 closer";
  return {closer >= 2 ? Outcome::Pass : Outcome::Warn, detail};
}

// ---------------------------------------------------------------- 7

double cohens_d(const std::vector<double>& a, const std::vector<double>& b) {
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto var = [&](const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
  };
  const double pooled = std::sqrt(((a.size() - 1) * var(a) + (b.size() - 1) * var(b)) / (a.size() + b.size() - 2));
  return (mean(a) - mean(b)) / pooled;
}

Outcome av_angle_direction(const std::vector<DeskRun>& runs) {
  bool ok = true;
  std::string detail;
  for (const auto& r : runs) {
    const auto mean = r.reports.at("mean").audio_video.all();
    const auto mv = r.reports.at("multiview").audio_video.all();
    const double m1 = oracle::quantile(mean, 0.5), m2 = oracle::quantile(mv, 0.5);
    ok = ok && m1 >= m2;
    detail += "seed " + std::to_string(r.seed) + ": mean " + fmt("%.2f", m1) + " vs multiview " + fmt("%.2f", m2) +
              " deg, d=" + fmt("%.2f", cohens_d(mean, mv)) + "; ";
  }
  return {ok ? Outcome::Pass : Outcome::Fail, detail};
}

// ---------------------------------------------------------------- 8

Outcome determinism(const fs::path& root) {
  const fs::path dir = root / "determinism";
  fs::remove_all(dir);
  run_cli({"--seed", "8", "generate", "--out", (dir / "data").string(), "--identities", "20"});
  std::vector<std::string> tags;
  bool ok = true;
  for (const std::string head : {"mean", "mlp", "multiview"}) {
    for (const char* rep : {"a", "b"}) {
      run_cli({"--seed", "8", "train", "--train", (dir / "data" / "train.avfe").string(), "--val",
               (dir / "data" / "val.avfe").string(), "--out", (dir / (head + rep)).string(), "--head", head,
               "--epochs", "5", "--batch-size", "64"});
    }
    for (const char* f : {"checkpoint.avfc", "epochs.jsonl"}) {
      const bool same = io::read_text(dir / (head + "a") / f) == io::read_text(dir / (head + "b") / f);
      ok = ok && same;
      if (!same) tags.push_back(head + "/" + f);
    }
  }
  std::string detail = "3 heads x (checkpoint, epoch log) compared byte-for-byte";
  for (const auto& t : tags) detail += "; differs: " + t;
  return {ok ? Outcome::Pass : Outcome::Fail, detail};
}

// ---------------------------------------------------------------- 9

bool same_bits(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  return true;
}

bool close6(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::abs(a - b) <= 5e-6 * std::abs(b);
}

Outcome round_trips(const fs::path& root) {
  const fs::path dir = root / "roundtrip";
  fs::create_directories(dir);
  std::mt19937_64 rng(9);
  int bad_emb = 0, bad_ckp = 0, bad_rep = 0;
  for (int t = 0; t < 100; ++t) {
    // embeddings
    const std::size_t da = 1 + rng() % 12, dv = 1 + rng() % 12, n = rng() % 30;
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < n; ++i)
      samples.push_back({"id" + std::to_string(rng() % 5), "s" + std::to_string(i), oracle::gaussian(da, rng, 10.0),
                         oracle::gaussian(dv, rng, 1e-3)});
    io::write_embeddings(dir / "e.avfe", samples);
    const auto back = io::read_embeddings(dir / "e.avfe");
    bool ok = back.size() == samples.size();
    for (std::size_t i = 0; ok && i < n; ++i)
      ok = back[i].identity_id == samples[i].identity_id && back[i].sample_id == samples[i].sample_id &&
           same_bits(back[i].audio, samples[i].audio) && same_bits(back[i].video, samples[i].video);
    bad_emb += !ok;

    // checkpoint
    const HeadKind kind = static_cast<HeadKind>(t % 3);
    const HeadDims dims{1 + rng() % 10, 1 + rng() % 10, 1 + rng() % 6, 1 + rng() % 10};
    Rng init(rng());
    auto head = make_head(kind, dims, init, DropoutSpec{0.05 * static_cast<double>(t % 5)});
    if (auto* mlp = dynamic_cast<MlpFusionHead*>(head.get()))
      for (auto& b : mlp->buffers())
        for (double& x : b.values) x = 0.1 + uniform01(init);
    const std::size_t k = 1 + rng() % 6;
    const auto arc = ArcMarginHead::init(dims.embed_dim, k, init, 8.0 + t, 0.01 * t);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < k; ++i) ids.push_back("class_" + std::to_string(i));
    const io::Provenance prov{static_cast<std::size_t>(t), uniform01(init), rng(), R"({"case":)" + std::to_string(t) + "}"};
    io::save_checkpoint(dir / "c.avfc", *head, arc, ids, prov);
    const auto ck = io::load_checkpoint(dir / "c.avfc", kind);
    ok = ck.head->dims() == dims && ck.arc.prototypes == arc.prototypes && ck.arc.scale == arc.scale &&
         ck.arc.margin == arc.margin && ck.class_ids == ids && ck.provenance == prov &&
         ck.head->dropout_probability() == head->dropout_probability();
    const auto p1 = head->parameters(), p2 = ck.head->parameters();
    const auto b1 = std::as_const(*head).buffers(), b2 = std::as_const(*ck.head).buffers();
    ok = ok && p1.size() == p2.size() && b1.size() == b2.size();
    for (std::size_t i = 0; ok && i < p1.size(); ++i)
      ok = same_bits(Vector(p1[i].values.begin(), p1[i].values.end()), Vector(p2[i].values.begin(), p2[i].values.end()));
    for (std::size_t i = 0; ok && i < b1.size(); ++i)
      ok = same_bits(Vector(b1[i].values.begin(), b1[i].values.end()), Vector(b2[i].values.begin(), b2[i].values.end()));
    for (int i = 0; ok && i < 5; ++i) {
      const auto in = ModalityInput::both(oracle::gaussian(dims.audio_dim, rng), oracle::gaussian(dims.video_dim, rng));
      ok = same_bits(head->embed(in), ck.head->embed(in));
    }
    bad_ckp += !ok;

    // structured report
    DatasetConfig dc;
    dc.n_identities = 3 + rng() % 3;
    dc.samples_per_identity = 4;
    dc.audio_dim = da + 1;
    dc.video_dim = dv + 1;
    dc.seed = rng();
    const auto data = sample_dataset(generate_identities(dc), dc);
    Rng hinit(rng());
    auto rh = make_head(kind, HeadDims{dc.audio_dim, dc.video_dim, 4, 6}, hinit);
    const auto rep = run_full_evaluation(*rh, data, {6, 6, rng()}, "m" + std::to_string(t));
    io::write_report(dir / "r.json", {rep}, io::ReportFormat::Structured);
    const auto rb = io::read_structured_report(dir / "r.json");
    ok = rb.size() == 1 && rb[0].model == rep.model && rb[0].modes.size() == rep.modes.size() &&
         rb[0].warnings == rep.warnings && close6(rb[0].silhouette_audio, rep.silhouette_audio) &&
         close6(rb[0].silhouette_video, rep.silhouette_video);
    for (std::size_t i = 0; ok && i < rep.modes.size(); ++i)
      ok = rb[0].modes[i].mode == rep.modes[i].mode && close6(rb[0].modes[i].eer.eer, rep.modes[i].eer.eer) &&
           close6(rb[0].modes[i].eer.threshold, rep.modes[i].eer.threshold) &&
           rb[0].modes[i].eer.n_target == rep.modes[i].eer.n_target;
    for (auto [x, y] : {std::pair{&rb[0].audio_video, &rep.audio_video}, std::pair{&rb[0].within_audio, &rep.within_audio},
                        std::pair{&rb[0].within_video, &rep.within_video}}) {
      const auto u = x->all(), v = y->all();
      ok = ok && u.size() == v.size() && x->family == y->family && x->modality == y->modality;
      for (std::size_t i = 0; ok && i < u.size(); ++i) ok = close6(u[i], v[i]);
    }
    for (auto [x, y] : {std::pair{&rb[0].between_audio, &rep.between_audio}, std::pair{&rb[0].between_video, &rep.between_video}}) {
      ok = ok && x->identities == y->identities && x->degrees.rows() == y->degrees.rows();
      const auto u = x->off_diagonal(), v = y->off_diagonal();
      for (std::size_t i = 0; ok && i < u.size(); ++i) ok = close6(u[i], v[i]);
    }
    bad_rep += !ok;
  }
  const bool ok = bad_emb + bad_ckp + bad_rep == 0;
  return {ok ? Outcome::Pass : Outcome::Fail,
          "100 cases; failures: embeddings " + std::to_string(bad_emb) + ", checkpoints " + std::to_string(bad_ckp) +
              ", reports " + std::to_string(bad_rep)};
}

// ---------------------------------------------------------------- 10

Outcome metric_invariants() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(0.0, 1.0);
  double eer_drift = 0.0;
  const std::vector<std::function<double(double)>> transforms{
      [](double x) { return 2.5 * x + 4.0; }, [](double x) { return x * x * x + x; },
      [](double x) { return std::exp(x); }, [](double x) { return std::atan(x); }};
  for (int t = 0; t < 200; ++t) {
    std::vector<double> tg, nn;
    for (std::size_t i = 0, n = 5 + rng() % 100; i < n; ++i) tg.push_back(g(rng) + 1.0);
    for (std::size_t i = 0, n = 5 + rng() % 100; i < n; ++i) nn.push_back(g(rng));
    const double base = compute_eer_split(tg, nn).eer;
    for (const auto& f : transforms) {
      std::vector<double> a, b;
      for (double x : tg) a.push_back(f(x));
      for (double x : nn) b.push_back(f(x));
      eer_drift = std::max(eer_drift, std::abs(compute_eer_split(a, b).eer - base));
    }
  }

  double sil_lo = 1.0, sil_hi = -1.0;
  for (int t = 0; t < 200; ++t) {
    std::vector<Vector> pts;
    std::vector<std::size_t> labels;
    const std::size_t k = 2 + rng() % 4;
    for (std::size_t i = 0, n = k + rng() % 60; i < n; ++i) {
      labels.push_back(i < k ? i : rng() % k);
      pts.push_back(oracle::gaussian(1 + rng() % 6, rng));
      pts.back().resize(6, 0.0);
    }
    for (Distance d : {Distance::Cosine, Distance::Euclidean}) {
      const double s = silhouette_score(pts, labels, d);
      sil_lo = std::min(sil_lo, s);
      sil_hi = std::max(sil_hi, s);
    }
  }
  std::vector<Vector> pts;
  std::vector<std::size_t> labels;
  for (int i = 0; i < 60; ++i) {
    Vector v = oracle::gaussian(4, rng, 0.02);
    v[i % 2] += 1.0;
    pts.push_back(v);
    labels.push_back(i % 2);
  }
  const double two_cluster = silhouette_score(pts, labels);

  double ang_lo = 180.0, ang_hi = 0.0;
  for (int t = 0; t < 6; ++t) {
    DatasetConfig dc;
    dc.n_identities = 6;
    dc.samples_per_identity = 8;
    dc.seed = rng();
    const auto data = sample_dataset(generate_identities(dc), dc);
    Rng init(rng());
    auto head = make_head(static_cast<HeadKind>(t % 3), HeadDims::desk(), init);
    const auto rep = run_diagnostics(*head, data);
    for (const AngleReport* a : {&rep.audio_video, &rep.within_audio, &rep.within_video})
      for (double x : a->all()) {
        ang_lo = std::min(ang_lo, x);
        ang_hi = std::max(ang_hi, x);
      }
    for (const CentroidAngles* c : {&rep.between_audio, &rep.between_video})
      for (double x : c->degrees.values()) {
        ang_lo = std::min(ang_lo, x);
        ang_hi = std::max(ang_hi, x);
      }
  }
  const double secs = seconds_since(t0);
  const bool ok = eer_drift == 0.0 && sil_lo >= -1.0 && sil_hi <= 1.0 && two_cluster > 0.9 && ang_lo >= 0.0 &&
                  ang_hi <= 180.0 && secs < 60.0;
  return {ok ? Outcome::Pass : Outcome::Fail,
          "max EER drift " + fmt("%.3g", eer_drift) + "; silhouette range [" + fmt("%.3f", sil_lo) + ", " +
              fmt("%.3f", sil_hi) + "], two-cluster " + fmt("%.4f", two_cluster) + "; angles [" +
              fmt("%.2f", ang_lo) + ", " + fmt("%.2f", ang_hi) + "]; " + fmt("%.1f", secs) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path workdir = fs::temp_directory_path() / "avfusion_acceptance";
  std::set<int> known_red;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--workdir" && i + 1 < argc) {
      workdir = argv[++i];
    } else if (a == "--known-red" && i + 1 < argc) {
      known_red.insert(std::stoi(argv[++i]));
    } else {
      std::cerr << "usage: " << argv[0] << " [--workdir DIR] [--known-red N]...\n";
      return 2;
    }
  }
  fs::create_directories(workdir);

  std::map<int, Outcome> results;
  auto guarded = [&](int n, const std::function<Outcome()>& f) {
    try {
      results[n] = f();
    } catch (const std::exception& e) {
      results[n] = {Outcome::Fail, std::string("exception: ") + e.what()};
    }
    const auto& o = results[n];
    std::cout << "criterion " << n << ": " << (o.status == Outcome::Pass ? "PASS" : o.status == Outcome::Warn ? "WARN" : "FAIL")
              << "  " << o.detail << std::endl;
  };

  guarded(1, gradients);
  guarded(2, margin_reduction);
  guarded(3, eer_oracle);

  std::vector<DeskRun> runs;
  std::string desk_error;
  try {
    for (std::uint64_t seed : {4242, 4243, 4244}) runs.push_back(desk_run(workdir, seed));
  } catch (const std::exception& e) {
    desk_error = e.what();
  }
  auto need_runs = [&](std::function<Outcome()> f) {
    return [f, &desk_error]() -> Outcome {
      if (!desk_error.empty()) throw std::runtime_error(desk_error);
      return f();
    };
  };
  guarded(4, need_runs([&] { return desk_training(runs.front()); }));
  guarded(5, null_equals_zero);
  guarded(6, need_runs([&] { return null_probe(runs); }));
  guarded(7, need_runs([&] { return av_angle_direction(runs); }));
  guarded(8, [&] { return determinism(workdir); });
  guarded(9, [&] { return round_trips(workdir); });
  guarded(10, metric_invariants);

  int unexpected = 0;
  for (const auto& [n, o] : results) {
    if (o.status != Outcome::Fail) continue;
    if (known_red.count(n)) {
      std::cout << "note: criterion " << n << " fails and is listed as known-red\n";
    } else {
      ++unexpected;
    }
  }
  for (int n : known_red)
    if (results.count(n) && results[n].status != Outcome::Fail)
      std::cout << "note: criterion " << n << " is listed as known-red but did not fail\n";
  std::cout << (unexpected == 0 ? "acceptance: ok" : "acceptance: " + std::to_string(unexpected) + " unexpected failure(s)")
            << std::endl;
  return unexpected == 0 ? 0 : 1;
}
