#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <fstream>
#include <random>
#include <regex>

#include "avfusion/errors.hpp"
#include "avfusion/io.hpp"
#include "oracles.hpp"

using namespace avf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  fs::path dir = fs::temp_directory_path() / "avfusion_io_tests" / (std::string(info->test_suite_name()) + "." + info->name());
  fs::create_directories(dir);
  return dir / name;
}

std::vector<Sample> random_samples(std::size_t n, std::size_t da, std::size_t dv, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({"id" + std::to_string(i % 7), "s" + std::to_string(i), oracle::gaussian(da, rng),
                   oracle::gaussian(dv, rng)});
  }
  // a few awkward values
  if (n > 2) {
    out[0].audio[0] = -0.0;
    out[1].video[0] = 1e-310;
    out[2].audio[0] = std::numeric_limits<double>::max();
  }
  return out;
}

std::string bytes(const fs::path& p) { return io::read_text(p); }

void put(const fs::path& p, const std::string& b) { io::write_text(p, b); }

ParseErrorKind parse_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no ParseError";
  return ParseErrorKind::Malformed;
}

DiagnosticsReport small_report(HeadKind kind, const std::string& label) {
  DatasetConfig c;
  c.n_identities = 5;
  c.samples_per_identity = 6;
  c.seed = 3;
  const auto data = sample_dataset(generate_identities(c), c);
  Rng init(11);
  auto head = make_head(kind, HeadDims::desk(), init);
  return run_full_evaluation(*head, data, {20, 20, 1}, label);
}

}  // namespace

TEST(Embeddings, EmptyRoundTrip) {
  const auto p = scratch("empty.avfe");
  io::write_embeddings(p, {});
  EXPECT_TRUE(io::read_embeddings(p).empty());
}

TEST(Embeddings, BitExactRoundTrip) {
  const auto p = scratch("many.avfe");
  const auto samples = random_samples(1000, 16, 32, 1);
  io::write_embeddings(p, samples);
  const auto back = io::read_embeddings(p);
  ASSERT_EQ(back.size(), samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(back[i].identity_id, samples[i].identity_id);
    EXPECT_EQ(back[i].sample_id, samples[i].sample_id);
    ASSERT_EQ(back[i].audio.size(), 16u);
    for (std::size_t k = 0; k < 16; ++k)
      EXPECT_EQ(std::bit_cast<std::uint64_t>(back[i].audio[k]), std::bit_cast<std::uint64_t>(samples[i].audio[k]));
    for (std::size_t k = 0; k < 32; ++k)
      EXPECT_EQ(std::bit_cast<std::uint64_t>(back[i].video[k]), std::bit_cast<std::uint64_t>(samples[i].video[k]));
  }
  // writing again gives the same bytes
  const auto p2 = scratch("again.avfe");
  io::write_embeddings(p2, back);
  EXPECT_EQ(bytes(p), bytes(p2));
}

TEST(Embeddings, RandomRoundTrips) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 100; ++t) {
    const auto samples = random_samples(rng() % 20, 1 + rng() % 9, 1 + rng() % 9, rng());
    const auto p = scratch("r.avfe");
    io::write_embeddings(p, samples);
    EXPECT_EQ(io::read_embeddings(p), samples);
  }
}

TEST(Embeddings, DistinctParseErrors) {
  const auto good = scratch("good.avfe");
  io::write_embeddings(good, random_samples(3, 4, 5, 2));
  const std::string b = bytes(good);
  const auto bad = scratch("bad.avfe");

  std::string m = b;
  m[0] = 'X';
  put(bad, m);
  EXPECT_EQ(parse_kind([&] { io::read_embeddings(bad); }), ParseErrorKind::BadMagic);

  m = b;
  m[6] = 'B';
  put(bad, m);
  EXPECT_EQ(parse_kind([&] { io::read_embeddings(bad); }), ParseErrorKind::BadMagic);

  m = b;
  m[8] = 2;
  put(bad, m);
  EXPECT_EQ(parse_kind([&] { io::read_embeddings(bad); }), ParseErrorKind::Version);

  put(bad, b.substr(0, b.size() - 3));
  EXPECT_EQ(parse_kind([&] { io::read_embeddings(bad); }), ParseErrorKind::Truncated);

  put(bad, b.substr(0, 10));
  EXPECT_EQ(parse_kind([&] { io::read_embeddings(bad); }), ParseErrorKind::Truncated);

  // zero audio dimension with samples present
  m = b;
  m[12] = 0;
  put(bad, m);
  EXPECT_EQ(parse_kind([&] { io::read_embeddings(bad); }), ParseErrorKind::Dimension);

  put(bad, b + std::string(8, '\0'));
  EXPECT_EQ(parse_kind([&] { io::read_embeddings(bad); }), ParseErrorKind::Dimension);

  EXPECT_THROW(io::read_embeddings(scratch("missing.avfe")), IoError);
}

TEST(Checkpoint, RoundTripBitIdenticalOutputs) {
  for (HeadKind kind : {HeadKind::Mean, HeadKind::Mlp, HeadKind::MultiView}) {
    Rng init(5);
    auto head = make_head(kind, HeadDims::desk(), init, DropoutSpec{0.1});
    if (auto* mlp = dynamic_cast<MlpFusionHead*>(head.get())) {
      // non-trivial running statistics
      for (auto& v : mlp->buffers())
        for (double& x : v.values) x = 0.5 + uniform01(init);
    }
    const auto arc = ArcMarginHead::init(8, 4, init);
    const std::vector<std::string> ids{"a", "b", "c", "d"};
    const io::Provenance prov{7, 0.625, 99, R"({"lr":0.001})"};
    const auto p = scratch(std::string(to_string(kind)) + ".avfc");
    io::save_checkpoint(p, *head, arc, ids, prov);

    const auto ck = io::load_checkpoint(p, kind);
    EXPECT_EQ(ck.head->kind(), kind);
    EXPECT_EQ(ck.head->dims(), head->dims());
    EXPECT_EQ(ck.head->dropout_probability(), 0.1);
    EXPECT_EQ(ck.arc.prototypes, arc.prototypes);
    EXPECT_EQ(ck.arc.scale, arc.scale);
    EXPECT_EQ(ck.arc.margin, arc.margin);
    EXPECT_EQ(ck.class_ids, ids);
    EXPECT_EQ(ck.provenance, prov);

    std::mt19937_64 rng(17);
    for (int i = 0; i < 100; ++i) {
      const ModalityInput in = ModalityInput::both(oracle::gaussian(16, rng), oracle::gaussian(32, rng));
      EXPECT_EQ(ck.head->embed(in), head->embed(in));
    }
    EXPECT_THROW(io::load_checkpoint(p, kind == HeadKind::Mean ? HeadKind::Mlp : HeadKind::Mean), HeadKindError);
  }
}

TEST(Checkpoint, CorruptionDetected) {
  Rng init(5);
  MeanFusionHead head(HeadDims::desk(), init);
  const auto arc = ArcMarginHead::init(8, 3, init);
  const auto p = scratch("c.avfc");
  io::save_checkpoint(p, head, arc, {"a", "b", "c"}, {});
  const std::string b = bytes(p);
  const auto bad = scratch("bad.avfc");

  std::string m = b;
  m[1] = 'Z';
  put(bad, m);
  EXPECT_EQ(parse_kind([&] { io::load_checkpoint(bad); }), ParseErrorKind::BadMagic);
  m = b;
  m[8] = 9;
  put(bad, m);
  EXPECT_EQ(parse_kind([&] { io::load_checkpoint(bad); }), ParseErrorKind::Version);
  put(bad, b.substr(0, b.size() - 8));
  EXPECT_EQ(parse_kind([&] { io::load_checkpoint(bad); }), ParseErrorKind::Truncated);
  put(bad, b + std::string(8, '\0'));
  EXPECT_EQ(parse_kind([&] { io::load_checkpoint(bad); }), ParseErrorKind::Dimension);
}

TEST(EpochLog, RoundTrip) {
  const std::vector<EpochRecord> recs{{1, 2.5, 0.25, 0.001, true}, {2, 2.25, 0.25, 0.00095, false}};
  const auto p = scratch("epochs.jsonl");
  io::write_epoch_log(p, recs);
  EXPECT_EQ(io::read_epoch_log(p), recs);
}

TEST(Report, TabularRows) {
  const auto dir = scratch("tab");
  io::write_report(dir, {small_report(HeadKind::Mean, "mean")}, io::ReportFormat::Tabular);
  const std::string eer = bytes(dir / "eer.csv");
  EXPECT_EQ(std::count(eer.begin(), eer.end(), '\n'), 7);
  for (auto m : kAllModes) EXPECT_NE(eer.find("mean," + std::string(to_string(m)) + ","), std::string::npos);
  const std::string table = bytes(dir / "table.csv");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 2);
  EXPECT_EQ(table.rfind("model,AVxAV", 0), 0u);
  EXPECT_NE(bytes(dir / "angles.csv").find("mean,between_identity,audio,*"), std::string::npos);
}

TEST(Report, EmptyIsHeaderOnly) {
  const auto dir = scratch("empty");
  io::write_report(dir, {}, io::ReportFormat::Tabular);
  for (const char* f : {"eer.csv", "angles.csv", "silhouette.csv", "table.csv"}) {
    const std::string s = bytes(dir / f);
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 1) << f;
  }
  const auto j = scratch("empty.json");
  io::write_report(j, {}, io::ReportFormat::Structured);
  EXPECT_TRUE(io::read_structured_report(j).empty());
}

TEST(Report, StructuredRoundTripSixDigits) {
  const std::vector<DiagnosticsReport> reports{small_report(HeadKind::Mean, "mean"),
                                               small_report(HeadKind::MultiView, "multiview")};
  const auto p = scratch("r.json");
  io::write_report(p, reports, io::ReportFormat::Structured);
  const auto back = io::read_structured_report(p);
  ASSERT_EQ(back.size(), 2u);
  auto close6 = [](double a, double b) { return std::abs(a - b) <= 5e-6 * std::max(1.0, std::abs(b)); };
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_EQ(back[r].model, reports[r].model);
    ASSERT_EQ(back[r].modes.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) {
      EXPECT_EQ(back[r].modes[i].mode, reports[r].modes[i].mode);
      EXPECT_TRUE(close6(back[r].modes[i].eer.eer, reports[r].modes[i].eer.eer));
      EXPECT_EQ(back[r].modes[i].eer.n_target, reports[r].modes[i].eer.n_target);
    }
    EXPECT_TRUE(close6(back[r].silhouette_audio, reports[r].silhouette_audio));
    EXPECT_TRUE(close6(back[r].silhouette_video, reports[r].silhouette_video));
    const auto a = back[r].audio_video.all(), b = reports[r].audio_video.all();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(close6(a[i], b[i]));
    EXPECT_EQ(back[r].between_video.identities, reports[r].between_video.identities);
  }
}

TEST(Report, UndefinedSilhouetteIsNull) {
  DiagnosticsReport r;
  r.model = "m";
  r.silhouette_audio = std::numeric_limits<double>::quiet_NaN();
  r.silhouette_video = 0.5;
  const auto p = scratch("nan.json");
  io::write_report(p, {r}, io::ReportFormat::Structured);
  EXPECT_NE(bytes(p).find("\"audio\": null"), std::string::npos);
  const auto back = io::read_structured_report(p);
  EXPECT_TRUE(std::isnan(back.at(0).silhouette_audio));
  EXPECT_EQ(back.at(0).silhouette_video, 0.5);
}

TEST(Report, Sig6) {
  EXPECT_EQ(io::format_sig6(0.123456789), "0.123457");
  EXPECT_EQ(io::round_sig6(1234567.0), 1234570.0);
  EXPECT_EQ(io::format_sig6(0.0), "0");
}

TEST(Svg, SingleBox) {
  const auto s = boxplot_stats(std::vector<double>{10, 20, 30, 40, 170});
  const std::string svg = io::boxplot_svg({{"id0", {s}}}, {"mean"}, "one");
  const std::regex box("class=\"box\"");
  EXPECT_EQ(std::distance(std::sregex_iterator(svg.begin(), svg.end(), box), std::sregex_iterator()), 1);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find("angle (degrees)"), std::string::npos);
  EXPECT_NE(svg.find("id0"), std::string::npos);
}

TEST(Svg, DeterministicAndBoxCount) {
  std::mt19937_64 rng(3);
  std::vector<io::BoxGroup> groups;
  for (int g = 0; g < 5; ++g) {
    io::BoxGroup grp{"id" + std::to_string(g), {}};
    for (int m = 0; m < 3; ++m) {
      std::vector<double> v;
      for (int i = 0; i < 12; ++i) v.push_back(std::uniform_real_distribution<double>(0, 180)(rng));
      grp.boxes.push_back(boxplot_stats(v));
    }
    groups.push_back(grp);
  }
  const std::vector<std::string> labels{"mean", "mlp", "multiview"};
  const std::string a = io::boxplot_svg(groups, labels, "t");
  EXPECT_EQ(a, io::boxplot_svg(groups, labels, "t"));
  const std::regex box("class=\"box\"");
  EXPECT_EQ(std::distance(std::sregex_iterator(a.begin(), a.end(), box), std::sregex_iterator()), 15);
  const auto p = scratch("x.svg");
  io::render_boxplot_svg(p, groups, labels, "t");
  EXPECT_EQ(bytes(p), a);
  EXPECT_THROW(io::boxplot_svg({}, labels, "t"), ConfigError);
}
