#include "avfusion/io.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "avfusion/errors.hpp"

namespace avf::io {

using nlohmann::json;

namespace {

constexpr char kEmbeddingMagic[6] = {'A', 'V', 'F', 'E', 'M', 'B'};
constexpr char kCheckpointMagic[6] = {'A', 'V', 'F', 'C', 'K', 'P'};
constexpr char kLittleEndian = 'L';

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.append(c, n);
  }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string data, std::string context) : data_(std::move(data)), context_(std::move(context)) {}

  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) {
      throw ParseError(ParseErrorKind::Truncated, context_ + ": truncated payload at byte " + std::to_string(pos_));
    }
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() { return bytes(u32()); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string data_;
  std::string context_;
  std::size_t pos_ = 0;
};

void check_magic(ByteReader& r, const char (&magic)[6], const std::string& what) {
  const std::string got = r.remaining() >= 6 ? r.bytes(6) : std::string();
  if (got.size() != 6 || std::memcmp(got.data(), magic, 6) != 0) {
    throw ParseError(ParseErrorKind::BadMagic, what + ": not a recognised file (bad magic)");
  }
  if (r.u8() != static_cast<std::uint8_t>(kLittleEndian)) {
    throw ParseError(ParseErrorKind::BadMagic, what + ": unsupported byte order marker");
  }
  r.u8();  // reserved
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& contents) { write_file_bytes(path, contents); }
std::string read_text(const std::filesystem::path& path) { return read_file_bytes(path); }

// -------------------------------------------------------------- embeddings

void write_embeddings(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  const std::uint64_t da = samples.empty() ? 0 : samples.front().audio.size();
  const std::uint64_t dv = samples.empty() ? 0 : samples.front().video.size();
  ByteWriter w;
  w.bytes(kEmbeddingMagic, 6);
  w.u8(kLittleEndian);
  w.u8(0);
  w.u32(kEmbeddingVersion);
  w.u64(da);
  w.u64(dv);
  w.u64(samples.size());
  for (const auto& s : samples) {
    if (s.audio.size() != da || s.video.size() != dv) {
      throw ShapeError("write_embeddings: sample '" + s.sample_id + "' has inconsistent dimensions");
    }
    if (s.identity_id.empty() || s.sample_id.empty()) {
      throw ConfigError("write_embeddings: identity and sample ids must be nonempty");
    }
    w.str(s.identity_id);
    w.str(s.sample_id);
    for (double x : s.audio) w.f64(x);
    for (double x : s.video) w.f64(x);
  }
  write_file_bytes(path, w.buffer());
}

std::vector<Sample> read_embeddings(const std::filesystem::path& path) {
  ByteReader r(read_file_bytes(path), path.string());
  check_magic(r, kEmbeddingMagic, path.string());
  const std::uint32_t version = r.u32();
  if (version != kEmbeddingVersion) {
    throw ParseError(ParseErrorKind::Version, path.string() + ": unsupported embedding format version " +
                                                  std::to_string(version));
  }
  const std::uint64_t da = r.u64();
  const std::uint64_t dv = r.u64();
  const std::uint64_t count = r.u64();
  if (count > 0 && (da == 0 || dv == 0)) {
    throw ParseError(ParseErrorKind::Dimension, path.string() + ": zero modality dimension in a nonempty file");
  }
  // Each record is at least two length prefixes plus the vectors.
  if (count > 0 && (da + dv) > r.remaining() / 8) {
    throw ParseError(ParseErrorKind::Truncated, path.string() + ": header dimensions exceed the payload");
  }
  std::vector<Sample> samples;
  samples.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Sample s;
    s.identity_id = r.str();
    s.sample_id = r.str();
    s.audio.resize(da);
    s.video.resize(dv);
    for (double& x : s.audio) x = r.f64();
    for (double& x : s.video) x = r.f64();
    samples.push_back(std::move(s));
  }
  if (r.remaining() != 0) {
    throw ParseError(ParseErrorKind::Dimension, path.string() + ": " + std::to_string(r.remaining()) +
                                                    " trailing bytes; payload does not match header dimensions");
  }
  return samples;
}

// -------------------------------------------------------------- checkpoints

void save_checkpoint(const std::filesystem::path& path, const FusionHead& head, const ArcMarginHead& arc,
                     const std::vector<std::string>& class_ids, const Provenance& provenance) {
  if (class_ids.size() != arc.n_classes()) {
    throw ConsistencyError("save_checkpoint: class id list does not match the classifier");
  }
  json header;
  header["head_kind"] = std::string(to_string(head.kind()));
  const auto& d = head.dims();
  header["dims"] = {{"audio_dim", d.audio_dim}, {"video_dim", d.video_dim}, {"embed_dim", d.embed_dim},
                    {"hidden_dim", d.hidden_dim}};
  header["dropout"] = head.dropout_probability();
  if (const auto* mlp = dynamic_cast<const MlpFusionHead*>(&head)) header["leaky_slope"] = mlp->leaky_slope();
  header["arc"] = {{"scale", arc.scale}, {"margin", arc.margin}, {"n_classes", arc.n_classes()}};
  header["class_ids"] = class_ids;
  header["provenance"] = {{"epoch", provenance.epoch},
                          {"val_accuracy", provenance.val_accuracy},
                          {"seed", provenance.seed},
                          {"config", json::parse(provenance.config_json)}};

  std::vector<ConstParamView> tensors = head.parameters();
  for (auto& b : head.buffers()) tensors.push_back(std::move(b));
  for (auto& a : arc.parameters()) tensors.push_back(std::move(a));
  json table = json::array();
  for (const auto& t : tensors) table.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
  header["tensors"] = table;

  ByteWriter w;
  w.bytes(kCheckpointMagic, 6);
  w.u8(kLittleEndian);
  w.u8(0);
  w.u32(kCheckpointVersion);
  w.str(header.dump());
  for (const auto& t : tensors)
    for (double x : t.values) w.f64(x);
  write_file_bytes(path, w.buffer());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  ByteReader r(read_file_bytes(path), path.string());
  check_magic(r, kCheckpointMagic, path.string());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ParseError(ParseErrorKind::Version,
                     path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  json header;
  try {
    header = json::parse(r.str());
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorKind::Malformed, path.string() + ": bad checkpoint header: " + e.what());
  }

  Checkpoint ck;
  try {
    const HeadKind kind = parse_head_kind(header.at("head_kind").get<std::string>());
    const auto& jd = header.at("dims");
    HeadDims dims{jd.at("audio_dim").get<std::size_t>(), jd.at("video_dim").get<std::size_t>(),
                  jd.at("embed_dim").get<std::size_t>(), jd.at("hidden_dim").get<std::size_t>()};
    const DropoutSpec dropout{header.at("dropout").get<double>()};
    Rng unused(0);
    if (kind == HeadKind::Mlp) {
      ck.head = std::make_unique<MlpFusionHead>(dims, unused, dropout, header.at("leaky_slope").get<double>());
    } else {
      ck.head = make_head(kind, dims, unused, dropout);
    }
    const auto& ja = header.at("arc");
    ck.arc.scale = ja.at("scale").get<double>();
    ck.arc.margin = ja.at("margin").get<double>();
    ck.arc.prototypes = Matrix(dims.embed_dim, ja.at("n_classes").get<std::size_t>());
    ck.class_ids = header.at("class_ids").get<std::vector<std::string>>();
    const auto& jp = header.at("provenance");
    ck.provenance.epoch = jp.at("epoch").get<std::size_t>();
    ck.provenance.val_accuracy = jp.at("val_accuracy").get<double>();
    ck.provenance.seed = jp.at("seed").get<std::uint64_t>();
    ck.provenance.config_json = jp.at("config").dump();
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorKind::Malformed, path.string() + ": bad checkpoint header: " + e.what());
  }

  std::vector<ParamView> tensors = ck.head->parameters();
  for (auto& b : ck.head->buffers()) tensors.push_back(std::move(b));
  for (auto& a : ck.arc.parameters()) tensors.push_back(std::move(a));
  const auto& table = header.at("tensors");
  if (table.size() != tensors.size()) {
    throw ParseError(ParseErrorKind::Dimension, path.string() + ": tensor table lists " +
                                                    std::to_string(table.size()) + " tensors, head needs " +
                                                    std::to_string(tensors.size()));
  }
  std::size_t expected_doubles = 0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& t = table[i];
    if (t.at("name").get<std::string>() != tensors[i].name || t.at("rows").get<std::size_t>() != tensors[i].rows ||
        t.at("cols").get<std::size_t>() != tensors[i].cols) {
      throw ParseError(ParseErrorKind::Dimension, path.string() + ": tensor " + std::to_string(i) + " ('" +
                                                      t.at("name").get<std::string>() + "') does not match '" +
                                                      tensors[i].name + "'");
    }
    expected_doubles += tensors[i].values.size();
  }
  if (r.remaining() != expected_doubles * 8) {
    throw ParseError(r.remaining() < expected_doubles * 8 ? ParseErrorKind::Truncated : ParseErrorKind::Dimension,
                     path.string() + ": payload length does not match the shape table");
  }
  for (auto& t : tensors)
    for (double& x : t.values) x = r.f64();
  if (ck.class_ids.size() != ck.arc.n_classes()) {
    throw ParseError(ParseErrorKind::Dimension, path.string() + ": class id count does not match the classifier");
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, HeadKind expected) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.head->kind() != expected) {
    throw HeadKindError(path.string() + " holds a " + std::string(to_string(ck.head->kind())) + " head, expected " +
                        std::string(to_string(expected)));
  }
  return ck;
}

// -------------------------------------------------------------- epoch log

void write_epoch_log(const std::filesystem::path& path, const std::vector<EpochRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    json j = {{"epoch", r.epoch},
              {"train_loss", r.train_loss},
              {"val_accuracy", r.val_accuracy},
              {"learning_rate", r.learning_rate},
              {"is_best", r.is_best}};
    out += j.dump() + "\n";
  }
  write_file_bytes(path, out);
}

std::vector<EpochRecord> read_epoch_log(const std::filesystem::path& path) {
  std::istringstream in(read_file_bytes(path));
  std::vector<EpochRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      records.push_back({j.at("epoch").get<std::size_t>(), j.at("train_loss").get<double>(),
                         j.at("val_accuracy").get<double>(), j.at("learning_rate").get<double>(),
                         j.at("is_best").get<bool>()});
    } catch (const json::exception& e) {
      throw ParseError(ParseErrorKind::Malformed, path.string() + ": bad epoch record: " + e.what());
    }
  }
  return records;
}

// -------------------------------------------------------------- reports

std::string format_sig6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

double round_sig6(double value) { return std::stod(format_sig6(value)); }

namespace {

json stats_json(const BoxplotStats& s) {
  json outliers = json::array();
  for (double x : s.outliers) outliers.push_back(round_sig6(x));
  return {{"min", round_sig6(s.min)},
          {"q1", round_sig6(s.q1)},
          {"median", round_sig6(s.median)},
          {"q3", round_sig6(s.q3)},
          {"max", round_sig6(s.max)},
          {"whisker_low", round_sig6(s.whisker_low)},
          {"whisker_high", round_sig6(s.whisker_high)},
          {"outliers", outliers}};
}

json angles_json(const AngleReport& a) {
  json per = json::object();
  for (const auto& [id, v] : a.per_identity) {
    json vals = json::array();
    for (double x : v) vals.push_back(round_sig6(x));
    per[id] = vals;
  }
  return {{"family", a.family}, {"modality", a.modality}, {"skipped", a.skipped}, {"per_identity", per}};
}

AngleReport angles_from_json(const json& j) {
  AngleReport a;
  a.family = j.at("family").get<std::string>();
  a.modality = j.at("modality").get<std::string>();
  a.skipped = j.at("skipped").get<std::size_t>();
  for (const auto& [id, v] : j.at("per_identity").items()) a.per_identity[id] = v.get<std::vector<double>>();
  return a;
}

json centroid_json(const CentroidAngles& c) {
  json rows = json::array();
  for (std::size_t i = 0; i < c.degrees.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < c.degrees.cols(); ++j) row.push_back(round_sig6(c.degrees(i, j)));
    rows.push_back(row);
  }
  return {{"modality", c.modality}, {"identities", c.identities}, {"skipped", c.skipped}, {"degrees", rows}};
}

CentroidAngles centroid_from_json(const json& j) {
  CentroidAngles c;
  c.modality = j.at("modality").get<std::string>();
  c.identities = j.at("identities").get<std::vector<std::string>>();
  c.skipped = j.at("skipped").get<std::size_t>();
  const auto rows = j.at("degrees").get<std::vector<std::vector<double>>>();
  c.degrees = rows.empty() ? Matrix() : Matrix::from_rows(rows);
  return c;
}

// NaN (undefined silhouette) is stored as null.
json maybe_number(double v) { return std::isfinite(v) ? json(round_sig6(v)) : json(nullptr); }
double number_or_nan(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

json report_json(const DiagnosticsReport& r) {
  json modes = json::array();
  for (const auto& m : r.modes) {
    modes.push_back({{"mode", std::string(to_string(m.mode))},
                     {"eer", maybe_number(m.eer.eer)},
                     {"threshold", maybe_number(m.eer.threshold)},
                     {"n_target", m.eer.n_target},
                     {"n_nontarget", m.eer.n_nontarget},
                     {"skipped_trials", m.skipped_trials}});
  }
  json summaries = json::array();
  auto add_summary = [&](const AngleReport& a) {
    for (const auto& [id, v] : a.per_identity) {
      if (v.empty()) continue;
      summaries.push_back({{"family", a.family}, {"modality", a.modality}, {"identity", id},
                           {"stats", stats_json(boxplot_stats(v))}});
    }
  };
  add_summary(r.audio_video);
  add_summary(r.within_audio);
  add_summary(r.within_video);
  return {{"model", r.model},
          {"eer", modes},
          {"audio_video", angles_json(r.audio_video)},
          {"within_audio", angles_json(r.within_audio)},
          {"within_video", angles_json(r.within_video)},
          {"between_audio", centroid_json(r.between_audio)},
          {"between_video", centroid_json(r.between_video)},
          {"silhouette", {{"audio", maybe_number(r.silhouette_audio)}, {"video", maybe_number(r.silhouette_video)}}},
          {"boxplots", summaries},
          {"warnings", r.warnings}};
}

std::string csv_stats_row(const std::string& prefix, const BoxplotStats& s) {
  return prefix + "," + format_sig6(s.min) + "," + format_sig6(s.q1) + "," + format_sig6(s.median) + "," +
         format_sig6(s.q3) + "," + format_sig6(s.max) + "," + format_sig6(s.whisker_low) + "," +
         format_sig6(s.whisker_high) + "," + std::to_string(s.outliers.size()) + "\n";
}

}  // namespace

void write_report(const std::filesystem::path& path, const std::vector<DiagnosticsReport>& reports,
                  ReportFormat format) {
  if (format == ReportFormat::Structured) {
    json doc = {{"format", "avfusion-report"}, {"version", 1}, {"models", json::array()}};
    for (const auto& r : reports) doc["models"].push_back(report_json(r));
    write_file_bytes(path, doc.dump(2) + "\n");
    return;
  }

  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw IoError("cannot create report directory '" + path.string() + "': " + ec.message());

  std::string eer = "model,mode,eer,threshold,n_target,n_nontarget,skipped_trials\n";
  std::string angles = "model,family,modality,identity,min,q1,median,q3,max,whisker_low,whisker_high,n_outliers\n";
  std::string silhouette = "model,modality,silhouette\n";
  std::string table = "model";
  for (auto m : kAllModes) table += "," + std::string(to_string(m));
  table += "\n";

  for (const auto& r : reports) {
    if (!r.modes.empty()) table += r.model;
    for (const auto& m : r.modes) {
      eer += r.model + "," + std::string(to_string(m.mode)) + "," + format_sig6(m.eer.eer) + "," +
             format_sig6(m.eer.threshold) + "," + std::to_string(m.eer.n_target) + "," +
             std::to_string(m.eer.n_nontarget) + "," + std::to_string(m.skipped_trials) + "\n";
      table += "," + format_sig6(100.0 * m.eer.eer);
    }
    if (!r.modes.empty()) table += "\n";
    for (const AngleReport* a : {&r.audio_video, &r.within_audio, &r.within_video}) {
      for (const auto& [id, v] : a->per_identity) {
        if (v.empty()) continue;
        angles += csv_stats_row(r.model + "," + a->family + "," + a->modality + "," + id, boxplot_stats(v));
      }
    }
    for (const CentroidAngles* c : {&r.between_audio, &r.between_video}) {
      const auto v = c->off_diagonal();
      if (!v.empty()) angles += csv_stats_row(r.model + ",between_identity," + c->modality + ",*", boxplot_stats(v));
    }
    silhouette += r.model + ",audio," + format_sig6(r.silhouette_audio) + "\n";
    silhouette += r.model + ",video," + format_sig6(r.silhouette_video) + "\n";
  }
  write_file_bytes(path / "eer.csv", eer);
  write_file_bytes(path / "angles.csv", angles);
  write_file_bytes(path / "silhouette.csv", silhouette);
  write_file_bytes(path / "table.csv", table);
}

std::vector<DiagnosticsReport> read_structured_report(const std::filesystem::path& path) {
  std::vector<DiagnosticsReport> out;
  try {
    const json doc = json::parse(read_file_bytes(path));
    if (doc.at("format").get<std::string>() != "avfusion-report") {
      throw ParseError(ParseErrorKind::BadMagic, path.string() + ": not a report document");
    }
    if (doc.at("version").get<int>() != 1) {
      throw ParseError(ParseErrorKind::Version, path.string() + ": unsupported report version");
    }
    for (const auto& jm : doc.at("models")) {
      DiagnosticsReport r;
      r.model = jm.at("model").get<std::string>();
      for (const auto& je : jm.at("eer")) {
        ModeResult m;
        m.mode = parse_modality_mode(je.at("mode").get<std::string>());
        m.eer = {number_or_nan(je.at("eer")), number_or_nan(je.at("threshold")), je.at("n_target").get<std::size_t>(),
                 je.at("n_nontarget").get<std::size_t>()};
        m.skipped_trials = je.at("skipped_trials").get<std::size_t>();
        r.modes.push_back(std::move(m));
      }
      r.audio_video = angles_from_json(jm.at("audio_video"));
      r.within_audio = angles_from_json(jm.at("within_audio"));
      r.within_video = angles_from_json(jm.at("within_video"));
      r.between_audio = centroid_from_json(jm.at("between_audio"));
      r.between_video = centroid_from_json(jm.at("between_video"));
      r.silhouette_audio = number_or_nan(jm.at("silhouette").at("audio"));
      r.silhouette_video = number_or_nan(jm.at("silhouette").at("video"));
      r.warnings = jm.at("warnings").get<std::size_t>();
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorKind::Malformed, path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace avf::io
