#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "avfusion/arc_margin.hpp"
#include "avfusion/evaluation.hpp"
#include "avfusion/fusion_heads.hpp"
#include "avfusion/synthetic_data.hpp"
#include "avfusion/training.hpp"

namespace avf::io {

inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary, little-endian; layout in README.md.
void write_embeddings(const std::filesystem::path& path, const std::vector<Sample>& samples);
std::vector<Sample> read_embeddings(const std::filesystem::path& path);

struct Provenance {
  std::size_t epoch = 0;
  double val_accuracy = 0.0;
  std::uint64_t seed = 0;
  std::string config_json = "{}";  // resolved run configuration, echoed verbatim

  bool operator==(const Provenance&) const = default;
};

struct Checkpoint {
  std::unique_ptr<FusionHead> head;
  ArcMarginHead arc;
  std::vector<std::string> class_ids;
  Provenance provenance;
};

void save_checkpoint(const std::filesystem::path& path, const FusionHead& head, const ArcMarginHead& arc,
                     const std::vector<std::string>& class_ids, const Provenance& provenance);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Throws HeadKindError when the file holds a different head.
Checkpoint load_checkpoint(const std::filesystem::path& path, HeadKind expected);

// One JSON object per line.
void write_epoch_log(const std::filesystem::path& path, const std::vector<EpochRecord>& records);
std::vector<EpochRecord> read_epoch_log(const std::filesystem::path& path);

enum class ReportFormat { Tabular, Structured };

// Tabular: eer.csv, angles.csv, silhouette.csv and table.csv (one row per
// model, one column per mode) inside `path`, which is created as a directory.
// Structured: a single JSON document at `path`. Numbers carry 6 significant
// digits either way.
void write_report(const std::filesystem::path& path, const std::vector<DiagnosticsReport>& reports,
                  ReportFormat format);
std::vector<DiagnosticsReport> read_structured_report(const std::filesystem::path& path);

// %.6g, and the same rounding applied to a double.
std::string format_sig6(double value);
double round_sig6(double value);

struct BoxGroup {
  std::string label;                // e.g. identity id
  std::vector<BoxplotStats> boxes;  // one per model, in model order
};

// Static SVG: per group one box per model, whiskers, outlier marks, y axis in
// degrees. Output is a pure function of the inputs.
std::string boxplot_svg(const std::vector<BoxGroup>& groups, const std::vector<std::string>& model_labels,
                        const std::string& title);
void render_boxplot_svg(const std::filesystem::path& path, const std::vector<BoxGroup>& groups,
                        const std::vector<std::string>& model_labels, const std::string& title = {});

void write_text(const std::filesystem::path& path, const std::string& contents);
std::string read_text(const std::filesystem::path& path);

}  // namespace avf::io
