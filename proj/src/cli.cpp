#include "avfusion/cli.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "avfusion/errors.hpp"
#include "avfusion/evaluation.hpp"
#include "avfusion/io.hpp"
#include "avfusion/rng.hpp"
#include "avfusion/synthetic_data.hpp"
#include "avfusion/training.hpp"

namespace avf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  std::uint64_t seed = 4242;

  DatasetConfig data;
  double test_fraction = 0.2;
  double val_fraction = 0.125;

  std::string head = "mean";
  std::string profile = "desk";
  std::optional<std::size_t> embed_dim;
  std::optional<std::size_t> hidden_dim;
  TrainingConfig training;
  std::vector<double> mask_probabilities{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

  std::size_t n_positive = 500;
  std::size_t n_negative = 500;
  std::string format = "both";

  // Paths. Kept out of every provenance echo.
  fs::path out_dir;
  fs::path train_file;
  fs::path val_file;
  fs::path test_file;
  std::vector<fs::path> checkpoints;
};

struct App {
  CLI::App app{"Audio-visual embedding fusion: synthetic data, training, evaluation and diagnostics", "avfusion"};
  CLI::App* generate = nullptr;
  CLI::App* train = nullptr;
  CLI::App* evaluate = nullptr;
  CLI::App* diagnose = nullptr;
};

const std::map<std::string, std::string> kFormats = {
    {"tabular", "tabular"}, {"structured", "structured"}, {"both", "both"}};

std::unique_ptr<App> build_app(RunConfig& c) {
  auto a = std::make_unique<App>();
  CLI::App& app = a->app;
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file with option values; [generate], [train], ... sections "
                                 "hold subcommand options and command-line flags take precedence");
  app.add_option("--seed", c.seed, "Root seed for every random stream (data, init, shuffle, masking, dropout, "
                                   "trials)")
      ->capture_default_str();

  auto* g = app.add_subcommand("generate", "Sample a synthetic dataset and write train/val/test embedding files");
  g->add_option("--out", c.out_dir, "Output directory for train.avfe, val.avfe, test.avfe and generate.json")
      ->required();
  g->add_option("--identities", c.data.n_identities, "Number of identities")->capture_default_str();
  g->add_option("--samples-per-identity", c.data.samples_per_identity, "Samples drawn per identity")
      ->capture_default_str();
  g->add_option("--audio-dim", c.data.audio_dim, "Audio backbone dimension")->capture_default_str();
  g->add_option("--video-dim", c.data.video_dim, "Video backbone dimension")->capture_default_str();
  g->add_option("--audio-sigma", c.data.audio_noise_sigma, "Audio noise standard deviation")
      ->capture_default_str();
  g->add_option("--video-sigma", c.data.video_noise_sigma, "Video noise standard deviation")
      ->capture_default_str();
  g->add_option("--test-fraction", c.test_fraction, "Per-identity share of samples held out for test")
      ->capture_default_str();
  g->add_option("--val-fraction", c.val_fraction, "Per-identity share of the remaining samples used for validation")
      ->capture_default_str();
  a->generate = g;

  auto* t = app.add_subcommand("train", "Train one fusion head and write checkpoint.avfc and epochs.jsonl");
  t->add_option("--train", c.train_file, "Training embedding file")->required()->check(CLI::ExistingFile);
  t->add_option("--val", c.val_file, "Validation embedding file")->required()->check(CLI::ExistingFile);
  t->add_option("--out", c.out_dir, "Output directory")->required();
  t->add_option("--head", c.head, "Fusion head: mean, mlp or multiview")
      ->capture_default_str()
      ->check(CLI::IsMember({"mean", "mlp", "multiview"}));
  t->add_option("--profile", c.profile, "Dimension profile for embedding/hidden sizes: desk (8/24) or large "
                                        "(256/1330)")
      ->capture_default_str()
      ->check(CLI::IsMember({"desk", "large"}));
  t->add_option("--embed-dim", c.embed_dim, "Override the embedding dimension of the profile");
  t->add_option("--hidden-dim", c.hidden_dim, "Override the MLP hidden dimension of the profile");
  t->add_option("--lr", c.training.learning_rate, "Initial learning rate")->capture_default_str();
  t->add_option("--beta1", c.training.beta1, "AdamW first moment decay")->capture_default_str();
  t->add_option("--beta2", c.training.beta2, "AdamW second moment decay")->capture_default_str();
  t->add_option("--eps", c.training.eps, "AdamW epsilon")->capture_default_str();
  t->add_option("--weight-decay", c.training.weight_decay, "Decoupled weight decay")->capture_default_str();
  t->add_option("--batch-size", c.training.batch_size, "Mini-batch size")->capture_default_str();
  t->add_option("--epochs", c.training.max_epochs, "Number of epochs")->capture_default_str();
  t->add_option("--clip-norm", c.training.clip_norm, "Global gradient norm limit")->capture_default_str();
  t->add_option("--lr-decay", c.training.lr_decay_factor,
                "Learning-rate factor applied when validation accuracy does not improve")
      ->capture_default_str();
  t->add_option("--lambda-audio", c.training.lambda_audio, "Multi-view audio loss weight")->capture_default_str();
  t->add_option("--lambda-video", c.training.lambda_video, "Multi-view video loss weight")->capture_default_str();
  t->add_option("--dropout", c.training.dropout, "Dropout probability")->capture_default_str();
  t->add_option("--arc-scale", c.training.arc_scale, "Arc-margin logit scale")->capture_default_str();
  t->add_option("--arc-margin", c.training.arc_margin, "Arc-margin additive angle in radians")
      ->capture_default_str();
  t->add_option("--mask-probs", c.mask_probabilities,
                "Probabilities of masking video, masking audio, and no mask (mean/mlp heads)")
      ->expected(3)
      ->capture_default_str();
  a->train = t;

  auto* e = app.add_subcommand("evaluate", "Score verification trials in all six modality modes and write reports");
  e->add_option("--checkpoint", c.checkpoints, "Checkpoint file; repeat to compare several models")
      ->required()
      ->check(CLI::ExistingFile);
  e->add_option("--test", c.test_file, "Test embedding file")->required()->check(CLI::ExistingFile);
  e->add_option("--out", c.out_dir, "Output directory for the report files")->required();
  e->add_option("--positive", c.n_positive, "Same-identity trials per mode")->capture_default_str();
  e->add_option("--negative", c.n_negative, "Different-identity trials per mode")->capture_default_str();
  e->add_option("--format", c.format, "Report format: tabular, structured or both")
      ->capture_default_str()
      ->transform(CLI::CheckedTransformer(kFormats));
  a->evaluate = e;

  auto* d = app.add_subcommand("diagnose", "Angle distributions, boxplot SVGs and silhouette summary");
  d->add_option("--checkpoint", c.checkpoints, "Checkpoint file; repeat to put several models in each plot")
      ->required()
      ->check(CLI::ExistingFile);
  d->add_option("--embeddings", c.test_file, "Embedding file to diagnose")->required()->check(CLI::ExistingFile);
  d->add_option("--out", c.out_dir, "Output directory")->required();
  d->add_option("--format", c.format, "Angle report format: tabular, structured or both")
      ->capture_default_str()
      ->transform(CLI::CheckedTransformer(kFormats));
  a->diagnose = d;
  return a;
}

json training_echo(const TrainingConfig& t) {
  return {{"learning_rate", t.learning_rate},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"eps", t.eps},
          {"weight_decay", t.weight_decay},
          {"batch_size", t.batch_size},
          {"max_epochs", t.max_epochs},
          {"clip_norm", t.clip_norm},
          {"lr_decay_factor", t.lr_decay_factor},
          {"lambda_audio", t.lambda_audio},
          {"lambda_video", t.lambda_video},
          {"mask_probabilities", t.mask_probabilities},
          {"dropout", t.dropout},
          {"arc_scale", t.arc_scale},
          {"arc_margin", t.arc_margin},
          {"seed", t.seed}};
}

json data_echo(const DatasetConfig& d) {
  return {{"n_identities", d.n_identities},
          {"samples_per_identity", d.samples_per_identity},
          {"audio_dim", d.audio_dim},
          {"video_dim", d.video_dim},
          {"audio_noise_sigma", d.audio_noise_sigma},
          {"video_noise_sigma", d.video_noise_sigma},
          {"seed", d.seed}};
}

void check_fraction(const char* name, double v) {
  if (!(v > 0.0 && v < 1.0)) throw ConfigError(std::string(name) + " must lie in (0, 1)");
}

int cmd_generate(RunConfig& c, std::ostream& out) {
  c.data.seed = c.seed;
  c.data.validate();
  check_fraction("test_fraction", c.test_fraction);
  check_fraction("val_fraction", c.val_fraction);
  const auto specs = generate_identities(c.data);
  const auto samples = sample_dataset(specs, c.data);
  const Split outer = split_dataset(samples, c.test_fraction, c.seed);
  Rng split_seed = make_stream(c.seed, "split", 1);
  const Split inner = split_dataset(outer.train, c.val_fraction, split_seed());

  io::write_embeddings(c.out_dir / "train.avfe", inner.train);
  io::write_embeddings(c.out_dir / "val.avfe", inner.val);
  io::write_embeddings(c.out_dir / "test.avfe", outer.val);
  json echo = {{"command", "generate"},
               {"seed", c.seed},
               {"data", data_echo(c.data)},
               {"test_fraction", c.test_fraction},
               {"val_fraction", c.val_fraction},
               {"counts", {{"train", inner.train.size()}, {"val", inner.val.size()}, {"test", outer.val.size()}}}};
  io::write_text(c.out_dir / "generate.json", echo.dump(2) + "\n");
  out << "train " << inner.train.size() << "  val " << inner.val.size() << "  test " << outer.val.size() << "\n";
  return kOk;
}

HeadDims resolve_dims(const RunConfig& c, const std::vector<Sample>& train) {
  HeadDims dims = c.profile == "large" ? HeadDims::large() : HeadDims::desk();
  if (train.empty()) throw DegenerateInputError("training file holds no samples");
  dims.audio_dim = train.front().audio.size();
  dims.video_dim = train.front().video.size();
  if (c.embed_dim) dims.embed_dim = *c.embed_dim;
  if (c.hidden_dim) dims.hidden_dim = *c.hidden_dim;
  if (dims.embed_dim == 0 || dims.hidden_dim == 0) throw ConfigError("embed_dim and hidden_dim must be positive");
  return dims;
}

int cmd_train(RunConfig& c, std::ostream& out) {
  c.training.seed = c.seed;
  if (c.mask_probabilities.size() != 3) throw ConfigError("mask_probabilities needs exactly three values");
  std::copy(c.mask_probabilities.begin(), c.mask_probabilities.end(), c.training.mask_probabilities.begin());
  c.training.validate();
  const HeadKind kind = parse_head_kind(c.head);

  const auto train = io::read_embeddings(c.train_file);
  const auto val = io::read_embeddings(c.val_file);
  const HeadDims dims = resolve_dims(c, train);

  TrainResult result = train_run(kind, dims, train, val, c.training);

  json echo = {{"command", "train"},
               {"head", std::string(to_string(kind))},
               {"profile", c.profile},
               {"dims",
                {{"audio_dim", dims.audio_dim},
                 {"video_dim", dims.video_dim},
                 {"embed_dim", dims.embed_dim},
                 {"hidden_dim", dims.hidden_dim}}},
               {"training", training_echo(c.training)}};
  io::Provenance prov;
  prov.epoch = result.best_epoch;
  prov.val_accuracy = result.best_epoch > 0 ? result.history[result.best_epoch - 1].val_accuracy : 0.0;
  prov.seed = c.seed;
  prov.config_json = echo.dump();
  io::save_checkpoint(c.out_dir / "checkpoint.avfc", *result.best.head, result.best.arc, result.class_ids, prov);
  io::write_epoch_log(c.out_dir / "epochs.jsonl", result.history);

  for (const auto& r : result.history) {
    out << "epoch " << r.epoch << "  loss " << io::format_sig6(r.train_loss) << "  val_acc "
        << io::format_sig6(r.val_accuracy) << "  lr " << io::format_sig6(r.learning_rate)
        << (r.is_best ? "  *" : "") << "\n";
  }
  out << "best epoch " << prov.epoch << "  val_acc " << io::format_sig6(prov.val_accuracy) << "\n";
  return kOk;
}

struct LoadedModel {
  std::string label;
  io::Checkpoint checkpoint;
};

std::vector<LoadedModel> load_models(const RunConfig& c, const std::vector<Sample>& samples) {
  std::vector<LoadedModel> models;
  std::map<std::string, int> seen;
  for (const auto& p : c.checkpoints) {
    io::Checkpoint ck = io::load_checkpoint(p);
    const auto& d = ck.head->dims();
    if (!samples.empty() && (samples.front().audio.size() != d.audio_dim || samples.front().video.size() != d.video_dim)) {
      throw ShapeError("embedding dimensions do not match checkpoint " + p.filename().string());
    }
    std::string label(to_string(ck.head->kind()));
    if (const int n = ++seen[label]; n > 1) label += "_" + std::to_string(n);
    models.push_back({label, std::move(ck)});
  }
  return models;
}

json model_echo(const LoadedModel& m) {
  return {{"label", m.label},
          {"head", std::string(to_string(m.checkpoint.head->kind()))},
          {"epoch", m.checkpoint.provenance.epoch},
          {"val_accuracy", m.checkpoint.provenance.val_accuracy},
          {"seed", m.checkpoint.provenance.seed},
          {"config", json::parse(m.checkpoint.provenance.config_json)}};
}

void write_reports(const RunConfig& c, const std::vector<DiagnosticsReport>& reports, const std::string& json_name) {
  if (c.format == "tabular" || c.format == "both") io::write_report(c.out_dir, reports, io::ReportFormat::Tabular);
  if (c.format == "structured" || c.format == "both") {
    io::write_report(c.out_dir / json_name, reports, io::ReportFormat::Structured);
  }
}

int cmd_evaluate(RunConfig& c, std::ostream& out) {
  const auto samples = io::read_embeddings(c.test_file);
  const auto models = load_models(c, samples);
  const TrialConfig trials{c.n_positive, c.n_negative, c.seed};

  std::vector<DiagnosticsReport> reports;
  json echo = {{"command", "evaluate"},
               {"seed", c.seed},
               {"trials", {{"positive", c.n_positive}, {"negative", c.n_negative}}},
               {"models", json::array()}};
  for (const auto& m : models) {
    reports.push_back(run_full_evaluation(*m.checkpoint.head, samples, trials, m.label));
    echo["models"].push_back(model_echo(m));
  }
  write_reports(c, reports, "report.json");
  io::write_text(c.out_dir / "provenance.json", echo.dump(2) + "\n");

  out << "model";
  for (auto mode : kAllModes) out << "\t" << to_string(mode);
  out << "\n";
  for (const auto& r : reports) {
    out << r.model;
    for (const auto& m : r.modes) out << "\t" << io::format_sig6(100.0 * m.eer.eer);
    out << "\n";
    if (r.warnings > 0) out << "warning: " << r.model << ": " << r.warnings << " degenerate embeddings skipped\n";
  }
  return kOk;
}

std::vector<io::BoxGroup> angle_groups(const std::vector<DiagnosticsReport>& reports,
                                       const AngleReport DiagnosticsReport::*family) {
  std::vector<io::BoxGroup> groups;
  if (reports.empty()) return groups;
  for (const auto& [id, unused] : (reports.front().*family).per_identity) {
    io::BoxGroup g{id, {}};
    for (const auto& r : reports) {
      const auto it = (r.*family).per_identity.find(id);
      g.boxes.push_back(it == (r.*family).per_identity.end() || it->second.empty() ? BoxplotStats{}
                                                                                     : boxplot_stats(it->second));
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

int cmd_diagnose(RunConfig& c, std::ostream& out) {
  const auto samples = io::read_embeddings(c.test_file);
  const auto models = load_models(c, samples);

  std::vector<DiagnosticsReport> reports;
  std::vector<std::string> labels;
  std::ostringstream summary;
  for (const auto& m : models) {
    reports.push_back(run_diagnostics(*m.checkpoint.head, samples, m.label));
    labels.push_back(m.label);
    const auto& r = reports.back();
    summary << r.model << " silhouette_audio " << io::format_sig6(r.silhouette_audio) << "\n";
    summary << r.model << " silhouette_video " << io::format_sig6(r.silhouette_video) << "\n";
    if (const auto* mean = dynamic_cast<const MeanFusionHead*>(m.checkpoint.head.get())) {
      for (Modality missing : {Modality::Audio, Modality::Video}) {
        try {
          const auto probe = null_representation_probe(*mean, samples, missing);
          summary << r.model << " null_" << to_string(missing) << "_angle_to_centroid "
                  << io::format_sig6(probe.angle_to_centroid_of_centroids) << " median_to_class_centroids "
                  << io::format_sig6(probe.median_angle_to_class_centroids) << "\n";
        } catch (const DegenerateInputError& e) {
          summary << "warning: " << r.model << ": null " << to_string(missing) << " probe skipped: " << e.what()
                  << "\n";
        }
      }
    }
    if (r.warnings > 0) {
      summary << "warning: " << r.model << ": " << r.warnings << " degenerate embeddings skipped\n";
    }
  }
  write_reports(c, reports, "diagnostics.json");

  const std::pair<const char*, const AngleReport DiagnosticsReport::*> families[] = {
      {"audio_video_angles", &DiagnosticsReport::audio_video},
      {"within_audio_angles", &DiagnosticsReport::within_audio},
      {"within_video_angles", &DiagnosticsReport::within_video}};
  for (const auto& [name, member] : families) {
    auto groups = angle_groups(reports, member);
    if (groups.empty()) {
      summary << "warning: no data for " << name << "\n";
      continue;
    }
    io::render_boxplot_svg(c.out_dir / (std::string(name) + ".svg"), groups, labels, name);
  }
  std::vector<io::BoxGroup> between;
  for (const char* modality : {"audio", "video"}) {
    io::BoxGroup g{modality, {}};
    for (const auto& r : reports) {
      const auto v = (std::string(modality) == "audio" ? r.between_audio : r.between_video).off_diagonal();
      g.boxes.push_back(v.empty() ? BoxplotStats{} : boxplot_stats(v));
    }
    between.push_back(std::move(g));
  }
  io::render_boxplot_svg(c.out_dir / "between_identity_angles.svg", between, labels, "between_identity_angles");

  json echo = {{"command", "diagnose"}, {"seed", c.seed}, {"models", json::array()}};
  for (const auto& m : models) echo["models"].push_back(model_echo(m));
  io::write_text(c.out_dir / "provenance.json", echo.dump(2) + "\n");
  io::write_text(c.out_dir / "summary.txt", summary.str());
  out << summary.str();
  return kOk;
}

int dispatch(App& a, RunConfig& c, std::ostream& out) {
  if (a.generate->parsed()) return cmd_generate(c, out);
  if (a.train->parsed()) return cmd_train(c, out);
  if (a.evaluate->parsed()) return cmd_evaluate(c, out);
  return cmd_diagnose(c, out);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig config;
  auto a = build_app(config);
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    a->app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = a->app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }
  try {
    return dispatch(*a, config, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const HeadKindError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIoError;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIoError;
  } catch (const Error& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

std::vector<FlagDoc> flag_table() {
  RunConfig config;
  auto a = build_app(config);
  std::vector<FlagDoc> table;
  auto collect = [&](const CLI::App& app, const std::string& command) {
    for (const CLI::Option* opt : app.get_options()) {
      if (opt->get_lnames().empty()) continue;
      table.push_back({command, "--" + opt->get_lnames().front(), opt->get_description()});
    }
  };
  collect(a->app, "");
  for (const CLI::App* sub : a->app.get_subcommands({})) collect(*sub, sub->get_name());
  return table;
}

std::string help_text(const std::string& command) {
  RunConfig config;
  auto a = build_app(config);
  if (command.empty()) return a->app.help();
  return a->app.get_subcommand(command)->help();
}

}  // namespace avf::cli
