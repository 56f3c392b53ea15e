#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "emostress/audio.hpp"
#include "emostress/checkpoint.hpp"
#include "emostress/datasets.hpp"
#include "emostress/error.hpp"
#include "emostress/pipeline.hpp"
#include "emostress/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace emostress;

namespace {

enum ExitCode : int { kOk = 0, kInternal = 1, kUsage = 2, kDataset = 3 };

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::InvalidConfig:
    case Errc::MissingDirectory:
    case Errc::MissingEmotion:
    case Errc::InvalidTau:
    case Errc::InvalidCount:
    case Errc::InvalidRate:
      return kUsage;
    case Errc::FileNotFound:
    case Errc::UnsupportedFormat:
    case Errc::CorruptHeader:
    case Errc::ChannelMismatch:
    case Errc::ClipTooShort:
    case Errc::EmptyDataset:
    case Errc::EmptyCollection:
    case Errc::BadName:
    case Errc::UnknownEmotionCode:
    case Errc::UnknownSpeaker:
    case Errc::DuplicatePath:
    case Errc::ParseErrors:
    case Errc::LabelOutOfRange:
      return kDataset;
    default:
      return kInternal;
  }
}

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> dataset_root;
  std::optional<std::string> dataset_kind;
};

void add_common(CLI::App* app, CommonOptions& opts) {
  app->add_option("--config", opts.config_path, "JSON run configuration");
  app->add_option("--seed", opts.seed, "root seed");
  app->add_option("--out", opts.out, "output directory");
  app->add_option("--dataset-root", opts.dataset_root, "corpus directory");
  app->add_option("--dataset-kind", opts.dataset_kind, "emodb | savee | synth")
      ->check(CLI::IsMember({"emodb", "savee", "synth"}));
  app->allow_extras();
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

void set_dotted(json& root, const std::string& dotted, json value) {
  json* node = &root;
  std::size_t start = 0;
  for (;;) {
    const auto dot = dotted.find('.', start);
    const auto key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw Error(Errc::InvalidConfig, "malformed override --" + dotted);
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

// Extra arguments are dotted config overrides: --model.lr 1e-4 or --cube.tau=2.
void apply_overrides(json& config, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const auto& arg = extras[i];
    if (arg.rfind("--", 0) != 0) throw Error(Errc::InvalidConfig, "unexpected argument '" + arg + "'");
    auto name = arg.substr(2);
    std::string value;
    if (const auto eq = name.find('='); eq != std::string::npos) {
      value = name.substr(eq + 1);
      name = name.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw Error(Errc::InvalidConfig, "override --" + name + " needs a value");
      value = extras[++i];
    }
    set_dotted(config, name, parse_value(value));
  }
}

RunConfig resolve_config(const CommonOptions& opts, const std::vector<std::string>& extras) {
  json config = json::object();
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) throw Error(Errc::InvalidConfig, "cannot read config " + opts.config_path);
    try {
      config = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(Errc::InvalidConfig, opts.config_path + ": " + e.what());
    }
    if (!config.is_object()) throw Error(Errc::InvalidConfig, opts.config_path + ": top level must be an object");
  }
  if (opts.seed) config["seed"] = *opts.seed;
  if (opts.out) config["out"] = *opts.out;
  if (opts.dataset_root) set_dotted(config, "dataset.root", *opts.dataset_root);
  if (opts.dataset_kind) set_dotted(config, "dataset.kind", *opts.dataset_kind);
  apply_overrides(config, extras);
  auto cfg = run_config_from_json(config);
  cfg.validate();
  return cfg;
}

void ensure_dataset_root(const RunConfig& cfg) {
  if (cfg.dataset_root.empty()) throw Error(Errc::MissingDirectory, "no dataset root given (--dataset-root)");
  if (!fs::is_directory(cfg.dataset_root)) throw Error(Errc::MissingDirectory, "dataset root " + cfg.dataset_root.string());
}

Manifest saved_manifest(const RunConfig& cfg) {
  const auto path = cfg.output_dir / artifacts::kManifest;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::FileNotFound, path.string() + " (run `features` first)");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return manifest_from_csv(text);
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    out << text;
    if (!out) throw Error(Errc::IoError, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

fs::path checkpoint_path(const RunConfig& cfg, const std::string& explicit_path) {
  return explicit_path.empty() ? cfg.output_dir / artifacts::kCheckpoint : fs::path(explicit_path);
}

void print_summary(const PipelineReport& report) {
  std::printf("train %zu / test %zu clips\n", report.train_count, report.test_count);
  std::printf("test categorical accuracy %.4f (loss %.4f)\n", report.test_metrics.categorical_accuracy,
              report.test_metrics.loss);
  if (!report.variance_ratios.empty()) {
    std::printf("PCA explained variance");
    for (double r : report.variance_ratios) std::printf(" %.4f", r);
    std::printf("\ncalibration residual %.6g\n", report.calibration.residual);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speech emotion CNN with Lovheim-cube stress scoring"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string ckpt_arg;
  std::vector<std::string> wavs;
  std::size_t synth_clips = 30;

  auto* features = app.add_subcommand("features", "build the manifest, split it, and cache normalized MFCC features");
  auto* train_cmd = app.add_subcommand("train", "train the CNN on cached training features");
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  auto* embed_cmd = app.add_subcommand("embed", "write 64-d embeddings for every clip");
  auto* cube_cmd = app.add_subcommand("cube-fit", "fit PCA and cube calibration on training embeddings");
  auto* stress_cmd = app.add_subcommand("stress", "score WAV files with a fitted checkpoint");
  auto* pipeline_cmd = app.add_subcommand("pipeline", "run every stage end to end");
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic 7-class corpus and a matching config");

  for (auto* sub : {features, train_cmd, eval_cmd, embed_cmd, cube_cmd, stress_cmd, pipeline_cmd, synth_cmd})
    add_common(sub, opts);
  for (auto* sub : {eval_cmd, embed_cmd, cube_cmd, stress_cmd})
    sub->add_option("--checkpoint", ckpt_arg, "checkpoint file (default <out>/model.emoc)");
  stress_cmd->add_option("wavs", wavs, "WAV files")->required();
  synth_cmd->add_option("--clips-per-class", synth_clips, "clips per emotion class")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  CLI::App* active = app.get_subcommands().front();
  const std::string stage = active->get_name();
  try {
    if (active == synth_cmd) {
      if (!active->remaining().empty()) throw Error(Errc::InvalidConfig, "unexpected argument '" + active->remaining()[0] + "'");
      const fs::path out = opts.out.value_or("synth");
      const std::uint64_t seed = opts.seed.value_or(0);
      SynthOptions so;
      so.clips_per_class = synth_clips;
      const auto n = generate_synthetic_corpus(out / "corpus", seed, so);
      auto cfg = synthetic_run_config(fs::absolute(out / "corpus"), fs::absolute(out / "run"), seed);
      cfg.split.train_count = (n * 2) / 3;
      write_file(out / "synth_config.json", to_json(cfg).dump(2) + "\n");
      std::printf("wrote %zu clips under %s\nconfig: %s\n", n, (out / "corpus").string().c_str(),
                  (out / "synth_config.json").string().c_str());
      return kOk;
    }

    const RunConfig cfg = resolve_config(opts, active->remaining());

    if (active == pipeline_cmd) {
      ensure_dataset_root(cfg);
      print_summary(run_pipeline(cfg));
      return kOk;
    }

    if (active == features) {
      ensure_dataset_root(cfg);
      const auto manifest = prepare_manifest(cfg);
      fs::create_directories(cfg.output_dir);
      auto with_cache = cfg;
      with_cache.cache_features = true;
      compute_features(with_cache, manifest);
      write_file(cfg.output_dir / artifacts::kManifest, manifest_to_csv(manifest));
      for (const auto& w : manifest.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      std::printf("%zu clips (%zu train / %zu test)\n", manifest.records.size(), manifest.count(Split::Train),
                  manifest.count(Split::Test));
      return kOk;
    }

    if (active == stress_cmd) {
      const auto ckpt = load_checkpoint(checkpoint_path(cfg, ckpt_arg));
      if (!ckpt.pca || !ckpt.cube) throw Error(Errc::InvalidConfig, "checkpoint has no cube calibration (run cube-fit)");
      for (const auto& w : wavs) {
        const auto a = analyze_clip(ckpt, read_wav(w));
        std::printf("%s\t%.6f\t%s\t%s\n", w.c_str(), a.stress->score, a.stress->is_stressed ? "true" : "false",
                    std::string(to_string(a.stress->nearest)).c_str());
      }
      return kOk;
    }

    const auto manifest = saved_manifest(cfg);
    const auto feature_set = load_cached_features(cfg, manifest);
    const auto train_set = examples_for(manifest, feature_set, Split::Train);
    const auto test_set = examples_for(manifest, feature_set, Split::Test);

    if (active == train_cmd) {
      auto model = EmoCnn::build(cfg.resolved_model());
      std::span<const Example<float>> holdout;
      if (cfg.model.early_stop) holdout = test_set;
      const auto report = train(model, std::span<const Example<float>>(train_set), holdout);
      write_file(cfg.output_dir / artifacts::kTrainReport, report.to_csv());
      Checkpoint ckpt{model, cfg.feature, cfg.dataset_kind, feature_set.normalizer, std::nullopt, std::nullopt,
                      CubeSettings{cfg.cube.tau, cfg.cube.threshold}};
      save_checkpoint(ckpt, cfg.output_dir / artifacts::kCheckpoint);
      std::printf("trained %zu epochs, final train loss %.4f\n", report.epochs.size(),
                  report.epochs.empty() ? 0.0 : report.epochs.back().train_loss);
      return kOk;
    }

    auto ckpt = load_checkpoint(checkpoint_path(cfg, ckpt_arg));
    PipelineReport report;
    report.train_count = train_set.size();
    report.test_count = test_set.size();
    report.test_metrics = evaluate(ckpt.model, std::span<const Example<float>>(test_set));
    report.train_metrics = evaluate(ckpt.model, std::span<const Example<float>>(train_set));

    if (active == eval_cmd) {
      write_file(cfg.output_dir / artifacts::kMetrics, metrics_json(report, cfg, nullptr).dump(2) + "\n");
      print_summary(report);
      return kOk;
    }

    const auto emb = embed_all(ckpt.model, feature_set);
    if (active == embed_cmd) {
      write_file(cfg.output_dir / artifacts::kEmbeddings, embeddings_csv(manifest, emb, cfg.dataset_kind));
      std::printf("%zu embeddings\n", emb.embeddings.size());
      return kOk;
    }

    // cube-fit
    const auto cube = fit_cube(cfg, manifest, feature_set, emb);
    report.variance_ratios = explained_variance_ratios(cube.pca);
    report.calibration = cube.calibration;
    report.stress_corner_confusion.assign(kNumEmotions, std::vector<std::size_t>(8, 0));
    for (std::size_t i = 0; i < manifest.records.size(); ++i)
      if (manifest.records[i].split == Split::Test)
        ++report.stress_corner_confusion[feature_set.labels[i]][static_cast<std::size_t>(cube.stress[i].nearest)];
    write_file(cfg.output_dir / artifacts::kCubePoints, cube_points_csv(manifest, cube));
    write_file(cfg.output_dir / artifacts::kMetrics, metrics_json(report, cfg, &cube).dump(2) + "\n");
    ckpt.pca = cube.pca;
    ckpt.cube = cube.calibration;
    ckpt.cube_settings = CubeSettings{cfg.cube.tau, cfg.cube.threshold};
    save_checkpoint(ckpt, checkpoint_path(cfg, ckpt_arg));
    print_summary(report);
    return kOk;
  } catch (const StageError& e) {
    std::fprintf(stderr, "emostress %s: %s\n", stage.c_str(), e.what());
    return exit_code_for(e.code());
  } catch (const Error& e) {
    std::fprintf(stderr, "emostress %s: [%s] %s\n", stage.c_str(), stage.c_str(), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "emostress %s: internal error: %s\n", stage.c_str(), e.what());
    return kInternal;
  }
}
