#include "emostress/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>
#include <thread>

#include "byte_io.hpp"
#include "emostress/config_json.hpp"

namespace emostress {

namespace fs = std::filesystem;
using nlohmann::json;

StageError::StageError(std::string stage, const Error& error)
    : std::runtime_error("[" + stage + "] " + error.what()), stage_(std::move(stage)), code_(error.code()) {}

namespace {

template <class F>
auto run_stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  } catch (const json::exception& e) {
    throw StageError(name, Error(Errc::InvalidConfig, e.what()));
  } catch (const fs::filesystem_error& e) {
    throw StageError(name, Error(Errc::IoError, e.what()));
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string corpus_name(CorpusEmotion e) { return std::string(to_string(e)); }

CorpusEmotion parse_corpus_emotion(const std::string& name) {
  const auto e = corpus_emotion_from_string(name);
  if (!e) throw Error(Errc::InvalidConfig, "unknown emotion '" + name + "'");
  return *e;
}

// Runs body(i) for i in [0, n) on a small worker pool. Results land in
// caller-owned slots, so the outcome never depends on scheduling; the
// lowest-index failure is the one rethrown.
template <class F>
void parallel_for(std::size_t n, F&& body) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void write_text(const fs::path& path, const std::string& text) { detail::write_file_atomic(path, text); }

}  // namespace

// ---------------------------------------------------------------------------
// configuration

std::size_t RunConfig::resolved_train_count(std::size_t records) const {
  if (split.train_count != 0) return split.train_count;
  return static_cast<std::size_t>(std::llround(static_cast<double>(records) * 429.0 / 535.0));
}

ModelConfig RunConfig::resolved_model() const {
  ModelConfig m = model;
  m.seed = derive_seed(seed, "model");
  return m;
}

void RunConfig::validate() const {
  feature.validate();
  const auto m = resolved_model();
  m.validate();
  if (m.input_height != feature.target_frames || m.input_width != feature.feature_dim()) {
    throw Error(Errc::InvalidConfig, "model input " + std::to_string(m.input_height) + "x" + std::to_string(m.input_width) +
                                         " does not match features " + std::to_string(feature.target_frames) + "x" +
                                         std::to_string(feature.feature_dim()));
  }
  if (m.embedding_width != 64) throw Error(Errc::InvalidConfig, "embedding width must be 64");
  if (m.num_classes != kNumEmotions) throw Error(Errc::InvalidConfig, "the classifier has exactly 7 classes");
  if (!(cube.tau > 0.0) || !std::isfinite(cube.tau)) throw Error(Errc::InvalidConfig, "cube.tau must be positive");
  const auto classes = ClassMap::for_dataset(dataset_kind);
  for (const auto& [emotion, corner] : cube.label_to_corner) {
    if (!classes.class_of(emotion)) {
      throw Error(Errc::InvalidConfig, "cube.label_map names " + corpus_name(emotion) + ", which is not a class of " +
                                           std::string(to_string(dataset_kind)));
    }
  }
  for (auto e : cube.calibration_emotions) {
    if (!cube.label_to_corner.contains(e)) {
      throw Error(Errc::MissingEmotion, "calibration emotion " + corpus_name(e) + " has no corner in cube.label_map");
    }
  }
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown_keys(j, {"seed", "out", "dataset", "split", "feature", "model", "cube", "cache_features"}, "config");
  RunConfig cfg;
  try {
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out")) cfg.output_dir = j["out"].get<std::string>();
    if (j.contains("cache_features")) cfg.cache_features = j["cache_features"].get<bool>();
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      reject_unknown_keys(d, {"root", "kind"}, "dataset");
      if (d.contains("root")) cfg.dataset_root = d["root"].get<std::string>();
      if (d.contains("kind")) {
        const auto kind = dataset_kind_from_string(d["kind"].get<std::string>());
        if (!kind) throw Error(Errc::InvalidConfig, "dataset.kind must be emodb, savee or synth");
        cfg.dataset_kind = *kind;
      }
    }
    if (j.contains("split")) {
      const auto& s = j["split"];
      reject_unknown_keys(s, {"train_count", "stratify"}, "split");
      if (s.contains("train_count")) cfg.split.train_count = s["train_count"].get<std::size_t>();
      if (s.contains("stratify")) cfg.split.stratify = s["stratify"].get<bool>();
    }
    if (j.contains("feature")) cfg.feature = j["feature"].get<FeatureConfig>();
    if (j.contains("model")) {
      if (j["model"].is_object() && j["model"].contains("seed")) {
        throw Error(Errc::InvalidConfig, "model.seed is derived from the top-level seed; set `seed` instead");
      }
      cfg.model = j["model"].get<ModelConfig>();
    }
    if (j.contains("cube")) {
      const auto& c = j["cube"];
      reject_unknown_keys(c, {"tau", "threshold", "label_map", "calibration", "fit_scale"}, "cube");
      if (c.contains("tau")) cfg.cube.tau = c["tau"].get<double>();
      if (c.contains("threshold") && !c["threshold"].is_null()) cfg.cube.threshold = c["threshold"].get<double>();
      if (c.contains("fit_scale")) cfg.cube.fit_scale = c["fit_scale"].get<bool>();
      if (c.contains("label_map")) {
        // Entries override the default map; null removes a default entry.
        for (const auto& [label, corner] : c["label_map"].items()) {
          if (corner.is_null()) {
            cfg.cube.label_to_corner.erase(parse_corpus_emotion(label));
            continue;
          }
          const auto ce = cube_emotion_from_string(corner.get<std::string>());
          if (!ce) throw Error(Errc::MissingEmotion, "'" + corner.get<std::string>() + "' is not a cube corner");
          cfg.cube.label_to_corner[parse_corpus_emotion(label)] = *ce;
        }
      }
      if (c.contains("calibration")) {
        cfg.cube.calibration_emotions.clear();
        for (const auto& e : c["calibration"]) cfg.cube.calibration_emotions.push_back(parse_corpus_emotion(e.get<std::string>()));
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, e.what());
  }
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json model = cfg.model;
  model.erase("seed");
  json label_map = json::object();
  for (const auto& [label, corner] : default_label_to_corner()) label_map[corpus_name(label)] = nullptr;
  for (const auto& [label, corner] : cfg.cube.label_to_corner) label_map[corpus_name(label)] = std::string(to_string(corner));
  json calibration = json::array();
  for (auto e : cfg.cube.calibration_emotions) calibration.push_back(corpus_name(e));
  return {{"seed", cfg.seed},
          {"out", cfg.output_dir.generic_string()},
          {"cache_features", cfg.cache_features},
          {"dataset", {{"root", cfg.dataset_root.generic_string()}, {"kind", std::string(to_string(cfg.dataset_kind))}}},
          {"split", {{"train_count", cfg.split.train_count}, {"stratify", cfg.split.stratify}}},
          {"feature", cfg.feature},
          {"model", model},
          {"cube",
           {{"tau", cfg.cube.tau},
            {"threshold", cfg.cube.threshold ? json(*cfg.cube.threshold) : json()},
            {"label_map", label_map},
            {"calibration", calibration},
            {"fit_scale", cfg.cube.fit_scale}}}};
}

RunConfig synthetic_run_config(const fs::path& corpus_root, const fs::path& output_dir, std::uint64_t seed) {
  RunConfig cfg;
  cfg.seed = seed;
  cfg.dataset_root = corpus_root;
  cfg.dataset_kind = DatasetKind::Synth;
  cfg.output_dir = output_dir;
  cfg.split.train_count = 140;
  cfg.model.epochs = 15;
  cfg.cube.label_to_corner[CorpusEmotion::Sad] = CubeEmotion::Distress;
  return cfg;
}

// ---------------------------------------------------------------------------
// stages

Manifest prepare_manifest(const RunConfig& cfg) {
  return run_stage("manifest", [&] {
    auto m = build_manifest(cfg.dataset_root, cfg.dataset_kind);
    if (m.records.empty()) throw Error(Errc::EmptyDataset, "no clips under " + cfg.dataset_root.string());
    return split_manifest(std::move(m), cfg.resolved_train_count(m.records.size()), derive_seed(cfg.seed, "split"),
                          cfg.split.stratify);
  });
}

NormalizerStats quantize(const NormalizerStats& stats) {
  NormalizerStats q = stats;
  for (auto& v : q.mean) v = static_cast<float>(v);
  for (auto& v : q.std) v = static_cast<float>(v);
  return q;
}

PcaModel quantize(const PcaModel& pca) {
  PcaModel q = pca;
  for (auto& v : q.mean) v = static_cast<float>(v);
  for (auto& v : q.components.data()) v = static_cast<float>(v);
  for (auto& v : q.eigenvalues) v = static_cast<float>(v);
  q.total_variance = static_cast<float>(q.total_variance);
  return q;
}

namespace {

std::vector<std::size_t> class_labels(const RunConfig& cfg, const Manifest& manifest) {
  const auto classes = ClassMap::for_dataset(cfg.dataset_kind);
  std::vector<std::size_t> labels;
  for (const auto& r : manifest.records) {
    const auto c = classes.class_of(r.emotion);
    if (!c) throw Error(Errc::LabelOutOfRange, r.path + ": " + corpus_name(r.emotion) + " is not a class of this dataset");
    labels.push_back(*c);
  }
  return labels;
}

Tensor<float> to_input(const Matrix& values) {
  Tensor<float> t(Shape{1, values.rows(), values.cols()});
  for (std::size_t i = 0; i < values.data().size(); ++i) t[i] = static_cast<float>(values.data()[i]);
  return t;
}

json normalizer_json(const NormalizerStats& s) { return {{"mean", s.mean}, {"std", s.std}}; }

fs::path cache_path(const RunConfig& cfg, const ClipRecord& r) {
  auto p = cfg.output_dir / artifacts::kFeatureDir / r.path;
  p += ".emof";
  return p;
}

}  // namespace

FeatureSet compute_features(const RunConfig& cfg, const Manifest& manifest) {
  return run_stage("features", [&] {
    FeatureSet fs_out;
    fs_out.labels = class_labels(cfg, manifest);
    const std::size_t n = manifest.records.size();
    std::vector<Matrix> raw(n);
    parallel_for(n, [&](std::size_t i) {
      raw[i] = extract_raw_features(read_wav(cfg.dataset_root / manifest.records[i].path), cfg.feature);
    });
    std::vector<Matrix> train_raw;
    for (std::size_t i = 0; i < n; ++i) {
      fs_out.raw_frames.push_back(raw[i].rows());
      if (manifest.records[i].split == Split::Train) train_raw.push_back(raw[i]);
    }
    fs_out.normalizer = quantize(fit_normalizer(train_raw));

    if (cfg.cache_features)
      for (const auto& r : manifest.records) fs::create_directories(cache_path(cfg, r).parent_path());
    fs_out.inputs.resize(n);
    parallel_for(n, [&](std::size_t i) {
      const auto fm = finalize_features(raw[i], cfg.feature, fs_out.normalizer);
      fs_out.inputs[i] = to_input(fm.values);
      if (cfg.cache_features) write_feature_cache(cache_path(cfg, manifest.records[i]), fm.values);
    });
    if (cfg.cache_features) {
      fs::create_directories(cfg.output_dir);
      write_text(cfg.output_dir / artifacts::kNormalizer, normalizer_json(fs_out.normalizer).dump(2) + "\n");
    }
    return fs_out;
  });
}

FeatureSet load_cached_features(const RunConfig& cfg, const Manifest& manifest) {
  return run_stage("features", [&] {
    FeatureSet out;
    out.labels = class_labels(cfg, manifest);
    const auto bytes = detail::read_file_bytes(cfg.output_dir / artifacts::kNormalizer);
    const auto j = json::parse(bytes.begin(), bytes.end());
    out.normalizer.mean = j.at("mean").get<std::vector<double>>();
    out.normalizer.std = j.at("std").get<std::vector<double>>();
    for (const auto& r : manifest.records) {
      const auto values = read_feature_cache(cache_path(cfg, r));
      out.inputs.push_back(to_input(values));
      out.raw_frames.push_back(0);
    }
    return out;
  });
}

std::vector<Example<float>> examples_for(const Manifest& manifest, const FeatureSet& features, Split split) {
  std::vector<Example<float>> out;
  for (std::size_t i = 0; i < manifest.records.size(); ++i)
    if (manifest.records[i].split == split) out.push_back({features.inputs[i], features.labels[i]});
  return out;
}

EmbeddingSet embed_all(const EmoCnn& model, const FeatureSet& features) {
  return run_stage("embed", [&] {
    EmbeddingSet out;
    const std::size_t n = features.inputs.size();
    out.logits.resize(n);
    out.embeddings.resize(n);
    parallel_for(n, [&](std::size_t i) {
      auto o = model.forward(features.inputs[i]);
      out.logits[i] = std::move(o.logits);
      out.embeddings[i] = std::move(o.embedding);
    });
    return out;
  });
}

CubeFit fit_cube(const RunConfig& cfg, const Manifest& manifest, const FeatureSet& features, const EmbeddingSet& emb) {
  return run_stage("cube", [&] {
    (void)features;
    CubeFit fit;
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < manifest.records.size(); ++i)
      if (manifest.records[i].split == Split::Train) train_idx.push_back(i);
    if (train_idx.empty()) throw Error(Errc::TooFewSamples, "no training embeddings");

    const std::size_t dim = emb.embeddings.front().size();
    Matrix x(train_idx.size(), dim);
    for (std::size_t r = 0; r < train_idx.size(); ++r)
      for (std::size_t j = 0; j < dim; ++j) x(r, j) = emb.embeddings[train_idx[r]][j];
    fit.pca = quantize(fit_pca(x, 3));

    for (const auto& e : emb.embeddings) {
      const std::vector<double> wide(e.begin(), e.end());
      const auto p = project(fit.pca, wide);
      fit.points.push_back({p[0], p[1], p[2]});
    }

    std::vector<CorpusEmotion> calibration = cfg.cube.calibration_emotions;
    if (calibration.empty())
      for (const auto& [label, corner] : cfg.cube.label_to_corner) calibration.push_back(label);

    std::map<CorpusEmotion, std::size_t> counts;
    for (auto e : calibration) fit.centroids[e] = {0, 0, 0};
    for (auto i : train_idx) {
      const auto e = manifest.records[i].emotion;
      auto it = fit.centroids.find(e);
      if (it == fit.centroids.end()) continue;
      for (std::size_t a = 0; a < 3; ++a) it->second[a] += fit.points[i][a];
      ++counts[e];
    }
    for (auto it = fit.centroids.begin(); it != fit.centroids.end();) {
      const auto n = counts[it->first];
      if (n == 0) {
        it = fit.centroids.erase(it);
        continue;
      }
      for (auto& v : it->second) v /= static_cast<double>(n);
      ++it;
    }

    std::map<CorpusEmotion, CubeEmotion> targets;
    for (const auto& [label, centroid] : fit.centroids) targets[label] = cfg.cube.label_to_corner.at(label);
    fit.calibration = calibrate(fit.centroids, targets, CalibrationOptions{cfg.cube.fit_scale});

    for (const auto& p : fit.points) {
      fit.stress.push_back(stress_score(map_to_cube(fit.calibration, p), cfg.cube.tau, cfg.cube.threshold));
    }
    return fit;
  });
}

// ---------------------------------------------------------------------------
// reporting

json metrics_json(const PipelineReport& report, const RunConfig& cfg, const CubeFit* cube) {
  const auto classes = ClassMap::for_dataset(cfg.dataset_kind);
  json names = json::array();
  for (std::size_t i = 0; i < kNumEmotions; ++i) names.push_back(std::string(classes.class_name(i)));

  json j;
  j["dataset"] = std::string(to_string(cfg.dataset_kind));
  j["seed"] = cfg.seed;
  j["classes"] = names;
  j["counts"] = {{"train", report.train_count}, {"test", report.test_count}};
  j["categorical_accuracy"] = report.test_metrics.categorical_accuracy;
  j["loss"] = report.test_metrics.loss;
  j["confusion"] = report.test_metrics.confusion;
  j["precision"] = report.test_metrics.precision;
  j["recall"] = report.test_metrics.recall;
  j["train_categorical_accuracy"] = report.train_metrics.categorical_accuracy;
  j["train_loss"] = report.train_metrics.loss;
  if (!report.train_report.epochs.empty()) {
    j["final_epoch_train_loss"] = report.train_report.epochs.back().train_loss;
    j["epochs_run"] = report.train_report.epochs.size();
  }

  if (cube) {
    j["pca"] = {{"explained_variance_ratios", report.variance_ratios}, {"eigenvalues", cube->pca.eigenvalues}};
    json centroids = json::object();
    for (const auto& [label, c] : cube->centroids) centroids[corpus_name(label)] = c;
    const auto& cal = report.calibration;
    j["cube"] = {{"permutation", cal.permutation},
                 {"signs", cal.signs},
                 {"scale", cal.scale},
                 {"residual", cal.residual},
                 {"centroids", centroids},
                 {"tau", cfg.cube.tau}};
    json corners = json::array();
    for (auto c : kCubeEmotions) corners.push_back(std::string(to_string(c)));
    j["stress"] = {{"corner_confusion", report.stress_corner_confusion}, {"corner_names", corners}, {"split", "test"}};
  }
  return j;
}

std::string embeddings_csv(const Manifest& manifest, const EmbeddingSet& emb, DatasetKind kind) {
  const auto classes = ClassMap::for_dataset(kind);
  std::ostringstream os;
  os << "file,split,true_label";
  const std::size_t dim = emb.embeddings.empty() ? 0 : emb.embeddings.front().size();
  for (std::size_t j = 0; j < dim; ++j) os << ",e" << j;
  os << "\n";
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& r = manifest.records[i];
    os << r.path << ',' << to_string(r.split) << ',' << classes.class_name(*classes.class_of(r.emotion));
    for (float v : emb.embeddings[i]) os << ',' << fmt(v);
    os << "\n";
  }
  return os.str();
}

std::string cube_points_csv(const Manifest& manifest, const CubeFit& cube) {
  std::ostringstream os;
  os << "file,true_label,dopamine,noradrenaline,serotonin,nearest_corner,distance_to_distress,stress_score\n";
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& s = cube.stress[i];
    os << manifest.records[i].path << ',' << corpus_name(manifest.records[i].emotion) << ',' << fmt(s.levels.dopamine) << ','
       << fmt(s.levels.noradrenaline) << ',' << fmt(s.levels.serotonin) << ',' << to_string(s.nearest) << ','
       << fmt(s.distance_to_distress) << ',' << fmt(s.score) << "\n";
  }
  return os.str();
}

PipelineReport run_pipeline(const RunConfig& cfg) {
  run_stage("config", [&] {
    cfg.validate();
    std::error_code ec;
    if (!fs::is_directory(cfg.dataset_root, ec)) throw Error(Errc::MissingDirectory, "dataset root " + cfg.dataset_root.string());
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw Error(Errc::IoError, "cannot create output directory " + cfg.output_dir.string());
    return 0;
  });

  const auto manifest = prepare_manifest(cfg);
  run_stage("manifest", [&] {
    write_text(cfg.output_dir / artifacts::kManifest, manifest_to_csv(manifest));
    return 0;
  });

  const auto features = compute_features(cfg, manifest);
  const auto train_set = examples_for(manifest, features, Split::Train);
  const auto test_set = examples_for(manifest, features, Split::Test);

  PipelineReport report;
  report.train_count = train_set.size();
  report.test_count = test_set.size();

  auto model = run_stage("train", [&] {
    auto m = EmoCnn::build(cfg.resolved_model());
    std::span<const Example<float>> holdout;
    if (cfg.model.early_stop) holdout = test_set;
    report.train_report = train(m, std::span<const Example<float>>(train_set), holdout);
    write_text(cfg.output_dir / artifacts::kTrainReport, report.train_report.to_csv());
    return m;
  });

  run_stage("eval", [&] {
    report.test_metrics = evaluate(model, std::span<const Example<float>>(test_set));
    report.train_metrics = evaluate(model, std::span<const Example<float>>(train_set));
    return 0;
  });

  const auto emb = embed_all(model, features);
  run_stage("embed", [&] {
    write_text(cfg.output_dir / artifacts::kEmbeddings, embeddings_csv(manifest, emb, cfg.dataset_kind));
    return 0;
  });

  const auto cube = fit_cube(cfg, manifest, features, emb);
  report.variance_ratios = explained_variance_ratios(cube.pca);
  report.calibration = cube.calibration;
  report.stress_corner_confusion.assign(kNumEmotions, std::vector<std::size_t>(8, 0));
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    if (manifest.records[i].split != Split::Test) continue;
    ++report.stress_corner_confusion[features.labels[i]][static_cast<std::size_t>(cube.stress[i].nearest)];
  }

  run_stage("report", [&] {
    write_text(cfg.output_dir / artifacts::kCubePoints, cube_points_csv(manifest, cube));
    write_text(cfg.output_dir / artifacts::kMetrics, metrics_json(report, cfg, &cube).dump(2) + "\n");
    Checkpoint ckpt{model, cfg.feature, cfg.dataset_kind, features.normalizer, cube.pca, cube.calibration,
                    CubeSettings{cfg.cube.tau, cfg.cube.threshold}};
    save_checkpoint(ckpt, cfg.output_dir / artifacts::kCheckpoint);
    return 0;
  });
  return report;
}

ClipAnalysis analyze_clip(const Checkpoint& ckpt, const AudioClip& clip) {
  const auto fm = extract_features(clip, ckpt.features, ckpt.normalizer);
  const auto out = ckpt.model.forward(to_input(fm.values));
  ClipAnalysis a;
  a.logits = out.logits;
  a.predicted = argmax<float>(out.logits);
  a.embedding = out.embedding;
  if (ckpt.pca) {
    const std::vector<double> wide(out.embedding.begin(), out.embedding.end());
    const auto p = project(*ckpt.pca, wide);
    a.pca_point = Vec3{p[0], p[1], p[2]};
    if (ckpt.cube) {
      a.stress = stress_score(map_to_cube(*ckpt.cube, *a.pca_point), ckpt.cube_settings.tau, ckpt.cube_settings.threshold);
    }
  }
  return a;
}

}  // namespace emostress
