#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emostress/checkpoint.hpp"
#include "emostress/cube.hpp"
#include "emostress/datasets.hpp"
#include "emostress/error.hpp"
#include "emostress/features.hpp"
#include "emostress/model.hpp"
#include "emostress/pca.hpp"

namespace emostress {

struct SplitConfig {
  std::size_t train_count = 0;  // 0: round(n * 429 / 535)
  bool stratify = true;
};

struct CubeConfig {
  double tau = 1.0;
  std::optional<double> threshold;
  std::map<CorpusEmotion, CubeEmotion> label_to_corner = default_label_to_corner();
  std::vector<CorpusEmotion> calibration_emotions;  // empty: every mapped emotion
  bool fit_scale = false;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path dataset_root;
  DatasetKind dataset_kind = DatasetKind::EmoDB;
  std::filesystem::path output_dir = "out";
  SplitConfig split;
  FeatureConfig feature;
  ModelConfig model;  // model.seed is derived from `seed`
  CubeConfig cube;
  bool cache_features = true;

  void validate() const;
  std::size_t resolved_train_count(std::size_t records) const;
  ModelConfig resolved_model() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);

// Recommended configuration for a corpus written by generate_synthetic_corpus.
RunConfig synthetic_run_config(const std::filesystem::path& corpus_root, const std::filesystem::path& output_dir,
                               std::uint64_t seed);

// Failure of one pipeline stage; `error` keeps the originating code.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const Error& error);
  const std::string& stage() const noexcept { return stage_; }
  Errc code() const noexcept { return code_; }

 private:
  std::string stage_;
  Errc code_;
};

struct FeatureSet {
  NormalizerStats normalizer;
  std::vector<Tensor<float>> inputs;  // one 1 x frames x dims tensor per manifest record
  std::vector<std::size_t> labels;
  std::vector<std::size_t> raw_frames;
};

struct EmbeddingSet {
  std::vector<std::vector<float>> logits;
  std::vector<std::vector<float>> embeddings;
};

struct CubeFit {
  PcaModel pca;
  CubeCalibration calibration;
  std::map<CorpusEmotion, Vec3> centroids;  // raw PCA centroids, training split
  std::vector<Vec3> points;                 // raw PCA coordinates per record
  std::vector<StressResult> stress;         // per record
};

struct PipelineReport {
  Metrics test_metrics;
  Metrics train_metrics;
  TrainReport train_report;
  std::vector<double> variance_ratios;
  CubeCalibration calibration;
  std::vector<std::vector<std::size_t>> stress_corner_confusion;  // test split; rows = class, cols = corner
  std::size_t train_count = 0;
  std::size_t test_count = 0;
};

// Individual stages (each throws StageError tagged with its name).
Manifest prepare_manifest(const RunConfig& cfg);
FeatureSet compute_features(const RunConfig& cfg, const Manifest& manifest);
FeatureSet load_cached_features(const RunConfig& cfg, const Manifest& manifest);
EmbeddingSet embed_all(const EmoCnn& model, const FeatureSet& features);
CubeFit fit_cube(const RunConfig& cfg, const Manifest& manifest, const FeatureSet& features, const EmbeddingSet& emb);

std::vector<Example<float>> examples_for(const Manifest& manifest, const FeatureSet& features, Split split);

// Round-trips through float32 so in-memory state equals what a checkpoint stores.
NormalizerStats quantize(const NormalizerStats& stats);
PcaModel quantize(const PcaModel& pca);

// manifest -> split -> features -> train -> evaluate -> embed -> PCA ->
// centroids -> calibrate -> cube points -> stress scores. Writes manifest.csv,
// train_report.csv, metrics.json, embeddings.csv, cube_points.csv and model.emoc.
PipelineReport run_pipeline(const RunConfig& cfg);

// Canonical serializations (sorted keys, fixed float formatting).
nlohmann::json metrics_json(const PipelineReport& report, const RunConfig& cfg, const CubeFit* cube);
std::string embeddings_csv(const Manifest& manifest, const EmbeddingSet& emb, DatasetKind kind);
std::string cube_points_csv(const Manifest& manifest, const CubeFit& cube);

struct ClipAnalysis {
  std::vector<float> logits;
  std::size_t predicted = 0;
  std::vector<float> embedding;
  std::optional<Vec3> pca_point;
  std::optional<StressResult> stress;
};

// Runs one clip through a checkpoint (PCA and cube stages only if present).
ClipAnalysis analyze_clip(const Checkpoint& ckpt, const AudioClip& clip);

namespace artifacts {
inline constexpr const char* kManifest = "manifest.csv";
inline constexpr const char* kTrainReport = "train_report.csv";
inline constexpr const char* kMetrics = "metrics.json";
inline constexpr const char* kEmbeddings = "embeddings.csv";
inline constexpr const char* kCubePoints = "cube_points.csv";
inline constexpr const char* kCheckpoint = "model.emoc";
inline constexpr const char* kNormalizer = "normalizer.json";
inline constexpr const char* kFeatureDir = "features";
}  // namespace artifacts

}  // namespace emostress
