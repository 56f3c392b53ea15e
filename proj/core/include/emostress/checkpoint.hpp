#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emostress/cube.hpp"
#include "emostress/features.hpp"
#include "emostress/labels.hpp"
#include "emostress/model.hpp"
#include "emostress/pca.hpp"

namespace emostress {

// Checkpoint container, little-endian:
//   "EMOC" | u32 version | u32 json_len | json | u32 tensor_count |
//   per tensor: u16 name_len | name | u8 rank | rank x u32 dims | float32 payload |
//   u32 CRC-32 of everything after the magic.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Shape dims;
  std::vector<float> values;

  bool operator==(const NamedTensor&) const = default;
};

struct TensorContainer {
  std::string config_json;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(std::string_view name) const;
  bool operator==(const TensorContainer&) const = default;
};

std::vector<std::uint8_t> encode_container(const TensorContainer& container);
TensorContainer decode_container(std::span<const std::uint8_t> bytes, const std::string& what = "<memory>");

struct CubeSettings {
  double tau = 1.0;
  std::optional<double> threshold;
};

// A full pipeline in one file: network, normalizer, and optionally the PCA
// projection and cube calibration fitted on its embeddings.
struct Checkpoint {
  EmoCnn model;
  FeatureConfig features;
  DatasetKind dataset = DatasetKind::EmoDB;
  std::optional<NormalizerStats> normalizer;
  std::optional<PcaModel> pca;
  std::optional<CubeCalibration> cube;
  CubeSettings cube_settings;
};

TensorContainer to_container(const Checkpoint& ckpt);
Checkpoint from_container(const TensorContainer& container);

// Write-to-temp then rename; a failed save never leaves a partial file.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace emostress
