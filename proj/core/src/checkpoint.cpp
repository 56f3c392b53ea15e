#include "emostress/checkpoint.hpp"

#include <zlib.h>

#include <cmath>

#include "byte_io.hpp"
#include "emostress/config_json.hpp"
#include "emostress/error.hpp"

namespace emostress {

namespace {

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

const NamedTensor* TensorContainer::find(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

std::vector<std::uint8_t> encode_container(const TensorContainer& c) {
  detail::ByteWriter w;
  w.text("EMOC");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(c.config_json.size()));
  w.text(c.config_json);
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    if (t.name.size() > 0xFFFF || t.dims.size() > 0xFF) throw Error(Errc::InvalidConfig, "tensor name or rank too large");
    if (shape_size(t.dims) != t.values.size()) throw Error(Errc::ShapeMismatch, "tensor " + t.name + " payload size");
    w.u16(static_cast<std::uint16_t>(t.name.size()));
    w.text(t.name);
    w.u8(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.values) w.f32(v);
  }
  auto& buf = w.buffer();
  const auto crc = crc32_of(std::span(buf).subspan(4));
  w.u32(crc);
  return std::move(buf);
}

TensorContainer decode_container(std::span<const std::uint8_t> bytes, const std::string& what) {
  detail::ByteReader r(bytes, what);
  if (bytes.size() < 4) throw Error(Errc::TruncatedFile, what);
  if (r.text(4) != "EMOC") throw Error(Errc::BadMagic, what);
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(Errc::UnsupportedVersion, what + " has version " + std::to_string(version));
  }
  TensorContainer c;
  c.config_json = r.text(r.u32());
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.text(r.u16());
    const auto rank = r.u8();
    std::uint64_t elements = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      t.dims.push_back(r.u32());
      elements *= t.dims.back();
    }
    if (elements * 4 > r.remaining()) throw Error(Errc::TruncatedFile, what + " (tensor " + t.name + ")");
    t.values.resize(static_cast<std::size_t>(elements));
    for (auto& v : t.values) v = r.f32();
    c.tensors.push_back(std::move(t));
  }
  const auto body_end = r.position();
  const auto stored = r.u32();
  if (stored != crc32_of(bytes.subspan(4, body_end - 4))) throw Error(Errc::ChecksumMismatch, what);
  return c;
}

namespace {

NamedTensor make_tensor(std::string name, Shape dims, std::span<const double> values) {
  NamedTensor t{std::move(name), std::move(dims), {}};
  t.values.assign(values.begin(), values.end());
  return t;
}

const NamedTensor& require(const TensorContainer& c, std::string_view name, std::size_t expected_size) {
  const auto* t = c.find(name);
  if (!t) throw Error(Errc::ShapeMismatch, "checkpoint lacks tensor " + std::string(name));
  if (t->values.size() != expected_size) {
    throw Error(Errc::ShapeMismatch, "checkpoint tensor " + std::string(name) + " has " + std::to_string(t->values.size()) +
                                         " values, expected " + std::to_string(expected_size));
  }
  return *t;
}

std::vector<double> widen(const NamedTensor& t) { return {t.values.begin(), t.values.end()}; }

}  // namespace

TensorContainer to_container(const Checkpoint& ckpt) {
  nlohmann::json j;
  j["format"] = "emostress-checkpoint";
  j["dataset"] = std::string(to_string(ckpt.dataset));
  nlohmann::json classes = nlohmann::json::array();
  const auto map = ClassMap::for_dataset(ckpt.dataset);
  for (std::size_t i = 0; i < kNumEmotions; ++i) classes.push_back(std::string(map.class_name(i)));
  j["classes"] = classes;
  j["model"] = ckpt.model.config();
  j["features"] = ckpt.features;
  j["cube"] = {{"tau", ckpt.cube_settings.tau},
               {"threshold", ckpt.cube_settings.threshold ? nlohmann::json(*ckpt.cube_settings.threshold) : nlohmann::json()}};

  TensorContainer c;
  c.config_json = j.dump();
  const auto& params = ckpt.model.parameters();
  const auto& names = ckpt.model.parameter_names();
  for (std::size_t i = 0; i < params.size(); ++i) c.tensors.push_back({names[i], params[i].shape, params[i].data});

  if (ckpt.normalizer) {
    c.tensors.push_back(make_tensor("norm.mean", {ckpt.normalizer->mean.size()}, ckpt.normalizer->mean));
    c.tensors.push_back(make_tensor("norm.std", {ckpt.normalizer->std.size()}, ckpt.normalizer->std));
  }
  if (ckpt.pca) {
    const auto& p = *ckpt.pca;
    c.tensors.push_back(make_tensor("pca.mean", {p.dims()}, p.mean));
    c.tensors.push_back(make_tensor("pca.components", {p.rank(), p.dims()}, p.components.data()));
    c.tensors.push_back(make_tensor("pca.eigenvalues", {p.rank()}, p.eigenvalues));
    const double total[1] = {p.total_variance};
    c.tensors.push_back(make_tensor("pca.total_variance", {1}, total));
  }
  if (ckpt.cube) {
    const auto& cal = *ckpt.cube;
    const double perm[3] = {double(cal.permutation[0]), double(cal.permutation[1]), double(cal.permutation[2])};
    const double signs[3] = {double(cal.signs[0]), double(cal.signs[1]), double(cal.signs[2])};
    const double scale[1] = {cal.scale};
    const double residual[1] = {cal.residual};
    c.tensors.push_back(make_tensor("cube.permutation", {3}, perm));
    c.tensors.push_back(make_tensor("cube.signs", {3}, signs));
    c.tensors.push_back(make_tensor("cube.scale", {1}, scale));
    c.tensors.push_back(make_tensor("cube.residual", {1}, residual));
  }
  return c;
}

Checkpoint from_container(const TensorContainer& c) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(c.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptHeader, std::string("checkpoint config is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "emostress-checkpoint") throw Error(Errc::BadMagic, "checkpoint config has wrong format tag");

  ModelConfig mc = j.at("model").get<ModelConfig>();
  Checkpoint ckpt{EmoCnn(mc), j.at("features").get<FeatureConfig>(), DatasetKind::EmoDB, {}, {}, {}, {}};
  const auto kind = dataset_kind_from_string(j.value("dataset", "emodb"));
  if (!kind) throw Error(Errc::InvalidConfig, "checkpoint names an unknown dataset kind");
  ckpt.dataset = *kind;
  if (j.contains("cube")) {
    ckpt.cube_settings.tau = j["cube"].value("tau", 1.0);
    if (j["cube"].contains("threshold") && !j["cube"]["threshold"].is_null()) {
      ckpt.cube_settings.threshold = j["cube"]["threshold"].get<double>();
    }
  }

  auto& params = ckpt.model.parameters();
  const auto& names = ckpt.model.parameter_names();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = require(c, names[i], params[i].size());
    if (t.dims != params[i].shape) throw Error(Errc::ShapeMismatch, "checkpoint tensor " + names[i] + " has wrong shape");
    params[i].data = t.values;
  }

  if (c.find("norm.mean")) {
    const std::size_t dim = ckpt.features.feature_dim();
    ckpt.normalizer = NormalizerStats{widen(require(c, "norm.mean", dim)), widen(require(c, "norm.std", dim))};
  }
  if (const auto* mean = c.find("pca.mean")) {
    PcaModel p;
    p.mean = widen(*mean);
    const auto& comps = *c.find("pca.components");
    if (comps.dims.size() != 2 || comps.dims[1] != p.mean.size()) throw Error(Errc::ShapeMismatch, "pca.components shape");
    p.components = Matrix(comps.dims[0], comps.dims[1]);
    p.components.data() = widen(comps);
    p.eigenvalues = widen(require(c, "pca.eigenvalues", comps.dims[0]));
    p.total_variance = require(c, "pca.total_variance", 1).values[0];
    ckpt.pca = std::move(p);
  }
  if (c.find("cube.permutation")) {
    CubeCalibration cal;
    const auto& perm = require(c, "cube.permutation", 3).values;
    const auto& signs = require(c, "cube.signs", 3).values;
    std::array<bool, 3> used{};
    for (std::size_t i = 0; i < 3; ++i) {
      const auto axis = static_cast<int>(perm[i]);
      if (axis < 0 || axis > 2 || used[static_cast<std::size_t>(axis)]) throw Error(Errc::InvalidConfig, "cube.permutation is not a bijection");
      used[static_cast<std::size_t>(axis)] = true;
      cal.permutation[i] = static_cast<std::uint8_t>(axis);
      if (signs[i] != 1.0f && signs[i] != -1.0f) throw Error(Errc::InvalidConfig, "cube.signs must be +-1");
      cal.signs[i] = static_cast<std::int8_t>(signs[i]);
    }
    cal.scale = require(c, "cube.scale", 1).values[0];
    if (!(cal.scale > 0.0)) throw Error(Errc::InvalidConfig, "cube.scale must be positive");
    if (const auto* res = c.find("cube.residual")) cal.residual = res->values.at(0);
    ckpt.cube = cal;
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_container(to_container(ckpt));
  detail::write_file_atomic(path, bytes);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  return from_container(decode_container(bytes, path.string()));
}

}  // namespace emostress
