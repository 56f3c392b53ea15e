#include "emostress/config_json.hpp"

#include <algorithm>

#include "emostress/error.hpp"

namespace emostress {

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> known, std::string_view where) {
  if (!j.is_object()) throw Error(Errc::InvalidConfig, std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(Errc::InvalidConfig, "unknown key '" + key + "' in " + std::string(where));
    }
  }
}

namespace {

template <class T>
void read(const nlohmann::json& j, const char* key, T& out, std::string_view where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string(where) + "." + key + ": " + e.what());
  }
}

}  // namespace

void to_json(nlohmann::json& j, const FeatureConfig& c) {
  j = {{"sample_rate", c.sample_rate}, {"preemphasis", c.preemphasis},   {"frame_length", c.frame_length},
       {"hop", c.hop},                 {"nfft", c.nfft},                 {"n_mels", c.n_mels},
       {"fmin", c.fmin},               {"fmax", c.fmax},                 {"n_ceps", c.n_ceps},
       {"delta_window", c.delta_window}, {"target_frames", c.target_frames}, {"log_floor", c.log_floor}};
}

void from_json(const nlohmann::json& j, FeatureConfig& c) {
  constexpr std::string_view w = "feature";
  reject_unknown_keys(j, {"sample_rate", "preemphasis", "frame_length", "hop", "nfft", "n_mels", "fmin", "fmax", "n_ceps",
                          "delta_window", "target_frames", "log_floor"},
                      w);
  read(j, "sample_rate", c.sample_rate, w);
  read(j, "preemphasis", c.preemphasis, w);
  read(j, "frame_length", c.frame_length, w);
  read(j, "hop", c.hop, w);
  read(j, "nfft", c.nfft, w);
  read(j, "n_mels", c.n_mels, w);
  read(j, "fmin", c.fmin, w);
  read(j, "fmax", c.fmax, w);
  read(j, "n_ceps", c.n_ceps, w);
  read(j, "delta_window", c.delta_window, w);
  read(j, "target_frames", c.target_frames, w);
  read(j, "log_floor", c.log_floor, w);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"input_height", c.input_height},
       {"input_width", c.input_width},
       {"conv_channels", c.conv_channels},
       {"embedding_width", c.embedding_width},
       {"num_classes", c.num_classes},
       {"dropout", c.dropout},
       {"lr", c.lr},
       {"batch_size", c.batch_size},
       {"epochs", c.epochs},
       {"seed", c.seed},
       {"early_stop", c.early_stop},
       {"early_stop_patience", c.early_stop_patience}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  constexpr std::string_view w = "model";
  reject_unknown_keys(j, {"input_height", "input_width", "conv_channels", "embedding_width", "num_classes", "dropout", "lr",
                          "batch_size", "epochs", "seed", "early_stop", "early_stop_patience"},
                      w);
  read(j, "input_height", c.input_height, w);
  read(j, "input_width", c.input_width, w);
  read(j, "conv_channels", c.conv_channels, w);
  read(j, "embedding_width", c.embedding_width, w);
  read(j, "num_classes", c.num_classes, w);
  read(j, "dropout", c.dropout, w);
  read(j, "lr", c.lr, w);
  read(j, "batch_size", c.batch_size, w);
  read(j, "epochs", c.epochs, w);
  read(j, "seed", c.seed, w);
  read(j, "early_stop", c.early_stop, w);
  read(j, "early_stop_patience", c.early_stop_patience, w);
}

}  // namespace emostress
