#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emostress/labels.hpp"
#include "emostress/nn.hpp"
#include "emostress/rng.hpp"
#include "emostress/tensor.hpp"

namespace emostress {

// Conv blocks (3x3 same conv + ReLU + 2x2 max pool) followed by a dense
// embedding layer with ReLU and a dense logit layer.
struct ModelConfig {
  std::size_t input_height = 199;
  std::size_t input_width = 39;
  std::vector<std::size_t> conv_channels{16, 32, 32};
  std::size_t embedding_width = 64;
  std::size_t num_classes = kNumEmotions;
  double dropout = 0.3;
  double lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  bool early_stop = false;
  std::size_t early_stop_patience = 10;

  void validate() const;
  // The emotion model proper: 1x199x39 input, 64-wide embedding, 7 classes.
  void validate_emotion_model() const;

  Shape input_shape() const { return {1, input_height, input_width}; }
  Shape final_feature_shape() const;
  std::size_t flatten_width() const { return shape_size(final_feature_shape()); }

  bool operator==(const ModelConfig&) const = default;
};

template <class T>
struct Example {
  Tensor<T> input;  // 1 x H x W
  std::size_t label = 0;
};

template <class T>
class BasicEmoCnn {
 public:
  struct Output {
    std::vector<T> logits;
    std::vector<T> embedding;  // post-ReLU activations of the embedding layer
  };

  struct StepResult {
    T loss;
    std::vector<T> logits;
  };

  // Zero-initialized parameters of the right shapes.
  explicit BasicEmoCnn(ModelConfig cfg);

  // He-normal weights, zero biases, from a stream seeded by derive_seed(cfg.seed, "model.init").
  static BasicEmoCnn build(const ModelConfig& cfg);
  static BasicEmoCnn build(const ModelConfig& cfg, Rng& rng);

  const ModelConfig& config() const noexcept { return cfg_; }

  std::vector<Tensor<T>>& parameters() noexcept { return params_; }
  const std::vector<Tensor<T>>& parameters() const noexcept { return params_; }
  const std::vector<std::string>& parameter_names() const noexcept { return names_; }
  std::size_t parameter_count() const;

  std::vector<Tensor<T>> zero_gradients() const;

  // Inference: dropout inactive.
  Output forward(const Tensor<T>& input) const;

  // Forward + backward for one example. `dropout_mask` is either empty or a
  // flatten_width() vector of per-unit multipliers. Parameter gradients are
  // added into `grads`; `input_grad`, when given, is overwritten.
  StepResult accumulate_gradients(const Tensor<T>& input, std::size_t label, std::span<const T> dropout_mask,
                                  std::vector<Tensor<T>>& grads, Tensor<T>* input_grad = nullptr) const;

  template <class U>
  BasicEmoCnn<U> cast() const {
    BasicEmoCnn<U> out(cfg_);
    for (std::size_t i = 0; i < params_.size(); ++i) out.parameters()[i] = params_[i].template cast<U>();
    return out;
  }

 private:
  std::size_t conv_count() const { return cfg_.conv_channels.size(); }

  ModelConfig cfg_;
  std::vector<Tensor<T>> params_;
  std::vector<std::string> names_;
};

using EmoCnn = BasicEmoCnn<float>;

extern template class BasicEmoCnn<float>;
extern template class BasicEmoCnn<double>;

// Index of the largest value; ties go to the lower index.
template <class T>
std::size_t argmax(std::span<const T> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  std::optional<double> holdout_acc;
};

struct TrainReport {
  std::vector<EpochStats> epochs;

  // epoch,train_loss,train_acc[,holdout_acc]
  std::string to_csv() const;
};

// Seeded per-epoch shuffle, mini-batches (last partial batch kept), mean
// cross-entropy, inverted dropout, Adam. Single-threaded and bit-reproducible.
template <class T>
TrainReport train(BasicEmoCnn<T>& model, std::span<const Example<T>> data,
                  std::span<const Example<T>> holdout = {});

struct Metrics {
  double categorical_accuracy = 0.0;
  double loss = 0.0;
  std::size_t total = 0;
  std::vector<std::vector<std::size_t>> confusion;  // rows = true, cols = predicted
  std::vector<double> precision;
  std::vector<double> recall;
};

template <class T>
Metrics evaluate(const BasicEmoCnn<T>& model, std::span<const Example<T>> data);

// Metrics from precomputed logits (parallel to labels).
Metrics metrics_from_predictions(std::span<const std::vector<float>> logits, std::span<const std::size_t> labels,
                                 std::size_t num_classes);

}  // namespace emostress
