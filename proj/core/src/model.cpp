#include "emostress/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace emostress {

void ModelConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(Errc::InvalidConfig, why); };
  if (input_height == 0 || input_width == 0) fail("input dimensions must be positive");
  if (conv_channels.empty()) fail("need at least one conv block");
  if (std::find(conv_channels.begin(), conv_channels.end(), std::size_t{0}) != conv_channels.end()) {
    fail("conv channel counts must be positive");
  }
  if (embedding_width == 0 || num_classes < 2) fail("need a positive embedding width and >= 2 classes");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  std::size_t h = input_height, w = input_width;
  for (std::size_t i = 0; i < conv_channels.size(); ++i) {
    if (h < 2 || w < 2) fail("input too small for " + std::to_string(conv_channels.size()) + " pooling stages");
    h /= 2;
    w /= 2;
  }
  if (h == 0 || w == 0) fail("pooling collapses the feature map");
}

void ModelConfig::validate_emotion_model() const {
  validate();
  if (input_height != 199 || input_width != 39) throw Error(Errc::InvalidConfig, "emotion model input must be 199x39");
  if (embedding_width != 64) throw Error(Errc::InvalidConfig, "emotion model embedding width must be 64");
  if (num_classes != kNumEmotions) throw Error(Errc::InvalidConfig, "emotion model must have 7 classes");
}

Shape ModelConfig::final_feature_shape() const {
  std::size_t h = input_height, w = input_width;
  for (std::size_t i = 0; i < conv_channels.size(); ++i) {
    h /= 2;
    w /= 2;
  }
  return {conv_channels.back(), h, w};
}

template <class T>
BasicEmoCnn<T>::BasicEmoCnn(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::size_t in_ch = 1;
  for (std::size_t i = 0; i < cfg_.conv_channels.size(); ++i) {
    const std::size_t out_ch = cfg_.conv_channels[i];
    params_.emplace_back(Shape{out_ch, in_ch, nn::kKernel, nn::kKernel});
    names_.push_back("conv" + std::to_string(i) + ".weight");
    params_.emplace_back(Shape{out_ch});
    names_.push_back("conv" + std::to_string(i) + ".bias");
    in_ch = out_ch;
  }
  params_.emplace_back(Shape{cfg_.embedding_width, cfg_.flatten_width()});
  names_.push_back("embed.weight");
  params_.emplace_back(Shape{cfg_.embedding_width});
  names_.push_back("embed.bias");
  params_.emplace_back(Shape{cfg_.num_classes, cfg_.embedding_width});
  names_.push_back("logits.weight");
  params_.emplace_back(Shape{cfg_.num_classes});
  names_.push_back("logits.bias");
}

template <class T>
BasicEmoCnn<T> BasicEmoCnn<T>::build(const ModelConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "model.init"));
  return build(cfg, rng);
}

template <class T>
BasicEmoCnn<T> BasicEmoCnn<T>::build(const ModelConfig& cfg, Rng& rng) {
  BasicEmoCnn model(cfg);
  for (auto& p : model.params_) {
    if (p.rank() > 1) p = nn::he_init<T>(p.shape, rng);
  }
  return model;
}

template <class T>
std::size_t BasicEmoCnn<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

template <class T>
std::vector<Tensor<T>> BasicEmoCnn<T>::zero_gradients() const {
  std::vector<Tensor<T>> g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.emplace_back(p.shape);
  return g;
}

template <class T>
typename BasicEmoCnn<T>::Output BasicEmoCnn<T>::forward(const Tensor<T>& input) const {
  if (input.shape != cfg_.input_shape()) {
    throw Error(Errc::ShapeMismatch, "model expects " + shape_to_string(cfg_.input_shape()) + ", got " +
                                         shape_to_string(input.shape));
  }
  Tensor<T> x = input;
  for (std::size_t i = 0; i < conv_count(); ++i) {
    auto z = nn::conv2d_forward(x, params_[2 * i], params_[2 * i + 1], nn::Padding::Same);
    x = nn::maxpool2x2_forward(nn::relu_forward(std::move(z))).output;
  }
  const std::size_t base = 2 * conv_count();
  auto hidden = nn::dense_forward<T>(x.span(), params_[base], params_[base + 1].span());
  for (auto& v : hidden) v = v > T{} ? v : T{};
  Output out;
  out.logits = nn::dense_forward<T>(hidden, params_[base + 2], params_[base + 3].span());
  out.embedding = std::move(hidden);
  return out;
}

template <class T>
typename BasicEmoCnn<T>::StepResult BasicEmoCnn<T>::accumulate_gradients(const Tensor<T>& input, std::size_t label,
                                                                          std::span<const T> dropout_mask,
                                                                          std::vector<Tensor<T>>& grads,
                                                                          Tensor<T>* input_grad) const {
  if (input.shape != cfg_.input_shape()) {
    throw Error(Errc::ShapeMismatch, "model expects " + shape_to_string(cfg_.input_shape()) + ", got " +
                                         shape_to_string(input.shape));
  }
  if (grads.size() != params_.size()) throw Error(Errc::ShapeMismatch, "gradient list does not match parameters");
  if (!dropout_mask.empty() && dropout_mask.size() != cfg_.flatten_width()) {
    throw Error(Errc::ShapeMismatch, "dropout mask length must equal flatten width");
  }

  const std::size_t blocks = conv_count();
  std::vector<Tensor<T>> block_in(blocks), pre_relu(blocks);
  std::vector<Shape> relu_shape(blocks);
  std::vector<std::vector<std::uint32_t>> argmax_idx(blocks);

  Tensor<T> x = input;
  for (std::size_t i = 0; i < blocks; ++i) {
    block_in[i] = std::move(x);
    pre_relu[i] = nn::conv2d_forward(block_in[i], params_[2 * i], params_[2 * i + 1], nn::Padding::Same);
    relu_shape[i] = pre_relu[i].shape;
    auto pooled = nn::maxpool2x2_forward(nn::relu_forward(pre_relu[i]));
    argmax_idx[i] = std::move(pooled.argmax);
    x = std::move(pooled.output);
  }

  const Shape flat_shape = x.shape;
  std::vector<T> dropped = std::move(x.data);
  if (!dropout_mask.empty())
    for (std::size_t j = 0; j < dropped.size(); ++j) dropped[j] *= dropout_mask[j];

  const std::size_t base = 2 * blocks;
  const auto hidden_pre = nn::dense_forward<T>(dropped, params_[base], params_[base + 1].span());
  std::vector<T> hidden(hidden_pre.size());
  for (std::size_t j = 0; j < hidden.size(); ++j) hidden[j] = hidden_pre[j] > T{} ? hidden_pre[j] : T{};
  auto logits = nn::dense_forward<T>(hidden, params_[base + 2], params_[base + 3].span());
  auto ce = nn::softmax_cross_entropy<T>(logits, label);

  std::vector<T> g_hidden;
  nn::dense_backward_accumulate<T>(hidden, params_[base + 2], ce.grad, &g_hidden, grads[base + 2],
                                   grads[base + 3].span());
  for (std::size_t j = 0; j < g_hidden.size(); ++j)
    if (!(hidden_pre[j] > T{})) g_hidden[j] = T{};
  std::vector<T> g_flat;
  nn::dense_backward_accumulate<T>(dropped, params_[base], g_hidden, &g_flat, grads[base], grads[base + 1].span());
  if (!dropout_mask.empty())
    for (std::size_t j = 0; j < g_flat.size(); ++j) g_flat[j] *= dropout_mask[j];

  Tensor<T> g(flat_shape, std::move(g_flat));
  for (std::size_t i = blocks; i-- > 0;) {
    auto g_relu = nn::maxpool2x2_backward(g, argmax_idx[i], relu_shape[i]);
    auto g_pre = nn::relu_backward(pre_relu[i], std::move(g_relu));
    const bool need_input = i > 0 || input_grad != nullptr;
    Tensor<T> g_in;
    nn::conv2d_backward_accumulate(block_in[i], params_[2 * i], g_pre, nn::Padding::Same, need_input ? &g_in : nullptr,
                                   grads[2 * i], grads[2 * i + 1]);
    g = std::move(g_in);
  }
  if (input_grad) *input_grad = std::move(g);

  return {ce.loss, std::move(logits)};
}

template class BasicEmoCnn<float>;
template class BasicEmoCnn<double>;

std::string TrainReport::to_csv() const {
  const bool holdout = std::any_of(epochs.begin(), epochs.end(), [](const EpochStats& e) { return e.holdout_acc.has_value(); });
  std::ostringstream os;
  os.precision(9);
  os << "epoch,train_loss,train_acc" << (holdout ? ",holdout_acc" : "") << "\n";
  for (const auto& e : epochs) {
    os << e.epoch << "," << e.train_loss << "," << e.train_acc;
    if (holdout) os << "," << e.holdout_acc.value_or(0.0);
    os << "\n";
  }
  return os.str();
}

namespace {

template <class T>
void check_examples(std::span<const Example<T>> data, std::size_t classes) {
  if (data.empty()) throw Error(Errc::EmptyDataset, "no examples");
  for (const auto& ex : data)
    if (ex.label >= classes) throw Error(Errc::LabelOutOfRange, "label " + std::to_string(ex.label));
}

template <class T>
Metrics compute_metrics(std::span<const std::vector<T>> logits, std::span<const std::size_t> labels, std::size_t k) {
  if (logits.empty()) throw Error(Errc::EmptyDataset, "no predictions to evaluate");
  if (logits.size() != labels.size()) throw Error(Errc::ShapeMismatch, "logits and labels differ in length");
  Metrics m;
  m.total = logits.size();
  m.confusion.assign(k, std::vector<std::size_t>(k, 0));
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (labels[i] >= k) throw Error(Errc::LabelOutOfRange, "label " + std::to_string(labels[i]));
    const std::span<const T> z = logits[i];
    loss += static_cast<double>(nn::softmax_cross_entropy<T>(z, labels[i]).loss);
    ++m.confusion[labels[i]][argmax(z)];
  }
  std::size_t correct = 0;
  for (std::size_t c = 0; c < k; ++c) correct += m.confusion[c][c];
  m.categorical_accuracy = static_cast<double>(correct) / static_cast<double>(m.total);
  m.loss = loss / static_cast<double>(m.total);
  m.precision.assign(k, 0.0);
  m.recall.assign(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t predicted = 0, actual = 0;
    for (std::size_t r = 0; r < k; ++r) {
      predicted += m.confusion[r][c];
      actual += m.confusion[c][r];
    }
    if (predicted) m.precision[c] = static_cast<double>(m.confusion[c][c]) / static_cast<double>(predicted);
    if (actual) m.recall[c] = static_cast<double>(m.confusion[c][c]) / static_cast<double>(actual);
  }
  return m;
}

}  // namespace

Metrics metrics_from_predictions(std::span<const std::vector<float>> logits, std::span<const std::size_t> labels,
                                 std::size_t num_classes) {
  return compute_metrics<float>(logits, labels, num_classes);
}

template <class T>
Metrics evaluate(const BasicEmoCnn<T>& model, std::span<const Example<T>> data) {
  check_examples(data, model.config().num_classes);
  std::vector<std::vector<T>> logits;
  std::vector<std::size_t> labels;
  logits.reserve(data.size());
  for (const auto& ex : data) {
    logits.push_back(model.forward(ex.input).logits);
    labels.push_back(ex.label);
  }
  return compute_metrics<T>(logits, labels, model.config().num_classes);
}

template <class T>
TrainReport train(BasicEmoCnn<T>& model, std::span<const Example<T>> data, std::span<const Example<T>> holdout) {
  const ModelConfig& cfg = model.config();
  check_examples(data, cfg.num_classes);
  if (!holdout.empty()) check_examples(holdout, cfg.num_classes);

  Rng shuffle_rng(derive_seed(cfg.seed, "train.shuffle"));
  Rng dropout_rng(derive_seed(cfg.seed, "train.dropout"));
  const nn::AdamParams adam{cfg.lr};

  auto& params = model.parameters();
  std::vector<nn::AdamState<T>> states;
  for (const auto& p : params) states.emplace_back(p.shape);
  auto grads = model.zero_gradients();

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<T> mask(cfg.dropout > 0.0 ? cfg.flatten_width() : 0);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - cfg.dropout));

  TrainReport report;
  double best_holdout = -1.0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      for (auto& g : grads) g.fill(T{});
      for (std::size_t b = start; b < stop; ++b) {
        const auto& ex = data[order[b]];
        for (auto& m : mask) m = dropout_rng.uniform() < cfg.dropout ? T{} : keep_scale;
        const auto step = model.accumulate_gradients(ex.input, ex.label, mask, grads);
        loss_sum += static_cast<double>(step.loss);
        if (argmax<T>(step.logits) == ex.label) ++correct;
      }
      const T inv = static_cast<T>(1.0 / static_cast<double>(stop - start));
      for (std::size_t i = 0; i < params.size(); ++i) {
        for (auto& v : grads[i].data) v *= inv;
        nn::adam_step(params[i], grads[i], states[i], adam);
      }
    }

    EpochStats stats{epoch, loss_sum / static_cast<double>(data.size()),
                     static_cast<double>(correct) / static_cast<double>(data.size()), std::nullopt};
    if (!holdout.empty()) stats.holdout_acc = evaluate(model, holdout).categorical_accuracy;
    report.epochs.push_back(stats);

    if (cfg.early_stop && stats.holdout_acc) {
      if (*stats.holdout_acc > best_holdout) {
        best_holdout = *stats.holdout_acc;
        since_best = 0;
      } else if (++since_best >= cfg.early_stop_patience) {
        break;
      }
    }
  }
  return report;
}

template TrainReport train<float>(BasicEmoCnn<float>&, std::span<const Example<float>>, std::span<const Example<float>>);
template TrainReport train<double>(BasicEmoCnn<double>&, std::span<const Example<double>>,
                                   std::span<const Example<double>>);
template Metrics evaluate<float>(const BasicEmoCnn<float>&, std::span<const Example<float>>);
template Metrics evaluate<double>(const BasicEmoCnn<double>&, std::span<const Example<double>>);

}  // namespace emostress
