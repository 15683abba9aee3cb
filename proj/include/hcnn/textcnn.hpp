/*
 * Copyright 2026 The hcnn Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Kim-style text CNN:
//
//   embed -> per window size h: conv1d(h) -> max over time
//         -> concat -> dropout -> dense + relu -> dense -> softmax
//
// trained with mini-batch adadelta and checkpointed on validation F1-micro.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hcnn/error.hpp"
#include "hcnn/metrics.hpp"
#include "hcnn/nn/layers.hpp"
#include "hcnn/nn/optim.hpp"
#include "hcnn/nn/tensor.hpp"
#include "hcnn/rng.hpp"
#include "hcnn/textprep.hpp"

namespace hcnn {

struct TextCnnConfig {
  std::vector<std::size_t> window_sizes{3, 4, 5};
  std::size_t maps_per_window = 100;
  std::size_t embedding_dim = 128;
  double dropout_rate = 0.5;
  std::size_t hidden_size = 100;
  std::size_t num_classes = 2;
  std::size_t epochs = 147;
  std::size_t batch_size = 75;
  double adadelta_rho = nn::kAdadeltaRho;
  double adadelta_eps = nn::kAdadeltaEps;
  std::uint64_t seed = 1;
  std::size_t max_len = 5;

  std::size_t max_window() const {
    return window_sizes.empty() ? 0 : *std::max_element(window_sizes.begin(), window_sizes.end());
  }
  std::size_t pooled_size() const { return window_sizes.size() * maps_per_window; }

  void validate() const {
    auto fail = [](const std::string& m) { throw InvalidConfig("text CNN config: " + m); };
    if (window_sizes.empty()) fail("no window sizes");
    for (auto h : window_sizes)
      if (h == 0 || h > max_len) fail("window size " + std::to_string(h) + " not in [1, max_len]");
    if (num_classes < 2) fail("num_classes must be at least 2");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must lie in [0, 1)");
    if (maps_per_window == 0 || embedding_dim == 0 || hidden_size == 0) fail("layer sizes must be positive");
    if (batch_size == 0) fail("batch_size must be positive");
    if (!(adadelta_rho > 0.0 && adadelta_rho < 1.0) || !(adadelta_eps > 0.0)) fail("bad adadelta settings");
  }

  bool operator==(const TextCnnConfig&) const = default;
};

struct TextCnnModel {
  TextCnnConfig config;
  std::size_t vocab_size = 0;  // V; the embedding table has V + 2 rows
  std::vector<std::string> class_labels;

  nn::Parameter embedding;
  std::vector<nn::Parameter> conv_filters;
  std::vector<nn::Parameter> conv_biases;
  nn::Parameter hidden_weights, hidden_bias;
  nn::Parameter output_weights, output_bias;

  /// Fixed order: embedding, (filters, bias) per window, hidden, output.
  std::vector<nn::Parameter*> parameters() {
    std::vector<nn::Parameter*> ps{&embedding};
    for (std::size_t w = 0; w < conv_filters.size(); ++w) {
      ps.push_back(&conv_filters[w]);
      ps.push_back(&conv_biases[w]);
    }
    for (auto* p : {&hidden_weights, &hidden_bias, &output_weights, &output_bias}) ps.push_back(p);
    return ps;
  }
  std::vector<const nn::Parameter*> parameters() const {
    std::vector<const nn::Parameter*> out;
    for (auto* p : const_cast<TextCnnModel*>(this)->parameters()) out.push_back(p);
    return out;
  }

  bool all_finite() const {
    for (const auto* p : parameters())
      if (!p->value.all_finite()) return false;
    return true;
  }
};

namespace detail {

inline void uniform_fill(nn::Tensor& t, double bound, Rng& rng) {
  for (auto& v : t.values()) v = rng.uniform(-bound, bound);
}

inline double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace detail

/// Embedding ~ U[-0.25, 0.25]; weights ~ U[-b, b] with b = sqrt(6 / (fan_in +
/// fan_out)); biases zero. For a conv filter fan_in = h*d and fan_out = h*m.
inline TextCnnModel build_model(const TextCnnConfig& config, std::size_t vocab_size, Rng& rng,
                                std::vector<std::string> class_labels = {}) {
  config.validate();
  if (vocab_size == 0) throw InvalidConfig("vocabulary must hold at least one term");
  if (class_labels.empty())
    for (std::size_t c = 0; c < config.num_classes; ++c) class_labels.push_back(std::to_string(c));
  if (class_labels.size() != config.num_classes) throw InvalidConfig("class_labels size differs from num_classes");

  TextCnnModel m;
  m.config = config;
  m.vocab_size = vocab_size;
  m.class_labels = std::move(class_labels);
  const std::size_t d = config.embedding_dim, maps = config.maps_per_window;

  m.embedding = nn::Parameter("embedding", {vocab_size + 2, d});
  detail::uniform_fill(m.embedding.value, 0.25, rng);
  for (auto h : config.window_sizes) {
    const auto tag = "conv" + std::to_string(h);
    m.conv_filters.emplace_back(tag + ".filters", nn::Shape{maps, h, d});
    m.conv_biases.emplace_back(tag + ".bias", nn::Shape{maps});
    detail::uniform_fill(m.conv_filters.back().value, detail::glorot_bound(h * d, h * maps), rng);
  }
  const std::size_t pooled = config.pooled_size();
  m.hidden_weights = nn::Parameter("hidden.weights", {config.hidden_size, pooled});
  m.hidden_bias = nn::Parameter("hidden.bias", {config.hidden_size});
  detail::uniform_fill(m.hidden_weights.value, detail::glorot_bound(pooled, config.hidden_size), rng);
  m.output_weights = nn::Parameter("output.weights", {config.num_classes, config.hidden_size});
  m.output_bias = nn::Parameter("output.bias", {config.num_classes});
  detail::uniform_fill(m.output_weights.value, detail::glorot_bound(config.hidden_size, config.num_classes), rng);
  return m;
}

/// Intermediate values of one forward pass, kept for backward.
struct ForwardTrace {
  nn::Tensor embedded;
  std::vector<nn::Tensor> feature_maps;
  std::vector<nn::PoolResult> pools;
  nn::Tensor pooled;
  nn::DropoutResult dropped;
  nn::Tensor hidden;
  nn::Tensor logits;
  nn::Tensor probs;

  // backward scratch
  nn::Tensor grad_embedded, grad_window_input, grad_map;
  nn::Tensor grad_dropped, grad_pooled, grad_hidden;
  nn::SoftmaxXent xent;
};

/// How dropout behaves in a forward pass.
struct DropoutMode {
  bool training = false;
  Rng* rng = nullptr;                    // draws a fresh mask when training
  const nn::Tensor* fixed_mask = nullptr;  // reuses a mask (gradient checks)
};

inline void forward_trace(const TextCnnModel& model, std::span<const std::int32_t> indices, DropoutMode mode,
                          ForwardTrace& tr) {
  const auto& cfg = model.config;
  if (indices.size() < cfg.max_window())
    throw ShapeMismatch("document of length " + std::to_string(indices.size()) + " shorter than the widest window");
  nn::embedding_forward(indices, model.embedding, tr.embedded);

  const std::size_t nw = cfg.window_sizes.size(), maps = cfg.maps_per_window;
  tr.feature_maps.resize(nw);
  tr.pools.resize(nw);
  tr.pooled.resize({nw * maps});
  for (std::size_t w = 0; w < nw; ++w) {
    nn::conv1d_forward(tr.embedded, model.conv_filters[w], model.conv_biases[w], tr.feature_maps[w]);
    nn::max_over_time_pool(tr.feature_maps[w], tr.pools[w]);
    std::copy_n(tr.pools[w].values.data(), maps, tr.pooled.data() + w * maps);
  }

  if (mode.fixed_mask) {
    tr.dropped.mask = *mode.fixed_mask;
    nn::apply_mask(tr.pooled, tr.dropped.mask, tr.dropped.output);
  } else if (mode.training) {
    nn::dropout(tr.pooled, cfg.dropout_rate, true, *mode.rng, tr.dropped);
  } else {
    tr.dropped.output = tr.pooled;
    tr.dropped.mask.resize(tr.pooled.shape(), 1.0);
  }

  nn::dense_forward(tr.dropped.output, model.hidden_weights, model.hidden_bias, nn::Activation::Relu, tr.hidden);
  nn::dense_forward(tr.hidden, model.output_weights, model.output_bias, nn::Activation::None, tr.logits);
  nn::softmax(tr.logits, tr.probs);
}

/// Accumulates scale * d(loss)/d(params) for the pass recorded in `tr` and
/// returns the (unscaled) cross-entropy loss.
inline double backward(TextCnnModel& model, std::span<const std::int32_t> indices, std::size_t gold,
                       ForwardTrace& tr, double scale = 1.0) {
  const auto& cfg = model.config;
  if (gold >= cfg.num_classes) throw LabelOutOfRange("gold class " + std::to_string(gold) + " out of range");
  nn::softmax_cross_entropy(tr.logits, gold, tr.xent);
  for (auto& g : tr.xent.grad_logits.values()) g *= scale;

  nn::dense_backward(tr.hidden, tr.logits, model.output_weights, model.output_bias, nn::Activation::None,
                     tr.xent.grad_logits, &tr.grad_hidden);
  nn::dense_backward(tr.dropped.output, tr.hidden, model.hidden_weights, model.hidden_bias, nn::Activation::Relu,
                     tr.grad_hidden, &tr.grad_dropped);
  nn::dropout_backward(tr.grad_dropped, tr.dropped.mask, tr.grad_pooled);

  const std::size_t maps = cfg.maps_per_window;
  tr.grad_embedded.resize(tr.embedded.shape(), 0.0);
  nn::Tensor slice({maps});
  for (std::size_t w = 0; w < cfg.window_sizes.size(); ++w) {
    std::copy_n(tr.grad_pooled.data() + w * maps, maps, slice.data());
    nn::max_pool_backward(slice, tr.pools[w].argmax, tr.feature_maps[w].dim(0), tr.grad_map);
    nn::conv1d_backward(tr.embedded, model.conv_filters[w], model.conv_biases[w], tr.grad_map,
                        &tr.grad_window_input);
    for (std::size_t i = 0; i < tr.grad_embedded.size(); ++i) tr.grad_embedded[i] += tr.grad_window_input[i];
  }
  nn::embedding_backward(indices, tr.grad_embedded, model.embedding);
  return tr.xent.loss;
}

/// Class probabilities; inference path unless mode.training is set.
inline nn::Tensor forward(const TextCnnModel& model, const EncodedDocument& doc, bool training, Rng& rng) {
  ForwardTrace tr;
  forward_trace(model, doc.indices, DropoutMode{training, &rng, nullptr}, tr);
  return tr.probs;
}

struct Prediction {
  std::string label;
  std::size_t index = 0;
  std::vector<double> probs;

  double max_prob() const { return probs.empty() ? 0.0 : probs[index]; }
};

inline std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());  // first max wins
}

inline Prediction predict(const TextCnnModel& model, const EncodedDocument& doc, ForwardTrace& tr) {
  forward_trace(model, doc.indices, DropoutMode{}, tr);
  Prediction p;
  p.probs.assign(tr.probs.values().begin(), tr.probs.values().end());
  p.index = argmax(p.probs);
  p.label = model.class_labels[p.index];
  return p;
}

inline Prediction predict(const TextCnnModel& model, const EncodedDocument& doc) {
  ForwardTrace tr;
  return predict(model, doc, tr);
}

/// Finite-difference check of the whole model on `docs` (mean cross-entropy).
/// One dropout mask per document is drawn from `mask_rng` and held fixed, so
/// the loss is a deterministic function of the parameters.
inline double model_grad_check(TextCnnModel& model, std::span<const EncodedDocument> docs, Rng& mask_rng,
                               double eps = 1e-6) {
  if (docs.empty()) throw EmptySplit("gradient check needs at least one document");
  ForwardTrace tr;
  std::vector<nn::Tensor> masks;
  for (const auto& d : docs) {
    forward_trace(model, d.indices, DropoutMode{true, &mask_rng, nullptr}, tr);
    masks.push_back(tr.dropped.mask);
  }
  const double scale = 1.0 / static_cast<double>(docs.size());
  auto loss = [&] {
    double sum = 0.0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      forward_trace(model, docs[i].indices, DropoutMode{true, nullptr, &masks[i]}, tr);
      sum += nn::softmax_cross_entropy(tr.logits, docs[i].label).loss;
    }
    return sum * scale;
  };
  auto grads = [&] {
    for (std::size_t i = 0; i < docs.size(); ++i) {
      forward_trace(model, docs[i].indices, DropoutMode{true, nullptr, &masks[i]}, tr);
      backward(model, docs[i].indices, docs[i].label, tr, scale);
    }
  };
  const auto params = model.parameters();
  return nn::grad_check(std::span<nn::Parameter* const>(params), loss, grads, eps);
}

struct EpochRecord {
  double train_loss = 0.0;  // mean per example
  double val_f1_micro = 0.0;
  double val_f1_macro = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  long best_epoch = -1;  // 0-based; -1 when no epoch ran
};

struct TrainResult {
  TextCnnModel model;
  TrainingHistory history;
};

/// Rounds every parameter value to the nearest 32-bit float, as stored in checkpoints.
inline void round_to_f32(TextCnnModel& model) {
  for (auto* p : model.parameters())
    for (auto& v : p->value.values()) v = static_cast<double>(static_cast<float>(v));
}

inline ConfusionMatrix evaluate_confusion(const TextCnnModel& model, std::span<const EncodedDocument> docs) {
  ConfusionMatrix cm(model.class_labels);
  ForwardTrace tr;
  for (const auto& d : docs) cm.add(d.label, predict(model, d, tr).index);
  return cm;
}

using EpochCallback = std::function<void(std::size_t epoch, const EpochRecord&)>;

/// Mini-batch adadelta for config.epochs epochs. Each epoch shuffles the
/// training order, averages gradients over each batch (the final partial batch
/// included) and scores F1-micro on the validation set. Returns the parameters
/// of the best validation epoch (earliest on ties), rounded to 32-bit floats.
inline TrainResult train(TextCnnModel model, std::span<const EncodedDocument> train_set,
                         std::span<const EncodedDocument> val_set, const EpochCallback& on_epoch = {}) {
  const auto& cfg = model.config;
  if (train_set.empty() || val_set.empty()) throw EmptySplit("training and validation splits must be non-empty");
  for (auto split : {train_set, val_set})
    for (const auto& d : split)
      if (d.label >= cfg.num_classes)
        throw LabelOutOfRange("label " + std::to_string(d.label) + " >= num_classes " +
                              std::to_string(cfg.num_classes));

  TrainResult result{model, {}};
  Rng rng(Rng::derive(cfg.seed, 0x7472));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  ForwardTrace tr;
  auto params = model.parameters();
  double best_f1 = -1.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const auto& doc = train_set[order[b]];
        forward_trace(model, doc.indices, DropoutMode{true, &rng, nullptr}, tr);
        loss_sum += backward(model, doc.indices, doc.label, tr, scale);
      }
      for (auto* p : params) nn::adadelta_step(*p, cfg.adadelta_rho, cfg.adadelta_eps);
    }
    if (!model.all_finite()) throw NonFiniteValue("parameters diverged in epoch " + std::to_string(epoch + 1));

    const auto rep = f1_scores(evaluate_confusion(model, val_set));
    EpochRecord rec{loss_sum / static_cast<double>(order.size()), rep.f1_micro, rep.f1_macro};
    result.history.epochs.push_back(rec);
    if (rep.f1_micro > best_f1) {
      best_f1 = rep.f1_micro;
      result.history.best_epoch = static_cast<long>(epoch);
      result.model = model;
      round_to_f32(result.model);
    }
    if (on_epoch) on_epoch(epoch, rec);
  }
  for (auto* p : result.model.parameters()) {
    p->zero_grad();
    p->acc_grad_sq.fill(0.0);
    p->acc_delta_sq.fill(0.0);
  }
  return result;
}

}  // namespace hcnn
