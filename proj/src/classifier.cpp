// classifier.cpp

// Copyright 2026 The PCED Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "pced/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pced/binary_io.hpp"
#include "pced/random.hpp"

namespace pced::nn {

namespace {

constexpr double kLogPowerEps = 1e-6;

double elu(double z) { return z > 0.0 ? z : std::expm1(z); }
double elu_grad(double z) { return z > 0.0 ? 1.0 : std::exp(z); }

/// Cross-entropy of one logit row; writes softmax - onehot into `dlogits`
/// scaled by `weight` when dlogits is non-empty.
double softmax_xent(std::span<const double> logits, int label,
                    std::span<double> dlogits, double weight) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  const double lse = m + std::log(z);
  if (!dlogits.empty()) {
    for (std::size_t c = 0; c < logits.size(); ++c) {
      const double p = std::exp(logits[c] - lse);
      dlogits[c] = weight * (p - (static_cast<int>(c) == label ? 1.0 : 0.0));
    }
  }
  return lse - logits[static_cast<std::size_t>(label)];
}

struct SlotIndex {
  std::vector<std::size_t> dense;  // mlp: weights, bias pairs
  std::size_t temporal = 0, spatial = 0, spatial_bias = 0;
  std::size_t head = 0, head_bias = 0, aux = 0, aux_bias = 0;
};

std::size_t find_slot(const std::vector<LayerSlot>& layout, const std::string& name) {
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].name == name) return i;
  }
  throw ShapeError("no parameter block named '" + name + "'");
}

// Scratch buffers for one sample's forward/backward pass.
struct Workspace {
  std::vector<double> x;
  std::vector<std::vector<double>> pre, act;  // mlp
  std::vector<double> z, s, power, feat;      // shallow conv
  std::vector<double> logits, aux_logits, dlogits, daux;
  std::vector<double> dfeat, ds, dz;
  std::vector<std::vector<double>> dact;
};

class Net {
 public:
  Net(const ModelConfig& cfg, const std::vector<LayerSlot>& layout)
      : cfg_(cfg), layout_(layout) {
    if (cfg.architecture == Architecture::kMlp) {
      for (std::size_t l = 0; l < cfg.hidden.size(); ++l) {
        idx_.dense.push_back(find_slot(layout, "dense" + std::to_string(l)));
        idx_.dense.push_back(find_slot(layout, "dense" + std::to_string(l) + "_bias"));
      }
    } else {
      idx_.temporal = find_slot(layout, "temporal");
      idx_.spatial = find_slot(layout, "spatial");
      idx_.spatial_bias = find_slot(layout, "spatial_bias");
    }
    idx_.head = find_slot(layout, "head");
    idx_.head_bias = find_slot(layout, "head_bias");
    if (cfg.aux_subject_classes > 0) {
      idx_.aux = find_slot(layout, "aux");
      idx_.aux_bias = find_slot(layout, "aux_bias");
    }
  }

  /// Fills ws.feat, ws.logits and (when enabled) ws.aux_logits.
  void forward(const double* p, const Trial& trial, Workspace& ws) const {
    const auto src = trial.values();
    ws.x.assign(src.begin(), src.end());
    if (cfg_.architecture == Architecture::kMlp) {
      forward_mlp(p, ws);
    } else {
      forward_conv(p, ws);
    }
    dense(p, idx_.head, idx_.head_bias, ws.feat, ws.logits);
    if (cfg_.aux_subject_classes > 0) {
      dense(p, idx_.aux, idx_.aux_bias, ws.feat, ws.aux_logits);
    }
  }

  /// Backpropagates ws.dlogits (and ws.daux when enabled) into grad.
  void backward(const double* p, double* grad, Workspace& ws, bool with_aux) const {
    ws.dfeat.assign(ws.feat.size(), 0.0);
    dense_backward(p, grad, idx_.head, idx_.head_bias, ws.feat, ws.dlogits, ws.dfeat);
    if (with_aux) {
      dense_backward(p, grad, idx_.aux, idx_.aux_bias, ws.feat, ws.daux, ws.dfeat);
    }
    if (cfg_.architecture == Architecture::kMlp) {
      backward_mlp(p, grad, ws);
    } else {
      backward_conv(p, grad, ws);
    }
  }

 private:
  const LayerSlot& slot(std::size_t i) const { return layout_[i]; }

  void dense(const double* p, std::size_t w_slot, std::size_t b_slot,
             const std::vector<double>& in, std::vector<double>& out) const {
    const LayerSlot& w = slot(w_slot);
    const double* wp = p + w.offset;
    const double* bp = p + slot(b_slot).offset;
    out.resize(w.rows);
    for (std::size_t r = 0; r < w.rows; ++r) {
      const double* wr = wp + r * w.cols;
      double acc = bp[r];
      for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * in[c];
      out[r] = acc;
    }
  }

  void dense_backward(const double* p, double* grad, std::size_t w_slot,
                      std::size_t b_slot, const std::vector<double>& in,
                      const std::vector<double>& dout, std::vector<double>& din) const {
    const LayerSlot& w = slot(w_slot);
    const double* wp = p + w.offset;
    double* gw = grad + w.offset;
    double* gb = grad + slot(b_slot).offset;
    for (std::size_t r = 0; r < w.rows; ++r) {
      const double d = dout[r];
      if (d == 0.0) continue;
      gb[r] += d;
      const double* wr = wp + r * w.cols;
      double* gr = gw + r * w.cols;
      for (std::size_t c = 0; c < w.cols; ++c) {
        gr[c] += d * in[c];
        din[c] += d * wr[c];
      }
    }
  }

  void forward_mlp(const double* p, Workspace& ws) const {
    const std::size_t n_layers = cfg_.hidden.size();
    ws.pre.resize(n_layers);
    ws.act.resize(n_layers);
    const std::vector<double>* in = &ws.x;
    for (std::size_t l = 0; l < n_layers; ++l) {
      dense(p, idx_.dense[2 * l], idx_.dense[2 * l + 1], *in, ws.pre[l]);
      ws.act[l].resize(ws.pre[l].size());
      for (std::size_t i = 0; i < ws.pre[l].size(); ++i) ws.act[l][i] = elu(ws.pre[l][i]);
      in = &ws.act[l];
    }
    ws.feat = *in;
  }

  void backward_mlp(const double* p, double* grad, Workspace& ws) const {
    const std::size_t n_layers = cfg_.hidden.size();
    ws.dact.resize(n_layers + 1);
    std::vector<double> dcur = ws.dfeat;
    for (std::size_t l = n_layers; l-- > 0;) {
      for (std::size_t i = 0; i < dcur.size(); ++i) dcur[i] *= elu_grad(ws.pre[l][i]);
      const std::vector<double>& in = l == 0 ? ws.x : ws.act[l - 1];
      std::vector<double>& din = ws.dact[l];
      din.assign(in.size(), 0.0);
      dense_backward(p, grad, idx_.dense[2 * l], idx_.dense[2 * l + 1], in, dcur, din);
      dcur.swap(din);
    }
  }

  void forward_conv(const double* p, Workspace& ws) const {
    const auto C = static_cast<std::size_t>(cfg_.n_channels);
    const auto T = static_cast<std::size_t>(cfg_.n_timepoints);
    const auto K = static_cast<std::size_t>(cfg_.kernel_length);
    const auto F = static_cast<std::size_t>(cfg_.n_filters);
    const auto G = static_cast<std::size_t>(cfg_.n_spatial);
    const std::size_t Tp = T - K + 1;
    const double* wt = p + slot(idx_.temporal).offset;
    const double* wsp = p + slot(idx_.spatial).offset;
    const double* bs = p + slot(idx_.spatial_bias).offset;

    ws.z.assign(F * C * Tp, 0.0);
    for (std::size_t f = 0; f < F; ++f) {
      const double* kern = wt + f * K;
      for (std::size_t c = 0; c < C; ++c) {
        double* zr = ws.z.data() + (f * C + c) * Tp;
        const double* xr = ws.x.data() + c * T;
        for (std::size_t k = 0; k < K; ++k) {
          const double w = kern[k];
          const double* xs = xr + k;
          for (std::size_t t = 0; t < Tp; ++t) zr[t] += w * xs[t];
        }
      }
    }
    const std::size_t FC = F * C;
    ws.s.assign(G * Tp, 0.0);
    ws.power.resize(G);
    ws.feat.resize(G);
    for (std::size_t g = 0; g < G; ++g) {
      double* sr = ws.s.data() + g * Tp;
      std::fill(sr, sr + Tp, bs[g]);
      const double* wg = wsp + g * FC;
      for (std::size_t j = 0; j < FC; ++j) {
        const double w = wg[j];
        const double* zr = ws.z.data() + j * Tp;
        for (std::size_t t = 0; t < Tp; ++t) sr[t] += w * zr[t];
      }
      double acc = 0.0;
      for (std::size_t t = 0; t < Tp; ++t) acc += sr[t] * sr[t];
      ws.power[g] = acc / static_cast<double>(Tp);
      ws.feat[g] = std::log(ws.power[g] + kLogPowerEps);
    }
  }

  void backward_conv(const double* p, double* grad, Workspace& ws) const {
    const auto C = static_cast<std::size_t>(cfg_.n_channels);
    const auto T = static_cast<std::size_t>(cfg_.n_timepoints);
    const auto K = static_cast<std::size_t>(cfg_.kernel_length);
    const auto F = static_cast<std::size_t>(cfg_.n_filters);
    const auto G = static_cast<std::size_t>(cfg_.n_spatial);
    const std::size_t Tp = T - K + 1;
    const std::size_t FC = F * C;
    const double* wsp = p + slot(idx_.spatial).offset;
    double* g_wt = grad + slot(idx_.temporal).offset;
    double* g_ws = grad + slot(idx_.spatial).offset;
    double* g_bs = grad + slot(idx_.spatial_bias).offset;

    ws.ds.assign(G * Tp, 0.0);
    for (std::size_t g = 0; g < G; ++g) {
      const double dpow = ws.dfeat[g] / (ws.power[g] + kLogPowerEps);
      const double scale = 2.0 * dpow / static_cast<double>(Tp);
      const double* sr = ws.s.data() + g * Tp;
      double* dr = ws.ds.data() + g * Tp;
      double bias_acc = 0.0;
      for (std::size_t t = 0; t < Tp; ++t) {
        dr[t] = scale * sr[t];
        bias_acc += dr[t];
      }
      g_bs[g] += bias_acc;
    }
    ws.dz.assign(FC * Tp, 0.0);
    for (std::size_t g = 0; g < G; ++g) {
      const double* dr = ws.ds.data() + g * Tp;
      const double* wg = wsp + g * FC;
      double* gg = g_ws + g * FC;
      for (std::size_t j = 0; j < FC; ++j) {
        const double* zr = ws.z.data() + j * Tp;
        double* dzr = ws.dz.data() + j * Tp;
        const double w = wg[j];
        double acc = 0.0;
        for (std::size_t t = 0; t < Tp; ++t) {
          acc += dr[t] * zr[t];
          dzr[t] += w * dr[t];
        }
        gg[j] += acc;
      }
    }
    for (std::size_t f = 0; f < F; ++f) {
      double* gk = g_wt + f * K;
      for (std::size_t c = 0; c < C; ++c) {
        const double* dzr = ws.dz.data() + (f * C + c) * Tp;
        const double* xr = ws.x.data() + c * T;
        for (std::size_t k = 0; k < K; ++k) {
          const double* xs = xr + k;
          double acc = 0.0;
          for (std::size_t t = 0; t < Tp; ++t) acc += dzr[t] * xs[t];
          gk[k] += acc;
        }
      }
    }
  }

  const ModelConfig& cfg_;
  const std::vector<LayerSlot>& layout_;
  SlotIndex idx_;
};

std::vector<LayerSlot> make_layout(const ModelConfig& cfg, std::size_t* total) {
  std::vector<LayerSlot> layout;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
    layout.push_back(LayerSlot{std::move(name), offset, rows, cols});
    offset += rows * cols;
  };
  std::size_t features = 0;
  if (cfg.architecture == Architecture::kMlp) {
    std::size_t in = static_cast<std::size_t>(cfg.n_channels) *
                     static_cast<std::size_t>(cfg.n_timepoints);
    for (std::size_t l = 0; l < cfg.hidden.size(); ++l) {
      const auto out = static_cast<std::size_t>(cfg.hidden[l]);
      add("dense" + std::to_string(l), out, in);
      add("dense" + std::to_string(l) + "_bias", out, 1);
      in = out;
    }
    features = in;
  } else {
    const auto F = static_cast<std::size_t>(cfg.n_filters);
    const auto G = static_cast<std::size_t>(cfg.n_spatial);
    add("temporal", F, static_cast<std::size_t>(cfg.kernel_length));
    add("spatial", G, F * static_cast<std::size_t>(cfg.n_channels));
    add("spatial_bias", G, 1);
    features = G;
  }
  add("head", static_cast<std::size_t>(cfg.n_classes), features);
  add("head_bias", static_cast<std::size_t>(cfg.n_classes), 1);
  if (cfg.aux_subject_classes > 0) {
    add("aux", static_cast<std::size_t>(cfg.aux_subject_classes), features);
    add("aux_bias", static_cast<std::size_t>(cfg.aux_subject_classes), 1);
  }
  *total = offset;
  return layout;
}

}  // namespace

std::string to_string(Architecture a) {
  return a == Architecture::kMlp ? "mlp" : "shallow_conv";
}

Architecture architecture_from_string(const std::string& name) {
  if (name == "mlp") return Architecture::kMlp;
  if (name == "shallow_conv") return Architecture::kShallowConv;
  throw ConfigError("unknown architecture '" + name + "'");
}

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("model config: " + msg);
  };
  need(n_channels >= 1, "n_channels must be >= 1");
  need(n_timepoints >= 1, "n_timepoints must be >= 1");
  need(n_classes >= 2, "n_classes must be >= 2");
  need(aux_subject_classes >= 0, "aux_subject_classes must be >= 0");
  need(aux_weight >= 0.0, "aux_weight must be >= 0");
  if (architecture == Architecture::kMlp) {
    for (int h : hidden) need(h >= 1, "hidden sizes must be >= 1");
  } else {
    need(kernel_length >= 1, "kernel_length must be >= 1");
    need(kernel_length <= n_timepoints, "kernel_length must not exceed n_timepoints");
    need(n_filters >= 1, "n_filters must be >= 1");
    need(n_spatial >= 1, "n_spatial must be >= 1");
  }
}

std::span<double> Params::slot(const std::string& name) {
  const LayerSlot& s = layout[find_slot(layout, name)];
  return {values.data() + s.offset, s.size()};
}

std::span<const double> Params::slot(const std::string& name) const {
  const LayerSlot& s = layout[find_slot(layout, name)];
  return {values.data() + s.offset, s.size()};
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  layout_ = make_layout(config_, &n_params_);
}

Params Model::init() const {
  Params params;
  params.layout = layout_;
  params.values.assign(n_params_, 0.0);
  Rng rng(derive_seed(config_.seed, "init"));
  for (const LayerSlot& s : layout_) {
    if (s.cols == 1 && s.name.ends_with("_bias")) continue;
    const double limit = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (std::size_t i = 0; i < s.size(); ++i) params.values[s.offset + i] = u(rng);
  }
  return params;
}

void Model::check_params(const Params& params) const {
  if (params.layout != layout_ || params.values.size() != n_params_) {
    throw ShapeError("parameter layout does not match the model");
  }
}

void Model::check_trial(const Trial& trial) const {
  if (trial.rows() != static_cast<std::size_t>(config_.n_channels) ||
      trial.cols() != static_cast<std::size_t>(config_.n_timepoints)) {
    throw ShapeError("trial is " + std::to_string(trial.rows()) + "x" +
                     std::to_string(trial.cols()) + ", model expects " +
                     std::to_string(config_.n_channels) + "x" +
                     std::to_string(config_.n_timepoints));
  }
}

Matrix Model::forward(const Params& params, std::span<const Trial> batch) const {
  check_params(params);
  const Net net(config_, layout_);
  Workspace ws;
  Matrix logits(batch.size(), static_cast<std::size_t>(config_.n_classes));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    check_trial(batch[i]);
    net.forward(params.values.data(), batch[i], ws);
    std::copy(ws.logits.begin(), ws.logits.end(), logits.row(i).begin());
  }
  return logits;
}

double Model::accumulate(const Params& params,
                         std::span<const LabeledTrial* const> batch,
                         std::span<double> grad, double weight,
                         bool include_aux) const {
  check_params(params);
  const bool aux = include_aux && config_.aux_subject_classes > 0;
  const Net net(config_, layout_);
  Workspace ws;
  ws.dlogits.resize(static_cast<std::size_t>(config_.n_classes));
  ws.daux.resize(static_cast<std::size_t>(std::max(config_.aux_subject_classes, 0)));
  const bool want_grad = !grad.empty();
  double total = 0.0;
  for (const LabeledTrial* sample : batch) {
    check_trial(sample->trial);
    if (sample->class_label < 0 || sample->class_label >= config_.n_classes) {
      throw RangeError("label " + std::to_string(sample->class_label) +
                       " outside [0, " + std::to_string(config_.n_classes) + ")");
    }
    net.forward(params.values.data(), sample->trial, ws);
    std::span<double> dl = want_grad ? std::span<double>(ws.dlogits) : std::span<double>{};
    total += softmax_xent(ws.logits, sample->class_label, dl, weight);
    if (aux) {
      if (sample->subject_id < 0 || sample->subject_id >= config_.aux_subject_classes) {
        throw RangeError("subject id " + std::to_string(sample->subject_id) +
                         " outside the auxiliary head's range");
      }
      std::span<double> da = want_grad ? std::span<double>(ws.daux) : std::span<double>{};
      total += config_.aux_weight *
               softmax_xent(ws.aux_logits, sample->subject_id, da,
                            weight * config_.aux_weight);
    }
    if (want_grad) net.backward(params.values.data(), grad.data(), ws, aux);
  }
  return total;
}

double Model::loss(const Params& params, std::span<const LabeledTrial> batch) const {
  if (batch.empty()) throw EmptyInputError("loss: empty batch");
  std::vector<const LabeledTrial*> ptrs;
  for (const LabeledTrial& s : batch) ptrs.push_back(&s);
  return accumulate(params, ptrs, {}, 0.0) / static_cast<double>(batch.size());
}

std::vector<double> Model::gradient(const Params& params,
                                    std::span<const LabeledTrial> batch) const {
  if (batch.empty()) throw EmptyInputError("gradient: empty batch");
  std::vector<const LabeledTrial*> ptrs;
  for (const LabeledTrial& s : batch) ptrs.push_back(&s);
  std::vector<double> grad(n_params_, 0.0);
  accumulate(params, ptrs, grad, 1.0 / static_cast<double>(batch.size()));
  return grad;
}

std::vector<double> Model::sample_class_gradient(const Params& params,
                                                 const LabeledTrial& sample) const {
  std::vector<double> grad(n_params_, 0.0);
  const LabeledTrial* ptr = &sample;
  accumulate(params, std::span(&ptr, 1), grad, 1.0, /*include_aux=*/false);
  return grad;
}

std::vector<int> Model::predict(const Params& params,
                                std::span<const LabeledTrial> set) const {
  check_params(params);
  const Net net(config_, layout_);
  Workspace ws;
  std::vector<int> out;
  out.reserve(set.size());
  for (const LabeledTrial& s : set) {
    check_trial(s.trial);
    net.forward(params.values.data(), s.trial, ws);
    out.push_back(argmax(ws.logits));
  }
  return out;
}

double cross_entropy(const Matrix& logits, std::span<const int> labels) {
  if (logits.rows() != labels.size()) {
    throw ShapeError("cross_entropy: " + std::to_string(logits.rows()) +
                     " logit rows for " + std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw EmptyInputError("cross_entropy: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= logits.cols()) {
      throw RangeError("cross_entropy: label " + std::to_string(labels[i]) +
                       " out of range");
    }
    total += softmax_xent(logits.row(i), labels[i], {}, 0.0);
  }
  return total / static_cast<double>(labels.size());
}

int argmax(std::span<const double> row) {
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

void TrainConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("train config: " + msg);
  };
  need(learning_rate > 0.0, "learning_rate must be positive");
  need(max_epochs >= 1, "max_epochs must be >= 1");
  need(batch_size >= 1, "batch_size must be >= 1");
  need(patience >= 0, "patience must be >= 0");
}

TrainResult train(const Model& model, Params init,
                  std::span<const LabeledTrial> train_set,
                  std::span<const LabeledTrial> val_set, const TrainConfig& cfg,
                  const PenaltyHook& penalty) {
  cfg.validate();
  if (train_set.empty()) throw EmptyInputError("train: empty training set");
  if (val_set.empty()) throw EmptyInputError("train: empty validation set");

  Params params = std::move(init);
  const std::size_t n = params.values.size();
  std::vector<double> m(n, 0.0), v(n, 0.0), grad(n);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const LabeledTrial*> batch;
  Rng rng(cfg.shuffle_seed);

  TrainResult best{params, {}};
  double best_acc = -1.0;
  int since_best = 0;
  long step = 0;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&train_set[order[i]]);
      const double count = static_cast<double>(batch.size());
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = model.accumulate(params, batch, grad, 1.0 / count) / count;
      if (penalty) batch_loss += penalty(params.values, grad);
      if (!std::isfinite(batch_loss)) {
        throw NumericalError("training diverged: non-finite loss at epoch " +
                             std::to_string(epoch + 1));
      }
      epoch_loss += batch_loss * count;

      ++step;
      if (cfg.optimizer == Optimizer::kAdam) {
        const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < n; ++i) {
          m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * grad[i];
          v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
          params.values[i] -= cfg.learning_rate * (m[i] / c1) /
                              (std::sqrt(v[i] / c2) + cfg.adam_epsilon);
        }
      } else {
        for (std::size_t i = 0; i < n; ++i) params.values[i] -= cfg.learning_rate * grad[i];
      }
    }
    const double val_acc = evaluate(model, params, val_set);
    best.history.train_loss.push_back(epoch_loss / static_cast<double>(train_set.size()));
    best.history.val_accuracy.push_back(val_acc);
    if (val_acc > best_acc) {
      best_acc = val_acc;
      best.params = params;
      best.history.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= cfg.patience) break;
  }
  return best;
}

double evaluate(const Model& model, const Params& params,
                std::span<const LabeledTrial> set) {
  if (set.empty()) throw EmptyInputError("evaluate: empty set");
  const std::vector<int> pred = model.predict(params, set);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (pred[i] == set[i].class_label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

std::vector<std::uint8_t> encode_params(const Params& params) {
  binary::Writer out;
  out.bytes("PCEP");
  out.u16(1);
  out.u32(static_cast<std::uint32_t>(params.layout.size()));
  for (const LayerSlot& s : params.layout) {
    out.u16(static_cast<std::uint16_t>(s.name.size()));
    out.bytes(s.name);
    out.u64(s.offset);
    out.u32(static_cast<std::uint32_t>(s.rows));
    out.u32(static_cast<std::uint32_t>(s.cols));
  }
  out.u64(params.values.size());
  for (double v : params.values) out.f64(v);
  return out.release();
}

Params decode_params(std::span<const std::uint8_t> bytes) {
  binary::Reader in(bytes);
  in.expect_magic("PCEP");
  const std::uint64_t at = in.offset();
  if (in.u16() != 1) throw FormatError("unsupported parameter blob version", at);
  Params params;
  const std::uint32_t n_slots = in.u32();
  std::size_t expected_offset = 0;
  for (std::uint32_t i = 0; i < n_slots; ++i) {
    const std::uint64_t slot_at = in.offset();
    LayerSlot s;
    s.name = in.string(in.u16());
    s.offset = in.u64();
    s.rows = in.u32();
    s.cols = in.u32();
    if (s.offset != expected_offset) {
      throw FormatError("parameter blocks do not partition the vector", slot_at);
    }
    expected_offset += s.size();
    params.layout.push_back(std::move(s));
  }
  const std::uint64_t count_at = in.offset();
  const std::uint64_t count = in.u64();
  if (count != expected_offset) {
    throw FormatError("parameter count disagrees with layout", count_at);
  }
  if (in.remaining() / 8 < count) throw FormatError("truncated parameter blob", in.offset());
  params.values.resize(count);
  for (double& v : params.values) {
    v = in.f64();
    if (!std::isfinite(v)) throw FormatError("non-finite parameter", in.offset() - 8);
  }
  in.expect_end();
  return params;
}

}  // namespace pced::nn
