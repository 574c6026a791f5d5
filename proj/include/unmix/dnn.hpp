// Joint two-output sigmoid network: forward pass, input gradient, RBM
// pretraining and least-squares fine-tuning.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace unmix {

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  return (1.0 + (-x).exp()).inverse();
}

struct DnnModel {
  std::vector<Eigen::MatrixXd> weights;  // W_k: n_k x n_{k-1}
  std::vector<Eigen::VectorXd> biases;   // b_k: n_k
  std::vector<Eigen::Index> layer_sizes; // n_0 .. n_K
  int context_frames = 1;                // L stacked spectral frames at the input

  Eigen::Index input_dim() const { return layer_sizes.front(); }
  size_t n_layers() const { return weights.size(); }

  void validate() const {
    const size_t K = weights.size();
    if (K < 2) throw std::invalid_argument("DnnModel: need at least 2 layers");
    if (biases.size() != K || layer_sizes.size() != K + 1)
      throw std::invalid_argument("DnnModel: inconsistent layer counts");
    if (layer_sizes.back() != 2)
      throw std::invalid_argument("DnnModel: output layer must have 2 units");
    if (context_frames < 1 || context_frames % 2 == 0)
      throw std::invalid_argument("DnnModel: context_frames must be odd");
    for (size_t k = 0; k < K; ++k) {
      if (weights[k].rows() != layer_sizes[k + 1] ||
          weights[k].cols() != layer_sizes[k] ||
          biases[k].size() != layer_sizes[k + 1])
        throw std::invalid_argument("DnnModel: layer " + std::to_string(k + 1) +
                                    " has inconsistent shape");
      if (!weights[k].allFinite() || !biases[k].allFinite())
        throw std::invalid_argument("DnnModel: non-finite parameter");
    }
  }

  /// All-zero parameters with the given layer sizes.
  static DnnModel zeros(const std::vector<Eigen::Index>& sizes, int context = 1) {
    DnnModel m;
    m.layer_sizes = sizes;
    m.context_frames = context;
    for (size_t k = 1; k < sizes.size(); ++k) {
      m.weights.push_back(Eigen::MatrixXd::Zero(sizes[k], sizes[k - 1]));
      m.biases.push_back(Eigen::VectorXd::Zero(sizes[k]));
    }
    return m;
  }
};

struct ForwardResult {
  Eigen::Vector2d f;
  std::vector<Eigen::VectorXd> activations;  // h_0 = x, ..., h_K = f
};

inline ForwardResult forward(const DnnModel& model,
                             const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.input_dim())
    throw std::invalid_argument("forward: input has " + std::to_string(x.size()) +
                                " entries, model expects " +
                                std::to_string(model.input_dim()));
  ForwardResult r;
  r.activations.reserve(model.n_layers() + 1);
  r.activations.emplace_back(x);
  for (size_t k = 0; k < model.n_layers(); ++k) {
    Eigen::VectorXd z = model.weights[k] * r.activations.back() + model.biases[k];
    r.activations.emplace_back(sigmoid(z.array()).matrix());
  }
  r.f = r.activations.back();
  return r;
}

/// Column-wise forward pass; returns 2 x N outputs.
inline Eigen::MatrixXd forward_batch(const DnnModel& model, const Eigen::MatrixXd& X) {
  if (X.rows() != model.input_dim())
    throw std::invalid_argument("forward_batch: input dimension mismatch");
  Eigen::MatrixXd h = X;
  for (size_t k = 0; k < model.n_layers(); ++k)
    h = sigmoid(((model.weights[k] * h).colwise() + model.biases[k]).array()).matrix();
  return h;
}

/// Row i is df_i/dx. Backpropagates q_K = f(1-f) through each layer,
/// multiplying by the sigmoid derivative of the activation entering the
/// weights at every hidden layer.
inline Eigen::Matrix<double, 2, Eigen::Dynamic> input_gradient(
    const DnnModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
    const std::vector<Eigen::VectorXd>& activations) {
  const size_t K = model.n_layers();
  if (activations.size() != K + 1 || x.size() != model.input_dim())
    throw std::invalid_argument("input_gradient: activations do not match model");
  for (size_t k = 0; k <= K; ++k)
    if (activations[k].size() != model.layer_sizes[k])
      throw std::invalid_argument("input_gradient: stale activations");

  const Eigen::VectorXd& f = activations[K];
  // Q holds q_{k,i}^T as rows, starting from diag(f(1-f)) W_K.
  Eigen::MatrixXd Q = (f.array() * (1.0 - f.array())).matrix().asDiagonal() *
                      model.weights[K - 1];
  for (size_t k = K - 1; k >= 1; --k) {
    const Eigen::ArrayXd h = activations[k].array();
    Q = (Q.array().rowwise() * (h * (1.0 - h)).transpose()).matrix() *
        model.weights[k - 1];
  }
  return Q;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  int rbm_epochs = 150;
  int bp_epochs = 500;
  int output_only_epochs = 5;
  double learning_rate = 0.05;
  double momentum = 0.9;
  Eigen::Index batch_size = 128;
  uint64_t seed = 1;

  void validate() const {
    if (rbm_epochs < 0 || bp_epochs < 0 || output_only_epochs < 0)
      throw std::invalid_argument("TrainConfig: epoch counts must be >= 0");
    if (output_only_epochs > bp_epochs)
      throw std::invalid_argument("TrainConfig: output_only_epochs > bp_epochs");
    if (!(learning_rate > 0.0) || batch_size <= 0)
      throw std::invalid_argument("TrainConfig: learning rate and batch size must be > 0");
    if (momentum < 0.0 || momentum >= 1.0)
      throw std::invalid_argument("TrainConfig: momentum must be in [0, 1)");
  }
};

namespace detail {

inline Eigen::MatrixXd uniform01(Eigen::Index rows, Eigen::Index cols,
                                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline std::vector<Eigen::Index> shuffled_indices(Eigen::Index n, std::mt19937_64& rng) {
  std::vector<Eigen::Index> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

inline Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& X,
                                      const std::vector<Eigen::Index>& idx,
                                      size_t begin, size_t end) {
  Eigen::MatrixXd out(X.rows(), Eigen::Index(end - begin));
  for (size_t j = begin; j < end; ++j) out.col(Eigen::Index(j - begin)) = X.col(idx[j]);
  return out;
}

}  // namespace detail

/// Bernoulli-Bernoulli RBM trained with one-step contrastive divergence.
struct Rbm {
  Eigen::MatrixXd weights;   // n_hidden x n_visible
  Eigen::VectorXd vis_bias;
  Eigen::VectorXd hid_bias;

  Rbm(Eigen::Index n_visible, Eigen::Index n_hidden, std::mt19937_64& rng)
      : weights(n_hidden, n_visible),
        vis_bias(Eigen::VectorXd::Zero(n_visible)),
        hid_bias(Eigen::VectorXd::Zero(n_hidden)) {
    std::normal_distribution<double> n01(0.0, 0.01);
    for (Eigen::Index i = 0; i < weights.size(); ++i) weights.data()[i] = n01(rng);
  }

  Eigen::MatrixXd hidden_probs(const Eigen::MatrixXd& V) const {
    return sigmoid(((weights * V).colwise() + hid_bias).array()).matrix();
  }
  Eigen::MatrixXd visible_probs(const Eigen::MatrixXd& H) const {
    return sigmoid(((weights.transpose() * H).colwise() + vis_bias).array()).matrix();
  }

  /// Mean squared mean-field reconstruction error per sample.
  double reconstruction_error(const Eigen::MatrixXd& V) const {
    return (visible_probs(hidden_probs(V)) - V).colwise().squaredNorm().mean();
  }

  /// One pass of CD-1 over `data` in shuffled minibatches.
  void train_epoch(const Eigen::MatrixXd& data, const TrainConfig& cfg,
                   std::mt19937_64& rng, Eigen::MatrixXd& vel_w,
                   Eigen::VectorXd& vel_v, Eigen::VectorXd& vel_h) {
    const auto idx = detail::shuffled_indices(data.cols(), rng);
    for (size_t b = 0; b < idx.size(); b += size_t(cfg.batch_size)) {
      const size_t e = std::min(idx.size(), b + size_t(cfg.batch_size));
      const Eigen::MatrixXd v0 = detail::gather_columns(data, idx, b, e);
      const double n = double(v0.cols());
      const Eigen::MatrixXd h0 = hidden_probs(v0);
      const Eigen::MatrixXd h_sample =
          (detail::uniform01(h0.rows(), h0.cols(), rng).array() < h0.array())
              .cast<double>()
              .matrix();
      const Eigen::MatrixXd v1 = visible_probs(h_sample);
      const Eigen::MatrixXd h1 = hidden_probs(v1);

      const Eigen::MatrixXd grad_w = (h0 * v0.transpose() - h1 * v1.transpose()) / n;
      const Eigen::VectorXd grad_v = (v0 - v1).rowwise().sum() / n;
      const Eigen::VectorXd grad_h = (h0 - h1).rowwise().sum() / n;
      vel_w = cfg.momentum * vel_w + cfg.learning_rate * grad_w;
      vel_v = cfg.momentum * vel_v + cfg.learning_rate * grad_v;
      vel_h = cfg.momentum * vel_h + cfg.learning_rate * grad_h;
      weights += vel_w;
      vis_bias += vel_v;
      hid_bias += vel_h;
    }
  }

  /// Trains for `epochs` passes; returns the reconstruction error on `data`
  /// after each epoch.
  std::vector<double> train(const Eigen::MatrixXd& data, int epochs,
                            const TrainConfig& cfg, std::mt19937_64& rng) {
    Eigen::MatrixXd vel_w = Eigen::MatrixXd::Zero(weights.rows(), weights.cols());
    Eigen::VectorXd vel_v = Eigen::VectorXd::Zero(vis_bias.size());
    Eigen::VectorXd vel_h = Eigen::VectorXd::Zero(hid_bias.size());
    std::vector<double> trace;
    trace.reserve(size_t(epochs));
    for (int ep = 0; ep < epochs; ++ep) {
      train_epoch(data, cfg, rng, vel_w, vel_v, vel_h);
      trace.push_back(reconstruction_error(data));
    }
    return trace;
  }
};

struct PretrainResult {
  DnnModel model;
  std::vector<std::vector<double>> reconstruction_traces;  // one per hidden layer
};

/// Greedy layerwise CD-1 for hidden layers 1..K-1; each RBM is trained on the
/// hidden probabilities of the one below. The output layer gets small
/// uniform weights.
inline PretrainResult pretrain_rbm_stack(const Eigen::MatrixXd& data,
                                         const std::vector<Eigen::Index>& layer_sizes,
                                         const TrainConfig& cfg, int context = 1) {
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("pretrain_rbm_stack: empty data");
  if (layer_sizes.size() < 3 || layer_sizes.back() != 2)
    throw std::invalid_argument("pretrain_rbm_stack: need [d, hidden..., 2]");
  if (layer_sizes.front() != data.rows())
    throw std::invalid_argument("pretrain_rbm_stack: data rows != input size");
  if (data.cols() < cfg.batch_size)
    throw std::invalid_argument("pretrain_rbm_stack: fewer samples than batch_size");

  std::mt19937_64 rng(cfg.seed);
  PretrainResult out;
  out.model = DnnModel::zeros(layer_sizes, context);
  Eigen::MatrixXd layer_input = data.cwiseMax(0.0).cwiseMin(1.0);
  const size_t K = layer_sizes.size() - 1;
  for (size_t k = 0; k + 1 < K; ++k) {
    Rbm rbm(layer_sizes[k], layer_sizes[k + 1], rng);
    out.reconstruction_traces.push_back(rbm.train(layer_input, cfg.rbm_epochs, cfg, rng));
    out.model.weights[k] = rbm.weights;
    out.model.biases[k] = rbm.hid_bias;
    layer_input = rbm.hidden_probs(layer_input);
  }
  std::uniform_real_distribution<double> small(-0.01, 0.01);
  for (Eigen::Index i = 0; i < out.model.weights[K - 1].size(); ++i)
    out.model.weights[K - 1].data()[i] = small(rng);
  for (Eigen::Index i = 0; i < out.model.biases[K - 1].size(); ++i)
    out.model.biases[K - 1](i) = small(rng);
  return out;
}

struct ParamGradient {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

/// sum_n ||f(x_n) - t_n||^2
inline double least_squares_loss(const DnnModel& model, const Eigen::MatrixXd& X,
                                 const Eigen::MatrixXd& labels) {
  return (forward_batch(model, X) - labels).squaredNorm();
}

/// Gradient of least_squares_loss with respect to every weight and bias.
/// Returns the loss as well.
inline double loss_gradient(const DnnModel& model, const Eigen::MatrixXd& X,
                            const Eigen::MatrixXd& labels, ParamGradient& grad) {
  const size_t K = model.n_layers();
  std::vector<Eigen::MatrixXd> H;
  H.reserve(K + 1);
  H.push_back(X);
  for (size_t k = 0; k < K; ++k)
    H.push_back(sigmoid(((model.weights[k] * H.back()).colwise() + model.biases[k])
                            .array())
                    .matrix());

  const Eigen::MatrixXd err = H[K] - labels;
  Eigen::MatrixXd delta = (2.0 * err.array() * H[K].array() * (1.0 - H[K].array())).matrix();
  grad.weights.resize(K);
  grad.biases.resize(K);
  for (size_t k = K; k-- > 0;) {
    grad.weights[k] = delta * H[k].transpose();
    grad.biases[k] = delta.rowwise().sum();
    if (k > 0)
      delta = ((model.weights[k].transpose() * delta).array() * H[k].array() *
               (1.0 - H[k].array()))
                  .matrix();
  }
  return err.squaredNorm();
}

struct SupervisedResult {
  DnnModel model;
  std::vector<double> loss_trace;  // mean per-sample loss of each epoch
};

/// Minibatch gradient descent with momentum on the least-squares loss. The
/// first `output_only_epochs` epochs only move the output layer.
inline SupervisedResult train_supervised(DnnModel init, const Eigen::MatrixXd& X,
                                         const Eigen::MatrixXd& labels,
                                         const TrainConfig& cfg) {
  cfg.validate();
  init.validate();
  if (X.rows() != init.input_dim() || labels.rows() != 2 || labels.cols() != X.cols())
    throw std::invalid_argument("train_supervised: data/label shape mismatch");
  if (X.cols() == 0) throw std::invalid_argument("train_supervised: no samples");
  for (Eigen::Index n = 0; n < labels.cols(); ++n) {
    const double a = labels(0, n), b = labels(1, n);
    if (!((a == 1.0 && b == 0.0) || (a == 0.0 && b == 1.0)))
      throw std::invalid_argument("train_supervised: label column " + std::to_string(n) +
                                  " is not (1,0) or (0,1)");
  }

  SupervisedResult out{std::move(init), {}};
  DnnModel& m = out.model;
  const size_t K = m.n_layers();
  std::vector<Eigen::MatrixXd> vel_w;
  std::vector<Eigen::VectorXd> vel_b;
  for (size_t k = 0; k < K; ++k) {
    vel_w.push_back(Eigen::MatrixXd::Zero(m.weights[k].rows(), m.weights[k].cols()));
    vel_b.push_back(Eigen::VectorXd::Zero(m.biases[k].size()));
  }

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  ParamGradient grad;
  out.loss_trace.reserve(size_t(cfg.bp_epochs));
  for (int ep = 0; ep < cfg.bp_epochs; ++ep) {
    const size_t first_layer = ep < cfg.output_only_epochs ? K - 1 : 0;
    const auto idx = detail::shuffled_indices(X.cols(), rng);
    double epoch_loss = 0.0;
    for (size_t b = 0; b < idx.size(); b += size_t(cfg.batch_size)) {
      const size_t e = std::min(idx.size(), b + size_t(cfg.batch_size));
      const Eigen::MatrixXd xb = detail::gather_columns(X, idx, b, e);
      const Eigen::MatrixXd tb = detail::gather_columns(labels, idx, b, e);
      epoch_loss += loss_gradient(m, xb, tb, grad);
      const double step = cfg.learning_rate / double(e - b);
      for (size_t k = first_layer; k < K; ++k) {
        vel_w[k] = cfg.momentum * vel_w[k] - step * grad.weights[k];
        vel_b[k] = cfg.momentum * vel_b[k] - step * grad.biases[k];
        m.weights[k] += vel_w[k];
        m.biases[k] += vel_b[k];
      }
    }
    out.loss_trace.push_back(epoch_loss / double(X.cols()));
  }
  return out;
}

/// Fraction of columns whose larger output matches the label.
inline double classification_accuracy(const DnnModel& model, const Eigen::MatrixXd& X,
                                      const Eigen::MatrixXd& labels) {
  const Eigen::MatrixXd f = forward_batch(model, X);
  Eigen::Index hits = 0;
  for (Eigen::Index n = 0; n < X.cols(); ++n)
    hits += (f(0, n) > f(1, n)) == (labels(0, n) > labels(1, n));
  return X.cols() ? double(hits) / double(X.cols()) : 0.0;
}

}  // namespace unmix
