// Training and separation stages.
//
// Training: magnitude spectrograms -> one IS-NMF dictionary per source, and a
// joint two-output DNN on l2-normalized frames labelled (1,0) / (0,1).
//
// Separation: mixture STFT -> supervised NMF gains -> soft-mask initial
// estimates -> per-frame energy minimization -> Wiener masks on the
// unnormalized mixture magnitude -> resynthesis with the mixture phase.

#pragma once

#include "unmix/dnn.hpp"
#include "unmix/energy.hpp"
#include "unmix/nmf.hpp"
#include "unmix/signal.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace unmix {

struct NmfConfig {
  Eigen::Index rank = 128;
  int train_iters = 200;
  int decompose_iters = 100;

  void validate() const {
    if (rank <= 0) throw std::invalid_argument("nmf.rank must be > 0");
    if (train_iters < 0 || decompose_iters < 0)
      throw std::invalid_argument("nmf iteration counts must be >= 0");
  }
};

inline std::vector<Eigen::Index> default_hidden_layers(int context_frames) {
  if (context_frames > 1) return {100, 50, 500};
  return {100, 50, 200};
}

struct DnnConfig {
  std::vector<Eigen::Index> hidden;  // empty: default for the context size
  int context_frames = 1;
  TrainConfig train;

  std::vector<Eigen::Index> hidden_layers() const {
    return hidden.empty() ? default_hidden_layers(context_frames) : hidden;
  }

  void validate() const {
    if (context_frames < 1 || context_frames % 2 == 0)
      throw std::invalid_argument("dnn.context_frames must be odd and >= 1");
    for (auto h : hidden)
      if (h <= 0) throw std::invalid_argument("dnn.hidden sizes must be > 0");
    if (hidden_layers().empty())
      throw std::invalid_argument("dnn.hidden needs at least one layer");
    train.validate();
  }
};

struct EnergyConfig {
  double lambda = 5.0;
  double beta = 3.0;
  SolverConfig solver;

  void validate() const {
    if (!(lambda >= 0.0) || !(beta >= 0.0))
      throw std::invalid_argument("energy.lambda and energy.beta must be >= 0");
    if (solver.max_iter < 0 || solver.history <= 0 || !(solver.grad_tol > 0.0))
      throw std::invalid_argument("invalid solver settings");
  }
};

struct PipelineConfig {
  StftConfig stft;
  NmfConfig nmf;
  DnnConfig dnn;
  EnergyConfig energy;
  uint64_t seed = 1;
  int threads = 1;
  bool nmf_only = false;

  void validate() const {
    stft.validate();
    nmf.validate();
    dnn.validate();
    energy.validate();
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  }

  // Per-stage seeds derived from the run seed.
  uint64_t nmf_seed(int source) const { return seed * 1000003ULL + uint64_t(source); }
  uint64_t dnn_seed() const { return seed * 1000003ULL + 17; }
  uint64_t decompose_seed() const { return seed * 1000003ULL + 29; }
};

// ---------------------------------------------------------------------------
// Training stage

/// Magnitude spectrograms of several signals, concatenated along time.
inline Eigen::MatrixXd training_magnitudes(const std::vector<std::vector<double>>& signals,
                                           const StftConfig& cfg) {
  if (signals.empty()) throw std::invalid_argument("no training audio");
  std::vector<Eigen::MatrixXd> mags;
  Eigen::Index cols = 0;
  for (const auto& s : signals) {
    if (s.empty()) throw std::invalid_argument("empty training signal");
    mags.push_back(stft(s, cfg).mag);
    cols += mags.back().cols();
  }
  Eigen::MatrixXd out(cfg.n_bins, cols);
  Eigen::Index c = 0;
  for (const auto& m : mags) {
    out.middleCols(c, m.cols()) = m;
    c += m.cols();
  }
  return out;
}

inline NmfModel train_source_dictionary(const Eigen::MatrixXd& mag, int source_id,
                                        const PipelineConfig& cfg) {
  cfg.nmf.validate();
  return train_dictionary(mag, cfg.nmf.rank, cfg.nmf.train_iters, cfg.nmf_seed(source_id),
                          source_id);
}

struct LabeledFrames {
  Eigen::MatrixXd inputs;  // L*n_bins x N
  Eigen::MatrixXd labels;  // 2 x N
};

/// Stacked, per-sub-frame normalized inputs; frames whose center column is
/// silent are dropped.
inline Eigen::MatrixXd frame_inputs(const Eigen::MatrixXd& mag, int context) {
  const Eigen::MatrixXd stacked = stack_frames(mag, context);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index t = 0; t < mag.cols(); ++t)
    if (mag.col(t).squaredNorm() > 0.0) keep.push_back(t);
  Eigen::MatrixXd out(stacked.rows(), Eigen::Index(keep.size()));
  for (size_t j = 0; j < keep.size(); ++j)
    out.col(Eigen::Index(j)) = normalize_stacked(stacked.col(keep[j]), context);
  return out;
}

inline LabeledFrames labeled_frames(const Eigen::MatrixXd& mag1, const Eigen::MatrixXd& mag2,
                                    int context) {
  const Eigen::MatrixXd a = frame_inputs(mag1, context);
  const Eigen::MatrixXd b = frame_inputs(mag2, context);
  LabeledFrames out;
  out.inputs.resize(a.rows(), a.cols() + b.cols());
  out.inputs << a, b;
  out.labels = Eigen::MatrixXd::Zero(2, a.cols() + b.cols());
  out.labels.row(0).head(a.cols()).setOnes();
  out.labels.row(1).tail(b.cols()).setOnes();
  return out;
}

struct DnnTraining {
  DnnModel model;
  std::vector<std::vector<double>> rbm_traces;
  std::vector<double> loss_trace;
};

inline DnnTraining train_joint_dnn(const Eigen::MatrixXd& mag1, const Eigen::MatrixXd& mag2,
                                   const PipelineConfig& cfg) {
  cfg.dnn.validate();
  const int L = cfg.dnn.context_frames;
  const LabeledFrames data = labeled_frames(mag1, mag2, L);
  if (data.inputs.cols() == 0) throw std::invalid_argument("no non-silent training frames");

  std::vector<Eigen::Index> sizes{data.inputs.rows()};
  for (auto h : cfg.dnn.hidden_layers()) sizes.push_back(h);
  sizes.push_back(2);

  TrainConfig tc = cfg.dnn.train;
  tc.seed = cfg.dnn_seed();
  tc.batch_size = std::min(tc.batch_size, data.inputs.cols());
  PretrainResult pre = pretrain_rbm_stack(data.inputs, sizes, tc, L);
  SupervisedResult sup = train_supervised(std::move(pre.model), data.inputs, data.labels, tc);
  return {std::move(sup.model), std::move(pre.reconstruction_traces), std::move(sup.loss_trace)};
}

struct TrainedModels {
  NmfModel nmf1, nmf2;
  std::optional<DnnModel> dnn;
  std::vector<double> dnn_loss_trace;
};

inline TrainedModels train_all(const std::vector<double>& source1_audio,
                               const std::vector<double>& source2_audio,
                               const PipelineConfig& cfg) {
  cfg.validate();
  if (source1_audio.empty() || source2_audio.empty())
    throw std::invalid_argument("train_all: training audio must be non-empty");
  const Eigen::MatrixXd m1 = stft(source1_audio, cfg.stft).mag;
  const Eigen::MatrixXd m2 = stft(source2_audio, cfg.stft).mag;
  TrainedModels out;
  out.nmf1 = train_source_dictionary(m1, 1, cfg);
  out.nmf2 = train_source_dictionary(m2, 2, cfg);
  DnnTraining dt = train_joint_dnn(m1, m2, cfg);
  out.dnn = std::move(dt.model);
  out.dnn_loss_trace = std::move(dt.loss_trace);
  return out;
}

// ---------------------------------------------------------------------------
// Separation stage

struct FrameInit {
  FrameProblem problem;
  double y_norm = 0.0;
  bool silent = false;
};

/// x_i = s_init_i / ||s_init_i||, u = ||s_init_1|| / ||y||, v likewise, and
/// y itself normalized. Stacked (L > 1) estimates are normalized per
/// sub-frame; the gains use the center slice.
inline FrameInit initialize_frame(const Eigen::Ref<const Eigen::VectorXd>& y_col,
                                  const Eigen::Ref<const Eigen::VectorXd>& s_init1,
                                  const Eigen::Ref<const Eigen::VectorXd>& s_init2,
                                  const EnergyConfig& energy = {}) {
  const Eigen::Index m = y_col.size();
  if (m == 0 || s_init1.size() != s_init2.size() || s_init1.size() % m != 0 ||
      (s_init1.size() / m) % 2 == 0)
    throw std::invalid_argument("initialize_frame: inconsistent column sizes");
  const Eigen::Index L = s_init1.size() / m;
  const Eigen::Index off = (L - 1) / 2 * m;

  FrameInit init;
  auto [y, y_norm] = normalize_frame(y_col);
  init.y_norm = y_norm;
  init.silent = y_norm == 0.0;
  init.problem.y = std::move(y);
  init.problem.lambda = energy.lambda;
  init.problem.beta = energy.beta;
  init.problem.x1 = normalize_stacked(s_init1, L);
  init.problem.x2 = normalize_stacked(s_init2, L);
  if (!init.silent) {
    init.problem.u = s_init1.segment(off, m).norm() / y_norm;
    init.problem.v = s_init2.segment(off, m).norm() / y_norm;
  }
  return init;
}

struct WienerResult {
  Eigen::VectorXd s1, s2, mask1, mask2;
};

/// mask_1 = (u x1)^2 / ((u x1)^2 + (v x2)^2), applied to the unnormalized
/// mixture column. Bins where both estimates vanish are split evenly.
inline WienerResult wiener_reconstruct(const Eigen::Ref<const Eigen::VectorXd>& x1,
                                       const Eigen::Ref<const Eigen::VectorXd>& x2, double u,
                                       double v, const Eigen::Ref<const Eigen::VectorXd>& y_col) {
  if (x1.size() != y_col.size() || x2.size() != y_col.size())
    throw std::invalid_argument("wiener_reconstruct: size mismatch");
  const Eigen::ArrayXd a = (u * x1).array().square();
  const Eigen::ArrayXd b = (v * x2).array().square();
  const Eigen::ArrayXd den = a + b;
  WienerResult r;
  r.mask1 = (den > kEpsilonFloor).select(a / den.max(kEpsilonFloor), 0.5).matrix();
  r.mask2 = (den > kEpsilonFloor).select(b / den.max(kEpsilonFloor), 0.5).matrix();
  r.s1 = r.mask1.cwiseProduct(y_col);
  r.s2 = r.mask2.cwiseProduct(y_col);
  return r;
}

struct FrameRecord {
  bool skipped = false;
  double u = 0.0, v = 0.0;
  EnergyBreakdown initial, final;
  int iterations = 0;
  std::string status;
};

struct SeparationResult {
  Spectrogram s1_hat, s2_hat;
  Eigen::MatrixXd mask1, mask2;
  std::vector<FrameRecord> frames;  // one per STFT frame; empty energies in NMF-only mode
  std::vector<double> audio1, audio2;
  bool nmf_only = false;
};

struct SeparationModels {
  const NmfModel* nmf1 = nullptr;
  const NmfModel* nmf2 = nullptr;
  const DnnModel* dnn = nullptr;  // may be null in NMF-only mode
};

namespace detail {

/// Runs fn(i) for i in [0, n) on `threads` workers; results must be written
/// by index so the outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(Eigen::Index n, int threads, Fn&& fn) {
  const int workers = int(std::min<Eigen::Index>(std::max(threads, 1), std::max<Eigen::Index>(n, 1)));
  if (workers <= 1) {
    for (Eigen::Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<Eigen::Index> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (Eigen::Index i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

inline void check_models(const SeparationModels& models, const PipelineConfig& cfg) {
  if (!models.nmf1 || !models.nmf2) throw std::invalid_argument("separate: NMF models required");
  models.nmf1->validate();
  models.nmf2->validate();
  if (models.nmf1->n_features() != cfg.stft.n_bins ||
      models.nmf2->n_features() != cfg.stft.n_bins)
    throw std::invalid_argument("separate: NMF dictionaries have " +
                                std::to_string(models.nmf1->n_features()) +
                                " features, STFT config has " + std::to_string(cfg.stft.n_bins) +
                                " bins");
  if (cfg.nmf_only) return;
  if (!models.dnn) throw std::invalid_argument("separate: DNN model required");
  models.dnn->validate();
  const Eigen::Index expected = models.dnn->context_frames * cfg.stft.n_bins;
  if (models.dnn->input_dim() != expected)
    throw std::invalid_argument("separate: DNN input size " +
                                std::to_string(models.dnn->input_dim()) + " != L*n_bins = " +
                                std::to_string(expected));
}

inline SeparationResult separate(const std::vector<double>& mix_audio,
                                 const SeparationModels& models, const PipelineConfig& cfg) {
  cfg.validate();
  check_models(models, cfg);
  if (mix_audio.empty()) throw std::invalid_argument("separate: empty mixture");

  const Spectrogram Y = stft(mix_audio, cfg.stft);
  const Eigen::MatrixXd& B1 = models.nmf1->dictionary;
  const Eigen::MatrixXd& B2 = models.nmf2->dictionary;
  const GainMatrix G =
      decompose_mixture(Y.mag, B1, B2, cfg.nmf.decompose_iters, cfg.decompose_seed());
  InitialEstimates init = initial_estimates(Y.mag, B1, B2, G);

  SeparationResult res;
  res.nmf_only = cfg.nmf_only;
  const Eigen::Index T = Y.n_frames();
  res.frames.resize(size_t(T));

  if (cfg.nmf_only) {
    res.mask1 = std::move(init.mask1);
    res.mask2 = std::move(init.mask2);
    for (Eigen::Index t = 0; t < T; ++t) {
      FrameRecord& rec = res.frames[size_t(t)];
      rec.skipped = Y.mag.col(t).squaredNorm() == 0.0;
      rec.status = "nmf_only";
      if (!rec.skipped) {
        const double yn = Y.mag.col(t).norm();
        rec.u = init.s1.col(t).norm() / yn;
        rec.v = init.s2.col(t).norm() / yn;
      }
    }
  } else {
    const DnnModel& dnn = *models.dnn;
    const int L = dnn.context_frames;
    const Eigen::MatrixXd S1 = stack_frames(init.s1, L);
    const Eigen::MatrixXd S2 = stack_frames(init.s2, L);
    res.mask1.resize(Y.n_bins(), T);
    res.mask2.resize(Y.n_bins(), T);
    detail::parallel_for(T, cfg.threads, [&](Eigen::Index t) {
      const FrameInit fi = initialize_frame(Y.mag.col(t), S1.col(t), S2.col(t), cfg.energy);
      const FrameSolution sol = solve_frame(dnn, fi.problem, cfg.energy.solver);
      FrameRecord& rec = res.frames[size_t(t)];
      rec.skipped = sol.skipped;
      rec.u = sol.problem.u;
      rec.v = sol.problem.v;
      rec.initial = sol.initial;
      rec.final = sol.final;
      rec.iterations = sol.iterations;
      rec.status = sol.skipped ? "silent" : sol.reverted ? "reverted" : to_string(sol.status);
      const WienerResult w = wiener_reconstruct(sol.problem.x1_center(), sol.problem.x2_center(),
                                                sol.problem.u, sol.problem.v, Y.mag.col(t));
      res.mask1.col(t) = w.mask1;
      res.mask2.col(t) = w.mask2;
    });
  }

  res.s1_hat = Spectrogram{res.mask1.cwiseProduct(Y.mag), Y.phase, Y.config};
  res.s2_hat = Spectrogram{res.mask2.cwiseProduct(Y.mag), Y.phase, Y.config};
  const auto n = Eigen::Index(mix_audio.size());
  res.audio1 = istft(res.s1_hat, n);
  res.audio2 = istft(res.s2_hat, n);
  return res;
}

}  // namespace unmix
