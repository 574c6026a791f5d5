// Itakura-Saito NMF: dictionary training, supervised mixture decomposition
// and soft-mask initial source estimates.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace unmix {

inline constexpr double kEpsilonFloor = 1e-12;

struct NmfModel {
  Eigen::MatrixXd dictionary;  // n_features x rank
  int source_id = 1;
  std::vector<double> divergence_trace;  // empty for loaded models

  Eigen::Index n_features() const { return dictionary.rows(); }
  Eigen::Index rank() const { return dictionary.cols(); }

  void validate() const {
    if (source_id != 1 && source_id != 2)
      throw std::invalid_argument("NmfModel: source_id must be 1 or 2");
    if (dictionary.size() == 0)
      throw std::invalid_argument("NmfModel: empty dictionary");
    if (!dictionary.allFinite() || (dictionary.array() < kEpsilonFloor).any())
      throw std::invalid_argument("NmfModel: entries must be >= epsilon floor");
  }
};

/// Stacked gains [G1; G2] from a supervised decomposition.
struct GainMatrix {
  Eigen::MatrixXd values;
  Eigen::Index rank1 = 0;  // rows belonging to the first dictionary
  std::vector<double> divergence_trace;

  auto g1() const { return values.topRows(rank1); }
  auto g2() const { return values.bottomRows(values.rows() - rank1); }
};

namespace detail {

inline void require_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                               const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

inline void require_factor_shapes(const Eigen::MatrixXd& V,
                                  const Eigen::MatrixXd& B,
                                  const Eigen::MatrixXd& G, const char* what) {
  if (B.rows() != V.rows() || G.cols() != V.cols() || B.cols() != G.rows())
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

inline Eigen::MatrixXd floored(const Eigen::MatrixXd& m) {
  return m.cwiseMax(kEpsilonFloor);
}

inline Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols,
                                      double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

/// D_IS with V already floored.
inline double is_divergence_floored(const Eigen::MatrixXd& V,
                                    const Eigen::MatrixXd& W) {
  const Eigen::ArrayXXd r = V.array() / W.array();
  return (r - r.log() - 1.0).sum();
}

}  // namespace detail

/// Itakura-Saito divergence sum(V/W - log(V/W) - 1). Zero entries of V are
/// replaced by the epsilon floor.
inline double is_divergence(const Eigen::MatrixXd& V, const Eigen::MatrixXd& W) {
  detail::require_same_shape(V, W, "is_divergence");
  if ((W.array() <= 0.0).any())
    throw std::invalid_argument("is_divergence: W must be strictly positive");
  return detail::is_divergence_floored(detail::floored(V), W);
}

/// G <- G .* [B'(V ./ (BG).^2)] ./ [B'(1 ./ BG)]
inline Eigen::MatrixXd update_gains(const Eigen::MatrixXd& V,
                                    const Eigen::MatrixXd& B,
                                    const Eigen::MatrixXd& G) {
  detail::require_factor_shapes(V, B, G, "update_gains");
  const Eigen::ArrayXXd BG = (B * G).array();
  const Eigen::MatrixXd num =
      B.transpose() * (detail::floored(V).array() / BG.square()).matrix();
  const Eigen::MatrixXd den = B.transpose() * BG.inverse().matrix();
  return (G.array() * num.array() / den.array()).matrix().cwiseMax(kEpsilonFloor);
}

/// B <- B .* [(V ./ (BG).^2) G'] ./ [(1 ./ BG) G']
inline Eigen::MatrixXd update_dictionary(const Eigen::MatrixXd& V,
                                         const Eigen::MatrixXd& B,
                                         const Eigen::MatrixXd& G) {
  detail::require_factor_shapes(V, B, G, "update_dictionary");
  const Eigen::ArrayXXd BG = (B * G).array();
  const Eigen::MatrixXd num =
      (detail::floored(V).array() / BG.square()).matrix() * G.transpose();
  const Eigen::MatrixXd den = BG.inverse().matrix() * G.transpose();
  return (B.array() * num.array() / den.array()).matrix().cwiseMax(kEpsilonFloor);
}

/// Alternating gain/dictionary updates from a seeded positive random start.
/// The returned model carries the divergence after every iteration (entry 0
/// is the starting point).
inline NmfModel train_dictionary(const Eigen::MatrixXd& S_train, Eigen::Index rank,
                                 int n_iter, uint64_t seed, int source_id = 1) {
  if (rank <= 0) throw std::invalid_argument("train_dictionary: rank must be > 0");
  if (n_iter < 0) throw std::invalid_argument("train_dictionary: n_iter < 0");
  if (S_train.cols() < rank)
    throw std::invalid_argument("train_dictionary: need at least rank frames (" +
                                std::to_string(S_train.cols()) + " < " +
                                std::to_string(rank) + ")");
  if ((S_train.array() < 0.0).any())
    throw std::invalid_argument("train_dictionary: negative data");

  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd V = detail::floored(S_train);
  Eigen::MatrixXd B = detail::uniform_matrix(V.rows(), rank, 0.1, 1.1, rng);
  Eigen::MatrixXd G = detail::uniform_matrix(rank, V.cols(), 0.1, 1.1, rng);
  // Match the data scale so the first updates are not spent on a global gain.
  G *= std::max(V.mean() / (B * G).mean(), kEpsilonFloor);

  NmfModel model;
  model.source_id = source_id;
  model.divergence_trace.reserve(size_t(n_iter) + 1);
  model.divergence_trace.push_back(detail::is_divergence_floored(V, B * G));
  for (int it = 0; it < n_iter; ++it) {
    G = update_gains(V, B, G);
    B = update_dictionary(V, B, G);
    model.divergence_trace.push_back(detail::is_divergence_floored(V, B * G));
  }
  model.dictionary = std::move(B);
  return model;
}

/// Gains-only updates of Y ~ [B1 B2][G1; G2] with the dictionaries held fixed.
/// The updates run on Y divided by its mean level and the gains are scaled
/// back afterwards, so the epsilon floors act relative to the data and
/// scaling Y by c scales the returned gains by c.
inline GainMatrix decompose_mixture(const Eigen::MatrixXd& Y_mag,
                                    const Eigen::MatrixXd& B1,
                                    const Eigen::MatrixXd& B2, int n_iter,
                                    uint64_t seed = 0) {
  if (B1.rows() != Y_mag.rows() || B2.rows() != Y_mag.rows())
    throw std::invalid_argument("decompose_mixture: feature count mismatch");
  if (n_iter < 0) throw std::invalid_argument("decompose_mixture: n_iter < 0");

  Eigen::MatrixXd B(Y_mag.rows(), B1.cols() + B2.cols());
  B << B1, B2;
  const double mean = Y_mag.size() ? Y_mag.mean() : 0.0;
  const double level = mean > 0.0 ? mean : 1.0;
  const Eigen::MatrixXd V = detail::floored(Y_mag / level);

  std::mt19937_64 rng(seed);
  Eigen::MatrixXd G = detail::uniform_matrix(B.cols(), V.cols(), 0.1, 1.1, rng);
  if (mean > 0.0) G /= (B * G).mean();

  GainMatrix out;
  out.rank1 = B1.cols();
  out.divergence_trace.reserve(size_t(n_iter) + 1);
  out.divergence_trace.push_back(detail::is_divergence_floored(V, B * G));
  for (int it = 0; it < n_iter; ++it) {
    G = update_gains(V, B, G);
    out.divergence_trace.push_back(detail::is_divergence_floored(V, B * G));
  }
  out.values = level * G;
  return out;
}

struct InitialEstimates {
  Eigen::MatrixXd s1, s2;        // magnitude estimates
  Eigen::MatrixXd mask1, mask2;  // soft masks, mask1 + mask2 == 1
};

/// Soft-mask estimates (B1 G1)/(B1 G1 + B2 G2) .* Y. Bins where both models
/// are (numerically) silent are split evenly.
inline InitialEstimates initial_estimates(const Eigen::MatrixXd& Y_mag,
                                          const Eigen::MatrixXd& B1,
                                          const Eigen::MatrixXd& B2,
                                          const GainMatrix& G) {
  if (B1.rows() != Y_mag.rows() || B2.rows() != Y_mag.rows() ||
      G.values.cols() != Y_mag.cols() || G.rank1 != B1.cols() ||
      G.values.rows() != B1.cols() + B2.cols())
    throw std::invalid_argument("initial_estimates: shape mismatch");

  const Eigen::ArrayXXd a = (B1 * G.g1()).array();
  const Eigen::ArrayXXd b = (B2 * G.g2()).array();
  const Eigen::ArrayXXd den = a + b;
  InitialEstimates est;
  est.mask1 = (den > kEpsilonFloor).select(a / den.max(kEpsilonFloor), 0.5).matrix();
  est.mask2 = (den > kEpsilonFloor).select(b / den.max(kEpsilonFloor), 0.5).matrix();
  est.s1 = est.mask1.cwiseProduct(Y_mag);
  est.s2 = est.mask2.cwiseProduct(Y_mag);
  return est;
}

}  // namespace unmix
