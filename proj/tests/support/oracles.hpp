// Independent reference implementations used to cross-check the library.
// Everything here is deliberately naive: plain loops, long double
// accumulation where it helps, no shared helpers with the code under test.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace unmix::testing {

/// Direct O(N^2) DFT of a real frame, first n_out bins.
inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& x, size_t n_fft,
                                                   size_t n_out) {
  std::vector<std::complex<double>> out(n_out);
  for (size_t k = 0; k < n_out; ++k) {
    long double re = 0, im = 0;
    for (size_t n = 0; n < x.size() && n < n_fft; ++n) {
      const long double a = -2.0L * std::numbers::pi_v<long double> * k * n / n_fft;
      re += x[n] * std::cos(a);
      im += x[n] * std::sin(a);
    }
    out[k] = {double(re), double(im)};
  }
  return out;
}

/// Central differences of a scalar function.
inline Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    xm(i) = x(i) - h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
    xp(i) = xm(i) = x(i);
  }
  return g;
}

/// max|a - b| / max(max|b|, floor): a norm-wise relative error that stays
/// meaningful when individual entries are near zero.
inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                             double floor = 1e-8) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), floor);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

// Brute-force separation metrics. They solve the projections as small
// least-squares problems rather than by the closed-form scalar ratio.

inline double oracle_db(long double num, long double den) {
  if (den <= 0) return 300.0;
  if (num <= 0) return -300.0;
  return std::clamp(double(10.0L * std::log10(num / den)), -300.0, 300.0);
}

inline long double energy(const Eigen::VectorXd& v) {
  long double s = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (long double)v(i) * v(i);
  return s;
}

inline Eigen::VectorXd ls_projection(const Eigen::VectorXd& x, const Eigen::VectorXd& r) {
  Eigen::MatrixXd A(r.size(), 1);
  A.col(0) = r;
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(x);
  return A * c;
}

inline double oracle_sdr(const Eigen::VectorXd& est, const Eigen::VectorXd& ref) {
  const Eigen::VectorXd t = ls_projection(est, ref);
  return oracle_db(energy(t), energy(est - t));
}

inline double oracle_sir(const Eigen::VectorXd& est, const Eigen::VectorXd& ref,
                         const Eigen::VectorXd& interf) {
  const Eigen::VectorXd t = ls_projection(est, ref);
  const Eigen::VectorXd i = ls_projection(est - t, interf);
  return oracle_db(energy(t), energy(i));
}

inline double oracle_snr(const Eigen::VectorXd& est, const Eigen::VectorXd& ref) {
  return oracle_db(energy(ref), energy(ref - est));
}

inline std::vector<double> white_noise(size_t n, uint64_t seed, double sigma = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, sigma);
  std::vector<double> x(n);
  for (auto& s : x) s = d(rng);
  return x;
}

inline Eigen::MatrixXd random_positive(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng,
                                       double lo = 0.05, double hi = 2.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

}  // namespace unmix::testing
