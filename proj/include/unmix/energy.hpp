// Per-frame energy minimization: DNN fitness terms, mixture reconstruction
// error and negativity penalty, with analytic gradient and an L-BFGS solve
// over theta = (x1, x2, u, v).

#pragma once

#include "unmix/dnn.hpp"
#include "unmix/lbfgs.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace unmix {

/// Unknowns of one mixture frame. `y` is the l2-normalized mixture frame.
/// With L stacked context frames, x1/x2 hold L*|y| entries and only their
/// center slice takes part in the reconstruction term.
struct FrameProblem {
  Eigen::VectorXd y;
  Eigen::VectorXd x1, x2;
  double u = 0.0, v = 0.0;
  double lambda = 5.0;
  double beta = 3.0;

  Eigen::Index context() const { return y.size() ? x1.size() / y.size() : 1; }
  Eigen::Index center_offset() const { return (context() - 1) / 2 * y.size(); }
  auto x1_center() const { return x1.segment(center_offset(), y.size()); }
  auto x2_center() const { return x2.segment(center_offset(), y.size()); }

  Eigen::Index n_params() const { return x1.size() + x2.size() + 2; }

  void validate(const DnnModel& model) const {
    if (x1.size() != model.input_dim() || x2.size() != model.input_dim())
      throw std::invalid_argument("FrameProblem: x1/x2 must match the DNN input size");
    if (y.size() == 0 || x1.size() % y.size() != 0 || (x1.size() / y.size()) % 2 == 0)
      throw std::invalid_argument("FrameProblem: x size must be an odd multiple of y size");
  }

  Eigen::VectorXd theta() const {
    Eigen::VectorXd t(n_params());
    t << x1, x2, u, v;
    return t;
  }

  void set_theta(const Eigen::Ref<const Eigen::VectorXd>& t) {
    const Eigen::Index d = x1.size();
    x1 = t.head(d);
    x2 = t.segment(d, d);
    u = t(2 * d);
    v = t(2 * d + 1);
  }
};

struct EnergyBreakdown {
  double e1 = 0.0, e2 = 0.0, e_err = 0.0, e_neg = 0.0, total = 0.0;
};

/// E_1(x) = (1 - f_1)^2 + f_2^2, E_2(x) = f_1^2 + (1 - f_2)^2.
inline double fitness_energy(const DnnModel& model,
                             const Eigen::Ref<const Eigen::VectorXd>& x, int source) {
  if (source != 1 && source != 2)
    throw std::invalid_argument("fitness_energy: source must be 1 or 2");
  const Eigen::Vector2d f = forward(model, x).f;
  const Eigen::Vector2d target = source == 1 ? Eigen::Vector2d(1, 0) : Eigen::Vector2d(0, 1);
  return (f - target).squaredNorm();
}

/// ||u x1 + v x2 - y||^2
inline double error_energy(const Eigen::Ref<const Eigen::VectorXd>& x1,
                           const Eigen::Ref<const Eigen::VectorXd>& x2,
                           const Eigen::Ref<const Eigen::VectorXd>& y, double u, double v) {
  if (x1.size() != y.size() || x2.size() != y.size())
    throw std::invalid_argument("error_energy: size mismatch");
  return (u * x1 + v * x2 - y).squaredNorm();
}

/// sum_i min(theta_i, 0)^2
inline double negativity_penalty(const Eigen::Ref<const Eigen::VectorXd>& theta) {
  return theta.cwiseMin(0.0).squaredNorm();
}

namespace detail {

// Fitness energy of one estimate plus its input gradient.
inline double fitness_with_gradient(const DnnModel& model,
                                    const Eigen::Ref<const Eigen::VectorXd>& x,
                                    int source, Eigen::Ref<Eigen::VectorXd> grad) {
  const ForwardResult fr = forward(model, x);
  const Eigen::Vector2d target = source == 1 ? Eigen::Vector2d(1, 0) : Eigen::Vector2d(0, 1);
  const Eigen::Vector2d r = fr.f - target;
  grad = (2.0 * r.transpose() * input_gradient(model, x, fr.activations)).transpose();
  return r.squaredNorm();
}

}  // namespace detail

inline EnergyBreakdown total_energy(const DnnModel& model, const FrameProblem& p) {
  p.validate(model);
  EnergyBreakdown e;
  e.e1 = fitness_energy(model, p.x1, 1);
  e.e2 = fitness_energy(model, p.x2, 2);
  e.e_err = error_energy(p.x1_center(), p.x2_center(), p.y, p.u, p.v);
  e.e_neg = negativity_penalty(p.theta());
  e.total = e.e1 + e.e2 + p.lambda * e.e_err + p.beta * e.e_neg;
  return e;
}

/// Energy and gradient with respect to theta = (x1, x2, u, v) in one pass.
inline EnergyBreakdown energy_and_gradient(const DnnModel& model, const FrameProblem& p,
                                           Eigen::VectorXd& grad) {
  p.validate(model);
  const Eigen::Index d = p.x1.size();
  const Eigen::Index off = p.center_offset(), m = p.y.size();
  grad.resize(p.n_params());

  EnergyBreakdown e;
  e.e1 = detail::fitness_with_gradient(model, p.x1, 1, grad.head(d));
  e.e2 = detail::fitness_with_gradient(model, p.x2, 2, grad.segment(d, d));

  const Eigen::VectorXd x1c = p.x1_center(), x2c = p.x2_center();
  const Eigen::VectorXd resid = p.u * x1c + p.v * x2c - p.y;
  e.e_err = resid.squaredNorm();
  grad.segment(off, m) += 2.0 * p.lambda * p.u * resid;
  grad.segment(d + off, m) += 2.0 * p.lambda * p.v * resid;
  grad(2 * d) = 2.0 * p.lambda * x1c.dot(resid);
  grad(2 * d + 1) = 2.0 * p.lambda * x2c.dot(resid);

  const Eigen::VectorXd neg = p.theta().cwiseMin(0.0);
  e.e_neg = neg.squaredNorm();
  grad += 2.0 * p.beta * neg;

  e.total = e.e1 + e.e2 + p.lambda * e.e_err + p.beta * e.e_neg;
  return e;
}

inline Eigen::VectorXd total_gradient(const DnnModel& model, const FrameProblem& p) {
  Eigen::VectorXd g;
  energy_and_gradient(model, p, g);
  return g;
}

struct SolverConfig {
  int max_iter = 200;
  double grad_tol = 1e-6;
  int history = 10;
  double progress_tol = 1e-12;
};

struct FrameSolution {
  FrameProblem problem;      // clamped estimate
  EnergyBreakdown initial;   // at the initialization
  EnergyBreakdown final;     // at the returned (clamped) estimate
  int iterations = 0;
  LbfgsStatus status = LbfgsStatus::kGradientTolerance;
  bool skipped = false;      // silent frame
  bool reverted = false;     // clamping made things worse; init returned
  std::vector<double> trace; // total energy per accepted iterate
};

/// Minimizes the joint energy from `init`, then zeroes any negative entry.
/// If clamping leaves the energy above the starting value, the (clamped)
/// initialization is returned instead.
inline FrameSolution solve_frame(const DnnModel& model, const FrameProblem& init,
                                 const SolverConfig& cfg = {}) {
  init.validate(model);
  FrameSolution sol;
  sol.problem = init;

  if (init.y.squaredNorm() == 0.0) {
    sol.skipped = true;
    sol.problem.x1.setZero();
    sol.problem.x2.setZero();
    sol.problem.u = sol.problem.v = 0.0;
    sol.initial = sol.final = total_energy(model, sol.problem);
    return sol;
  }

  sol.initial = total_energy(model, init);
  FrameProblem work = init;
  auto objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    work.set_theta(theta);
    return energy_and_gradient(model, work, grad).total;
  };
  LbfgsOptions opt;
  opt.max_iter = cfg.max_iter;
  opt.grad_tol = cfg.grad_tol;
  opt.history = cfg.history;
  opt.progress_tol = cfg.progress_tol;
  const LbfgsResult r = lbfgs_minimize(objective, init.theta(), opt);
  sol.iterations = r.iterations;
  sol.status = r.status;
  sol.trace = r.trace;

  sol.problem.set_theta(r.x.cwiseMax(0.0));
  sol.final = total_energy(model, sol.problem);

  FrameProblem fallback = init;
  fallback.set_theta(init.theta().cwiseMax(0.0));
  const EnergyBreakdown fallback_energy = total_energy(model, fallback);
  if (sol.final.total > sol.initial.total && fallback_energy.total < sol.final.total) {
    sol.problem = std::move(fallback);
    sol.final = fallback_energy;
    sol.reverted = true;
  }
  return sol;
}

}  // namespace unmix
