#ifndef CLIMAX_LOGISTIC_HPP
#define CLIMAX_LOGISTIC_HPP

// Penalized logistic regression on soft targets, shared by the CE explainer
// and the influence machinery. Column 0 of the design is the intercept.
//
//   loss(theta) = sum_i [softplus(m_i) - t_i m_i] + 1/2 sum_j penalty_j theta_j^2,
//   m_i = x_i . theta

#include <algorithm>
#include <cmath>
#include <vector>

#include "climax/common.hpp"

namespace climax {

struct NewtonOptions {
  int max_iter = 100;
  double grad_tol = 1e-6;  // on the infinity norm of the gradient
};

struct NewtonResult {
  Vector theta;
  double loss = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> loss_trace;  // loss after every accepted step (entry 0 is the start)
  std::vector<double> coef_norm_trace;  // ||theta[1:]|| alongside loss_trace
};

/// Prepends a column of ones.
inline Matrix with_intercept(const Matrix& x) {
  Matrix out(x.rows(), x.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(x.cols()) = x;
  return out;
}

inline double logistic_loss(const Matrix& x1, const Vector& t, const Vector& penalty, const Vector& theta) {
  const Vector m = x1 * theta;
  double loss = 0.0;
  for (Index i = 0; i < m.size(); ++i) loss += softplus(m(i)) - t(i) * m(i);
  return loss + 0.5 * (penalty.array() * theta.array().square()).sum();
}

inline Vector logistic_gradient(const Matrix& x1, const Vector& t, const Vector& penalty, const Vector& theta) {
  Vector resid(x1.rows());
  const Vector m = x1 * theta;
  for (Index i = 0; i < m.size(); ++i) resid(i) = sigmoid(m(i)) - t(i);
  return x1.transpose() * resid + penalty.cwiseProduct(theta);
}

inline Matrix logistic_hessian(const Matrix& x1, const Vector& penalty, const Vector& theta) {
  const Vector m = x1 * theta;
  Vector curv(m.size());
  for (Index i = 0; i < m.size(); ++i) {
    const double p = sigmoid(m(i));
    curv(i) = p * (1.0 - p);
  }
  Matrix h = x1.transpose() * curv.asDiagonal() * x1;
  h.diagonal() += penalty;
  return h;
}

/// Damped Newton (IRLS) with backtracking; falls back to a gradient step
/// when the Newton direction is unusable. Converged means the gradient is
/// below tolerance and the Newton step has become negligible, so runaway
/// solutions on separable data are reported as not converged.
inline NewtonResult fit_logistic(const Matrix& x1, const Vector& t, const Vector& penalty,
                                 const NewtonOptions& opt, Vector theta = Vector()) {
  const Index p = x1.cols();
  if (theta.size() != p) theta = Vector::Zero(p);
  NewtonResult res;
  double loss = logistic_loss(x1, t, penalty, theta);
  auto record = [&] {
    res.loss_trace.push_back(loss);
    res.coef_norm_trace.push_back(p > 1 ? theta.tail(p - 1).norm() : 0.0);
  };
  record();

  for (int it = 0; it < opt.max_iter; ++it) {
    const Vector g = logistic_gradient(x1, t, penalty, theta);
    const Matrix h = logistic_hessian(x1, penalty, theta);
    Eigen::LDLT<Matrix> ldlt(h);
    Vector step;
    const bool solvable = ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-14;
    if (solvable) step = -ldlt.solve(g);
    const bool finite_step = solvable && step.allFinite();
    bool newton_ok = finite_step && step.dot(g) < 0.0;
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    if (gnorm < opt.grad_tol && finite_step &&
        step.lpNorm<Eigen::Infinity>() <= 1e-6 * (1.0 + theta.lpNorm<Eigen::Infinity>())) {
      res.converged = true;
      break;
    }
    if (!newton_ok) step = -g / std::max(1.0, h.diagonal().maxCoeff());

    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      const Vector trial = theta + alpha * step;
      const double trial_loss = logistic_loss(x1, t, penalty, trial);
      if (std::isfinite(trial_loss) && trial_loss <= loss + 1e-4 * alpha * step.dot(g)) {
        theta = trial;
        loss = trial_loss;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    res.iterations = it + 1;
    if (!accepted) {
      // No descent possible along either direction: flat at working precision.
      res.converged = gnorm < opt.grad_tol;
      break;
    }
    record();
  }
  res.theta = theta;
  res.loss = loss;
  return res;
}

}  // namespace climax

#endif  // CLIMAX_LOGISTIC_HPP
