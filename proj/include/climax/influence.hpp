#ifndef CLIMAX_INFLUENCE_HPP
#define CLIMAX_INFLUENCE_HPP

// Influence-based subsampling of a surrogate set.
//
// The local model is the L2-penalized soft-label logistic regression
//   J(theta) = (1/n) sum_i CE_i(theta) + (lambda / 2n) ||theta||^2
// over the training split, theta = (intercept, coefficients). The influence
// of point i is the first-order change in mean validation loss when i is
// removed from training:
//   rho_i = (1/n) gbar_val^T H^{-1} g_i,
// where H is the Hessian of J at the optimum and g_i the per-point gradient.
// Positive rho_i means the point helps.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "climax/common.hpp"
#include "climax/errors.hpp"
#include "climax/explainers.hpp"
#include "climax/logistic.hpp"
#include "climax/surrogate.hpp"

namespace climax {

struct LocalFitState {
  Matrix design;  // all n' rows, intercept column first
  Vector targets;
  std::vector<Index> train_rows;
  std::vector<Index> val_rows;
  double lambda = 0.0;
  Vector theta;
  Matrix gradients;  // n' x p, per-point CE gradients at theta (no penalty share)
  Matrix hessian;    // Hessian of J over the training split
  Vector val_gradient;  // mean validation gradient
  bool converged = true;
  int iterations = 0;

  Index n_train() const { return static_cast<Index>(train_rows.size()); }
};

enum class SubsampleMode { Deterministic, Stochastic };

struct InfluenceResult {
  Vector rho;
  Vector psi;
  std::vector<bool> keep;
  Index kept_count = 0;
  Vector subset_theta;  // refit on the kept training rows
  std::vector<Index> kept_rows;
};

namespace detail {

inline Matrix rows_of(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = m.row(rows[k]);
  return out;
}

inline Vector rows_of(const Vector& v, const std::vector<Index>& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) out(static_cast<Index>(k)) = v(rows[k]);
  return out;
}

}  // namespace detail

/// Minimizer of sum_i CE_i + (lambda/2) ||theta||^2 over the given rows
/// (same minimizer as J).
inline NewtonResult fit_penalized_logistic(const Matrix& design, const Vector& targets, double lambda,
                                           NewtonOptions opt = {200, 1e-10}) {
  const Vector penalty = Vector::Constant(design.cols(), lambda);
  return fit_logistic(design, targets, penalty, opt);
}

/// Per-point CE gradient (sigmoid(x.theta) - t) x for every row.
inline Matrix per_point_gradients(const Matrix& design, const Vector& targets, const Vector& theta) {
  Matrix g(design.rows(), design.cols());
  const Vector m = design * theta;
  for (Index i = 0; i < design.rows(); ++i) g.row(i) = (sigmoid(m(i)) - targets(i)) * design.row(i);
  return g;
}

/// Mean CE loss of theta over the given rows (no penalty).
inline double mean_ce_loss(const Matrix& design, const Vector& targets, const Vector& theta) {
  if (design.rows() == 0) return 0.0;
  const Vector m = design * theta;
  double loss = 0.0;
  for (Index i = 0; i < m.size(); ++i) loss += softplus(m(i)) - targets(i) * m(i);
  return loss / static_cast<double>(m.size());
}

/// Splits the rows of a design into train/validation and fits the local
/// logistic model on the training part.
inline LocalFitState fit_full(const Matrix& features, const Vector& targets, double lambda,
                              double val_fraction = 0.2, std::uint64_t seed = 0) {
  const Index n = features.rows();
  if (n < 10) throw ConfigError("influence fit needs at least 10 surrogate rows");
  if (!(lambda > 0.0)) throw ConfigError("influence fit needs lambda > 0");
  if (!(val_fraction > 0.0 && val_fraction <= 0.5)) throw ConfigError("validation fraction must lie in (0, 0.5]");

  LocalFitState st;
  st.design = with_intercept(features);
  st.targets = targets;
  st.lambda = lambda;
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = std::max<Index>(1, static_cast<Index>(std::floor(val_fraction * static_cast<double>(n))));
  st.val_rows.assign(order.begin(), order.begin() + n_val);
  st.train_rows.assign(order.begin() + n_val, order.end());
  std::sort(st.val_rows.begin(), st.val_rows.end());
  std::sort(st.train_rows.begin(), st.train_rows.end());

  const Matrix xt = detail::rows_of(st.design, st.train_rows);
  const Vector tt = detail::rows_of(targets, st.train_rows);
  const NewtonResult nr = fit_penalized_logistic(xt, tt, lambda);
  st.theta = nr.theta;
  st.converged = nr.converged;
  st.iterations = nr.iterations;
  if (!nr.converged) log_debug("influence model did not converge; using best iterate");

  const double nt = static_cast<double>(st.n_train());
  st.gradients = per_point_gradients(st.design, targets, st.theta);
  st.hessian = logistic_hessian(xt, Vector::Constant(st.design.cols(), lambda), st.theta) / nt;
  st.val_gradient = detail::rows_of(st.gradients, st.val_rows).colwise().mean().transpose();
  return st;
}

/// Overload on a surrogate set: the design is the standardized Z and the
/// targets are the target-class probabilities.
inline LocalFitState fit_full(const SurrogateSet& s, int target_class, double lambda, double val_fraction,
                              std::uint64_t seed, const Standardizer& standardizer = {}) {
  return fit_full(standardizer.apply(s.z), s.probs.col(target_class), lambda, val_fraction, seed);
}

/// rho_i for every row of the state's design (training and validation).
inline Vector influence_scores(const LocalFitState& st) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(st.hessian, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12)
    throw IllConditioned("influence Hessian condition number exceeds 1e12; increase lambda");
  Eigen::LLT<Matrix> llt(st.hessian);
  const Vector v = llt.solve(st.val_gradient);  // H^{-1} gbar_val, shared by every point
  return (st.gradients * v) / static_cast<double>(st.n_train());
}

/// softmax(rho / temperature).
inline Vector sampling_probabilities(const Vector& rho, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (rho.size() == 0) return Vector(0);
  const Vector s = rho / temperature;
  const double m = s.maxCoeff();
  Vector e = (s.array() - m).exp();
  return e / e.sum();
}

/// Spread of rho, or 1 when rho is constant.
inline double default_temperature(const Vector& rho) {
  if (rho.size() < 2) return 1.0;
  const double mean = rho.mean();
  const double sd = std::sqrt((rho.array() - mean).square().sum() / static_cast<double>(rho.size()));
  return sd > 0.0 && std::isfinite(sd) ? sd : 1.0;
}

/// Keeps ceil(q * n_c) rows of every class c (at least two where the class
/// has them), either the highest-rho rows or a psi-weighted draw without
/// replacement, then refits the local model on the kept training rows.
inline std::pair<SurrogateSet, InfluenceResult> subsample_and_refit(const SurrogateSet& s,
                                                                    const LocalFitState& st,
                                                                    const Vector& rho, const Vector& psi,
                                                                    double q, SubsampleMode mode,
                                                                    std::uint64_t seed) {
  const Index n = s.size();
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("keep fraction must lie in (0, 1]");
  if (rho.size() != n || psi.size() != n) throw DimensionError("influence vectors do not match the surrogate set");
  const Index params = st.design.cols();  // d + 1
  if (static_cast<Index>(std::ceil(q * static_cast<double>(n))) < params + 1)
    throw ConfigError("keep fraction leaves fewer than d + 2 rows");

  InfluenceResult res;
  res.rho = rho;
  res.psi = psi;
  res.keep.assign(static_cast<std::size_t>(n), false);
  Rng rng(seed);
  for (int c = 0; c < s.num_classes(); ++c) {
    std::vector<Index> members = detail::rows_of_class(s, c);
    const auto nc = static_cast<Index>(members.size());
    if (nc == 0) continue;
    Index quota = static_cast<Index>(std::ceil(q * static_cast<double>(nc)));
    if (quota < std::min<Index>(2, nc)) {
      log_debug("raising keep quota of class " + std::to_string(c) + " to 2");
      quota = std::min<Index>(2, nc);
    }
    if (mode == SubsampleMode::Deterministic) {
      std::stable_sort(members.begin(), members.end(), [&](Index a, Index b) { return rho(a) > rho(b); });
      for (Index k = 0; k < quota; ++k) res.keep[static_cast<std::size_t>(members[static_cast<std::size_t>(k)])] = true;
    } else {
      std::vector<double> w;
      for (Index r : members) w.push_back(psi(r));
      for (Index k = 0; k < quota; ++k) {
        const double total = std::accumulate(w.begin(), w.end(), 0.0);
        std::size_t pick = 0;
        if (total > 0.0) {
          std::uniform_real_distribution<double> u(0.0, total);
          double target = u(rng), acc = 0.0;
          pick = w.size() - 1;
          for (std::size_t m = 0; m < w.size(); ++m) {
            acc += w[m];
            if (w[m] > 0.0 && acc >= target) {
              pick = m;
              break;
            }
          }
          while (w[pick] <= 0.0) pick = (pick + 1) % w.size();
        } else {
          while (res.keep[static_cast<std::size_t>(members[pick])]) ++pick;
        }
        res.keep[static_cast<std::size_t>(members[pick])] = true;
        w[pick] = 0.0;
      }
    }
  }
  for (Index i = 0; i < n; ++i)
    if (res.keep[static_cast<std::size_t>(i)]) res.kept_rows.push_back(i);
  res.kept_count = static_cast<Index>(res.kept_rows.size());

  // The validation split stays out of the refit so theta-tilde and theta-hat
  // are scored on the same held-out rows.
  std::vector<Index> refit_rows;
  for (Index i : st.train_rows)
    if (res.keep[static_cast<std::size_t>(i)]) refit_rows.push_back(i);
  const NewtonResult refit = fit_penalized_logistic(detail::rows_of(st.design, refit_rows),
                                                    detail::rows_of(st.targets, refit_rows), st.lambda);
  res.subset_theta = refit.theta;
  return {s.subset(res.kept_rows), std::move(res)};
}

}  // namespace climax

#endif  // CLIMAX_INFLUENCE_HPP
