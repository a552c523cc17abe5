#ifndef CLIMAX_EXPLAINERS_HPP
#define CLIMAX_EXPLAINERS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "climax/common.hpp"
#include "climax/errors.hpp"
#include "climax/logistic.hpp"
#include "climax/surrogate.hpp"

namespace climax {

enum class Method { Lime, LClimax, CeClimax };
enum class Balancer { None, Ros, Gmm };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Lime: return "lime";
    case Method::LClimax: return "l-climax";
    case Method::CeClimax: return "ce-climax";
  }
  return "?";
}

inline const char* to_string(Balancer b) {
  switch (b) {
    case Balancer::None: return "none";
    case Balancer::Ros: return "ros";
    case Balancer::Gmm: return "gmm";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "lime") return Method::Lime;
  if (s == "l-climax") return Method::LClimax;
  if (s == "ce-climax") return Method::CeClimax;
  throw ConfigError("unknown method '" + s + "'");
}

inline Balancer parse_balancer(const std::string& s) {
  if (s == "none") return Balancer::None;
  if (s == "ros") return Balancer::Ros;
  if (s == "gmm") return Balancer::Gmm;
  throw ConfigError("unknown balancer '" + s + "'");
}

/// Affine map from feature units to the explainer's design coordinates,
/// u_j = (z_j - center_j) / scale_j. Empty means identity.
struct Standardizer {
  Vector center;
  Vector scale;

  static Standardizer from_stats(const FeatureStats& stats) {
    Standardizer s;
    s.center = stats.mean;
    s.scale = stats.stddev;
    for (Index j = 0; j < s.scale.size(); ++j)
      if (!(s.scale(j) > 0.0)) s.scale(j) = 1.0;
    return s;
  }

  bool identity() const { return center.size() == 0; }

  Matrix apply(const Matrix& z) const {
    if (identity()) return z;
    return (z.rowwise() - center.transpose()).array().rowwise() / scale.transpose().array();
  }
};

/// log(p'/(1-p')) with p' = clamp(p, eps, 1-eps).
inline double logit_transform(double p, double eps = 1e-6) {
  if (!(eps > 0.0 && eps < 0.5)) throw ConfigError("logit clip must lie in (0, 0.5)");
  const double q = std::min(std::max(p, eps), 1.0 - eps);
  return std::log(q / (1.0 - q));
}

inline Vector logit_transform(const Vector& p, double eps = 1e-6) {
  Vector out(p.size());
  for (Index i = 0; i < p.size(); ++i) out(i) = logit_transform(p(i), eps);
  return out;
}

struct LinearFit {
  Vector coef;
  double intercept = 0.0;
  double loss = 0.0;  // weighted residual sum of squares, or CE loss
  int iterations = 0;
  bool converged = true;
  std::vector<double> loss_trace;
  std::vector<double> coef_norm_trace;
};

/// argmin_phi,b  sum_i w_i (y_i - b - x_i.phi)^2 + lambda ||phi||^2.
/// With fit_intercept = false, b is fixed at zero.
inline LinearFit weighted_ridge(const Matrix& x, const Vector& y, const Vector& w, double lambda,
                                bool fit_intercept = true) {
  if (lambda < 0.0) throw ConfigError("ridge strength must be >= 0");
  const Index p = x.cols();
  const double wsum = w.sum();
  if (x.rows() == 0 || !(wsum > 0.0)) throw SingularSystem("no weighted observations");
  Eigen::RowVectorXd xbar = Eigen::RowVectorXd::Zero(p);
  double ybar = 0.0;
  if (fit_intercept) {
    xbar = (w.transpose() * x) / wsum;
    ybar = w.dot(y) / wsum;
  }
  const Matrix xc = x.rowwise() - xbar;
  const Vector yc = y.array() - ybar;
  Matrix a = xc.transpose() * w.asDiagonal() * xc;
  a.diagonal().array() += lambda;
  const Vector rhs = xc.transpose() * (w.asDiagonal() * yc);
  LinearFit fit;
  if (p == 0) {
    fit.coef = Vector(0);
  } else {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-13)
      throw SingularSystem("normal equations are singular; use lambda > 0");
    fit.coef = llt.solve(rhs);
  }
  fit.intercept = ybar - xbar.dot(fit.coef);
  const Vector resid = (y - x * fit.coef).array() - fit.intercept;
  fit.loss = (w.array() * resid.array().square()).sum();
  return fit;
}

/// Soft-label cross-entropy with an unpenalized intercept,
/// sum_i CE(t_i, sigmoid(x_i.phi + b)) + lambda ||phi||^2. Unweighted.
inline LinearFit fit_soft_logistic(const Matrix& x, const Vector& t, double lambda, const NewtonOptions& budget) {
  if (lambda < 0.0) throw ConfigError("L2 strength must be >= 0");
  const Matrix x1 = with_intercept(x);
  Vector penalty = Vector::Constant(x1.cols(), 2.0 * lambda);
  penalty(0) = 0.0;
  const NewtonResult nr = fit_logistic(x1, t, penalty, budget);
  LinearFit fit;
  fit.intercept = nr.theta(0);
  fit.coef = nr.theta.tail(x.cols());
  fit.loss = nr.loss;
  fit.iterations = nr.iterations;
  fit.converged = nr.converged;
  fit.loss_trace = nr.loss_trace;
  fit.coef_norm_trace = nr.coef_norm_trace;
  return fit;
}

/// Greedy forward selection: repeatedly add the feature whose inclusion gives
/// the smallest weighted residual of the restricted ridge fit. Ties go to the
/// lower index. Returns indices in selection order.
inline std::vector<Index> forward_select(const Matrix& x, const Vector& target, const Vector& w, int k,
                                         double lambda) {
  const Index d = x.cols();
  if (k < 1 || k > d) throw ConfigError("forward selection needs 1 <= k <= d");
  std::vector<Index> chosen;
  std::vector<bool> used(static_cast<std::size_t>(d), false);
  for (int step = 0; step < k; ++step) {
    Index best = -1;
    double best_loss = std::numeric_limits<double>::infinity();
    Matrix trial(x.rows(), static_cast<Index>(chosen.size()) + 1);
    for (std::size_t c = 0; c < chosen.size(); ++c) trial.col(static_cast<Index>(c)) = x.col(chosen[c]);
    for (Index j = 0; j < d; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      trial.col(trial.cols() - 1) = x.col(j);
      double loss;
      try {
        loss = weighted_ridge(trial, target, w, lambda).loss;
      } catch (const SingularSystem&) {
        continue;
      }
      if (loss < best_loss) {
        best_loss = loss;
        best = j;
      }
    }
    if (best < 0)  // every remaining column is degenerate; take them in order
      for (Index j = 0; j < d && best < 0; ++j)
        if (!used[static_cast<std::size_t>(j)]) best = j;
    used[static_cast<std::size_t>(best)] = true;
    chosen.push_back(best);
  }
  return chosen;
}

struct FeatureScore {
  Index index = 0;
  double score = 0.0;
};

/// Selected features ordered by descending |score|, ties by ascending index.
inline std::vector<FeatureScore> rank_features(const Vector& phi, const std::vector<Index>& selected) {
  std::vector<FeatureScore> out;
  for (Index j : selected) out.push_back({j, phi(j)});
  std::sort(out.begin(), out.end(), [](const FeatureScore& a, const FeatureScore& b) {
    const double fa = std::abs(a.score), fb = std::abs(b.score);
    return fa > fb || (fa == fb && a.index < b.index);
  });
  return out;
}

struct SurrogateDiagnostics {
  Index n_sampled = 0;
  Index n_balanced = 0;
  Index n_final = 0;
  double perturbation_scale = 0.0;
  std::vector<int> counts_sampled;
  std::vector<int> counts_balanced;
  std::vector<int> counts_final;
  GmmSamplingStats gmm;
};

struct FitDiagnostics {
  double loss = 0.0;
  int iterations = 0;
  bool converged = true;
};

struct Explanation {
  Method method = Method::CeClimax;
  Balancer balancer = Balancer::None;
  bool influence = false;
  std::uint64_t seed = 0;
  int target_class = 0;
  std::vector<int> contrast_classes;
  Vector phi;
  double intercept = 0.0;
  std::vector<FeatureScore> top_features;
  std::vector<Index> selected;  // forward-selection order
  Standardizer standardizer;
  SurrogateDiagnostics surrogate;
  FitDiagnostics fit;

  std::vector<Index> top_indices() const {
    std::vector<Index> out;
    for (const FeatureScore& f : top_features) out.push_back(f.index);
    return out;
  }
};

namespace detail {

inline std::vector<Index> all_columns(Index d) {
  std::vector<Index> cols(static_cast<std::size_t>(d));
  for (Index j = 0; j < d; ++j) cols[static_cast<std::size_t>(j)] = j;
  return cols;
}

inline Matrix take_columns(const Matrix& x, const std::vector<Index>& cols) {
  Matrix out(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Index>(c)) = x.col(cols[c]);
  return out;
}

inline Explanation assemble(Method method, const SurrogateSet& s, int target_class, const LinearFit& fit,
                            const std::vector<Index>& cols, const Standardizer& standardizer) {
  Explanation e;
  e.method = method;
  e.target_class = target_class;
  for (int c = 0; c < s.num_classes(); ++c)
    if (c != target_class) e.contrast_classes.push_back(c);
  e.phi = Vector::Zero(s.dims());
  for (std::size_t c = 0; c < cols.size(); ++c) e.phi(cols[c]) = fit.coef(static_cast<Index>(c));
  e.intercept = fit.intercept;
  e.selected = cols;
  e.top_features = rank_features(e.phi, cols);
  e.standardizer = standardizer;
  e.fit = {fit.loss, fit.iterations, fit.converged};
  e.surrogate.n_sampled = e.surrogate.n_balanced = e.surrogate.n_final = s.size();
  e.surrogate.counts_sampled = e.surrogate.counts_balanced = e.surrogate.counts_final = s.class_counts();
  return e;
}

inline void check_target(const SurrogateSet& s, int target_class) {
  if (s.size() < 1) throw ConfigError("surrogate set is empty");
  if (target_class < 0 || target_class >= s.num_classes()) throw ConfigError("target class out of range");
}

}  // namespace detail

struct RidgeOptions {
  double lambda = 1.0;
  bool fit_intercept = true;
};

/// LIME: proximity-weighted ridge regression of the target-class
/// probability on the design.
inline Explanation fit_lime(const SurrogateSet& s, int target_class, RidgeOptions opt = {},
                            const Standardizer& standardizer = {}, std::vector<Index> cols = {}) {
  detail::check_target(s, target_class);
  if (cols.empty()) cols = detail::all_columns(s.dims());
  const Matrix design = detail::take_columns(standardizer.apply(s.z), cols);
  const LinearFit fit = weighted_ridge(design, s.probs.col(target_class), s.weights, opt.lambda, opt.fit_intercept);
  return detail::assemble(Method::Lime, s, target_class, fit, cols, standardizer);
}

/// L-CLIMAX: proximity-weighted ridge regression of the target-class
/// log-odds. The complement classes enter through 1 - p.
inline Explanation fit_l_climax(const SurrogateSet& s, int target_class, RidgeOptions opt = {},
                                double eps = 1e-6, const Standardizer& standardizer = {},
                                std::vector<Index> cols = {}) {
  detail::check_target(s, target_class);
  if (cols.empty()) cols = detail::all_columns(s.dims());
  const Matrix design = detail::take_columns(standardizer.apply(s.z), cols);
  const Vector ell = logit_transform(Vector(s.probs.col(target_class)), eps);
  const LinearFit fit = weighted_ridge(design, ell, s.weights, opt.lambda, opt.fit_intercept);
  return detail::assemble(Method::LClimax, s, target_class, fit, cols, standardizer);
}

/// CE-CLIMAX: logistic model fitted to the soft target-class probabilities
/// by minimizing cross-entropy. Samples are not proximity-weighted.
inline Explanation fit_ce_climax(const SurrogateSet& s, int target_class, double lambda = 1e-3,
                                 NewtonOptions budget = {}, const Standardizer& standardizer = {},
                                 std::vector<Index> cols = {}) {
  detail::check_target(s, target_class);
  if (cols.empty()) cols = detail::all_columns(s.dims());
  const Matrix design = detail::take_columns(standardizer.apply(s.z), cols);
  const LinearFit fit = fit_soft_logistic(design, s.probs.col(target_class), lambda, budget);
  if (!fit.converged)
    log_debug("ce-climax fit did not converge in " + std::to_string(fit.iterations) + " iterations");
  return detail::assemble(Method::CeClimax, s, target_class, fit, cols, standardizer);
}

/// Response each method regresses on: probabilities for LIME, log-odds for
/// both CLIMAX variants.
inline Vector selection_response(Method method, const SurrogateSet& s, int target_class, double eps) {
  const Vector p = s.probs.col(target_class);
  return method == Method::Lime ? p : logit_transform(p, eps);
}

inline std::vector<Index> forward_select(const SurrogateSet& s, const Vector& target, int k, double lambda,
                                         const Standardizer& standardizer = {}) {
  return forward_select(standardizer.apply(s.z), target, s.weights, k, lambda);
}

}  // namespace climax

#endif  // CLIMAX_EXPLAINERS_HPP
