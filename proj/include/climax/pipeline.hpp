#ifndef CLIMAX_PIPELINE_HPP
#define CLIMAX_PIPELINE_HPP

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "climax/blackbox.hpp"
#include "climax/explainers.hpp"
#include "climax/influence.hpp"
#include "climax/json_writer.hpp"
#include "climax/surrogate.hpp"

namespace climax {

struct InfluenceConfig {
  bool enabled = false;
  double keep_fraction = 0.7;
  SubsampleMode mode = SubsampleMode::Deterministic;
  double val_fraction = 0.2;
  double lambda = 0.1;
  double temperature = 0.0;  // <= 0 selects the spread of rho
};

struct ExplainConfig {
  Method method = Method::CeClimax;
  Balancer balancer = Balancer::None;
  InfluenceConfig influence;
  Index n_prime = 1000;
  int k = 5;
  double lambda = std::numeric_limits<double>::quiet_NaN();  // NaN selects the method default
  double logit_eps = 1e-6;
  NewtonOptions ce_budget{100, 1e-6};
  DistanceMetric metric = DistanceMetric::Euclidean;
  double kernel_width = 0.0;  // <= 0 selects 0.75 sqrt(d)
  std::uint64_t seed = 0;
  std::vector<double> scale_schedule{1.0, 1.5, 2.0, 3.0};
  int gmm_components = 0;  // <= 0 selects the class count
  int gmm_max_iter = 200;
  double gmm_tol = 1e-6;
  double screening_lambda = 1.0;  // ridge used to rank features for ce-climax

  double effective_lambda() const {
    if (!std::isnan(lambda)) return lambda;
    return method == Method::CeClimax ? 1e-3 : 1.0;
  }

  void validate(Index d) const {
    if (k < 1 || k > d) throw ConfigError("k must lie in [1, d]");
    if (effective_lambda() < 0.0) throw ConfigError("lambda must be >= 0");
    if (!(logit_eps > 0.0 && logit_eps < 0.5)) throw ConfigError("logit clip must lie in (0, 0.5)");
    if (n_prime < 2) throw ConfigError("n' must be >= 2");
    if (influence.enabled && !(influence.keep_fraction > 0.0 && influence.keep_fraction <= 1.0))
      throw ConfigError("keep fraction must lie in (0, 1]");
    if (scale_schedule.empty()) throw ConfigError("scale schedule is empty");
  }

  /// Name used in reports, e.g. "lime", "ce-climax-gmm", "l-climax-ros-if".
  std::string label() const {
    std::string s = to_string(method);
    if (balancer != Balancer::None) s += std::string("-") + to_string(balancer);
    if (influence.enabled) s += "-if";
    return s;
  }
};

/// Inverse of ExplainConfig::label applied to a default config.
inline ExplainConfig parse_method_label(const std::string& label) {
  ExplainConfig cfg;
  std::string rest = label;
  auto strip_suffix = [&](const std::string& suf) {
    if (rest.size() > suf.size() && rest.compare(rest.size() - suf.size(), suf.size(), suf) == 0) {
      rest.erase(rest.size() - suf.size());
      return true;
    }
    return false;
  };
  cfg.influence.enabled = strip_suffix("-if");
  if (strip_suffix("-gmm")) cfg.balancer = Balancer::Gmm;
  else if (strip_suffix("-ros")) cfg.balancer = Balancer::Ros;
  cfg.method = parse_method(rest);
  return cfg;
}

struct ExplainRun {
  Explanation explanation;
  SurrogateSet surrogate;  // the set the explainer was fitted on
};

/// End-to-end local explanation of model(x):
/// sample a neighborhood (widening it until the black box shows at least two
/// classes), rebalance, optionally subsample by influence, pick k features
/// by forward selection and fit the chosen explainer on them.
inline ExplainRun explain_run(const Vector& x, const ProbabilityModel& model, const FeatureStats& stats,
                              const ExplainConfig& cfg) {
  const Index d = x.size();
  cfg.validate(d);
  if (stats.size() != d) throw DimensionError("feature stats do not match the index sample");

  const Matrix x_row = x.transpose();
  const int target = static_cast<int>(argmax_first(model.predict_proba(x_row).row(0)));

  KernelConfig kernel;
  kernel.metric = cfg.metric;
  kernel.width = cfg.kernel_width > 0 ? cfg.kernel_width : default_kernel_width(d);
  kernel.feature_scale = Standardizer::from_stats(stats).scale;

  // The LIME baseline samples once at unit scale, as LIME does.
  const bool needs_contrast = cfg.method != Method::Lime || cfg.balancer != Balancer::None || cfg.influence.enabled;
  const std::size_t attempts = needs_contrast ? cfg.scale_schedule.size() : 1;
  SurrogateSet s;
  double used_scale = 0.0;
  bool contrast = false;
  for (std::size_t a = 0; a < attempts; ++a) {
    used_scale = cfg.scale_schedule[a];
    const Matrix z = perturb(x, stats, cfg.n_prime, used_scale, derive_seed(cfg.seed, 1 + a));
    s = label_with_blackbox(model, z, x, kernel);
    std::vector<int> counts = s.class_counts();
    contrast = detail::present_classes(counts) >= 2;
    if (contrast) break;
    log_debug("single-class neighborhood at scale " + format_double(used_scale) + "; widening");
  }
  if (needs_contrast && !contrast)
    throw SingleClassNeighborhood("black box returns one class over the whole scale schedule");
  for (Index j = 0; j < d; ++j)
    if (stats.zero_variance(j)) s.held_constant.push_back(j);

  SurrogateDiagnostics diag;
  diag.n_sampled = s.size();
  diag.counts_sampled = s.class_counts();
  diag.perturbation_scale = used_scale;

  switch (cfg.balancer) {
    case Balancer::None: break;
    case Balancer::Ros: s = balance_ros(s, derive_seed(cfg.seed, 100)); break;
    case Balancer::Gmm: {
      const int comps = cfg.gmm_components > 0 ? cfg.gmm_components : model.num_classes();
      s = balance_with_mixture(s, model, comps, cfg.gmm_max_iter, cfg.gmm_tol, derive_seed(cfg.seed, 101),
                               derive_seed(cfg.seed, 102), &diag.gmm);
      break;
    }
  }
  diag.n_balanced = s.size();
  diag.counts_balanced = s.class_counts();

  const Standardizer standardizer = Standardizer::from_stats(stats);
  if (cfg.influence.enabled) {
    const LocalFitState st = fit_full(s, target, cfg.influence.lambda, cfg.influence.val_fraction,
                                      derive_seed(cfg.seed, 200), standardizer);
    const Vector rho = influence_scores(st);
    const double tau = cfg.influence.temperature > 0 ? cfg.influence.temperature : default_temperature(rho);
    const Vector psi = sampling_probabilities(rho, tau);
    s = subsample_and_refit(s, st, rho, psi, cfg.influence.keep_fraction, cfg.influence.mode,
                            derive_seed(cfg.seed, 201)).first;
  }
  diag.n_final = s.size();
  diag.counts_final = s.class_counts();

  const double lambda = cfg.effective_lambda();
  const Vector response = selection_response(cfg.method, s, target, cfg.logit_eps);
  // Screening uses the fitted method's own sample weights: proximity for the
  // ridge explainers, uniform for the unweighted cross-entropy fit.
  const bool ce = cfg.method == Method::CeClimax;
  const Vector select_weights = ce ? Vector::Ones(s.size()) : s.weights;
  const std::vector<Index> selected = forward_select(standardizer.apply(s.z), response, select_weights, cfg.k,
                                                     ce ? cfg.screening_lambda : lambda);

  Explanation e;
  switch (cfg.method) {
    case Method::Lime: e = fit_lime(s, target, {lambda, true}, standardizer, selected); break;
    case Method::LClimax: e = fit_l_climax(s, target, {lambda, true}, cfg.logit_eps, standardizer, selected); break;
    case Method::CeClimax: e = fit_ce_climax(s, target, lambda, cfg.ce_budget, standardizer, selected); break;
  }
  e.balancer = cfg.balancer;
  e.influence = cfg.influence.enabled;
  e.seed = cfg.seed;
  e.surrogate = diag;
  return {std::move(e), std::move(s)};
}

inline Explanation explain(const Vector& x, const ProbabilityModel& model, const FeatureStats& stats,
                           const ExplainConfig& cfg) {
  return explain_run(x, model, stats, cfg).explanation;
}

/// The explanation document. Key order and float formatting are fixed, so
/// equal explanations serialize to equal bytes.
inline std::string to_document(const Explanation& e, const std::vector<std::string>& names = {}) {
  auto name_of = [&](Index j) {
    return static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)]
                                                      : "x" + std::to_string(j);
  };
  JsonWriter w;
  w.begin_object();
  w.field("method", to_string(e.method));
  w.field("balance", to_string(e.balancer));
  w.field("influence", e.influence);
  w.field("seed", static_cast<unsigned long long>(e.seed));
  w.field("target_class", e.target_class);
  w.key("contrast_classes").inline_array(e.contrast_classes);
  w.key("phi").inline_array(e.phi);
  w.field("intercept", e.intercept);
  w.key("top_features").begin_array();
  for (const FeatureScore& f : e.top_features) {
    w.begin_object();
    w.field("index", static_cast<long long>(f.index));
    w.field("name", name_of(f.index));
    w.field("score", f.score);
    w.end_object();
  }
  w.end_array();
  w.key("diagnostics").begin_object();
  w.field("perturbation_scale", e.surrogate.perturbation_scale);
  w.field("n_sampled", static_cast<long long>(e.surrogate.n_sampled));
  w.field("n_balanced", static_cast<long long>(e.surrogate.n_balanced));
  w.field("n_final", static_cast<long long>(e.surrogate.n_final));
  w.key("class_counts_sampled").inline_array(e.surrogate.counts_sampled);
  w.key("class_counts_balanced").inline_array(e.surrogate.counts_balanced);
  w.key("class_counts_final").inline_array(e.surrogate.counts_final);
  w.field("gmm_candidates", e.surrogate.gmm.candidates);
  w.field("gmm_accepted", e.surrogate.gmm.accepted);
  w.field("gmm_ros_fallback", e.surrogate.gmm.ros_fallback);
  w.field("fit_loss", e.fit.loss);
  w.field("fit_iterations", e.fit.iterations);
  w.field("fit_converged", e.fit.converged);
  w.end_object();
  w.end_object();
  return w.str() + "\n";
}

}  // namespace climax

#endif  // CLIMAX_PIPELINE_HPP
