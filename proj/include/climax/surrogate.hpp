#ifndef CLIMAX_SURROGATE_HPP
#define CLIMAX_SURROGATE_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "climax/blackbox.hpp"
#include "climax/common.hpp"
#include "climax/errors.hpp"
#include "climax/log.hpp"

namespace climax {

/// Per-feature location and scale of the training distribution.
struct FeatureStats {
  Vector mean;
  Vector stddev;

  Index size() const { return mean.size(); }
  bool zero_variance(Index j) const { return !(stddev(j) > 0.0); }

  static FeatureStats from_data(const Matrix& data) {
    FeatureStats s;
    s.mean = data.colwise().mean().transpose();
    s.stddev = Vector::Zero(data.cols());
    if (data.rows() > 1)
      for (Index j = 0; j < data.cols(); ++j)
        s.stddev(j) = std::sqrt((data.col(j).array() - s.mean(j)).square().sum() /
                                static_cast<double>(data.rows() - 1));
    return s;
  }
};

enum class DistanceMetric { Euclidean, Cosine };

struct KernelConfig {
  DistanceMetric metric = DistanceMetric::Euclidean;
  double width = 1.0;
  // Per-feature divisor applied before measuring distance; empty means raw
  // feature units. The explain pipeline sets it to the training stddev.
  Vector feature_scale;
};

/// LIME's customary width, 0.75 * sqrt(d).
inline double default_kernel_width(Index d) { return 0.75 * std::sqrt(static_cast<double>(d)); }

inline double kernel_distance(const Vector& x, const Eigen::Ref<const Eigen::RowVectorXd>& z,
                              const KernelConfig& kernel) {
  const Index d = x.size();
  auto scaled = [&](double v, Index j) {
    if (kernel.feature_scale.size() == 0) return v;
    const double s = kernel.feature_scale(j);
    return s > 0 ? v / s : v;
  };
  if (kernel.metric == DistanceMetric::Euclidean) {
    double sq = 0.0;
    for (Index j = 0; j < d; ++j) {
      const double diff = scaled(z(j) - x(j), j);
      sq += diff * diff;
    }
    return std::sqrt(sq);
  }
  double dot = 0.0, nx = 0.0, nz = 0.0;
  for (Index j = 0; j < d; ++j) {
    const double a = scaled(x(j), j);
    const double b = scaled(z(j), j);
    dot += a * b;
    nx += a * a;
    nz += b * b;
  }
  if (nx == 0.0 || nz == 0.0) {
    log_debug("cosine distance with a zero vector; using 1");
    return 1.0;
  }
  return 1.0 - dot / std::sqrt(nx * nz);
}

/// exp(-dist(x, z_i)^2 / w^2) for every row z_i of Z.
inline Vector proximity_weights(const Vector& x, const Matrix& z, const KernelConfig& kernel) {
  if (z.rows() == 0) throw ConfigError("proximity_weights needs a nonempty neighborhood");
  if (!(kernel.width > 0.0)) throw ConfigError("kernel width must be positive");
  if (z.cols() != x.size()) throw DimensionError("neighborhood and index sample differ in width");
  Vector w(z.rows());
  const double w2 = kernel.width * kernel.width;
  for (Index i = 0; i < z.rows(); ++i) {
    const double dist = kernel_distance(x, z.row(i), kernel);
    w(i) = std::exp(-dist * dist / w2);
  }
  return w;
}

/// Gaussian neighborhood of x: x_j + scale * stddev_j * N(0,1). Row 0 is x
/// itself; features with zero spread stay at x_j.
inline Matrix perturb(const Vector& x, const FeatureStats& stats, Index n_prime, double scale,
                      std::uint64_t seed) {
  if (n_prime < 1) throw ConfigError("n' must be >= 1");
  if (!(scale > 0.0)) throw ConfigError("perturbation scale must be positive");
  if (stats.size() != x.size()) throw DimensionError("feature stats do not match the index sample");
  const Index d = x.size();
  Matrix z(n_prime, d);
  z.row(0) = x.transpose();
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Index i = 1; i < n_prime; ++i)
    for (Index j = 0; j < d; ++j) {
      const double g = gauss(rng);
      z(i, j) = stats.zero_variance(j) ? x(j) : x(j) + scale * stats.stddev(j) * g;
    }
  return z;
}

enum class Provenance { Bootstrap, RosDuplicate, GmmSample };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::Bootstrap: return "bootstrap";
    case Provenance::RosDuplicate: return "ros-duplicate";
    case Provenance::GmmSample: return "gmm-sample";
  }
  return "?";
}

/// Perturbed instances together with everything the black box said about
/// them. All per-row arrays have the same length.
struct SurrogateSet {
  Matrix z;
  Matrix probs;
  std::vector<int> hard_labels;
  Vector weights;
  Vector index_sample;
  std::vector<Provenance> provenance;
  KernelConfig kernel;
  std::vector<Index> held_constant;  // features with zero spread

  Index size() const { return z.rows(); }
  Index dims() const { return z.cols(); }
  int num_classes() const { return static_cast<int>(probs.cols()); }
  std::vector<int> class_counts() const { return climax::class_counts(hard_labels, num_classes()); }

  /// Empty string when every documented invariant holds, else the first
  /// violation found.
  std::string consistency_error(double weight_tol = 1e-12) const {
    const auto n = static_cast<std::size_t>(z.rows());
    if (static_cast<std::size_t>(probs.rows()) != n || hard_labels.size() != n ||
        static_cast<std::size_t>(weights.size()) != n || provenance.size() != n)
      return "array lengths differ";
    for (Index i = 0; i < z.rows(); ++i) {
      const double sum = probs.row(i).sum();
      if (std::abs(sum - 1.0) > 1e-9 || probs.row(i).minCoeff() < 0.0) return "row off the simplex";
      if (hard_labels[static_cast<std::size_t>(i)] != static_cast<int>(argmax_first(probs.row(i))))
        return "hard label is not the argmax in row " + std::to_string(i);
      if (!(weights(i) > 0.0) || weights(i) > 1.0) return "weight outside (0,1]";
    }
    if (kernel.width > 0 && z.rows() > 0) {
      const Vector expect = proximity_weights(index_sample, z, kernel);
      if ((expect - weights).cwiseAbs().maxCoeff() > weight_tol) return "weights disagree with the kernel";
    }
    return {};
  }

  void append_row(const Eigen::Ref<const Eigen::RowVectorXd>& zi,
                  const Eigen::Ref<const Eigen::RowVectorXd>& pi, int label, double weight,
                  Provenance prov) {
    const Index n = z.rows();
    z.conservativeResize(n + 1, Eigen::NoChange);
    z.row(n) = zi;
    probs.conservativeResize(n + 1, Eigen::NoChange);
    probs.row(n) = pi;
    weights.conservativeResize(n + 1);
    weights(n) = weight;
    hard_labels.push_back(label);
    provenance.push_back(prov);
  }

  /// Rows listed in `rows`, in that order.
  SurrogateSet subset(const std::vector<Index>& rows) const {
    SurrogateSet out;
    const auto m = static_cast<Index>(rows.size());
    out.z.resize(m, z.cols());
    out.probs.resize(m, probs.cols());
    out.weights.resize(m);
    for (Index k = 0; k < m; ++k) {
      const Index r = rows[static_cast<std::size_t>(k)];
      out.z.row(k) = z.row(r);
      out.probs.row(k) = probs.row(r);
      out.weights(k) = weights(r);
      out.hard_labels.push_back(hard_labels[static_cast<std::size_t>(r)]);
      out.provenance.push_back(provenance[static_cast<std::size_t>(r)]);
    }
    out.index_sample = index_sample;
    out.kernel = kernel;
    out.held_constant = held_constant;
    return out;
  }
};

/// Queries the black box on Z and assembles the surrogate set around x.
inline SurrogateSet label_with_blackbox(const ProbabilityModel& model, const Matrix& z,
                                        const Vector& x, const KernelConfig& kernel) {
  if (model.num_classes() < 2) throw ConfigError("model must have >= 2 classes");
  SurrogateSet s;
  s.z = z;
  s.probs = model.predict_proba(z);
  s.hard_labels.resize(static_cast<std::size_t>(z.rows()));
  for (Index i = 0; i < z.rows(); ++i)
    s.hard_labels[static_cast<std::size_t>(i)] = static_cast<int>(argmax_first(s.probs.row(i)));
  s.weights = proximity_weights(x, z, kernel);
  s.index_sample = x;
  s.provenance.assign(static_cast<std::size_t>(z.rows()), Provenance::Bootstrap);
  s.kernel = kernel;
  return s;
}

namespace detail {

inline int present_classes(const std::vector<int>& counts) {
  return static_cast<int>(std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }));
}

inline std::vector<Index> rows_of_class(const SurrogateSet& s, int c) {
  std::vector<Index> rows;
  for (std::size_t i = 0; i < s.hard_labels.size(); ++i)
    if (s.hard_labels[i] == c) rows.push_back(static_cast<Index>(i));
  return rows;
}

inline void duplicate_rows(SurrogateSet& s, const std::vector<Index>& pool, int count, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (int k = 0; k < count; ++k) {
    const Index r = pool[pick(rng)];
    const Eigen::RowVectorXd zr = s.z.row(r);
    const Eigen::RowVectorXd pr = s.probs.row(r);
    s.append_row(zr, pr, s.hard_labels[static_cast<std::size_t>(r)], s.weights(r),
                 Provenance::RosDuplicate);
  }
}

}  // namespace detail

/// Random oversampling: every present class is topped up to the majority
/// count by duplicating its own rows uniformly with replacement.
inline SurrogateSet balance_ros(const SurrogateSet& s, std::uint64_t seed) {
  const std::vector<int> counts = s.class_counts();
  if (detail::present_classes(counts) < 2)
    throw SingleClassNeighborhood("only one class among the surrogate labels; widen the neighborhood");
  const int majority = *std::max_element(counts.begin(), counts.end());
  SurrogateSet out = s;
  for (int c = 0; c < static_cast<int>(counts.size()); ++c) {
    const int have = counts[static_cast<std::size_t>(c)];
    if (have == 0 || have == majority) continue;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    detail::duplicate_rows(out, detail::rows_of_class(s, c), majority - have, rng);
  }
  return out;
}

/// Mixture of axis-aligned Gaussians.
struct GmmModel {
  int components = 0;
  Vector mix_weights;
  Matrix means;      // components x d
  Matrix variances;  // components x d
  std::vector<int> component_labels;
  std::vector<double> log_likelihood_trace;
  // Features with zero spread are excluded from the density and sampled as
  // their constant value.
  std::vector<bool> active;
  int reseeds = 0;
  bool converged = false;

  /// n x K matrix of log(w_k N(z_i | k)).
  Matrix joint_log_density(const Matrix& z) const {
    Matrix out(z.rows(), components);
    constexpr double kLog2Pi = 1.8378770664093454836;
    for (int k = 0; k < components; ++k) {
      double norm = std::log(mix_weights(k));
      for (Index j = 0; j < z.cols(); ++j)
        if (active[static_cast<std::size_t>(j)]) norm -= 0.5 * (kLog2Pi + std::log(variances(k, j)));
      for (Index i = 0; i < z.rows(); ++i) {
        double q = 0.0;
        for (Index j = 0; j < z.cols(); ++j) {
          if (!active[static_cast<std::size_t>(j)]) continue;
          const double diff = z(i, j) - means(k, j);
          q += diff * diff / variances(k, j);
        }
        out(i, k) = norm - 0.5 * q;
      }
    }
    return out;
  }

  /// Responsibilities (rows sum to one) and the total log-likelihood.
  Matrix responsibilities(const Matrix& z, double* log_likelihood = nullptr) const {
    Matrix r = joint_log_density(z);
    double ll = 0.0;
    for (Index i = 0; i < r.rows(); ++i) {
      const double m = r.row(i).maxCoeff();
      const double lse = m + std::log((r.row(i).array() - m).exp().sum());
      r.row(i) = (r.row(i).array() - lse).exp();
      ll += lse;
    }
    if (log_likelihood) *log_likelihood = ll;
    return r;
  }

  double log_likelihood(const Matrix& z) const {
    double ll = 0.0;
    responsibilities(z, &ll);
    return ll;
  }

  Eigen::RowVectorXd sample_component(int k, const Vector& fixed, Rng& rng) const {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::RowVectorXd row(means.cols());
    for (Index j = 0; j < means.cols(); ++j)
      row(j) = active[static_cast<std::size_t>(j)] ? means(k, j) + std::sqrt(variances(k, j)) * gauss(rng)
                                                   : fixed(j);
    return row;
  }
};

namespace detail {

// k-means++ seeding on standardized coordinates.
inline Matrix kmeanspp_centers(const Matrix& z, int k, const Vector& scale, Rng& rng) {
  const Index n = z.rows();
  Matrix centers(k, z.cols());
  std::uniform_int_distribution<Index> first(0, n - 1);
  centers.row(0) = z.row(first(rng));
  Vector d2 = Vector::Constant(n, std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    for (Index i = 0; i < n; ++i) {
      const double dist = ((z.row(i) - centers.row(c - 1)).array() / scale.transpose().array()).square().sum();
      d2(i) = std::min(d2(i), dist);
    }
    const double total = d2.sum();
    Index chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng), acc = 0.0;
      chosen = n - 1;
      for (Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc >= target && d2(i) > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = first(rng);
    }
    centers.row(c) = z.row(chosen);
  }
  return centers;
}

inline std::vector<int> argmax_assignment(const Matrix& resp) {
  std::vector<int> a(static_cast<std::size_t>(resp.rows()));
  for (Index i = 0; i < resp.rows(); ++i) a[static_cast<std::size_t>(i)] = static_cast<int>(argmax_first(resp.row(i)));
  return a;
}

// Runs EM from the current parameters of `g`, recording a fresh trace.
inline void run_em(GmmModel& g, const Matrix& z, const Vector& floor, int max_iter, double tol) {
  g.log_likelihood_trace.clear();
  g.converged = false;
  const Index n = z.rows();
  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it <= max_iter; ++it) {
    double ll = 0.0;
    const Matrix r = g.responsibilities(z, &ll);
    g.log_likelihood_trace.push_back(ll);
    if (it > 0 && ll - prev < tol) {
      g.converged = true;
      break;
    }
    if (it == max_iter) break;
    prev = ll;
    for (int k = 0; k < g.components; ++k) {
      const double nk = r.col(k).sum();
      if (nk < 1e-300) {
        g.mix_weights(k) = 1e-300;
        continue;
      }
      g.mix_weights(k) = nk / static_cast<double>(n);
      const Eigen::RowVectorXd mu = (r.col(k).transpose() * z) / nk;
      g.means.row(k) = mu;
      for (Index j = 0; j < z.cols(); ++j) {
        const double v = (r.col(k).array() * (z.col(j).array() - mu(j)).square()).sum() / nk;
        g.variances(k, j) = std::max(v, floor(j));
      }
    }
    g.mix_weights /= g.mix_weights.sum();
  }
}

}  // namespace detail

/// Diagonal-covariance EM with k-means++ initialization. Each component is
/// labeled with the majority black-box label among the rows it claims.
inline GmmModel fit_gmm(const SurrogateSet& s, int k, int max_iter = 200, double tol = 1e-6,
                        std::uint64_t seed = 0) {
  const Matrix& z = s.z;
  const Index n = z.rows();
  const Index d = z.cols();
  if (k < 1 || n < k) throw ConfigError("fit_gmm needs n' >= K >= 1");

  const Eigen::RowVectorXd mean = z.colwise().mean();
  Vector var(d);
  for (Index j = 0; j < d; ++j) var(j) = (z.col(j).array() - mean(j)).square().sum() / static_cast<double>(n);

  GmmModel g;
  g.components = k;
  g.active.resize(static_cast<std::size_t>(d));
  Vector scale(d), floor(d);
  for (Index j = 0; j < d; ++j) {
    g.active[static_cast<std::size_t>(j)] = var(j) > 0.0;
    scale(j) = var(j) > 0.0 ? std::sqrt(var(j)) : 1.0;
    floor(j) = var(j) > 0.0 ? 1e-6 * var(j) : 1.0;
  }
  Rng rng(seed);
  g.means = detail::kmeanspp_centers(z, k, scale, rng);
  g.variances.resize(k, d);
  for (int c = 0; c < k; ++c) g.variances.row(c) = var.cwiseMax(floor).transpose();
  g.mix_weights = Vector::Constant(k, 1.0 / k);

  detail::run_em(g, z, floor, max_iter, tol);
  std::vector<int> assign = detail::argmax_assignment(g.responsibilities(z));

  auto empty_components = [&] {
    std::vector<int> claimed(static_cast<std::size_t>(k), 0);
    for (int a : assign) ++claimed[static_cast<std::size_t>(a)];
    std::vector<int> empty;
    for (int c = 0; c < k; ++c)
      if (claimed[static_cast<std::size_t>(c)] == 0) empty.push_back(c);
    return empty;
  };

  std::vector<int> empty = empty_components();
  if (!empty.empty()) {
    // Re-seed each empty component on the worst-explained row, then rerun.
    ++g.reseeds;
    for (int c : empty) {
      const Matrix joint = g.joint_log_density(z);
      Index worst = 0;
      double worst_ll = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < n; ++i) {
        const double m = joint.row(i).maxCoeff();
        const double lse = m + std::log((joint.row(i).array() - m).exp().sum());
        if (lse < worst_ll) {
          worst_ll = lse;
          worst = i;
        }
      }
      g.means.row(c) = z.row(worst);
      g.variances.row(c) = var.cwiseMax(floor).transpose();
      g.mix_weights(c) = 1.0 / k;
    }
    g.mix_weights /= g.mix_weights.sum();
    detail::run_em(g, z, floor, max_iter, tol);
    assign = detail::argmax_assignment(g.responsibilities(z));
    if (!empty_components().empty())
      throw DegenerateComponent("a mixture component claims no rows after re-seeding");
  }

  const int classes = s.num_classes();
  g.component_labels.assign(static_cast<std::size_t>(k), 0);
  for (int c = 0; c < k; ++c) {
    std::vector<int> votes(static_cast<std::size_t>(classes), 0);
    for (Index i = 0; i < n; ++i)
      if (assign[static_cast<std::size_t>(i)] == c) ++votes[static_cast<std::size_t>(s.hard_labels[static_cast<std::size_t>(i)])];
    g.component_labels[static_cast<std::size_t>(c)] =
        static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
  return g;
}

struct GmmSamplingStats {
  long candidates = 0;       // draws sent to the black box
  long on_target = 0;        // draws whose black-box label matched the intended class
  long accepted = 0;         // draws kept in the balanced set
  long ros_fallback = 0;     // rows filled by duplication instead
};

/// Tops up minority classes with draws from mixture components labeled with
/// that class. Draws are labeled by the black box and kept only when the
/// label matches; the rejection budget is 10x the deficit, and whatever is
/// still missing is filled by random oversampling.
inline SurrogateSet balance_gmm(const SurrogateSet& s, const ProbabilityModel& model,
                                const GmmModel& gmm, std::uint64_t seed,
                                GmmSamplingStats* stats = nullptr) {
  const std::vector<int> counts = s.class_counts();
  if (detail::present_classes(counts) < 2)
    throw SingleClassNeighborhood("only one class among the surrogate labels; widen the neighborhood");
  const int majority = *std::max_element(counts.begin(), counts.end());
  GmmSamplingStats local;
  GmmSamplingStats& st = stats ? *stats : local;
  SurrogateSet out = s;

  for (int c = 0; c < static_cast<int>(counts.size()); ++c) {
    const int have = counts[static_cast<std::size_t>(c)];
    if (have == 0 || have == majority) continue;
    const int deficit = majority - have;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));

    std::vector<int> comps;
    std::vector<double> comp_w;
    for (int k = 0; k < gmm.components; ++k)
      if (gmm.component_labels[static_cast<std::size_t>(k)] == c) {
        comps.push_back(k);
        comp_w.push_back(gmm.mix_weights(k));
      }

    int accepted = 0;
    if (comps.empty()) {
      log_debug("no mixture component labeled with class " + std::to_string(c) + "; oversampling instead");
    } else {
      std::discrete_distribution<int> pick(comp_w.begin(), comp_w.end());
      const long budget = 10L * deficit;
      long drawn = 0;
      while (accepted < deficit && drawn < budget) {
        const long batch = std::min<long>(budget - drawn, std::max<long>(deficit - accepted, 16));
        Matrix cand(batch, s.dims());
        for (long b = 0; b < batch; ++b)
          cand.row(b) = gmm.sample_component(comps[static_cast<std::size_t>(pick(rng))], s.index_sample, rng);
        drawn += batch;
        st.candidates += batch;
        const Matrix probs = model.predict_proba(cand);
        const Vector w = proximity_weights(s.index_sample, cand, s.kernel);
        for (long b = 0; b < batch; ++b) {
          const int label = static_cast<int>(argmax_first(probs.row(b)));
          if (label != c) continue;
          ++st.on_target;
          if (accepted < deficit) {
            out.append_row(cand.row(b), probs.row(b), label, w(b), Provenance::GmmSample);
            ++accepted;
            ++st.accepted;
          }
        }
      }
    }
    if (accepted < deficit) {
      detail::duplicate_rows(out, detail::rows_of_class(s, c), deficit - accepted, rng);
      st.ros_fallback += deficit - accepted;
    }
  }
  return out;
}

/// Fits the mixture and tops up with it. When the mixture cannot be fitted
/// because a component stays empty, every missing row comes from random
/// oversampling instead, so the output is balanced either way.
inline SurrogateSet balance_with_mixture(const SurrogateSet& s, const ProbabilityModel& model, int components,
                                         int max_iter, double tol, std::uint64_t fit_seed,
                                         std::uint64_t sample_seed, GmmSamplingStats* stats = nullptr) {
  GmmModel gmm;
  try {
    gmm = fit_gmm(s, components, max_iter, tol, fit_seed);
  } catch (const DegenerateComponent& e) {
    log_warn(std::string(e.what()) + "; oversampling instead");
    SurrogateSet out = balance_ros(s, sample_seed);
    if (stats) stats->ros_fallback += out.size() - s.size();
    return out;
  }
  return balance_gmm(s, model, gmm, sample_seed, stats);
}

}  // namespace climax

#endif  // CLIMAX_SURROGATE_HPP
