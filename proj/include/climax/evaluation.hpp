#ifndef CLIMAX_EVALUATION_HPP
#define CLIMAX_EVALUATION_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "climax/common.hpp"
#include "climax/errors.hpp"
#include "climax/json_writer.hpp"
#include "climax/pipeline.hpp"

namespace climax {

/// |a n b| and |a u b| for two feature-index sets (duplicates ignored).
inline std::pair<long, long> jaccard_counts(std::vector<Index> a, std::vector<Index> b) {
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  std::vector<Index> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  const auto inter = static_cast<long>(common.size());
  return {inter, static_cast<long>(a.size() + b.size()) - inter};
}

inline double jaccard(const std::vector<Index>& a, const std::vector<Index>& b) {
  const auto [inter, uni] = jaccard_counts(a, b);
  if (uni == 0) throw ConfigError("jaccard of two empty sets is undefined");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Mean Jaccard over all unordered pairs; NaN when fewer than two sets.
inline double mean_pairwise_jaccard(const std::vector<std::vector<Index>>& sets, long* pairs = nullptr) {
  double sum = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < sets.size(); ++i)
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      sum += jaccard(sets[i], sets[j]);
      ++count;
    }
  if (pairs) *pairs = count;
  return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
}

struct StabilityCell {
  std::string method;
  Index n_prime = 0;
  Index index_id = 0;  // row of the dataset used as index sample
  std::vector<std::vector<Index>> top_sets;
  long pairs = 0;
  int failures = 0;
  double mean_jaccard = std::numeric_limits<double>::quiet_NaN();

  bool complete(int repeats) const { return failures == 0 && static_cast<int>(top_sets.size()) == repeats; }
};

struct StabilitySummary {
  std::string method;
  Index n_prime = 0;
  double mean_jaccard = std::numeric_limits<double>::quiet_NaN();  // over index samples with a value
  int cells = 0;
  int incomplete = 0;
};

struct StabilityReport {
  std::string dataset;
  int repeats = 0;
  std::uint64_t master_seed = 0;
  std::vector<StabilityCell> cells;  // method-major, then n', then index sample

  std::vector<StabilitySummary> summary() const {
    std::vector<StabilitySummary> out;
    for (const StabilityCell& c : cells) {
      auto it = std::find_if(out.begin(), out.end(), [&](const StabilitySummary& s) {
        return s.method == c.method && s.n_prime == c.n_prime;
      });
      if (it == out.end()) {
        out.push_back({c.method, c.n_prime, 0.0, 0, 0});
        it = out.end() - 1;
      }
      ++it->cells;
      if (!c.complete(repeats)) ++it->incomplete;
    }
    for (StabilitySummary& s : out) {
      double sum = 0.0;
      int n = 0;
      for (const StabilityCell& c : cells)
        if (c.method == s.method && c.n_prime == s.n_prime && !std::isnan(c.mean_jaccard)) {
          sum += c.mean_jaccard;
          ++n;
        }
      s.mean_jaccard = n ? sum / n : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
  }

  /// Grand mean over all n' for one method.
  double method_mean(const std::string& method) const {
    double sum = 0.0;
    int n = 0;
    for (const StabilitySummary& s : summary())
      if (s.method == method && !std::isnan(s.mean_jaccard)) {
        sum += s.mean_jaccard;
        ++n;
      }
    return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
  }
};

/// Returns the top-k feature set of one explanation run.
using TopKExplainer = std::function<std::vector<Index>(const Vector& x, const ExplainConfig& cfg)>;

/// Seed of repeat r for (method m, n' slot, index sample).
inline std::uint64_t repeat_seed(std::uint64_t master, std::size_t method, std::size_t grid, Index index_id, int r) {
  std::uint64_t s = derive_seed(master, 0x57ab1e);
  s = derive_seed(s, method);
  s = derive_seed(s, grid);
  s = derive_seed(s, static_cast<std::uint64_t>(index_id));
  return derive_seed(s, static_cast<std::uint64_t>(r));
}

/// Draws `count` distinct rows from `pool` with the master seed.
inline std::vector<Index> draw_index_samples(const std::vector<Index>& pool, int count, std::uint64_t master_seed) {
  if (count < 1 || static_cast<std::size_t>(count) > pool.size())
    throw ConfigError("index-sample count must lie in [1, pool size]");
  std::vector<Index> p = pool;
  Rng rng(derive_seed(master_seed, 0x1d5));
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), p.size() - 1);
    std::swap(p[static_cast<std::size_t>(i)], p[pick(rng)]);
  }
  p.resize(static_cast<std::size_t>(count));
  return p;
}

/// Repeated-explanation stability grid. Every (method, n', index sample)
/// cell runs `repeats` explanations with distinct derived seeds and averages
/// the Jaccard index of their top-k sets over all pairs. Failed runs are
/// dropped and counted. Cells may run on `jobs` threads; results do not
/// depend on the thread count.
inline StabilityReport stability_experiment(const std::string& dataset, const Matrix& data,
                                            const std::vector<Index>& index_pool,
                                            const std::vector<ExplainConfig>& methods,
                                            const std::vector<Index>& n_prime_grid, int repeats,
                                            int index_count, std::uint64_t master_seed,
                                            const TopKExplainer& explainer, int jobs = 1) {
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  StabilityReport report;
  report.dataset = dataset;
  report.repeats = repeats;
  report.master_seed = master_seed;
  const std::vector<Index> samples = draw_index_samples(index_pool, index_count, master_seed);

  struct Task {
    std::size_t m, g;
    Index idx;
  };
  std::vector<Task> tasks;
  for (std::size_t m = 0; m < methods.size(); ++m)
    for (std::size_t g = 0; g < n_prime_grid.size(); ++g)
      for (Index idx : samples) {
        tasks.push_back({m, g, idx});
        StabilityCell cell;
        cell.method = methods[m].label();
        cell.n_prime = n_prime_grid[g];
        cell.index_id = idx;
        report.cells.push_back(std::move(cell));
      }

  auto run = [&](std::size_t t) {
    const Task& task = tasks[t];
    StabilityCell& cell = report.cells[t];
    const Vector x = data.row(task.idx).transpose();
    for (int r = 0; r < repeats; ++r) {
      ExplainConfig cfg = methods[task.m];
      cfg.n_prime = n_prime_grid[task.g];
      cfg.seed = repeat_seed(master_seed, task.m, task.g, task.idx, r);
      try {
        cell.top_sets.push_back(explainer(x, cfg));
      } catch (const Error& e) {
        ++cell.failures;
        log_warn("explanation failed (" + cell.method + ", n'=" + std::to_string(cell.n_prime) +
                 ", index " + std::to_string(task.idx) + "): " + e.what());
      }
    }
    cell.mean_jaccard = mean_pairwise_jaccard(cell.top_sets, &cell.pairs);
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) run(t);
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& th : pool) th.join();
  return report;
}

/// Same grid, explaining with the full pipeline against `model`.
inline StabilityReport stability_experiment(const std::string& dataset, const Matrix& data,
                                            const std::vector<Index>& index_pool, const ProbabilityModel& model,
                                            const FeatureStats& stats, const std::vector<ExplainConfig>& methods,
                                            const std::vector<Index>& n_prime_grid, int repeats, int index_count,
                                            std::uint64_t master_seed, int jobs = 1) {
  const TopKExplainer pipeline = [&](const Vector& x, const ExplainConfig& cfg) {
    return explain(x, model, stats, cfg).top_indices();
  };
  return stability_experiment(dataset, data, index_pool, methods, n_prime_grid, repeats, index_count,
                              master_seed, pipeline, jobs);
}

/// CSV: one row per cell, then a summary block per (method, n').
inline std::string to_csv(const StabilityReport& r) {
  std::string out = "dataset,method,n_prime,index_id,mean_jaccard\n";
  auto fmt = [](double v) { return std::isnan(v) ? std::string("NaN") : format_double(v); };
  for (const StabilityCell& c : r.cells)
    out += r.dataset + "," + c.method + "," + std::to_string(c.n_prime) + "," + std::to_string(c.index_id) + "," +
           fmt(c.mean_jaccard) + "\n";
  out += "\n# summary\ndataset,method,n_prime,mean_jaccard,cells,incomplete\n";
  for (const StabilitySummary& s : r.summary())
    out += r.dataset + "," + s.method + "," + std::to_string(s.n_prime) + "," + fmt(s.mean_jaccard) + "," +
           std::to_string(s.cells) + "," + std::to_string(s.incomplete) + "\n";
  return out;
}

inline std::string to_document(const StabilityReport& r) {
  JsonWriter w;
  w.begin_object();
  w.field("dataset", r.dataset);
  w.field("repeats", r.repeats);
  w.field("master_seed", static_cast<unsigned long long>(r.master_seed));
  w.key("cells").begin_array();
  for (const StabilityCell& c : r.cells) {
    w.begin_object();
    w.field("method", c.method);
    w.field("n_prime", static_cast<long long>(c.n_prime));
    w.field("index_id", static_cast<long long>(c.index_id));
    w.field("mean_jaccard", c.mean_jaccard);
    w.field("pairs", c.pairs);
    w.field("failures", c.failures);
    w.key("top_sets").begin_array();
    for (const auto& set : c.top_sets) {
      std::vector<int> ints(set.begin(), set.end());
      w.inline_array(ints);
    }
    w.end_array();
    w.end_object();
  }
  w.end_array();
  w.key("summary").begin_array();
  for (const StabilitySummary& s : r.summary()) {
    w.begin_object();
    w.field("method", s.method);
    w.field("n_prime", static_cast<long long>(s.n_prime));
    w.field("mean_jaccard", s.mean_jaccard);
    w.field("cells", s.cells);
    w.field("incomplete", s.incomplete);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str() + "\n";
}

struct FidelityReport {
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  // Binary split: index 0 = complement classes, 1 = target class.
  long tp = 0, fp = 0, fn = 0, tn = 0;
  std::vector<int> counts_sampled, counts_balanced, counts_final;
};

/// Macro precision/recall over the two classes of a binary confusion matrix
/// (positive = target). A class that is never predicted has precision 0.
inline FidelityReport fidelity_from_confusion(long tp, long fp, long fn, long tn) {
  auto ratio = [](long a, long b) { return b > 0 ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
  FidelityReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.tn = tn;
  r.macro_precision = (ratio(tp, tp + fp) + ratio(tn, tn + fn)) / 2.0;
  r.macro_recall = (ratio(tp, tp + fn) + ratio(tn, tn + fp)) / 2.0;
  return r;
}

/// Agreement between the explainer's hard decisions, sigmoid(phi.u + b) >= 0.5,
/// and the black-box labels on the surrogate set, both collapsed to target
/// versus the rest.
inline FidelityReport fidelity_report(const SurrogateSet& s, const Explanation& e) {
  if (e.phi.size() != s.dims()) throw DimensionError("explanation and surrogate set differ in width");
  const Matrix u = e.standardizer.apply(s.z);
  long tp = 0, fp = 0, fn = 0, tn = 0;
  for (Index i = 0; i < s.size(); ++i) {
    const bool predicted = sigmoid(u.row(i).dot(e.phi) + e.intercept) >= 0.5;
    const bool actual = s.hard_labels[static_cast<std::size_t>(i)] == e.target_class;
    if (predicted && actual) ++tp;
    else if (predicted) ++fp;
    else if (actual) ++fn;
    else ++tn;
  }
  FidelityReport r = fidelity_from_confusion(tp, fp, fn, tn);
  r.counts_sampled = e.surrogate.counts_sampled;
  r.counts_balanced = e.surrogate.counts_balanced;
  r.counts_final = e.surrogate.counts_final;
  return r;
}

}  // namespace climax

#endif  // CLIMAX_EVALUATION_HPP
