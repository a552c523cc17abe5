// climax: command-line front end.
//
//   climax explain   --data F --label L --index I [...]
//   climax stability --data F --label L --out DIR [...]
//   climax host      --data F --label L            serve the forest over stdio
//   climax model-info --data F --label L           held-out metrics of the forest

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "climax/climax.hpp"

namespace fs = std::filesystem;
using namespace climax;

namespace {

struct CommonArgs {
  std::vector<std::string> data;
  std::vector<std::string> label;
  std::uint64_t seed = 0;
  bool seed_given = false;
  double test_fraction = 0.2;
  int trees = 100;
  int depth = 8;
  std::string blackbox_cmd;
  int timeout_ms = 10000;
  std::string log_level = "warn";
};

struct ExplainArgs {
  long index = -1;
  std::string method = "ce-climax";
  std::string balance = "none";
  bool influence = false;
  double keep_fraction = 0.7;
  std::string influence_mode = "deterministic";
  long n_prime = 1000;
  int k = 5;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double kernel_width = 0.0;
  std::string metric = "euclidean";
  std::string out;
  std::string svg;
};

struct StabilityArgs {
  std::string methods = "lime,ce-climax-gmm";
  std::vector<long> n_prime{500, 1000};
  int repeats = 20;
  int index_count = 10;
  int jobs = 1;
  int k = 5;
  std::string out;
};

void add_common(CLI::App* app, CommonArgs& a, bool multi_data) {
  if (multi_data) {
    app->add_option("--data", a.data, "CSV file(s)")->required()->delimiter(',');
    app->add_option("--label", a.label, "label column per file (one value applies to all)")
        ->required()
        ->delimiter(',');
  } else {
    a.data.resize(1);
    a.label.resize(1);
    app->add_option("--data", a.data[0], "CSV file")->required();
    app->add_option("--label", a.label[0], "label column name or 0-based number")->required();
  }
  app->add_option("--seed", a.seed, "master seed (picked and printed when omitted)");
  app->add_option("--test-fraction", a.test_fraction, "held-out fraction")->capture_default_str();
  app->add_option("--trees", a.trees, "forest size")->capture_default_str();
  app->add_option("--depth", a.depth, "forest depth")->capture_default_str();
  app->add_option("--blackbox-cmd", a.blackbox_cmd, "external model host command (stdio protocol)");
  app->add_option("--timeout-ms", a.timeout_ms, "external host timeout")->capture_default_str();
  app->add_option("--log-level", a.log_level, "debug|info|warn|silent")->capture_default_str();
}

void apply_log_level(const std::string& s) {
  if (s == "debug") log_threshold() = LogLevel::Debug;
  else if (s == "info") log_threshold() = LogLevel::Info;
  else if (s == "warn") log_threshold() = LogLevel::Warn;
  else if (s == "silent") log_threshold() = LogLevel::Silent;
  else throw ConfigError("unknown log level '" + s + "'");
}

void resolve_seed(CommonArgs& a, const CLI::App* sub) {
  a.seed_given = sub->count("--seed") > 0;
  if (!a.seed_given) {
    std::random_device rd;
    a.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::cerr << "seed: " << a.seed << '\n';
  }
}

struct LoadedModel {
  TabularDataset data;
  std::unique_ptr<ProbabilityModel> model;
};

LoadedModel load(const std::string& path, const std::string& label, const CommonArgs& a) {
  LoadedModel lm;
  lm.data = ingest_csv(path, label, a.test_fraction, a.seed);
  if (!a.blackbox_cmd.empty()) {
    lm.model = std::make_unique<ExternalModel>(
        ExternalModelSpec{a.blackbox_cmd, lm.data.num_classes(), a.timeout_ms});
    if (lm.model->num_features() >= 0 && lm.model->num_features() != lm.data.dims())
      throw DimensionError("external host expects " + std::to_string(lm.model->num_features()) +
                           " features, data has " + std::to_string(lm.data.dims()));
  } else {
    ForestParams fp;
    fp.n_trees = a.trees;
    fp.max_depth = a.depth;
    lm.model = std::make_unique<ForestModel>(train_forest(lm.data.rows(lm.data.train_rows),
                                                          lm.data.labels_of(lm.data.train_rows), fp,
                                                          derive_seed(a.seed, 0xf0)));
  }
  return lm;
}

// Writes through a temporary file so a failed run never leaves a partial artifact.
void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    f << content;
    f.flush();
    if (!f) throw ConfigError("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

ExplainConfig make_config(const ExplainArgs& a, std::uint64_t seed) {
  ExplainConfig cfg;
  cfg.method = parse_method(a.method);
  cfg.balancer = parse_balancer(a.balance);
  cfg.influence.enabled = a.influence;
  cfg.influence.keep_fraction = a.keep_fraction;
  if (a.influence_mode == "deterministic") cfg.influence.mode = SubsampleMode::Deterministic;
  else if (a.influence_mode == "stochastic") cfg.influence.mode = SubsampleMode::Stochastic;
  else throw ConfigError("unknown influence mode '" + a.influence_mode + "'");
  if (a.n_prime < 2) throw ConfigError("--n-prime must be >= 2");
  cfg.n_prime = a.n_prime;
  cfg.k = a.k;
  cfg.lambda = a.lambda;
  cfg.kernel_width = a.kernel_width;
  if (a.metric == "euclidean") cfg.metric = DistanceMetric::Euclidean;
  else if (a.metric == "cosine") cfg.metric = DistanceMetric::Cosine;
  else throw ConfigError("unknown metric '" + a.metric + "'");
  cfg.seed = seed;
  return cfg;
}

int run_explain(CommonArgs& c, const ExplainArgs& a) {
  LoadedModel lm = load(c.data[0], c.label[0], c);
  const TabularDataset& ds = lm.data;
  if (a.index < 0 || a.index >= ds.size())
    throw ConfigError("--index must lie in [0, " + std::to_string(ds.size()) + ")");
  const ExplainConfig cfg = make_config(a, c.seed);
  const Vector x = ds.features.row(a.index).transpose();
  const Explanation e = explain(x, *lm.model, ds.train_stats(), cfg);
  const std::string doc = to_document(e, ds.feature_names);
  const std::string title = ds.name + " row " + std::to_string(a.index) + ": " + cfg.label() + ", class " +
                            ds.class_names[static_cast<std::size_t>(e.target_class)];
  if (!a.out.empty()) {
    write_file(fs::path(a.out) / "explanation.json", doc);
    write_file(fs::path(a.out) / "explanation.svg", svg::score_bars(e, ds.feature_names, title));
  } else {
    std::cout << doc << std::flush;
    if (!std::cout) throw ConfigError("cannot write to standard output");
  }
  if (!a.svg.empty()) write_file(a.svg, svg::score_bars(e, ds.feature_names, title));
  return 0;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

int run_stability(CommonArgs& c, const StabilityArgs& a) {
  if (c.label.size() != 1 && c.label.size() != c.data.size())
    throw ConfigError("give one --label, or one per --data file");
  std::vector<ExplainConfig> methods;
  for (const std::string& m : split_list(a.methods)) {
    ExplainConfig cfg = parse_method_label(m);
    cfg.k = a.k;
    methods.push_back(cfg);
  }
  if (methods.empty()) throw ConfigError("--methods is empty");
  std::vector<Index> grid;
  for (long n : a.n_prime) {
    if (n < 2) throw ConfigError("every --n-prime value must be >= 2");
    grid.push_back(n);
  }
  for (std::size_t f = 0; f < c.data.size(); ++f) {
    const std::string& label = c.label.size() == 1 ? c.label[0] : c.label[f];
    LoadedModel lm = load(c.data[f], label, c);
    const TabularDataset& ds = lm.data;
    const StabilityReport r = stability_experiment(ds.name, ds.features, ds.test_rows, *lm.model, ds.train_stats(),
                                                   methods, grid, a.repeats, a.index_count, c.seed, a.jobs);
    const fs::path base = fs::path(a.out) / (ds.name + "_stability");
    write_file(base.string() + ".csv", to_csv(r));
    write_file(base.string() + ".json", to_document(r));
    write_file(base.string() + ".svg", svg::stability_lines(r));
    for (const StabilitySummary& s : r.summary())
      std::cout << ds.name << ' ' << s.method << " n'=" << s.n_prime << " mean_jaccard="
                << format_double(s.mean_jaccard) << '\n';
  }
  return 0;
}

int run_host(CommonArgs& c) {
  LoadedModel lm = load(c.data[0], c.label[0], c);
  serve_stdio(*lm.model, std::cin, std::cout);
  return 0;
}

int run_model_info(CommonArgs& c) {
  LoadedModel lm = load(c.data[0], c.label[0], c);
  const TabularDataset& ds = lm.data;
  const Matrix test = ds.rows(ds.test_rows);
  const std::vector<int> truth = ds.labels_of(ds.test_rows);
  const Matrix probs = lm.model->predict_proba(test);
  std::cout << "dataset " << ds.name << ": n=" << ds.size() << " d=" << ds.dims() << " classes=" << ds.num_classes()
            << " train=" << ds.train_rows.size() << " test=" << ds.test_rows.size() << '\n';
  long correct = 0;
  for (Index i = 0; i < probs.rows(); ++i)
    if (argmax_first(probs.row(i)) == truth[static_cast<std::size_t>(i)]) ++correct;
  std::cout << "accuracy " << format_double(static_cast<double>(correct) / static_cast<double>(probs.rows())) << '\n';
  for (int cl = 0; cl < ds.num_classes(); ++cl) {
    std::vector<double> scores(static_cast<std::size_t>(probs.rows()));
    std::vector<int> pos(scores.size());
    for (Index i = 0; i < probs.rows(); ++i) {
      scores[static_cast<std::size_t>(i)] = probs(i, cl);
      pos[static_cast<std::size_t>(i)] = truth[static_cast<std::size_t>(i)] == cl;
    }
    std::cout << "auc[" << ds.class_names[static_cast<std::size_t>(cl)] << "] " << format_double(roc_auc(scores, pos))
              << '\n';
    if (ds.num_classes() == 2) break;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive local explanations for black-box classifiers"};
  app.require_subcommand(1);

  CommonArgs common;
  ExplainArgs ex;
  StabilityArgs st;

  CLI::App* explain_cmd = app.add_subcommand("explain", "explain one row of a dataset");
  add_common(explain_cmd, common, false);
  explain_cmd->add_option("--index", ex.index, "row to explain (0-based, file order)")->required();
  explain_cmd->add_option("--method", ex.method, "lime|l-climax|ce-climax")->capture_default_str();
  explain_cmd->add_option("--balance", ex.balance, "none|ros|gmm")->capture_default_str();
  explain_cmd->add_flag("--influence", ex.influence, "influence-based subsampling");
  explain_cmd->add_option("--keep-fraction", ex.keep_fraction, "kept fraction per class")->capture_default_str();
  explain_cmd->add_option("--influence-mode", ex.influence_mode, "deterministic|stochastic")->capture_default_str();
  explain_cmd->add_option("--n-prime", ex.n_prime, "surrogate sample count")->capture_default_str();
  explain_cmd->add_option("--k", ex.k, "features to report")->capture_default_str();
  explain_cmd->add_option("--lambda", ex.lambda, "ridge / L2 strength (method default when omitted)");
  explain_cmd->add_option("--kernel-width", ex.kernel_width, "kernel width (0.75 sqrt(d) when omitted)");
  explain_cmd->add_option("--metric", ex.metric, "euclidean|cosine")->capture_default_str();
  explain_cmd->add_option("--out", ex.out, "directory for explanation.json and explanation.svg");
  explain_cmd->add_option("--svg", ex.svg, "also write the bar chart here");

  CLI::App* stability_cmd = app.add_subcommand("stability", "repeated-explanation Jaccard benchmark");
  add_common(stability_cmd, common, true);
  stability_cmd->add_option("--methods", st.methods, "comma list, e.g. lime,l-climax,ce-climax-gmm-if")
      ->capture_default_str();
  stability_cmd->add_option("--n-prime", st.n_prime, "comma list of surrogate counts")->delimiter(',');
  stability_cmd->add_option("--repeats", st.repeats, "explanations per index sample")->capture_default_str();
  stability_cmd->add_option("--index-count", st.index_count, "index samples per dataset")->capture_default_str();
  stability_cmd->add_option("--jobs", st.jobs, "worker threads")->capture_default_str();
  stability_cmd->add_option("--k", st.k, "top-k set size")->capture_default_str();
  stability_cmd->add_option("--out", st.out, "output directory")->required();

  CLI::App* host_cmd = app.add_subcommand("host", "train the forest and serve it over stdio");
  add_common(host_cmd, common, false);

  CLI::App* info_cmd = app.add_subcommand("model-info", "held-out quality of the reference forest");
  add_common(info_cmd, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    apply_log_level(common.log_level);
    CLI::App* sub = app.get_subcommands().front();
    // The host keeps stdout for the protocol; its seed note goes to stderr like the rest.
    resolve_seed(common, sub);
    if (sub == explain_cmd) return run_explain(common, ex);
    if (sub == stability_cmd) return run_stability(common, st);
    if (sub == host_cmd) return run_host(common);
    return run_model_info(common);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
