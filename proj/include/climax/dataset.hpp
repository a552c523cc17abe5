#ifndef CLIMAX_DATASET_HPP
#define CLIMAX_DATASET_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "climax/common.hpp"
#include "climax/errors.hpp"
#include "climax/log.hpp"
#include "climax/surrogate.hpp"

namespace climax {

struct TabularDataset {
  std::string name;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;  // class index -> original label text
  Matrix features;
  std::vector<int> labels;
  std::vector<Index> train_rows;
  std::vector<Index> test_rows;
  Index dropped_rows = 0;

  Index size() const { return features.rows(); }
  Index dims() const { return features.cols(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }

  Matrix rows(const std::vector<Index>& idx) const {
    Matrix out(static_cast<Index>(idx.size()), features.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Index>(k)) = features.row(idx[k]);
    return out;
  }
  std::vector<int> labels_of(const std::vector<Index>& idx) const {
    std::vector<int> out;
    for (Index i : idx) out.push_back(labels[static_cast<std::size_t>(i)]);
    return out;
  }
  /// Location/scale of the training split, the perturbation reference.
  FeatureStats train_stats() const { return FeatureStats::from_data(rows(train_rows)); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  for (std::string& s : cells) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return cells;
}

inline bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace detail

/// Reads a headered CSV. `label_column` is a header name or a 0-based
/// column number. Rows with a missing or non-numeric feature (or an empty
/// label) are dropped. Labels are mapped to 0..C-1 in sorted order (numeric
/// order when every label is a number). The test split holds
/// round(test_fraction * n) rows chosen by a seeded shuffle.
inline TabularDataset ingest_csv(const std::string& path, const std::string& label_column,
                                 double test_fraction = 0.2, std::uint64_t seed = 0) {
  std::ifstream in(path);
  if (!in) throw InsufficientData("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path + " has no header row");
  const std::vector<std::string> header = detail::split_csv_line(line);

  Index label_idx = -1;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == label_column) label_idx = static_cast<Index>(i);
  if (label_idx < 0) {
    double num;
    if (detail::parse_number(label_column, num) && num >= 0 && num == std::floor(num) &&
        num < static_cast<double>(header.size()))
      label_idx = static_cast<Index>(num);
  }
  if (label_idx < 0) throw SchemaError("label column '" + label_column + "' not found in " + path);

  TabularDataset ds;
  ds.name = path.substr(path.find_last_of('/') == std::string::npos ? 0 : path.find_last_of('/') + 1);
  if (const auto dot = ds.name.rfind('.'); dot != std::string::npos) ds.name.erase(dot);
  for (std::size_t i = 0; i < header.size(); ++i)
    if (static_cast<Index>(i) != label_idx) ds.feature_names.push_back(header[i]);
  const auto d = static_cast<Index>(ds.feature_names.size());

  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    bool ok = cells.size() == header.size() && !cells[static_cast<std::size_t>(label_idx)].empty();
    std::vector<double> row;
    for (std::size_t i = 0; ok && i < cells.size(); ++i) {
      if (static_cast<Index>(i) == label_idx) continue;
      double v;
      ok = detail::parse_number(cells[i], v);
      row.push_back(v);
    }
    if (!ok) {
      ++ds.dropped_rows;
      continue;
    }
    rows.push_back(std::move(row));
    raw_labels.push_back(cells[static_cast<std::size_t>(label_idx)]);
  }
  if (ds.dropped_rows) log_info("dropped " + std::to_string(ds.dropped_rows) + " unusable rows from " + path);
  if (rows.size() < 10) throw InsufficientData(path + " has fewer than 10 usable rows");

  std::vector<std::string> distinct = raw_labels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw InsufficientData("label column of " + path + " has a single value");
  const bool numeric = std::all_of(distinct.begin(), distinct.end(), [](const std::string& s) {
    double v;
    return detail::parse_number(s, v);
  });
  if (numeric)
    std::sort(distinct.begin(), distinct.end(), [](const std::string& a, const std::string& b) {
      return std::stod(a) < std::stod(b);
    });
  std::map<std::string, int> code;
  for (std::size_t c = 0; c < distinct.size(); ++c) code[distinct[c]] = static_cast<int>(c);
  ds.class_names = distinct;

  ds.features.resize(static_cast<Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Index j = 0; j < d; ++j) ds.features(static_cast<Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    ds.labels.push_back(code[raw_labels[i]]);
  }

  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("test fraction must lie in [0, 1)");
  std::vector<Index> order(rows.size());
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(derive_seed(seed, 0x5b1));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rows.size())));
  ds.test_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  ds.train_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(ds.test_rows.begin(), ds.test_rows.end());
  std::sort(ds.train_rows.begin(), ds.train_rows.end());
  return ds;
}

}  // namespace climax

#endif  // CLIMAX_DATASET_HPP
