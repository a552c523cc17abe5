#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "climax/dataset.hpp"

using namespace climax;

namespace {

std::string data_file(const std::string& name) { return std::string(CLIMAX_DATA_DIR) + "/" + name; }

class TempCsv {
 public:
  explicit TempCsv(const std::string& body) {
    path_ = (std::filesystem::temp_directory_path() /
             ("climax_ds_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)) + ".csv"))
                .string();
    std::ofstream(path_) << body;
  }
  ~TempCsv() { std::remove(path_.c_str()); }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

std::string numbered_rows(int n, const std::string& label_of_all = "") {
  std::string s = "a,b,y\n";
  for (int i = 0; i < n; ++i)
    s += std::to_string(i) + "," + std::to_string(i * 0.5) + "," +
         (label_of_all.empty() ? std::string(i % 2 ? "yes" : "no") : label_of_all) + "\n";
  return s;
}

void expect_partition(const TabularDataset& ds) {
  std::set<Index> all(ds.train_rows.begin(), ds.train_rows.end());
  for (Index i : ds.test_rows) EXPECT_TRUE(all.insert(i).second) << "row " << i << " in both splits";
  EXPECT_EQ(static_cast<Index>(all.size()), ds.size());
}

}  // namespace

TEST(Dataset, BreastCancerShape) {
  const TabularDataset ds = ingest_csv(data_file("breast_cancer.csv"), "diagnosis", 0.2, 1);
  EXPECT_EQ(ds.size(), 569);
  EXPECT_EQ(ds.dims(), 30);
  EXPECT_EQ(ds.num_classes(), 2);
  EXPECT_EQ(ds.dropped_rows, 0);
  EXPECT_EQ(ds.name, "breast_cancer");
  EXPECT_EQ(ds.test_rows.size(), 114u);
  expect_partition(ds);
}

TEST(Dataset, DiabetesShape) {
  const TabularDataset ds = ingest_csv(data_file("diabetes.csv"), "outcome", 0.2, 1);
  EXPECT_EQ(ds.size(), 768);
  EXPECT_EQ(ds.dims(), 8);
  EXPECT_EQ(ds.feature_names.front(), "pregnancies");
  EXPECT_EQ(std::count(ds.labels.begin(), ds.labels.end(), 1), 268);
  expect_partition(ds);
}

TEST(Dataset, LabelByPosition) {
  const TabularDataset ds = ingest_csv(data_file("diabetes.csv"), "8", 0.2, 1);
  EXPECT_EQ(ds.dims(), 8);
  EXPECT_EQ(std::count(ds.labels.begin(), ds.labels.end(), 1), 268);
}

TEST(Dataset, SplitIsSeeded) {
  const auto a = ingest_csv(data_file("diabetes.csv"), "outcome", 0.25, 3);
  const auto b = ingest_csv(data_file("diabetes.csv"), "outcome", 0.25, 3);
  const auto c = ingest_csv(data_file("diabetes.csv"), "outcome", 0.25, 4);
  EXPECT_EQ(a.test_rows, b.test_rows);
  EXPECT_NE(a.test_rows, c.test_rows);
  EXPECT_EQ(a.test_rows.size(), 192u);
}

TEST(Dataset, TextLabelsAndDroppedRows) {
  std::string body = numbered_rows(12);
  body += "1,,no\n";
  body += "x,2,yes\n";
  body += "3,4\n";
  body += "5,6,\n";
  const TempCsv f(body);
  const TabularDataset ds = ingest_csv(f.path(), "y", 0.5, 2);
  EXPECT_EQ(ds.size(), 12);
  EXPECT_EQ(ds.dropped_rows, 4);
  EXPECT_EQ(ds.class_names, (std::vector<std::string>{"no", "yes"}));
  EXPECT_EQ(ds.labels[1], 1);
  EXPECT_DOUBLE_EQ(ds.features(3, 1), 1.5);
  expect_partition(ds);
}

TEST(Dataset, Errors) {
  const TempCsv ok(numbered_rows(12));
  EXPECT_THROW(ingest_csv(ok.path(), "label", 0.2, 1), SchemaError);
  EXPECT_THROW(ingest_csv(ok.path(), "y", 1.0, 1), ConfigError);
  const TempCsv few(numbered_rows(9));
  EXPECT_THROW(ingest_csv(few.path(), "y", 0.2, 1), InsufficientData);
  const TempCsv single(numbered_rows(20, "same"));
  EXPECT_THROW(ingest_csv(single.path(), "y", 0.2, 1), InsufficientData);
  EXPECT_THROW(ingest_csv("/nonexistent/file.csv", "y", 0.2, 1), InsufficientData);
  const TempCsv empty("");
  EXPECT_THROW(ingest_csv(empty.path(), "y", 0.2, 1), SchemaError);
}

TEST(Dataset, TrainStatsUseTrainingRows) {
  const TabularDataset ds = ingest_csv(data_file("diabetes.csv"), "outcome", 0.2, 5);
  const FeatureStats st = ds.train_stats();
  const Matrix train = ds.rows(ds.train_rows);
  EXPECT_NEAR(st.mean(1), train.col(1).mean(), 1e-12);
  EXPECT_EQ(ds.labels_of(ds.test_rows).size(), ds.test_rows.size());
}
