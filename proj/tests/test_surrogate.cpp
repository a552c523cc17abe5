#include <gtest/gtest.h>

#include <cmath>

#include "climax/surrogate.hpp"
#include "test_models.hpp"

using namespace climax;

namespace {

FeatureStats make_stats(std::vector<double> mean, std::vector<double> sd) {
  FeatureStats s;
  s.mean = Eigen::Map<Vector>(mean.data(), static_cast<Index>(mean.size()));
  s.stddev = Eigen::Map<Vector>(sd.data(), static_cast<Index>(sd.size()));
  return s;
}

KernelConfig unit_kernel(double w = 1.0) {
  KernelConfig k;
  k.width = w;
  return k;
}

// Hand-built set with the given hard labels (binary or C-way one-hot-ish probs).
SurrogateSet labeled_set(const std::vector<int>& labels, int classes, std::uint64_t seed = 1) {
  const auto n = static_cast<Index>(labels.size());
  Rng rng(seed);
  std::normal_distribution<double> g;
  Matrix z(n, 2);
  for (Index i = 0; i < n; ++i) z.row(i) << g(rng), g(rng);
  SurrogateSet s;
  s.z = z;
  s.probs = Matrix::Constant(n, classes, 0.1 / (classes - 1));
  for (Index i = 0; i < n; ++i) s.probs(i, labels[static_cast<std::size_t>(i)]) = 0.9;
  s.hard_labels = labels;
  s.index_sample = Vector::Zero(2);
  s.kernel = unit_kernel();
  s.weights = proximity_weights(s.index_sample, z, s.kernel);
  s.provenance.assign(static_cast<std::size_t>(n), Provenance::Bootstrap);
  return s;
}

std::vector<int> repeat_labels(std::vector<std::pair<int, int>> spec) {
  std::vector<int> out;
  for (auto [label, count] : spec) out.insert(out.end(), static_cast<std::size_t>(count), label);
  return out;
}

}  // namespace

TEST(Perturb, RowZeroIsTheIndexSample) {
  Vector x(3);
  x << 1, -2, 3;
  const Matrix z = perturb(x, make_stats({0, 0, 0}, {1, 2, 3}), 5, 1.0, 7);
  EXPECT_EQ(Vector(z.row(0).transpose()), x);
}

TEST(Perturb, TinyScaleCollapsesToX) {
  Vector x(3);
  x << 1, -2, 3;
  const Matrix z = perturb(x, make_stats({0, 0, 0}, {1, 20, 300}), 100, 1e-12, 7);
  for (Index i = 0; i < z.rows(); ++i) EXPECT_LE((z.row(i).transpose() - x).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Perturb, DeterministicUnderSeed) {
  Vector x = Vector::Zero(4);
  const FeatureStats st = make_stats({0, 0, 0, 0}, {1, 1, 2, 3});
  EXPECT_EQ(perturb(x, st, 50, 1.5, 11), perturb(x, st, 50, 1.5, 11));
  EXPECT_NE(perturb(x, st, 50, 1.5, 11), perturb(x, st, 50, 1.5, 12));
}

TEST(Perturb, LargeSampleStdMatchesStats) {
  Vector x(3);
  x << 5, -1, 0.5;
  const FeatureStats st = make_stats({0, 0, 0}, {0.5, 2.0, 7.0});
  const Matrix z = perturb(x, st, 10000, 1.0, 3);
  const FeatureStats sample = FeatureStats::from_data(z);
  for (Index j = 0; j < 3; ++j) {
    EXPECT_NEAR(sample.stddev(j), st.stddev(j), 0.05 * st.stddev(j));
    EXPECT_NEAR(sample.mean(j), x(j), 0.05 * st.stddev(j));
  }
}

TEST(Perturb, ZeroVarianceFeatureHeldConstant) {
  Vector x(2);
  x << 4, 9;
  const Matrix z = perturb(x, make_stats({0, 0}, {1, 0}), 200, 2.0, 1);
  EXPECT_TRUE((z.col(1).array() == 9.0).all());
  EXPECT_GT(FeatureStats::from_data(z).stddev(0), 1.0);
}

TEST(Perturb, RejectsBadArguments) {
  Vector x = Vector::Zero(2);
  const FeatureStats st = make_stats({0, 0}, {1, 1});
  EXPECT_THROW(perturb(x, st, 0, 1.0, 1), ConfigError);
  EXPECT_THROW(perturb(x, st, 5, 0.0, 1), ConfigError);
  EXPECT_THROW(perturb(Vector::Zero(3), st, 5, 1.0, 1), DimensionError);
}

TEST(Kernel, IdentityWeightIsOne) {
  Vector x(2);
  x << 0.3, -0.7;
  const Vector w = proximity_weights(x, x.transpose(), unit_kernel(0.5));
  EXPECT_EQ(w(0), 1.0);
}

TEST(Kernel, DistanceEqualToWidthGivesInverseE) {
  const double width = 1.7;
  Vector x = Vector::Zero(2);
  Matrix z(1, 2);
  z << width * 0.6, width * 0.8;  // Euclidean norm = width
  EXPECT_NEAR(proximity_weights(x, z, unit_kernel(width))(0), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(std::exp(-1.0), 0.367879, 1e-6);
}

TEST(Kernel, MonotoneAndPositive) {
  Vector x = Vector::Zero(3);
  Matrix z(50, 3);
  for (Index i = 0; i < 50; ++i) z.row(i) = Eigen::RowVector3d(0.2 * i, -0.1 * i, 0.05 * i);
  const Vector w = proximity_weights(x, z, unit_kernel(2.0));
  for (Index i = 1; i < 50; ++i) {
    EXPECT_GT(w(i), 0.0);
    EXPECT_LT(w(i), w(i - 1));
  }
}

TEST(Kernel, FeatureScaleMeasuresInStandardUnits) {
  KernelConfig k = unit_kernel(1.0);
  k.feature_scale = Vector::Constant(2, 10.0);
  Vector x = Vector::Zero(2);
  Matrix z(1, 2);
  z << 10.0, 0.0;
  EXPECT_NEAR(proximity_weights(x, z, k)(0), std::exp(-1.0), 1e-15);
}

TEST(Kernel, CosineConventions) {
  KernelConfig k = unit_kernel(1.0);
  k.metric = DistanceMetric::Cosine;
  Vector x(2);
  x << 1, 0;
  Matrix z(3, 2);
  z << 2, 0,   // same direction: distance 0
      0, 3,    // orthogonal: distance 1
      0, 0;    // zero vector: distance defined as 1
  const Vector w = proximity_weights(x, z, k);
  EXPECT_NEAR(w(0), 1.0, 1e-15);
  EXPECT_NEAR(w(1), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(w(2), std::exp(-1.0), 1e-15);
}

TEST(Kernel, RejectsNonPositiveWidth) {
  EXPECT_THROW(proximity_weights(Vector::Zero(1), Matrix::Zero(1, 1), unit_kernel(0.0)), ConfigError);
}

TEST(Label, ConstantHostTiesToClassZero) {
  const FunctionModel m = fixtures::constant_model(2);
  const Matrix z = perturb(Vector::Zero(2), make_stats({0, 0}, {1, 1}), 30, 1.0, 1);
  const SurrogateSet s = label_with_blackbox(m, z, Vector::Zero(2), unit_kernel());
  for (int l : s.hard_labels) EXPECT_EQ(l, 0);
  EXPECT_EQ(s.consistency_error(), "");
}

TEST(Label, SignHostLabelsEqualIndicator) {
  const FunctionModel m = fixtures::sign_model(2);
  const Matrix z = perturb(Vector::Zero(2), make_stats({0, 0}, {1, 1}), 200, 1.0, 2);
  const SurrogateSet s = label_with_blackbox(m, z, Vector::Zero(2), unit_kernel());
  for (Index i = 0; i < z.rows(); ++i) EXPECT_EQ(s.hard_labels[static_cast<std::size_t>(i)], z(i, 0) > 0 ? 1 : 0);
  for (Provenance p : s.provenance) EXPECT_EQ(p, Provenance::Bootstrap);
  EXPECT_EQ(s.consistency_error(), "");
}

TEST(Label, SingleRowEqualToXHasUnitWeight) {
  Vector x(2);
  x << 1, 2;
  const SurrogateSet s = label_with_blackbox(fixtures::echo_model(2), x.transpose(), x, unit_kernel());
  ASSERT_EQ(s.size(), 1);
  EXPECT_EQ(s.weights(0), 1.0);
}

TEST(Ros, TwoClassTopUp) {
  const SurrogateSet s = labeled_set(repeat_labels({{0, 10}, {1, 4}}), 2);
  const SurrogateSet b = balance_ros(s, 3);
  EXPECT_EQ(b.class_counts(), (std::vector<int>{10, 10}));
  EXPECT_EQ(b.consistency_error(), "");
  EXPECT_EQ(s.size(), 14);  // input untouched
  for (Index i = 14; i < b.size(); ++i) {
    EXPECT_EQ(b.provenance[static_cast<std::size_t>(i)], Provenance::RosDuplicate);
    // A duplicate carries an existing row's z, probabilities and weight.
    bool found = false;
    for (Index r = 0; r < 14 && !found; ++r)
      found = b.z.row(i) == s.z.row(r) && b.probs.row(i) == s.probs.row(r) && b.weights(i) == s.weights(r) &&
              s.hard_labels[static_cast<std::size_t>(r)] == 1;
    EXPECT_TRUE(found);
  }
}

TEST(Ros, BalancedInputUnchanged) {
  const SurrogateSet s = labeled_set(repeat_labels({{0, 6}, {1, 6}}), 2);
  const SurrogateSet b = balance_ros(s, 3);
  EXPECT_EQ(b.z, s.z);
  EXPECT_EQ(b.probs, s.probs);
  EXPECT_EQ(b.weights, s.weights);
  EXPECT_EQ(b.hard_labels, s.hard_labels);
}

TEST(Ros, ThreeClassTopUp) {
  const SurrogateSet s = labeled_set(repeat_labels({{0, 7}, {1, 2}, {2, 1}}), 3);
  EXPECT_EQ(balance_ros(s, 9).class_counts(), (std::vector<int>{7, 7, 7}));
}

TEST(Ros, DeterministicAndSeedSensitive) {
  const SurrogateSet s = labeled_set(repeat_labels({{0, 30}, {1, 5}}), 2);
  EXPECT_EQ(balance_ros(s, 4).z, balance_ros(s, 4).z);
  EXPECT_NE(balance_ros(s, 4).z, balance_ros(s, 5).z);
}

TEST(Ros, SingleClassIsAnError) {
  EXPECT_THROW(balance_ros(labeled_set(std::vector<int>(8, 1), 2), 1), SingleClassNeighborhood);
}

TEST(Gmm, SingleComponentIsTheSampleMoments) {
  const SurrogateSet s = labeled_set(repeat_labels({{0, 40}, {1, 20}}), 2, 5);
  const GmmModel g = fit_gmm(s, 1, 200, 1e-6, 1);
  const Eigen::RowVectorXd mean = s.z.colwise().mean();
  for (Index j = 0; j < 2; ++j) {
    const double var = (s.z.col(j).array() - mean(j)).square().mean();
    EXPECT_NEAR(g.means(0, j), mean(j), 1e-12);
    EXPECT_NEAR(g.variances(0, j), var, 1e-12);
  }
  EXPECT_NEAR(g.mix_weights(0), 1.0, 1e-15);
  EXPECT_EQ(g.component_labels[0], 0);
}

TEST(Gmm, SeparatedClustersAreRecovered) {
  Rng rng(2);
  std::normal_distribution<double> n01;
  Matrix z(400, 2);
  std::vector<int> labels;
  for (Index i = 0; i < 400; ++i) {
    const double cx = i < 250 ? 0.0 : 20.0;
    z.row(i) << cx + n01(rng), n01(rng);
    labels.push_back(i < 250 ? 0 : 1);
  }
  SurrogateSet s = labeled_set(labels, 2);
  s.z = z;
  s.weights = proximity_weights(s.index_sample, z, s.kernel);
  const GmmModel g = fit_gmm(s, 2, 200, 1e-8, 3);
  const int a = g.means(0, 0) < g.means(1, 0) ? 0 : 1;
  EXPECT_NEAR(g.means(a, 0), 0.0, 0.5);
  EXPECT_NEAR(g.means(1 - a, 0), 20.0, 0.5);
  EXPECT_NEAR(g.means(a, 1), 0.0, 0.5);
  EXPECT_EQ(g.component_labels[static_cast<std::size_t>(a)], 0);
  EXPECT_EQ(g.component_labels[static_cast<std::size_t>(1 - a)], 1);
  const Matrix r = g.responsibilities(z);
  for (Index i = 0; i < 400; ++i) EXPECT_GE(r(i, i < 250 ? a : 1 - a), 0.99);
}

TEST(Gmm, TraceMonotoneWeightsOnSimplexVariancesFloored) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SurrogateSet s = labeled_set(repeat_labels({{0, 50}, {1, 30}}), 2, seed + 10);
    s.z.col(1) *= 1e-4;  // nearly flat feature exercises the floor
    const GmmModel g = fit_gmm(s, 3, 100, 1e-10, seed);
    for (std::size_t t = 1; t < g.log_likelihood_trace.size(); ++t)
      EXPECT_GE(g.log_likelihood_trace[t], g.log_likelihood_trace[t - 1] - 1e-9);
    EXPECT_NEAR(g.mix_weights.sum(), 1.0, 1e-9);
    const Eigen::RowVectorXd mean = s.z.colwise().mean();
    for (Index j = 0; j < 2; ++j) {
      const double var = (s.z.col(j).array() - mean(j)).square().mean();
      EXPECT_GE(g.variances.col(j).minCoeff(), 1e-6 * var);
    }
  }
}

TEST(Gmm, IdenticalRowsLeaveAComponentDegenerate) {
  SurrogateSet s = labeled_set(repeat_labels({{0, 5}, {1, 5}}), 2);
  s.z.setConstant(1.0);
  EXPECT_THROW(fit_gmm(s, 2, 50, 1e-6, 1), DegenerateComponent);
}

TEST(Gmm, RejectsBadComponentCount) {
  const SurrogateSet s = labeled_set(repeat_labels({{0, 2}, {1, 1}}), 2);
  EXPECT_THROW(fit_gmm(s, 4), ConfigError);
  EXPECT_THROW(fit_gmm(s, 0), ConfigError);
}

namespace {

// Black box labelling by the nearer of two planted centers.
FunctionModel two_center_model() {
  return FunctionModel(2, 2, [](const Matrix& b) {
    Matrix p(b.rows(), 2);
    for (Index i = 0; i < b.rows(); ++i) {
      const double q = sigmoid(2.0 * (b(i, 0) - 4.0));
      p(i, 0) = 1.0 - q;
      p(i, 1) = q;
    }
    return p;
  });
}

SurrogateSet planted_mixture(std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n01;
  Matrix z(360, 2);
  for (Index i = 0; i < 360; ++i) z.row(i) << (i < 300 ? 0.0 : 8.0) + n01(rng), n01(rng);
  return label_with_blackbox(two_center_model(), z, Vector::Zero(2), unit_kernel(3.0));
}

}  // namespace

TEST(GmmBalance, PlantedMixtureDrawsMostlyOnTarget) {
  const SurrogateSet s = planted_mixture(4);
  const FunctionModel m = two_center_model();
  const GmmModel g = fit_gmm(s, 2, 200, 1e-8, 1);
  GmmSamplingStats st;
  const SurrogateSet b = balance_gmm(s, m, g, 7, &st);
  ASSERT_GT(st.candidates, 0);
  EXPECT_GE(static_cast<double>(st.on_target) / static_cast<double>(st.candidates), 0.8);
  const std::vector<int> c = b.class_counts();
  EXPECT_LE(std::abs(c[0] - c[1]), 1);
  EXPECT_EQ(b.consistency_error(), "");
  // Every generated row carries the black box's own answer for it.
  for (Index i = s.size(); i < b.size(); ++i)
    if (b.provenance[static_cast<std::size_t>(i)] == Provenance::GmmSample) {
      EXPECT_EQ(Matrix(b.probs.row(i)), m.predict_proba(b.z.row(i)));
    }
}

TEST(GmmBalance, FallsBackToRosWithoutMinorityComponent) {
  const SurrogateSet s = labeled_set(repeat_labels({{0, 40}, {1, 3}}), 2);
  const GmmModel g = fit_gmm(s, 1, 100, 1e-6, 1);  // sole component labeled 0
  GmmSamplingStats st;
  const SurrogateSet b = balance_gmm(s, fixtures::echo_model(2), g, 2, &st);
  EXPECT_EQ(st.candidates, 0);
  EXPECT_EQ(st.ros_fallback, 37);
  EXPECT_EQ(b.class_counts(), (std::vector<int>{40, 40}));
}

TEST(GmmBalance, ConstantHostIsSingleClass) {
  const FunctionModel m = fixtures::constant_model(2);
  const Matrix z = perturb(Vector::Zero(2), FeatureStats::from_data(Matrix::Identity(2, 2)), 40, 1.0, 1);
  const SurrogateSet s = label_with_blackbox(m, z, Vector::Zero(2), unit_kernel());
  const GmmModel g = fit_gmm(s, 2, 50, 1e-6, 1);
  EXPECT_THROW(balance_gmm(s, m, g, 1), SingleClassNeighborhood);
}

TEST(Surrogate, ConsistencyCheckerCatchesViolations) {
  SurrogateSet s = labeled_set(repeat_labels({{0, 3}, {1, 3}}), 2);
  EXPECT_EQ(s.consistency_error(), "");
  SurrogateSet bad = s;
  bad.hard_labels[0] = 1;
  EXPECT_NE(bad.consistency_error(), "");
  bad = s;
  bad.weights(2) *= 0.5;
  EXPECT_NE(bad.consistency_error(), "");
  bad = s;
  bad.provenance.pop_back();
  EXPECT_NE(bad.consistency_error(), "");
}

TEST(GmmBalance, DegenerateMixtureFallsBackToRos) {
  SurrogateSet s = labeled_set(repeat_labels({{0, 7}, {1, 3}}), 2);
  s.z.setConstant(1.0);
  GmmSamplingStats st;
  const SurrogateSet b = balance_with_mixture(s, fixtures::echo_model(2), 2, 50, 1e-6, 1, 2, &st);
  EXPECT_EQ(b.class_counts(), (std::vector<int>{7, 7}));
  EXPECT_EQ(st.ros_fallback, 4);
  EXPECT_EQ(st.candidates, 0);
}
