#include <gtest/gtest.h>

#include "pfgmpp/analysis.hpp"
#include "pfgmpp/datasets.hpp"

using namespace pfgmpp;

namespace {

Matrix gaussian_cloud(int n, int count, std::uint64_t seed) {
  Engine rng(seed);
  Matrix m(n, count);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
  return m;
}

}  // namespace

TEST(Tvd, SinglePointIsZero) {
  Engine rng(1);
  const DataCloud c = DataCloud::from_points({Vector::Ones(2)});
  EXPECT_EQ(tvd_phase(c, 1.0, 10, rng, SpaceConfig::finite(2, 8)), 0.0);
}

TEST(Tvd, FarFieldIsUniform) {
  Engine rng(2);
  const DataCloud c = standard_ten_point_cloud();
  const auto space = SpaceConfig::finite(2, 64);
  EXPECT_LT(tvd_phase(c, space.anchor_for_sigma(1e4), 500, rng, space), 1e-3);
}

TEST(Tvd, NearFieldIsCollapsed) {
  // Eight well separated points; a tiny anchor puts all weight on the source.
  std::vector<Vector> pts;
  for (int k = 0; k < 8; ++k) pts.push_back(mixture_center(k, 8, 5.0));
  const DataCloud c = DataCloud::from_points(pts);
  Engine rng(3);
  for (const auto& space : {SpaceConfig::finite(2, 64), SpaceConfig::gaussian(2)})
    EXPECT_NEAR(tvd_phase(c, space.anchor_for_sigma(0.05), 500, rng, space), 1.0 - 1.0 / 8, 0.02);
}

TEST(Tvd, BoundsAndRejections) {
  Engine rng(4);
  const DataCloud c = standard_ten_point_cloud();
  const auto space = SpaceConfig::finite(2, 16);
  for (double r : {0.1, 1.0, 10.0}) {
    const double v = tvd_phase(c, r, 100, rng, space);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0 - 1.0 / 10);
  }
  EXPECT_THROW(tvd_phase(c, 0.0, 10, rng, space), ValidationError);
  EXPECT_THROW(tvd_phase(c, 1.0, 0, rng, space), ValidationError);
}

TEST(RadiusVariance, GaussianAsymptote) {
  // Large-D variance approaches Var of a chi_N scaled by sigma.
  const auto pts = radius_variance_curve(2, 1.0, {8, 64, 4096}, 200000, 5);
  ASSERT_EQ(pts.size(), 4u);
  const double chi_var = 2.0 - std::pow(std::tgamma(1.5) / std::tgamma(1.0), 2) * 2.0;
  EXPECT_NEAR(pts.back().variance, chi_var, 0.02 * chi_var);
  EXPECT_NEAR(pts[2].variance, chi_var, 0.05 * chi_var);
  EXPECT_GT(pts[0].variance, pts[1].variance);
  EXPECT_GT(pts[1].variance, pts[2].variance);
  EXPECT_EQ(pts.back().d_label, "gaussian");
}

TEST(RadiusVariance, SigmaScaling) {
  const auto a = radius_variance_curve(2, 0.5, {16, 256}, 100000, 6);
  const auto b = radius_variance_curve(2, 1.0, {16, 256}, 100000, 6);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i].variance / a[i].variance, 4.0, 0.12);
}

TEST(RadiusVariance, SmallDFlagged) {
  const auto pts = radius_variance_curve(2, 1.0, {1, 2, 3}, 1000, 7);
  EXPECT_FALSE(pts[0].computed);
  EXPECT_FALSE(pts[1].computed);
  EXPECT_TRUE(std::isnan(pts[0].variance));
  EXPECT_TRUE(pts[2].computed);
  EXPECT_THROW(radius_variance_curve(2, 1.0, {8, 4}, 100, 1), ValidationError);
}

TEST(Convergence, SinglePointIsZero) {
  Engine rng(8);
  const DataCloud c = DataCloud::from_points({Vector::Zero(2)});
  for (const auto& p : convergence_curve(c, 0.5, {16, 1024, 1e6}, 32, rng)) EXPECT_LT(p.value, 1e-12);
}

TEST(Convergence, DecreasesWithD) {
  Engine rng(9);
  const auto pts = convergence_curve(standard_ten_point_cloud(), 0.5, {16, 256, 4096, 65536}, 64, rng);
  for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_LT(pts[i].value, pts[i - 1].value);
}

TEST(PosteriorRatio, ZeroSeparation) {
  Engine rng(10);
  const PosteriorRatio pr = posterior_ratio_check(0.0, 1.0, 4, 16, rng, 10);
  EXPECT_EQ(pr.empirical, 1.0);
  EXPECT_EQ(pr.predicted, 1.0);
}

TEST(PosteriorRatio, MatchesClosedForm) {
  const double r = 0.5 * std::sqrt(1024.0);
  Engine rng(11);
  const PosteriorRatio pr = posterior_ratio_check(1.0, r, 64, 1024, rng, 2000);
  const double lp = posterior_ratio_log_predicted(1.0, r, 64, 1024);
  EXPECT_NEAR(std::log(pr.predicted), lp, 1e-9 * lp);
  EXPECT_NEAR(std::log(pr.empirical), lp, 0.3 * lp);
  EXPECT_GT(pr.empirical, 1.0);
}

TEST(PosteriorRatio, ClosedFormDependsOnlyOnSigma) {
  // With r = sigma sqrt(D), the log ratio tends to l^2 / (2 sigma^2) as D grows.
  const double sigma = 0.7;
  const double l = 0.3;
  const double limit = l * l / (2 * sigma * sigma);
  double prev = 1e9;
  for (double d : {1e3, 1e5, 1e7}) {
    const double lp = posterior_ratio_log_predicted(l, sigma * std::sqrt(d), 8, d);
    EXPECT_LT(std::abs(lp - limit), prev);
    prev = std::abs(lp - limit);
  }
  EXPECT_LT(prev, 1e-5);
}

TEST(SlicedWasserstein, Identity) {
  const Matrix a = gaussian_cloud(3, 500, 1);
  Engine rng(12);
  EXPECT_EQ(sliced_wasserstein(a, a, 32, rng), 0.0);
}

TEST(SlicedWasserstein, Symmetric) {
  const Matrix a = gaussian_cloud(2, 300, 2);
  const Matrix b = gaussian_cloud(2, 200, 3);
  Engine r1(13), r2(13);
  EXPECT_NEAR(sliced_wasserstein(a, b, 32, r1), sliced_wasserstein(b, a, 32, r2), 1e-14);
}

TEST(SlicedWasserstein, Translation) {
  // Shift by a unit vector: mean |cos| over directions in 2-D is 2/pi.
  const Matrix a = gaussian_cloud(2, 2000, 4);
  Matrix b = a;
  b.row(0).array() += 1.0;
  Engine rng(14);
  EXPECT_NEAR(sliced_wasserstein(a, b, 4000, rng), 2.0 / std::numbers::pi, 0.03 * 2.0 / std::numbers::pi);
}

TEST(SlicedWasserstein, OneDimensionalExact) {
  Matrix a(1, 2), b(1, 3);
  a << 0.0, 1.0;
  b << 0.0, 0.5, 2.0;
  Engine rng(15);
  // F_a - F_b: [0,0.5) 1/2-1/3, [0.5,1) 1/2-2/3, [1,2) 1-2/3.
  EXPECT_NEAR(sliced_wasserstein(a, b, 1, rng), 0.5 / 6 + 0.5 / 6 + 1.0 / 3, 1e-15);
}

TEST(SlicedWasserstein, Rejections) {
  Engine rng(16);
  EXPECT_THROW(sliced_wasserstein(Matrix::Zero(2, 3), Matrix::Zero(3, 3), 4, rng), ValidationError);
  EXPECT_THROW(sliced_wasserstein(Matrix::Zero(2, 3), Matrix::Zero(2, 3), 0, rng), ValidationError);
}

TEST(Sweeps, RobustnessDeterministicAndSchema) {
  const DataCloud cloud = standard_ten_point_cloud();
  const std::vector<SweepModel> models{{"a", AnyBackend::wrap(OracleBackend(cloud, SpaceConfig::finite(2, 16)))},
                                       {"b", AnyBackend::wrap(OracleBackend(cloud, SpaceConfig::gaussian(2)))}};
  SweepSettings set;
  set.count = 64;
  set.n_proj = 8;
  SweepSchedule sched;
  sched.steps = 6;
  const auto rows = robustness_sweep(models, {0.0, 0.2}, sched, cloud.points(), set);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].degradation, 0.0);
  EXPECT_EQ(rows[0].nfe, 11);
  EXPECT_EQ(rows[3].d_label, "gaussian");
  const std::string csv = sweep_csv(rows).str();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,D,alpha,T,nfe,sw,degradation");
  EXPECT_EQ(csv, sweep_csv(robustness_sweep(models, {0.0, 0.2}, sched, cloud.points(), set)).str());
}

TEST(Sweeps, NfeSinglePoint) {
  const Vector y = (Vector(2) << 0.5, -1.0).finished();
  const DataCloud cloud = DataCloud::from_points({y});
  const std::vector<SweepModel> models{{"one", AnyBackend::wrap(OracleBackend(cloud, SpaceConfig::finite(2, 32)))}};
  SweepSettings set;
  set.count = 16;
  set.n_proj = 8;
  const Matrix ref = y.replicate(1, 16);
  for (const auto& row : nfe_sweep(models, {2, 4, 8}, SweepSchedule{}, ref, set)) {
    EXPECT_LE(row.sw, 1e-6);
    EXPECT_EQ(row.nfe, 2 * row.steps - 1);
  }
}

TEST(Sweeps, MoreStepsDoNotHurt) {
  const DataCloud cloud = standard_cloud();
  const Matrix ref = make_dataset(standard_mixture_spec(4096, 202)).points();
  SweepSettings set;
  set.count = 2048;
  set.n_proj = 64;
  const std::vector<SweepModel> gauss{{"g", AnyBackend::wrap(OracleBackend(cloud, SpaceConfig::gaussian(2)))}};
  const auto rows = nfe_sweep(gauss, {4, 8, 16, 32, 64}, SweepSchedule{}, ref, set);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i].sw, 1.1 * rows[i - 1].sw) << "T=" << rows[i].steps;
  EXPECT_NEAR(rows[3].sw, rows[4].sw, 0.05 * rows[4].sw);
  EXPECT_EQ(rows.back().degradation, 0.0);
}

TEST(Sweeps, FiniteDStepsConverge) {
  // From T = 8 up the finite-D oracle improves monotonically. T = 4 is left
  // out: its coarse jump from sigma_max lands closer to the data than T = 8.
  const DataCloud cloud = standard_cloud();
  const Matrix ref = make_dataset(standard_mixture_spec(4096, 202)).points();
  SweepSettings set;
  set.count = 2048;
  set.n_proj = 64;
  const std::vector<SweepModel> fin{{"d64", AnyBackend::wrap(OracleBackend(cloud, SpaceConfig::finite(2, 64)))}};
  const auto rows = nfe_sweep(fin, {8, 16, 32, 64}, SweepSchedule{}, ref, set);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i].sw, 1.1 * rows[i - 1].sw) << "T=" << rows[i].steps;
  EXPECT_NEAR(rows[2].sw, rows[3].sw, 0.05 * rows[3].sw);
}
