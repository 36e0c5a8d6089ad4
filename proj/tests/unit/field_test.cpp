#include <gtest/gtest.h>

#include "pfgmpp/datasets.hpp"
#include "pfgmpp/field.hpp"

using namespace pfgmpp;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  std::size_t i = 0;
  for (double x : v) out[static_cast<Eigen::Index>(i++)] = x;
  return out;
}

DataCloud line_cloud(std::initializer_list<double> xs) {
  std::vector<Vector> pts;
  for (double x : xs) pts.push_back(vec({x}));
  return DataCloud::from_points(pts);
}

}  // namespace

TEST(DataCloud, RejectsEmptyAndRagged) {
  EXPECT_THROW(DataCloud::from_points({}), ValidationError);
  EXPECT_THROW(DataCloud::from_points({vec({1, 2}), vec({1})}), ValidationError);
}

TEST(PosteriorWeights, Equidistant) {
  const auto cloud = DataCloud::from_points({vec({-1, 0}), vec({1, 0})});
  const Vector w = posterior_weights({vec({0, 0.3}), 0.8}, cloud, SpaceConfig::finite(2, 5));
  EXPECT_NEAR(w[0], 0.5, 1e-15);
  EXPECT_NEAR(w[1], 0.5, 1e-15);
}

TEST(PosteriorWeights, DirectEvaluation) {
  const Vector w = posterior_weights({vec({0}), 1.0}, line_cloud({0, 2}), SpaceConfig::finite(1, 1));
  EXPECT_NEAR(w[0], 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(w[1], 1.0 / 6.0, 1e-15);
}

TEST(PosteriorWeights, FarFieldUniform) {
  const DataCloud cloud = standard_ten_point_cloud();
  const double r = 1e6 * cloud.diameter();
  for (const auto& space : {SpaceConfig::finite(2, 1), SpaceConfig::finite(2, 128), SpaceConfig::gaussian(2)}) {
    const Vector w = posterior_weights({vec({0.3, -2}), r}, cloud, space);
    EXPECT_LT((w.array() - 0.1).abs().maxCoeff(), 1e-3);
  }
}

TEST(PosteriorWeights, SumToOneAndPermutationEquivariant) {
  const DataCloud cloud = standard_ten_point_cloud();
  Matrix perm = cloud.points();
  perm.col(0).swap(perm.col(7));
  perm.col(3).swap(perm.col(5));
  const DataCloud permuted(perm);
  Engine rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto space = i % 2 ? SpaceConfig::finite(2, 1 + i) : SpaceConfig::gaussian(2);
    const AugmentedPoint p{vec({3 * standard_normal(rng), 3 * standard_normal(rng)}), 0.05 + uniform01(rng)};
    const Vector w = posterior_weights(p, cloud, space);
    const Vector wp = posterior_weights(p, permuted, space);
    EXPECT_NEAR(w.sum(), 1.0, 1e-12);
    EXPECT_NEAR(w[0], wp[7], 1e-15);
    EXPECT_NEAR(w[3], wp[5], 1e-15);
    EXPECT_NEAR(w[1], wp[1], 1e-15);
  }
}

TEST(PosteriorWeights, LargeDExponentsDoNotOverflow) {
  const Vector w = posterior_weights({vec({0}), 0.01}, line_cloud({0, 5}), SpaceConfig::finite(1, 1e6));
  EXPECT_TRUE(w.allFinite());
  EXPECT_DOUBLE_EQ(w[0], 1.0);
}

TEST(PosteriorWeights, ZeroAnchor) {
  EXPECT_THROW(posterior_weights({vec({1}), 0.0}, line_cloud({1, 1, 3}), SpaceConfig::finite(1, 2)),
               ValidationError);
  const Vector w = posterior_weights({vec({1}), 0.0}, line_cloud({1, 3}), SpaceConfig::finite(1, 2));
  EXPECT_EQ(w[0], 1.0);
  EXPECT_EQ(w[1], 0.0);
}

TEST(PosteriorWeights, LargeDMatchesGaussianBranch) {
  const DataCloud cloud = standard_ten_point_cloud();
  const auto big = SpaceConfig::finite(2, 1e6);
  const auto g = SpaceConfig::gaussian(2);
  Engine rng(2);
  for (int i = 0; i < 100; ++i) {
    const Vector x = perturb(rng, cloud.point(i % 10), 0.5, g).x;
    const Vector wf = posterior_weights({x, big.anchor_for_sigma(0.5)}, cloud, big);
    const Vector wg = posterior_weights({x, 0.5}, cloud, g);
    EXPECT_LT(0.5 * (wf - wg).cwiseAbs().sum(), 1e-3);
  }
}

TEST(EmpiricalField, SinglePointRatio) {
  const auto f = empirical_field({vec({3}), 4.0}, line_cloud({0}), SpaceConfig::finite(1, 1));
  EXPECT_DOUBLE_EQ(f.e_x[0] / f.e_r, 0.75);
  EXPECT_GT(f.e_r, 0.0);
}

TEST(EmpiricalField, SinglePointDriftIsExact) {
  const auto cloud = DataCloud::from_points({vec({1, -2})});
  Engine rng(3);
  for (const auto& space : {SpaceConfig::finite(2, 3), SpaceConfig::gaussian(2)}) {
    const OracleBackend oracle(cloud, space);
    for (int i = 0; i < 50; ++i) {
      const Vector x = vec({standard_normal(rng), standard_normal(rng)});
      const double r = 0.1 + uniform01(rng);
      const Vector expect = (x - vec({1, -2})) / r;
      EXPECT_LT((oracle.drift(x, r) - expect).norm(), 1e-15 * (1 + expect.norm()));
    }
  }
}

TEST(EmpiricalField, DriftEqualsPosteriorMeanIdentity) {
  const DataCloud cloud = standard_cloud();
  Engine rng(4);
  for (const auto& space : {SpaceConfig::finite(2, 1), SpaceConfig::finite(2, 128), SpaceConfig::gaussian(2)}) {
    const OracleBackend oracle(cloud, space);
    for (int i = 0; i < 50; ++i) {
      const AugmentedPoint p{vec({3 * standard_normal(rng), 3 * standard_normal(rng)}), 0.02 + 3 * uniform01(rng)};
      const Vector expect = (p.x - posterior_mean(p, cloud, space)) / p.r;
      EXPECT_LT((drift(p, oracle) - expect).norm(), 1e-12 * (1 + expect.norm()));
      const FieldValue f = empirical_field(p, cloud, space);
      EXPECT_LT((f.e_x / f.e_r - expect).norm(), 1e-12 * (1 + expect.norm()));
    }
  }
}

TEST(EmpiricalField, BatchedDriftAgreesWithExact) {
  const DataCloud cloud = standard_cloud();
  Engine rng(5);
  Matrix xs(2, 300);
  for (Eigen::Index c = 0; c < xs.cols(); ++c) xs.col(c) = vec({3 * standard_normal(rng), 3 * standard_normal(rng)});
  for (const auto& space : {SpaceConfig::finite(2, 2), SpaceConfig::finite(2, 128), SpaceConfig::gaussian(2)}) {
    const OracleBackend oracle(cloud, space);
    for (double r : {0.05, 1.0, 30.0}) {
      const Matrix batch = oracle.drift_batch(xs, r);
      for (Eigen::Index c = 0; c < xs.cols(); ++c)
        EXPECT_LT((batch.col(c) - oracle.drift(xs.col(c), r)).norm(), 1e-10 * (1 + batch.col(c).norm()));
    }
  }
}

TEST(EmpiricalField, ScaleCovariance) {
  const DataCloud cloud = standard_ten_point_cloud();
  const double c = 3.5;
  const DataCloud scaled(c * cloud.points());
  const auto space = SpaceConfig::finite(2, 16);
  const OracleBackend a(cloud, space), b(scaled, space);
  Engine rng(6);
  for (int i = 0; i < 50; ++i) {
    const Vector x = vec({2 * standard_normal(rng), 2 * standard_normal(rng)});
    const double r = 0.1 + uniform01(rng);
    EXPECT_LT((a.drift(x, r) - b.drift(c * x, c * r)).norm(), 1e-12);
  }
}

TEST(OracleBackend, RejectsZeroAnchor) {
  const OracleBackend oracle(line_cloud({0}), SpaceConfig::finite(1, 1));
  EXPECT_THROW(oracle.drift(vec({1}), 0.0), ValidationError);
}

TEST(DenoiserBackend, StubDenoiser) {
  const Vector y0 = vec({0.5, -1});
  auto stub = [&](const Matrix& xs, double) {
    Matrix out(xs.rows(), xs.cols());
    out.colwise() = y0;
    return out;
  };
  const DenoiserBackend backend(stub, SpaceConfig::finite(2, 8));
  const Vector x = vec({2, 3});
  EXPECT_LT((backend.drift(x, 0.7) - (x - y0) / 0.7).norm(), 1e-15);
  EXPECT_THROW(backend.drift(x, 0.0), ValidationError);
}

TEST(GaussianScore, SinglePoint) {
  const Vector y = vec({1, 2});
  const Vector x = vec({-0.5, 0.25});
  EXPECT_LT((gaussian_score(x, 0.7, DataCloud::from_points({y})) - (y - x) / 0.49).norm(), 1e-13);
}

TEST(GaussianScore, SymmetricPairCancels) {
  const auto cloud = DataCloud::from_points({vec({-1, 0.5}), vec({1, -0.5})});
  EXPECT_LT(gaussian_score(vec({0, 0}), 0.8, cloud).norm(), 1e-15);
}

TEST(GaussianScore, MatchesFiniteDifferenceOfLogDensity) {
  const DataCloud cloud = standard_ten_point_cloud();
  Engine rng(7);
  const double h = 1e-5;
  for (double sigma : {0.3, 1.0, 4.0}) {
    for (int i = 0; i < 20; ++i) {
      const Vector x = vec({2 * standard_normal(rng), 2 * standard_normal(rng)});
      const Vector s = gaussian_score(x, sigma, cloud);
      for (int k = 0; k < 2; ++k) {
        Vector xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        const double fd =
            (gaussian_mixture_log_density(xp, sigma, cloud) - gaussian_mixture_log_density(xm, sigma, cloud)) / (2 * h);
        EXPECT_NEAR(s[k], fd, 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST(FieldScoreDivergence, SinglePointVanishes) {
  const auto cloud = DataCloud::from_points({vec({0.3, 0.1})});
  Engine rng(8);
  const auto probes = gaussian_probes(rng, cloud, 0.5, 64);
  for (double d : {1.0, 16.0, 1e6}) EXPECT_LT(field_score_divergence(0.5, d, cloud, probes), 1e-12);
}

TEST(FieldScoreDivergence, DecreasesWithD) {
  const DataCloud cloud = standard_ten_point_cloud();
  Engine rng(9);
  const auto probes = gaussian_probes(rng, cloud, 0.5, 256);
  double prev = std::numeric_limits<double>::infinity();
  for (double d : {16.0, 256.0, 4096.0, 65536.0, 1048576.0}) {
    const double v = field_score_divergence(0.5, d, cloud, probes);
    EXPECT_LT(v, prev) << "D=" << d;
    prev = v;
  }
  EXPECT_LT(prev, 1e-2);
}

TEST(Continuity, SecondOrderConvergence) {
  for (const auto& cloud : {line_cloud({0}), line_cloud({-1, 1})}) {
    const auto space = SpaceConfig::finite(1, 1);
    const double a = continuity_residual(Lattice{{-3}, {3}}, cloud, 1.0, 0.02, space).max_abs;
    const double b = continuity_residual(Lattice{{-3}, {3}}, cloud, 1.0, 0.01, space).max_abs;
    EXPECT_GE(a / b, 3.0);
    EXPECT_LE(a / b, 5.0);
  }
}

TEST(Continuity, SinglePointBound) {
  const auto res = continuity_residual(Lattice{{-3}, {3}}, line_cloud({0}), 1.0, 1e-3, SpaceConfig::finite(1, 1));
  EXPECT_LT(res.max_abs, 1e-4);
}

TEST(Continuity, SymmetricCloudGivesEvenResidual) {
  const auto res = continuity_residual(Lattice{{-2}, {2}}, line_cloud({-1, 1}), 1.0, 0.01, SpaceConfig::finite(1, 3));
  const std::size_t n = res.residual.size();
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(res.residual[i], res.residual[n - 1 - i], 1e-8);
}

TEST(Continuity, TwoDimensionalCloud) {
  const auto cloud = DataCloud::from_points({vec({0, 0}), vec({0.5, -0.5})});
  const auto space = SpaceConfig::finite(2, 3);
  const double a = continuity_residual(Lattice{{-1, -1}, {1, 1}}, cloud, 0.8, 0.04, space).max_abs;
  const double b = continuity_residual(Lattice{{-1, -1}, {1, 1}}, cloud, 0.8, 0.02, space).max_abs;
  EXPECT_GE(a / b, 3.0);
  EXPECT_LE(a / b, 5.0);
}

TEST(Continuity, RejectsCoarseGridAndHighDimension) {
  EXPECT_THROW(continuity_residual(Lattice{{-1}, {1}}, line_cloud({0}), 0.5, 0.5, SpaceConfig::finite(1, 1)),
               ValidationError);
  const auto cloud3 = DataCloud::from_points({vec({0, 0, 0})});
  EXPECT_THROW(continuity_residual(Lattice{{-1, -1, -1}, {1, 1, 1}}, cloud3, 1.0, 0.1, SpaceConfig::finite(3, 1)),
               ValidationError);
}
