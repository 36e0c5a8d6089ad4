#include <gtest/gtest.h>

#include "pfgmpp/datasets.hpp"
#include "pfgmpp/objective.hpp"
#include "pfgmpp/trainer.hpp"

using namespace pfgmpp;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  std::size_t i = 0;
  for (double x : v) out[static_cast<Eigen::Index>(i++)] = x;
  return out;
}

}  // namespace

TEST(PfgmppTarget, Example) {
  EXPECT_EQ(pfgmpp_target(vec({2, 0}), vec({0, 0}), 1.0, SpaceConfig::finite(2, 4)), vec({4, 0}));
  EXPECT_EQ(pfgmpp_target(vec({1, 1}), vec({1, 1}), 0.3, SpaceConfig::finite(2, 4)), vec({0, 0}));
  EXPECT_THROW(pfgmpp_target(vec({1, 1}), vec({1, 1}), 0.0, SpaceConfig::finite(2, 4)), ValidationError);
}

TEST(PfgmppTarget, SecondMomentOverKernel) {
  for (double d : {6.0, 16.0, 256.0}) {
    const auto space = SpaceConfig::finite(2, d);
    Engine rng(1);
    double acc = 0.0;
    const int n = 400000;
    const Vector y = vec({0.2, -0.4});
    for (int i = 0; i < n; ++i) {
      const auto p = perturb(rng, y, 1.3, space);
      acc += pfgmpp_target(p.x, y, p.r, space).squaredNorm();
    }
    const double expect = 2.0 * d / (d - 2.0);
    EXPECT_NEAR(acc / n, expect, 0.02 * expect) << "D=" << d;
  }
}

TEST(DsmTarget, Example) {
  EXPECT_EQ(dsm_target(vec({1, 1}), vec({0, 0}), 0.5), vec({2, 2}));
  EXPECT_THROW(dsm_target(vec({1, 1}), vec({0, 0}), 0.0), ValidationError);
}

TEST(DsmTarget, EqualsPfgmppUnderAlignment) {
  Engine rng(2);
  for (int i = 0; i < 100; ++i) {
    const double d = 1.0 + 1000.0 * uniform01(rng);
    const double sigma = 0.01 + uniform01(rng);
    const auto space = SpaceConfig::finite(2, d);
    const Vector x = vec({standard_normal(rng), standard_normal(rng)});
    const Vector y = vec({standard_normal(rng), standard_normal(rng)});
    const Vector a = pfgmpp_target(x, y, space.anchor_for_sigma(sigma), space);
    const Vector b = dsm_target(x, y, sigma);
    EXPECT_LT((a - b).norm(), 4e-16 * b.norm() + 1e-300);
  }
}

TEST(DsmTarget, UnitVarianceUnderGaussianPerturbation) {
  Engine rng(3);
  const auto g = SpaceConfig::gaussian(2);
  double acc = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const auto p = perturb(rng, vec({1, 1}), 0.4, g);
    acc += std::pow(dsm_target(p.x, vec({1, 1}), 0.4)[0], 2);
  }
  EXPECT_NEAR(acc / n, 1.0, 0.02);
}

TEST(MinimizerOracle, SinglePointIsTarget) {
  const Vector y = vec({0.5, 0.5});
  const auto space = SpaceConfig::finite(2, 9);
  const AugmentedPoint p{vec({2, -1}), 0.7};
  EXPECT_LT((minimizer_oracle(p, DataCloud::from_points({y}), space) - pfgmpp_target(p.x, y, p.r, space)).norm(),
            1e-15);
}

TEST(MinimizerOracle, EqualsScaledFieldRatio) {
  const DataCloud cloud = standard_ten_point_cloud();
  Engine rng(4);
  for (double d : {1.0, 3.0, 128.0, 5000.0}) {
    const auto space = SpaceConfig::finite(2, d);
    for (int i = 0; i < 100; ++i) {
      const AugmentedPoint p{vec({3 * standard_normal(rng), 3 * standard_normal(rng)}), 0.05 + 5 * uniform01(rng)};
      const FieldValue f = empirical_field(p, cloud, space);
      const Vector expect = std::sqrt(d) * f.e_x / f.e_r;
      EXPECT_LT((minimizer_oracle(p, cloud, space) - expect).norm(), 1e-12 * (1 + expect.norm()));
    }
  }
}

TEST(MinimizerOracle, ParallelToFieldWithAugmentedComponent) {
  const DataCloud cloud = standard_cloud();
  Engine rng(5);
  for (int i = 0; i < 300; ++i) {
    const auto space = SpaceConfig::finite(2, 1 + 100 * uniform01(rng));
    const AugmentedPoint p{vec({3 * standard_normal(rng), 3 * standard_normal(rng)}), 0.05 + 3 * uniform01(rng)};
    Vector a(3), b(3);
    a << minimizer_oracle(p, cloud, space), std::sqrt(space.d());
    const FieldValue f = empirical_field(p, cloud, space);
    b << f.e_x, f.e_r;
    EXPECT_NEAR(a.dot(b) / (a.norm() * b.norm()), 1.0, 1e-12);
  }
}

TEST(MinimizerOracle, LargeDMatchesGaussianBranch) {
  const DataCloud cloud = standard_ten_point_cloud();
  const auto big = SpaceConfig::finite(2, 1e6);
  const auto g = SpaceConfig::gaussian(2);
  Engine rng(6);
  for (int i = 0; i < 100; ++i) {
    const double sigma = 0.2 + uniform01(rng);
    const Vector x = perturb(rng, cloud.point(i % 10), sigma, g).x;
    const Vector wg = posterior_weights({x, sigma}, cloud, g);
    Vector expect = Vector::Zero(2);
    for (int k = 0; k < cloud.size(); ++k) expect += wg[k] * (x - cloud.point(k)) / sigma;
    EXPECT_LT((minimizer_oracle({x, big.anchor_for_sigma(sigma)}, cloud, big) - expect).lpNorm<Eigen::Infinity>(),
              1e-3);
  }
}

TEST(StfTarget, ReducesToTargetWithoutAux) {
  const auto space = SpaceConfig::finite(2, 7);
  const AugmentedPoint p{vec({1, 2}), 0.9};
  EXPECT_LT((stf_target(p, vec({0, 1}), {}, space) - pfgmpp_target(p.x, vec({0, 1}), p.r, space)).norm(), 1e-15);
}

TEST(StfTarget, SymmetricPair) {
  const auto space = SpaceConfig::finite(2, 7);
  const AugmentedPoint p{vec({0, 1}), 0.9};
  const Vector got = stf_target(p, vec({-1, 0}), {vec({1, 0})}, space);
  EXPECT_LT((got - std::sqrt(7.0) / 0.9 * vec({0, 1})).norm(), 1e-14);
}

TEST(StfTarget, FullBatchMatchesMinimizer) {
  // With the whole cloud as the batch the restricted posterior is the full
  // posterior; drawing aux without replacement leaves only rounding.
  const DataCloud cloud = make_dataset(standard_mixture_spec(16, 3));
  const auto space = SpaceConfig::finite(2, 32);
  Engine rng(7);
  for (int i = 0; i < 50; ++i) {
    const int src = i % 16;
    const AugmentedPoint p = perturb(rng, cloud.point(src), space.anchor_for_sigma(0.5), space);
    std::vector<Vector> aux;
    for (int k = 0; k < 16; ++k)
      if (k != src) aux.push_back(cloud.point(k));
    EXPECT_LT((stf_target(p, cloud.point(src), aux, space) - minimizer_oracle(p, cloud, space)).norm(), 1e-3);
  }
}

TEST(StfTarget, ConvergesToMinimizerAsBatchGrows) {
  // Mean over resampled batches approaches the minimizer; the error shrinks
  // as the batch grows.
  const DataCloud cloud = standard_cloud();
  const auto space = SpaceConfig::finite(2, 16);
  Engine rng(8);
  std::uniform_int_distribution<int> pick(0, cloud.size() - 1);
  const int src = 3;
  const AugmentedPoint p = perturb(rng, cloud.point(src), space.anchor_for_sigma(1.5), space);
  const Vector m = minimizer_oracle(p, cloud, space);
  std::vector<double> errs;
  for (int batch : {8, 64, 512}) {
    Vector acc = Vector::Zero(2);
    const int reps = 2000;
    for (int t = 0; t < reps; ++t) {
      std::vector<Vector> aux;
      for (int k = 0; k < batch - 1; ++k) aux.push_back(cloud.point(pick(rng)));
      acc += stf_target(p, cloud.point(src), aux, space);
    }
    errs.push_back((acc / reps - m).norm());
  }
  EXPECT_LT(errs[1], errs[0]);
  EXPECT_LT(errs[2], errs[1]);
}

TEST(StfTarget, RejectsZeroAnchor) {
  EXPECT_THROW(stf_target({vec({0, 0}), 0.0}, vec({1, 1}), {}, SpaceConfig::finite(2, 2)), ValidationError);
}

TEST(PreconditionedLoss, ZeroForExactNetworkOutput) {
  // A one-layer linear net with zero weights outputs its bias; make every
  // pair want exactly that output.
  NetworkParams net = init_network(3, {}, 2, 1);
  net.weights[0].setZero();
  net.biases[0] = vec({0.25, -0.5});
  const Preconditioner pre;
  const auto space = SpaceConfig::finite(2, 8);
  std::vector<TrainingPair> batch;
  for (double r : {0.3, 1.0, 5.0}) {
    const Vector x = vec({0.7, 0.1});
    const double s = space.sigma_for_anchor(r);
    const Vector y = pre.c_out(s) * net.biases[0] + pre.c_skip(s) * x;
    batch.push_back(make_pair_from(y, {x, r}, space));
  }
  EXPECT_NEAR(preconditioned_loss(net, pre, batch, space).loss, 0.0, 1e-28);
}

TEST(PreconditionedLoss, DuplicatedBatchDoublesLoss) {
  const NetworkParams net = init_network(3, {8}, 2, 2);
  const DataCloud cloud = standard_ten_point_cloud();
  TrainConfig cfg;
  std::vector<TrainingPair> batch;
  Engine rng(3);
  for (int k = 0; k < 5; ++k) batch.push_back(make_training_pair(rng, cloud, cfg));
  std::vector<TrainingPair> twice = batch;
  twice.insert(twice.end(), batch.begin(), batch.end());
  const Preconditioner pre;
  EXPECT_EQ(preconditioned_loss(net, pre, twice, cfg.space).loss, 2.0 * preconditioned_loss(net, pre, batch, cfg.space).loss);
}

TEST(PreconditionedLoss, TwoParameterFiniteDifference) {
  // F(u) = w u_0 + b with a single input feature and output.
  NetworkParams net;
  net.weights.push_back(Matrix::Constant(1, 2, 0.0));
  net.weights[0](0, 0) = 0.3;
  net.biases.push_back(Vector::Constant(1, -0.2));
  const auto space = SpaceConfig::finite(1, 5);
  const Preconditioner pre;
  std::vector<TrainingPair> batch;
  Engine rng(4);
  for (int k = 0; k < 6; ++k) {
    const Vector y = Vector::Constant(1, standard_normal(rng));
    batch.push_back(make_pair_from(y, perturb(rng, y, 0.5 + uniform01(rng), space), space));
  }
  const LossGrad lg = preconditioned_loss(net, pre, batch, space);
  const double h = 1e-5;
  auto loss_at = [&](double w, double b) {
    NetworkParams q = net;
    q.weights[0](0, 0) = w;
    q.biases[0][0] = b;
    return preconditioned_loss(q, pre, batch, space).loss;
  };
  const double fd_w = (loss_at(0.3 + h, -0.2) - loss_at(0.3 - h, -0.2)) / (2 * h);
  const double fd_b = (loss_at(0.3, -0.2 + h) - loss_at(0.3, -0.2 - h)) / (2 * h);
  EXPECT_NEAR(lg.grad.weights[0](0, 0), fd_w, 1e-5 * std::abs(fd_w));
  EXPECT_NEAR(lg.grad.biases[0][0], fd_b, 1e-5 * std::abs(fd_b));
}

TEST(Preconditioner, ClosedForms) {
  const Preconditioner pre;
  for (double s : {1e-3, 0.1, 0.5, 2.0, 80.0}) {
    EXPECT_NEAR(pre.c_in(s) * pre.c_in(s) * (s * s + 0.25), 1.0, 1e-12);
    EXPECT_NEAR(pre.c_out(s), s * 0.5 / std::sqrt(s * s + 0.25), 1e-12);
    EXPECT_NEAR(pre.c_skip(s), 0.25 / (s * s + 0.25), 1e-12);
    EXPECT_NEAR(pre.c_noise(s), 0.25 * std::log(s), 1e-12);
    EXPECT_NEAR(pre.lambda(s) * pre.c_out(s) * pre.c_out(s), 1.0, 1e-12);
  }
}

TEST(Preconditioner, SmallAndLargeSigmaLimits) {
  const Preconditioner pre;
  EXPECT_NEAR(pre.c_skip(1e-8), 1.0, 1e-12);
  EXPECT_GT(pre.c_out(1e-8), 0.0);
  EXPECT_LT(pre.c_out(1e-8), 1e-7);
  EXPECT_NEAR(pre.c_in(1e-8), 2.0, 1e-12);
  EXPECT_LT(pre.c_skip(1e8), 1e-16);
  EXPECT_NEAR(pre.c_out(1e8), 0.5, 1e-12);
}
