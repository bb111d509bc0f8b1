#include <gtest/gtest.h>

#include <cmath>

#include "dimix/analysis.hpp"
#include "dimix/lemma_oracle.hpp"
#include "dimix/rng.hpp"

using namespace dimix;

namespace {

Matrix random_matrix(Rng& rng, int n, int d) {
  Matrix X(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) X(i, j) = rng.normal();
  return X;
}

Vector random_vector(Rng& rng, int d) { return random_matrix(rng, d, 1).col(0); }

// Double loop, no recursion.
double direct_weighted_sum(double a, double sigma, double delta, Iteration t) {
  double total = 0.0;
  for (Iteration s = 1; s <= t - 1; ++s) {
    double prod = 1.0;
    for (Iteration k = s + 1; k <= t - 1; ++k) prod *= 1.0 - a / std::pow(double(k), delta);
    total += std::pow(double(s), -sigma) * prod;
  }
  return total;
}

}  // namespace

TEST(CheckReport, RecordsWorstInstance) {
  CheckReport rep;
  rep.record(0.5, 1e-12, 1, "a");
  rep.record(-1e-13, 1e-12, 2, "b");
  EXPECT_TRUE(rep.passed());
  rep.record(-1e-3, 1e-12, 3, "c");
  EXPECT_FALSE(rep.passed());
  EXPECT_EQ(rep.instances, 3u);
  EXPECT_EQ(rep.worst_seed, 3u);
  EXPECT_EQ(rep.worst_instance, "c");
  CheckReport other;
  other.record(-1.0, 1e-12, 9, "d");
  rep.merge(other);
  EXPECT_EQ(rep.instances, 4u);
  EXPECT_EQ(rep.violations, 2u);
  EXPECT_EQ(rep.worst_seed, 9u);
}

TEST(Contraction, OneStepConsensusGivesZero) {
  const auto r = WeightVector::random(5, 1);
  const MixingMatrix M{Vector::Ones(5) * r.values().transpose()};
  const auto schedule = MixingSchedule::from_list("consensus", r, {M}, 1);
  Rng rng(1);
  const auto one = [](Iteration) { return 1.0; };
  const auto rep = check_contraction(schedule, one, 1.0, random_matrix(rng, 5, 3), 1, 4);
  EXPECT_TRUE(rep.passed());
  EXPECT_EQ(rep.instances, 1u);
}

TEST(Contraction, GossipThreeAgents) {
  const auto schedule = MixingSchedule::gossip(WeightVector::uniform(3));
  Rng rng(2);
  const StepSchedule sched(1.0, 0.5, 1.0, 0.5);
  const auto rep = check_contraction(schedule, sched, random_matrix(rng, 3, 2), 1, 20);
  EXPECT_TRUE(rep.passed());
  EXPECT_GE(rep.worst_slack, 0.0);
}

TEST(Contraction, ConsensusInputIsInTheKernel) {
  const auto r = WeightVector::random(6, 3);
  const auto schedule = MixingSchedule::fixed_cycle(r);
  Vector c(4);
  c << 1, -2, 0.5, 3;
  const Matrix U = Vector::Ones(6) * c.transpose();
  const StepSchedule sched(1.0, 0.5, 0.6, 0.3);
  const auto rep = check_contraction(schedule, sched, U, 2, 40);
  EXPECT_TRUE(rep.passed());
  // slack is the full right side, kappa prod ||U||^2 > 0
  EXPECT_GT(rep.worst_slack, 0.0);
}

TEST(Contraction, InstancesReplayFromSeed) {
  const auto a = make_contraction_instance(77);
  const auto b = make_contraction_instance(77);
  EXPECT_EQ(a.U, b.U);
  EXPECT_EQ(a.s, b.s);
  EXPECT_EQ(a.t, b.t);
  const auto ra = check_contraction(a.schedule, a.sched, a.U, a.s, a.t);
  const auto rb = check_contraction(b.schedule, b.sched, b.U, b.s, b.t);
  EXPECT_EQ(ra.worst_slack, rb.worst_slack);
}

TEST(Submultiplicative, Examples) {
  Rng rng(4);
  const auto r = WeightVector::random(4, 4);
  const Matrix A = random_matrix(rng, 4, 3);
  const auto id = check_submultiplicative(A, Matrix::Identity(3, 3), r);
  EXPECT_NEAR(id.worst_slack, r_norm(A, r) * (std::sqrt(3.0) - 1.0), 1e-12);
  EXPECT_EQ(check_submultiplicative(Matrix::Zero(4, 3), random_matrix(rng, 3, 2), r).worst_slack, 0.0);
  // One nonzero row times a rank-1 matrix with aligned factors: equality.
  Matrix A1 = Matrix::Zero(4, 3);
  Vector u = random_vector(rng, 3);
  A1.row(2) = u.transpose();
  const Matrix B1 = u * random_vector(rng, 2).transpose();
  const auto eq = check_submultiplicative(A1, B1, r);
  EXPECT_TRUE(eq.passed());
  EXPECT_NEAR(eq.worst_slack, 0.0, 1e-12);
}

TEST(Young, Examples) {
  Rng rng(5);
  const Vector u = random_vector(rng, 5);
  EXPECT_NEAR(check_young(u, Vector::Zero(5), 0.3).worst_slack, 0.3 * u.squaredNorm(), 1e-13);
  EXPECT_NEAR(check_young(u, u, 1.0).worst_slack, 0.0, 1e-12);
  EXPECT_NEAR(check_young(u, Vector(-u), 1.0).worst_slack, 4.0 * u.squaredNorm(), 1e-12);
  EXPECT_THROW(check_young(u, u, 0.0), std::invalid_argument);
  const auto r = WeightVector::random(3, 5);
  const Matrix U = random_matrix(rng, 3, 2);
  EXPECT_NEAR(check_young(U, U, r, 1.0).worst_slack, 0.0, 1e-12);
}

TEST(ProductBound, Examples) {
  const auto a = check_product_bound(0.5, 0.0, 1, 3);
  EXPECT_TRUE(a.passed());
  EXPECT_NEAR(a.worst_slack, std::exp(-1.0) - 0.25, 1e-12);
  const auto b = check_product_bound(0.5, 1.0, 1, 4);
  EXPECT_TRUE(b.passed());
  // (1/2)(3/4)(5/6) = 0.3125
  EXPECT_NEAR(b.worst_slack, 0.5 - 0.3125, 1e-12);
  const auto c = check_product_bound(0.5, 0.5, 7, 7);
  EXPECT_NEAR(c.worst_slack, 0.0, 1e-15);
  EXPECT_EQ(check_product_bound(0.9, 0.0, 1, 5).instances, 1u);
  EXPECT_THROW(check_product_bound(1.5, 0.0, 1, 5), std::invalid_argument);
}

TEST(Telescope, Examples) {
  const std::vector<double> half(2, 0.5);
  const auto rep = check_telescope(half, 1.0, 3);
  EXPECT_EQ(rep.kind, CheckKind::kIdentity);
  EXPECT_TRUE(rep.passed());
  EXPECT_NEAR(rep.worst_slack, 0.0, 1e-15);
  const auto empty = check_telescope({}, 2.0, 1);
  EXPECT_TRUE(empty.passed());
  EXPECT_NEAR(empty.worst_slack, 0.0, 1e-15);
}

TEST(Telescope, RandomSequences) {
  Rng rng(6);
  for (double lambda : {-3.0, 0.1, 7.0}) {
    for (int trial = 0; trial < 50; ++trial) {
      const Iteration t = 1 + static_cast<Iteration>(rng.below(50));
      std::vector<double> beta(static_cast<std::size_t>(t));
      for (auto& b : beta) b = rng.uniform(-2, 2);
      ASSERT_TRUE(check_telescope(beta, lambda, t).passed()) << lambda << ' ' << t;
    }
  }
}

TEST(SumBound, RecursionMatchesDoubleLoop) {
  for (const auto& c : {SumBoundCase{1, 2, 0}, SumBoundCase{0.3, 1.5, 0.75}, SumBoundCase{2, 1.5, 1},
                        SumBoundCase{0.1, 0.99, 0.5}}) {
    for (Iteration t : {1, 2, 10, 57}) {
      const double direct = direct_weighted_sum(c.a, c.sigma, c.delta, t);
      ASSERT_NEAR(weighted_sum(c.a, c.sigma, c.delta, t), direct, 1e-12 * (1 + direct));
    }
  }
}

TEST(SumBound, Examples) {
  EXPECT_NEAR(sum_bound_tau(1, 2, 0), 4.0, 1e-15);
  const double lhs = direct_weighted_sum(1, 2, 0, 10);
  EXPECT_LE(lhs, 0.68);
  const auto rep = check_sum_bound(1, 2, 0, 10);
  EXPECT_TRUE(rep.passed());
  EXPECT_NEAR(rep.worst_slack, 0.68 - lhs, 1e-12);
  EXPECT_EQ(check_sum_bound(1, 2, 0, 4).skipped, 1u);

  for (Iteration t = 4; t <= 200; ++t) {
    const auto r2 = check_sum_bound(2, 1.5, 1, t);
    ASSERT_TRUE(r2.passed()) << t;
    ASSERT_NEAR(r2.worst_slack,
                A_constant(2, 1.5, 1) * std::pow(double(t), -0.5) - direct_weighted_sum(2, 1.5, 1, t),
                1e-10);
  }
  // the noise term of the consensus analysis: sigma = 2 mu, delta = mu, a = lambda beta0
  for (Iteration t : {500, 1500}) EXPECT_TRUE(check_sum_bound(0.7, 1.5, 0.75, t).passed());
}

TEST(SumBound, GridHitsEveryBranch) {
  int above = 0, at = 0, below = 0, log_branch = 0;
  for (const auto& c : sum_bound_grid()) {
    if (c.delta == 1.0) {
      ++log_branch;
    } else if (c.sigma > 1.0) {
      ++above;
    } else if (c.sigma == 1.0) {
      ++at;
    } else {
      ++below;
    }
  }
  EXPECT_GE(above, 3);
  EXPECT_GE(at, 3);
  EXPECT_GE(below, 3);
  EXPECT_GE(log_branch, 3);
}

TEST(StrongConvexity, Examples) {
  std::vector<LocalObjective> id{LocalObjective({0, 1, 2}, std::sqrt(3.0) * Matrix::Identity(3, 3),
                                                Vector::Zero(3))};
  const auto p = make_distributed(WeightVector::uniform(1), id);
  Vector x(3);
  x << 1, -2, 4;
  EXPECT_NEAR(check_strong_convexity_bound(p, x).worst_slack, 0.0, 1e-12);
  EXPECT_NEAR(check_strong_convexity_bound(p, p.x_star).worst_slack, 0.0, 1e-15);

  Matrix U(2, 2);
  U << std::sqrt(0.4), 0, 0, std::sqrt(10.0);
  Vector v(2);
  v << 1, -1;
  const auto q = make_distributed(WeightVector::uniform(1), {LocalObjective({0, 1}, U, v)});
  Rng rng(8);
  for (int k = 0; k < 200; ++k) {
    ASSERT_TRUE(check_strong_convexity_bound(q, random_vector(rng, 2) * 10).passed());
  }
}

TEST(Suite, DeterministicAndClean) {
  SuiteOptions opt;
  opt.random_instances = 100;
  opt.product_t_max = 2000;
  opt.sum_t_max = 500;
  const auto a = run_lemma_suite(opt);
  opt.jobs = 3;
  const auto b = run_lemma_suite(opt);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_TRUE(a[k].passed()) << a[k].lemma << " worst seed " << a[k].worst_seed << ": "
                               << a[k].worst_instance;
    EXPECT_GT(a[k].instances, 0u) << a[k].lemma;
    EXPECT_EQ(a[k].lemma, b[k].lemma);
    EXPECT_EQ(a[k].instances, b[k].instances);
    EXPECT_EQ(a[k].worst_slack, b[k].worst_slack);
    EXPECT_EQ(a[k].worst_seed, b[k].worst_seed);
  }
}

TEST(Suite, FullDefaultGridHasNoViolations) {
  const auto reports = run_lemma_suite();
  for (const auto& rep : reports) {
    EXPECT_TRUE(rep.passed()) << rep.lemma << " worst seed " << rep.worst_seed;
    if (rep.lemma.find("young") != std::string::npos ||
        rep.lemma.find("submult") != std::string::npos ||
        rep.lemma.find("convex") != std::string::npos) {
      EXPECT_GE(rep.instances, 1000u) << rep.lemma;
    }
  }
}
