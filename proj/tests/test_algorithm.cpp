#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "dimix/algorithm.hpp"
#include "dimix/analysis.hpp"
#include "dimix/rng.hpp"

using namespace dimix;

namespace {

DistributedProblem regression(int n, int N, int d, std::uint64_t seed, bool uniform = false) {
  const auto data = synthesize(N, d, seed);
  const auto r = uniform ? WeightVector::uniform(n) : WeightVector::random(n, seed);
  auto parts = partition(data, r, seed);
  return make_distributed(r, std::move(parts.locals), data);
}

// Objectives with zero gradient everywhere: H = 0 needs zero features.
std::vector<LocalObjective> flat(int n, int d) {
  std::vector<LocalObjective> out;
  for (int i = 0; i < n; ++i) out.emplace_back(std::vector<Eigen::Index>{i}, Matrix::Zero(1, d), Vector::Zero(1));
  return out;
}

Matrix random_matrix(Rng& rng, int n, int d) {
  Matrix X(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) X(i, j) = rng.normal();
  return X;
}

}  // namespace

TEST(StepSchedule, ValuesAndValidation) {
  const StepSchedule s(0.1, 0.25, 0.7, 0.75);
  EXPECT_DOUBLE_EQ(s.alpha(16), 0.1 / 2.0);
  EXPECT_DOUBLE_EQ(s.beta(16), 0.7 / 8.0);
  for (Iteration t = 1; t < 1000; ++t) {
    ASSERT_GT(s.beta(t), 0.0);
    ASSERT_LE(s.beta(t), 1.0);
    ASSERT_LE(s.beta(t + 1), s.beta(t));
  }
  EXPECT_THROW(StepSchedule(0.1, 0.25, 1.5, 0.75), std::invalid_argument);
  EXPECT_THROW(StepSchedule(0.1, 0.25, 0.0, 0.75), std::invalid_argument);
  EXPECT_THROW(StepSchedule(0.1, 1.0, 0.7, 0.75), std::invalid_argument);
  EXPECT_THROW(StepSchedule(0.1, 0.25, 0.7, 0.0), std::invalid_argument);
  EXPECT_THROW(StepSchedule(-0.1, 0.25, 0.7, 0.5), std::invalid_argument);
}

TEST(Step, IdentityMixingWithFlatObjectivesIsAFixedPoint) {
  Rng rng(1);
  const auto locals = flat(4, 3);
  const RunState s{5, random_matrix(rng, 4, 3)};
  const NoiseStreams streams(1);
  const auto next = step(s, MixingMatrix{Matrix::Identity(4, 4)}, NoiseModel::noiseless(), locals,
                         StepSchedule(0.3, 0.5, 0.9, 0.5), streams);
  EXPECT_EQ(next.t, 6);
  EXPECT_LE((next.X - s.X).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Step, SingleAgentIsGradientDescent) {
  auto prob = regression(1, 20, 4, 2);
  const StepSchedule sched(0.5, 0.25, 0.8, 0.75);
  Rng rng(2);
  const RunState s{3, random_matrix(rng, 1, 4)};
  const auto next = step(s, MixingMatrix{Matrix::Identity(1, 1)}, NoiseModel::noiseless(),
                         prob.locals, sched, NoiseStreams(0));
  const Vector x = s.X.row(0).transpose();
  const Vector expect = x - sched.alpha(3) * sched.beta(3) * prob.locals[0].gradient(x);
  EXPECT_LE((next.X.row(0).transpose() - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Step, FullAveragingFromConsensusMovesTheAverageByAGradientStep) {
  const int n = 5, d = 3;
  const auto data = synthesize(30, d, 3);
  std::vector<Eigen::Index> all(30);
  std::iota(all.begin(), all.end(), 0);
  std::vector<LocalObjective> locals(n, LocalObjective(all, data.U, data.v));
  const auto r = WeightVector::random(n, 3);
  const MixingMatrix W{Vector::Ones(n) * r.values().transpose()};
  Vector c(d);
  c << 0.3, -0.2, 1.0;
  const RunState s{7, c.transpose().replicate(n, 1)};
  const StepSchedule sched(0.4, 0.3, 0.6, 0.5);
  const auto next = step(s, W, NoiseModel::noiseless(), locals, sched, NoiseStreams(0));
  const Vector xbar = weighted_average(next.X, r);
  const Vector expect = c - sched.alpha(7) * sched.beta(7) * locals[0].gradient(c);
  EXPECT_LE((xbar - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(StepMatrix, IdentityWhenNothingMoves) {
  Rng rng(4);
  const auto locals = flat(3, 2);
  const RunState s{2, random_matrix(rng, 3, 2)};
  const auto next = step_matrix(s, MixingMatrix{Matrix::Identity(3, 3)}, Matrix::Zero(3, 2), locals,
                                StepSchedule(1, 0.5, 1, 0.5));
  EXPECT_LE((next.X - s.X).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(StepMatrix, BetaOneIsPureMixing) {
  // beta(1) = beta0 = 1.
  auto prob = regression(4, 40, 3, 5, true);
  Rng rng(5);
  const RunState s{1, random_matrix(rng, 4, 3)};
  const Matrix E = random_matrix(rng, 4, 3);
  const auto W = gossip_matrix(1, prob.r);
  const StepSchedule sched(0.2, 0.5, 1.0, 0.5);
  const auto next = step_matrix(s, W, E, prob.locals, sched);
  const Matrix expect = W.W * s.X + E - sched.alpha(1) * stacked_gradient(prob.locals, s.X);
  EXPECT_LE((next.X - expect).cwiseAbs().maxCoeff(), 1e-14);
}

class DualPath : public ::testing::TestWithParam<int> {};

TEST_P(DualPath, PerAgentAndMatrixFormAgree) {
  const int n = GetParam();
  auto prob = regression(n, std::max(n, 30), 5, 6 + n);
  const auto schedule = n >= 3 ? MixingSchedule::gossip(prob.r)
                               : MixingSchedule::from_list("single", prob.r,
                                                           {MixingMatrix{Matrix::Identity(n, n)}}, 1);
  const StepSchedule sched(0.1, 0.25, 0.7, 0.75);
  for (const auto& noise : {NoiseModel::noiseless(), NoiseModel::quantizer(4), NoiseModel::gaussian(0.2)}) {
    RunState a = RunState::initial(n, 5), b = a;
    const NoiseStreams streams(17);
    for (int k = 0; k < 60; ++k) {
      Matrix E;
      const auto W = schedule.at(a.t);
      a = step(a, W, noise, prob.locals, sched, streams, &E);
      b = step_matrix(b, W, E, prob.locals, sched);
      ASSERT_LE((a.X - b.X).cwiseAbs().maxCoeff(), 1e-13) << noise.describe() << " k=" << k;
      b.X = a.X;  // compare one step at a time
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Sizes, DualPath, ::testing::Values(1, 3, 20));

TEST(Mixing, WeightedAverageIsInvariant) {
  const auto r = WeightVector::random(8, 7);
  const auto schedule = MixingSchedule::gossip(r);
  const auto locals = flat(8, 3);
  Rng rng(7);
  RunState s{1, random_matrix(rng, 8, 3)};
  const StepSchedule sched(1, 0.5, 0.9, 0.5);
  for (int k = 0; k < 100; ++k) {
    const Vector before = weighted_average(s.X, r);
    s = step(s, schedule.at(s.t), NoiseModel::noiseless(), locals, sched, NoiseStreams(0));
    ASSERT_LE((weighted_average(s.X, r) - before).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Mixing, GossipReachesConsensus) {
  const int n = 6;
  const auto r = WeightVector::random(n, 8);
  const auto schedule = MixingSchedule::gossip(r);
  const auto locals = flat(n, 2);
  Rng rng(8);
  RunState s{1, random_matrix(rng, n, 2)};
  const StepSchedule sched(1, 0.5, 1.0, 0.05);
  const double initial = deviation_sq(s.X, r);
  double prev = initial;
  while (s.t < 200 * n) {
    s = step(s, schedule.at(s.t), NoiseModel::noiseless(), locals, sched, NoiseStreams(0));
    const double dev = deviation_sq(s.X, r);
    ASSERT_LE(dev, prev * (1 + 1e-12) + 1e-28 * initial);
    prev = dev;
  }
  EXPECT_LE(prev, 1e-8 * initial);
}

TEST(Run, TrivialHorizonAndShape) {
  auto prob = regression(4, 40, 3, 9);
  const auto schedule = MixingSchedule::fixed_cycle(prob.r);
  const auto tr = run(schedule, NoiseModel::noiseless(), prob, StepSchedule(0.1, 0.25, 0.7, 0.75), 1, 3);
  ASSERT_EQ(tr.records.size(), 1u);
  EXPECT_EQ(tr.records[0].t, 1);
  EXPECT_EQ(tr.records[0].deviation_sq, 0.0);
  EXPECT_NEAR(tr.records[0].dist_opt_sq, prob.x_star.squaredNorm(), 1e-12);
  EXPECT_THROW(run(schedule, NoiseModel::noiseless(), prob, StepSchedule(0.1, 0.25, 0.7, 0.75), 0, 3),
               std::invalid_argument);
}

TEST(Run, DefaultConfigurationCompletes) {
  auto prob = regression(20, 100, 25, 1);
  const auto schedule = MixingSchedule::fixed_cycle(prob.r);
  const auto tr = run(schedule, NoiseModel::quantizer(4), prob, StepSchedule(0.1, 0.25, 0.7, 0.75),
                      5000, 1, RunOptions{{1, 5000}, std::nullopt});
  ASSERT_FALSE(tr.aborted) << tr.diagnostic;
  ASSERT_EQ(tr.records.size(), 5000u);
  for (const auto& rec : tr.records) {
    ASSERT_TRUE(std::isfinite(rec.loss_pooled) && std::isfinite(rec.dist_opt_sq));
  }
  ASSERT_EQ(tr.checkpoints.size(), 2u);
  EXPECT_EQ(tr.checkpoints[1].first, 5000);
  EXPECT_NEAR(tr.at(5000).dist_opt_sq, dist_opt_sq(tr.checkpoints[1].second, prob.r, prob.x_star),
              1e-15);
  EXPECT_LT(tr.at(5000).loss_pooled, tr.at(1).loss_pooled);
}

TEST(Run, SeededRunsAreReproducible) {
  auto prob = regression(5, 30, 4, 10);
  const auto schedule = MixingSchedule::gossip(prob.r);
  const StepSchedule sched(0.1, 0.25, 0.7, 0.75);
  const auto a = run(schedule, NoiseModel::quantizer(2), prob, sched, 300, 42);
  const auto b = run(schedule, NoiseModel::quantizer(2), prob, sched, 300, 42);
  const auto c = run(schedule, NoiseModel::quantizer(2), prob, sched, 300, 43);
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    ASSERT_EQ(a.records[k].dist_opt_sq, b.records[k].dist_opt_sq);
  }
  EXPECT_NE(a.records.back().dist_opt_sq, c.records.back().dist_opt_sq);
  // A shorter horizon is a prefix of the longer one.
  const auto short_run = run(schedule, NoiseModel::quantizer(2), prob, sched, 100, 42);
  for (std::size_t k = 0; k < short_run.records.size(); ++k) {
    ASSERT_EQ(short_run.records[k].dist_opt_sq, a.records[k].dist_opt_sq);
  }
}

TEST(Run, DivergenceIsFlagged) {
  auto prob = regression(3, 30, 3, 11);
  const auto schedule = MixingSchedule::fixed_cycle(prob.r);
  const auto tr = run(schedule, NoiseModel::noiseless(), prob, StepSchedule(500, 0.01, 1.0, 0.01), 400, 1);
  EXPECT_TRUE(tr.aborted);
  EXPECT_FALSE(tr.diagnostic.empty());
  EXPECT_LT(tr.records.size(), 400u);
}

TEST(Run, SingleAgentMatchesPlainGradientDescent) {
  // Independent loop over the same step sequence.
  auto prob = regression(1, 20, 3, 12);
  const StepSchedule sched(1.0, 0.25, 1.0, 0.75);
  const auto schedule = MixingSchedule::from_list("one", prob.r, {MixingMatrix{Matrix::Identity(1, 1)}}, 1);
  const Iteration T = 2000;
  const auto tr = run(schedule, NoiseModel::noiseless(), prob, sched, T, 0, RunOptions{{T}, std::nullopt});
  const Matrix& H = prob.locals[0].hessian();
  const Vector& b = prob.locals[0].linear_term();
  Vector x = Vector::Zero(3);
  for (Iteration t = 1; t < T; ++t) {
    const double step_size = 1.0 / std::pow(double(t), 0.25) * 1.0 / std::pow(double(t), 0.75);
    x = x - step_size * (H * x - b);
  }
  EXPECT_LE((tr.checkpoints[0].second.row(0).transpose() - x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MonteCarlo, AggregatesAndFlags) {
  auto prob = regression(4, 40, 3, 13);
  const auto schedule = MixingSchedule::gossip(prob.r);
  const MonteCarloSetup setup{&schedule, NoiseModel::quantizer(4), &prob,
                              StepSchedule(0.1, 0.25, 0.7, 0.75), 200};
  const auto one = monte_carlo(setup, 1, 7);
  ASSERT_EQ(one.aggregate.size(), 200u);
  for (std::size_t k = 0; k < 200; ++k) {
    ASSERT_EQ(one.aggregate[k].mean.dist_opt_sq, one.traces[0].records[k].dist_opt_sq);
    ASSERT_EQ(one.aggregate[k].stderr_.dist_opt_sq, 0.0);
  }
  const auto many = monte_carlo(setup, 6, 7, 3);
  const auto serial = monte_carlo(setup, 6, 7, 1);
  EXPECT_EQ(many.completed, 6u);
  for (std::size_t k = 0; k < 200; k += 13) {
    ASSERT_EQ(many.aggregate[k].mean.dist_opt_sq, serial.aggregate[k].mean.dist_opt_sq);
    double s = 0.0, ss = 0.0;
    for (const auto& tr : serial.traces) s += tr.records[k].dist_opt_sq;
    const double m = s / 6;
    for (const auto& tr : serial.traces) ss += std::pow(tr.records[k].dist_opt_sq - m, 2);
    EXPECT_NEAR(serial.aggregate[k].stderr_.dist_opt_sq, std::sqrt(ss / 5) / std::sqrt(6.0), 1e-15);
  }
  EXPECT_EQ(many.traces[2].seed, 9u);
}

TEST(MonteCarlo, NoiselessHasZeroStderr) {
  auto prob = regression(4, 40, 3, 14);
  const auto schedule = MixingSchedule::fixed_cycle(prob.r);
  const MonteCarloSetup setup{&schedule, NoiseModel::noiseless(), &prob,
                              StepSchedule(0.1, 0.25, 0.7, 0.75), 100};
  const auto mc = monte_carlo(setup, 4, 1);
  for (const auto& a : mc.aggregate) ASSERT_EQ(a.stderr_.loss_pooled, 0.0);
}

TEST(MonteCarlo, AbortedRunsAreExcluded) {
  RunTrace ok, bad;
  ok.seed = 1;
  bad.seed = 2;
  bad.aborted = true;
  for (int t = 1; t <= 3; ++t) {
    TraceRecord rec;
    rec.t = t;
    rec.dist_opt_sq = t;
    ok.records.push_back(rec);
    rec.dist_opt_sq = 1e9;
    if (t < 3) bad.records.push_back(rec);
  }
  const std::vector<RunTrace> traces{ok, bad};
  const auto agg = aggregate_traces(traces);
  ASSERT_EQ(agg.size(), 3u);
  EXPECT_EQ(agg[2].mean.dist_opt_sq, 3.0);
}
