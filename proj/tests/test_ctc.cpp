#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "hcctc/ctc/ctc.hpp"
#include "hcctc/ctc/ctc_op.hpp"
#include "hcctc/numerics/gradcheck.hpp"
#include "hcctc/numerics/ops.hpp"

namespace hcctc::ctc {
namespace {

using Md = Matrix<double>;
using Ids = std::vector<int>;

Md random_log_probs(int frames, int width, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.5);
  Md logits(frames, width);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = n(rng);
  return log_softmax_rows(logits);
}

double logsumexp(const std::vector<double>& v) {
  double acc = -std::numeric_limits<double>::infinity();
  for (double x : v) acc = log_add(acc, x);
  return acc;
}

TEST(Collapse, MergesThenDropsBlanks) {
  EXPECT_EQ(collapse(Ids{1, 1, 0, 2}), (Ids{1, 2}));
  EXPECT_EQ(collapse(Ids{0, 0, 0}), Ids{});
  EXPECT_EQ(collapse(Ids{1, 0, 1}), (Ids{1, 1}));
  EXPECT_EQ(collapse(Ids{}), Ids{});
}

TEST(Feasibility, RepeatsNeedSeparatingBlank) {
  EXPECT_EQ(min_frames(Ids{1, 1}), 3);
  EXPECT_EQ(min_frames(Ids{1, 2}), 2);
  EXPECT_EQ(min_frames(Ids{}), 0);
  EXPECT_TRUE(is_feasible(Ids{1, 2, 2, 1}, 5));
  EXPECT_FALSE(is_feasible(Ids{1, 2, 2, 1}, 4));
  EXPECT_EQ(expand_with_blanks(Ids{3, 4}), (Ids{0, 3, 0, 4, 0}));
}

TEST(LogAdd, HandlesNegativeInfinity) {
  const double ninf = -std::numeric_limits<double>::infinity();
  EXPECT_EQ(log_add(ninf, ninf), ninf);
  EXPECT_EQ(log_add(ninf, 1.5), 1.5);
  EXPECT_NEAR(log_add(std::log(0.25), std::log(0.5)), std::log(0.75), 1e-15);
}

TEST(CtcLoss, SingleFrame) {
  Md lp(1, 3);
  lp << std::log(0.2), std::log(0.5), std::log(0.3);
  EXPECT_NEAR(ctc_loss(lp, Ids{2}).loss, -std::log(0.3), 1e-15);
}

TEST(CtcLoss, UniformTwoFrames) {
  const Md lp = Md::Constant(2, 2, std::log(0.5));
  const LossResult r = ctc_loss(lp, Ids{1});
  EXPECT_NEAR(std::exp(-r.loss), 0.75, 1e-15);
  EXPECT_NEAR(r.loss, 0.2876820724517809, 1e-12);
  EXPECT_NEAR(brute_force_ctc(lp.array().exp().matrix(), Ids{1}), 0.75, 1e-15);
}

TEST(CtcLoss, InfeasibleRepeatIsInfiniteWithZeroGradient) {
  const Md lp = Md::Constant(2, 2, std::log(0.5));
  const LossResult r = ctc_loss(lp, Ids{1, 1});
  EXPECT_FALSE(r.feasible);
  EXPECT_EQ(r.loss, std::numeric_limits<double>::infinity());
  EXPECT_EQ(r.grad, Md::Zero(2, 2));
}

TEST(CtcLoss, EmptyTargetIsAllBlankPath) {
  Md p(2, 3);
  p << 0.6, 0.3, 0.1, 0.2, 0.2, 0.6;
  EXPECT_NEAR(brute_force_ctc(p, Ids{}), 0.6 * 0.2, 1e-15);
  EXPECT_NEAR(ctc_loss(p.array().log().matrix(), Ids{}).loss, -std::log(0.12), 1e-12);
}

TEST(CtcLoss, TargetIdOutsideWidth) {
  EXPECT_THROW(ctc_loss(Md::Zero(3, 2), Ids{2}), DimensionError);
  EXPECT_THROW(ctc_loss(Md::Zero(3, 2), Ids{0}), ContractError);
}

TEST(Lattice, ForwardBackwardIdentities) {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    const Md lp = random_log_probs(7, 4, rng);
    const Ids target{1, 3, 3};
    const Lattice lat = build_lattice(lp, target);
    const Eigen::Index S = static_cast<Eigen::Index>(lat.expanded.size());
    const Eigen::Index T = lp.rows();
    EXPECT_NEAR(log_add(lat.alpha(T - 1, S - 1), lat.alpha(T - 1, S - 2)), lat.log_likelihood, 1e-9);
    for (Eigen::Index t = 0; t < T; ++t) {
      std::vector<double> terms;
      for (Eigen::Index s = 0; s < S; ++s) terms.push_back(lat.alpha(t, s) + lat.beta(t, s) - lp(t, lat.expanded[s]));
      EXPECT_NEAR(logsumexp(terms), lat.log_likelihood, 1e-9);
    }
  }
}

TEST(CtcLoss, MatchesEnumerationOnRandomInstances) {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> frames(1, 6), width(2, 4), len(0, 3);
  for (int rep = 0; rep < 100; ++rep) {
    const int T = frames(rng), V = width(rng);
    Ids target(static_cast<std::size_t>(len(rng)));
    std::uniform_int_distribution<int> label(1, V - 1);
    for (int& y : target) y = label(rng);
    const Md lp = random_log_probs(T, V, rng);
    const double oracle = brute_force_ctc(lp.array().exp().matrix(), target);
    const LossResult r = ctc_loss(lp, target);
    if (!is_feasible(target, T)) {
      EXPECT_EQ(oracle, 0.0);
      EXPECT_FALSE(r.feasible);
      continue;
    }
    EXPECT_NEAR(std::exp(-r.loss), oracle, 1e-12);
  }
}

TEST(CtcLoss, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(43);
  for (int rep = 0; rep < 10; ++rep) {
    const Md lp = random_log_probs(8, 4, rng);
    const Ids target{2, 2, 1};
    const LossResult r = ctc_loss(lp, target);
    auto f = [&](const Eigen::VectorXd& v) {
      Md m = lp;
      Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = v;
      return ctc_loss(m, target).loss;
    };
    Md x = lp;
    const auto check = finite_diff_check(f, Eigen::Map<const Eigen::VectorXd>(x.data(), x.size()),
                                         Eigen::Map<const Eigen::VectorXd>(r.grad.data(), r.grad.size()));
    EXPECT_LE(check.max_relative_error, 1e-6);
  }
}

TEST(CtcLoss, GradientIsNegativeOccupancy) {
  std::mt19937_64 rng(44);
  const Md lp = random_log_probs(6, 3, rng);
  const LossResult r = ctc_loss(lp, Ids{1, 2});
  // Each frame's occupancies sum to one.
  for (Eigen::Index t = 0; t < 6; ++t) EXPECT_NEAR(r.grad.row(t).sum(), -1.0, 1e-12);
}

TEST(CtcOp, LogitsGradientThroughLogSoftmax) {
  std::mt19937_64 rng(45);
  std::normal_distribution<double> n(0.0, 1.0);
  Md logits(5, 4);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = n(rng);
  const Ids target{3, 1};
  Graph<double> g;
  auto x = g.variable(logits);
  auto loss = ctc_loss(log_softmax(x), target);
  g.backward(loss);
  const Md analytic = x.grad();
  auto f = [&](const Eigen::VectorXd& v) {
    Graph<double> h(false);
    Md m = logits;
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = v;
    return hcctc::ctc_loss(log_softmax(h.constant(m)), target).scalar();
  };
  const auto check = finite_diff_check(f, Eigen::Map<const Eigen::VectorXd>(logits.data(), logits.size()),
                                       Eigen::Map<const Eigen::VectorXd>(analytic.data(), analytic.size()));
  EXPECT_LE(check.max_relative_error, 1e-4);
}

TEST(CtcOp, InfeasibleGivesInfiniteConstant) {
  Graph<double> g;
  auto x = g.variable(Md::Zero(2, 3));
  auto loss = hcctc::ctc_loss(log_softmax(x), Ids{1, 1});
  EXPECT_EQ(loss.scalar(), std::numeric_limits<double>::infinity());
  EXPECT_FALSE(loss.requires_grad());
}

TEST(BruteForce, PartitionOfPathSpace) {
  std::mt19937_64 rng(46);
  const Md p = random_log_probs(3, 3, rng).array().exp().matrix();
  double total = 0.0;
  const std::vector<Ids> targets = {{},     {1},    {2},    {1, 1}, {1, 2}, {2, 1}, {2, 2}, {1, 1, 1}, {1, 1, 2},
                                    {1, 2, 1}, {1, 2, 2}, {2, 1, 1}, {2, 1, 2}, {2, 2, 1}, {2, 2, 2}};
  for (const auto& t : targets) total += brute_force_ctc(p, t);
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(BruteForce, GuardRejectsLargeInstances) {
  EXPECT_THROW(brute_force_ctc(Md::Constant(9, 2, 0.5), Ids{1}), SizeError);
  EXPECT_THROW(brute_force_ctc(Md::Constant(8, 6, 1.0 / 6), Ids{1}), SizeError);
}

TEST(BestPath, OneHotFrames) {
  Md p = Md::Zero(5, 3);
  p(0, 1) = p(1, 1) = p(2, 0) = p(3, 2) = p(4, 2) = 1.0;
  EXPECT_EQ(best_path_decode(p), (Ids{1, 2}));
}

TEST(BestPath, AllBlank) {
  Md p = Md::Zero(4, 3);
  p.col(0).setOnes();
  EXPECT_EQ(best_path_decode(p), Ids{});
}

TEST(BestPath, TiesGoToLowestId) {
  const Md p = Md::Constant(2, 3, 1.0 / 3);
  EXPECT_EQ(best_path_decode(p), Ids{});
  Md q(1, 3);
  q << 0.1, 0.45, 0.45;
  EXPECT_EQ(best_path_decode(q), Ids{1});
}

}  // namespace
}  // namespace hcctc::ctc
