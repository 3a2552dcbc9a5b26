#include "hcctc/ctc/ctc.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace hcctc::ctc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_target(std::span<const int> target, Eigen::Index vocab) {
  for (int y : target) {
    if (y == kBlank) throw ContractError("CTC target contains the blank id");
    if (y < 0 || y >= vocab)
      throw DimensionError("CTC target id " + std::to_string(y) + " outside posterior width " + std::to_string(vocab));
  }
}

}  // namespace

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

std::vector<int> collapse(std::span<const int> path) {
  std::vector<int> out;
  int prev = -1;
  for (int z : path) {
    if (z != prev && z != kBlank) out.push_back(z);
    prev = z;
  }
  return out;
}

int min_frames(std::span<const int> target) {
  int n = static_cast<int>(target.size());
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++n;
  return n;
}

std::vector<int> expand_with_blanks(std::span<const int> target) {
  std::vector<int> expanded;
  expanded.reserve(2 * target.size() + 1);
  expanded.push_back(kBlank);
  for (int y : target) {
    expanded.push_back(y);
    expanded.push_back(kBlank);
  }
  return expanded;
}

Lattice build_lattice(const Matrix<double>& log_probs, std::span<const int> target) {
  check_target(target, log_probs.cols());
  const Eigen::Index frames = log_probs.rows();
  if (frames < 1) throw ContractError("CTC needs at least one frame");

  Lattice lat;
  lat.expanded = expand_with_blanks(target);
  const auto& ext = lat.expanded;
  const Eigen::Index states = static_cast<Eigen::Index>(ext.size());
  lat.alpha = Matrix<double>::Constant(frames, states, kNegInf);
  lat.beta = Matrix<double>::Constant(frames, states, kNegInf);

  // A state may skip its predecessor blank unless it is a blank or repeats
  // the label two positions back.
  auto can_skip = [&](Eigen::Index s) { return ext[s] != kBlank && s >= 2 && ext[s] != ext[s - 2]; };

  lat.alpha(0, 0) = log_probs(0, ext[0]);
  if (states > 1) lat.alpha(0, 1) = log_probs(0, ext[1]);
  for (Eigen::Index t = 1; t < frames; ++t) {
    for (Eigen::Index s = 0; s < states; ++s) {
      double acc = lat.alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, lat.alpha(t - 1, s - 1));
      if (can_skip(s)) acc = log_add(acc, lat.alpha(t - 1, s - 2));
      if (acc != kNegInf) lat.alpha(t, s) = acc + log_probs(t, ext[s]);
    }
  }

  const Eigen::Index last = frames - 1;
  lat.beta(last, states - 1) = log_probs(last, ext[states - 1]);
  if (states > 1) lat.beta(last, states - 2) = log_probs(last, ext[states - 2]);
  for (Eigen::Index t = last; t-- > 0;) {
    for (Eigen::Index s = 0; s < states; ++s) {
      double acc = lat.beta(t + 1, s);
      if (s + 1 < states) acc = log_add(acc, lat.beta(t + 1, s + 1));
      if (s + 2 < states && can_skip(s + 2)) acc = log_add(acc, lat.beta(t + 1, s + 2));
      if (acc != kNegInf) lat.beta(t, s) = acc + log_probs(t, ext[s]);
    }
  }

  lat.log_likelihood = lat.alpha(last, states - 1);
  if (states > 1) lat.log_likelihood = log_add(lat.log_likelihood, lat.alpha(last, states - 2));
  return lat;
}

LossResult ctc_loss(const Matrix<double>& log_probs, std::span<const int> target) {
  check_target(target, log_probs.cols());
  LossResult result;
  result.grad = Matrix<double>::Zero(log_probs.rows(), log_probs.cols());
  if (!is_feasible(target, static_cast<int>(log_probs.rows()))) {
    result.loss = std::numeric_limits<double>::infinity();
    result.feasible = false;
    return result;
  }
  const Lattice lat = build_lattice(log_probs, target);
  result.loss = -lat.log_likelihood;
  if (std::isnan(result.loss)) {
    // Non-finite inputs: surface NaN rather than disguising it as infeasible.
    result.grad.setConstant(std::numeric_limits<double>::quiet_NaN());
    return result;
  }
  if (!std::isfinite(result.loss)) {
    // Feasible by length but every path has zero probability.
    result.feasible = false;
    result.loss = std::numeric_limits<double>::infinity();
    return result;
  }

  // d(-log P)/d log_probs(t,k) = -(posterior occupancy of symbol k at t).
  const Eigen::Index states = static_cast<Eigen::Index>(lat.expanded.size());
  Matrix<double> occupancy = Matrix<double>::Constant(log_probs.rows(), log_probs.cols(), kNegInf);
  for (Eigen::Index t = 0; t < log_probs.rows(); ++t) {
    for (Eigen::Index s = 0; s < states; ++s) {
      const int k = lat.expanded[s];
      const double v = lat.alpha(t, s) + lat.beta(t, s) - log_probs(t, k);
      occupancy(t, k) = log_add(occupancy(t, k), v);
    }
  }
  for (Eigen::Index i = 0; i < occupancy.size(); ++i) {
    const double o = occupancy.data()[i];
    result.grad.data()[i] = o == kNegInf ? 0.0 : -std::exp(o - lat.log_likelihood);
  }
  return result;
}

double brute_force_ctc(const Matrix<double>& probs, std::span<const int> target) {
  check_target(target, probs.cols());
  const Eigen::Index frames = probs.rows();
  const Eigen::Index symbols = probs.cols();
  if (frames > 8) throw SizeError("brute_force_ctc: T=" + std::to_string(frames) + " exceeds 8");
  const double paths = std::pow(static_cast<double>(symbols), static_cast<double>(frames));
  if (paths > 1e6) throw SizeError("brute_force_ctc: " + std::to_string(paths) + " paths exceed 1e6");

  const std::vector<int> want(target.begin(), target.end());
  std::vector<int> path(static_cast<std::size_t>(frames), 0);
  double total = 0.0;
  while (true) {
    if (collapse(path) == want) {
      double p = 1.0;
      for (Eigen::Index t = 0; t < frames; ++t) p *= probs(t, path[static_cast<std::size_t>(t)]);
      total += p;
    }
    Eigen::Index t = 0;
    while (t < frames && ++path[static_cast<std::size_t>(t)] == symbols) {
      path[static_cast<std::size_t>(t)] = 0;
      ++t;
    }
    if (t == frames) break;
  }
  return total;
}

std::vector<int> best_path_decode(const Matrix<double>& posteriors) {
  std::vector<int> path(static_cast<std::size_t>(posteriors.rows()));
  for (Eigen::Index t = 0; t < posteriors.rows(); ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < posteriors.cols(); ++k)
      if (posteriors(t, k) > posteriors(t, best)) best = k;
    path[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  return collapse(path);
}

}  // namespace hcctc::ctc
