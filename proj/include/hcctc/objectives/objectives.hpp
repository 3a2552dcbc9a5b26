#ifndef HCCTC_OBJECTIVES_OBJECTIVES_HPP_
#define HCCTC_OBJECTIVES_OBJECTIVES_HPP_

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hcctc/ctc/ctc_op.hpp"
#include "hcctc/encoder/encoder.hpp"
#include "hcctc/subword/hierarchy.hpp"

namespace hcctc {

enum class Objective { kCtc, kScCtc, kHcCtc, kParaCtc };

inline std::string to_string(Objective o) {
  switch (o) {
    case Objective::kCtc: return "ctc";
    case Objective::kScCtc: return "sc-ctc";
    case Objective::kHcCtc: return "hc-ctc";
    case Objective::kParaCtc: return "para-ctc";
  }
  return "?";
}

inline Objective objective_from_string(const std::string& name) {
  if (name == "ctc") return Objective::kCtc;
  if (name == "sc-ctc") return Objective::kScCtc;
  if (name == "hc-ctc") return Objective::kHcCtc;
  if (name == "para-ctc") return Objective::kParaCtc;
  throw ConfigError("unknown objective: " + name + " (expected ctc, sc-ctc, hc-ctc or para-ctc)");
}

/// Head layout each objective trains.
inline HeadLayout layout_for(Objective o) {
  switch (o) {
    case Objective::kCtc: return HeadLayout::kFinalOnly;
    case Objective::kScCtc:
    case Objective::kHcCtc: return HeadLayout::kIntermediate;
    case Objective::kParaCtc: return HeadLayout::kParallel;
  }
  return HeadLayout::kFinalOnly;
}

template <typename S>
struct ObjectiveReport {
  /// Mean of the feasible level losses; invalid when no level is feasible.
  Var<S> total;
  double total_loss = std::numeric_limits<double>::infinity();
  /// One entry per level, +inf for an infeasible level. NaN propagates.
  std::vector<double> per_level_losses;
  std::vector<int> infeasible_count;

  bool feasible() const { return total.valid(); }
};

namespace detail {

/// Equal-weight mean over the feasible levels listed in `levels`.
template <typename S>
ObjectiveReport<S> mean_ctc(const EncoderOutput<S>& enc, const std::vector<std::size_t>& levels,
                            const std::vector<std::span<const int>>& targets) {
  ObjectiveReport<S> report;
  report.per_level_losses.assign(levels.size(), std::numeric_limits<double>::infinity());
  report.infeasible_count.assign(levels.size(), 0);
  std::vector<Var<S>> feasible;
  double sum = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const Var<S>& log_probs = enc.level_log_probs.at(levels[i]);
    if (!log_probs.valid()) throw ContractError("level " + std::to_string(levels[i] + 1) + " was not computed");
    for (int y : targets[i])
      if (y >= log_probs.cols())
        throw ConfigError("level " + std::to_string(levels[i] + 1) + " target id " + std::to_string(y) +
                          " exceeds head width " + std::to_string(log_probs.cols()));
    Var<S> loss = ctc_loss(log_probs, targets[i]);
    const double value = static_cast<double>(loss.scalar());
    if (std::isinf(value) && value > 0) {
      report.infeasible_count[i] = 1;
      continue;
    }
    report.per_level_losses[i] = value;
    sum += report.per_level_losses[i];
    feasible.push_back(loss);
  }
  if (!feasible.empty()) {
    report.total = scaled_sum(feasible, static_cast<S>(1.0 / static_cast<double>(feasible.size())));
    report.total_loss = static_cast<double>(report.total.scalar());
  }
  return report;
}

template <typename S>
void require_levels(const EncoderOutput<S>& enc, std::size_t count, const char* what) {
  if (enc.level_log_probs.size() != count)
    throw ConfigError(std::string(what) + ": encoder has " + std::to_string(enc.level_log_probs.size()) +
                      " levels but " + std::to_string(count) + " target sequences were given");
}

}  // namespace detail

/// Plain CTC on the final head against the last-level target.
template <typename S>
ObjectiveReport<S> ctc_objective(const EncoderOutput<S>& enc, std::span<const int> target) {
  if (enc.level_log_probs.empty()) throw ContractError("ctc_objective: encoder produced no levels");
  return detail::mean_ctc(enc, {enc.level_log_probs.size() - 1}, {target});
}

/// Intermediate CTC with self-conditioning: the same target at every level.
template <typename S>
ObjectiveReport<S> sc_ctc_objective(const EncoderOutput<S>& enc, std::span<const int> target) {
  std::vector<std::size_t> levels(enc.level_log_probs.size());
  std::vector<std::span<const int>> targets(levels.size(), target);
  for (std::size_t k = 0; k < levels.size(); ++k) levels[k] = k;
  if (levels.size() > 1) {
    const Eigen::Index width = enc.level_log_probs.back().cols();
    for (const auto& lp : enc.level_log_probs)
      if (lp.valid() && lp.cols() != width) throw ConfigError("sc_ctc_objective: levels must share one vocabulary");
  }
  return detail::mean_ctc(enc, levels, targets);
}

/// Hierarchical conditional CTC: level k reads its own target Y^(k) at its tap.
template <typename S>
ObjectiveReport<S> hc_ctc_objective(const EncoderOutput<S>& enc, const subword::HierTargets& hier) {
  detail::require_levels(enc, hier.levels.size(), "hc_ctc_objective");
  std::vector<std::size_t> levels(hier.levels.size());
  std::vector<std::span<const int>> targets;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    levels[k] = k;
    targets.emplace_back(hier.levels[k]);
  }
  return detail::mean_ctc(enc, levels, targets);
}

/// Parallel multi-granularity CTC: every level from the last layer. The
/// encoder must have been built with the parallel head layout.
template <typename S>
ObjectiveReport<S> para_ctc_objective(const EncoderOutput<S>& enc, const subword::HierTargets& hier) {
  for (int layer : enc.level_layers)
    if (layer != enc.level_layers.back()) throw ConfigError("para_ctc_objective: all levels must read the last layer");
  return hc_ctc_objective(enc, hier);
}

/// Dispatches on `objective`. For ctc and sc-ctc only the last level of
/// `hier` is used.
template <typename S>
ObjectiveReport<S> evaluate_objective(Objective objective, const EncoderOutput<S>& enc,
                                      const subword::HierTargets& hier) {
  switch (objective) {
    case Objective::kCtc: return ctc_objective(enc, std::span<const int>(hier.levels.back()));
    case Objective::kScCtc: return sc_ctc_objective(enc, std::span<const int>(hier.levels.back()));
    case Objective::kHcCtc: return hc_ctc_objective(enc, hier);
    case Objective::kParaCtc: return para_ctc_objective(enc, hier);
  }
  throw ContractError("unknown objective");
}

}  // namespace hcctc

#endif  // HCCTC_OBJECTIVES_OBJECTIVES_HPP_
