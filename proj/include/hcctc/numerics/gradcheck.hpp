#ifndef HCCTC_NUMERICS_GRADCHECK_HPP_
#define HCCTC_NUMERICS_GRADCHECK_HPP_

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "hcctc/numerics/tensor.hpp"

namespace hcctc {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  // Coordinates where f was non-finite at a perturbed point.
  std::vector<std::size_t> failed;

  bool passed(double tolerance) const { return failed.empty() && max_relative_error <= tolerance; }
};

/// Compares `analytic` against central differences of `f` at `x`, one
/// coordinate at a time. Error per coordinate is |g_ad - g_fd| / max(1, |g_fd|).
inline GradCheckResult finite_diff_check(const std::function<double(const Eigen::VectorXd&)>& f,
                                         const Eigen::VectorXd& x, const Eigen::VectorXd& analytic,
                                         double h = 1e-5) {
  if (analytic.size() != x.size()) throw DimensionError("finite_diff_check: gradient and point differ in size");
  GradCheckResult result;
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    if (!std::isfinite(up) || !std::isfinite(down)) {
      result.failed.push_back(static_cast<std::size_t>(i));
      result.max_relative_error = std::numeric_limits<double>::infinity();
      continue;
    }
    const double numeric = (up - down) / (2.0 * h);
    const double err = std::abs(analytic(i) - numeric) / std::max(1.0, std::abs(numeric));
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = static_cast<std::size_t>(i);
    }
  }
  return result;
}

/// Concatenates every parameter, in set order, into one vector.
inline Eigen::VectorXd flatten(const ParameterSet<double>& params) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(params.scalar_count()));
  Eigen::Index at = 0;
  for (const auto& p : params) {
    out.segment(at, p.value.size()) = Eigen::Map<const Eigen::VectorXd>(p.value.data(), p.value.size());
    at += p.value.size();
  }
  return out;
}

inline Eigen::VectorXd flatten(const GradientSet<double>& grads) {
  Eigen::Index n = 0;
  for (std::size_t i = 0; i < grads.size(); ++i) n += grads[i].size();
  Eigen::VectorXd out(n);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    out.segment(at, grads[i].size()) = Eigen::Map<const Eigen::VectorXd>(grads[i].data(), grads[i].size());
    at += grads[i].size();
  }
  return out;
}

inline void unflatten(const Eigen::VectorXd& flat, ParameterSet<double>& params) {
  if (static_cast<std::size_t>(flat.size()) != params.scalar_count())
    throw DimensionError("unflatten: vector length does not match parameter count");
  Eigen::Index at = 0;
  for (auto& p : params) {
    Eigen::Map<Eigen::VectorXd>(p.value.data(), p.value.size()) = flat.segment(at, p.value.size());
    at += p.value.size();
  }
}

}  // namespace hcctc

#endif  // HCCTC_NUMERICS_GRADCHECK_HPP_
