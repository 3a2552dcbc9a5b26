#ifndef HCCTC_NUMERICS_ADAM_HPP_
#define HCCTC_NUMERICS_ADAM_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hcctc/numerics/tensor.hpp"

namespace hcctc {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
};

template <typename S>
struct AdamState {
  std::vector<Matrix<S>> first;
  std::vector<Matrix<S>> second;
  std::int64_t step = 0;

  AdamState() = default;
  explicit AdamState(const ParameterSet<S>& params) {
    for (const auto& p : params) {
      first.push_back(Matrix<S>::Zero(p.value.rows(), p.value.cols()));
      second.push_back(Matrix<S>::Zero(p.value.rows(), p.value.cols()));
    }
  }
};

/// One bias-corrected Adam update of every parameter in place.
template <typename S>
void adam_step(ParameterSet<S>& params, const GradientSet<S>& grads, AdamState<S>& state, double lr,
               const AdamOptions& opt = {}) {
  if (grads.size() != params.size() || state.first.size() != params.size())
    throw DimensionError("adam_step: parameter, gradient and state counts differ");
  ++state.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix<S>& w = params[i].value;
    const Matrix<S>& g = grads[i];
    if (g.rows() != w.rows() || g.cols() != w.cols() || state.first[i].rows() != w.rows() ||
        state.first[i].cols() != w.cols())
      throw DimensionError("adam_step: shape mismatch for " + params[i].name + " " +
                           shape_string(w.rows(), w.cols()) + " vs gradient " + shape_string(g.rows(), g.cols()));
    auto m = state.first[i].array();
    auto v = state.second[i].array();
    m = static_cast<S>(opt.beta1) * m + static_cast<S>(1.0 - opt.beta1) * g.array();
    v = static_cast<S>(opt.beta2) * v + static_cast<S>(1.0 - opt.beta2) * g.array().square();
    const S step = static_cast<S>(lr / c1);
    const S inv_c2 = static_cast<S>(1.0 / c2);
    w.array() -= step * m / ((v * inv_c2).sqrt() + static_cast<S>(opt.epsilon));
  }
}

/// Inverse-square-root schedule with linear warmup, peaking at `peak_lr` when
/// step == warmup_steps. Steps are 1-based.
inline double noam_learning_rate(std::int64_t step, double peak_lr, std::int64_t warmup_steps) {
  const double s = static_cast<double>(std::max<std::int64_t>(step, 1));
  const double w = static_cast<double>(std::max<std::int64_t>(warmup_steps, 1));
  return peak_lr * std::min(s / w, std::sqrt(w / s));
}

}  // namespace hcctc

#endif  // HCCTC_NUMERICS_ADAM_HPP_
