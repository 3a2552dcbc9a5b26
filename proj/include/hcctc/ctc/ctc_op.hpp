#ifndef HCCTC_CTC_CTC_OP_HPP_
#define HCCTC_CTC_CTC_OP_HPP_

#include <span>

#include "hcctc/ctc/ctc.hpp"
#include "hcctc/numerics/graph.hpp"

namespace hcctc {

/// CTC loss as a graph primitive over T x V log-posteriors. The DP runs in
/// double regardless of S; the backward pass reuses the alpha-beta gradient
/// instead of differentiating through the recursion. Infeasible targets give
/// +inf and contribute no gradient.
template <typename S>
Var<S> ctc_loss(const Var<S>& log_probs, std::span<const int> target) {
  ctc::LossResult r = ctc::ctc_loss(Matrix<double>(log_probs.value().template cast<double>()), target);
  Matrix<S> out(1, 1);
  out(0, 0) = static_cast<S>(r.loss);
  if (!r.feasible) return log_probs.graph().constant(std::move(out));
  Matrix<S> grad = r.grad.template cast<S>();
  return log_probs.graph().record(
      std::move(out),
      [log_probs, grad = std::move(grad)](Graph<S>& g, const Matrix<S>& upstream) {
        g.accumulate(log_probs, grad * upstream(0, 0));
      },
      log_probs);
}

}  // namespace hcctc

#endif  // HCCTC_CTC_CTC_OP_HPP_
