#ifndef HCCTC_NUMERICS_GRAPH_HPP_
#define HCCTC_NUMERICS_GRAPH_HPP_

#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <utility>

#include "hcctc/numerics/tensor.hpp"

namespace hcctc {

template <typename S>
class Graph;

/// Handle to a node recorded in a Graph. Cheap to copy; valid as long as the
/// owning graph is alive.
template <typename S>
class Var {
 public:
  Var() = default;
  Var(Graph<S>* graph, std::size_t id) : graph_(graph), id_(id) {}

  bool valid() const { return graph_ != nullptr; }
  Graph<S>& graph() const { return *graph_; }
  std::size_t id() const { return id_; }

  const Matrix<S>& value() const { return graph_->value(*this); }
  const Matrix<S>& grad() const { return graph_->grad(*this); }
  bool requires_grad() const { return graph_->requires_grad(*this); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  S scalar() const { return value()(0, 0); }

 private:
  Graph<S>* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Tape of applied primitives in creation (topological) order. Parameters are
/// referenced, not copied; their gradients live in the graph until harvested
/// with `accumulate_into`, so several graphs may share one ParameterSet.
template <typename S>
class Graph {
 public:
  using Mat = Matrix<S>;
  /// Receives the graph and the gradient flowing into the node's output.
  using BackwardFn = std::function<void(Graph&, const Mat&)>;

  static constexpr std::size_t kNoParameter = std::numeric_limits<std::size_t>::max();

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  Var<S> constant(Mat value) { return push(std::move(value), nullptr, false, kNoParameter); }

  /// A free leaf that receives a gradient.
  Var<S> variable(Mat value) { return push(std::move(value), nullptr, grad_enabled_, kNoParameter); }

  Var<S> parameter(const ParameterSet<S>& params, std::size_t index) {
    return push(Mat(), &params[index].value, grad_enabled_, index);
  }

  /// Records the output of a primitive. `backward` runs only if some input
  /// requires a gradient.
  template <typename... Inputs>
  Var<S> record(Mat value, BackwardFn backward, const Inputs&... inputs) {
    const bool needs = grad_enabled_ && (false || ... || requires_grad(inputs));
    Var<S> out = push(std::move(value), nullptr, needs, kNoParameter);
    if (needs) nodes_[out.id()].backward = std::move(backward);
    return out;
  }

  Var<S> record_many(Mat value, BackwardFn backward, const std::vector<Var<S>>& inputs) {
    bool needs = false;
    for (const auto& v : inputs) needs = needs || requires_grad(v);
    needs = needs && grad_enabled_;
    Var<S> out = push(std::move(value), nullptr, needs, kNoParameter);
    if (needs) nodes_[out.id()].backward = std::move(backward);
    return out;
  }

  const Mat& value(const Var<S>& v) const {
    const Node& n = nodes_[v.id()];
    return n.external ? *n.external : n.value;
  }

  bool requires_grad(const Var<S>& v) const { return nodes_[v.id()].requires_grad; }

  /// Gradient of the last backward root w.r.t. `v`; zeros if nothing reached it.
  const Mat& grad(const Var<S>& v) {
    Node& n = nodes_[v.id()];
    ensure_grad(n);
    return n.grad;
  }

  template <typename Derived>
  void accumulate(const Var<S>& v, const Eigen::MatrixBase<Derived>& delta) {
    Node& n = nodes_[v.id()];
    if (!n.requires_grad) return;
    ensure_grad(n);
    n.grad.noalias() += delta;
  }

  /// Reverse-topological accumulation from a scalar root.
  void backward(const Var<S>& root) {
    if (root.rows() != 1 || root.cols() != 1)
      throw ContractError("backward root must be a scalar, got " + shape_string(root.rows(), root.cols()));
    for (auto& n : nodes_) n.grad.resize(0, 0);
    Node& r = nodes_[root.id()];
    if (!r.requires_grad) return;
    r.grad = Mat::Ones(1, 1);
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.size() == 0) continue;
      n.backward(*this, n.grad);
    }
  }

  /// Adds every parameter gradient recorded in this graph into `grads`.
  void accumulate_into(GradientSet<S>& grads) const {
    for (const auto& n : nodes_) {
      if (n.param_index == kNoParameter || n.grad.size() == 0) continue;
      grads[n.param_index] += n.grad;
    }
  }

 private:
  struct Node {
    Mat value;
    const Mat* external = nullptr;
    Mat grad;
    bool requires_grad = false;
    std::size_t param_index = kNoParameter;
    BackwardFn backward;
  };

  Var<S> push(Mat value, const Mat* external, bool requires_grad, std::size_t param_index) {
    Node n;
    n.value = std::move(value);
    n.external = external;
    n.requires_grad = requires_grad;
    n.param_index = param_index;
    nodes_.push_back(std::move(n));
    return Var<S>(this, nodes_.size() - 1);
  }

  void ensure_grad(Node& n) const {
    const Mat& v = n.external ? *n.external : n.value;
    if (n.grad.size() == 0) n.grad = Mat::Zero(v.rows(), v.cols());
  }

  bool grad_enabled_;
  std::deque<Node> nodes_;
};

}  // namespace hcctc

#endif  // HCCTC_NUMERICS_GRAPH_HPP_
