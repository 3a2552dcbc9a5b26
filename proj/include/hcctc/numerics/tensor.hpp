#ifndef HCCTC_NUMERICS_TENSOR_HPP_
#define HCCTC_NUMERICS_TENSOR_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hcctc/errors.hpp"

namespace hcctc {

/// Dense row-major matrix. Every tensor in the toolkit is at most rank 2;
/// rank-1 quantities (biases, gains) are stored as a single row.
template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
using RowVector = Eigen::Matrix<S, 1, Eigen::Dynamic>;

using Shape = std::vector<std::uint64_t>;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  std::ostringstream os;
  os << "[" << rows << "x" << cols << "]";
  return os.str();
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

/// A named trainable tensor. `shape` is the declared logical shape (rank 1 or
/// 2); `value` always holds it as a matrix with rows*cols == product(shape).
template <typename S>
struct Parameter {
  std::string name;
  Shape shape;
  Matrix<S> value;
};

/// Ordered collection of parameters with name lookup. Order is the
/// serialization order and the gradient reduction order.
template <typename S>
class ParameterSet {
 public:
  std::size_t add(std::string name, Matrix<S> value, bool as_vector = false) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    Shape shape;
    if (as_vector) {
      if (value.rows() != 1) throw DimensionError("vector parameter " + name + " must be a single row");
      shape = {static_cast<std::uint64_t>(value.cols())};
    } else {
      shape = {static_cast<std::uint64_t>(value.rows()), static_cast<std::uint64_t>(value.cols())};
    }
    index_.emplace(name, params_.size());
    params_.push_back({std::move(name), std::move(shape), std::move(value)});
    return params_.size() - 1;
  }

  std::size_t size() const { return params_.size(); }
  Parameter<S>& operator[](std::size_t i) { return params_[i]; }
  const Parameter<S>& operator[](std::size_t i) const { return params_[i]; }

  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw LookupError("unknown parameter: " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  template <typename T>
  ParameterSet<T> cast() const {
    ParameterSet<T> out;
    for (const auto& p : params_) out.add(p.name, p.value.template cast<T>(), p.shape.size() == 1);
    return out;
  }

 private:
  std::vector<Parameter<S>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Gradient buffers aligned index-for-index with a ParameterSet.
template <typename S>
class GradientSet {
 public:
  GradientSet() = default;
  explicit GradientSet(const ParameterSet<S>& params) {
    grads_.reserve(params.size());
    for (const auto& p : params) grads_.push_back(Matrix<S>::Zero(p.value.rows(), p.value.cols()));
  }

  std::size_t size() const { return grads_.size(); }
  Matrix<S>& operator[](std::size_t i) { return grads_[i]; }
  const Matrix<S>& operator[](std::size_t i) const { return grads_[i]; }

  void set_zero() {
    for (auto& g : grads_) g.setZero();
  }
  void scale(S factor) {
    for (auto& g : grads_) g *= factor;
  }
  S squared_norm() const {
    S total = 0;
    for (const auto& g : grads_) total += g.squaredNorm();
    return total;
  }

 private:
  std::vector<Matrix<S>> grads_;
};

/// Glorot-uniform initialization for a fan_in x fan_out weight.
template <typename S, typename Rng>
Matrix<S> glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix<S> w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<S>(dist(rng));
  return w;
}

}  // namespace hcctc

#endif  // HCCTC_NUMERICS_TENSOR_HPP_
