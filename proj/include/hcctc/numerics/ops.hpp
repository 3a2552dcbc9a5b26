#ifndef HCCTC_NUMERICS_OPS_HPP_
#define HCCTC_NUMERICS_OPS_HPP_

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "hcctc/numerics/graph.hpp"

namespace hcctc {

namespace detail {

template <typename S>
void require_same_graph(const Var<S>& a, const Var<S>& b) {
  if (&a.graph() != &b.graph()) throw ContractError("operands belong to different graphs");
}

template <typename S>
void require_same_shape(const char* op, const Var<S>& a, const Var<S>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.rows(), a.cols()) + " vs " +
                         shape_string(b.rows(), b.cols()));
}

template <typename S>
void require_row_of(const char* op, const Var<S>& x, const Var<S>& row) {
  if (row.rows() != 1 || row.cols() != x.cols())
    throw DimensionError(std::string(op) + ": expected a [1x" + std::to_string(x.cols()) + "] row, got " +
                         shape_string(row.rows(), row.cols()));
}

}  // namespace detail

template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  detail::require_same_graph(a, b);
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner extents differ, " + shape_string(a.rows(), a.cols()) + " x " +
                         shape_string(b.rows(), b.cols()));
  Matrix<S> out = a.value() * b.value();
  return a.graph().record(
      std::move(out),
      [a, b](Graph<S>& g, const Matrix<S>& grad) {
        if (a.requires_grad()) g.accumulate(a, grad * b.value().transpose());
        if (b.requires_grad()) g.accumulate(b, a.value().transpose() * grad);
      },
      a, b);
}

/// a * b^T without materializing the transpose.
template <typename S>
Var<S> matmul_nt(const Var<S>& a, const Var<S>& b) {
  detail::require_same_graph(a, b);
  if (a.cols() != b.cols())
    throw DimensionError("matmul_nt: inner extents differ, " + shape_string(a.rows(), a.cols()) + " x " +
                         shape_string(b.rows(), b.cols()) + "^T");
  Matrix<S> out = a.value() * b.value().transpose();
  return a.graph().record(
      std::move(out),
      [a, b](Graph<S>& g, const Matrix<S>& grad) {
        if (a.requires_grad()) g.accumulate(a, grad * b.value());
        if (b.requires_grad()) g.accumulate(b, grad.transpose() * a.value());
      },
      a, b);
}

/// x * W + b with b broadcast over rows.
template <typename S>
Var<S> affine(const Var<S>& x, const Var<S>& weight, const Var<S>& bias) {
  detail::require_same_graph(x, weight);
  if (x.cols() != weight.rows())
    throw DimensionError("affine: input " + shape_string(x.rows(), x.cols()) + " does not match weight " +
                         shape_string(weight.rows(), weight.cols()));
  if (bias.rows() != 1 || bias.cols() != weight.cols())
    throw DimensionError("affine: bias " + shape_string(bias.rows(), bias.cols()) + " does not match weight " +
                         shape_string(weight.rows(), weight.cols()));
  Matrix<S> out = x.value() * weight.value();
  out.rowwise() += bias.value().row(0);
  return x.graph().record(
      std::move(out),
      [x, weight, bias](Graph<S>& g, const Matrix<S>& grad) {
        if (x.requires_grad()) g.accumulate(x, grad * weight.value().transpose());
        if (weight.requires_grad()) g.accumulate(weight, x.value().transpose() * grad);
        if (bias.requires_grad()) g.accumulate(bias, grad.colwise().sum());
      },
      x, weight, bias);
}

template <typename S>
Var<S> operator+(const Var<S>& a, const Var<S>& b) {
  detail::require_same_graph(a, b);
  detail::require_same_shape("add", a, b);
  Matrix<S> out = a.value() + b.value();
  return a.graph().record(
      std::move(out),
      [a, b](Graph<S>& g, const Matrix<S>& grad) {
        g.accumulate(a, grad);
        g.accumulate(b, grad);
      },
      a, b);
}

template <typename S>
Var<S> operator-(const Var<S>& a, const Var<S>& b) {
  detail::require_same_graph(a, b);
  detail::require_same_shape("sub", a, b);
  Matrix<S> out = a.value() - b.value();
  return a.graph().record(
      std::move(out),
      [a, b](Graph<S>& g, const Matrix<S>& grad) {
        g.accumulate(a, grad);
        g.accumulate(b, -grad);
      },
      a, b);
}

/// Elementwise product.
template <typename S>
Var<S> hadamard(const Var<S>& a, const Var<S>& b) {
  detail::require_same_graph(a, b);
  detail::require_same_shape("hadamard", a, b);
  Matrix<S> out = a.value().cwiseProduct(b.value());
  return a.graph().record(
      std::move(out),
      [a, b](Graph<S>& g, const Matrix<S>& grad) {
        if (a.requires_grad()) g.accumulate(a, grad.cwiseProduct(b.value()));
        if (b.requires_grad()) g.accumulate(b, grad.cwiseProduct(a.value()));
      },
      a, b);
}

template <typename S>
Var<S> operator*(const Var<S>& a, S factor) {
  Matrix<S> out = a.value() * factor;
  return a.graph().record(
      std::move(out), [a, factor](Graph<S>& g, const Matrix<S>& grad) { g.accumulate(a, grad * factor); }, a);
}

template <typename S>
Var<S> add_row(const Var<S>& x, const Var<S>& row) {
  detail::require_same_graph(x, row);
  detail::require_row_of("add_row", x, row);
  Matrix<S> out = x.value();
  out.rowwise() += row.value().row(0);
  return x.graph().record(
      std::move(out),
      [x, row](Graph<S>& g, const Matrix<S>& grad) {
        g.accumulate(x, grad);
        if (row.requires_grad()) g.accumulate(row, grad.colwise().sum());
      },
      x, row);
}

/// Sum of all entries as a 1x1 tensor.
template <typename S>
Var<S> sum(const Var<S>& x) {
  Matrix<S> out(1, 1);
  out(0, 0) = x.value().sum();
  return x.graph().record(
      std::move(out),
      [x](Graph<S>& g, const Matrix<S>& grad) {
        g.accumulate(x, Matrix<S>::Constant(x.rows(), x.cols(), grad(0, 0)));
      },
      x);
}

/// Weighted sum of 1x1 tensors: weight * (s_1 + ... + s_n).
template <typename S>
Var<S> scaled_sum(const std::vector<Var<S>>& scalars, S weight) {
  if (scalars.empty()) throw ContractError("scaled_sum: no operands");
  S total = 0;
  for (const auto& s : scalars) {
    if (s.rows() != 1 || s.cols() != 1) throw DimensionError("scaled_sum: operands must be scalars");
    total += s.scalar();
  }
  Matrix<S> out(1, 1);
  out(0, 0) = weight * total;
  return scalars.front().graph().record_many(
      std::move(out),
      [scalars, weight](Graph<S>& g, const Matrix<S>& grad) {
        for (const auto& s : scalars) g.accumulate(s, grad * weight);
      },
      scalars);
}

template <typename S>
Var<S> log(const Var<S>& x) {
  Matrix<S> out = x.value().array().log().matrix();
  return x.graph().record(
      std::move(out),
      [x](Graph<S>& g, const Matrix<S>& grad) { g.accumulate(x, grad.cwiseQuotient(x.value())); }, x);
}

/// Column vector whose entry t is x(t, columns[t]).
template <typename S>
Var<S> gather_rows(const Var<S>& x, std::vector<int> columns) {
  if (static_cast<Eigen::Index>(columns.size()) != x.rows())
    throw DimensionError("gather_rows: need one column index per row");
  Matrix<S> out(x.rows(), 1);
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    if (columns[t] < 0 || columns[t] >= x.cols()) throw DimensionError("gather_rows: column index out of range");
    out(t, 0) = x.value()(t, columns[t]);
  }
  return x.graph().record(
      std::move(out),
      [x, columns = std::move(columns)](Graph<S>& g, const Matrix<S>& grad) {
        Matrix<S> full = Matrix<S>::Zero(x.rows(), x.cols());
        for (Eigen::Index t = 0; t < x.rows(); ++t) full(t, columns[t]) = grad(t, 0);
        g.accumulate(x, full);
      },
      x);
}

/// Row-wise softmax, stabilized by subtracting each row's maximum.
template <typename S>
Matrix<S> softmax_rows(const Matrix<S>& x) {
  Matrix<S> out(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const S m = x.row(t).maxCoeff();
    out.row(t) = (x.row(t).array() - m).exp().matrix();
    out.row(t) /= out.row(t).sum();
  }
  return out;
}

template <typename S>
Matrix<S> log_softmax_rows(const Matrix<S>& x) {
  Matrix<S> out(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const S m = x.row(t).maxCoeff();
    const S lse = m + std::log((x.row(t).array() - m).exp().sum());
    out.row(t) = (x.row(t).array() - lse).matrix();
  }
  return out;
}

template <typename S>
Var<S> softmax(const Var<S>& x) {
  Matrix<S> y = softmax_rows(x.value());
  Matrix<S> kept = y;
  return x.graph().record(
      std::move(y),
      [x, y = std::move(kept)](Graph<S>& g, const Matrix<S>& grad) {
        const Eigen::Matrix<S, Eigen::Dynamic, 1> dot = grad.cwiseProduct(y).rowwise().sum();
        Matrix<S> gx = y.cwiseProduct(grad - dot.replicate(1, grad.cols()));
        g.accumulate(x, gx);
      },
      x);
}

template <typename S>
Var<S> log_softmax(const Var<S>& x) {
  Matrix<S> y = log_softmax_rows(x.value());
  Matrix<S> probs = y.array().exp().matrix();
  return x.graph().record(
      std::move(y),
      [x, probs = std::move(probs)](Graph<S>& g, const Matrix<S>& grad) {
        const Eigen::Matrix<S, Eigen::Dynamic, 1> total = grad.rowwise().sum();
        Matrix<S> gx = grad - probs.cwiseProduct(total.replicate(1, grad.cols()));
        g.accumulate(x, gx);
      },
      x);
}

inline constexpr double kLayerNormEpsilon = 1e-12;

/// Per-row standardization (population variance + 1e-12) then gain/bias.
template <typename S>
Var<S> layer_norm(const Var<S>& x, const Var<S>& gain, const Var<S>& bias) {
  const Eigen::Index d = x.cols();
  if (d < 2) throw DimensionError("layer_norm: need at least 2 features, got " + std::to_string(d));
  detail::require_row_of("layer_norm gain", x, gain);
  detail::require_row_of("layer_norm bias", x, bias);
  const Eigen::Index rows = x.rows();
  Matrix<S> normed(rows, d);
  RowVector<S> inv_std(rows);
  for (Eigen::Index t = 0; t < rows; ++t) {
    const S mean = x.value().row(t).mean();
    const auto centered = (x.value().row(t).array() - mean);
    const S var = centered.square().mean();
    inv_std(t) = S(1) / std::sqrt(var + static_cast<S>(kLayerNormEpsilon));
    normed.row(t) = (centered * inv_std(t)).matrix();
  }
  Matrix<S> out = normed.array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  return x.graph().record(
      std::move(out),
      [x, gain, bias, normed, inv_std](Graph<S>& g, const Matrix<S>& grad) {
        if (gain.requires_grad()) g.accumulate(gain, grad.cwiseProduct(normed).colwise().sum());
        if (bias.requires_grad()) g.accumulate(bias, grad.colwise().sum());
        if (!x.requires_grad()) return;
        const Eigen::Index n = normed.cols();
        Matrix<S> gx(normed.rows(), n);
        for (Eigen::Index t = 0; t < normed.rows(); ++t) {
          const auto gy = (grad.row(t).array() * gain.value().row(0).array());
          const S mean_gy = gy.mean();
          const S mean_gy_y = (gy * normed.row(t).array()).mean();
          gx.row(t) = (inv_std(t) * (gy - mean_gy - normed.row(t).array() * mean_gy_y)).matrix();
        }
        g.accumulate(x, gx);
      },
      x, gain, bias);
}

/// Exact (erf-based) GELU.
template <typename S>
Var<S> gelu(const Var<S>& x) {
  const S inv_sqrt2 = static_cast<S>(1.0 / std::numbers::sqrt2);
  Matrix<S> out = x.value().unaryExpr([inv_sqrt2](S v) { return S(0.5) * v * (S(1) + std::erf(v * inv_sqrt2)); });
  return x.graph().record(
      std::move(out),
      [x, inv_sqrt2](Graph<S>& g, const Matrix<S>& grad) {
        const S inv_sqrt_2pi = static_cast<S>(1.0 / std::sqrt(2.0 * std::numbers::pi));
        Matrix<S> d = x.value().unaryExpr([&](S v) {
          const S cdf = S(0.5) * (S(1) + std::erf(v * inv_sqrt2));
          return cdf + v * inv_sqrt_2pi * std::exp(S(-0.5) * v * v);
        });
        g.accumulate(x, grad.cwiseProduct(d));
      },
      x);
}

template <typename S>
Var<S> slice_cols(const Var<S>& x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.cols())
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") outside " + shape_string(x.rows(), x.cols()));
  Matrix<S> out = x.value().middleCols(start, count);
  return x.graph().record(
      std::move(out),
      [x, start, count](Graph<S>& g, const Matrix<S>& grad) {
        Matrix<S> full = Matrix<S>::Zero(x.rows(), x.cols());
        full.middleCols(start, count) = grad;
        g.accumulate(x, full);
      },
      x);
}

template <typename S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no operands");
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != parts.front().rows()) throw DimensionError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix<S> out(parts.front().rows(), cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return parts.front().graph().record_many(
      std::move(out),
      [parts](Graph<S>& g, const Matrix<S>& grad) {
        Eigen::Index offset = 0;
        for (const auto& p : parts) {
          g.accumulate(p, grad.middleCols(offset, p.cols()));
          offset += p.cols();
        }
      },
      parts);
}

/// Inverted dropout. Identity when rate == 0 or the graph is not training.
template <typename S, typename Rng>
Var<S> dropout(const Var<S>& x, double rate, Rng& rng) {
  if (rate <= 0.0 || !x.graph().grad_enabled()) return x;
  if (rate >= 1.0) throw ContractError("dropout rate must be below 1");
  std::bernoulli_distribution keep(1.0 - rate);
  const S scale = static_cast<S>(1.0 / (1.0 - rate));
  Matrix<S> mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : S(0);
  Matrix<S> out = x.value().cwiseProduct(mask);
  return x.graph().record(
      std::move(out),
      [x, mask = std::move(mask)](Graph<S>& g, const Matrix<S>& grad) { g.accumulate(x, grad.cwiseProduct(mask)); },
      x);
}

}  // namespace hcctc

#endif  // HCCTC_NUMERICS_OPS_HPP_
