// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsim/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "fedsim/error.hpp"

namespace fedsim {
namespace {

void check_shape(const Shape& shape) {
  require(!shape.empty(), "tensor shape must be non-empty");
  for (auto d : shape) require(d >= 1, "tensor dimensions must be >= 1, got " + shape_string(shape));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                      " vs " + shape_string(b.shape()));
}

void require_matrix(const Tensor& t, const char* op) {
  require(t.rank() == 2, std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
}

template <typename F>
Tensor map_binary(const Tensor& a, const Tensor& b, const char* op, F f) {
  require_same_shape(a, b, op);
  std::vector<float> out(a.size());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i], y[i]);
  return Tensor(a.shape(), std::move(out));
}

template <typename F>
Tensor map_unary(const Tensor& a, F f) {
  std::vector<float> out(a.size());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  return Tensor(a.shape(), std::move(out));
}

std::vector<float> round_to_float(const std::vector<double>& acc) {
  return {acc.begin(), acc.end()};
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor() : shape_{1}, data_(1, 0.0f) {}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(element_count(shape_), 0.0f);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  require(data_.size() == element_count(shape_),
          "tensor data length " + std::to_string(data_.size()) + " does not match shape " + shape_string(shape_));
}

Tensor Tensor::filled(Shape shape, float value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::from_rows(const std::vector<std::vector<float>>& rows) {
  require(!rows.empty() && !rows.front().empty(), "from_rows: empty input");
  const std::size_t cols = rows.front().size();
  std::vector<float> data;
  data.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    require(row.size() == cols, "from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

std::size_t Tensor::rows() const {
  require_matrix(*this, "rows");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  require_matrix(*this, "cols");
  return shape_[1];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  require(b.rows() == k, "matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
                             shape_string(b.shape()));
  const auto x = a.data();
  const auto y = b.data();
  std::vector<float> out(m * n);
  std::vector<double> acc(n);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = x[i * k + p];
      if (av == 0.0) continue;
      const float* brow = y.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) acc[j] += av * static_cast<double>(brow[j]);
    }
    std::copy(acc.begin(), acc.end(), out.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  return Tensor({m, n}, std::move(out));
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  require(b.rows() == k, "matmul_tn: leading dimensions differ " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> acc(m * n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const float* brow = y.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = x[p * m + i];
      if (av == 0.0) continue;
      double* arow = acc.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) arow[j] += av * static_cast<double>(brow[j]);
    }
  }
  return Tensor({m, n}, round_to_float(acc));
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  require(b.cols() == k, "matmul_nt: trailing dimensions differ " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
  const auto x = a.data();
  const auto y = b.data();
  std::vector<float> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const float* arow = x.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const float* brow = y.data() + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += static_cast<double>(arow[p]) * brow[p];
      out[i * n + j] = static_cast<float>(acc);
    }
  }
  return Tensor({m, n}, std::move(out));
}

Tensor add(const Tensor& a, const Tensor& b) {
  return map_binary(a, b, "add", [](float x, float y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return map_binary(a, b, "sub", [](float x, float y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return map_binary(a, b, "mul", [](float x, float y) { return x * y; });
}

Tensor scale(const Tensor& a, float factor) {
  return map_unary(a, [factor](float x) { return x * factor; });
}

Tensor relu(const Tensor& a) {
  return map_unary(a, [](float x) { return x > 0.0f ? x : 0.0f; });
}

Tensor relu_grad_mask(const Tensor& pre_activation, const Tensor& upstream) {
  return map_binary(pre_activation, upstream, "relu_grad_mask",
                    [](float z, float g) { return z > 0.0f ? g : 0.0f; });
}

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b) {
  switch (op) {
    case ElementwiseOp::kAdd: return add(a, b);
    case ElementwiseOp::kSub: return sub(a, b);
    case ElementwiseOp::kMul: return mul(a, b);
    case ElementwiseOp::kRelu: return relu(a);
    case ElementwiseOp::kReluGradMask: return relu_grad_mask(a, b);
    case ElementwiseOp::kScale: break;
  }
  throw ContractError("elementwise: scale takes a scalar operand");
}

Tensor elementwise(ElementwiseOp op, const Tensor& a, float scalar) {
  switch (op) {
    case ElementwiseOp::kScale: return scale(a, scalar);
    case ElementwiseOp::kRelu: return relu(a);
    case ElementwiseOp::kAdd: return map_unary(a, [scalar](float x) { return x + scalar; });
    case ElementwiseOp::kSub: return map_unary(a, [scalar](float x) { return x - scalar; });
    case ElementwiseOp::kMul: return scale(a, scalar);
    case ElementwiseOp::kReluGradMask: break;
  }
  throw ContractError("elementwise: relu_grad_mask needs a tensor operand");
}

Tensor add_row_vector(const Tensor& m, const Tensor& v) {
  require_matrix(m, "add_row_vector");
  const std::size_t r = m.rows(), c = m.cols();
  require(v.rank() == 1 && v.size() == c, "add_row_vector: vector " + shape_string(v.shape()) +
                                              " does not match matrix " + shape_string(m.shape()));
  Tensor out = m;
  auto o = out.data();
  const auto b = v.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) o[i * c + j] += b[j];
  return out;
}

Tensor column_sums(const Tensor& m) {
  require_matrix(m, "column_sums");
  const std::size_t r = m.rows(), c = m.cols();
  std::vector<double> acc(c, 0.0);
  const auto x = m.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) acc[j] += x[i * c + j];
  return Tensor({c}, round_to_float(acc));
}

Tensor softmax_rows(const Tensor& logits) {
  require_matrix(logits, "softmax_rows");
  const std::size_t r = logits.rows(), c = logits.cols();
  require(c >= 2, "softmax_rows: need at least 2 classes");
  require(logits.all_finite(), "softmax_rows: non-finite logits");
  Tensor out({r, c});
  const auto x = logits.data();
  auto o = out.data();
  std::vector<double> e(c);
  for (std::size_t i = 0; i < r; ++i) {
    const float* row = x.data() + i * c;
    const double peak = *std::max_element(row, row + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      e[j] = std::exp(static_cast<double>(row[j]) - peak);
      total += e[j];
    }
    for (std::size_t j = 0; j < c; ++j) o[i * c + j] = static_cast<float>(e[j] / total);
  }
  return out;
}

Tensor rng_uniform(const RngStream& stream, float lo, float hi, std::size_t n) {
  require(n >= 1, "rng_uniform: n must be >= 1");
  require(lo <= hi, "rng_uniform: lo > hi");
  RngGenerator gen(stream);
  std::vector<float> out(n);
  const double width = static_cast<double>(hi) - lo;
  for (auto& v : out) v = static_cast<float>(lo + width * gen.next_double());
  return Tensor({n}, std::move(out));
}

}  // namespace fedsim
