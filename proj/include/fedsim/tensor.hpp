// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fedsim/rng.hpp"

namespace fedsim {

using Shape = std::vector<std::size_t>;

/// Dense row-major float32 tensor. Shapes are explicit: the only broadcasting
/// anywhere in the library is scalar-with-tensor.
///
/// Every reduction in the library (matmul inner products, column sums, loss
/// sums) accumulates in double and rounds to float once at the end.
class Tensor {
 public:
  /// A single zero element of shape {1}.
  Tensor();
  /// Zero-filled tensor of the given shape.
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor filled(Shape shape, float value);
  /// 2-D convenience constructor from nested rows; all rows must have equal length.
  static Tensor from_rows(const std::vector<std::vector<float>>& rows);

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] std::size_t rank() const { return shape_.size(); }
  /// Requires rank 2.
  [[nodiscard]] std::size_t rows() const;
  [[nodiscard]] std::size_t cols() const;

  [[nodiscard]] std::span<const float> data() const { return data_; }
  [[nodiscard]] std::span<float> data() { return data_; }
  [[nodiscard]] const std::vector<float>& values() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }
  float& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  [[nodiscard]] float at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  [[nodiscard]] bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

std::string shape_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

// Matrix products. All accumulate in double.
Tensor matmul(const Tensor& a, const Tensor& b);     // a[m×k] · b[k×n]
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // aᵀ · b, a[k×m], b[k×n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a · bᵀ, a[m×k], b[n×k]

enum class ElementwiseOp { kAdd, kSub, kMul, kScale, kRelu, kReluGradMask };

/// Pointwise dispatch. Binary ops need equal shapes. kScale multiplies `a` by
/// `scalar`. kRelu ignores `b`. kReluGradMask returns b where a > 0, else 0.
Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b);
Tensor elementwise(ElementwiseOp op, const Tensor& a, float scalar);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);
Tensor relu(const Tensor& a);
/// Upstream gradient gated by the pre-activation: relu'(0) is taken as 0.
Tensor relu_grad_mask(const Tensor& pre_activation, const Tensor& upstream);

/// m[r×c] plus v[c] added to every row. The one named row-vector op; it keeps
/// bias handling explicit instead of adding general broadcasting.
Tensor add_row_vector(const Tensor& m, const Tensor& v);
/// Column sums of a 2-D tensor as shape {cols}.
Tensor column_sums(const Tensor& m);

/// Row-wise softmax with max subtraction. Requires rank 2, at least 2 columns
/// and finite input.
Tensor softmax_rows(const Tensor& logits);

/// n uniform draws from [lo, hi) as shape {n} (float rounding may reach hi).
Tensor rng_uniform(const RngStream& stream, float lo, float hi, std::size_t n);

}  // namespace fedsim
