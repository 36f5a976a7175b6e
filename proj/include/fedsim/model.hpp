// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/tensor.hpp"

namespace fedsim {

struct SoftmaxRegressionSpec {
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
};

/// One hidden ReLU layer followed by a softmax classifier.
struct MlpSpec {
  std::size_t input_dim = 0;
  std::size_t hidden_units = 0;
  std::size_t num_classes = 0;
};

using ModelSpec = std::variant<SoftmaxRegressionSpec, MlpSpec>;

std::size_t input_dim(const ModelSpec& spec);
std::size_t num_classes(const ModelSpec& spec);
std::string describe(const ModelSpec& spec);
void validate(const ModelSpec& spec);

struct Variable {
  std::string name;
  Tensor tensor;

  friend bool operator==(const Variable&, const Variable&) = default;
};

/// Canonical variable layout per spec:
///   SoftmaxRegression: W[input×classes], b[classes]
///   Mlp:               W1[input×hidden], b1[hidden], W2[hidden×classes], b2[classes]
struct VariableShape {
  std::string name;
  Shape shape;
};
std::vector<VariableShape> variable_shapes(const ModelSpec& spec);

/// Ordered named tensors. Also used for gradients, which share the layout.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(std::vector<Variable> variables);

  /// Zero-filled params in the canonical layout of `spec`.
  static ModelParams zeros(const ModelSpec& spec);

  [[nodiscard]] std::size_t size() const { return variables_.size(); }
  [[nodiscard]] const Variable& operator[](std::size_t i) const { return variables_[i]; }
  Variable& operator[](std::size_t i) { return variables_[i]; }
  [[nodiscard]] const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);

  [[nodiscard]] auto begin() const { return variables_.begin(); }
  [[nodiscard]] auto end() const { return variables_.end(); }
  auto begin() { return variables_.begin(); }
  auto end() { return variables_.end(); }

  [[nodiscard]] std::size_t total_elements() const;
  /// True when names and shapes agree pairwise.
  [[nodiscard]] bool same_layout(const ModelParams& other) const;
  /// True when names and shapes match the canonical layout of `spec`.
  [[nodiscard]] bool matches(const ModelSpec& spec) const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  std::vector<Variable> variables_;
};

struct LossAccuracy {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Glorot-uniform weights, zero biases. Each variable draws from
/// stream.child(variable name).
ModelParams init_params(const ModelSpec& spec, const RngStream& stream);

/// Mean cross-entropy and argmax accuracy (ties go to the lowest class index).
LossAccuracy forward_loss(const ModelSpec& spec, const ModelParams& params, const Batch& batch);

/// Exact gradient of the mean cross-entropy, laid out like `params`.
ModelParams backward(const ModelSpec& spec, const ModelParams& params, const Batch& batch);

/// Loss, accuracy and gradient from one shared forward pass.
struct LossAndGradient {
  LossAccuracy metrics;
  ModelParams gradient;
};
LossAndGradient loss_and_gradient(const ModelSpec& spec, const ModelParams& params, const Batch& batch);

/// w - lr * g per coordinate.
ModelParams sgd_step(const ModelParams& params, const ModelParams& grads, float lr);

/// Sum of per-example losses and count of correct predictions; the building
/// block that evaluate() and federated evaluation reduce over.
struct LossSums {
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::size_t count = 0;
};
LossSums forward_sums(const ModelSpec& spec, const ModelParams& params, const Batch& batch);

/// Full-dataset mean loss and accuracy, evaluated in fixed-size chunks.
LossAccuracy evaluate(const ModelSpec& spec, const ModelParams& params, const Dataset& dataset);

}  // namespace fedsim
