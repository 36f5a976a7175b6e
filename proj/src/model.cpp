// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fedsim/error.hpp"

namespace fedsim {
namespace {

constexpr std::size_t kEvalChunk = 1024;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

void check_batch(const ModelSpec& spec, const ModelParams& params, const Batch& batch) {
  require(params.matches(spec), "params do not match model " + describe(spec));
  require(batch.inputs.rank() == 2 && batch.inputs.cols() == input_dim(spec),
          "batch inputs " + shape_string(batch.inputs.shape()) + " do not match model input_dim " +
              std::to_string(input_dim(spec)));
  require(batch.labels.size() == batch.inputs.rows(), "batch label count differs from input rows");
  const auto classes = static_cast<int>(num_classes(spec));
  for (int label : batch.labels) {
    if (label < 0 || label >= classes)
      throw ContractError("label " + std::to_string(label) + " out of range [0, " + std::to_string(classes) + ")");
  }
}

struct ForwardPass {
  Tensor hidden_pre;  // empty for softmax regression
  Tensor hidden;
  Tensor logits;
};

ForwardPass run_forward(const ModelSpec& spec, const ModelParams& params, const Tensor& inputs) {
  ForwardPass out;
  if (std::holds_alternative<SoftmaxRegressionSpec>(spec)) {
    out.logits = add_row_vector(matmul(inputs, params[0].tensor), params[1].tensor);
  } else {
    out.hidden_pre = add_row_vector(matmul(inputs, params[0].tensor), params[1].tensor);
    out.hidden = relu(out.hidden_pre);
    out.logits = add_row_vector(matmul(out.hidden, params[2].tensor), params[3].tensor);
  }
  return out;
}

LossSums reduce_logits(const Tensor& logits, const std::vector<int>& labels) {
  LossSums sums;
  const std::size_t n = logits.rows(), c = logits.cols();
  const auto x = logits.data();
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = x.data() + i * c;
    const auto best = static_cast<std::size_t>(std::max_element(row, row + c) - row);
    const double peak = row[best];
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += std::exp(static_cast<double>(row[j]) - peak);
    const auto label = static_cast<std::size_t>(labels[i]);
    sums.loss_sum += std::log(total) + peak - static_cast<double>(row[label]);
    if (best == label) ++sums.correct;
  }
  sums.count = n;
  return sums;
}

LossAccuracy to_mean(const LossSums& sums) {
  const auto n = static_cast<double>(sums.count);
  return {sums.loss_sum / n, static_cast<double>(sums.correct) / n};
}

/// (softmax - one_hot) / n: the fused softmax cross-entropy gradient w.r.t. logits.
Tensor logits_gradient(const Tensor& logits, const std::vector<int>& labels) {
  Tensor probs = softmax_rows(logits);
  const std::size_t n = probs.rows(), c = probs.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  auto p = probs.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double target = static_cast<std::size_t>(labels[i]) == j ? 1.0 : 0.0;
      p[i * c + j] = static_cast<float>((static_cast<double>(p[i * c + j]) - target) * inv_n);
    }
  }
  return probs;
}

}  // namespace

std::size_t input_dim(const ModelSpec& spec) {
  return std::visit([](const auto& s) { return s.input_dim; }, spec);
}

std::size_t num_classes(const ModelSpec& spec) {
  return std::visit([](const auto& s) { return s.num_classes; }, spec);
}

std::string describe(const ModelSpec& spec) {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const SoftmaxRegressionSpec& s) {
                   os << "SoftmaxRegression{" << s.input_dim << ", " << s.num_classes << "}";
                 },
                 [&](const MlpSpec& s) {
                   os << "Mlp{" << s.input_dim << ", " << s.hidden_units << ", " << s.num_classes << "}";
                 },
             },
             spec);
  return os.str();
}

void validate(const ModelSpec& spec) {
  require(input_dim(spec) >= 1, "model input_dim must be >= 1");
  require(num_classes(spec) >= 2, "model num_classes must be >= 2");
  if (const auto* mlp = std::get_if<MlpSpec>(&spec)) require(mlp->hidden_units >= 1, "mlp hidden_units must be >= 1");
}

std::vector<VariableShape> variable_shapes(const ModelSpec& spec) {
  validate(spec);
  return std::visit(Overloaded{
                        [](const SoftmaxRegressionSpec& s) {
                          return std::vector<VariableShape>{{"W", {s.input_dim, s.num_classes}},
                                                            {"b", {s.num_classes}}};
                        },
                        [](const MlpSpec& s) {
                          return std::vector<VariableShape>{{"W1", {s.input_dim, s.hidden_units}},
                                                            {"b1", {s.hidden_units}},
                                                            {"W2", {s.hidden_units, s.num_classes}},
                                                            {"b2", {s.num_classes}}};
                        },
                    },
                    spec);
}

ModelParams::ModelParams(std::vector<Variable> variables) : variables_(std::move(variables)) {
  for (std::size_t i = 0; i < variables_.size(); ++i)
    for (std::size_t j = i + 1; j < variables_.size(); ++j)
      require(variables_[i].name != variables_[j].name, "duplicate variable name " + variables_[i].name);
}

ModelParams ModelParams::zeros(const ModelSpec& spec) {
  std::vector<Variable> vars;
  for (auto& [name, shape] : variable_shapes(spec)) vars.push_back({name, Tensor(shape)});
  return ModelParams(std::move(vars));
}

const Tensor& ModelParams::get(std::string_view name) const {
  for (const auto& v : variables_)
    if (v.name == name) return v.tensor;
  throw ContractError("no variable named " + std::string(name));
}

Tensor& ModelParams::get(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).get(name));
}

std::size_t ModelParams::total_elements() const {
  return std::accumulate(variables_.begin(), variables_.end(), std::size_t{0},
                         [](std::size_t acc, const Variable& v) { return acc + v.tensor.size(); });
}

bool ModelParams::same_layout(const ModelParams& other) const {
  if (variables_.size() != other.variables_.size()) return false;
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (variables_[i].name != other.variables_[i].name) return false;
    if (variables_[i].tensor.shape() != other.variables_[i].tensor.shape()) return false;
  }
  return true;
}

bool ModelParams::matches(const ModelSpec& spec) const {
  const auto expected = variable_shapes(spec);
  if (expected.size() != variables_.size()) return false;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i].name != variables_[i].name || expected[i].shape != variables_[i].tensor.shape()) return false;
  }
  return true;
}

ModelParams init_params(const ModelSpec& spec, const RngStream& stream) {
  std::vector<Variable> vars;
  for (auto& [name, shape] : variable_shapes(spec)) {
    if (shape.size() == 1) {
      vars.push_back({name, Tensor(shape)});
      continue;
    }
    const double fan_sum = static_cast<double>(shape[0] + shape[1]);
    const auto limit = static_cast<float>(std::sqrt(6.0 / fan_sum));
    Tensor draws = rng_uniform(stream.child(name), -limit, limit, element_count(shape));
    vars.push_back({name, Tensor(shape, draws.values())});
  }
  return ModelParams(std::move(vars));
}

LossSums forward_sums(const ModelSpec& spec, const ModelParams& params, const Batch& batch) {
  check_batch(spec, params, batch);
  const ForwardPass pass = run_forward(spec, params, batch.inputs);
  return reduce_logits(pass.logits, batch.labels);
}

LossAccuracy forward_loss(const ModelSpec& spec, const ModelParams& params, const Batch& batch) {
  return to_mean(forward_sums(spec, params, batch));
}

LossAndGradient loss_and_gradient(const ModelSpec& spec, const ModelParams& params, const Batch& batch) {
  check_batch(spec, params, batch);
  const ForwardPass pass = run_forward(spec, params, batch.inputs);
  LossAndGradient out;
  out.metrics = to_mean(reduce_logits(pass.logits, batch.labels));

  const Tensor grad_logits = logits_gradient(pass.logits, batch.labels);
  std::vector<Variable> grads;
  if (std::holds_alternative<SoftmaxRegressionSpec>(spec)) {
    grads.push_back({"W", matmul_tn(batch.inputs, grad_logits)});
    grads.push_back({"b", column_sums(grad_logits)});
  } else {
    const Tensor grad_hidden = matmul_nt(grad_logits, params[2].tensor);
    const Tensor grad_pre = relu_grad_mask(pass.hidden_pre, grad_hidden);
    grads.push_back({"W1", matmul_tn(batch.inputs, grad_pre)});
    grads.push_back({"b1", column_sums(grad_pre)});
    grads.push_back({"W2", matmul_tn(pass.hidden, grad_logits)});
    grads.push_back({"b2", column_sums(grad_logits)});
  }
  out.gradient = ModelParams(std::move(grads));
  return out;
}

ModelParams backward(const ModelSpec& spec, const ModelParams& params, const Batch& batch) {
  return loss_and_gradient(spec, params, batch).gradient;
}

ModelParams sgd_step(const ModelParams& params, const ModelParams& grads, float lr) {
  require(params.same_layout(grads), "sgd_step: gradient layout differs from params");
  ModelParams out = params;
  for (std::size_t v = 0; v < out.size(); ++v) {
    auto w = out[v].tensor.data();
    const auto g = grads[v].tensor.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
  }
  return out;
}

LossAccuracy evaluate(const ModelSpec& spec, const ModelParams& params, const Dataset& dataset) {
  require(dataset.size() >= 1, "evaluate: empty dataset");
  LossSums total;
  std::vector<std::size_t> chunk;
  for (std::size_t start = 0; start < dataset.size(); start += kEvalChunk) {
    const std::size_t stop = std::min(dataset.size(), start + kEvalChunk);
    chunk.resize(stop - start);
    std::iota(chunk.begin(), chunk.end(), start);
    const LossSums part = forward_sums(spec, params, gather_batch(dataset, chunk));
    total.loss_sum += part.loss_sum;
    total.correct += part.correct;
    total.count += part.count;
  }
  return to_mean(total);
}

}  // namespace fedsim
