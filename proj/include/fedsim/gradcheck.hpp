// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fedsim/model.hpp"

namespace fedsim {

/// Finite-difference audit settings. The relative error of a coordinate is
///   |analytic - numeric| / max(|analytic|, |numeric|, denominator_floor)
/// so gradients near zero are compared on an absolute scale.
struct GradcheckOptions {
  double step = 1e-3;
  double tolerance = 1e-4;
  double denominator_floor = 1e-2;
};

struct VariableCheck {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates whose ±step probes flip a ReLU; central differences are not
  /// valid across the kink, so they are left out.
  std::size_t skipped = 0;
};

struct GradcheckReport {
  std::string model;
  std::vector<VariableCheck> variables;
  double max_relative_error = 0.0;
  bool passed = false;
};

/// Mean cross-entropy recomputed entirely in double with plain loops. When
/// `active` is non-null it receives the hidden-unit ReLU pattern (Mlp only).
double reference_loss(const ModelSpec& spec, const std::vector<std::vector<double>>& params, const Batch& batch,
                      std::vector<bool>* active = nullptr);

/// Compares `analytic` against central differences of reference_loss at every coordinate.
GradcheckReport check_gradient(const ModelSpec& spec, const ModelParams& params, const Batch& batch,
                               const ModelParams& analytic, const GradcheckOptions& options = {});

/// Random (params, batch) pair for one audit trial: Glorot weights plus small
/// random biases, inputs uniform in [0, 1], uniform labels.
struct GradcheckCase {
  ModelParams params;
  Batch batch;
};
GradcheckCase random_gradcheck_case(const ModelSpec& spec, std::size_t batch_size, std::uint64_t seed);

/// The audit the CLI and acceptance suite run: `trials` random cases for a
/// softmax regression and an Mlp each, checked against backward().
std::vector<GradcheckReport> gradcheck_suite(std::size_t trials, std::uint64_t seed,
                                             const GradcheckOptions& options = {});

std::string format_report(const GradcheckReport& report);

}  // namespace fedsim
