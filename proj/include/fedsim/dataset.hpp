// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedsim/tensor.hpp"

namespace fedsim {

/// Labelled examples with inputs scaled to [0, 1].
struct Dataset {
  Tensor inputs;             // N × input_dim
  std::vector<int> labels;   // N entries in [0, num_classes)
  std::size_t num_classes = 0;

  [[nodiscard]] std::size_t size() const { return labels.size(); }
  [[nodiscard]] std::size_t input_dim() const { return inputs.cols(); }
};

/// Throws ContractError if the Dataset invariants do not hold.
void validate(const Dataset& dataset);

struct Batch {
  Tensor inputs;            // n × input_dim
  std::vector<int> labels;  // n entries
};

/// Copies the rows named by `indices` (in that order) into a batch.
Batch gather_batch(const Dataset& dataset, std::span<const std::size_t> indices);

/// The whole dataset as a single batch, in storage order.
Batch as_batch(const Dataset& dataset);

}  // namespace fedsim
