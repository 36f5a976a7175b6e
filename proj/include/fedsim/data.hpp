// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// ---------------------------------------------------------------------------
// IDX files (the MNIST distribution format)
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

class IdxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
/// File could not be opened or read.
class IdxIoError : public IdxError {
 public:
  using IdxError::IdxError;
};
/// Leading four bytes are not the expected magic number.
class IdxMagicError : public IdxError {
 public:
  using IdxError::IdxError;
};
/// Header or payload shorter than the dimensions announce.
class IdxTruncatedError : public IdxError {
 public:
  using IdxError::IdxError;
};
/// Image and label files disagree on the number of items.
class IdxCountMismatchError : public IdxError {
 public:
  using IdxError::IdxError;
};

/// Loads an image/label IDX pair. Pixels are scaled by 1/255 and each image is
/// flattened to rows*cols features; num_classes is max(label) + 1 (at least 2).
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Writers for the same format; used to export synthetic data and build fixtures.
void write_idx_images(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                      std::span<const std::uint8_t> pixels);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

/// Shape of the synthetic class clusters. Each class centre is a shared
/// "canvas" (active dimensions at mid intensity, the rest well below zero so
/// they clamp to 0) plus a class-specific offset of magnitude `separation` on
/// the active dimensions. Examples add isotropic N(0, noise²) and clamp to [0,1].
struct SynthOptions {
  float noise = 0.3f;
  float separation = 0.12f;
  float active_fraction = 0.3f;
};

/// n_per_class examples of each class, interleaved (example i has label i % num_classes).
Dataset synth_dataset(const RngStream& stream, std::size_t n_per_class, std::size_t num_classes,
                      std::size_t input_dim, const SynthOptions& options = {});

/// First `n` examples (storage order) as a new dataset.
Dataset take_prefix(const Dataset& dataset, std::size_t n);

// ---------------------------------------------------------------------------
// Client partitions
// ---------------------------------------------------------------------------

struct ClientPartition {
  std::vector<std::vector<std::size_t>> clients;

  [[nodiscard]] std::size_t num_clients() const { return clients.size(); }
  [[nodiscard]] std::size_t client_size(std::size_t k) const { return clients[k].size(); }
  [[nodiscard]] std::size_t total_size() const;
};

/// Checks disjointness, range and non-emptiness. Throws ContractError.
void validate(const ClientPartition& partition, std::size_t dataset_size);

/// Shuffle, then contiguous split; sizes differ by at most one.
ClientPartition partition_iid(const Dataset& dataset, std::size_t k, const RngStream& stream);

/// Client i holds only class (i mod num_classes); a class's examples are split
/// evenly over its clients. Rejects k < num_classes and classes that would
/// leave an assigned client empty.
ClientPartition partition_label_skew(const Dataset& dataset, std::size_t k, const RngStream& stream);

/// Client sizes follow a geometric progression whose largest/smallest ratio is
/// `ratio`; sizes are rounded by largest remainder so they sum to N. Labels are
/// assigned IID. With ratio == 1 the result is identical to partition_iid.
ClientPartition partition_quantity_skew(const Dataset& dataset, std::size_t k, double ratio,
                                        const RngStream& stream);

/// Target sizes used by partition_quantity_skew.
std::vector<std::size_t> geometric_sizes(std::size_t total, std::size_t k, double ratio);

/// The client's indices shuffled by `stream` and cut into ceil(n_k / B) runs of
/// at most B; the last may be short.
std::vector<std::vector<std::size_t>> batch_indices(std::span<const std::size_t> client, std::size_t batch_size,
                                                    const RngStream& stream);
std::vector<Batch> batches(const Dataset& dataset, std::span<const std::size_t> client, std::size_t batch_size,
                           const RngStream& stream);

// ---------------------------------------------------------------------------
// Label histograms
// ---------------------------------------------------------------------------

struct LabelHistogram {
  std::size_t num_classes = 0;
  std::vector<std::vector<std::size_t>> counts;  // clients × classes

  [[nodiscard]] std::size_t row_sum(std::size_t client) const;
  [[nodiscard]] std::size_t nonzero_classes(std::size_t client) const;
};

LabelHistogram label_histogram(const Dataset& dataset, const ClientPartition& partition);

/// One JSON object per line: {"client_id":k,"n_k":n,"label_counts":[...]}.
std::string partition_jsonl(const LabelHistogram& histogram);
void write_partition_jsonl(const std::filesystem::path& path, const LabelHistogram& histogram);

}  // namespace fedsim
