// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>
#include <vector>

namespace fedsim {

/// Identifies an independent random stream by (seed, path).
///
/// The path is folded into a 64-bit key with the SplitMix64 finalizer; draws
/// are SplitMix64 outputs over a counter starting at that key. The generator
/// only uses integer arithmetic, so identical (seed, path) pairs produce
/// identical sequences on every platform. String labels are hashed with
/// FNV-1a before folding.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {});

  [[nodiscard]] RngStream child(std::uint64_t label) const;
  [[nodiscard]] RngStream child(std::string_view label) const;

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] const std::vector<std::uint64_t>& path() const { return path_; }
  [[nodiscard]] std::uint64_t key() const { return key_; }

 private:
  std::uint64_t seed_;
  std::vector<std::uint64_t> path_;
  std::uint64_t key_;
};

/// Stateful draw engine positioned at the start of a stream.
class RngGenerator {
 public:
  explicit RngGenerator(const RngStream& stream) : state_(stream.key()) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double next_double();
  /// Uniform integer in [0, bound), unbiased (Lemire's multiply-shift with rejection).
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t hash_label(std::string_view label);

/// In-place Fisher-Yates shuffle driven by `gen`.
template <typename T>
void shuffle_in_place(std::vector<T>& items, RngGenerator& gen) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(gen.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

/// Random permutation of 0..n-1.
std::vector<std::size_t> rng_shuffle(const RngStream& stream, std::size_t n);

/// m distinct indices drawn uniformly from [0, population), sorted ascending.
/// Throws ContractError if m > population.
std::vector<std::size_t> rng_sample_without_replacement(const RngStream& stream,
                                                        std::size_t population, std::size_t m);

}  // namespace fedsim
