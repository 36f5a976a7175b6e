// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "fedsim/error.hpp"

namespace fedsim {
namespace {

constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fold(std::uint64_t key, std::uint64_t label) {
  return mix64(key ^ mix64(label + kGoldenGamma));
}

struct Wide {
  std::uint64_t high;
  std::uint64_t low;
};

// Full 64x64 -> 128-bit product from 32-bit limbs.
constexpr Wide multiply_wide(std::uint64_t a, std::uint64_t b) {
  const std::uint64_t a_lo = a & 0xffffffffULL, a_hi = a >> 32;
  const std::uint64_t b_lo = b & 0xffffffffULL, b_hi = b >> 32;
  const std::uint64_t lo_lo = a_lo * b_lo;
  const std::uint64_t hi_lo = a_hi * b_lo;
  const std::uint64_t lo_hi = a_lo * b_hi;
  const std::uint64_t hi_hi = a_hi * b_hi;
  const std::uint64_t cross = (lo_lo >> 32) + (hi_lo & 0xffffffffULL) + lo_hi;
  return {hi_hi + (hi_lo >> 32) + (cross >> 32), (cross << 32) | (lo_lo & 0xffffffffULL)};
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
    : seed_(seed), path_(path), key_(mix64(seed + kGoldenGamma)) {
  for (auto label : path_) key_ = fold(key_, label);
}

RngStream RngStream::child(std::uint64_t label) const {
  RngStream out = *this;
  out.path_.push_back(label);
  out.key_ = fold(key_, label);
  return out;
}

RngStream RngStream::child(std::string_view label) const { return child(hash_label(label)); }

std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t RngGenerator::next_u64() {
  state_ += kGoldenGamma;
  return mix64(state_);
}

double RngGenerator::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngGenerator::below(std::uint64_t bound) {
  require(bound > 0, "RngGenerator::below: bound must be positive");
  Wide product = multiply_wide(next_u64(), bound);
  if (product.low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (product.low < threshold) product = multiply_wide(next_u64(), bound);
  }
  return product.high;
}

double RngGenerator::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - next_double();
  const double u2 = next_double();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::vector<std::size_t> rng_shuffle(const RngStream& stream, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  RngGenerator gen(stream);
  shuffle_in_place(perm, gen);
  return perm;
}

std::vector<std::size_t> rng_sample_without_replacement(const RngStream& stream,
                                                        std::size_t population, std::size_t m) {
  require(m <= population, "sample_without_replacement: m (" + std::to_string(m) +
                               ") exceeds population (" + std::to_string(population) + ")");
  // Partial Fisher-Yates: the first m slots end up a uniform m-subset.
  std::vector<std::size_t> pool(population);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  RngGenerator gen(stream);
  for (std::size_t i = 0; i < m; ++i) {
    const auto j = i + static_cast<std::size_t>(gen.below(population - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(m);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace fedsim
