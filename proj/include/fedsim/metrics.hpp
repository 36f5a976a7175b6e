// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fedsim {

/// One round's metrics. Bits are exact 64-bit counts.
struct RoundMetrics {
  std::size_t round = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> eval_loss;
  std::optional<double> eval_accuracy;
  std::uint64_t broadcast_bits_round = 0;
  std::uint64_t aggregate_bits_round = 0;
  std::uint64_t cumulative_broadcast_bits = 0;
  std::uint64_t cumulative_aggregate_bits = 0;

  friend bool operator==(const RoundMetrics&, const RoundMetrics&) = default;
};

inline constexpr const char* kMetricsCsvHeader =
    "round,train_loss,train_accuracy,eval_loss,eval_accuracy,broadcast_bits_round,aggregate_bits_round,"
    "cumulative_broadcast_bits,cumulative_aggregate_bits";

/// Append-only per-run record. record() enforces strictly increasing rounds and
/// that cumulative counters are the prefix sums of the per-round counters.
class RunLog {
 public:
  [[nodiscard]] const std::vector<RoundMetrics>& rounds() const { return rounds_; }
  [[nodiscard]] bool empty() const { return rounds_.empty(); }
  [[nodiscard]] std::size_t size() const { return rounds_.size(); }
  [[nodiscard]] const RoundMetrics& back() const { return rounds_.back(); }

  [[nodiscard]] std::uint64_t cumulative_broadcast_bits() const;
  [[nodiscard]] std::uint64_t cumulative_aggregate_bits() const;

  /// Validates and appends. Throws ContractError on an out-of-order round or
  /// inconsistent cumulative fields.
  void record(const RoundMetrics& metrics);
  /// Fills the cumulative fields from the current totals, then records.
  void append(RoundMetrics metrics);

 private:
  std::vector<RoundMetrics> rounds_;
};

/// Functional form of RunLog::record.
RunLog record(RunLog log, const RoundMetrics& metrics);

/// CSV with kMetricsCsvHeader; floats with 6 significant digits, bits as
/// integers, missing evaluations as empty fields.
std::string metrics_csv(const RunLog& log);
/// One JSON object per round with the CSV field names; missing values are null.
std::string metrics_jsonl(const RunLog& log);
void write_csv(const RunLog& log, const std::filesystem::path& path);
void write_jsonl(const RunLog& log, const std::filesystem::path& path);

/// Parses text produced by metrics_csv.
RunLog parse_metrics_csv(const std::string& text);

struct RunComparison {
  double broadcast_bit_ratio = 1.0;  // total(A) / total(B)
  double aggregate_bit_ratio = 1.0;
  double total_bit_ratio = 1.0;
  double final_accuracy_delta = 0.0;  // final eval accuracy A - B (train accuracy if never evaluated)
};

/// Throws ContractError if the logs differ in length or are empty.
RunComparison compare_runs(const RunLog& a, const RunLog& b);

/// Final evaluation accuracy if any round was evaluated, else final train accuracy.
double final_accuracy(const RunLog& log);

}  // namespace fedsim
