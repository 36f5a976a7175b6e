// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsim/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedsim/error.hpp"

namespace fedsim {
namespace {

std::string format_float(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string format_optional(const std::optional<double>& v) { return v ? format_float(*v) : std::string(); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::optional<double> parse_optional(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

}  // namespace

std::uint64_t RunLog::cumulative_broadcast_bits() const {
  return rounds_.empty() ? 0 : rounds_.back().cumulative_broadcast_bits;
}

std::uint64_t RunLog::cumulative_aggregate_bits() const {
  return rounds_.empty() ? 0 : rounds_.back().cumulative_aggregate_bits;
}

void RunLog::record(const RoundMetrics& m) {
  if (!rounds_.empty())
    require(m.round > rounds_.back().round, "record: round " + std::to_string(m.round) +
                                                " does not follow round " + std::to_string(rounds_.back().round));
  require(m.cumulative_broadcast_bits == cumulative_broadcast_bits() + m.broadcast_bits_round,
          "record: cumulative broadcast bits are not the prefix sum");
  require(m.cumulative_aggregate_bits == cumulative_aggregate_bits() + m.aggregate_bits_round,
          "record: cumulative aggregate bits are not the prefix sum");
  require(m.train_accuracy >= 0.0 && m.train_accuracy <= 1.0, "record: train accuracy outside [0, 1]");
  if (m.eval_accuracy)
    require(*m.eval_accuracy >= 0.0 && *m.eval_accuracy <= 1.0, "record: eval accuracy outside [0, 1]");
  rounds_.push_back(m);
}

void RunLog::append(RoundMetrics m) {
  m.cumulative_broadcast_bits = cumulative_broadcast_bits() + m.broadcast_bits_round;
  m.cumulative_aggregate_bits = cumulative_aggregate_bits() + m.aggregate_bits_round;
  record(m);
}

RunLog record(RunLog log, const RoundMetrics& metrics) {
  log.record(metrics);
  return log;
}

std::string metrics_csv(const RunLog& log) {
  std::string out = kMetricsCsvHeader;
  out += '\n';
  for (const auto& m : log.rounds()) {
    out += std::to_string(m.round) + ',' + format_float(m.train_loss) + ',' + format_float(m.train_accuracy) + ',' +
           format_optional(m.eval_loss) + ',' + format_optional(m.eval_accuracy) + ',' +
           std::to_string(m.broadcast_bits_round) + ',' + std::to_string(m.aggregate_bits_round) + ',' +
           std::to_string(m.cumulative_broadcast_bits) + ',' + std::to_string(m.cumulative_aggregate_bits) + '\n';
  }
  return out;
}

std::string metrics_jsonl(const RunLog& log) {
  std::string out;
  for (const auto& m : log.rounds()) {
    nlohmann::ordered_json j;
    j["round"] = m.round;
    j["train_loss"] = m.train_loss;
    j["train_accuracy"] = m.train_accuracy;
    j["eval_loss"] = m.eval_loss ? nlohmann::ordered_json(*m.eval_loss) : nlohmann::ordered_json(nullptr);
    j["eval_accuracy"] = m.eval_accuracy ? nlohmann::ordered_json(*m.eval_accuracy) : nlohmann::ordered_json(nullptr);
    j["broadcast_bits_round"] = m.broadcast_bits_round;
    j["aggregate_bits_round"] = m.aggregate_bits_round;
    j["cumulative_broadcast_bits"] = m.cumulative_broadcast_bits;
    j["cumulative_aggregate_bits"] = m.cumulative_aggregate_bits;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_csv(const RunLog& log, const std::filesystem::path& path) { write_text(path, metrics_csv(log)); }

void write_jsonl(const RunLog& log, const std::filesystem::path& path) { write_text(path, metrics_jsonl(log)); }

RunLog parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(std::getline(in, line) && line == kMetricsCsvHeader, "metrics CSV: unexpected header");
  RunLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    require(f.size() == 9, "metrics CSV: expected 9 fields, got " + std::to_string(f.size()));
    RoundMetrics m;
    m.round = std::stoull(f[0]);
    m.train_loss = std::stod(f[1]);
    m.train_accuracy = std::stod(f[2]);
    m.eval_loss = parse_optional(f[3]);
    m.eval_accuracy = parse_optional(f[4]);
    m.broadcast_bits_round = std::stoull(f[5]);
    m.aggregate_bits_round = std::stoull(f[6]);
    m.cumulative_broadcast_bits = std::stoull(f[7]);
    m.cumulative_aggregate_bits = std::stoull(f[8]);
    log.record(m);
  }
  return log;
}

double final_accuracy(const RunLog& log) {
  require(!log.empty(), "final_accuracy: empty log");
  for (auto it = log.rounds().rbegin(); it != log.rounds().rend(); ++it)
    if (it->eval_accuracy) return *it->eval_accuracy;
  return log.back().train_accuracy;
}

RunComparison compare_runs(const RunLog& a, const RunLog& b) {
  require(!a.empty() && a.size() == b.size(), "compare_runs: logs must be non-empty and of equal length (" +
                                                  std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  auto ratio = [](std::uint64_t x, std::uint64_t y) {
    return x == y ? 1.0 : static_cast<double>(x) / static_cast<double>(y);
  };
  RunComparison c;
  c.broadcast_bit_ratio = ratio(a.cumulative_broadcast_bits(), b.cumulative_broadcast_bits());
  c.aggregate_bit_ratio = ratio(a.cumulative_aggregate_bits(), b.cumulative_aggregate_bits());
  c.total_bit_ratio = ratio(a.cumulative_broadcast_bits() + a.cumulative_aggregate_bits(),
                            b.cumulative_broadcast_bits() + b.cumulative_aggregate_bits());
  c.final_accuracy_delta = final_accuracy(a) - final_accuracy(b);
  return c;
}

}  // namespace fedsim
