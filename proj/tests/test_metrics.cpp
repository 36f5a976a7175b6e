// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "fedsim/error.hpp"
#include "fedsim/metrics.hpp"

using namespace fedsim;

namespace {

RoundMetrics round_with(std::size_t r, std::uint64_t bcast, std::uint64_t agg, double acc) {
  RoundMetrics m;
  m.round = r;
  m.train_loss = 1.0 / static_cast<double>(r);
  m.train_accuracy = acc;
  m.broadcast_bits_round = bcast;
  m.aggregate_bits_round = agg;
  return m;
}

}  // namespace

TEST_CASE("cumulative counters are prefix sums") {
  RunLog log;
  log.append(round_with(1, 100, 10, 0.1));
  log.append(round_with(2, 200, 20, 0.2));
  log.append(round_with(3, 300, 30, 0.3));
  CHECK(log.rounds()[2].cumulative_broadcast_bits == 600);
  CHECK(log.rounds()[1].cumulative_aggregate_bits == 30);
  CHECK(log.cumulative_broadcast_bits() == 600);
  CHECK(log.cumulative_aggregate_bits() == 60);

  RoundMetrics bad = round_with(4, 1, 1, 0.5);
  bad.cumulative_broadcast_bits = 5;
  bad.cumulative_aggregate_bits = 61;
  CHECK_THROWS_AS(log.record(bad), ContractError);
}

TEST_CASE("rounds must strictly increase") {
  RunLog log;
  log.append(round_with(2, 1, 1, 0.5));
  CHECK_THROWS_AS(log.append(round_with(2, 1, 1, 0.5)), ContractError);
  CHECK_THROWS_AS(log.append(round_with(1, 1, 1, 0.5)), ContractError);
  CHECK_THROWS_AS(log.append(round_with(3, 1, 1, 1.5)), ContractError);
  const RunLog longer = record(log, [] {
    RoundMetrics m = round_with(5, 1, 1, 0.5);
    m.cumulative_broadcast_bits = 2;
    m.cumulative_aggregate_bits = 2;
    return m;
  }());
  CHECK(longer.size() == 2);
  CHECK(log.size() == 1);
}

TEST_CASE("CSV rendering and parse-back") {
  CHECK(metrics_csv(RunLog{}) == std::string(kMetricsCsvHeader) + "\n");

  RunLog log;
  log.append(round_with(1, 5088320, 5088320, 0.25));
  RoundMetrics second = round_with(2, 1325184, 1325184, 0.5);
  second.eval_loss = 0.123456789;
  second.eval_accuracy = 0.875;
  log.append(second);
  const std::string csv = metrics_csv(log);
  CHECK(csv == std::string(kMetricsCsvHeader) + "\n" +
                   "1,1,0.25,,,5088320,5088320,5088320,5088320\n"
                   "2,0.5,0.5,0.123457,0.875,1325184,1325184,6413504,6413504\n");
  CHECK(metrics_csv(log) == csv);

  const RunLog parsed = parse_metrics_csv(csv);
  REQUIRE(parsed.size() == 2);
  CHECK_FALSE(parsed.rounds()[0].eval_accuracy.has_value());
  CHECK(*parsed.rounds()[1].eval_accuracy == 0.875);
  CHECK(parsed.rounds()[1].cumulative_broadcast_bits == 6413504);
  CHECK(metrics_csv(parsed) == csv);
  CHECK_THROWS(parse_metrics_csv("round,wrong\n"));
}

TEST_CASE("JSON lines") {
  RunLog log;
  log.append(round_with(1, 8, 4, 0.5));
  CHECK(metrics_jsonl(log) ==
        "{\"round\":1,\"train_loss\":1.0,\"train_accuracy\":0.5,\"eval_loss\":null,\"eval_accuracy\":null,"
        "\"broadcast_bits_round\":8,\"aggregate_bits_round\":4,\"cumulative_broadcast_bits\":8,"
        "\"cumulative_aggregate_bits\":4}\n");
}

TEST_CASE("compare_runs") {
  RunLog a, b;
  a.append(round_with(1, 100, 40, 0.5));
  b.append(round_with(1, 100, 40, 0.5));
  RunComparison same = compare_runs(a, b);
  CHECK(same.total_bit_ratio == 1.0);
  CHECK(same.final_accuracy_delta == 0.0);

  RunLog c;
  RoundMetrics m = round_with(1, 50, 10, 0.25);
  m.eval_accuracy = 0.4;
  m.eval_loss = 1.0;
  c.append(m);
  const RunComparison r = compare_runs(c, a);
  CHECK(r.broadcast_bit_ratio == 0.5);
  CHECK(r.aggregate_bit_ratio == 0.25);
  CHECK(r.total_bit_ratio == doctest::Approx(60.0 / 140.0));
  CHECK(r.final_accuracy_delta == doctest::Approx(0.4 - 0.5));
  CHECK(final_accuracy(c) == 0.4);

  a.append(round_with(2, 1, 1, 0.5));
  CHECK_THROWS_AS(compare_runs(a, b), ContractError);
  CHECK_THROWS_AS(compare_runs(RunLog{}, RunLog{}), ContractError);
}
