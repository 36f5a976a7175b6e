// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedsim/experiment.hpp"
#include "fedsim/gradcheck.hpp"

using namespace fedsim;
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

json smoke_json() {
  return json::parse(R"({
    "name": "smoke",
    "dataset": {"source": "synthetic", "n_per_class": 12, "test_n_per_class": 5, "num_classes": 4, "input_dim": 20},
    "model": {"type": "mlp", "input_dim": 20, "hidden_units": 8, "num_classes": 4},
    "partition": {"type": "iid", "num_clients": 6},
    "federation": {"rounds": 1, "clients_per_round": 3, "batch_size": 5, "local_epochs": 2, "client_lr": 0.1},
    "codec": {"scheme": "uniform_quant", "quant_bits": 8, "min_elements_threshold": 100},
    "seed": 3,
    "output_dir": "unused",
    "eval_every": 1
  })");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fedsim_test_experiment_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parsing is strict") {
  const ExperimentConfig c = config_from_json(smoke_json());
  CHECK(c.name == "smoke");
  CHECK(std::get<MlpSpec>(c.model).hidden_units == 8);
  CHECK(c.federation.seed == 3);
  CHECK(*c.federation.clients_per_round == 3);
  CHECK(c.federation.codec.scheme == CodecScheme::kUniformQuant);
  CHECK(c.federation.codec.min_elements_threshold == 100);

  json typo = smoke_json();
  typo["model"]["hidden_unit"] = 8;
  CHECK_THROWS_AS(config_from_json(typo), ConfigError);
  json top = smoke_json();
  top["round"] = 5;
  CHECK_THROWS_AS(config_from_json(top), ConfigError);
  json wrong_type = smoke_json();
  wrong_type["federation"]["rounds"] = "ten";
  CHECK_THROWS_AS(config_from_json(wrong_type), ConfigError);
  json mismatch = smoke_json();
  mismatch["dataset"]["input_dim"] = 21;
  CHECK_THROWS_AS(config_from_json(mismatch), ConfigError);
  json too_many = smoke_json();
  too_many["federation"]["clients_per_round"] = 7;
  CHECK_THROWS_AS(config_from_json(too_many), ConfigError);
  json bad_scheme = smoke_json();
  bad_scheme["partition"]["type"] = "dirichlet";
  CHECK_THROWS_AS(config_from_json(bad_scheme), ConfigError);
}

TEST_CASE("config echo round-trips") {
  const ExperimentConfig c = config_from_json(smoke_json());
  const ordered_json echoed = config_to_json(c);
  const ExperimentConfig again = config_from_json(json::parse(echoed.dump()));
  CHECK(config_to_json(again) == echoed);
}

TEST_CASE("smoke run writes one row per round and reruns byte-identically") {
  ExperimentConfig c = config_from_json(smoke_json());
  c.output_dir = scratch("smoke_a");
  const RunResult r = run_experiment(c);
  REQUIRE(r.log.size() == 1);
  CHECK(r.log.back().eval_accuracy.has_value());

  const std::string csv = slurp(c.output_dir / "metrics.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(fs::exists(c.output_dir / "metrics.jsonl"));
  CHECK(fs::exists(c.output_dir / "partition.jsonl"));
  const json summary = json::parse(slurp(c.output_dir / "summary.json"));
  CHECK(summary["config"]["seed"] == 3);
  CHECK(summary["total_broadcast_bits"] == r.log.cumulative_broadcast_bits());

  ExperimentConfig again = c;
  again.output_dir = scratch("smoke_b");
  run_experiment(again);
  for (const char* f : {"metrics.csv", "metrics.jsonl", "partition.jsonl"})
    CHECK(slurp(c.output_dir / f) == slurp(again.output_dir / f));
}

TEST_CASE("evaluation cadence") {
  ExperimentConfig c = config_from_json(smoke_json());
  c.federation.rounds = 5;
  c.eval_every = 2;
  const RunResult r = run_experiment(c, false);
  REQUIRE(r.log.size() == 5);
  CHECK_FALSE(r.log.rounds()[0].eval_accuracy.has_value());
  CHECK(r.log.rounds()[1].eval_accuracy.has_value());
  CHECK_FALSE(r.log.rounds()[2].eval_accuracy.has_value());
  CHECK(r.log.rounds()[4].eval_accuracy.has_value());
}

TEST_CASE("paired compression runs measure the analytic bit ratio") {
  ExperimentConfig base = config_from_json(smoke_json());
  base.federation.rounds = 3;
  const PairedRuns p = exp1_compression(base, false);
  const double analytic = compression_ratio(base.model, base.federation.codec);
  CHECK(analytic < 1.0);
  CHECK(1.0 / p.comparison.total_bit_ratio == doctest::Approx(analytic).epsilon(1e-12));
  const std::uint64_t per_model = encoded_model_bits(base.model, base.federation.codec);
  CHECK(p.b.log.cumulative_broadcast_bits() == 3 * 3 * per_model);
  CHECK(p.report["comparison"]["analytic_compression_ratio"] == analytic);
}

TEST_CASE("paired heterogeneity runs") {
  ExperimentConfig base = config_from_json(smoke_json());
  base.partition.num_clients = 4;
  base.federation.clients_per_round = 4;
  const PairedRuns p = exp2_noniid(base, false);
  for (std::size_t k = 0; k < 4; ++k) CHECK(p.b.histogram.nonzero_classes(k) == 1);
  CHECK(p.report["label_skew_histogram"].size() == 4);
}

TEST_CASE("overrides") {
  ExperimentConfig c = exp1_base_config();
  Overrides o;
  o.seed = 11;
  o.rounds = 2;
  o.quant_bits = 4;
  apply_overrides(c, o);
  CHECK(c.federation.seed == 11);
  CHECK(c.federation.rounds == 2);
  CHECK(c.federation.codec.quant_bits == 4);
  o = Overrides{};
  o.clients_per_round = 1000;
  CHECK_THROWS_AS(apply_overrides(c, o), ConfigError);
}

TEST_CASE("IDX source reports missing files as configuration errors") {
  ExperimentConfig c = config_from_json(smoke_json());
  c.dataset = mnist_dataset("/nonexistent/fedsim", 0, 0);
  CHECK_THROWS_AS(load_data(c), ConfigError);
}

TEST_CASE("gradient audit catches a corrupted gradient") {
  const ModelSpec spec = MlpSpec{6, 5, 3};
  const GradcheckCase gc = random_gradcheck_case(spec, 7, 2);
  ModelParams grad = backward(spec, gc.params, gc.batch);
  CHECK(check_gradient(spec, gc.params, gc.batch, grad).passed);
  grad.get("W2")[4] += 0.05f;
  const GradcheckReport bad = check_gradient(spec, gc.params, gc.batch, grad);
  CHECK_FALSE(bad.passed);
  CHECK(bad.max_relative_error > 1e-2);
}
