// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "fedsim/codec.hpp"
#include "fedsim/data.hpp"
#include "fedsim/federation.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/model.hpp"

namespace fedsim {

/// Invalid experiment configuration (unknown key, bad value, missing file).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DataSource { kSynthetic, kIdx };
enum class PartitionScheme { kIid, kLabelSkew, kQuantitySkew };

struct DatasetConfig {
  DataSource source = DataSource::kSynthetic;
  // synthetic
  std::size_t n_per_class = 200;
  std::size_t test_n_per_class = 100;
  std::size_t num_classes = 10;
  std::size_t input_dim = 784;
  SynthOptions synth;
  /// Seed for data generation; the run seed when unset.
  std::optional<std::uint64_t> seed;
  // idx
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
  /// Truncate the loaded IDX sets (0 keeps everything).
  std::size_t max_train_examples = 0;
  std::size_t max_test_examples = 0;
};

struct PartitionConfig {
  PartitionScheme scheme = PartitionScheme::kIid;
  std::size_t num_clients = 10;
  double ratio = 1.0;  // quantity skew only
};

struct ExperimentConfig {
  std::string name = "run";
  DatasetConfig dataset;
  ModelSpec model = MlpSpec{784, 10, 10};
  PartitionConfig partition;
  FedConfig federation;
  std::filesystem::path output_dir = "fedsim_out";
  /// Evaluate every `eval_every` rounds (0: final round only). The final round is always evaluated.
  std::size_t eval_every = 1;
};

/// Strict parse: unknown keys and out-of-range values raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);
void validate(const ExperimentConfig& config);

std::string to_string(PartitionScheme scheme);

/// Train and test sets the config describes. Relative IDX paths resolve
/// against $FEDSIM_DATA_DIR when set.
struct DataSplit {
  Dataset train;
  Dataset test;
};
DataSplit load_data(const ExperimentConfig& config);

ClientPartition make_partition(const ExperimentConfig& config, const Dataset& train);

struct RunSummary {
  nlohmann::ordered_json config;
  double final_accuracy = 0.0;
  double final_loss = 0.0;
  std::uint64_t total_broadcast_bits = 0;
  std::uint64_t total_aggregate_bits = 0;
  double wall_time_seconds = 0.0;
};

struct RunResult {
  RunSummary summary;
  RunLog log;
  LabelHistogram histogram;
  ModelParams final_params;
};

/// initialize + rounds × next, evaluating on the test set per cadence. When
/// `write_files` is set, writes metrics.csv, metrics.jsonl, summary.json and
/// partition.jsonl into config.output_dir. summary.json omits wall time so
/// reruns are byte-identical.
RunResult run_experiment(const ExperimentConfig& config, bool write_files = true);

nlohmann::ordered_json summary_to_json(const RunSummary& summary);

/// Command-line overrides shared by the experiment subcommands.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::size_t> rounds;
  std::optional<std::size_t> clients_per_round;
  std::optional<int> quant_bits;
  bool no_compression = false;
  std::optional<std::string> data_dir;  // switches the dataset to IDX files in this directory
};

void apply_overrides(ExperimentConfig& config, const Overrides& overrides);

/// Config for IDX files with the standard MNIST names inside `dir`.
DatasetConfig mnist_dataset(const std::string& dir, std::size_t max_train, std::size_t max_test);

/// Desk-scale compression recipe: Mlp{784,200,10}, K=100 IID clients of ~200
/// examples, m=10, E=1, B=20, T=50, client lr 0.05. The original study ran 250
/// rounds over 3383 writer-defined clients.
ExperimentConfig exp1_base_config();

/// Desk-scale heterogeneity recipe: Mlp{784,10,10}, K=m=10 clients of 200
/// examples, B=20, E=5, T=20, client lr 0.1, identity codecs.
ExperimentConfig exp2_base_config();

struct PairedRuns {
  RunResult a;
  RunResult b;
  RunComparison comparison;
  nlohmann::ordered_json report;
};

/// Run A identity codecs, run B 8-bit uniform quantization (threshold 10000)
/// in both directions. Outputs go to <out>/identity and <out>/uniform_quant,
/// plus <out>/comparison.json.
PairedRuns exp1_compression(const Overrides& overrides, bool write_files = true);
PairedRuns exp1_compression(ExperimentConfig base, bool write_files = true);

/// Run A IID partition, run B single-label partition. Outputs go to <out>/iid
/// and <out>/label_skew, plus <out>/comparison.json.
PairedRuns exp2_noniid(const Overrides& overrides, bool write_files = true);
PairedRuns exp2_noniid(ExperimentConfig base, bool write_files = true);

}  // namespace fedsim
