// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsim/experiment.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <set>

#include "fedsim/error.hpp"

namespace fedsim {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

/// Reads fields from one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <typename T>
  bool read(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return false;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
    return true;
  }

  template <typename T>
  bool read(const char* key, std::optional<T>& out) {
    T value{};
    if (!read(key, value)) return false;
    out = value;
    return true;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

DataSource parse_source(const std::string& s) {
  if (s == "synthetic") return DataSource::kSynthetic;
  if (s == "idx") return DataSource::kIdx;
  throw ConfigError("dataset.source: expected 'synthetic' or 'idx', got '" + s + "'");
}

PartitionScheme parse_scheme(const std::string& s) {
  if (s == "iid") return PartitionScheme::kIid;
  if (s == "label_skew") return PartitionScheme::kLabelSkew;
  if (s == "quantity_skew") return PartitionScheme::kQuantitySkew;
  throw ConfigError("partition.type: expected iid, label_skew or quantity_skew, got '" + s + "'");
}

DatasetConfig parse_dataset(const json& j) {
  DatasetConfig d;
  ObjectReader r(j, "dataset");
  std::string source = "synthetic";
  r.read("source", source);
  d.source = parse_source(source);
  r.read("n_per_class", d.n_per_class);
  r.read("test_n_per_class", d.test_n_per_class);
  r.read("num_classes", d.num_classes);
  r.read("input_dim", d.input_dim);
  r.read("noise", d.synth.noise);
  r.read("separation", d.synth.separation);
  r.read("active_fraction", d.synth.active_fraction);
  r.read("seed", d.seed);
  r.read("train_images", d.train_images);
  r.read("train_labels", d.train_labels);
  r.read("test_images", d.test_images);
  r.read("test_labels", d.test_labels);
  r.read("max_train_examples", d.max_train_examples);
  r.read("max_test_examples", d.max_test_examples);
  r.finish();
  return d;
}

ModelSpec parse_model(const json& j) {
  ObjectReader r(j, "model");
  std::string type = "mlp";
  std::size_t in = 784, hidden = 10, classes = 10;
  r.read("type", type);
  r.read("input_dim", in);
  r.read("hidden_units", hidden);
  r.read("num_classes", classes);
  r.finish();
  if (type == "mlp") return MlpSpec{in, hidden, classes};
  if (type == "softmax_regression") {
    if (j.contains("hidden_units")) throw ConfigError("model.hidden_units: not used by softmax_regression");
    return SoftmaxRegressionSpec{in, classes};
  }
  throw ConfigError("model.type: expected 'mlp' or 'softmax_regression', got '" + type + "'");
}

PartitionConfig parse_partition(const json& j) {
  PartitionConfig p;
  ObjectReader r(j, "partition");
  std::string type = "iid";
  r.read("type", type);
  p.scheme = parse_scheme(type);
  r.read("num_clients", p.num_clients);
  r.read("ratio", p.ratio);
  r.finish();
  return p;
}

FedConfig parse_federation(const json& j, FedConfig f) {
  ObjectReader r(j, "federation");
  r.read("rounds", f.rounds);
  r.read("clients_per_round", f.clients_per_round);
  r.read("client_fraction", f.client_fraction);
  r.read("batch_size", f.batch_size);
  r.read("local_epochs", f.local_epochs);
  r.read("client_lr", f.client_lr);
  r.read("server_lr", f.server_lr);
  r.read("parallel_clients", f.parallel_clients);
  r.finish();
  return f;
}

CodecPolicy parse_codec(const json& j) {
  CodecPolicy c;
  ObjectReader r(j, "codec");
  std::string scheme = "identity";
  r.read("scheme", scheme);
  try {
    c.scheme = parse_codec_scheme(scheme);
  } catch (const ContractError& e) {
    throw ConfigError(std::string("codec.scheme: ") + e.what());
  }
  r.read("quant_bits", c.quant_bits);
  r.read("min_elements_threshold", c.min_elements_threshold);
  r.read("apply_to_broadcast", c.apply_to_broadcast);
  r.read("apply_to_aggregate", c.apply_to_aggregate);
  r.finish();
  return c;
}

std::filesystem::path resolve_data_path(const std::string& path, const char* default_name) {
  const std::string name = path.empty() ? default_name : path;
  std::filesystem::path p(name);
  if (p.is_relative()) {
    if (const char* dir = std::getenv("FEDSIM_DATA_DIR"); dir && *dir) p = std::filesystem::path(dir) / p;
  }
  if (!std::filesystem::exists(p)) throw ConfigError("dataset file not found: " + p.string());
  return p;
}

void write_json(const std::filesystem::path& path, const ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

bool eval_due(const ExperimentConfig& config, std::size_t round) {
  if (round == config.federation.rounds) return true;
  return config.eval_every > 0 && round % config.eval_every == 0;
}

ordered_json model_to_json(const ModelSpec& spec) {
  ordered_json j;
  if (const auto* mlp = std::get_if<MlpSpec>(&spec)) {
    j["type"] = "mlp";
    j["input_dim"] = mlp->input_dim;
    j["hidden_units"] = mlp->hidden_units;
    j["num_classes"] = mlp->num_classes;
  } else {
    const auto& s = std::get<SoftmaxRegressionSpec>(spec);
    j["type"] = "softmax_regression";
    j["input_dim"] = s.input_dim;
    j["num_classes"] = s.num_classes;
  }
  return j;
}

void make_dirs(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
}

PairedRuns run_pair(const std::string& recipe, ExperimentConfig a, ExperimentConfig b, bool write_files) {
  PairedRuns out;
  out.a = run_experiment(a, write_files);
  out.b = run_experiment(b, write_files);
  out.comparison = compare_runs(out.a.log, out.b.log);
  out.report["recipe"] = recipe;
  out.report["runs"][a.name] = summary_to_json(out.a.summary);
  out.report["runs"][b.name] = summary_to_json(out.b.summary);
  auto& cmp = out.report["comparison"];
  cmp["a"] = a.name;
  cmp["b"] = b.name;
  cmp["broadcast_bit_ratio_a_over_b"] = out.comparison.broadcast_bit_ratio;
  cmp["aggregate_bit_ratio_a_over_b"] = out.comparison.aggregate_bit_ratio;
  cmp["total_bit_ratio_a_over_b"] = out.comparison.total_bit_ratio;
  cmp["final_accuracy_a"] = out.a.summary.final_accuracy;
  cmp["final_accuracy_b"] = out.b.summary.final_accuracy;
  cmp["final_accuracy_delta_a_minus_b"] = out.comparison.final_accuracy_delta;
  return out;
}

std::filesystem::path parent_output(const ExperimentConfig& base) { return base.output_dir; }

}  // namespace

std::string to_string(PartitionScheme scheme) {
  switch (scheme) {
    case PartitionScheme::kIid: return "iid";
    case PartitionScheme::kLabelSkew: return "label_skew";
    case PartitionScheme::kQuantitySkew: return "quantity_skew";
  }
  return "?";
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  ObjectReader r(j, "config");
  r.read("name", c.name);
  if (const auto* d = r.child("dataset")) c.dataset = parse_dataset(*d);
  if (const auto* m = r.child("model")) c.model = parse_model(*m);
  if (const auto* p = r.child("partition")) c.partition = parse_partition(*p);
  if (const auto* f = r.child("federation")) c.federation = parse_federation(*f, c.federation);
  if (const auto* k = r.child("codec")) c.federation.codec = parse_codec(*k);
  std::uint64_t seed = 0;
  if (r.read("seed", seed)) c.federation.seed = seed;
  std::string out;
  if (r.read("output_dir", out)) c.output_dir = out;
  r.read("eval_every", c.eval_every);
  r.finish();
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

ordered_json config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["name"] = c.name;
  auto& d = j["dataset"];
  if (c.dataset.source == DataSource::kSynthetic) {
    d["source"] = "synthetic";
    d["n_per_class"] = c.dataset.n_per_class;
    d["test_n_per_class"] = c.dataset.test_n_per_class;
    d["num_classes"] = c.dataset.num_classes;
    d["input_dim"] = c.dataset.input_dim;
    d["noise"] = c.dataset.synth.noise;
    d["separation"] = c.dataset.synth.separation;
    d["active_fraction"] = c.dataset.synth.active_fraction;
    if (c.dataset.seed) d["seed"] = *c.dataset.seed;
  } else {
    d["source"] = "idx";
    d["train_images"] = c.dataset.train_images;
    d["train_labels"] = c.dataset.train_labels;
    d["test_images"] = c.dataset.test_images;
    d["test_labels"] = c.dataset.test_labels;
    d["max_train_examples"] = c.dataset.max_train_examples;
    d["max_test_examples"] = c.dataset.max_test_examples;
  }
  j["model"] = model_to_json(c.model);
  j["partition"]["type"] = to_string(c.partition.scheme);
  j["partition"]["num_clients"] = c.partition.num_clients;
  if (c.partition.scheme == PartitionScheme::kQuantitySkew) j["partition"]["ratio"] = c.partition.ratio;
  auto& f = j["federation"];
  f["rounds"] = c.federation.rounds;
  if (c.federation.clients_per_round)
    f["clients_per_round"] = *c.federation.clients_per_round;
  else
    f["client_fraction"] = c.federation.client_fraction;
  f["batch_size"] = c.federation.batch_size;
  f["local_epochs"] = c.federation.local_epochs;
  f["client_lr"] = c.federation.client_lr;
  f["server_lr"] = c.federation.server_lr;
  f["parallel_clients"] = c.federation.parallel_clients;
  auto& k = j["codec"];
  k["scheme"] = to_string(c.federation.codec.scheme);
  k["quant_bits"] = c.federation.codec.quant_bits;
  k["min_elements_threshold"] = c.federation.codec.min_elements_threshold;
  k["apply_to_broadcast"] = c.federation.codec.apply_to_broadcast;
  k["apply_to_aggregate"] = c.federation.codec.apply_to_aggregate;
  j["seed"] = c.federation.seed;
  j["output_dir"] = c.output_dir.generic_string();
  j["eval_every"] = c.eval_every;
  return j;
}

void validate(const ExperimentConfig& c) {
  try {
    validate(c.model);
    validate(c.federation);
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  if (c.partition.num_clients < 1) throw ConfigError("partition.num_clients must be >= 1");
  if (c.partition.scheme == PartitionScheme::kQuantitySkew && !(c.partition.ratio >= 1.0))
    throw ConfigError("partition.ratio must be >= 1");
  if (c.federation.clients_per_round && *c.federation.clients_per_round > c.partition.num_clients)
    throw ConfigError("federation.clients_per_round exceeds partition.num_clients");
  if (c.dataset.source == DataSource::kSynthetic) {
    if (c.dataset.n_per_class < 1 || c.dataset.test_n_per_class < 1)
      throw ConfigError("dataset.n_per_class and dataset.test_n_per_class must be >= 1");
    if (c.dataset.num_classes != num_classes(c.model))
      throw ConfigError("dataset.num_classes differs from model.num_classes");
    if (c.dataset.input_dim != input_dim(c.model))
      throw ConfigError("dataset.input_dim differs from model.input_dim");
  }
}

DataSplit load_data(const ExperimentConfig& config) {
  const DatasetConfig& d = config.dataset;
  DataSplit split;
  if (d.source == DataSource::kSynthetic) {
    const RngStream stream = RngStream(d.seed.value_or(config.federation.seed)).child("data");
    const Dataset all = synth_dataset(stream, d.n_per_class + d.test_n_per_class, d.num_classes, d.input_dim, d.synth);
    const std::size_t n_train = d.n_per_class * d.num_classes;
    split.train = take_prefix(all, n_train);
    std::vector<std::size_t> rest(all.size() - n_train);
    for (std::size_t i = 0; i < rest.size(); ++i) rest[i] = n_train + i;
    const Batch test = gather_batch(all, rest);
    split.test = Dataset{test.inputs, test.labels, d.num_classes};
  } else {
    try {
      split.train = load_idx(resolve_data_path(d.train_images, "train-images-idx3-ubyte"),
                             resolve_data_path(d.train_labels, "train-labels-idx1-ubyte"));
      split.test = load_idx(resolve_data_path(d.test_images, "t10k-images-idx3-ubyte"),
                            resolve_data_path(d.test_labels, "t10k-labels-idx1-ubyte"));
    } catch (const IdxError& e) {
      throw ConfigError(e.what());
    }
    if (d.max_train_examples && d.max_train_examples < split.train.size())
      split.train = take_prefix(split.train, d.max_train_examples);
    if (d.max_test_examples && d.max_test_examples < split.test.size())
      split.test = take_prefix(split.test, d.max_test_examples);
    split.train.num_classes = split.test.num_classes = num_classes(config.model);
    try {
      validate(split.train);
      validate(split.test);
    } catch (const ContractError& e) {
      throw ConfigError(std::string("IDX data does not fit the model: ") + e.what());
    }
    if (split.train.input_dim() != input_dim(config.model))
      throw ConfigError("IDX image size " + std::to_string(split.train.input_dim()) +
                        " differs from model.input_dim " + std::to_string(input_dim(config.model)));
  }
  return split;
}

ClientPartition make_partition(const ExperimentConfig& config, const Dataset& train) {
  const RngStream stream = RngStream(config.federation.seed).child("partition");
  const std::size_t k = config.partition.num_clients;
  switch (config.partition.scheme) {
    case PartitionScheme::kIid: return partition_iid(train, k, stream);
    case PartitionScheme::kLabelSkew: return partition_label_skew(train, k, stream);
    case PartitionScheme::kQuantitySkew: return partition_quantity_skew(train, k, config.partition.ratio, stream);
  }
  throw ConfigError("unknown partition scheme");
}

ordered_json summary_to_json(const RunSummary& s) {
  ordered_json j;
  j["config"] = s.config;
  j["final_accuracy"] = s.final_accuracy;
  j["final_loss"] = s.final_loss;
  j["total_broadcast_bits"] = s.total_broadcast_bits;
  j["total_aggregate_bits"] = s.total_aggregate_bits;
  return j;
}

RunResult run_experiment(const ExperimentConfig& config, bool write_files) {
  validate(config);
  const auto started = std::chrono::steady_clock::now();

  const DataSplit data = load_data(config);
  RunResult result;
  ClientPartition partition;
  try {
    partition = make_partition(config, data.train);
  } catch (const ContractError& e) {
    throw ConfigError(std::string("partition: ") + e.what());
  }
  result.histogram = label_histogram(data.train, partition);

  ServerState state = initialize(config.model, config.federation);
  for (std::size_t t = 0; t < config.federation.rounds; ++t) {
    RoundResult round = next(state, config.model, data.train, partition, config.federation);
    state = std::move(round.state);
    if (eval_due(config, round.metrics.round)) {
      const LossAccuracy eval = centralized_evaluation(config.model, state.params, data.test);
      round.metrics.eval_loss = eval.loss;
      round.metrics.eval_accuracy = eval.accuracy;
    }
    result.log.append(round.metrics);
  }

  result.final_params = state.params;
  result.summary.config = config_to_json(config);
  result.summary.final_accuracy = final_accuracy(result.log);
  result.summary.final_loss = result.log.back().eval_loss.value_or(result.log.back().train_loss);
  result.summary.total_broadcast_bits = result.log.cumulative_broadcast_bits();
  result.summary.total_aggregate_bits = result.log.cumulative_aggregate_bits();
  result.summary.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  if (write_files) {
    make_dirs(config.output_dir);
    write_csv(result.log, config.output_dir / "metrics.csv");
    write_jsonl(result.log, config.output_dir / "metrics.jsonl");
    write_json(config.output_dir / "summary.json", summary_to_json(result.summary));
    write_partition_jsonl(config.output_dir / "partition.jsonl", result.histogram);
  }
  return result;
}

DatasetConfig mnist_dataset(const std::string& dir, std::size_t max_train, std::size_t max_test) {
  DatasetConfig d;
  d.source = DataSource::kIdx;
  const std::filesystem::path root(dir);
  d.train_images = (root / "train-images-idx3-ubyte").string();
  d.train_labels = (root / "train-labels-idx1-ubyte").string();
  d.test_images = (root / "t10k-images-idx3-ubyte").string();
  d.test_labels = (root / "t10k-labels-idx1-ubyte").string();
  d.max_train_examples = max_train;
  d.max_test_examples = max_test;
  return d;
}

void apply_overrides(ExperimentConfig& config, const Overrides& o) {
  if (o.seed) config.federation.seed = *o.seed;
  if (o.out_dir) config.output_dir = *o.out_dir;
  if (o.rounds) config.federation.rounds = *o.rounds;
  if (o.clients_per_round) config.federation.clients_per_round = *o.clients_per_round;
  if (o.quant_bits) config.federation.codec.quant_bits = *o.quant_bits;
  if (o.no_compression) config.federation.codec.scheme = CodecScheme::kIdentity;
  if (o.data_dir) {
    const std::size_t max_train =
        config.dataset.source == DataSource::kSynthetic ? config.dataset.n_per_class * config.dataset.num_classes
                                                        : config.dataset.max_train_examples;
    const std::size_t max_test = config.dataset.source == DataSource::kSynthetic
                                     ? config.dataset.test_n_per_class * config.dataset.num_classes
                                     : config.dataset.max_test_examples;
    config.dataset = mnist_dataset(*o.data_dir, max_train, max_test);
  }
  validate(config);
}

ExperimentConfig exp1_base_config() {
  ExperimentConfig c;
  c.name = "exp1";
  c.dataset.n_per_class = 2000;
  c.dataset.test_n_per_class = 100;
  c.model = MlpSpec{784, 200, 10};
  c.partition = {PartitionScheme::kIid, 100, 1.0};
  c.federation.rounds = 50;
  c.federation.clients_per_round = 10;
  c.federation.batch_size = 20;
  c.federation.local_epochs = 1;
  c.federation.client_lr = 0.05f;
  c.federation.server_lr = 1.0f;
  c.federation.seed = 1;
  c.federation.codec = CodecPolicy::uniform_quant(8, 10000);
  c.output_dir = "out/exp1";
  c.eval_every = 1;
  return c;
}

ExperimentConfig exp2_base_config() {
  ExperimentConfig c;
  c.name = "exp2";
  c.dataset.n_per_class = 200;
  c.dataset.test_n_per_class = 100;
  c.model = MlpSpec{784, 10, 10};
  c.partition = {PartitionScheme::kIid, 10, 1.0};
  c.federation.rounds = 20;
  c.federation.clients_per_round = 10;
  c.federation.batch_size = 20;
  c.federation.local_epochs = 5;
  c.federation.client_lr = 0.1f;
  c.federation.server_lr = 1.0f;
  c.federation.seed = 1;
  c.federation.codec = CodecPolicy::identity();
  c.output_dir = "out/exp2";
  c.eval_every = 1;
  return c;
}

PairedRuns exp1_compression(ExperimentConfig base, bool write_files) {
  validate(base);
  ExperimentConfig a = base;
  a.name = "identity";
  a.federation.codec.scheme = CodecScheme::kIdentity;
  a.output_dir = parent_output(base) / "identity";
  ExperimentConfig b = base;
  b.name = "uniform_quant";
  b.federation.codec.apply_to_broadcast = b.federation.codec.apply_to_aggregate = true;
  b.output_dir = parent_output(base) / "uniform_quant";

  PairedRuns out = run_pair("exp1_compression", a, b, write_files);
  const CodecPolicy& quant = b.federation.codec;
  out.report["comparison"]["analytic_compression_ratio"] = compression_ratio(base.model, quant);
  out.report["comparison"]["measured_compression_ratio"] = 1.0 / out.comparison.total_bit_ratio;
  out.report["full_scale_reference"] = {{"rounds", 250},
                                        {"clients_per_round", 10},
                                        {"client_pool", 3383},
                                        {"cumulative_bits_before_gb", 17},
                                        {"cumulative_bits_after_gb", 5},
                                        {"accuracy_before", 0.93},
                                        {"accuracy_after", 0.927}};
  if (write_files) write_json(parent_output(base) / "comparison.json", out.report);
  return out;
}

PairedRuns exp1_compression(const Overrides& overrides, bool write_files) {
  ExperimentConfig base = exp1_base_config();
  Overrides o = overrides;
  const bool keep_identity = o.no_compression;
  o.no_compression = false;
  apply_overrides(base, o);
  if (keep_identity) base.federation.codec.scheme = CodecScheme::kIdentity;
  return exp1_compression(base, write_files);
}

PairedRuns exp2_noniid(ExperimentConfig base, bool write_files) {
  validate(base);
  ExperimentConfig a = base;
  a.name = "iid";
  a.partition.scheme = PartitionScheme::kIid;
  a.output_dir = parent_output(base) / "iid";
  ExperimentConfig b = base;
  b.name = "label_skew";
  b.partition.scheme = PartitionScheme::kLabelSkew;
  b.output_dir = parent_output(base) / "label_skew";

  PairedRuns out = run_pair("exp2_noniid", a, b, write_files);
  ordered_json hist = ordered_json::array();
  for (std::size_t k = 0; k < out.b.histogram.counts.size(); ++k)
    hist.push_back({{"client_id", k}, {"n_k", out.b.histogram.row_sum(k)}, {"label_counts", out.b.histogram.counts[k]}});
  out.report["label_skew_histogram"] = hist;
  out.report["full_scale_reference"] = {{"accuracy_iid", 0.80}, {"accuracy_label_skew", 0.73}};
  if (write_files) write_json(parent_output(base) / "comparison.json", out.report);
  return out;
}

PairedRuns exp2_noniid(const Overrides& overrides, bool write_files) {
  ExperimentConfig base = exp2_base_config();
  apply_overrides(base, overrides);
  return exp2_noniid(base, write_files);
}

}  // namespace fedsim
