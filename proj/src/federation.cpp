// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsim/federation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include "fedsim/error.hpp"

namespace fedsim {
namespace {

struct ClientResult {
  ClientUpdate update;
  std::uint64_t upload_bits = 0;
};

ClientResult train_and_upload(const ModelSpec& spec, const ModelParams& broadcast, const Dataset& dataset,
                              const ClientPartition& partition, const FedConfig& config, std::size_t round,
                              std::size_t client_id) {
  ClientResult r;
  r.update = client_update(spec, broadcast, dataset, partition.clients[client_id], config, round, client_id);
  Transmission upload = transmit(r.update.params, config.codec.for_direction(Direction::kAggregate));
  r.update.params = std::move(upload.received);
  r.upload_bits = upload.bits;
  return r;
}

}  // namespace

void validate(const FedConfig& config) {
  require(config.rounds >= 1, "rounds must be >= 1");
  if (config.clients_per_round) require(*config.clients_per_round >= 1, "clients_per_round must be >= 1");
  require(config.client_fraction > 0.0 && config.client_fraction <= 1.0, "client_fraction must be in (0, 1]");
  require(config.batch_size >= 1, "batch_size must be >= 1");
  require(config.local_epochs >= 1, "local_epochs must be >= 1");
  require(std::isfinite(config.client_lr) && config.client_lr >= 0.0f, "client_lr must be finite and >= 0");
  require(std::isfinite(config.server_lr) && config.server_lr > 0.0f, "server_lr must be finite and > 0");
  require(config.parallel_clients >= 1, "parallel_clients must be >= 1");
  validate(config.codec);
}

std::size_t resolve_clients_per_round(const FedConfig& config, std::size_t num_clients) {
  const std::size_t m =
      config.clients_per_round
          ? *config.clients_per_round
          : std::max<std::size_t>(
                static_cast<std::size_t>(std::floor(config.client_fraction * static_cast<double>(num_clients))), 1);
  require(m <= num_clients, "clients_per_round (" + std::to_string(m) + ") exceeds the number of clients (" +
                                std::to_string(num_clients) + ")");
  return m;
}

ServerState initialize(const ModelSpec& spec, const FedConfig& config) {
  validate(spec);
  return {0, init_params(spec, RngStream(config.seed).child("init"))};
}

std::vector<std::size_t> sample_clients(std::size_t num_clients, std::size_t m, std::size_t round,
                                        std::uint64_t seed) {
  return rng_sample_without_replacement(RngStream(seed).child("sample").child(round), num_clients, m);
}

Transmission transmit(const ModelParams& params, const CodecPolicy& policy) {
  const EncodedModel encoded = encode_model(params, policy);
  return {decode_model(encoded), encoded.total_bits};
}

ClientUpdate client_update(const ModelSpec& spec, const ModelParams& broadcast_params, const Dataset& dataset,
                           std::span<const std::size_t> client_indices, const FedConfig& config,
                           std::size_t round, std::size_t client_id) {
  require(!client_indices.empty(), "client_update: client " + std::to_string(client_id) + " has no data");
  ClientUpdate out;
  out.client_id = client_id;
  out.n_k = client_indices.size();
  out.params = broadcast_params;

  double loss_sum = 0.0;
  double accuracy_sum = 0.0;
  for (std::size_t epoch = 0; epoch < config.local_epochs; ++epoch) {
    const RngStream epoch_stream(config.seed, {client_id, round, epoch});
    const bool last_epoch = epoch + 1 == config.local_epochs;
    for (const auto& idx : batch_indices(client_indices, config.batch_size, epoch_stream)) {
      const LossAndGradient step = loss_and_gradient(spec, out.params, gather_batch(dataset, idx));
      if (last_epoch) {
        loss_sum += step.metrics.loss * static_cast<double>(idx.size());
        accuracy_sum += step.metrics.accuracy * static_cast<double>(idx.size());
      }
      out.params = sgd_step(out.params, step.gradient, config.client_lr);
    }
  }
  out.train_loss = loss_sum / static_cast<double>(out.n_k);
  out.train_accuracy = accuracy_sum / static_cast<double>(out.n_k);
  return out;
}

ModelParams aggregate(std::span<const ClientUpdate> updates) {
  require(!updates.empty(), "aggregate: no client updates");
  std::vector<const ClientUpdate*> ordered;
  for (const auto& u : updates) ordered.push_back(&u);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const ClientUpdate* a, const ClientUpdate* b) { return a->client_id < b->client_id; });

  double total = 0.0;
  for (const auto* u : ordered) {
    require(u->n_k >= 1, "aggregate: client " + std::to_string(u->client_id) + " reports n_k = 0");
    require(u->params.same_layout(ordered.front()->params), "aggregate: client params have mismatched shapes");
    total += static_cast<double>(u->n_k);
  }

  ModelParams out = ordered.front()->params;
  for (std::size_t v = 0; v < out.size(); ++v) {
    std::vector<double> acc(out[v].tensor.size(), 0.0);
    for (const auto* u : ordered) {
      const double weight = static_cast<double>(u->n_k) / total;
      const auto x = u->params[v].tensor.data();
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += weight * static_cast<double>(x[i]);
    }
    auto dst = out[v].tensor.data();
    std::copy(acc.begin(), acc.end(), dst.begin());
  }
  return out;
}

ModelParams apply_server_update(const ModelParams& current, const ModelParams& mean, float server_lr) {
  require(current.same_layout(mean), "server update: layout mismatch");
  if (server_lr == 1.0f) return mean;
  ModelParams out = current;
  for (std::size_t v = 0; v < out.size(); ++v) {
    auto w = out[v].tensor.data();
    const auto target = mean[v].tensor.data();
    for (std::size_t i = 0; i < w.size(); ++i)
      w[i] = static_cast<float>(w[i] + static_cast<double>(server_lr) * (static_cast<double>(target[i]) - w[i]));
  }
  return out;
}

RoundResult next(const ServerState& state, const ModelSpec& spec, const Dataset& dataset,
                 const ClientPartition& partition, const FedConfig& config) {
  validate(config);
  require(state.params.matches(spec), "server params do not match " + describe(spec));
  const std::size_t round = state.round + 1;

  // 1. client selection
  const std::size_t m = resolve_clients_per_round(config, partition.num_clients());
  const std::vector<std::size_t> selected = sample_clients(partition.num_clients(), m, round, config.seed);

  // 2. broadcast: one encoding, charged once per selected client
  const Transmission broadcast = transmit(state.params, config.codec.for_direction(Direction::kBroadcast));

  // 3. client computation (+ encoded upload)
  std::vector<ClientResult> results(selected.size());
  auto work = [&](std::size_t i) {
    results[i] = train_and_upload(spec, broadcast.received, dataset, partition, config, round, selected[i]);
  };
  const std::size_t workers = std::min(config.parallel_clients, selected.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < selected.size(); ++i) work(i);
  } else {
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w) {
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < selected.size(); i += workers) work(i);
      }));
    }
    for (auto& j : jobs) j.get();
  }

  // 4. aggregation
  std::vector<ClientUpdate> updates;
  updates.reserve(results.size());
  RoundMetrics metrics;
  metrics.round = round;
  metrics.broadcast_bits_round = broadcast.bits * m;
  double n_total = 0.0;
  for (auto& r : results) {
    metrics.aggregate_bits_round += r.upload_bits;
    const auto n = static_cast<double>(r.update.n_k);
    metrics.train_loss += n * r.update.train_loss;
    metrics.train_accuracy += n * r.update.train_accuracy;
    n_total += n;
    updates.push_back(std::move(r.update));
  }
  metrics.train_loss /= n_total;
  metrics.train_accuracy /= n_total;
  metrics.cumulative_broadcast_bits = metrics.broadcast_bits_round;
  metrics.cumulative_aggregate_bits = metrics.aggregate_bits_round;
  const ModelParams mean = aggregate(updates);

  // 5. model update
  return {ServerState{round, apply_server_update(state.params, mean, config.server_lr)}, metrics};
}

LossAccuracy federated_evaluation(const ModelSpec& spec, const ModelParams& params, const Dataset& dataset,
                                  const ClientPartition& partition) {
  require(partition.num_clients() >= 1, "federated_evaluation: empty partition");
  double loss = 0.0, accuracy = 0.0, total = 0.0;
  constexpr std::size_t kChunk = 1024;
  for (const auto& client : partition.clients) {
    require(!client.empty(), "federated_evaluation: empty client");
    LossSums sums;
    for (std::size_t start = 0; start < client.size(); start += kChunk) {
      const std::size_t stop = std::min(client.size(), start + kChunk);
      const LossSums part = forward_sums(
          spec, params, gather_batch(dataset, std::span<const std::size_t>(client).subspan(start, stop - start)));
      sums.loss_sum += part.loss_sum;
      sums.correct += part.correct;
      sums.count += part.count;
    }
    const auto n = static_cast<double>(sums.count);
    loss += n * (sums.loss_sum / n);
    accuracy += n * (static_cast<double>(sums.correct) / n);
    total += n;
  }
  return {loss / total, accuracy / total};
}

LossAccuracy centralized_evaluation(const ModelSpec& spec, const ModelParams& params, const Dataset& test_data) {
  return evaluate(spec, params, test_data);
}

}  // namespace fedsim
