// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fedsim/codec.hpp"
#include "fedsim/data.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/model.hpp"

namespace fedsim {

struct FedConfig {
  std::size_t rounds = 1;
  /// Clients per round. When unset, m = max(floor(client_fraction * K), 1).
  std::optional<std::size_t> clients_per_round;
  double client_fraction = 1.0;
  std::size_t batch_size = 20;
  std::size_t local_epochs = 1;
  float client_lr = 0.1f;
  float server_lr = 1.0f;
  std::uint64_t seed = 0;
  CodecPolicy codec;
  /// Worker threads for client updates within a round. Results do not depend on it.
  std::size_t parallel_clients = 1;
};

void validate(const FedConfig& config);
std::size_t resolve_clients_per_round(const FedConfig& config, std::size_t num_clients);

struct ServerState {
  std::size_t round = 0;
  ModelParams params;
};

struct ClientUpdate {
  std::size_t client_id = 0;
  ModelParams params;
  std::size_t n_k = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
};

/// Round 0 with params drawn from stream [seed, "init"].
ServerState initialize(const ModelSpec& spec, const FedConfig& config);

/// m distinct clients from [0, K), stream [seed, "sample", round], sorted ascending.
std::vector<std::size_t> sample_clients(std::size_t num_clients, std::size_t m, std::size_t round,
                                        std::uint64_t seed);

/// What a receiver reconstructs from one encoded transmission, and its cost.
struct Transmission {
  ModelParams received;
  std::uint64_t bits = 0;
};
Transmission transmit(const ModelParams& params, const CodecPolicy& policy);

/// E epochs of minibatch SGD from `broadcast_params`. Epoch e reshuffles with
/// stream [seed, client_id, round, e]. Reported loss/accuracy are the
/// example-weighted means over the final epoch's batches, each measured before
/// its step.
ClientUpdate client_update(const ModelSpec& spec, const ModelParams& broadcast_params, const Dataset& dataset,
                           std::span<const std::size_t> client_indices, const FedConfig& config,
                           std::size_t round, std::size_t client_id);

/// Weighted mean with weights n_k / sum(n_j), summed in double in ascending
/// client_id order.
ModelParams aggregate(std::span<const ClientUpdate> updates);

/// w + server_lr * (mean - w); server_lr == 1 returns `mean` unchanged.
ModelParams apply_server_update(const ModelParams& current, const ModelParams& mean, float server_lr);

struct RoundResult {
  ServerState state;
  RoundMetrics metrics;  // cumulative fields hold this round's bits only
};

/// One round: sample, broadcast (encode once, charge every selected client),
/// local training on the decoded model, encoded upload, weighted aggregation of
/// the decoded uploads, server update. Train metrics are n_k-weighted.
RoundResult next(const ServerState& state, const ModelSpec& spec, const Dataset& dataset,
                 const ClientPartition& partition, const FedConfig& config);

/// n_k-weighted mean of per-client evaluations. Pure.
LossAccuracy federated_evaluation(const ModelSpec& spec, const ModelParams& params, const Dataset& dataset,
                                  const ClientPartition& partition);

/// Plain evaluation of the server model on held-out data.
LossAccuracy centralized_evaluation(const ModelSpec& spec, const ModelParams& params, const Dataset& test_data);

}  // namespace fedsim
