#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "saflbench/config.hpp"
#include "saflbench/data.hpp"
#include "saflbench/metrics.hpp"
#include "saflbench/model.hpp"
#include "saflbench/rng.hpp"

namespace saflbench {

enum class UpdateKind { Gradient, Weights };

UpdateKind update_kind_for(Strategy strategy) noexcept;

// One client upload.
struct Update {
  int client_id = 0;
  UpdateKind kind = UpdateKind::Gradient;
  ParamVector payload;
  std::size_t sample_count = 0;  // |D_i|
  int base_round = 0;            // round of the global model training began from
  double arrival_time = 0.0;
  std::uint64_t upload_bytes = 0;
};

// base * exp(jitter_sigma * z), z ~ N(0, 1). Strictly positive.
double draw_epoch_duration(const LatencyProfile& profile, SeededRng& rng);
void validate_latency(const LatencyProfile& profile);

struct LocalTrainingOptions {
  Strategy strategy = Strategy::FedSgd;
  int local_epochs = 1;
  int batch_size = 0;  // 0 = full shard
  double learning_rate = 0.1;
  std::optional<double> clip_max_norm;
  GradientAccumulation accumulation = GradientAccumulation::Trajectory;
  std::uint64_t metadata_overhead = 0;
};

struct PendingModel {
  std::shared_ptr<const ParamVector> params;
  int round = 0;
};

struct ClientState {
  int client_id = 0;
  ClientShard shard;
  Batch data;  // rows of `shard`, gathered once
  ParamVector params;
  int base_round = 0;
  LocalTrainingOptions options;
  LatencyProfile speed;
  std::optional<PendingModel> pending_model;
};

struct LocalTrainingResult {
  Update update;
  ParamVector final_params;  // w_{i,E}
};

// E epochs of mini-batch SGD from `start`. The FedSGD payload is
// sum_e sum_B (|B| / |D_i|) * grad(w; B), where w is the current trajectory
// point (or `start` under GradientAccumulation::StartPoint). The batch order
// is reshuffled each epoch from `rng`; a full-shard batch draws nothing.
LocalTrainingResult local_train(const ClientState& client,
                                const ParamVector& start, SeededRng& rng);

// w - eta * mean(payloads); the mean is unweighted.
ParamVector aggregate_fedsgd(std::span<const Update> updates,
                             const ParamVector& global, double eta);
// sum_i (|D_i| / D) * w_i.
ParamVector aggregate_fedavg(std::span<const Update> updates);

// t - base_round - 1. Throws ProtocolError when t <= base_round.
int staleness(const Update& update, int t);
std::int64_t accumulated_staleness(std::span<const Update> consumed, int t);

// Uniform k-subset of [0, num_clients), returned in ascending order.
std::vector<int> select_active(int num_clients, int k, SeededRng& rng);

struct ServerState {
  ParamVector global;
  int round = 0;
  std::vector<Update> buffer;  // S, in arrival order
  int k = 1;
  double eta = 1.0;
  Strategy strategy = Strategy::FedSgd;
  Mode mode = Mode::SemiAsynchronous;
};

struct AggregationOutcome {
  int round = 0;
  std::vector<Update> consumed;  // ordered by (arrival_time, client_id)
  std::int64_t tau_total = 0;
};

class Server {
 public:
  Server(ParamVector initial, int k, double eta, Strategy strategy, Mode mode);

  const ServerState& state() const noexcept { return state_; }
  const ParamVector& global() const noexcept { return state_.global; }
  int round() const noexcept { return state_.round; }
  std::size_t buffered() const noexcept { return state_.buffer.size(); }

  // Adds an update to S. Rejects updates of the wrong kind, from a future
  // round, or that would overfill S in synchronous mode.
  void receive(Update update);
  bool ready() const noexcept;
  // Consumes the K earliest updates (ties by client id), replaces the global
  // model and advances the round. Requires ready().
  AggregationOutcome aggregate();

 private:
  ServerState state_;
};

}  // namespace saflbench
