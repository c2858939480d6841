#include <algorithm>
#include <cmath>
#include <numeric>

#include "saflbench/error.hpp"
#include "saflbench/protocol.hpp"

namespace saflbench {

UpdateKind update_kind_for(Strategy strategy) noexcept {
  return strategy == Strategy::FedSgd ? UpdateKind::Gradient : UpdateKind::Weights;
}

void validate_latency(const LatencyProfile& profile) {
  if (!(profile.base_seconds_per_local_epoch > 0.0)) {
    throw ConfigError("latency.base_seconds_per_epoch", "must be positive");
  }
  if (profile.jitter_sigma < 0.0) {
    throw ConfigError("latency.jitter_sigma", "must be non-negative");
  }
  if (profile.network_delay_seconds < 0.0) {
    throw ConfigError("latency.network_delay_seconds", "must be non-negative");
  }
}

double draw_epoch_duration(const LatencyProfile& profile, SeededRng& rng) {
  if (profile.jitter_sigma == 0.0) {
    return profile.base_seconds_per_local_epoch;
  }
  const double duration =
      profile.base_seconds_per_local_epoch * std::exp(profile.jitter_sigma * rng.normal());
  // exp() of a Box-Muller draw is bounded away from zero, but keep the
  // strict-positivity contract explicit for extreme sigmas.
  return std::max(duration, std::numeric_limits<double>::min());
}

LocalTrainingResult local_train(const ClientState& client,
                                const ParamVector& start, SeededRng& rng) {
  const auto& opt = client.options;
  const std::size_t n = client.data.size();
  if (n == 0) {
    throw ProtocolError("client " + std::to_string(client.client_id) +
                        " has an empty shard");
  }
  if (!(start.spec() == client.params.spec())) {
    throw DimensionError("start model does not match the client architecture");
  }

  const bool full_batch =
      opt.batch_size == 0 || static_cast<std::size_t>(opt.batch_size) >= n;
  const std::size_t batch_size =
      full_batch ? n : static_cast<std::size_t>(opt.batch_size);
  const bool accumulate = opt.strategy == Strategy::FedSgd;
  const double inv_n = 1.0 / static_cast<double>(n);

  ParamVector weights = start;
  ParamVector cumulative(start.spec());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  auto step = [&](const Batch& batch) {
    const ParamVector grad = backward(weights, batch);
    if (accumulate) {
      const double share = static_cast<double>(batch.size()) * inv_n;
      if (opt.accumulation == GradientAccumulation::Trajectory) {
        cumulative.add_scaled(grad, share);
      } else {
        cumulative.add_scaled(backward(start, batch), share);
      }
    }
    weights = sgd_step(weights, grad, opt.learning_rate);
  };

  for (int epoch = 0; epoch < opt.local_epochs; ++epoch) {
    if (full_batch) {
      step(client.data);
      continue;
    }
    rng.shuffle(std::span(order));
    for (std::size_t begin = 0; begin < n; begin += batch_size) {
      const std::size_t end = std::min(n, begin + batch_size);
      Batch batch{Matrix(end - begin, client.data.features.cols), {}};
      batch.labels.reserve(end - begin);
      for (std::size_t r = begin; r < end; ++r) {
        const auto src = client.data.features.row(order[r]);
        std::copy(src.begin(), src.end(), batch.features.row(r - begin).begin());
        batch.labels.push_back(client.data.labels[order[r]]);
      }
      step(batch);
    }
  }

  const UpdateKind kind = update_kind_for(opt.strategy);
  ParamVector payload = accumulate ? std::move(cumulative) : weights;
  if (accumulate && opt.clip_max_norm) {
    payload = clip_gradient(payload, *opt.clip_max_norm);
  }
  const auto bytes = transmission_bytes(
      {payload.size(),
       kind == UpdateKind::Gradient ? PayloadKind::GradientUpload
                                    : PayloadKind::WeightsUpload,
       opt.metadata_overhead});
  Update update{client.client_id, kind,  std::move(payload), n,
                client.base_round, 0.0, bytes};
  return {std::move(update), std::move(weights)};
}

ParamVector aggregate_fedsgd(std::span<const Update> updates,
                             const ParamVector& global, double eta) {
  if (updates.empty()) {
    throw ProtocolError("FedSGD aggregation needs at least one update");
  }
  ParamVector mean(global.spec());
  for (const auto& u : updates) {
    if (u.kind != UpdateKind::Gradient) {
      throw ProtocolError("FedSGD aggregation received a weights update from client " +
                          std::to_string(u.client_id));
    }
    mean.add_scaled(u.payload, 1.0);
  }
  mean.scale(1.0 / static_cast<double>(updates.size()));
  return sgd_step(global, mean, eta);
}

ParamVector aggregate_fedavg(std::span<const Update> updates) {
  if (updates.empty()) {
    throw ProtocolError("FedAvg aggregation needs at least one update");
  }
  double total = 0.0;
  for (const auto& u : updates) {
    if (u.kind != UpdateKind::Weights) {
      throw ProtocolError("FedAvg aggregation received a gradient update from client " +
                          std::to_string(u.client_id));
    }
    total += static_cast<double>(u.sample_count);
  }
  if (updates.size() == 1) {
    return updates.front().payload;
  }
  ParamVector out(updates.front().payload.spec());
  for (const auto& u : updates) {
    out.add_scaled(u.payload, static_cast<double>(u.sample_count) / total);
  }
  return out;
}

int staleness(const Update& update, int t) {
  if (t < update.base_round + 1) {
    throw ProtocolError("update from client " + std::to_string(update.client_id) +
                        " with base round " + std::to_string(update.base_round) +
                        " consumed at round " + std::to_string(t));
  }
  return t - update.base_round - 1;
}

std::int64_t accumulated_staleness(std::span<const Update> consumed, int t) {
  std::int64_t total = 0;
  for (const auto& u : consumed) {
    total += staleness(u, t);
  }
  return total;
}

std::vector<int> select_active(int num_clients, int k, SeededRng& rng) {
  if (k < 1 || k > num_clients) {
    throw ConfigError("run.k", "active-set size " + std::to_string(k) +
                                   " outside [1, " + std::to_string(num_clients) + "]");
  }
  std::vector<int> ids(static_cast<std::size_t>(num_clients));
  std::iota(ids.begin(), ids.end(), 0);
  // Partial Fisher-Yates: the first k slots become a uniform k-subset.
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(ids.size() - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(static_cast<std::size_t>(k));
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace saflbench
