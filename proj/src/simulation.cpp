#include "saflbench/simulation.hpp"

#include <algorithm>
#include <memory>
#include <optional>

#include "parallel.hpp"
#include "saflbench/error.hpp"
#include "saflbench/event_queue.hpp"
#include "saflbench/protocol.hpp"

namespace saflbench {
namespace {

// Sub-stream tags under the run seed.
constexpr std::uint64_t kRunStream = 0x72756eull;  // "run"
constexpr std::uint64_t kSelectionStream = 1;
constexpr std::uint64_t kTrainingStream = 2;
constexpr std::uint64_t kLatencyStream = 3;

struct ClientRng {
  SeededRng training;
  SeededRng latency;
};

struct Federation {
  std::vector<ClientState> clients;
  std::vector<ClientRng> rngs;
  SeededRng selection;
};

Federation make_federation(const RunConfig& config, const Scenario& scenario) {
  const SeededRng root(config.run_seed, kRunStream);
  Federation fed{{}, {}, root.derive(kSelectionStream)};
  const SeededRng training = root.derive(kTrainingStream);
  const SeededRng latency = root.derive(kLatencyStream);
  for (const auto& shard : scenario.shards) {
    const int id = shard.client_id;
    LocalTrainingOptions options{config.strategy,
                                 config.local_epochs,
                                 config.batch_size,
                                 config.client_learning_rate(id),
                                 config.clip_max_norm,
                                 config.accumulation,
                                 config.metadata_overhead};
    fed.clients.push_back(ClientState{id, shard,
                                      scenario.train.gather(shard.indices),
                                      scenario.initial, 0, options,
                                      config.latency(id), std::nullopt});
    validate_latency(fed.clients.back().speed);
    fed.rngs.push_back({training.derive(static_cast<std::uint64_t>(id)),
                        latency.derive(static_cast<std::uint64_t>(id))});
  }
  return fed;
}

double local_round_duration(const ClientState& client, SeededRng& rng) {
  double total = 0.0;
  for (int e = 0; e < client.options.local_epochs; ++e) {
    total += draw_epoch_duration(client.speed, rng);
  }
  return total;
}

RoundRecord make_record(const AggregationOutcome& outcome, double sim_time,
                        const Evaluation& eval, std::uint64_t bytes_down) {
  RoundRecord record;
  record.round = outcome.round;
  record.sim_time = sim_time;
  record.accuracy = eval.accuracy;
  record.loss = eval.loss;
  record.tau_total = outcome.tau_total;
  for (const auto& u : outcome.consumed) {
    record.participants.push_back(u.client_id);
    record.bytes_up += u.upload_bytes;
  }
  record.bytes_down = bytes_down;
  return record;
}

std::uint64_t broadcast_bytes(std::size_t parameter_count) {
  return transmission_bytes({parameter_count, PayloadKind::Broadcast, 0});
}

void check_scenario(const RunConfig& config, const Scenario& scenario) {
  if (scenario.shards.size() != static_cast<std::size_t>(config.num_clients())) {
    throw ConfigError("partition.num_clients",
                      "scenario has " + std::to_string(scenario.shards.size()) +
                          " shards");
  }
  if (config.k > config.num_clients()) {
    throw ConfigError("run.k", "K exceeds the number of clients");
  }
}

}  // namespace

Scenario build_scenario(const RunConfig& config) {
  config.validate();
  Dataset full = config.data.source == DataSource::Synthetic
                     ? generate_synthetic(config.data.classes, config.data.dim,
                                          config.data.per_class, config.data.spread,
                                          config.data_seed)
                     : load_dataset(config.data.path);
  auto split = train_test_split(full, config.data.test_fraction,
                                mix64(config.data_seed ^ 0x73706c6974ull));
  auto shards = partition(split.train, config.partition,
                          mix64(config.data_seed ^ 0x7061727469ull));
  const ModelSpec spec = config.model_spec(static_cast<int>(full.dim()),
                                           full.num_classes);
  ParamVector initial = init_model(spec, config.run_seed);
  Batch test_batch = split.test.to_batch();
  return Scenario{std::move(split.train), std::move(split.test),
                  std::move(split.train_rows), std::move(test_batch), std::move(shards), spec,
                  std::move(initial)};
}

MetricsLog run_sfl(const RunConfig& config, const Scenario& scenario,
                   const RunOptions& options) {
  check_scenario(config, scenario);
  Federation fed = make_federation(config, scenario);
  Server server(scenario.initial, config.k, config.server_lr, config.strategy,
                Mode::Synchronous);
  const int n = config.num_clients();
  const std::uint64_t down = static_cast<std::uint64_t>(n) *
                             broadcast_bytes(scenario.initial.size());

  MetricsLog log;
  log.config_digest = config_digest(config);
  log.total_params = scenario.initial.size();
  double sim_time = 0.0;

  for (int t = 1; t <= config.rounds; ++t) {
    const auto active = select_active(n, config.k, fed.selection);
    const int base_round = server.round();
    for (auto& client : fed.clients) {
      client.params = server.global();
      client.base_round = base_round;
    }

    std::vector<std::optional<LocalTrainingResult>> results(active.size());
    detail::parallel_for(active.size(), options.threads, [&](std::size_t j) {
      const auto id = static_cast<std::size_t>(active[j]);
      results[j] = local_train(fed.clients[id], server.global(),
                               fed.rngs[id].training);
    });

    double round_duration = 0.0;
    for (std::size_t j = 0; j < active.size(); ++j) {
      const auto id = static_cast<std::size_t>(active[j]);
      const ClientState& client = fed.clients[id];
      const double busy = local_round_duration(client, fed.rngs[id].latency) +
                          client.speed.network_delay_seconds;
      round_duration = std::max(round_duration, busy);
      Update update = std::move(results[j]->update);
      update.arrival_time = sim_time + busy;
      server.receive(std::move(update));
    }

    const AggregationOutcome outcome = server.aggregate();
    sim_time += round_duration;
    const Evaluation eval = evaluate_global(server.global(), scenario.test_batch);
    log.records.push_back(make_record(outcome, sim_time, eval, down));
    if (options.on_aggregate) {
      options.on_aggregate(outcome.round, server.global());
    }
  }
  return log;
}

MetricsLog run_safl(const RunConfig& config, const Scenario& scenario,
                    const RunOptions& options) {
  check_scenario(config, scenario);
  Federation fed = make_federation(config, scenario);
  Server server(scenario.initial, config.k, config.server_lr, config.strategy,
                Mode::SemiAsynchronous);
  const int n = config.num_clients();
  const std::uint64_t down = static_cast<std::uint64_t>(n) *
                             broadcast_bytes(scenario.initial.size());

  MetricsLog log;
  log.config_digest = config_digest(config);
  log.total_params = scenario.initial.size();

  std::vector<std::shared_ptr<const ParamVector>> published{
      std::make_shared<const ParamVector>(scenario.initial)};
  std::vector<std::optional<Update>> in_flight;
  EventQueue queue;
  bool check_pending = false;
  double last_time = 0.0;

  for (int i = 0; i < n; ++i) {
    queue.push(0.0, EventKind::LocalRoundStart, i);
  }

  while (server.round() < config.rounds) {
    if (queue.empty()) {
      throw ProtocolError("event queue drained before the final round");
    }
    const Event event = queue.pop();
    if (event.time < last_time) {
      throw ProtocolError("simulated clock moved backwards");
    }
    last_time = event.time;
    const double now = event.time;

    switch (event.kind) {
      case EventKind::LocalRoundStart: {
        const auto id = static_cast<std::size_t>(event.client_id);
        ClientState& client = fed.clients[id];
        if (client.pending_model && client.pending_model->round > client.base_round) {
          client.params = *client.pending_model->params;
          client.base_round = client.pending_model->round;
        }
        client.pending_model.reset();

        LocalTrainingResult result =
            local_train(client, client.params, fed.rngs[id].training);
        client.params = std::move(result.final_params);
        const double finish = now + local_round_duration(client, fed.rngs[id].latency);
        const double arrival = finish + client.speed.network_delay_seconds;
        result.update.arrival_time = arrival;
        in_flight.push_back(std::move(result.update));
        queue.push(arrival, EventKind::UploadArrives, client.client_id,
                   in_flight.size() - 1);
        queue.push(finish, EventKind::LocalRoundStart, client.client_id);
        break;
      }
      case EventKind::UploadArrives: {
        server.receive(std::move(*in_flight[event.slot]));
        in_flight[event.slot].reset();
        if (!check_pending) {
          queue.push(now, EventKind::AggregationCheck, -1);
          check_pending = true;
        }
        break;
      }
      case EventKind::AggregationCheck: {
        check_pending = false;
        while (server.ready() && server.round() < config.rounds) {
          const AggregationOutcome outcome = server.aggregate();
          const Evaluation eval =
              evaluate_global(server.global(), scenario.test_batch);
          log.records.push_back(make_record(outcome, now, eval, down));
          if (options.on_aggregate) {
            options.on_aggregate(outcome.round, server.global());
          }
          published.push_back(std::make_shared<const ParamVector>(server.global()));
          for (const auto& client : fed.clients) {
            queue.push(now + client.speed.network_delay_seconds,
                       EventKind::BroadcastArrives, client.client_id,
                       static_cast<std::size_t>(outcome.round));
          }
        }
        break;
      }
      case EventKind::BroadcastArrives: {
        ClientState& client = fed.clients[static_cast<std::size_t>(event.client_id)];
        const int round = static_cast<int>(event.slot);
        if (!client.pending_model || client.pending_model->round < round) {
          client.pending_model = PendingModel{published[event.slot], round};
        }
        break;
      }
    }
  }
  return log;
}

MetricsLog run_simulation(const RunConfig& config, const RunOptions& options) {
  const Scenario scenario = build_scenario(config);
  return config.mode == Mode::Synchronous ? run_sfl(config, scenario, options)
                                          : run_safl(config, scenario, options);
}

MemoryFootprint footprint(const RunConfig& config, const Scenario& scenario) {
  const auto rows = scenario.train.size() + scenario.test.size();
  const auto row_bytes = scenario.train.dim() * 8 + 4;
  return {static_cast<std::size_t>(config.num_clients()), scenario.initial.size(),
          static_cast<std::size_t>(config.k),
          static_cast<std::uint64_t>(rows * row_bytes)};
}

ByteTotals expected_bytes(const RunConfig& config, std::size_t parameter_count) {
  const auto kind = config.strategy == Strategy::FedSgd ? PayloadKind::GradientUpload
                                                        : PayloadKind::WeightsUpload;
  const std::uint64_t up_each =
      transmission_bytes({parameter_count, kind, config.metadata_overhead});
  const auto rounds = static_cast<std::uint64_t>(config.rounds);
  return {rounds * static_cast<std::uint64_t>(config.k) * up_each,
          rounds * static_cast<std::uint64_t>(config.num_clients()) *
              broadcast_bytes(parameter_count)};
}

}  // namespace saflbench
