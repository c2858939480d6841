#pragma once

#include <functional>
#include <vector>

#include "saflbench/config.hpp"
#include "saflbench/data.hpp"
#include "saflbench/metrics.hpp"
#include "saflbench/model.hpp"

namespace saflbench {

// Data and initial model derived from a config's data side and seeds.
struct Scenario {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_rows;  // source-dataset row of each train row
  Batch test_batch;
  std::vector<ClientShard> shards;
  ModelSpec model;
  ParamVector initial;
};

Scenario build_scenario(const RunConfig& config);

struct RunOptions {
  // Worker threads for client training. Never changes results.
  unsigned threads = 1;
  // Called after each aggregation with the new round and global model.
  std::function<void(int, const ParamVector&)> on_aggregate;
};

MetricsLog run_sfl(const RunConfig& config, const Scenario& scenario,
                   const RunOptions& options = {});
MetricsLog run_safl(const RunConfig& config, const Scenario& scenario,
                    const RunOptions& options = {});

// Builds the scenario and dispatches on config.mode.
MetricsLog run_simulation(const RunConfig& config,
                          const RunOptions& options = {});

MemoryFootprint footprint(const RunConfig& config, const Scenario& scenario);

// Closed-form byte totals for a finished run of `config`.
struct ByteTotals {
  std::uint64_t up = 0;
  std::uint64_t down = 0;
};
ByteTotals expected_bytes(const RunConfig& config, std::size_t parameter_count);

}  // namespace saflbench
