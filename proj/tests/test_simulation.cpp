#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "saflbench/error.hpp"
#include "saflbench/simulation.hpp"
#include "support.hpp"

using namespace saflbench;

namespace {

std::string csv_of(const MetricsLog& log) {
  std::ostringstream out;
  write_metrics_csv(out, log);
  return out.str();
}

RunConfig two_speed_config() {
  RunConfig c = testsupport::tiny_config();
  c.mode = Mode::SemiAsynchronous;
  c.k = 1;
  c.rounds = 33;
  c.partition.num_clients = 2;
  c.latency_base = {1.0, 10.0};
  c.latency_jitter = {0.0};
  c.latency_delay = {0.0};
  return c;
}

}  // namespace

TEST_CASE("two-speed staleness timeline") {
  // Client 0 finishes every second, client 1 every ten seconds; K = 1.
  // Time 10: both uploads land together. Client 0 (base 9) goes first as
  // round 10, client 1 (base 0) becomes round 11 with staleness 10. Both
  // restart from round 11; the pattern repeats every 11 rounds.
  std::vector<int> who, tau;
  for (int cycle = 0; cycle < 3; ++cycle) {
    for (int i = 0; i < 10; ++i) {
      who.push_back(0);
      tau.push_back(0);
    }
    who.push_back(1);
    tau.push_back(10);
  }
  for (auto strategy : {Strategy::FedSgd, Strategy::FedAvg}) {
    auto c = two_speed_config();
    c.strategy = strategy;
    const auto log = run_simulation(c);
    REQUIRE(log.records.size() == 33);
    for (std::size_t r = 0; r < log.records.size(); ++r) {
      CAPTURE(r);
      REQUIRE(log.records[r].participants.size() == 1);
      CHECK(log.records[r].participants[0] == who[r]);
      CHECK(log.records[r].tau_total == tau[r]);
    }
    CHECK(log.records[9].sim_time == 10.0);
    CHECK(log.records[10].sim_time == 10.0);
    CHECK(log.records[21].sim_time == 20.0);
  }
}

TEST_CASE("synchronous rounds are never stale") {
  auto c = testsupport::tiny_config();
  c.mode = Mode::Synchronous;
  c.rounds = 30;
  c.latency_base = {1, 2, 3, 4};
  for (auto strategy : {Strategy::FedSgd, Strategy::FedAvg}) {
    c.strategy = strategy;
    const auto log = run_simulation(c);
    double previous = 0.0;
    for (const auto& r : log.records) {
      CHECK(r.tau_total == 0);
      CHECK(r.participants.size() == 2);
      CHECK(r.sim_time > previous);
      previous = r.sim_time;
    }
  }
}

TEST_CASE("semi-asynchronous equals synchronous at the degenerate point") {
  auto c = testsupport::tiny_config();
  c.k = 4;
  c.rounds = 20;
  c.latency_jitter = {0.0};
  c.latency_delay = {0.0};
  c.batch_size = 5;
  c.local_epochs = 2;
  for (auto strategy : {Strategy::FedSgd, Strategy::FedAvg}) {
    c.strategy = strategy;
    auto s = c;
    s.mode = Mode::Synchronous;
    auto a = c;
    a.mode = Mode::SemiAsynchronous;
    const auto sync = run_simulation(s);
    const auto async = run_simulation(a);
    REQUIRE(sync.records.size() == async.records.size());
    for (std::size_t r = 0; r < sync.records.size(); ++r) {
      CHECK(std::abs(sync.records[r].accuracy - async.records[r].accuracy) <= 1e-12);
      CHECK(sync.records[r].loss == async.records[r].loss);
      CHECK(async.records[r].tau_total == 0);
      CHECK(sync.records[r].sim_time == async.records[r].sim_time);
    }
  }
}

TEST_CASE("heterogeneous speeds produce staleness") {
  auto c = testsupport::tiny_config();
  c.k = 5;
  c.rounds = 400;
  c.partition.num_clients = 20;
  c.data.per_class = 40;
  c.latency_jitter = {1.0};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    c.run_seed = seed;
    c.data_seed = seed;
    const auto log = run_simulation(c);
    const bool stale = std::any_of(log.records.begin(), log.records.end(),
                                   [](const RoundRecord& r) { return r.tau_total > 0; });
    CHECK(stale);
  }
}

TEST_CASE("every round consumes exactly K updates and bytes close") {
  for (auto mode : {Mode::Synchronous, Mode::SemiAsynchronous}) {
    for (auto strategy : {Strategy::FedSgd, Strategy::FedAvg}) {
      auto c = testsupport::tiny_config();
      c.mode = mode;
      c.strategy = strategy;
      c.k = 3;
      c.rounds = 25;
      c.metadata_overhead = 24;
      c.latency_delay = {0.2};
      const auto log = run_simulation(c);
      std::uint64_t up = 0, down = 0;
      for (const auto& r : log.records) {
        CHECK(r.participants.size() == 3);
        up += r.bytes_up;
        down += r.bytes_down;
      }
      const auto expected = expected_bytes(c, log.total_params);
      CHECK(up == expected.up);
      CHECK(down == expected.down);
    }
  }
}

TEST_CASE("results do not depend on the worker count") {
  auto c = testsupport::tiny_config();
  c.rounds = 15;
  c.batch_size = 4;
  for (auto mode : {Mode::Synchronous, Mode::SemiAsynchronous}) {
    c.mode = mode;
    const auto one = csv_of(run_simulation(c, {1, {}}));
    CHECK(one == csv_of(run_simulation(c, {1, {}})));
    CHECK(one == csv_of(run_simulation(c, {8, {}})));
  }
}

TEST_CASE("divergence is recorded, not fatal") {
  auto c = testsupport::tiny_config();
  c.server_lr = 1e308;
  c.data.spread = 3.0;
  c.local_epochs = 3;
  c.rounds = 6;
  c.mode = Mode::Synchronous;
  const auto log = run_simulation(c);
  REQUIRE(log.records.size() == 6);
  CHECK(std::any_of(log.records.begin(), log.records.end(),
                    [](const RoundRecord& r) { return r.loss == kNonFiniteLoss; }));
  for (const auto& r : log.records) {
    CHECK((r.loss == kNonFiniteLoss || std::isfinite(r.loss)));
  }
}

TEST_CASE("aggregation callback sees every round") {
  auto c = testsupport::tiny_config();
  c.rounds = 7;
  std::vector<int> rounds;
  RunOptions options;
  options.on_aggregate = [&](int t, const ParamVector& w) {
    rounds.push_back(t);
    CHECK(w.all_finite());
  };
  run_simulation(c, options);
  CHECK(rounds == std::vector<int>{1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("scenario construction") {
  auto c = testsupport::tiny_config();
  const auto s = build_scenario(c);
  CHECK(s.train.size() + s.test.size() == 60);
  CHECK(s.shards.size() == 4);
  CHECK(s.initial == init_model(s.model, c.run_seed));
  CHECK(s.model == ModelSpec::softmax_linear(4, 3));
  const auto f = footprint(c, s);
  CHECK(f.dataset_bytes == 60 * (4 * 8 + 4));
  c.k = 9;
  CHECK_THROWS_AS(build_scenario(c), ConfigError);
}
