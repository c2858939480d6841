#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "saflbench/error.hpp"
#include "saflbench/event_queue.hpp"
#include "saflbench/protocol.hpp"
#include "support.hpp"

using namespace saflbench;

namespace {

const ModelSpec kVec2 = ModelSpec::softmax_linear(1, 2);  // 4 parameters

Update gradient_update(int id, std::vector<double> v, int base = 0) {
  v.resize(4, 0.0);
  return Update{id, UpdateKind::Gradient, ParamVector(kVec2, std::move(v)), 1, base, 0.0, 0};
}

Update weights_update(int id, std::vector<double> v, std::size_t n) {
  Update u = gradient_update(id, std::move(v));
  u.kind = UpdateKind::Weights;
  u.sample_count = n;
  return u;
}

ClientState make_client(const Batch& data, const ModelSpec& spec,
                        LocalTrainingOptions options) {
  return ClientState{3, {}, data, ParamVector(spec), 2, options, {}, std::nullopt};
}

Batch sample_data() {
  return testsupport::make_batch(
      2, {{1, 0.5}, {-1, 2}, {0.3, -0.7}, {2, 2}, {-0.5, -1.5}}, {0, 1, 2, 0, 1});
}

}  // namespace

TEST_CASE("fedsgd aggregation") {
  std::vector<Update> ups{gradient_update(0, {1, 0}), gradient_update(1, {0, 1})};
  const auto w = aggregate_fedsgd(ups, ParamVector(kVec2), 1.0);
  CHECK(w[0] == -0.5);
  CHECK(w[1] == -0.5);

  const ParamVector start(kVec2, {1, 2, 3, 4});
  std::vector<Update> single{gradient_update(0, {1, 1, 1, 1})};
  CHECK(aggregate_fedsgd(single, start, 0.5) ==
        sgd_step(start, single[0].payload, 0.5));

  std::vector<Update> wrong{weights_update(0, {1}, 1)};
  CHECK_THROWS_AS(aggregate_fedsgd(wrong, start, 1.0), ProtocolError);
  CHECK_THROWS_AS(aggregate_fedsgd({}, start, 1.0), ProtocolError);
}

TEST_CASE("opposing gradients cancel bitwise") {
  SeededRng rng(41);
  const auto spec = ModelSpec::mlp(4, 3, 3);
  for (int trial = 0; trial < 50; ++trial) {
    ParamVector w(spec), g1(spec), g2(spec);
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = rng.normal();
      g1[i] = rng.normal() * 10.0;
      g2[i] = rng.normal() * 0.01;
    }
    ParamVector g3(spec);
    for (std::size_t i = 0; i < w.size(); ++i) {
      g3[i] = -(g1[i] + g2[i]);
    }
    std::vector<Update> ups;
    for (const auto* g : {&g1, &g2, &g3}) {
      ups.push_back({static_cast<int>(ups.size()), UpdateKind::Gradient, *g, 1, 0, 0.0, 0});
    }
    CHECK(aggregate_fedsgd(ups, w, 0.7) == w);
  }
}

TEST_CASE("fedavg aggregation") {
  std::vector<Update> equal{weights_update(0, {0, 2}, 5), weights_update(1, {2, 0}, 5)};
  const auto w = aggregate_fedavg(equal);
  CHECK(w[0] == 1.0);
  CHECK(w[1] == 1.0);

  std::vector<Update> sized{weights_update(0, {2}, 3), weights_update(1, {6}, 1)};
  CHECK(aggregate_fedavg(sized)[0] == 3.0);

  std::vector<Update> single{weights_update(4, {0.1, 0.2, 0.3, 0.4}, 7)};
  CHECK(aggregate_fedavg(single) == single[0].payload);

  std::vector<Update> wrong{gradient_update(0, {1})};
  CHECK_THROWS_AS(aggregate_fedavg(wrong), ProtocolError);
}

TEST_CASE("staleness") {
  CHECK(staleness(gradient_update(0, {}, 3), 4) == 0);
  CHECK(staleness(gradient_update(0, {}, 2), 5) == 2);
  for (int t = 1; t < 20; ++t) {
    CHECK(staleness(gradient_update(0, {}, t - 1), t) == 0);
  }
  CHECK_THROWS_AS(staleness(gradient_update(0, {}, 4), 4), ProtocolError);

  std::vector<Update> fresh{gradient_update(0, {}, 9), gradient_update(1, {}, 9)};
  CHECK(accumulated_staleness(fresh, 10) == 0);
  std::vector<Update> mixed{gradient_update(0, {}, 9), gradient_update(1, {}, 7),
                            gradient_update(2, {}, 8)};
  CHECK(accumulated_staleness(mixed, 10) == 3);
}

TEST_CASE("select_active") {
  SeededRng rng(42);
  CHECK(select_active(5, 5, rng) == std::vector<int>{0, 1, 2, 3, 4});

  int first = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto s = select_active(2, 1, rng);
    REQUIRE(s.size() == 1);
    first += s[0] == 0;
  }
  CHECK(first >= 4800);
  CHECK(first <= 5200);

  SeededRng a(43), b(43);
  for (int i = 0; i < 20; ++i) {
    const auto s = select_active(10, 4, a);
    CHECK(s == select_active(10, 4, b));
    CHECK(std::is_sorted(s.begin(), s.end()));
    CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
  }
  CHECK_THROWS_AS(select_active(3, 4, rng), ConfigError);
  CHECK_THROWS_AS(select_active(3, 0, rng), ConfigError);
}

TEST_CASE("epoch durations") {
  SeededRng rng(44);
  LatencyProfile fixed{2.5, 0.0, 0.1};
  for (int i = 0; i < 10; ++i) {
    CHECK(draw_epoch_duration(fixed, rng) == 2.5);
  }
  LatencyProfile jitter{3.0, 1.0, 0.0};
  std::vector<double> d(100000);
  for (double& v : d) {
    v = draw_epoch_duration(jitter, rng);
    REQUIRE(v > 0.0);
  }
  std::nth_element(d.begin(), d.begin() + 50000, d.end());
  CHECK(std::abs(d[50000] / 3.0 - 1.0) < 0.03);

  CHECK_THROWS_AS(validate_latency({0.0, 0.0, 0.0}), ConfigError);
  CHECK_THROWS_AS(validate_latency({1.0, -0.1, 0.0}), ConfigError);
  CHECK_THROWS_AS(validate_latency({1.0, 0.0, -1.0}), ConfigError);
}

TEST_CASE("local training with one full-batch epoch") {
  const auto data = sample_data();
  const auto spec = ModelSpec::softmax_linear(2, 3);
  SeededRng init(45);
  ParamVector start(spec);
  for (double& v : start.values()) {
    v = init.normal();
  }

  LocalTrainingOptions sgd{Strategy::FedSgd, 1, 0, 0.3, std::nullopt,
                           GradientAccumulation::Trajectory, 0};
  SeededRng rng(1);
  const auto r = local_train(make_client(data, spec, sgd), start, rng);
  CHECK(r.update.kind == UpdateKind::Gradient);
  CHECK(r.update.payload == backward(start, data));
  CHECK(r.update.sample_count == 5);
  CHECK(r.update.base_round == 2);
  CHECK(r.update.client_id == 3);
  CHECK(r.update.upload_bytes == 9 * 8 + 64);
  // Full batch draws nothing from the generator.
  SeededRng fresh(1);
  CHECK(rng.next_u64() == fresh.next_u64());

  LocalTrainingOptions avg = sgd;
  avg.strategy = Strategy::FedAvg;
  avg.metadata_overhead = 10;
  SeededRng rng2(1);
  const auto a = local_train(make_client(data, spec, avg), start, rng2);
  CHECK(a.update.kind == UpdateKind::Weights);
  CHECK(a.update.payload == sgd_step(start, backward(start, data), 0.3));
  CHECK(a.update.upload_bytes == 9 * 8 + 64 + 10);
}

TEST_CASE("two full-batch epochs accumulate along the trajectory") {
  const auto data = sample_data();
  const auto spec = ModelSpec::softmax_linear(2, 3);
  const std::vector<double> w0{0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.0, 0.1, -0.1};
  const ParamVector start(spec, w0);
  const double eta = 0.4;

  // Replay with the independent oracle.
  const auto g0 = testsupport::oracle::gradient(w0, 2, 3, data);
  std::vector<double> w1 = w0;
  for (std::size_t i = 0; i < w1.size(); ++i) {
    w1[i] -= eta * g0[i];
  }
  const auto g1 = testsupport::oracle::gradient(w1, 2, 3, data);

  LocalTrainingOptions opt{Strategy::FedSgd, 2, 0, eta, std::nullopt,
                           GradientAccumulation::Trajectory, 0};
  SeededRng rng(2);
  const auto r = local_train(make_client(data, spec, opt), start, rng);
  std::vector<double> expected(g0.size());
  for (std::size_t i = 0; i < g0.size(); ++i) {
    expected[i] = g0[i] + g1[i];
  }
  CHECK(testsupport::max_rel_error(r.update.payload.values(), expected) < 1e-12);

  opt.accumulation = GradientAccumulation::StartPoint;
  SeededRng rng2(2);
  const auto s = local_train(make_client(data, spec, opt), start, rng2);
  for (std::size_t i = 0; i < g0.size(); ++i) {
    CHECK(s.update.payload[i] == doctest::Approx(2.0 * g0[i]).epsilon(1e-12));
  }
  CHECK(s.final_params == r.final_params);
}

TEST_CASE("mini-batch payload weights each batch by its share") {
  const auto data = sample_data();
  const auto spec = ModelSpec::softmax_linear(2, 3);
  const ParamVector start(spec);
  const double eta = 0.2;
  LocalTrainingOptions opt{Strategy::FedSgd, 1, 2, eta, std::nullopt,
                           GradientAccumulation::Trajectory, 0};
  SeededRng rng(3);
  const auto r = local_train(make_client(data, spec, opt), start, rng);

  // Same shuffle, batches of 2, 2, 1.
  SeededRng replay(3);
  std::vector<std::size_t> order(5);
  std::iota(order.begin(), order.end(), 0);
  replay.shuffle(std::span(order));
  std::vector<double> w(start.values().begin(), start.values().end());
  std::vector<double> payload(w.size(), 0.0);
  for (std::size_t begin = 0; begin < 5; begin += 2) {
    const std::size_t end = std::min<std::size_t>(5, begin + 2);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (std::size_t k = begin; k < end; ++k) {
      const auto x = data.features.row(order[k]);
      rows.emplace_back(x.begin(), x.end());
      labels.push_back(data.labels[order[k]]);
    }
    const auto g = testsupport::oracle::gradient(
        w, 2, 3, testsupport::make_batch(2, rows, labels));
    for (std::size_t i = 0; i < w.size(); ++i) {
      payload[i] += static_cast<double>(end - begin) / 5.0 * g[i];
      w[i] -= eta * g[i];
    }
  }
  CHECK(testsupport::max_rel_error(r.update.payload.values(), payload) < 1e-12);
  CHECK(testsupport::max_rel_error(r.final_params.values(), w) < 1e-12);
}

TEST_CASE("clipping bounds only the gradient payload") {
  const auto data = sample_data();
  const auto spec = ModelSpec::softmax_linear(2, 3);
  const ParamVector start(spec, {5, -5, 5, -5, 5, -5, 1, 1, 1});
  LocalTrainingOptions opt{Strategy::FedSgd, 2, 0, 0.5, 0.01,
                           GradientAccumulation::Trajectory, 0};
  SeededRng rng(4);
  const auto r = local_train(make_client(data, spec, opt), start, rng);
  CHECK(r.update.payload.l2_norm() <= 0.01);

  opt.strategy = Strategy::FedAvg;
  auto unclipped = opt;
  unclipped.clip_max_norm.reset();
  SeededRng r1(4), r2(4);
  CHECK(local_train(make_client(data, spec, opt), start, r1).update.payload ==
        local_train(make_client(data, spec, unclipped), start, r2).update.payload);
}

TEST_CASE("local training rejects bad inputs") {
  const auto spec = ModelSpec::softmax_linear(2, 3);
  LocalTrainingOptions opt;
  SeededRng rng(5);
  CHECK_THROWS_AS(local_train(make_client(Batch{}, spec, opt), ParamVector(spec), rng),
                  ProtocolError);
  CHECK_THROWS_AS(local_train(make_client(sample_data(), spec, opt),
                              ParamVector(ModelSpec::softmax_linear(2, 4)), rng),
                  DimensionError);
}

TEST_CASE("server buffer discipline") {
  Server server(ParamVector(kVec2), 2, 1.0, Strategy::FedSgd, Mode::SemiAsynchronous);
  CHECK_THROWS_AS(server.receive(weights_update(0, {1}, 1)), ProtocolError);
  CHECK_THROWS_AS(server.receive(gradient_update(0, {1}, 1)), ProtocolError);
  CHECK_THROWS_AS(server.aggregate(), ProtocolError);

  auto late = gradient_update(2, {1, 0}, 0);
  late.arrival_time = 5.0;
  auto early_b = gradient_update(1, {0, 1}, 0);
  early_b.arrival_time = 3.0;
  auto early_a = gradient_update(0, {0, 0, 1}, 0);
  early_a.arrival_time = 3.0;
  server.receive(late);
  CHECK(!server.ready());
  server.receive(early_b);
  server.receive(early_a);
  CHECK(server.ready());

  const auto out = server.aggregate();
  CHECK(out.round == 1);
  REQUIRE(out.consumed.size() == 2);
  CHECK(out.consumed[0].client_id == 0);
  CHECK(out.consumed[1].client_id == 1);
  CHECK(out.tau_total == 0);
  CHECK(server.buffered() == 1);
  CHECK(server.global()[1] == -0.5);
  CHECK(server.global()[2] == -0.5);

  auto next = gradient_update(3, {}, 1);
  next.arrival_time = 6.0;
  server.receive(next);
  const auto second = server.aggregate();
  CHECK(second.round == 2);
  CHECK(second.consumed[0].client_id == 2);
  CHECK(second.tau_total == 1);

  Server sync(ParamVector(kVec2), 1, 1.0, Strategy::FedAvg, Mode::Synchronous);
  sync.receive(weights_update(0, {1}, 1));
  CHECK_THROWS_AS(sync.receive(weights_update(1, {1}, 1)), ProtocolError);
  CHECK_THROWS_AS(Server(ParamVector(kVec2), 0, 1.0, Strategy::FedSgd, Mode::Synchronous),
                  ConfigError);
}

TEST_CASE("event queue order") {
  EventQueue q;
  q.push(2.0, EventKind::UploadArrives, 0);
  q.push(1.0, EventKind::LocalRoundStart, 1);
  q.push(1.0, EventKind::BroadcastArrives, 2);
  q.push(1.0, EventKind::UploadArrives, 3);
  q.push(1.0, EventKind::AggregationCheck, -1);
  q.push(1.0, EventKind::UploadArrives, 4);
  std::vector<int> ids;
  while (!q.empty()) {
    ids.push_back(q.pop().client_id);
  }
  CHECK(ids == std::vector<int>{3, 4, -1, 2, 1, 0});
  CHECK(q.now() == 2.0);
}
