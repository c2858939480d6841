#include <sstream>

#include "doctest.h"
#include "saflbench/config.hpp"
#include "saflbench/error.hpp"
#include "support.hpp"

using namespace saflbench;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string field_of(const std::string& text) {
  try {
    parse(text).validate();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("parse a full document") {
  const auto c = parse(R"(# comment
[run]
name = demo
mode = sfl
strategy = fedavg
k = 3
rounds = 7
server_lr = 0.25

[client]
local_epochs = 2
batch_size = 16
learning_rate = 0.1, 0.2, 0.3, 0.4
clip_max_norm = 5

[model]
architecture = mlp
hidden_width = 8

[partition]
scheme = shards
num_clients = 4
labels_per_client = 2

[latency]
base_seconds_per_epoch = 1,2,3,4
jitter_sigma = 0.5

[seeds]
data_seed = 11
run_seed = 12

[metrics]
oscillation_thresholds = 0.02, 0.2
metadata_overhead_bytes = 32
)");
  CHECK(c.name == "demo");
  CHECK(c.mode == Mode::Synchronous);
  CHECK(c.strategy == Strategy::FedAvg);
  CHECK(c.k == 3);
  CHECK(c.rounds == 7);
  CHECK(c.server_lr == 0.25);
  CHECK(c.local_epochs == 2);
  CHECK(c.batch_size == 16);
  CHECK(c.client_learning_rate(2) == 0.3);
  CHECK(c.clip_max_norm == 5.0);
  CHECK(c.architecture == Architecture::Mlp);
  CHECK(c.partition.scheme == PartitionScheme::Shards);
  CHECK(c.latency(3).base_seconds_per_local_epoch == 4.0);
  CHECK(c.latency(3).jitter_sigma == 0.5);
  CHECK(c.data_seed == 11);
  CHECK(c.run_seed == 12);
  CHECK(c.oscillation_thresholds == std::vector<double>{0.02, 0.2});
  CHECK(c.metadata_overhead == 32);
  CHECK(c.model_spec(5, 3) == ModelSpec::mlp(8, 5, 3));
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("unknown keys and sections are rejected") {
  CHECK_THROWS_AS(parse("[run]\nfoo = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[nope]\nk = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\nk = many\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\nmode = async\n"), ConfigError);
  try {
    parse("[client]\nlearning_rat = 0.1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "client.learning_rat");
  }
}

TEST_CASE("validation names the offending field") {
  CHECK(field_of("[run]\nk = 9\n[partition]\nnum_clients = 4\n") == "run.k");
  CHECK(field_of("[run]\nk = 0\n") == "run.k");
  CHECK(field_of("[run]\nk = 1\nrounds = 0\n") == "run.rounds");
  CHECK(field_of("[run]\nk = 1\n[partition]\nscheme = hetero_dirichlet\nalpha = 0\n") ==
        "partition.alpha");
  CHECK(field_of("[client]\nlearning_rate = 0.1, 0.2, 0.3\n[partition]\nnum_clients = 4\n"
                 "[run]\nk = 2\n") == "client.learning_rate");
  CHECK(field_of("[client]\nclip_max_norm = -1\n[run]\nk=1\n") == "client.clip_max_norm");
  CHECK(field_of("[model]\narchitecture = mlp\n[run]\nk=1\n") == "model.hidden_width");
}

TEST_CASE("canonical text round trips") {
  auto c = testsupport::tiny_config();
  c.client_lr = {0.1, 0.30000000000000004, 1e-7, 2.5};
  c.clip_max_norm = 0.75;
  c.latency_base = {1, 2, 3, 4};
  c.mode = Mode::Synchronous;
  c.accumulation = GradientAccumulation::StartPoint;
  const auto text = to_config_text(c);
  const auto back = parse(text);
  CHECK(to_config_text(back) == text);
  CHECK(back.client_lr == c.client_lr);
  CHECK(back.clip_max_norm == c.clip_max_norm);
  CHECK(back.accumulation == GradientAccumulation::StartPoint);
}

TEST_CASE("digest ignores output-only keys") {
  auto a = testsupport::tiny_config();
  auto b = a;
  b.name = "other";
  b.output_dir = "/tmp/elsewhere";
  CHECK(config_digest(a) == config_digest(b));
  b.run_seed = 99;
  CHECK(config_digest(a) != config_digest(b));
  CHECK(config_digest(a).size() == 16);
}

TEST_CASE("set_config_value applies overrides") {
  auto c = testsupport::tiny_config();
  set_config_value(c, "run", "strategy", "fedavg");
  set_config_value(c, "client", "batch_size", "full");
  CHECK(c.strategy == Strategy::FedAvg);
  CHECK(c.batch_size == 0);
  CHECK_THROWS_AS(set_config_value(c, "run", "bogus", "1"), ConfigError);
}
