#include "saflbench/cli.hpp"

namespace saflbench::cli {
namespace {

// Ten Gaussian classes in 16 dimensions, 20 clients with a Hetero-Dirichlet
// split at alpha = 0.1, log-normal epoch jitter, K = 5 of 20 and two local
// epochs. Server step 1.0 against a client step of 0.1.
constexpr const char* kGapDemo = R"([run]
name = gap-demo
mode = safl
strategy = fedsgd
k = 5
rounds = 200
server_lr = 1
gradient_accumulation = trajectory

[client]
local_epochs = 2
batch_size = full
learning_rate = 0.1

[model]
architecture = softmax_linear

[data]
source = synthetic
classes = 10
dim = 16
per_class = 500
spread = 0.3
test_fraction = 0.2

[partition]
scheme = hetero_dirichlet
num_clients = 20
alpha = 0.1

[latency]
base_seconds_per_epoch = 1
jitter_sigma = 1
network_delay_seconds = 0.05

[seeds]
data_seed = 1
run_seed = 1

[metrics]
target_accuracy = 0.84
oscillation_thresholds = 0.05,0.1,0.15

[variant.SS]
run.mode = sfl
run.strategy = fedsgd

[variant.SA]
run.mode = sfl
run.strategy = fedavg

[variant.AS]
run.mode = safl
run.strategy = fedsgd

[variant.AA]
run.mode = safl
run.strategy = fedavg
)";

constexpr const char* kSmoke = R"([run]
name = smoke
k = 2
rounds = 5

[client]
local_epochs = 1
batch_size = full
learning_rate = 0.5

[data]
classes = 3
dim = 4
per_class = 20
spread = 0.3

[partition]
scheme = iid
num_clients = 4

[latency]
jitter_sigma = 0.5

[variant.SS]
run.mode = sfl
run.strategy = fedsgd

[variant.SA]
run.mode = sfl
run.strategy = fedavg

[variant.AS]
run.mode = safl
run.strategy = fedsgd

[variant.AA]
run.mode = safl
run.strategy = fedavg
)";

}  // namespace

std::vector<std::string> preset_names() { return {"gap-demo", "smoke"}; }

std::optional<std::string> preset_compare_document(const std::string& name) {
  if (name == "gap-demo") {
    return std::string(kGapDemo);
  }
  if (name == "smoke") {
    return std::string(kSmoke);
  }
  return std::nullopt;
}

std::string preset_run_label(const std::string&) { return "AS"; }

}  // namespace saflbench::cli
