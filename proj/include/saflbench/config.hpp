#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "saflbench/data.hpp"
#include "saflbench/model.hpp"

namespace saflbench {

enum class Mode { Synchronous, SemiAsynchronous };
enum class Strategy { FedSgd, FedAvg };

// Where FedSGD clients evaluate the gradients they accumulate: along the
// local SGD trajectory, or always at the model they started from.
enum class GradientAccumulation { Trajectory, StartPoint };

enum class DataSource { Synthetic, File };

struct DataConfig {
  DataSource source = DataSource::Synthetic;
  std::string path;
  int classes = 10;
  int dim = 16;
  int per_class = 500;
  double spread = 0.5;
  double test_fraction = 0.2;
};

struct LatencyProfile {
  double base_seconds_per_local_epoch = 1.0;
  double jitter_sigma = 0.0;
  double network_delay_seconds = 0.0;
};

// Everything a run needs. Per-client fields hold either one value (shared by
// all clients) or exactly num_clients values.
struct RunConfig {
  std::string name = "run";
  Mode mode = Mode::SemiAsynchronous;
  Strategy strategy = Strategy::FedSgd;
  int k = 5;
  int rounds = 100;
  double server_lr = 1.0;
  GradientAccumulation accumulation = GradientAccumulation::Trajectory;

  int local_epochs = 1;
  int batch_size = 0;  // 0 = full shard
  std::vector<double> client_lr = {0.1};
  std::optional<double> clip_max_norm;

  Architecture architecture = Architecture::SoftmaxLinear;
  int hidden_width = 0;

  DataConfig data;
  PartitionSpec partition;

  std::vector<double> latency_base = {1.0};
  std::vector<double> latency_jitter = {0.0};
  std::vector<double> latency_delay = {0.0};

  std::uint64_t data_seed = 1;
  std::uint64_t run_seed = 1;

  double target_accuracy = 0.5;
  std::vector<double> oscillation_thresholds = {0.05, 0.10, 0.15};
  std::uint64_t metadata_overhead = 0;

  std::string output_dir = "out";

  int num_clients() const noexcept { return partition.num_clients; }
  double client_learning_rate(int client) const;
  LatencyProfile latency(int client) const;
  // Requires the input dimension and class count of the actual dataset.
  ModelSpec model_spec(int input_dim, int num_classes) const;

  // Throws ConfigError naming the first invalid field.
  void validate() const;
};

// Parses the sectioned key=value document. Unknown sections or keys, and
// malformed values, raise ConfigError.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

// Applies one `section.key = value` assignment on top of an existing config.
void set_config_value(RunConfig& config, const std::string& section,
                      const std::string& key, const std::string& value);

// Canonical document: every key, fixed order, shortest round-trip reals.
// parse_config(to_config_text(c)) reproduces c.
std::string to_config_text(const RunConfig& config);

// FNV-1a 64 over the canonical text minus output-only keys.
std::string config_digest(const RunConfig& config);

std::string to_string(Mode mode);
std::string to_string(Strategy strategy);

}  // namespace saflbench
