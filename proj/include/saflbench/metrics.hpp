#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "saflbench/model.hpp"

namespace saflbench {

// Loss value recorded for rounds whose evaluated loss is NaN or infinite.
inline constexpr double kNonFiniteLoss = -1.0;

// Fixed per-message framing overhead, in bytes.
inline constexpr std::uint64_t kMessageHeaderBytes = 64;

struct RoundRecord {
  int round = 0;
  double sim_time = 0.0;
  double accuracy = 0.0;
  double loss = 0.0;  // finite, or exactly kNonFiniteLoss
  std::int64_t tau_total = 0;
  std::vector<int> participants;
  std::uint64_t bytes_up = 0;
  std::uint64_t bytes_down = 0;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

struct MetricsLog {
  std::vector<RoundRecord> records;
  std::string config_digest;
  std::size_t total_params = 0;

  std::vector<double> accuracies() const;
};

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
};

Evaluation evaluate_global(const ParamVector& global, const Batch& test);

struct ConvergenceReport {
  double target = 0.0;
  std::optional<int> first_reach;  // T_f, 1-based
  std::optional<int> stable_from;  // T_s, 1-based
};

ConvergenceReport convergence_epochs(std::span<const double> accuracy,
                                     double target);

// Number of round-over-round drops strictly larger than `threshold`.
int count_oscillations(std::span<const double> accuracy, double threshold);

struct OscillationReport {
  std::vector<double> thresholds;
  std::vector<int> counts;
};

OscillationReport oscillation_report(std::span<const double> accuracy,
                                     std::span<const double> thresholds);

enum class PayloadKind { GradientUpload, WeightsUpload, Broadcast };

struct PayloadDescriptor {
  std::size_t parameter_count = 0;
  PayloadKind kind = PayloadKind::GradientUpload;
  std::uint64_t metadata_overhead = 0;  // added to weight uploads only
};

std::uint64_t transmission_bytes(const PayloadDescriptor& payload);

// Inputs to the analytic peak-resident-memory proxy.
struct MemoryFootprint {
  std::size_t num_clients = 0;
  std::size_t parameter_count = 0;
  std::size_t buffer_capacity = 0;  // K
  std::uint64_t dataset_bytes = 0;
};

// (N + 1) * P * 8 + K * P * 8 + dataset bytes. An estimate, not a measurement.
std::uint64_t memory_proxy(const MemoryFootprint& footprint);

struct RunTotals {
  int rounds = 0;
  double final_accuracy = 0.0;
  double best_accuracy = 0.0;
  double final_loss = 0.0;
  std::int64_t total_tau = 0;
  std::uint64_t bytes_up = 0;
  std::uint64_t bytes_down = 0;
  double sim_time = 0.0;
};

struct Summary {
  ConvergenceReport convergence;
  OscillationReport oscillation;
  RunTotals totals;
};

Summary summarize(const MetricsLog& log, double target,
                  std::span<const double> thresholds);

// CSV: `round,sim_time,accuracy,loss,tau,participants,bytes_up,bytes_down`,
// reals with 9 significant digits, participants joined by '|'.
void write_metrics_csv(std::ostream& out, const MetricsLog& log);
MetricsLog read_metrics_csv(std::istream& in);

std::string format_real(double value);

}  // namespace saflbench
