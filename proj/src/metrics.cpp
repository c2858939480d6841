#include "saflbench/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "saflbench/error.hpp"

namespace saflbench {

std::vector<double> MetricsLog::accuracies() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back(r.accuracy);
  }
  return out;
}

Evaluation evaluate_global(const ParamVector& global, const Batch& test) {
  const EvalResult result = forward_eval(global, test);
  Evaluation eval;
  eval.accuracy =
      static_cast<double>(result.correct) / static_cast<double>(test.size());
  eval.loss = std::isfinite(result.loss) ? result.loss : kNonFiniteLoss;
  return eval;
}

ConvergenceReport convergence_epochs(std::span<const double> accuracy,
                                     double target) {
  ConvergenceReport report;
  report.target = target;
  for (std::size_t i = 0; i < accuracy.size(); ++i) {
    if (accuracy[i] >= target) {
      report.first_reach = static_cast<int>(i + 1);
      break;
    }
  }
  // Walk back from the end while the tail stays at or above target.
  std::size_t j = accuracy.size();
  while (j > 0 && accuracy[j - 1] >= target) {
    --j;
  }
  if (j < accuracy.size()) {
    report.stable_from = static_cast<int>(j + 1);
  }
  return report;
}

int count_oscillations(std::span<const double> accuracy, double threshold) {
  if (!(threshold > 0.0)) {
    throw ConfigError("metrics.oscillation_thresholds",
                      "thresholds must be positive");
  }
  int count = 0;
  for (std::size_t i = 1; i < accuracy.size(); ++i) {
    if (accuracy[i - 1] - accuracy[i] > threshold) {
      ++count;
    }
  }
  return count;
}

OscillationReport oscillation_report(std::span<const double> accuracy,
                                     std::span<const double> thresholds) {
  OscillationReport report;
  report.thresholds.assign(thresholds.begin(), thresholds.end());
  std::sort(report.thresholds.begin(), report.thresholds.end());
  for (double ots : report.thresholds) {
    report.counts.push_back(count_oscillations(accuracy, ots));
  }
  return report;
}

std::uint64_t transmission_bytes(const PayloadDescriptor& payload) {
  std::uint64_t bytes =
      static_cast<std::uint64_t>(payload.parameter_count) * 8 + kMessageHeaderBytes;
  if (payload.kind == PayloadKind::WeightsUpload) {
    bytes += payload.metadata_overhead;
  }
  return bytes;
}

std::uint64_t memory_proxy(const MemoryFootprint& footprint) {
  const std::uint64_t vector_bytes =
      static_cast<std::uint64_t>(footprint.parameter_count) * 8;
  return (footprint.num_clients + 1) * vector_bytes +
         footprint.buffer_capacity * vector_bytes + footprint.dataset_bytes;
}

Summary summarize(const MetricsLog& log, double target,
                  std::span<const double> thresholds) {
  if (log.records.empty()) {
    throw Error("cannot summarize an empty metrics log");
  }
  const auto acc = log.accuracies();
  Summary summary;
  summary.convergence = convergence_epochs(acc, target);
  summary.oscillation = oscillation_report(acc, thresholds);

  RunTotals& totals = summary.totals;
  totals.rounds = static_cast<int>(log.records.size());
  totals.final_accuracy = acc.back();
  totals.best_accuracy = *std::max_element(acc.begin(), acc.end());
  totals.final_loss = log.records.back().loss;
  totals.sim_time = log.records.back().sim_time;
  for (const auto& r : log.records) {
    totals.total_tau += r.tau_total;
    totals.bytes_up += r.bytes_up;
    totals.bytes_down += r.bytes_down;
  }
  return summary;
}

}  // namespace saflbench
