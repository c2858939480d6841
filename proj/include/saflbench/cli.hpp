#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "saflbench/config.hpp"
#include "saflbench/metrics.hpp"

namespace saflbench::cli {

enum ExitCode : int { kOk = 0, kIoError = 1, kConfigError = 2 };

struct CommonOptions {
  std::optional<std::string> config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;  // overrides seeds.run_seed
  std::optional<std::string> preset;
  unsigned threads = 1;
};

// Worker cap from SAFLBENCH_THREADS (default: hardware concurrency).
unsigned threads_from_env();

int cmd_partition(const CommonOptions& options, std::ostream& out, std::ostream& err);
int cmd_run(const CommonOptions& options, std::ostream& out, std::ostream& err);
int cmd_compare(const CommonOptions& options, std::ostream& out, std::ostream& err);
int cmd_report(const CommonOptions& options, const std::string& csv_path,
               std::ostream& out, std::ostream& err);

// Full command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

// --- compare ---------------------------------------------------------------

// A base run document plus `[variant.<label>]` sections whose keys are
// `section.key = value` overrides applied on top of the base.
struct CompareSpec {
  std::string name = "compare";
  std::vector<std::pair<std::string, RunConfig>> entries;
};

CompareSpec parse_compare(std::istream& in);
// Throws ConfigError unless there are >= 2 entries sharing every data-side
// field (data, partition, data_seed).
void validate_compare(const CompareSpec& spec);

struct CompareRow {
  std::string label;
  RunConfig config;
  MetricsLog log;
  Summary summary;
};

std::vector<CompareRow> run_compare(const CompareSpec& spec, unsigned threads);
void write_compare_csv(std::ostream& out, const std::vector<CompareRow>& rows);
void write_compare_text(std::ostream& out, const std::vector<CompareRow>& rows);

// --- presets ---------------------------------------------------------------

std::vector<std::string> preset_names();
// Compare document for a named preset; nullopt when unknown.
std::optional<std::string> preset_compare_document(const std::string& name);
// Label of the variant `run --preset <name>` executes.
std::string preset_run_label(const std::string& name);

}  // namespace saflbench::cli
