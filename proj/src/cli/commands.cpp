#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "saflbench/cli.hpp"
#include "saflbench/error.hpp"
#include "saflbench/simulation.hpp"

namespace saflbench::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

template <typename Fn>
int guarded(std::ostream& err, Fn&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const PartitionError& e) {
    err << "partition error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DimensionError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  }
}

void apply_overrides(RunConfig& config, const CommonOptions& options) {
  if (options.seed) {
    config.run_seed = *options.seed;
  }
  if (options.out_dir) {
    config.output_dir = *options.out_dir;
  }
}

CompareSpec load_compare_spec(const CommonOptions& options) {
  CompareSpec spec;
  if (options.preset) {
    const auto doc = preset_compare_document(*options.preset);
    if (!doc) {
      throw ConfigError("--preset", "unknown preset '" + *options.preset + "'");
    }
    std::istringstream in(*doc);
    spec = parse_compare(in);
  } else if (options.config_path) {
    std::ifstream in(*options.config_path);
    if (!in) {
      throw IoError("cannot open config file " + *options.config_path);
    }
    spec = parse_compare(in);
  } else {
    throw ConfigError("--config", "either --config or --preset is required");
  }
  for (auto& [label, config] : spec.entries) {
    apply_overrides(config, options);
  }
  return spec;
}

RunConfig load_run_config(const CommonOptions& options) {
  RunConfig config;
  if (options.preset) {
    const CompareSpec spec = load_compare_spec(options);
    const std::string label = preset_run_label(*options.preset);
    for (const auto& [name, entry] : spec.entries) {
      if (name == label) {
        config = entry;
      }
    }
  } else if (options.config_path) {
    config = load_config(*options.config_path);
  } else {
    throw ConfigError("--config", "either --config or --preset is required");
  }
  apply_overrides(config, options);
  config.validate();
  return config;
}

std::ofstream open_output(const fs::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) {
      throw IoError("cannot create directory " + path.parent_path().string() +
                    ": " + ec.message());
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  return out;
}

void finish_output(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

json optional_json(const std::optional<int>& v) {
  return v ? json(*v) : json(nullptr);
}

json summary_json(const Summary& summary) {
  json osc = json::array();
  for (std::size_t i = 0; i < summary.oscillation.thresholds.size(); ++i) {
    osc.push_back({{"threshold", summary.oscillation.thresholds[i]},
                   {"count", summary.oscillation.counts[i]}});
  }
  const auto& t = summary.totals;
  return {{"target_accuracy", summary.convergence.target},
          {"T_f", optional_json(summary.convergence.first_reach)},
          {"T_s", optional_json(summary.convergence.stable_from)},
          {"oscillations", osc},
          {"totals",
           {{"rounds", t.rounds},
            {"final_accuracy", t.final_accuracy},
            {"best_accuracy", t.best_accuracy},
            {"final_loss", t.final_loss},
            {"total_tau", t.total_tau},
            {"bytes_up", t.bytes_up},
            {"bytes_down", t.bytes_down},
            {"sim_time", t.sim_time}}}};
}

}  // namespace

unsigned threads_from_env() {
  if (const char* value = std::getenv("SAFLBENCH_THREADS")) {
    char* end = nullptr;
    const long parsed = std::strtol(value, &end, 10);
    if (end != value && *end == '\0' && parsed > 0) {
      return static_cast<unsigned>(parsed);
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

int cmd_partition(const CommonOptions& options, std::ostream& out,
                  std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = load_run_config(options);
    const Scenario scenario = build_scenario(config);

    const fs::path path = fs::path(config.output_dir) / (config.name + ".partition.txt");
    std::vector<ClientShard> shards = scenario.shards;
    for (auto& shard : shards) {
      for (auto& row : shard.indices) {
        row = scenario.train_rows[row];
      }
    }
    auto file = open_output(path);
    write_partition(file, shards);
    finish_output(file, path);

    out << "client  rows  labels\n";
    for (const auto& shard : scenario.shards) {
      std::set<int> labels;
      for (auto row : shard.indices) {
        labels.insert(scenario.train.labels[row]);
      }
      out << std::setw(6) << shard.client_id << "  " << std::setw(4)
          << shard.indices.size() << "  " << std::setw(6) << labels.size() << '\n';
    }
    out << "wrote " << path.string() << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_run(const CommonOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = load_run_config(options);
    const Scenario scenario = build_scenario(config);
    RunOptions run_options;
    run_options.threads = options.threads;
    const MetricsLog log = config.mode == Mode::Synchronous
                               ? run_sfl(config, scenario, run_options)
                               : run_safl(config, scenario, run_options);
    const Summary summary =
        summarize(log, config.target_accuracy, config.oscillation_thresholds);

    const fs::path base = fs::path(config.output_dir) / config.name;
    const fs::path csv_path = base.string() + ".metrics.csv";
    auto csv = open_output(csv_path);
    write_metrics_csv(csv, log);
    finish_output(csv, csv_path);

    json doc = summary_json(summary);
    doc["name"] = config.name;
    doc["config_digest"] = log.config_digest;
    doc["mode"] = to_string(config.mode);
    doc["strategy"] = to_string(config.strategy);
    doc["total_params"] = log.total_params;
    doc["memory_proxy_bytes"] = memory_proxy(footprint(config, scenario));
    doc["memory_proxy_note"] = "analytic estimate, not a measurement";
    const fs::path json_path = base.string() + ".summary.json";
    auto js = open_output(json_path);
    js << doc.dump(2) << '\n';
    finish_output(js, json_path);

    const auto& t = summary.totals;
    out << config.name << ": " << t.rounds << " rounds, final accuracy "
        << format_real(t.final_accuracy) << ", best " << format_real(t.best_accuracy)
        << ", total tau " << t.total_tau << '\n';
    out << "wrote " << csv_path.string() << " and " << json_path.string() << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_compare(const CommonOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const CompareSpec spec = load_compare_spec(options);
    validate_compare(spec);
    const auto rows = run_compare(spec, options.threads);

    const fs::path dir = spec.entries.front().second.output_dir;
    for (const auto& row : rows) {
      const fs::path path = dir / (row.config.name + ".metrics.csv");
      auto csv = open_output(path);
      write_metrics_csv(csv, row.log);
      finish_output(csv, path);
    }
    const fs::path csv_path = dir / (spec.name + ".compare.csv");
    auto csv = open_output(csv_path);
    write_compare_csv(csv, rows);
    finish_output(csv, csv_path);

    std::ostringstream text;
    write_compare_text(text, rows);
    const fs::path txt_path = dir / (spec.name + ".compare.txt");
    auto txt = open_output(txt_path);
    txt << text.str();
    finish_output(txt, txt_path);

    out << text.str();
    out << "wrote " << csv_path.string() << " and " << txt_path.string() << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_report(const CommonOptions& options, const std::string& csv_path,
               std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig config;
    if (options.config_path || options.preset) {
      config = load_run_config(options);
    }
    std::ifstream in(csv_path);
    if (!in) {
      throw IoError("cannot open metrics file " + csv_path);
    }
    const MetricsLog log = read_metrics_csv(in);
    const Summary summary =
        summarize(log, config.target_accuracy, config.oscillation_thresholds);
    json doc = summary_json(summary);
    doc["source"] = fs::path(csv_path).filename().string();
    const std::string text = doc.dump(2) + "\n";
    out << text;
    if (options.out_dir) {
      const fs::path path = fs::path(*options.out_dir) /
                            (fs::path(csv_path).stem().string() + ".report.json");
      auto file = open_output(path);
      file << text;
      finish_output(file, path);
    }
    return static_cast<int>(kOk);
  });
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated learning simulator: synchronous and semi-asynchronous "
               "protocols with FedSGD and FedAvg aggregation"};
  app.require_subcommand(1);

  CommonOptions options;
  options.threads = threads_from_env();
  std::string csv_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", options.config_path, "Run configuration file");
    sub->add_option("--out", options.out_dir, "Output directory");
    sub->add_option("--seed", options.seed, "Override seeds.run_seed");
    sub->add_option("--preset", options.preset,
                    "Built-in configuration (gap-demo, smoke)");
  };
  auto* partition_cmd = app.add_subcommand("partition", "Write the client partition");
  auto* run_cmd = app.add_subcommand("run", "Run one simulation");
  auto* compare_cmd = app.add_subcommand("compare", "Run variants side by side");
  auto* report_cmd = app.add_subcommand("report", "Summarize an existing metrics CSV");
  for (auto* sub : {partition_cmd, run_cmd, compare_cmd, report_cmd}) {
    add_common(sub);
  }
  report_cmd->add_option("csv", csv_path, "Metrics CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? static_cast<int>(kOk) : static_cast<int>(kConfigError);
  }

  if (partition_cmd->parsed()) {
    return cmd_partition(options, out, err);
  }
  if (run_cmd->parsed()) {
    return cmd_run(options, out, err);
  }
  if (compare_cmd->parsed()) {
    return cmd_compare(options, out, err);
  }
  return cmd_report(options, csv_path, out, err);
}

}  // namespace saflbench::cli
