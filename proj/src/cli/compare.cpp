#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "../parallel.hpp"
#include "saflbench/cli.hpp"
#include "saflbench/error.hpp"
#include "saflbench/simulation.hpp"

namespace saflbench::cli {
namespace {

constexpr std::string_view kVariantPrefix = "variant.";

std::string optional_int(const std::optional<int>& v) {
  return v ? std::to_string(*v) : std::string("-");
}

// Data-side fields every compared run must share, in canonical text form.
std::string shared_fields(const RunConfig& c) {
  std::istringstream in(to_config_text(c));
  std::string out;
  std::string section;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() == '[') {
      section = line;
    } else if (section == "[data]" || section == "[partition]" ||
               line.rfind("data_seed", 0) == 0) {
      out += section + line + "\n";
    }
  }
  return out;
}

std::vector<std::string> columns(const std::vector<CompareRow>& rows) {
  std::vector<std::string> cols = {"label",     "mode",       "strategy",
                                   "best_accuracy", "final_accuracy", "T_f",
                                   "T_s"};
  if (!rows.empty()) {
    for (double ots : rows.front().summary.oscillation.thresholds) {
      cols.push_back("O_" + format_real(ots));
    }
  }
  for (const char* c : {"total_tau", "bytes_up", "bytes_down", "sim_time"}) {
    cols.emplace_back(c);
  }
  return cols;
}

std::vector<std::string> cells(const CompareRow& row) {
  const auto& s = row.summary;
  std::vector<std::string> out = {row.label,
                                  to_string(row.config.mode),
                                  to_string(row.config.strategy),
                                  format_real(s.totals.best_accuracy),
                                  format_real(s.totals.final_accuracy),
                                  optional_int(s.convergence.first_reach),
                                  optional_int(s.convergence.stable_from)};
  for (int count : s.oscillation.counts) {
    out.push_back(std::to_string(count));
  }
  out.push_back(std::to_string(s.totals.total_tau));
  out.push_back(std::to_string(s.totals.bytes_up));
  out.push_back(std::to_string(s.totals.bytes_down));
  out.push_back(format_real(s.totals.sim_time));
  return out;
}

}  // namespace

CompareSpec parse_compare(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("", "line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig base;
  std::vector<std::pair<std::string, const pt::ptree*>> variants;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw ConfigError(section, "key outside of any [section]");
    }
    if (section.rfind(kVariantPrefix, 0) == 0) {
      variants.emplace_back(section.substr(kVariantPrefix.size()), &body);
      continue;
    }
    for (const auto& [key, value] : body) {
      set_config_value(base, section, key, value.data());
    }
  }

  CompareSpec spec;
  spec.name = base.name;
  for (const auto& [label, body] : variants) {
    if (label.empty()) {
      throw ConfigError("variant", "variant label must not be empty");
    }
    RunConfig config = base;
    config.name = base.name + "." + label;
    for (const auto& [key, value] : *body) {
      const auto dot = key.find('.');
      if (dot == std::string::npos) {
        throw ConfigError("variant." + label + "." + key,
                          "override keys take the form section.key");
      }
      set_config_value(config, key.substr(0, dot), key.substr(dot + 1), value.data());
    }
    spec.entries.emplace_back(label, std::move(config));
  }
  return spec;
}

void validate_compare(const CompareSpec& spec) {
  if (spec.entries.size() < 2) {
    throw ConfigError("variant", "a comparison needs at least two variants");
  }
  const std::string reference = shared_fields(spec.entries.front().second);
  for (const auto& [label, config] : spec.entries) {
    config.validate();
    if (shared_fields(config) != reference) {
      throw ConfigError("variant." + label,
                        "variants must share data, partition and data_seed");
    }
  }
}

std::vector<CompareRow> run_compare(const CompareSpec& spec, unsigned threads) {
  validate_compare(spec);
  std::vector<std::optional<CompareRow>> slots(spec.entries.size());
  detail::parallel_for(spec.entries.size(), threads, [&](std::size_t i) {
    const auto& [label, config] = spec.entries[i];
    MetricsLog log = run_simulation(config);
    Summary summary =
        summarize(log, config.target_accuracy, config.oscillation_thresholds);
    slots[i] = CompareRow{label, config, std::move(log), std::move(summary)};
  });
  std::vector<CompareRow> rows;
  rows.reserve(slots.size());
  for (auto& slot : slots) {
    rows.push_back(std::move(*slot));
  }
  return rows;
}

void write_compare_csv(std::ostream& out, const std::vector<CompareRow>& rows) {
  const auto header = columns(rows);
  for (std::size_t i = 0; i < header.size(); ++i) {
    out << (i ? "," : "") << header[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    const auto values = cells(row);
    for (std::size_t i = 0; i < values.size(); ++i) {
      out << (i ? "," : "") << values[i];
    }
    out << '\n';
  }
}

void write_compare_text(std::ostream& out, const std::vector<CompareRow>& rows) {
  std::vector<std::vector<std::string>> table = {columns(rows)};
  for (const auto& row : rows) {
    table.push_back(cells(row));
  }
  std::vector<std::size_t> width(table.front().size(), 0);
  for (const auto& line : table) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      width[i] = std::max(width[i], line[i].size());
    }
  }
  for (const auto& line : table) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      out << (i ? "  " : "");
      if (i + 1 < line.size()) {
        out << std::left << std::setw(static_cast<int>(width[i]));
      }
      out << line[i];
    }
    out << '\n';
  }
}

}  // namespace saflbench::cli
