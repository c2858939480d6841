#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "saflbench/error.hpp"
#include "saflbench/metrics.hpp"

namespace saflbench {
namespace {

constexpr const char* kCsvHeader =
    "round,sim_time,accuracy,loss,tau,participants,bytes_up,bytes_down";

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, sep)) {
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == sep) {
    out.emplace_back();
  }
  return out;
}

}  // namespace

std::string format_real(double value) {
  if (value == kNonFiniteLoss) {
    return "-1";
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

void write_metrics_csv(std::ostream& out, const MetricsLog& log) {
  out << kCsvHeader << '\n';
  for (const auto& r : log.records) {
    out << r.round << ',' << format_real(r.sim_time) << ','
        << format_real(r.accuracy) << ',' << format_real(r.loss) << ','
        << r.tau_total << ',';
    for (std::size_t k = 0; k < r.participants.size(); ++k) {
      if (k > 0) {
        out << '|';
      }
      out << r.participants[k];
    }
    out << ',' << r.bytes_up << ',' << r.bytes_down << '\n';
  }
}

MetricsLog read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(1, "empty metrics file");
  }
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  if (line != kCsvHeader) {
    throw ParseError(1, std::string("expected header '") + kCsvHeader + "'");
  }
  MetricsLog log;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != 8) {
      throw ParseError(line_no, "expected 8 fields, found " +
                                    std::to_string(cells.size()));
    }
    RoundRecord r;
    try {
      r.round = std::stoi(cells[0]);
      r.sim_time = std::stod(cells[1]);
      r.accuracy = std::stod(cells[2]);
      r.loss = std::stod(cells[3]);
      r.tau_total = std::stoll(cells[4]);
      for (const auto& id : split(cells[5], '|')) {
        r.participants.push_back(std::stoi(id));
      }
      r.bytes_up = std::stoull(cells[6]);
      r.bytes_down = std::stoull(cells[7]);
    } catch (const std::logic_error&) {
      throw ParseError(line_no, "non-numeric field");
    }
    if (r.round != static_cast<int>(log.records.size()) + 1) {
      throw ParseError(line_no, "rounds must be consecutive starting at 1");
    }
    log.records.push_back(std::move(r));
  }
  return log;
}

}  // namespace saflbench
