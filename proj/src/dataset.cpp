#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "saflbench/data.hpp"
#include "saflbench/error.hpp"

namespace saflbench {
namespace {

// Mean of class k: +e_k for k < d, -e_{k-d} for k < 2d, and beyond that a
// unit vector from a fixed stream so the placement never depends on the
// data seed.
std::vector<double> class_mean(int k, int dim) {
  std::vector<double> mean(static_cast<std::size_t>(dim), 0.0);
  if (k < dim) {
    mean[static_cast<std::size_t>(k)] = 1.0;
  } else if (k < 2 * dim) {
    mean[static_cast<std::size_t>(k - dim)] = -1.0;
  } else {
    SeededRng rng(0x6d65616e73ull, static_cast<std::uint64_t>(k));  // "means"
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& v : mean) {
        v = rng.normal();
        norm += v * v;
      }
    } while (norm < 1e-12);
    norm = std::sqrt(norm);
    for (double& v : mean) {
      v /= norm;
    }
  }
  return mean;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  text = trim(text);
  if (text.empty()) {
    return false;
  }
  if (text.front() == '+') {
    text.remove_prefix(1);
  }
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

long header_field(std::string_view header, std::string_view key,
                  std::size_t line) {
  const std::string needle = std::string(key) + "=";
  const auto pos = header.find(needle);
  if (pos == std::string_view::npos) {
    throw ParseError(line, "malformed header: missing " + std::string(key));
  }
  auto rest = header.substr(pos + needle.size());
  rest = rest.substr(0, rest.find(' '));
  long value = 0;
  if (!parse_number(rest, value)) {
    throw ParseError(line, "malformed header: bad value for " + std::string(key));
  }
  return value;
}

void append_double(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

void Dataset::validate() const {
  if (features.rows != labels.size()) {
    throw ParseError(0, "feature rows and label count differ");
  }
  if (num_classes < 2) {
    throw ParseError(0, "dataset needs at least 2 classes");
  }
  if (labels.size() < static_cast<std::size_t>(num_classes)) {
    throw ParseError(0, "dataset has fewer rows than classes");
  }
  for (int label : labels) {
    if (label < 0 || label >= num_classes) {
      throw ParseError(0, "label out of range");
    }
  }
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int label : labels) {
    ++counts[static_cast<std::size_t>(label)];
  }
  return counts;
}

Batch Dataset::to_batch() const { return Batch{features, labels}; }

Batch Dataset::gather(std::span<const std::size_t> rows) const {
  Batch batch{Matrix(rows.size(), dim()), {}};
  batch.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = features.row(rows[i]);
    std::copy(src.begin(), src.end(), batch.features.row(i).begin());
    batch.labels.push_back(labels[rows[i]]);
  }
  return batch;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Batch b = gather(rows);
  return Dataset{std::move(b.features), std::move(b.labels), num_classes};
}

Dataset generate_synthetic(int num_classes, int dim, int per_class,
                           double spread, std::uint64_t seed) {
  if (num_classes < 2 || dim < 1 || per_class < 2 || !(spread > 0.0)) {
    throw ConfigError("data", "synthetic generator needs classes >= 2, dim >= 1, "
                              "per_class >= 2 and spread > 0");
  }
  const auto n = static_cast<std::size_t>(num_classes) *
                 static_cast<std::size_t>(per_class);
  Dataset ds{Matrix(n, static_cast<std::size_t>(dim)), {}, num_classes};
  ds.labels.reserve(n);
  SeededRng rng(seed, 0x73796e7468ull);  // "synth"
  std::size_t row = 0;
  for (int k = 0; k < num_classes; ++k) {
    const auto mean = class_mean(k, dim);
    for (int i = 0; i < per_class; ++i, ++row) {
      auto x = ds.features.row(row);
      for (std::size_t j = 0; j < x.size(); ++j) {
        x[j] = mean[j] + spread * rng.normal();
      }
      ds.labels.push_back(k);
    }
  }
  return ds;
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(1, "empty file");
  }
  const std::string_view header = trim(line);
  if (header.rfind("#dataset v1", 0) != 0) {
    throw ParseError(1, "malformed header: expected '#dataset v1 rows=<N> "
                        "dim=<d> classes=<c>'");
  }
  const long rows = header_field(header, "rows", 1);
  const long dim = header_field(header, "dim", 1);
  const long classes = header_field(header, "classes", 1);
  if (rows < 0 || dim < 1 || classes < 2) {
    throw ParseError(1, "malformed header: rows >= 0, dim >= 1, classes >= 2");
  }

  Dataset ds{Matrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(dim)),
             {}, static_cast<int>(classes)};
  ds.labels.reserve(static_cast<std::size_t>(rows));
  std::size_t line_no = 1;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty()) {
      continue;
    }
    if (row == static_cast<std::size_t>(rows)) {
      throw ParseError(line_no, "more data rows than the header declares");
    }
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
      const auto comma = text.find(',', start);
      cells.push_back(text.substr(start, comma - start));
      if (comma == std::string_view::npos) {
        break;
      }
      start = comma + 1;
    }
    if (cells.size() != static_cast<std::size_t>(dim) + 1) {
      throw ParseError(line_no, "ragged row: expected " + std::to_string(dim + 1) +
                                    " fields, found " + std::to_string(cells.size()));
    }
    int label = 0;
    if (!parse_number(cells[0], label)) {
      throw ParseError(line_no, "label is not an integer");
    }
    if (label < 0 || label >= classes) {
      throw ParseError(line_no, "label out of range");
    }
    auto x = ds.features.row(row);
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (!parse_number(cells[j + 1], x[j]) || !std::isfinite(x[j])) {
        throw ParseError(line_no, "feature " + std::to_string(j + 1) +
                                      " is not a finite decimal");
      }
    }
    ds.labels.push_back(label);
    ++row;
  }
  if (row != static_cast<std::size_t>(rows)) {
    throw ParseError(line_no, "header declares " + std::to_string(rows) +
                                  " rows, file has " + std::to_string(row));
  }
  if (ds.size() < static_cast<std::size_t>(ds.num_classes)) {
    throw ParseError(1, "dataset has fewer rows than classes");
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open dataset file " + path.string());
  }
  return read_dataset(in);
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  out << "#dataset v1 rows=" << ds.size() << " dim=" << ds.dim()
      << " classes=" << ds.num_classes << '\n';
  std::string line;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    line = std::to_string(ds.labels[i]);
    for (double v : ds.features.row(i)) {
      line.push_back(',');
      append_double(line, v);
    }
    line.push_back('\n');
    out << line;
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write dataset file " + path.string());
  }
  write_dataset(out, ds);
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

TrainTestSplit train_test_split(const Dataset& ds, double test_fraction,
                                std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("data.test_fraction", "must lie strictly between 0 and 1");
  }
  std::vector<std::vector<std::size_t>> by_class(
      static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  }
  SeededRng rng(seed, 0x73706c6974ull);  // "split"
  TrainTestSplit split;
  for (auto& rows : by_class) {
    rng.shuffle(std::span(rows));
    const auto n_test = static_cast<std::size_t>(
        std::llround(static_cast<double>(rows.size()) * test_fraction));
    split.test_rows.insert(split.test_rows.end(), rows.begin(),
                           rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train_rows.insert(split.train_rows.end(),
                            rows.begin() + static_cast<std::ptrdiff_t>(n_test),
                            rows.end());
  }
  if (split.test_rows.empty() || split.train_rows.empty()) {
    throw ConfigError("data.test_fraction",
                      "split leaves the train or test side empty");
  }
  std::sort(split.train_rows.begin(), split.train_rows.end());
  std::sort(split.test_rows.begin(), split.test_rows.end());
  split.train = ds.subset(split.train_rows);
  split.test = ds.subset(split.test_rows);
  return split;
}

std::vector<double> sample_dirichlet(std::span<const double> alpha,
                                     SeededRng& rng) {
  if (alpha.empty()) {
    throw ConfigError("alpha", "Dirichlet needs at least one component");
  }
  std::vector<double> logs(alpha.size());
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    if (!(alpha[k] > 0.0)) {
      throw ConfigError("alpha", "Dirichlet concentration must be positive");
    }
    logs[k] = rng.log_gamma_variate(alpha[k]);
  }
  const double peak = *std::max_element(logs.begin(), logs.end());
  double total = 0.0;
  for (double& v : logs) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : logs) {
    v /= total;
  }
  return logs;
}

double sample_lognormal(double sigma, SeededRng& rng) {
  if (!(sigma > 0.0)) {
    throw ConfigError("sigma", "log-normal sigma must be positive");
  }
  return std::exp(sigma * rng.normal());
}

std::vector<std::size_t> apportion(std::span<const double> weights,
                                   std::size_t total) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> counts(weights.size(), 0);
  if (weights.empty() || !(sum > 0.0)) {
    return counts;
  }
  std::vector<double> remainder(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = weights[i] / sum * static_cast<double>(total);
    const double whole = std::floor(quota);
    counts[i] = static_cast<std::size_t>(whole);
    remainder[i] = quota - whole;
    assigned += counts[i];
  }
  // Floating-point quotas can overshoot by one in pathological cases.
  while (assigned > total) {
    auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --assigned;
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainder[a] > remainder[b];
  });
  for (std::size_t r = 0; assigned < total; ++r) {
    ++counts[order[r % order.size()]];
    ++assigned;
  }
  return counts;
}

}  // namespace saflbench
