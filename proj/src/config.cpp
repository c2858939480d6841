#include "saflbench/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "saflbench/error.hpp"

namespace saflbench {
namespace {

std::string trimmed(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_real(const std::string& field, const std::string& text) {
  const std::string t = trimmed(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() ||
      !std::isfinite(value)) {
    throw ConfigError(field, "expected a real number, got '" + text + "'");
  }
  return value;
}

long long parse_integer(const std::string& field, const std::string& text) {
  const std::string t = trimmed(text);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError(field, "expected an integer, got '" + text + "'");
  }
  return value;
}

int parse_int(const std::string& field, const std::string& text) {
  const long long v = parse_integer(field, text);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError(field, "integer out of range");
  }
  return static_cast<int>(v);
}

std::uint64_t parse_seed(const std::string& field, const std::string& text) {
  const std::string t = trimmed(text);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError(field, "expected a non-negative integer, got '" + text + "'");
  }
  return value;
}

std::vector<double> parse_reals(const std::string& field, const std::string& text) {
  std::vector<double> out;
  std::stringstream stream(text);
  std::string cell;
  while (std::getline(stream, cell, ',')) {
    out.push_back(parse_real(field, cell));
  }
  if (out.empty()) {
    throw ConfigError(field, "expected at least one value");
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_reals(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) {
      out += ",";
    }
    out += format_double(values[i]);
  }
  return out;
}

template <typename Enum>
Enum parse_enum(const std::string& field, const std::string& text,
                std::initializer_list<std::pair<const char*, Enum>> choices) {
  const std::string t = trimmed(text);
  std::string allowed;
  for (const auto& [name, value] : choices) {
    if (t == name) {
      return value;
    }
    allowed += allowed.empty() ? name : std::string("|") + name;
  }
  throw ConfigError(field, "expected one of " + allowed + ", got '" + text + "'");
}

struct Key {
  std::function<void(RunConfig&, const std::string& field, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
  bool affects_results = true;
};

using KeyTable = std::vector<std::pair<std::string, Key>>;  // "section.key"

const KeyTable& key_table() {
  static const KeyTable table = [] {
    KeyTable t;
    auto add = [&](std::string name, Key key) {
      t.emplace_back(std::move(name), std::move(key));
    };
    add("run.name", {[](RunConfig& c, const std::string&, const std::string& v) {
                       c.name = trimmed(v);
                     },
                     [](const RunConfig& c) { return c.name; }, false});
    add("run.mode",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.mode = parse_enum<Mode>(f, v, {{"sfl", Mode::Synchronous},
                                            {"safl", Mode::SemiAsynchronous}});
         },
         [](const RunConfig& c) { return to_string(c.mode); }});
    add("run.strategy",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.strategy = parse_enum<Strategy>(
               f, v, {{"fedsgd", Strategy::FedSgd}, {"fedavg", Strategy::FedAvg}});
         },
         [](const RunConfig& c) { return to_string(c.strategy); }});
    add("run.k", {[](RunConfig& c, const std::string& f, const std::string& v) {
                    c.k = parse_int(f, v);
                  },
                  [](const RunConfig& c) { return std::to_string(c.k); }});
    add("run.rounds",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.rounds = parse_int(f, v);
         },
         [](const RunConfig& c) { return std::to_string(c.rounds); }});
    add("run.server_lr",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.server_lr = parse_real(f, v);
         },
         [](const RunConfig& c) { return format_double(c.server_lr); }});
    add("run.gradient_accumulation",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.accumulation = parse_enum<GradientAccumulation>(
               f, v, {{"trajectory", GradientAccumulation::Trajectory},
                      {"start_point", GradientAccumulation::StartPoint}});
         },
         [](const RunConfig& c) {
           return std::string(c.accumulation == GradientAccumulation::Trajectory
                                  ? "trajectory"
                                  : "start_point");
         }});
    add("client.local_epochs",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.local_epochs = parse_int(f, v);
         },
         [](const RunConfig& c) { return std::to_string(c.local_epochs); }});
    add("client.batch_size",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.batch_size = trimmed(v) == "full" ? 0 : parse_int(f, v);
         },
         [](const RunConfig& c) {
           return c.batch_size == 0 ? std::string("full")
                                    : std::to_string(c.batch_size);
         }});
    add("client.learning_rate",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.client_lr = parse_reals(f, v);
         },
         [](const RunConfig& c) { return format_reals(c.client_lr); }});
    add("client.clip_max_norm",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           const auto t = trimmed(v);
           if (t == "none" || t.empty()) {
             c.clip_max_norm.reset();
           } else {
             c.clip_max_norm = parse_real(f, v);
           }
         },
         [](const RunConfig& c) {
           return c.clip_max_norm ? format_double(*c.clip_max_norm)
                                  : std::string("none");
         }});
    add("model.architecture",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.architecture = parse_enum<Architecture>(
               f, v, {{"softmax_linear", Architecture::SoftmaxLinear},
                      {"mlp", Architecture::Mlp}});
         },
         [](const RunConfig& c) {
           return std::string(c.architecture == Architecture::SoftmaxLinear
                                  ? "softmax_linear"
                                  : "mlp");
         }});
    add("model.hidden_width",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.hidden_width = parse_int(f, v);
         },
         [](const RunConfig& c) { return std::to_string(c.hidden_width); }});
    add("data.source",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.data.source = parse_enum<DataSource>(
               f, v, {{"synthetic", DataSource::Synthetic}, {"file", DataSource::File}});
         },
         [](const RunConfig& c) {
           return std::string(c.data.source == DataSource::Synthetic ? "synthetic"
                                                                     : "file");
         }});
    add("data.path", {[](RunConfig& c, const std::string&, const std::string& v) {
                        c.data.path = trimmed(v);
                      },
                      [](const RunConfig& c) { return c.data.path; }});
    add("data.classes",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.data.classes = parse_int(f, v);
         },
         [](const RunConfig& c) { return std::to_string(c.data.classes); }});
    add("data.dim", {[](RunConfig& c, const std::string& f, const std::string& v) {
                       c.data.dim = parse_int(f, v);
                     },
                     [](const RunConfig& c) { return std::to_string(c.data.dim); }});
    add("data.per_class",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.data.per_class = parse_int(f, v);
         },
         [](const RunConfig& c) { return std::to_string(c.data.per_class); }});
    add("data.spread",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.data.spread = parse_real(f, v);
         },
         [](const RunConfig& c) { return format_double(c.data.spread); }});
    add("data.test_fraction",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.data.test_fraction = parse_real(f, v);
         },
         [](const RunConfig& c) { return format_double(c.data.test_fraction); }});
    add("partition.scheme",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.partition.scheme = parse_enum<PartitionScheme>(
               f, v, {{"iid", PartitionScheme::IidBalanced},
                      {"shards", PartitionScheme::Shards},
                      {"unbalanced_dirichlet", PartitionScheme::UnbalancedDirichlet},
                      {"hetero_dirichlet", PartitionScheme::HeteroDirichlet}});
         },
         [](const RunConfig& c) { return to_string(c.partition.scheme); }});
    add("partition.num_clients",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.partition.num_clients = parse_int(f, v);
         },
         [](const RunConfig& c) { return std::to_string(c.partition.num_clients); }});
    add("partition.labels_per_client",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.partition.labels_per_client = parse_int(f, v);
         },
         [](const RunConfig& c) {
           return std::to_string(c.partition.labels_per_client);
         }});
    add("partition.alpha",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.partition.alpha = parse_real(f, v);
         },
         [](const RunConfig& c) { return format_double(c.partition.alpha); }});
    add("partition.sigma",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.partition.sigma = parse_real(f, v);
         },
         [](const RunConfig& c) { return format_double(c.partition.sigma); }});
    add("latency.base_seconds_per_epoch",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.latency_base = parse_reals(f, v);
         },
         [](const RunConfig& c) { return format_reals(c.latency_base); }});
    add("latency.jitter_sigma",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.latency_jitter = parse_reals(f, v);
         },
         [](const RunConfig& c) { return format_reals(c.latency_jitter); }});
    add("latency.network_delay_seconds",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.latency_delay = parse_reals(f, v);
         },
         [](const RunConfig& c) { return format_reals(c.latency_delay); }});
    add("seeds.data_seed",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.data_seed = parse_seed(f, v);
         },
         [](const RunConfig& c) { return std::to_string(c.data_seed); }});
    add("seeds.run_seed",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.run_seed = parse_seed(f, v);
         },
         [](const RunConfig& c) { return std::to_string(c.run_seed); }});
    add("metrics.target_accuracy",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.target_accuracy = parse_real(f, v);
         },
         [](const RunConfig& c) { return format_double(c.target_accuracy); }});
    add("metrics.oscillation_thresholds",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.oscillation_thresholds = parse_reals(f, v);
         },
         [](const RunConfig& c) { return format_reals(c.oscillation_thresholds); }});
    add("metrics.metadata_overhead_bytes",
        {[](RunConfig& c, const std::string& f, const std::string& v) {
           c.metadata_overhead = parse_seed(f, v);
         },
         [](const RunConfig& c) { return std::to_string(c.metadata_overhead); }});
    add("output.dir", {[](RunConfig& c, const std::string&, const std::string& v) {
                         c.output_dir = trimmed(v);
                       },
                       [](const RunConfig& c) { return c.output_dir; }, false});
    return t;
  }();
  return table;
}

const Key* find_key(const std::string& field) {
  for (const auto& [name, key] : key_table()) {
    if (name == field) {
      return &key;
    }
  }
  return nullptr;
}

template <typename T>
void check_per_client(const std::string& field, const std::vector<T>& values,
                      int num_clients) {
  if (values.size() != 1 && values.size() != static_cast<std::size_t>(num_clients)) {
    throw ConfigError(field, "expected 1 or " + std::to_string(num_clients) +
                                 " values, got " + std::to_string(values.size()));
  }
}

double pick(const std::vector<double>& values, int client) {
  return values.size() == 1 ? values.front()
                            : values.at(static_cast<std::size_t>(client));
}

}  // namespace

std::string to_string(Mode mode) {
  return mode == Mode::Synchronous ? "sfl" : "safl";
}

std::string to_string(Strategy strategy) {
  return strategy == Strategy::FedSgd ? "fedsgd" : "fedavg";
}

double RunConfig::client_learning_rate(int client) const {
  return pick(client_lr, client);
}

LatencyProfile RunConfig::latency(int client) const {
  return {pick(latency_base, client), pick(latency_jitter, client),
          pick(latency_delay, client)};
}

ModelSpec RunConfig::model_spec(int input_dim, int num_classes) const {
  return architecture == Architecture::SoftmaxLinear
             ? ModelSpec::softmax_linear(input_dim, num_classes)
             : ModelSpec::mlp(hidden_width, input_dim, num_classes);
}

void RunConfig::validate() const {
  partition.validate();
  const int n = partition.num_clients;
  if (k < 1 || k > n) {
    throw ConfigError("run.k", "must lie in [1, num_clients=" +
                                   std::to_string(n) + "], got " +
                                   std::to_string(k));
  }
  if (rounds < 1) {
    throw ConfigError("run.rounds", "must be positive");
  }
  if (!(server_lr > 0.0)) {
    throw ConfigError("run.server_lr", "must be positive");
  }
  if (local_epochs < 1) {
    throw ConfigError("client.local_epochs", "must be positive");
  }
  if (batch_size < 0) {
    throw ConfigError("client.batch_size", "must be positive or 'full'");
  }
  check_per_client("client.learning_rate", client_lr, n);
  for (double lr : client_lr) {
    if (!(lr > 0.0)) {
      throw ConfigError("client.learning_rate", "must be positive");
    }
  }
  if (clip_max_norm && !(*clip_max_norm > 0.0)) {
    throw ConfigError("client.clip_max_norm", "must be positive");
  }
  if (architecture == Architecture::Mlp && hidden_width < 1) {
    throw ConfigError("model.hidden_width", "mlp needs a positive hidden width");
  }
  if (data.source == DataSource::File && data.path.empty()) {
    throw ConfigError("data.path", "required when data.source = file");
  }
  if (data.source == DataSource::Synthetic) {
    if (data.classes < 2) {
      throw ConfigError("data.classes", "must be at least 2");
    }
    if (data.dim < 1) {
      throw ConfigError("data.dim", "must be positive");
    }
    if (data.per_class < 2) {
      throw ConfigError("data.per_class", "must be at least 2");
    }
    if (!(data.spread > 0.0)) {
      throw ConfigError("data.spread", "must be positive");
    }
  }
  if (!(data.test_fraction > 0.0 && data.test_fraction < 1.0)) {
    throw ConfigError("data.test_fraction", "must lie strictly between 0 and 1");
  }
  check_per_client("latency.base_seconds_per_epoch", latency_base, n);
  check_per_client("latency.jitter_sigma", latency_jitter, n);
  check_per_client("latency.network_delay_seconds", latency_delay, n);
  for (double v : latency_base) {
    if (!(v > 0.0)) {
      throw ConfigError("latency.base_seconds_per_epoch", "must be positive");
    }
  }
  for (double v : latency_jitter) {
    if (v < 0.0) {
      throw ConfigError("latency.jitter_sigma", "must be non-negative");
    }
  }
  for (double v : latency_delay) {
    if (v < 0.0) {
      throw ConfigError("latency.network_delay_seconds", "must be non-negative");
    }
  }
  if (!(target_accuracy >= 0.0 && target_accuracy <= 1.0)) {
    throw ConfigError("metrics.target_accuracy", "must lie in [0, 1]");
  }
  for (double ots : oscillation_thresholds) {
    if (!(ots > 0.0)) {
      throw ConfigError("metrics.oscillation_thresholds", "must be positive");
    }
  }
}

void set_config_value(RunConfig& config, const std::string& section,
                      const std::string& key, const std::string& value) {
  const std::string field = section + "." + key;
  const Key* entry = find_key(field);
  if (entry == nullptr) {
    throw ConfigError(field, "unknown key");
  }
  entry->set(config, field, value);
}

RunConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("", "line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw ConfigError(section, "key outside of any [section]");
    }
    for (const auto& [key, value] : body) {
      set_config_value(config, section, key, value.data());
    }
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config file " + path.string());
  }
  return parse_config(in);
}

std::string to_config_text(const RunConfig& config) {
  std::string out;
  std::string current;
  for (const auto& [name, key] : key_table()) {
    const auto dot = name.find('.');
    const std::string section = name.substr(0, dot);
    if (section != current) {
      out += (current.empty() ? "[" : "\n[") + section + "]\n";
      current = section;
    }
    out += name.substr(dot + 1) + " = " + key.get(config) + "\n";
  }
  return out;
}

std::string config_digest(const RunConfig& config) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (const auto& [name, key] : key_table()) {
    if (!key.affects_results) {
      continue;
    }
    const std::string line = name + "=" + key.get(config) + "\n";
    for (unsigned char ch : line) {
      hash ^= ch;
      hash *= 0x100000001b3ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace saflbench
