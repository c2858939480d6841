#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "saflbench/data.hpp"
#include "saflbench/error.hpp"

namespace saflbench {
namespace {

using RowLists = std::vector<std::vector<std::size_t>>;

// Rows of each class, shuffled by the partition stream.
RowLists shuffled_rows_by_class(const Dataset& ds, SeededRng& rng) {
  RowLists by_class(static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  }
  for (auto& rows : by_class) {
    rng.shuffle(std::span(rows));
  }
  return by_class;
}

// Moves one row from the largest shard into every empty one. Largest-shard
// ties go to the lower client id.
void repair_empty(RowLists& shards) {
  for (std::size_t i = 0; i < shards.size(); ++i) {
    if (!shards[i].empty()) {
      continue;
    }
    auto donor = std::max_element(
        shards.begin(), shards.end(),
        [](const auto& a, const auto& b) { return a.size() < b.size(); });
    if (donor->size() <= 1) {
      throw PartitionError("client " + std::to_string(i) +
                           " received no samples and no shard can spare one");
    }
    shards[i].push_back(donor->back());
    donor->pop_back();
  }
}

std::vector<ClientShard> finish(RowLists shards) {
  std::vector<ClientShard> out;
  out.reserve(shards.size());
  for (std::size_t i = 0; i < shards.size(); ++i) {
    std::sort(shards[i].begin(), shards[i].end());
    out.push_back({static_cast<int>(i), std::move(shards[i])});
  }
  return out;
}

std::vector<ClientShard> partition_iid(const Dataset& ds, int num_clients,
                                       SeededRng& rng) {
  const auto clients = static_cast<std::size_t>(num_clients);
  RowLists shards(clients);
  for (const auto& rows : shuffled_rows_by_class(ds, rng)) {
    const std::size_t per_client = rows.size() / clients;
    for (std::size_t i = 0; i < clients; ++i) {
      shards[i].insert(shards[i].end(),
                       rows.begin() + static_cast<std::ptrdiff_t>(i * per_client),
                       rows.begin() + static_cast<std::ptrdiff_t>((i + 1) * per_client));
    }
  }
  if (shards.front().empty()) {
    throw PartitionError("iid: every class has fewer rows than clients");
  }
  return finish(std::move(shards));
}

std::vector<ClientShard> partition_shards(const Dataset& ds, int num_clients,
                                          int labels_per_client,
                                          SeededRng& rng) {
  const auto clients = static_cast<std::size_t>(num_clients);
  const auto per_client = static_cast<std::size_t>(labels_per_client);
  const std::size_t total_slices = clients * per_client;
  const auto counts = ds.class_counts();

  std::size_t populated = 0;
  for (auto n : counts) {
    populated += n > 0 ? 1 : 0;
  }
  if (per_client > populated) {
    throw PartitionError("shards: " + std::to_string(per_client) +
                         " labels per client requested but only " +
                         std::to_string(populated) + " labels are present");
  }

  // Slices per label, proportional to class size. A label may not be cut into
  // more slices than there are clients (or rows), otherwise the round-robin
  // deal would hand one client two slices of the same label.
  std::vector<double> weights(counts.begin(), counts.end());
  auto slices = apportion(weights, total_slices);
  auto cap = [&](std::size_t c) { return std::min(clients, counts[c]); };
  for (;;) {
    std::size_t from = slices.size();
    for (std::size_t c = 0; c < slices.size(); ++c) {
      if (slices[c] > cap(c)) {
        from = c;
        break;
      }
    }
    if (from == slices.size()) {
      break;
    }
    std::size_t to = slices.size();
    double best_ratio = -1.0;
    for (std::size_t c = 0; c < slices.size(); ++c) {
      if (slices[c] >= cap(c)) {
        continue;
      }
      const double ratio = static_cast<double>(counts[c]) /
                           static_cast<double>(slices[c] + 1);
      if (ratio > best_ratio) {
        best_ratio = ratio;
        to = c;
      }
    }
    if (to == slices.size()) {
      throw PartitionError("shards: " + std::to_string(total_slices) +
                           " label slices requested but the dataset cannot "
                           "supply that many single-label slices");
    }
    --slices[from];
    ++slices[to];
  }

  std::size_t slice_size = ds.size();
  for (std::size_t c = 0; c < slices.size(); ++c) {
    if (slices[c] > 0) {
      slice_size = std::min(slice_size, counts[c] / slices[c]);
    }
  }
  if (slice_size == 0) {
    throw PartitionError("shards: slices would be empty");
  }

  const auto by_class = shuffled_rows_by_class(ds, rng);
  std::vector<std::size_t> owner(clients);
  std::iota(owner.begin(), owner.end(), 0);
  rng.shuffle(std::span(owner));

  RowLists shards(clients);
  std::size_t position = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    for (std::size_t s = 0; s < slices[c]; ++s, ++position) {
      auto& dest = shards[owner[position % clients]];
      const auto begin = by_class[c].begin() + static_cast<std::ptrdiff_t>(s * slice_size);
      dest.insert(dest.end(), begin, begin + static_cast<std::ptrdiff_t>(slice_size));
    }
  }
  return finish(std::move(shards));
}

std::vector<ClientShard> partition_unbalanced(const Dataset& ds,
                                              const PartitionSpec& spec,
                                              SeededRng& rng) {
  const auto clients = static_cast<std::size_t>(spec.num_clients);
  const auto counts = ds.class_counts();
  const std::vector<double> alpha(counts.size(), spec.alpha);
  const auto mix = sample_dirichlet(alpha, rng);

  std::vector<double> sizes(clients);
  for (double& s : sizes) {
    s = sample_lognormal(spec.sigma, rng);
  }

  // Largest total the shared mix can be realised with from the rows on hand.
  double budget = static_cast<double>(ds.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (mix[c] > 0.0) {
      budget = std::min(budget, static_cast<double>(counts[c]) / mix[c]);
    }
  }
  auto per_class = apportion(mix, static_cast<std::size_t>(std::floor(budget)));
  for (std::size_t c = 0; c < counts.size(); ++c) {
    per_class[c] = std::min(per_class[c], counts[c]);
  }

  const auto by_class = shuffled_rows_by_class(ds, rng);
  RowLists shards(clients);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const auto split = apportion(sizes, per_class[c]);
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < clients; ++i) {
      const auto begin = by_class[c].begin() + static_cast<std::ptrdiff_t>(cursor);
      shards[i].insert(shards[i].end(), begin,
                       begin + static_cast<std::ptrdiff_t>(split[i]));
      cursor += split[i];
    }
  }
  repair_empty(shards);
  return finish(std::move(shards));
}

std::vector<ClientShard> partition_hetero(const Dataset& ds,
                                          const PartitionSpec& spec,
                                          SeededRng& rng) {
  const auto clients = static_cast<std::size_t>(spec.num_clients);
  const std::vector<double> alpha(clients, spec.alpha);
  const auto by_class = shuffled_rows_by_class(ds, rng);
  RowLists shards(clients);
  for (const auto& rows : by_class) {
    const auto proportions = sample_dirichlet(alpha, rng);
    const auto split = apportion(proportions, rows.size());
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < clients; ++i) {
      const auto begin = rows.begin() + static_cast<std::ptrdiff_t>(cursor);
      shards[i].insert(shards[i].end(), begin,
                       begin + static_cast<std::ptrdiff_t>(split[i]));
      cursor += split[i];
    }
  }
  repair_empty(shards);
  return finish(std::move(shards));
}

}  // namespace

void PartitionSpec::validate() const {
  if (num_clients < 2) {
    throw ConfigError("partition.num_clients", "must be at least 2");
  }
  switch (scheme) {
    case PartitionScheme::IidBalanced:
      break;
    case PartitionScheme::Shards:
      if (labels_per_client < 1) {
        throw ConfigError("partition.labels_per_client", "must be positive");
      }
      break;
    case PartitionScheme::UnbalancedDirichlet:
      if (!(sigma > 0.0)) {
        throw ConfigError("partition.sigma", "must be positive");
      }
      [[fallthrough]];
    case PartitionScheme::HeteroDirichlet:
      if (!(alpha > 0.0)) {
        throw ConfigError("partition.alpha", "must be positive");
      }
      break;
  }
}

std::string to_string(PartitionScheme scheme) {
  switch (scheme) {
    case PartitionScheme::IidBalanced: return "iid";
    case PartitionScheme::Shards: return "shards";
    case PartitionScheme::UnbalancedDirichlet: return "unbalanced_dirichlet";
    case PartitionScheme::HeteroDirichlet: return "hetero_dirichlet";
  }
  return "?";
}

std::vector<ClientShard> partition(const Dataset& ds, const PartitionSpec& spec,
                                   std::uint64_t seed) {
  spec.validate();
  SeededRng rng(seed, 0x7061727469ull);  // "parti"
  switch (spec.scheme) {
    case PartitionScheme::IidBalanced:
      return partition_iid(ds, spec.num_clients, rng);
    case PartitionScheme::Shards:
      return partition_shards(ds, spec.num_clients, spec.labels_per_client, rng);
    case PartitionScheme::UnbalancedDirichlet:
      return partition_unbalanced(ds, spec, rng);
    case PartitionScheme::HeteroDirichlet:
      return partition_hetero(ds, spec, rng);
  }
  throw PartitionError("unknown partition scheme");
}

void write_partition(std::ostream& out, std::span<const ClientShard> shards) {
  std::string line;
  for (const auto& shard : shards) {
    line = std::to_string(shard.client_id);
    line.push_back(':');
    for (std::size_t k = 0; k < shard.indices.size(); ++k) {
      if (k > 0) {
        line.push_back(',');
      }
      line += std::to_string(shard.indices[k]);
    }
    line.push_back('\n');
    out << line;
  }
}

std::vector<ClientShard> read_partition(std::istream& in) {
  std::vector<ClientShard> shards;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw ParseError(line_no, "expected '<client_id>:<indices>'");
    }
    ClientShard shard;
    try {
      shard.client_id = std::stoi(line.substr(0, colon));
      std::size_t start = colon + 1;
      while (start < line.size()) {
        auto comma = line.find(',', start);
        if (comma == std::string::npos) {
          comma = line.size();
        }
        shard.indices.push_back(std::stoull(line.substr(start, comma - start)));
        start = comma + 1;
      }
    } catch (const std::logic_error&) {
      throw ParseError(line_no, "non-numeric client id or row index");
    }
    shards.push_back(std::move(shard));
  }
  return shards;
}

}  // namespace saflbench
