#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "saflbench/model.hpp"
#include "saflbench/rng.hpp"

namespace saflbench {

struct Dataset {
  Matrix features;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols; }

  // Throws ParseError(0, ...) when the invariants do not hold.
  void validate() const;
  std::vector<std::size_t> class_counts() const;

  Batch to_batch() const;
  Batch gather(std::span<const std::size_t> rows) const;
  Dataset subset(std::span<const std::size_t> rows) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Isotropic Gaussian blobs; class k is centred on a unit-norm mean chosen
// deterministically from (k, dim) alone.
Dataset generate_synthetic(int num_classes, int dim, int per_class,
                           double spread, std::uint64_t seed);

// Text table: `#dataset v1 rows=<N> dim=<d> classes=<c>` then
// `<label>,<f1>,...,<fd>` per row.
Dataset read_dataset(std::istream& in);
Dataset load_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& out, const Dataset& ds);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);

struct TrainTestSplit {
  Dataset train;
  Dataset test;
  // Row indices of each side in the source dataset (ascending).
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

// Stratified split: each class contributes round(n_c * test_fraction) rows to
// the test side, chosen by a seeded shuffle.
TrainTestSplit train_test_split(const Dataset& ds, double test_fraction,
                                std::uint64_t seed);

std::vector<double> sample_dirichlet(std::span<const double> alpha,
                                     SeededRng& rng);
double sample_lognormal(double sigma, SeededRng& rng);

// Largest-remainder rounding of `weights` (non-negative, positive sum) to
// integers summing to `total`. Ties in the fractional part go to the lower
// index.
std::vector<std::size_t> apportion(std::span<const double> weights,
                                   std::size_t total);

// --- partitioning ----------------------------------------------------------

enum class PartitionScheme { IidBalanced, Shards, UnbalancedDirichlet,
                             HeteroDirichlet };

struct PartitionSpec {
  PartitionScheme scheme = PartitionScheme::IidBalanced;
  int num_clients = 2;
  int labels_per_client = 2;  // Shards
  double alpha = 0.5;         // Dirichlet schemes
  double sigma = 1.0;         // UnbalancedDirichlet

  // Throws ConfigError naming the offending field.
  void validate() const;
};

std::string to_string(PartitionScheme scheme);

struct ClientShard {
  int client_id = 0;
  std::vector<std::size_t> indices;  // rows of the parent dataset

  friend bool operator==(const ClientShard&, const ClientShard&) = default;
};

std::vector<ClientShard> partition(const Dataset& ds, const PartitionSpec& spec,
                                   std::uint64_t seed);

// `<client_id>:<i0>,<i1>,...` per line.
void write_partition(std::ostream& out, std::span<const ClientShard> shards);
std::vector<ClientShard> read_partition(std::istream& in);

}  // namespace saflbench
