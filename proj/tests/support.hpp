#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "saflbench/config.hpp"
#include "saflbench/data.hpp"
#include "saflbench/model.hpp"

namespace testsupport {

using saflbench::Batch;
using saflbench::Matrix;
using saflbench::ParamVector;

inline Batch make_batch(std::size_t dim, const std::vector<std::vector<double>>& rows,
                        const std::vector<int>& labels) {
  Batch b{Matrix(rows.size(), dim), labels};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].begin(), rows[i].end(), b.features.row(i).begin());
  }
  return b;
}

// Elementwise max of |a - b| / max(|a|, |b|, floor).
inline double max_rel_error(std::span<const double> a, std::span<const double> b,
                            double floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

inline double max_rel_error(const ParamVector& a, const ParamVector& b,
                            double floor = 1e-8) {
  return max_rel_error(a.values(), b.values(), floor);
}

// Softmax regression written out directly, without the library's model code.
// Layout: W[c x d] row-major followed by b[c].
namespace oracle {

inline std::vector<double> logits(const std::vector<double>& w, std::size_t d,
                                  std::size_t c, std::span<const double> x) {
  std::vector<double> z(c);
  for (std::size_t k = 0; k < c; ++k) {
    double s = w[c * d + k];
    for (std::size_t j = 0; j < d; ++j) {
      s += w[k * d + j] * x[j];
    }
    z[k] = s;
  }
  return z;
}

inline std::vector<double> softmax(std::vector<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    total += v;
  }
  for (double& v : z) {
    v /= total;
  }
  return z;
}

inline std::vector<double> gradient(const std::vector<double>& w, std::size_t d,
                                    std::size_t c, const Batch& batch) {
  std::vector<double> g(w.size(), 0.0);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto x = batch.features.row(i);
    auto p = softmax(logits(w, d, c, x));
    p[static_cast<std::size_t>(batch.labels[i])] -= 1.0;
    for (std::size_t k = 0; k < c; ++k) {
      for (std::size_t j = 0; j < d; ++j) {
        g[k * d + j] += inv * p[k] * x[j];
      }
      g[c * d + k] += inv * p[k];
    }
  }
  return g;
}

inline double accuracy(const std::vector<double>& w, std::size_t d, std::size_t c,
                       const Batch& batch) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto z = logits(w, d, c, batch.features.row(i));
    const auto best = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    hits += best == batch.labels[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(batch.size());
}

// Plain full-batch gradient descent on pooled data.
inline std::vector<double> centralized_gd(std::vector<double> w, std::size_t d,
                                          std::size_t c, const Batch& pooled,
                                          double eta, int steps) {
  for (int s = 0; s < steps; ++s) {
    const auto g = gradient(w, d, c, pooled);
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] -= eta * g[i];
    }
  }
  return w;
}

}  // namespace oracle

// Small synchronous/semi-asynchronous run used across suites.
inline saflbench::RunConfig tiny_config() {
  saflbench::RunConfig c;
  c.name = "tiny";
  c.k = 2;
  c.rounds = 5;
  c.local_epochs = 1;
  c.batch_size = 0;
  c.client_lr = {0.5};
  c.data.classes = 3;
  c.data.dim = 4;
  c.data.per_class = 20;
  c.data.spread = 0.3;
  c.partition.scheme = saflbench::PartitionScheme::IidBalanced;
  c.partition.num_clients = 4;
  c.latency_jitter = {0.5};
  return c;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("saflbench_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace testsupport
