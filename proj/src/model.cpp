#include "saflbench/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "saflbench/error.hpp"
#include "saflbench/rng.hpp"

namespace saflbench {
namespace {

void require_same_spec(const ModelSpec& a, const ModelSpec& b,
                       const char* what) {
  if (!(a == b)) {
    throw DimensionError(std::string(what) + ": spec mismatch (" +
                         a.describe() + " vs " + b.describe() + ")");
  }
}

void check_batch(const ModelSpec& spec, const Batch& batch) {
  if (batch.size() == 0) {
    throw DimensionError("batch is empty");
  }
  if (batch.features.rows != batch.labels.size()) {
    throw DimensionError("batch has " + std::to_string(batch.features.rows) +
                         " feature rows but " +
                         std::to_string(batch.labels.size()) + " labels");
  }
  if (batch.features.cols != static_cast<std::size_t>(spec.input_dim)) {
    throw DimensionError("batch width " + std::to_string(batch.features.cols) +
                         " does not match model input_dim " +
                         std::to_string(spec.input_dim));
  }
  for (int label : batch.labels) {
    if (label < 0 || label >= spec.num_classes) {
      throw DimensionError("label " + std::to_string(label) +
                           " outside [0, " + std::to_string(spec.num_classes) +
                           ")");
    }
  }
}

// Views into the flat vector for one dense layer: out = W x + b.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

struct Layout {
  DenseLayer first;
  DenseLayer second;  // Mlp only
  bool hidden = false;
};

Layout layout_of(const ModelSpec& spec) {
  const auto d = static_cast<std::size_t>(spec.input_dim);
  const auto c = static_cast<std::size_t>(spec.num_classes);
  Layout layout;
  if (spec.architecture == Architecture::SoftmaxLinear) {
    layout.first = {d, c, 0, d * c};
    return layout;
  }
  const auto h = static_cast<std::size_t>(spec.hidden_width);
  layout.hidden = true;
  layout.first = {d, h, 0, d * h};
  layout.second = {h, c, d * h + h, d * h + h + h * c};
  return layout;
}

void dense_forward(const DenseLayer& layer, std::span<const double> w,
                   std::span<const double> x, std::span<double> out) {
  for (std::size_t o = 0; o < layer.out; ++o) {
    const double* row = w.data() + layer.weight_offset + o * layer.in;
    double acc = w[layer.bias_offset + o];
    for (std::size_t i = 0; i < layer.in; ++i) {
      acc += row[i] * x[i];
    }
    out[o] = acc;
  }
}

// Stable softmax in place; returns log-sum-exp of the input logits.
double softmax_inplace(std::span<double> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& z : logits) {
    z = std::exp(z - peak);
    total += z;
  }
  for (double& z : logits) {
    z /= total;
  }
  return peak + std::log(total);
}

std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best]) {
      best = k;
    }
  }
  return best;
}

}  // namespace

ModelSpec ModelSpec::softmax_linear(int input_dim, int num_classes) {
  ModelSpec spec{Architecture::SoftmaxLinear, 0, input_dim, num_classes};
  spec.validate();
  return spec;
}

ModelSpec ModelSpec::mlp(int hidden_width, int input_dim, int num_classes) {
  ModelSpec spec{Architecture::Mlp, hidden_width, input_dim, num_classes};
  spec.validate();
  return spec;
}

std::size_t ModelSpec::parameter_count() const {
  const auto d = static_cast<std::size_t>(input_dim);
  const auto c = static_cast<std::size_t>(num_classes);
  if (architecture == Architecture::SoftmaxLinear) {
    return d * c + c;
  }
  const auto h = static_cast<std::size_t>(hidden_width);
  return d * h + h + h * c + c;
}

void ModelSpec::validate() const {
  if (input_dim < 1) {
    throw DimensionError("input_dim must be positive");
  }
  if (num_classes < 2) {
    throw DimensionError("num_classes must be at least 2");
  }
  if (architecture == Architecture::Mlp && hidden_width < 1) {
    throw DimensionError("mlp hidden_width must be positive");
  }
}

std::string ModelSpec::describe() const {
  std::string out = architecture == Architecture::SoftmaxLinear
                        ? "softmax_linear"
                        : "mlp(h=" + std::to_string(hidden_width) + ")";
  return out + " d=" + std::to_string(input_dim) +
         " c=" + std::to_string(num_classes);
}

ParamVector::ParamVector(const ModelSpec& spec)
    : spec_(spec), values_(spec.parameter_count(), 0.0) {}

ParamVector::ParamVector(const ModelSpec& spec, std::vector<double> values)
    : spec_(spec), values_(std::move(values)) {
  if (values_.size() != spec_.parameter_count()) {
    throw DimensionError("parameter vector has " +
                         std::to_string(values_.size()) + " entries, " +
                         spec_.describe() + " needs " +
                         std::to_string(spec_.parameter_count()));
  }
}

ParamVector& ParamVector::add_scaled(const ParamVector& other, double scale) {
  require_same_spec(spec_, other.spec_, "add_scaled");
  for (std::size_t k = 0; k < values_.size(); ++k) {
    values_[k] += scale * other.values_[k];
  }
  return *this;
}

ParamVector& ParamVector::scale(double factor) noexcept {
  for (double& v : values_) {
    v *= factor;
  }
  return *this;
}

bool ParamVector::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

double ParamVector::l2_norm() const noexcept {
  double sum = 0.0;
  for (double v : values_) {
    sum += v * v;
  }
  return std::sqrt(sum);
}

ParamVector init_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector params(spec);
  SeededRng rng(seed, 0x696e6974ull);  // "init"
  const Layout layout = layout_of(spec);
  auto fill = [&](const DenseLayer& layer) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (std::size_t k = 0; k < layer.in * layer.out; ++k) {
      params[layer.weight_offset + k] = (2.0 * rng.uniform() - 1.0) * bound;
    }
  };
  fill(layout.first);
  if (layout.hidden) {
    fill(layout.second);
  }
  return params;
}

EvalResult forward_eval(const ParamVector& params, const Batch& batch) {
  const ModelSpec& spec = params.spec();
  check_batch(spec, batch);
  const Layout layout = layout_of(spec);
  const auto w = params.values();

  std::vector<double> hidden(layout.hidden ? layout.first.out : 0);
  std::vector<double> logits(static_cast<std::size_t>(spec.num_classes));
  double loss_sum = 0.0;
  std::size_t correct = 0;

  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto x = batch.features.row(n);
    if (layout.hidden) {
      dense_forward(layout.first, w, x, hidden);
      for (double& a : hidden) {
        a = a > 0.0 ? a : 0.0;
      }
      dense_forward(layout.second, w, hidden, logits);
    } else {
      dense_forward(layout.first, w, x, logits);
    }
    const auto label = static_cast<std::size_t>(batch.labels[n]);
    if (argmax_lowest(logits) == label) {
      ++correct;
    }
    const double z_label = logits[label];
    const double lse = softmax_inplace(logits);
    loss_sum += lse - z_label;
  }
  return {loss_sum / static_cast<double>(batch.size()), correct};
}

ParamVector backward(const ParamVector& params, const Batch& batch) {
  const ModelSpec& spec = params.spec();
  check_batch(spec, batch);
  const Layout layout = layout_of(spec);
  const auto w = params.values();
  ParamVector grad(spec);
  auto g = grad.values();

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> hidden(layout.hidden ? layout.first.out : 0);
  std::vector<double> hidden_delta(hidden.size());
  std::vector<double> delta(static_cast<std::size_t>(spec.num_classes));

  // Accumulate dL/dW += delta (outer) input for one dense layer.
  auto accumulate = [&](const DenseLayer& layer, std::span<const double> input,
                        std::span<const double> out_delta) {
    for (std::size_t o = 0; o < layer.out; ++o) {
      double* row = g.data() + layer.weight_offset + o * layer.in;
      const double dz = out_delta[o];
      for (std::size_t i = 0; i < layer.in; ++i) {
        row[i] += dz * input[i];
      }
      g[layer.bias_offset + o] += dz;
    }
  };

  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto x = batch.features.row(n);
    if (layout.hidden) {
      dense_forward(layout.first, w, x, hidden);
      for (double& a : hidden) {
        a = a > 0.0 ? a : 0.0;
      }
      dense_forward(layout.second, w, hidden, delta);
    } else {
      dense_forward(layout.first, w, x, delta);
    }
    softmax_inplace(delta);
    delta[static_cast<std::size_t>(batch.labels[n])] -= 1.0;
    for (double& dz : delta) {
      dz *= inv_n;
    }

    if (!layout.hidden) {
      accumulate(layout.first, x, delta);
      continue;
    }
    accumulate(layout.second, hidden, delta);
    const DenseLayer& top = layout.second;
    for (std::size_t j = 0; j < top.in; ++j) {
      double back = 0.0;
      if (hidden[j] > 0.0) {
        for (std::size_t o = 0; o < top.out; ++o) {
          back += w[top.weight_offset + o * top.in + j] * delta[o];
        }
      }
      hidden_delta[j] = back;
    }
    accumulate(layout.first, x, hidden_delta);
  }
  return grad;
}

ParamVector sgd_step(const ParamVector& params, const ParamVector& grad,
                     double eta) {
  require_same_spec(params.spec(), grad.spec(), "sgd_step");
  ParamVector out = params;
  auto o = out.values();
  const auto gv = grad.values();
  for (std::size_t k = 0; k < o.size(); ++k) {
    o[k] -= eta * gv[k];
  }
  return out;
}

ParamVector numerical_gradient(const ParamVector& params, const Batch& batch,
                               double epsilon) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw DimensionError("numerical_gradient epsilon must lie in [1e-7, 1e-3]");
  }
  ParamVector probe = params;
  ParamVector grad(params.spec());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double original = params[k];
    probe[k] = original + epsilon;
    const double up = forward_eval(probe, batch).loss;
    probe[k] = original - epsilon;
    const double down = forward_eval(probe, batch).loss;
    probe[k] = original;
    grad[k] = (up - down) / (2.0 * epsilon);
  }
  return grad;
}

ParamVector clip_gradient(const ParamVector& grad, double max_norm) {
  if (!(max_norm > 0.0)) {
    throw DimensionError("clip max_norm must be positive");
  }
  const double norm = grad.l2_norm();
  if (!(norm > max_norm)) {
    return grad;
  }
  ParamVector out = grad;
  out.scale(max_norm / norm);
  // Rounding can leave the result a few ulps outside the ball; pull it in so
  // that a second clip is a no-op.
  while (out.l2_norm() > max_norm) {
    out.scale(1.0 - 0x1.0p-52);
  }
  return out;
}

}  // namespace saflbench
