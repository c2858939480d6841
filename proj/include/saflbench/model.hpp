#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace saflbench {

enum class Architecture { SoftmaxLinear, Mlp };

// Architecture descriptor. Parameter layout is fixed by the fields:
//   SoftmaxLinear: W[c x d] row-major, then b[c].
//   Mlp:           W1[h x d], b1[h], W2[c x h], b2[c]; ReLU hidden layer.
struct ModelSpec {
  Architecture architecture = Architecture::SoftmaxLinear;
  int hidden_width = 0;  // Mlp only
  int input_dim = 1;
  int num_classes = 2;

  static ModelSpec softmax_linear(int input_dim, int num_classes);
  static ModelSpec mlp(int hidden_width, int input_dim, int num_classes);

  std::size_t parameter_count() const;
  // Throws DimensionError when a field is out of range.
  void validate() const;
  std::string describe() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// Flat parameter (or gradient) vector tagged with the architecture it
// belongs to. Arithmetic between vectors of different specs throws.
class ParamVector {
 public:
  // Zero-filled vector of parameter_count(spec) entries.
  explicit ParamVector(const ModelSpec& spec);
  ParamVector(const ModelSpec& spec, std::vector<double> values);

  const ModelSpec& spec() const noexcept { return spec_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  // this += scale * other
  ParamVector& add_scaled(const ParamVector& other, double scale);
  ParamVector& scale(double factor) noexcept;

  bool all_finite() const noexcept;
  double l2_norm() const noexcept;

  // Bitwise equality of spec and every value.
  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  ModelSpec spec_;
  std::vector<double> values_;
};

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<double> row(std::size_t i) noexcept {
    return {data.data() + i * cols, cols};
  }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data.data() + i * cols, cols};
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct Batch {
  Matrix features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

struct EvalResult {
  double loss = 0.0;  // mean cross-entropy; may be non-finite
  std::size_t correct = 0;
};

// Weights ~ U(-a, a) with a = 1/sqrt(fan_in); biases zero.
ParamVector init_model(const ModelSpec& spec, std::uint64_t seed);

// Mean cross-entropy and argmax hits (ties resolve to the lowest class).
EvalResult forward_eval(const ParamVector& params, const Batch& batch);

// Gradient of the mean cross-entropy with respect to every parameter.
ParamVector backward(const ParamVector& params, const Batch& batch);

ParamVector sgd_step(const ParamVector& params, const ParamVector& grad,
                     double eta);

// Central differences of forward_eval's loss; epsilon in [1e-7, 1e-3].
ParamVector numerical_gradient(const ParamVector& params, const Batch& batch,
                               double epsilon);

// Rescales grad onto the L2 ball of radius max_norm when it lies outside.
ParamVector clip_gradient(const ParamVector& grad, double max_norm);

}  // namespace saflbench
