#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace rowssl {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  void append_row(std::span<const double> values);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Dot product with a fixed summation order, so runs are bit-reproducible.
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);
double squared_distance(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> v);

// Unit-norm copy of v. A zero vector maps to e1 and sets *was_zero; a vector
// whose norm overflows maps to NaN entries.
Vec l2_normalize(std::span<const double> v, bool* was_zero = nullptr);

// Pullback of a gradient through y = v / |v|:  dv = (g - (g.y) y) / |v|.
Vec l2_normalize_backward(std::span<const double> v, std::span<const double> grad_unit);

// softmax(logits / tau) with max-subtraction. Throws InvalidArgument for tau <= 0.
Vec softmax_temp(std::span<const double> logits, double tau);

// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> v);

// splitmix64 finalizer chained over the given words; used to derive
// independent deterministic streams from (seed, id, step, ...).
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> words);

// ---------------------------------------------------------------------------
// Small trainable network: affine layers with ReLU between them (none after
// the last). Gradients are accumulated into buffers shaped like the weights.

struct DenseLayer {
  Matrix weight;  // out x in
  Vec bias;
  Matrix weight_grad;
  Vec bias_grad;
};

// Per-layer inputs recorded by a forward pass, consumed by backward().
struct ForwardTrace {
  std::vector<Vec> inputs;
};

struct NetPass {
  Vec output;
  Vec input_gradient;
};

class SmallNet {
 public:
  SmallNet() = default;
  // widths = {in, hidden..., out}; He-normal weights, zero bias.
  SmallNet(const std::vector<std::size_t>& widths, std::uint64_t seed);

  // Single square layer initialised to the identity map plus N(0, jitter^2) noise.
  static SmallNet near_identity(std::size_t dim, double jitter, std::uint64_t seed);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t num_layers() const noexcept { return layers_.size(); }
  std::size_t num_parameters() const;

  Vec forward(std::span<const double> x) const;
  Vec forward(std::span<const double> x, ForwardTrace& trace) const;
  // Accumulates parameter gradients; returns gradient wrt the input.
  Vec backward(const ForwardTrace& trace, std::span<const double> upstream);
  NetPass forward_backward(std::span<const double> x, std::span<const double> upstream);

  void zero_grad();
  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;
  std::vector<std::span<double>> gradients();
  std::vector<std::span<const double>> gradients() const;

  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

 private:
  std::vector<DenseLayer> layers_;
};

// ---------------------------------------------------------------------------
// Cosine classifier: logit_c = (w_c / |w_c|) . (z / |z|), each in [-1, 1].

class CosineClassifier {
 public:
  CosineClassifier() = default;
  CosineClassifier(std::size_t num_classes, std::size_t dim, std::uint64_t seed);

  std::size_t num_classes() const noexcept { return weight_.rows(); }
  std::size_t dim() const noexcept { return weight_.cols(); }

  Vec logits(std::span<const double> z) const;
  // Accumulates weight gradients for upstream dL/dlogits; returns dL/dz.
  Vec backward(std::span<const double> z, std::span<const double> upstream);

  void zero_grad();
  Matrix& weight() noexcept { return weight_; }
  const Matrix& weight() const noexcept { return weight_; }
  Matrix& weight_grad() noexcept { return weight_grad_; }
  const Matrix& weight_grad() const noexcept { return weight_grad_; }

  std::vector<std::span<double>> parameters() { return {weight_.flat()}; }
  std::vector<std::span<const double>> parameters() const { return {weight_.flat()}; }
  std::vector<std::span<double>> gradients() { return {weight_grad_.flat()}; }

 private:
  Matrix weight_;
  Matrix weight_grad_;
};

// ---------------------------------------------------------------------------

// SGD with heavy-ball momentum: v <- mu v + g; p <- p - lr v.
class SgdMomentum {
 public:
  SgdMomentum() = default;
  SgdMomentum(double learning_rate, double momentum, std::span<const std::span<double>> params);

  void step(std::span<const std::span<double>> params, std::span<const std::span<double>> grads);

  double learning_rate() const noexcept { return learning_rate_; }
  void set_learning_rate(double lr) noexcept { learning_rate_ = lr; }
  double momentum() const noexcept { return momentum_; }
  std::vector<Vec>& velocity() noexcept { return velocity_; }
  const std::vector<Vec>& velocity() const noexcept { return velocity_; }

 private:
  double learning_rate_ = 0.0;
  double momentum_ = 0.0;
  std::vector<Vec> velocity_;
};

// Half-cosine interpolation from start to end over total_steps; clamps afterwards.
struct CosineSchedule {
  double start = 0.0;
  double end = 0.0;
  std::int64_t total_steps = 0;

  double value(std::int64_t step) const;
};

// target <- momentum * target + (1 - momentum) * source, elementwise.
void ema_params(std::span<const std::span<double>> target,
                std::span<const std::span<const double>> source, double momentum);

// ---------------------------------------------------------------------------

struct KMeansResult {
  Matrix centroids;
  std::vector<std::size_t> assignments;
  double inertia = 0.0;
  std::size_t iterations = 0;
  Vec inertia_history;  // inertia after each assignment step
};

struct KMeansOptions {
  double tolerance = 1e-6;
  std::size_t max_iterations = 300;
  std::size_t restarts = 1;  // independent seedings; the lowest inertia wins
};

// Lloyd's algorithm with greedy k-means++ seeding. Empty clusters take the point
// farthest from its current centroid. Deterministic per seed.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

}  // namespace rowssl
