#include "rowssl/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "rowssl/errors.hpp"

namespace rowssl {

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) throw InvalidArgument("Matrix::append_row: width mismatch");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

// Four interleaved partial sums in a fixed order: deterministic, but not a
// strict left-to-right sum.
double dot(std::span<const double> a, std::span<const double> b) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Vec l2_normalize(std::span<const double> v, bool* was_zero) {
  if (v.empty()) throw InvalidArgument("l2_normalize: empty vector");
  const double n = norm(v);
  if (was_zero) *was_zero = (n == 0.0);
  Vec out(v.size(), 0.0);
  if (n == 0.0) {
    out[0] = 1.0;
    return out;
  }
  if (!std::isfinite(n)) return Vec(v.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

Vec l2_normalize_backward(std::span<const double> v, std::span<const double> grad_unit) {
  const double n = norm(v);
  Vec out(v.size(), 0.0);
  if (n == 0.0) return out;
  double proj = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) proj += grad_unit[i] * v[i] / n;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (grad_unit[i] - proj * v[i] / n) / n;
  return out;
}

Vec softmax_temp(std::span<const double> logits, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("softmax_temp: temperature must be positive");
  if (logits.empty()) throw InvalidArgument("softmax_temp: empty logits");
  const double mx = *std::max_element(logits.begin(), logits.end());
  Vec out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - mx) / tau);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> words) {
  std::uint64_t state = 0x9E3779B97F4A7C15ULL;
  for (std::uint64_t w : words) {
    state ^= w + 0x9E3779B97F4A7C15ULL + (state << 6) + (state >> 2);
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    state = z ^ (z >> 31);
  }
  return state;
}

// ---------------------------------------------------------------------------
// SmallNet

SmallNet::SmallNet(const std::vector<std::size_t>& widths, std::uint64_t seed) {
  if (widths.size() < 2) throw InvalidArgument("SmallNet: need at least input and output widths");
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l];
    const std::size_t out = widths[l + 1];
    if (in == 0 || out == 0) throw InvalidArgument("SmallNet: zero layer width");
    std::normal_distribution<double> init(0.0, std::sqrt(2.0 / static_cast<double>(in)));
    DenseLayer layer{Matrix(out, in), Vec(out, 0.0), Matrix(out, in), Vec(out, 0.0)};
    for (double& w : layer.weight.flat()) w = init(rng);
    layers_.push_back(std::move(layer));
  }
}

SmallNet SmallNet::near_identity(std::size_t dim, double jitter, std::uint64_t seed) {
  SmallNet net({dim, dim}, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, jitter);
  auto& w = net.layers_[0].weight;
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = 0; c < dim; ++c) w(r, c) = (r == c ? 1.0 : 0.0) + (jitter > 0 ? noise(rng) : 0.0);
  return net;
}

std::size_t SmallNet::input_dim() const { return layers_.empty() ? 0 : layers_.front().weight.cols(); }
std::size_t SmallNet::output_dim() const { return layers_.empty() ? 0 : layers_.back().weight.rows(); }

std::size_t SmallNet::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.flat().size() + l.bias.size();
  return n;
}

Vec SmallNet::forward(std::span<const double> x) const {
  ForwardTrace unused;
  return forward(x, unused);
}

Vec SmallNet::forward(std::span<const double> x, ForwardTrace& trace) const {
  if (x.size() != input_dim())
    throw InvalidArgument("SmallNet::forward: input has dimension " + std::to_string(x.size()) +
                          ", expected " + std::to_string(input_dim()));
  trace.inputs.clear();
  Vec a(x.begin(), x.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    Vec y(layer.weight.rows());
    for (std::size_t r = 0; r < y.size(); ++r) y[r] = dot(layer.weight.row(r), a) + layer.bias[r];
    if (l + 1 < layers_.size())
      for (double& v : y) v = v > 0.0 ? v : 0.0;
    trace.inputs.push_back(std::move(a));
    a = std::move(y);
  }
  return a;
}

Vec SmallNet::backward(const ForwardTrace& trace, std::span<const double> upstream) {
  if (trace.inputs.size() != layers_.size()) throw InvalidArgument("SmallNet::backward: trace does not match network");
  if (upstream.size() != output_dim()) throw InvalidArgument("SmallNet::backward: upstream gradient shape mismatch");
  Vec g(upstream.begin(), upstream.end());
  for (std::size_t l = layers_.size(); l-- > 0;) {
    auto& layer = layers_[l];
    const Vec& a = trace.inputs[l];
    const std::size_t out = layer.weight.rows();
    const std::size_t in = layer.weight.cols();
    Vec g_in(in, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      const double gr = g[r];
      layer.bias_grad[r] += gr;
      if (gr == 0.0) continue;
      auto wg = layer.weight_grad.row(r);
      auto w = layer.weight.row(r);
      for (std::size_t c = 0; c < in; ++c) {
        wg[c] += gr * a[c];
        g_in[c] += w[c] * gr;
      }
    }
    if (l > 0)
      for (std::size_t c = 0; c < in; ++c)
        if (!(a[c] > 0.0)) g_in[c] = 0.0;
    g = std::move(g_in);
  }
  return g;
}

NetPass SmallNet::forward_backward(std::span<const double> x, std::span<const double> upstream) {
  ForwardTrace trace;
  Vec out = forward(x, trace);
  Vec gin = backward(trace, upstream);
  return {std::move(out), std::move(gin)};
}

void SmallNet::zero_grad() {
  for (auto& l : layers_) {
    std::fill(l.weight_grad.flat().begin(), l.weight_grad.flat().end(), 0.0);
    std::fill(l.bias_grad.begin(), l.bias_grad.end(), 0.0);
  }
}

std::vector<std::span<double>> SmallNet::parameters() {
  std::vector<std::span<double>> out;
  for (auto& l : layers_) {
    out.push_back(l.weight.flat());
    out.push_back(l.bias);
  }
  return out;
}

std::vector<std::span<const double>> SmallNet::parameters() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers_) {
    out.push_back(l.weight.flat());
    out.push_back(l.bias);
  }
  return out;
}

std::vector<std::span<double>> SmallNet::gradients() {
  std::vector<std::span<double>> out;
  for (auto& l : layers_) {
    out.push_back(l.weight_grad.flat());
    out.push_back(l.bias_grad);
  }
  return out;
}

std::vector<std::span<const double>> SmallNet::gradients() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers_) {
    out.push_back(l.weight_grad.flat());
    out.push_back(l.bias_grad);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CosineClassifier

CosineClassifier::CosineClassifier(std::size_t num_classes, std::size_t dim, std::uint64_t seed)
    : weight_(num_classes, dim), weight_grad_(num_classes, dim) {
  if (num_classes == 0 || dim == 0) throw InvalidArgument("CosineClassifier: empty shape");
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  std::uniform_real_distribution<double> init(-bound, bound);
  for (double& w : weight_.flat()) w = init(rng);
}

Vec CosineClassifier::logits(std::span<const double> z) const {
  if (z.size() != dim()) throw InvalidArgument("CosineClassifier::logits: dimension mismatch");
  const double zn = norm(z);
  Vec out(num_classes(), 0.0);
  if (zn == 0.0) return out;
  for (std::size_t c = 0; c < num_classes(); ++c) {
    const double wn = norm(weight_.row(c));
    out[c] = wn == 0.0 ? 0.0 : dot(weight_.row(c), z) / (wn * zn);
  }
  return out;
}

Vec CosineClassifier::backward(std::span<const double> z, std::span<const double> upstream) {
  if (z.size() != dim() || upstream.size() != num_classes())
    throw InvalidArgument("CosineClassifier::backward: shape mismatch");
  const std::size_t d = dim();
  Vec dz(d, 0.0);
  const double zn = norm(z);
  if (zn == 0.0) return dz;
  for (std::size_t c = 0; c < num_classes(); ++c) {
    const double g = upstream[c];
    if (g == 0.0) continue;
    auto w = weight_.row(c);
    const double wn = norm(w);
    if (wn == 0.0) continue;
    const double cosv = dot(w, z) / (wn * zn);
    auto wg = weight_grad_.row(c);
    for (std::size_t i = 0; i < d; ++i) {
      const double zh = z[i] / zn;
      const double wh = w[i] / wn;
      wg[i] += g * (zh - cosv * wh) / wn;
      dz[i] += g * (wh - cosv * zh) / zn;
    }
  }
  return dz;
}

void CosineClassifier::zero_grad() {
  std::fill(weight_grad_.flat().begin(), weight_grad_.flat().end(), 0.0);
}

// ---------------------------------------------------------------------------

SgdMomentum::SgdMomentum(double learning_rate, double momentum, std::span<const std::span<double>> params)
    : learning_rate_(learning_rate), momentum_(momentum) {
  if (learning_rate < 0.0) throw InvalidArgument("SgdMomentum: negative learning rate");
  if (momentum < 0.0 || momentum >= 1.0) throw InvalidArgument("SgdMomentum: momentum must be in [0, 1)");
  for (auto p : params) velocity_.emplace_back(p.size(), 0.0);
}

void SgdMomentum::step(std::span<const std::span<double>> params, std::span<const std::span<double>> grads) {
  if (params.size() != velocity_.size() || grads.size() != velocity_.size())
    throw InvalidArgument("SgdMomentum::step: parameter count mismatch");
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t];
    auto g = grads[t];
    auto& v = velocity_[t];
    if (p.size() != v.size() || g.size() != v.size()) throw InvalidArgument("SgdMomentum::step: shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = momentum_ * v[i] + g[i];
      p[i] -= learning_rate_ * v[i];
    }
  }
}

double CosineSchedule::value(std::int64_t step) const {
  if (total_steps <= 0 || step >= total_steps) return end;
  if (step <= 0) return start;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return end + (start - end) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

void ema_params(std::span<const std::span<double>> target, std::span<const std::span<const double>> source,
                double momentum) {
  if (momentum < 0.0 || momentum > 1.0) throw InvalidArgument("ema_params: momentum must be in [0, 1]");
  if (target.size() != source.size()) throw InvalidArgument("ema_params: parameter count mismatch");
  for (std::size_t t = 0; t < target.size(); ++t) {
    if (target[t].size() != source[t].size()) throw InvalidArgument("ema_params: shape mismatch");
    auto dst = target[t];
    auto src = source[t];
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = momentum * dst[i] + (1.0 - momentum) * src[i];
  }
}

// ---------------------------------------------------------------------------
// k-means

namespace {

// D^2-weighted draw; falls back to the first unchosen point when every
// distance is zero.
std::size_t sample_d2(const Vec& d2, const std::vector<bool>& chosen, std::mt19937_64& rng) {
  const std::size_t n = d2.size();
  double total = 0.0;
  for (double v : d2) total += v;
  if (total > 0.0) {
    std::uniform_real_distribution<double> u(0.0, total);
    const double r = u(rng);
    double acc = 0.0;
    std::size_t last = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      last = i;
      if (acc >= r) return i;
    }
    return last;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!chosen[i]) return i;
  return 0;
}

// Greedy k-means++: each new center is the best of 2 + floor(ln k) D^2 draws
// by resulting potential.
Matrix kmeans_pp_seed(const Matrix& points, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = points.rows();
  const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
  Matrix centers(k, points.cols());
  std::vector<bool> chosen(n, false);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t first = pick(rng);
  chosen[first] = true;
  std::copy(points.row(first).begin(), points.row(first).end(), centers.row(0).begin());
  Vec d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points.row(i), centers.row(0));
  Vec candidate_d2(n);
  Vec best_d2(n);
  for (std::size_t c = 1; c < k; ++c) {
    std::size_t best = n;
    double best_potential = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t cand = sample_d2(d2, chosen, rng);
      double potential = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        candidate_d2[i] = std::min(d2[i], squared_distance(points.row(i), points.row(cand)));
        potential += candidate_d2[i];
      }
      if (potential < best_potential) {
        best_potential = potential;
        best = cand;
        best_d2.swap(candidate_d2);
      }
    }
    chosen[best] = true;
    std::copy(points.row(best).begin(), points.row(best).end(), centers.row(c).begin());
    d2.swap(best_d2);
  }
  return centers;
}

std::size_t nearest(const Matrix& centers, std::span<const double> x, double* dist) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    const double d = squared_distance(centers.row(c), x);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

}  // namespace

namespace {

KMeansResult kmeans_once(const Matrix& points, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  std::mt19937_64 rng(seed);

  KMeansResult result;
  result.centroids = kmeans_pp_seed(points, k, rng);
  result.assignments.assign(n, 0);
  std::vector<double> dist(n);

  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      result.assignments[i] = nearest(result.centroids, points.row(i), &dist[i]);
      ++counts[result.assignments[i]];
    }
    // Repair empty clusters with the worst-fit point of a multi-member cluster.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[result.assignments[i]] < 2) continue;
        if (far == n || dist[i] > dist[far]) far = i;
      }
      --counts[result.assignments[far]];
      result.assignments[far] = c;
      counts[c] = 1;
      dist[far] = 0.0;
      std::copy(points.row(far).begin(), points.row(far).end(), result.centroids.row(c).begin());
    }

    Matrix next(k, d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = next.row(result.assignments[i]);
      auto src = points.row(i);
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      auto row = next.row(c);
      for (double& v : row) v /= static_cast<double>(counts[c]);
      shift = std::max(shift, std::sqrt(squared_distance(row, result.centroids.row(c))));
    }
    result.centroids = std::move(next);

    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      inertia += squared_distance(points.row(i), result.centroids.row(result.assignments[i]));
    result.inertia = inertia;
    result.inertia_history.push_back(inertia);
    result.iterations = it + 1;
    if (shift < options.tolerance) break;
  }
  return result;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
  if (k == 0) throw InvalidArgument("kmeans: k must be at least 1");
  if (k > points.rows())
    throw InvalidArgument("kmeans: k = " + std::to_string(k) + " exceeds number of points " +
                          std::to_string(points.rows()));
  if (options.restarts == 0) throw InvalidArgument("kmeans: restarts must be at least 1");
  KMeansResult best = kmeans_once(points, k, seed, options);
  for (std::size_t r = 1; r < options.restarts; ++r) {
    KMeansResult candidate = kmeans_once(points, k, mix_seed({seed, r}), options);
    if (candidate.inertia < best.inertia) best = std::move(candidate);
  }
  return best;
}

}  // namespace rowssl
