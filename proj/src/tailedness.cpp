#include "rowssl/tailedness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rowssl/errors.hpp"

namespace rowssl {

PrototypeBank init_prototypes(const QueueSnapshot& queue, std::size_t num_prototypes, std::uint64_t seed) {
  if (num_prototypes == 0) throw InvalidArgument("init_prototypes: need at least one prototype");
  if (queue.size() < num_prototypes)
    throw StateError("init_prototypes: queue holds " + std::to_string(queue.size()) + " entries, need " +
                     std::to_string(num_prototypes));
  const KMeansResult km = kmeans(queue.embeddings, num_prototypes, seed);
  PrototypeBank bank;
  bank.prototypes = Matrix(num_prototypes, queue.embeddings.cols());
  for (std::size_t j = 0; j < num_prototypes; ++j) {
    const Vec unit = l2_normalize(km.centroids.row(j));
    std::copy(unit.begin(), unit.end(), bank.prototypes.row(j).begin());
  }
  bank.initialized = true;
  return bank;
}

Vec knn_density(const PrototypeBank& bank, const QueueSnapshot& queue, std::size_t k) {
  if (k == 0) throw InvalidArgument("knn_density: K must be at least 1");
  if (queue.size() < k)
    throw StateError("knn_density: queue holds " + std::to_string(queue.size()) + " entries, K = " +
                     std::to_string(k));
  const std::size_t n = queue.size();
  const double weight_total = static_cast<double>(k) * static_cast<double>(k + 1) / 2.0;
  Vec densities(bank.size());
  Vec sims(n);
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < bank.size(); ++j) {
    auto m = bank.prototypes.row(j);
    for (std::size_t i = 0; i < n; ++i) sims[i] = dot(m, queue.embeddings.row(i));
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) { return sims[a] > sims[b] || (sims[a] == sims[b] && a < b); });
    double acc = 0.0;
    for (std::size_t r = 0; r < k; ++r) acc += static_cast<double>(k - r) * sims[order[r]];
    densities[j] = std::clamp(acc / weight_total, -1.0, 1.0);
  }
  return densities;
}

std::vector<std::size_t> nearest_prototypes(const Matrix& keys, const PrototypeBank& bank) {
  if (!bank.initialized) throw StateError("tailedness: prototype bank is not initialized");
  if (keys.rows() > 0 && keys.cols() != bank.prototypes.cols())
    throw InvalidArgument("tailedness: key dimension does not match prototypes");
  std::vector<std::size_t> nearest(keys.rows());
  for (std::size_t i = 0; i < keys.rows(); ++i) {
    std::size_t best = 0;
    double best_sim = dot(bank.prototypes.row(0), keys.row(i));
    for (std::size_t j = 1; j < bank.size(); ++j) {
      const double s = dot(bank.prototypes.row(j), keys.row(i));
      if (s > best_sim) {
        best_sim = s;
        best = j;
      }
    }
    nearest[i] = best;
  }
  return nearest;
}

Vec tailedness_scores(const Matrix& keys, const PrototypeBank& bank) {
  const auto nearest = nearest_prototypes(keys, bank);
  if (bank.densities.size() != bank.size()) throw StateError("tailedness: densities are stale");
  Vec scores(keys.rows());
  for (std::size_t i = 0; i < keys.rows(); ++i) scores[i] = bank.densities[nearest[i]];
  return scores;
}

void update_prototypes(PrototypeBank& bank, const QueueSnapshot& queue, double lambda_tail, std::size_t k) {
  if (lambda_tail < 0.0 || lambda_tail > 1.0) throw InvalidArgument("update_prototypes: lambda_tail must be in [0, 1]");
  const auto nearest = nearest_prototypes(queue.embeddings, bank);
  const std::size_t dim = bank.prototypes.cols();
  Matrix sums(bank.size(), dim, 0.0);
  std::vector<std::size_t> counts(bank.size(), 0);
  for (std::size_t i = 0; i < queue.size(); ++i) {
    auto dst = sums.row(nearest[i]);
    auto src = queue.embeddings.row(i);
    for (std::size_t c = 0; c < dim; ++c) dst[c] += src[c];
    ++counts[nearest[i]];
  }
  Vec blended(dim);
  for (std::size_t j = 0; j < bank.size(); ++j) {
    if (counts[j] == 0 || lambda_tail == 1.0) continue;
    auto m = bank.prototypes.row(j);
    auto s = sums.row(j);
    const double inv = 1.0 / static_cast<double>(counts[j]);
    for (std::size_t c = 0; c < dim; ++c) blended[c] = lambda_tail * m[c] + (1.0 - lambda_tail) * (s[c] * inv);
    const Vec unit = l2_normalize(blended);
    std::copy(unit.begin(), unit.end(), m.begin());
  }
  bank.densities = knn_density(bank, queue, k);
}

// ---------------------------------------------------------------------------

ClassTailQueues::ClassTailQueues(std::size_t num_classes, std::size_t cap) : cap_(cap), queues_(num_classes) {
  if (cap == 0) throw InvalidArgument("ClassTailQueues: cap must be positive");
}

void ClassTailQueues::update(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("ClassTailQueues::update: length mismatch");
  for (int label : labels)
    if (label < 0 || static_cast<std::size_t>(label) >= queues_.size())
      throw InvalidArgument("ClassTailQueues::update: label " + std::to_string(label) + " outside [0, " +
                            std::to_string(queues_.size()) + ")");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw InvalidArgument("ClassTailQueues::update: non-finite score");
    auto& q = queues_[static_cast<std::size_t>(labels[i])];
    q.push_back(scores[i]);
    if (q.size() > cap_) q.pop_front();
  }
}

void ClassTailQueues::clear() {
  for (auto& q : queues_) q.clear();
}

Vec class_uncertainty(const ClassTailQueues& queues) {
  Vec u(queues.num_classes(), 0.0);
  for (std::size_t c = 0; c < u.size(); ++c) {
    const auto& q = queues.scores(c);
    if (q.size() < 2) continue;
    double mean = 0.0;
    for (double s : q) mean += s;
    mean /= static_cast<double>(q.size());
    double var = 0.0;
    for (double s : q) var += (s - mean) * (s - mean);
    u[c] = std::sqrt(var / static_cast<double>(q.size()));
  }
  return u;
}

}  // namespace rowssl
