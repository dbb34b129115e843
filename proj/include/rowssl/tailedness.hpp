#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "rowssl/numerics.hpp"
#include "rowssl/queue.hpp"

namespace rowssl {

// Unit-norm tailedness prototypes and the kNN density of each one.
struct PrototypeBank {
  Matrix prototypes;  // M x dim
  Vec densities;      // M entries in [-1, 1]
  bool initialized = false;

  std::size_t size() const noexcept { return prototypes.rows(); }
};

// k-means (k = M) on the queue embeddings; centroids re-normalised.
// Densities are left empty; call knn_density afterwards.
PrototypeBank init_prototypes(const QueueSnapshot& queue, std::size_t num_prototypes, std::uint64_t seed);

// Rank-weighted mean cosine similarity of each prototype to its K nearest
// queue entries: weights K (closest) down to 1. Equal similarities keep
// the older entry first.
Vec knn_density(const PrototypeBank& bank, const QueueSnapshot& queue, std::size_t k);

// Index of the most similar prototype for each key (ties -> lowest index).
std::vector<std::size_t> nearest_prototypes(const Matrix& keys, const PrototypeBank& bank);

// s_i = density of the prototype nearest to key i.
Vec tailedness_scores(const Matrix& keys, const PrototypeBank& bank);

// m_j <- normalize(lambda m_j + (1 - lambda) mean(U_j)) for every non-empty
// partition U_j of the queue, then densities are recomputed with k neighbours.
void update_prototypes(PrototypeBank& bank, const QueueSnapshot& queue, double lambda_tail, std::size_t k);

// Per-class bounded FIFO of tailedness scores.
class ClassTailQueues {
 public:
  ClassTailQueues() = default;
  ClassTailQueues(std::size_t num_classes, std::size_t cap);

  std::size_t num_classes() const noexcept { return queues_.size(); }
  std::size_t cap() const noexcept { return cap_; }
  const std::deque<double>& scores(std::size_t c) const { return queues_.at(c); }

  // Score i goes to the queue of labels[i]; labels must lie in [0, C).
  void update(std::span<const double> scores, std::span<const int> labels);
  void clear();

 private:
  std::size_t cap_ = 0;
  std::vector<std::deque<double>> queues_;
};

// Population standard deviation of each class queue; 0 for fewer than two scores.
Vec class_uncertainty(const ClassTailQueues& queues);

}  // namespace rowssl
