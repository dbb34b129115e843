#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "rowssl/numerics.hpp"

namespace rowssl {

inline constexpr int kUnlabeled = -1;

// Immutable copy of queue contents, oldest entry first.
struct QueueSnapshot {
  Matrix embeddings;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
};

// Fixed-capacity FIFO of unit-norm key embeddings and their labels
// (kUnlabeled for keys of unlabeled samples).
class FeatureQueue {
 public:
  FeatureQueue() = default;
  FeatureQueue(std::size_t capacity, std::size_t dim);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return size_; }
  bool full() const noexcept { return size_ == capacity_; }
  bool empty() const noexcept { return size_ == 0; }

  // Appends rows in order, evicting the oldest entries beyond capacity.
  // Rows must be unit-norm within 1e-6.
  void push_batch(const Matrix& embeddings, std::span<const int> labels);
  void push(std::span<const double> embedding, int label);
  void clear();

  QueueSnapshot snapshot() const;

 private:
  std::size_t capacity_ = 0;
  std::size_t dim_ = 0;
  std::size_t head_ = 0;  // slot of the oldest entry
  std::size_t size_ = 0;
  Matrix storage_;
  std::vector<int> labels_;
};

}  // namespace rowssl
