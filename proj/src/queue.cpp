#include "rowssl/queue.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rowssl/errors.hpp"

namespace rowssl {

FeatureQueue::FeatureQueue(std::size_t capacity, std::size_t dim)
    : capacity_(capacity), dim_(dim), storage_(capacity, dim), labels_(capacity, kUnlabeled) {
  if (capacity == 0 || dim == 0) throw InvalidArgument("FeatureQueue: capacity and dimension must be positive");
}

void FeatureQueue::push(std::span<const double> embedding, int label) {
  if (embedding.size() != dim_) throw InvalidArgument("FeatureQueue::push: dimension mismatch");
  const double n = norm(embedding);
  if (!(std::abs(n - 1.0) <= 1e-6))
    throw InvalidArgument("FeatureQueue::push: embedding norm " + std::to_string(n) + " is not 1");
  if (label < kUnlabeled) throw InvalidArgument("FeatureQueue::push: invalid label");
  std::size_t slot;
  if (size_ < capacity_) {
    slot = (head_ + size_) % capacity_;
    ++size_;
  } else {
    slot = head_;
    head_ = (head_ + 1) % capacity_;
  }
  std::copy(embedding.begin(), embedding.end(), storage_.row(slot).begin());
  labels_[slot] = label;
}

void FeatureQueue::push_batch(const Matrix& embeddings, std::span<const int> labels) {
  if (embeddings.rows() != labels.size()) throw InvalidArgument("FeatureQueue::push_batch: label count mismatch");
  // Validate the whole batch first so a bad row leaves the queue untouched.
  for (std::size_t r = 0; r < embeddings.rows(); ++r) {
    if (embeddings.cols() != dim_) throw InvalidArgument("FeatureQueue::push_batch: dimension mismatch");
    const double n = norm(embeddings.row(r));
    if (!(std::abs(n - 1.0) <= 1e-6))
      throw InvalidArgument("FeatureQueue::push_batch: row " + std::to_string(r) + " has norm " + std::to_string(n));
  }
  for (std::size_t r = 0; r < embeddings.rows(); ++r) push(embeddings.row(r), labels[r]);
}

void FeatureQueue::clear() {
  head_ = 0;
  size_ = 0;
}

QueueSnapshot FeatureQueue::snapshot() const {
  QueueSnapshot snap;
  snap.embeddings = Matrix(size_, dim_);
  snap.labels.resize(size_);
  for (std::size_t i = 0; i < size_; ++i) {
    const std::size_t slot = (head_ + i) % capacity_;
    std::copy(storage_.row(slot).begin(), storage_.row(slot).end(), snap.embeddings.row(i).begin());
    snap.labels[i] = labels_[slot];
  }
  return snap;
}

}  // namespace rowssl
