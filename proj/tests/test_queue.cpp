#include <gtest/gtest.h>

#include <random>

#include "rowssl/errors.hpp"
#include "rowssl/queue.hpp"
#include "test_util.hpp"

using namespace rowssl;

namespace {

Vec basis(std::size_t d, std::size_t i) {
  Vec v(d, 0.0);
  v[i] = 1.0;
  return v;
}

}  // namespace

TEST(FeatureQueue, KeepsTheLastCapacityItemsInOrder) {
  FeatureQueue q(3, 5);
  for (int i = 0; i < 5; ++i) q.push(basis(5, static_cast<std::size_t>(i)), i);
  const QueueSnapshot s = q.snapshot();
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s.labels, (std::vector<int>{2, 3, 4}));
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(s.embeddings(r, r + 2), 1.0);
  EXPECT_TRUE(q.full());
}

TEST(FeatureQueue, PartialFillKeepsEverything) {
  FeatureQueue q(10, 2);
  q.push(Vec{1.0, 0.0}, kUnlabeled);
  q.push(Vec{0.0, 1.0}, 1);
  EXPECT_EQ(q.size(), 2u);
  EXPECT_FALSE(q.full());
  EXPECT_EQ(q.snapshot().labels, (std::vector<int>{kUnlabeled, 1}));
}

TEST(FeatureQueue, OversizedBatchKeepsItsTail) {
  FeatureQueue q(2, 4);
  Matrix batch;
  for (std::size_t i = 0; i < 4; ++i) batch.append_row(basis(4, i));
  const std::vector<int> labels{0, 1, 2, 3};
  q.push_batch(batch, labels);
  const QueueSnapshot s = q.snapshot();
  EXPECT_EQ(s.labels, (std::vector<int>{2, 3}));
  EXPECT_EQ(s.embeddings(0, 2), 1.0);
  EXPECT_EQ(s.embeddings(1, 3), 1.0);
}

TEST(FeatureQueue, SnapshotsAreImmutableCopies) {
  FeatureQueue q(4, 2);
  EXPECT_TRUE(q.snapshot().empty());
  q.push(Vec{1.0, 0.0}, 0);
  const QueueSnapshot before = q.snapshot();
  const QueueSnapshot again = q.snapshot();
  EXPECT_EQ(before.embeddings, again.embeddings);
  EXPECT_EQ(before.labels, again.labels);
  q.push(Vec{0.0, 1.0}, 1);
  EXPECT_EQ(before.size(), 1u);
  EXPECT_EQ(before.labels, std::vector<int>{0});
}

TEST(FeatureQueue, RejectsBadInput) {
  EXPECT_THROW(FeatureQueue(0, 3), InvalidArgument);
  FeatureQueue q(4, 2);
  EXPECT_THROW(q.push(Vec{1.0, 1.0}, 0), InvalidArgument);
  EXPECT_THROW(q.push(Vec{1.0 + 2e-6, 0.0}, 0), InvalidArgument);
  EXPECT_NO_THROW(q.push(Vec{1.0 + 5e-7, 0.0}, 0));
  EXPECT_THROW(q.push(Vec{1.0, 0.0, 0.0}, 0), InvalidArgument);
  EXPECT_THROW(q.push(Vec{1.0, 0.0}, -2), InvalidArgument);
  Matrix one;
  one.append_row(Vec{0.0, 1.0});
  EXPECT_THROW(q.push_batch(one, std::vector<int>{0, 1}), InvalidArgument);
}

TEST(FeatureQueue, ClearEmpties) {
  FeatureQueue q(2, 2);
  q.push(Vec{1.0, 0.0}, 0);
  q.clear();
  EXPECT_TRUE(q.empty());
  q.push(Vec{0.0, 1.0}, 3);
  EXPECT_EQ(q.snapshot().labels, std::vector<int>{3});
}

TEST(FeatureQueueProperty, MatchesReferenceFifo) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t cap = 1 + rng() % 9;
    FeatureQueue q(cap, 3);
    std::vector<int> pushed;
    std::vector<Vec> vectors;
    const int ops = static_cast<int>(rng() % 12);
    for (int op = 0; op < ops; ++op) {
      const std::size_t n = rng() % 6;
      Matrix batch;
      std::vector<int> labels;
      for (std::size_t i = 0; i < n; ++i) {
        const Vec v = rowssl::testing::random_unit(3, rng);
        batch.append_row(v);
        labels.push_back(static_cast<int>(pushed.size()));
        pushed.push_back(labels.back());
        vectors.push_back(v);
      }
      if (n > 0) q.push_batch(batch, labels);
    }
    const QueueSnapshot s = q.snapshot();
    const std::size_t expect = std::min(cap, pushed.size());
    ASSERT_EQ(s.size(), expect);
    for (std::size_t i = 0; i < expect; ++i) {
      const std::size_t src = pushed.size() - expect + i;
      EXPECT_EQ(s.labels[i], pushed[src]);
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(s.embeddings(i, c), vectors[src][c]);
    }
  }
}
