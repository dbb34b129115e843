#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rowssl/data.hpp"
#include "rowssl/numerics.hpp"
#include "rowssl/trainer.hpp"

namespace rowssl {

struct Assignment {
  std::vector<int> row_to_col;  // -1 when a row is matched to padding
  double total = 0.0;           // sum of matched profits in row order
};

// Maximum-profit assignment (Kuhn-Munkres). Rectangular inputs are padded
// with zero profit. Among optimal assignments the lexicographically smallest
// row->column vector is returned.
Assignment hungarian(const Matrix& profit);

struct ClusteringAccuracy {
  double accuracy = 0.0;
  std::vector<int> matching;  // cluster -> class, -1 when unmatched
};

// Hungarian-matched accuracy of cluster ids against class labels.
ClusteringAccuracy clustering_accuracy(std::span<const int> predictions, std::span<const int> labels,
                                       std::size_t num_clusters, std::size_t num_classes);

// Maps cluster ids through a matching; unmatched clusters become -1.
std::vector<int> apply_matching(std::span<const int> predictions, std::span<const int> matching);

// Recall of each class; NaN for classes absent from `labels`.
Vec per_class_recall(std::span<const int> mapped, std::span<const int> labels, std::size_t num_classes);

// Mean recall over the classes of `subset` that occur in `labels`.
double balanced_accuracy(std::span<const int> mapped, std::span<const int> labels, std::span<const int> subset);

enum class EvalSet { TrainUnlabeled, Test };

struct EvalProtocol {
  EvalSet set = EvalSet::Test;
  bool recluster = false;
  bool rematch = false;

  std::string name() const;
  static EvalProtocol parse(const std::string& name);
  void validate() const;
};

// Groups in report order.
enum Group : std::size_t { kAll, kOld, kNew, kKnownMany, kKnownMedian, kKnownFew, kNovelMany, kNovelMedian, kNovelFew };
inline constexpr std::size_t kNumGroups = 9;
inline constexpr std::array<const char*, kNumGroups> kGroupNames = {"All",   "Old",  "New",  "KMany", "KMed",
                                                                    "KFew",  "UMany", "UMed", "UFew"};

// Many/Median/Few group (0/1/2) of every class: known and novel classes are
// each sorted by training count (descending, ties by index) and cut into
// thirds, remainders going to the earlier groups.
std::vector<int> frequency_groups(std::span<const std::size_t> train_counts, int num_old, int num_new);

struct GroupMetrics {
  std::array<double, kNumGroups> acc{};   // sample accuracy within the group's classes
  std::array<double, kNumGroups> bacc{};  // mean per-class recall within the group
};

// NaN marks groups with no evaluated classes.
GroupMetrics group_metrics(std::span<const int> mapped, std::span<const int> labels,
                           std::span<const std::size_t> train_counts, int num_old, int num_new);

struct EvalReport {
  std::string protocol;
  GroupMetrics metrics;
  Vec per_class_recall;
  std::vector<int> matching;  // cluster/head -> class used for this report
  std::size_t num_samples = 0;

  double acc(Group g) const { return metrics.acc[g]; }
  double bacc(Group g) const { return metrics.bacc[g]; }
};

struct EvalContext {
  int num_old = 0;
  int num_new = 0;
  std::vector<std::size_t> train_class_counts;
  std::vector<bool> active_heads;                 // empty: all heads
  std::optional<std::vector<int>> train_matching;  // head -> class from the train protocol
  std::uint64_t seed = 0;
};

EvalReport evaluate(const Model& model, const EmbeddingDataset& dataset, const EvalProtocol& protocol,
                    const EvalContext& context);

// Evaluation from precomputed head predictions (no model needed).
EvalReport evaluate_predictions(std::span<const int> predictions, std::span<const int> labels,
                                std::size_t num_heads, const EvalProtocol& protocol, const EvalContext& context);

// Head/tail split at the median training count (tail: strictly below).
std::vector<bool> median_tail_partition(std::span<const std::size_t> train_counts);

struct PhiResult {
  double head = 0.0;
  double tail = 0.0;
};

// Share of each group among the floor(fraction * N) lowest-scoring samples,
// relative to its share of the whole set. Ties keep sample order.
PhiResult phi_metric(std::span<const double> scores, std::span<const int> labels, const std::vector<bool>& is_tail,
                     double fraction = 0.10);

}  // namespace rowssl
