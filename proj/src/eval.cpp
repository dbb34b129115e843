#include "rowssl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rowssl/errors.hpp"

namespace rowssl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kReclusterRestarts = 10;

// Minimum-cost perfect matching on the square submatrix rows x cols of `cost`.
// Returns, for each position in `rows`, the position in `cols` it is matched to.
std::vector<std::size_t> min_cost_matching(const Matrix& cost, const std::vector<std::size_t>& rows,
                                           const std::vector<std::size_t>& cols) {
  const std::size_t n = rows.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(rows[i0 - 1], cols[j - 1]) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> match(n);
  for (std::size_t j = 1; j <= n; ++j) match[p[j] - 1] = j - 1;
  return match;
}

double best_profit(const Matrix& profit, const Matrix& cost, const std::vector<std::size_t>& rows,
                   const std::vector<std::size_t>& cols) {
  if (rows.empty()) return 0.0;
  const auto match = min_cost_matching(cost, rows, cols);
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) total += profit(rows[r], cols[match[r]]);
  return total;
}

}  // namespace

Assignment hungarian(const Matrix& profit) {
  if (profit.rows() == 0 || profit.cols() == 0) throw InvalidArgument("hungarian: empty matrix");
  if (!all_finite(profit.flat())) throw InvalidArgument("hungarian: non-finite profit");
  const std::size_t n = std::max(profit.rows(), profit.cols());
  Matrix padded(n, n, 0.0);
  Matrix cost(n, n, 0.0);
  double scale = 1.0;
  for (std::size_t r = 0; r < profit.rows(); ++r)
    for (std::size_t c = 0; c < profit.cols(); ++c) {
      padded(r, c) = profit(r, c);
      cost(r, c) = -profit(r, c);
      scale += std::abs(profit(r, c));
    }
  std::vector<std::size_t> rows(n), cols(n);
  std::iota(rows.begin(), rows.end(), 0);
  std::iota(cols.begin(), cols.end(), 0);
  const double optimum = best_profit(padded, cost, rows, cols);
  const double tol = 1e-12 * scale;

  // Fix rows one by one to the smallest column that still admits an optimum.
  Assignment out;
  out.row_to_col.assign(profit.rows(), -1);
  std::vector<std::size_t> full_assignment(n);
  double fixed = 0.0;
  std::vector<std::size_t> free_rows(rows.begin() + 1, rows.end());
  std::vector<std::size_t> free_cols = cols;
  for (std::size_t r = 0; r < n; ++r) {
    bool placed = false;
    for (std::size_t k = 0; k < free_cols.size(); ++k) {
      const std::size_t c = free_cols[k];
      std::vector<std::size_t> rest_cols = free_cols;
      rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(k));
      const double value = fixed + padded(r, c) + best_profit(padded, cost, free_rows, rest_cols);
      if (value >= optimum - tol) {
        full_assignment[r] = c;
        fixed += padded(r, c);
        free_cols = std::move(rest_cols);
        placed = true;
        break;
      }
    }
    if (!placed) throw StateError("hungarian: failed to reconstruct an optimal assignment");
    if (!free_rows.empty()) free_rows.erase(free_rows.begin());
  }
  for (std::size_t r = 0; r < profit.rows(); ++r) {
    const std::size_t c = full_assignment[r];
    if (c < profit.cols()) {
      out.row_to_col[r] = static_cast<int>(c);
      out.total += profit(r, c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

ClusteringAccuracy clustering_accuracy(std::span<const int> predictions, std::span<const int> labels,
                                       std::size_t num_clusters, std::size_t num_classes) {
  if (predictions.size() != labels.size())
    throw InvalidArgument("clustering_accuracy: predictions and labels differ in length");
  if (predictions.empty()) throw UndefinedMetric("clustering_accuracy: no samples");
  if (num_clusters == 0 || num_classes == 0) throw InvalidArgument("clustering_accuracy: empty label space");
  Matrix counts(num_clusters, num_classes, 0.0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] < 0 || static_cast<std::size_t>(predictions[i]) >= num_clusters)
      throw InvalidArgument("clustering_accuracy: prediction out of range");
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
      throw InvalidArgument("clustering_accuracy: label out of range");
    counts(static_cast<std::size_t>(predictions[i]), static_cast<std::size_t>(labels[i])) += 1.0;
  }
  const Assignment a = hungarian(counts);
  ClusteringAccuracy out;
  out.matching = a.row_to_col;
  out.accuracy = a.total / static_cast<double>(predictions.size());
  return out;
}

std::vector<int> apply_matching(std::span<const int> predictions, std::span<const int> matching) {
  std::vector<int> mapped(predictions.size(), -1);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int p = predictions[i];
    if (p >= 0 && static_cast<std::size_t>(p) < matching.size()) mapped[i] = matching[static_cast<std::size_t>(p)];
  }
  return mapped;
}

Vec per_class_recall(std::span<const int> mapped, std::span<const int> labels, std::size_t num_classes) {
  if (mapped.size() != labels.size()) throw InvalidArgument("per_class_recall: length mismatch");
  std::vector<std::size_t> total(num_classes, 0), hit(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
      throw InvalidArgument("per_class_recall: label out of range");
    const auto c = static_cast<std::size_t>(labels[i]);
    ++total[c];
    hit[c] += (mapped[i] == labels[i]);
  }
  Vec recall(num_classes, kNaN);
  for (std::size_t c = 0; c < num_classes; ++c)
    if (total[c] > 0) recall[c] = static_cast<double>(hit[c]) / static_cast<double>(total[c]);
  return recall;
}

double balanced_accuracy(std::span<const int> mapped, std::span<const int> labels, std::span<const int> subset) {
  if (mapped.size() != labels.size()) throw InvalidArgument("balanced_accuracy: length mismatch");
  int max_class = -1;
  for (int c : subset) max_class = std::max(max_class, c);
  for (int l : labels) max_class = std::max(max_class, l);
  const Vec recall = per_class_recall(mapped, labels, static_cast<std::size_t>(max_class + 1));
  double sum = 0.0;
  std::size_t n = 0;
  for (int c : subset) {
    if (c < 0) throw InvalidArgument("balanced_accuracy: negative class in subset");
    const double r = recall[static_cast<std::size_t>(c)];
    if (std::isnan(r)) continue;
    sum += r;
    ++n;
  }
  if (n == 0) throw UndefinedMetric("balanced_accuracy: no class of the subset occurs in the evaluation set");
  return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------

std::string EvalProtocol::name() const {
  if (set == EvalSet::TrainUnlabeled) return "train";
  if (recluster) return "test-recluster";
  return rematch ? "test-rematch" : "test-inductive";
}

EvalProtocol EvalProtocol::parse(const std::string& name) {
  if (name == "train") return {EvalSet::TrainUnlabeled, false, false};
  if (name == "test-recluster") return {EvalSet::Test, true, true};
  if (name == "test-rematch") return {EvalSet::Test, false, true};
  if (name == "test-inductive") return {EvalSet::Test, false, false};
  throw InvalidArgument("unknown protocol '" + name +
                        "' (expected train, test-recluster, test-rematch or test-inductive)");
}

void EvalProtocol::validate() const {
  if (recluster && set != EvalSet::Test) throw InvalidArgument("EvalProtocol: reclustering applies to the test set only");
  if (recluster && !rematch) throw InvalidArgument("EvalProtocol: reclustered ids must be rematched");
}

std::vector<int> frequency_groups(std::span<const std::size_t> train_counts, int num_old, int num_new) {
  if (train_counts.size() != static_cast<std::size_t>(num_old + num_new))
    throw InvalidArgument("frequency_groups: count vector does not cover every class");
  std::vector<int> group(train_counts.size(), 0);
  auto assign = [&](int begin, int end) {
    std::vector<int> classes(static_cast<std::size_t>(end - begin));
    std::iota(classes.begin(), classes.end(), begin);
    std::stable_sort(classes.begin(), classes.end(), [&](int a, int b) {
      return train_counts[static_cast<std::size_t>(a)] > train_counts[static_cast<std::size_t>(b)];
    });
    const std::size_t n = classes.size();
    std::array<std::size_t, 3> sizes{n / 3, n / 3, n / 3};
    for (std::size_t r = 0; r < n % 3; ++r) ++sizes[r];
    std::size_t pos = 0;
    for (int g = 0; g < 3; ++g)
      for (std::size_t k = 0; k < sizes[static_cast<std::size_t>(g)]; ++k)
        group[static_cast<std::size_t>(classes[pos++])] = g;
  };
  assign(0, num_old);
  assign(num_old, num_old + num_new);
  return group;
}

GroupMetrics group_metrics(std::span<const int> mapped, std::span<const int> labels,
                           std::span<const std::size_t> train_counts, int num_old, int num_new) {
  const auto num_classes = static_cast<std::size_t>(num_old + num_new);
  const std::vector<int> freq = frequency_groups(train_counts, num_old, num_new);
  const Vec recall = per_class_recall(mapped, labels, num_classes);

  // Membership of class c in group g.
  auto member = [&](std::size_t g, std::size_t c) {
    const bool known = static_cast<int>(c) < num_old;
    switch (g) {
      case kAll: return true;
      case kOld: return known;
      case kNew: return !known;
      default: {
        const bool want_known = g <= kKnownFew;
        const int want_freq = static_cast<int>(want_known ? g - kKnownMany : g - kNovelMany);
        return known == want_known && freq[c] == want_freq;
      }
    }
  };

  GroupMetrics out;
  for (std::size_t g = 0; g < kNumGroups; ++g) {
    double recall_sum = 0.0;
    std::size_t classes = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
      if (!member(g, c) || std::isnan(recall[c])) continue;
      recall_sum += recall[c];
      ++classes;
    }
    out.bacc[g] = classes > 0 ? recall_sum / static_cast<double>(classes) : kNaN;
    std::size_t total = 0, hit = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!member(g, static_cast<std::size_t>(labels[i]))) continue;
      ++total;
      hit += (mapped[i] == labels[i]);
    }
    out.acc[g] = total > 0 ? static_cast<double>(hit) / static_cast<double>(total) : kNaN;
  }
  return out;
}

EvalReport evaluate_predictions(std::span<const int> predictions, std::span<const int> labels, std::size_t num_heads,
                                const EvalProtocol& protocol, const EvalContext& context) {
  protocol.validate();
  const auto num_classes = static_cast<std::size_t>(context.num_old + context.num_new);
  if (context.train_class_counts.size() != num_classes)
    throw InvalidArgument("evaluate: training class counts do not cover every class");
  EvalReport report;
  report.protocol = protocol.name();
  report.num_samples = labels.size();
  if (protocol.set == EvalSet::TrainUnlabeled || protocol.rematch) {
    report.matching = clustering_accuracy(predictions, labels, num_heads, num_classes).matching;
  } else {
    if (!context.train_matching)
      throw StateError(
          "evaluate: inductive protocol needs the head-to-class matching of the unlabeled training set; "
          "evaluate the train protocol first");
    report.matching = *context.train_matching;
    if (report.matching.size() != num_heads)
      throw InvalidArgument("evaluate: stored train matching does not cover every head");
  }
  const std::vector<int> mapped = apply_matching(predictions, report.matching);
  report.per_class_recall = per_class_recall(mapped, labels, num_classes);
  report.metrics = group_metrics(mapped, labels, context.train_class_counts, context.num_old, context.num_new);
  return report;
}

EvalReport evaluate(const Model& model, const EmbeddingDataset& dataset, const EvalProtocol& protocol,
                    const EvalContext& context) {
  protocol.validate();
  if (dataset.samples.empty()) throw UndefinedMetric("evaluate: empty evaluation set");
  if (dataset.dim != model.encoder.input_dim()) throw InvalidArgument("evaluate: dataset dimension does not match model");
  std::vector<int> labels(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) labels[i] = dataset.samples[i].label;

  std::vector<int> predictions(dataset.size());
  std::size_t num_clusters = model.classifier.num_classes();
  if (protocol.recluster) {
    const auto num_classes = static_cast<std::size_t>(context.num_old + context.num_new);
    std::size_t k = num_classes;
    if (!context.active_heads.empty())
      k = static_cast<std::size_t>(std::count(context.active_heads.begin(), context.active_heads.end(), true));
    Matrix embeddings;
    for (const auto& s : dataset.samples) embeddings.append_row(model.embedding(s.x));
    KMeansOptions options;
    options.restarts = kReclusterRestarts;
    const KMeansResult km = kmeans(embeddings, std::min(k, embeddings.rows()), context.seed, options);
    for (std::size_t i = 0; i < predictions.size(); ++i) predictions[i] = static_cast<int>(km.assignments[i]);
    num_clusters = km.centroids.rows();
  } else {
    for (std::size_t i = 0; i < dataset.size(); ++i)
      predictions[i] = static_cast<int>(model.predict(dataset.samples[i].x, context.active_heads));
  }
  return evaluate_predictions(predictions, labels, num_clusters, protocol, context);
}

// ---------------------------------------------------------------------------

std::vector<bool> median_tail_partition(std::span<const std::size_t> train_counts) {
  if (train_counts.empty()) throw InvalidArgument("median_tail_partition: no classes");
  std::vector<std::size_t> sorted(train_counts.begin(), train_counts.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 == 1 ? static_cast<double>(sorted[n / 2])
                                   : 0.5 * (static_cast<double>(sorted[n / 2 - 1]) + static_cast<double>(sorted[n / 2]));
  std::vector<bool> tail(n);
  for (std::size_t c = 0; c < n; ++c) tail[c] = static_cast<double>(train_counts[c]) < median;
  return tail;
}

PhiResult phi_metric(std::span<const double> scores, std::span<const int> labels, const std::vector<bool>& is_tail,
                     double fraction) {
  if (scores.size() != labels.size()) throw InvalidArgument("phi_metric: length mismatch");
  if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidArgument("phi_metric: fraction must be in (0, 1)");
  const std::size_t n = scores.size();
  const auto n_sub = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  if (n_sub == 0) throw UndefinedMetric("phi_metric: lowest-score subset is empty");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  auto tail_of = [&](std::size_t i) {
    const int l = labels[i];
    if (l < 0 || static_cast<std::size_t>(l) >= is_tail.size()) throw InvalidArgument("phi_metric: label out of range");
    return static_cast<bool>(is_tail[static_cast<std::size_t>(l)]);
  };
  std::size_t tail_all = 0, tail_sub = 0;
  for (std::size_t i = 0; i < n; ++i) tail_all += tail_of(i);
  for (std::size_t k = 0; k < n_sub; ++k) tail_sub += tail_of(order[k]);
  const std::size_t head_all = n - tail_all;
  const std::size_t head_sub = n_sub - tail_sub;
  if (tail_all == 0 || head_all == 0) throw UndefinedMetric("phi_metric: head or tail group is empty");
  const double nn = static_cast<double>(n);
  const double ns = static_cast<double>(n_sub);
  PhiResult out;
  out.head = (static_cast<double>(head_sub) / ns) / (static_cast<double>(head_all) / nn);
  out.tail = (static_cast<double>(tail_sub) / ns) / (static_cast<double>(tail_all) / nn);
  return out;
}

}  // namespace rowssl
