#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rowssl/errors.hpp"
#include "rowssl/losses.hpp"
#include "test_util.hpp"

using namespace rowssl;
using rowssl::testing::central_difference;
using rowssl::testing::random_unit;
using rowssl::testing::random_unit_rows;
using rowssl::testing::random_vector;
using rowssl::testing::relative_error;

namespace {

QueueSnapshot queue_of(const std::vector<Vec>& rows, std::vector<int> labels) {
  QueueSnapshot q;
  for (const auto& r : rows) q.embeddings.append_row(r);
  q.labels = std::move(labels);
  return q;
}

Matrix rows_of(std::initializer_list<Vec> rows) {
  Matrix m;
  for (const auto& r : rows) m.append_row(r);
  return m;
}

Matrix one_hot_rows(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  Matrix t(rows, cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) t(i, rng() % cols) = 1.0;
  return t;
}

Matrix soft_rows(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  Matrix t(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const Vec p = softmax_temp(random_vector(cols, rng), 0.5);
    std::copy(p.begin(), p.end(), t.row(i).begin());
  }
  return t;
}

double kl_to_uniform(const Vec& p) {
  double kl = 0.0;
  const double u = 1.0 / static_cast<double>(p.size());
  for (double v : p)
    if (v > 0.0) kl += v * std::log(v / u);
  return kl;
}

Vec mean_prediction(const Matrix& a, const Matrix& b, double tau) {
  Vec m(a.cols(), 0.0);
  for (const Matrix* x : {&a, &b})
    for (std::size_t i = 0; i < x->rows(); ++i) {
      const Vec p = softmax_temp(x->row(i), tau);
      for (std::size_t k = 0; k < m.size(); ++k) m[k] += p[k] / static_cast<double>(a.rows() + b.rows());
    }
  return m;
}

}  // namespace

TEST(DynamicTemperature, EndpointsAndMidpoint) {
  const Vec d{0.2, 0.6, 1.0};
  EXPECT_EQ(dynamic_temperature(0.2, d, 0.05, 1.0), 0.05);
  EXPECT_EQ(dynamic_temperature(1.0, d, 0.05, 1.0), 1.0);
  EXPECT_NEAR(dynamic_temperature(0.6, d, 0.05, 1.0), 0.525, 1e-12);
  EXPECT_EQ(dynamic_temperature(5.0, d, 0.05, 1.0), 1.0);
  EXPECT_EQ(dynamic_temperature(-5.0, d, 0.05, 1.0), 0.05);
}

TEST(DynamicTemperature, FlatDensitiesGiveTheMidpoint) {
  EXPECT_EQ(dynamic_temperature(0.3, Vec{0.3, 0.3}, 0.05, 1.0), 0.525);
  EXPECT_EQ(dynamic_temperature(0.3, Vec{0.3, 0.3 + 1e-13}, 0.05, 1.0), 0.525);
  EXPECT_EQ(dynamic_temperature(0.9, Vec{0.1, 0.9}, 0.2, 0.2), 0.2);
}

TEST(DynamicTemperature, RejectsBadRanges) {
  EXPECT_THROW(dynamic_temperature(0.0, Vec{0.0, 1.0}, 0.0, 1.0), InvalidArgument);
  EXPECT_THROW(dynamic_temperature(0.0, Vec{0.0, 1.0}, 0.5, 0.4), InvalidArgument);
  EXPECT_THROW(dynamic_temperature(0.0, Vec{}, 0.05, 1.0), InvalidArgument);
}

TEST(InfoNce, KnownValues) {
  const Vec e1{1.0, 0.0}, e2{0.0, 1.0};
  EXPECT_NEAR(info_nce(e1, e1, Matrix(0, 2), 0.3).value, 0.0, 1e-15);
  EXPECT_NEAR(info_nce(e1, e2, rows_of({e2}), 0.7).value, std::log(2.0), 1e-12);
  EXPECT_NEAR(info_nce(e1, e1, queue_of({e2}, {kUnlabeled}), 1.0).value, 0.3133, 1e-4);
  EXPECT_NEAR(info_nce(e1, e1, queue_of({e2}, {kUnlabeled}), 1.0).value, std::log1p(std::exp(-1.0)), 1e-14);
}

TEST(InfoNce, EmptyQueueIsAStateError) {
  const Vec e1{1.0, 0.0};
  EXPECT_THROW(info_nce(e1, e1, QueueSnapshot{}, 0.1), StateError);
  EXPECT_THROW(info_nce(e1, e1, Matrix(0, 2), 0.0), InvalidArgument);
}

TEST(InfoNce, DecreasesAsThePositiveAligns) {
  std::mt19937_64 rng(2);
  const QueueSnapshot q = queue_of({random_unit(3, rng), random_unit(3, rng), random_unit(3, rng)}, {-1, -1, -1});
  const Vec h{1.0, 0.0, 0.0};
  double previous = INFINITY;
  for (double theta = 3.0; theta >= 0.0; theta -= 0.25) {
    const Vec pos{std::cos(theta), std::sin(theta), 0.0};
    const double v = info_nce(h, pos, q, 0.2).value;
    EXPECT_LT(v, previous);
    previous = v;
  }
}

TEST(SupCon, KnownValues) {
  const Vec e1{1.0, 0.0}, e2{0.0, 1.0};
  EXPECT_NEAR(sup_con(e1, 2, queue_of({e2}, {2}), 0.07).value, 0.0, 1e-12);
  const AnchorLoss none = sup_con(e1, 1, queue_of({e2}, {0}), 0.07);
  EXPECT_TRUE(none.skipped);
  EXPECT_EQ(none.value, 0.0);
  for (double g : none.grad) EXPECT_EQ(g, 0.0);
  EXPECT_NEAR(sup_con(e1, 0, queue_of({e1, e2}, {0, 1}), 1.0).value, 0.3133, 1e-4);
  EXPECT_THROW(sup_con(e1, kUnlabeled, queue_of({e1}, {0}), 0.07), InvalidArgument);
}

TEST(SupCon, SentinelNeverCountsAsPositive) {
  const Vec e1{1.0, 0.0};
  EXPECT_TRUE(sup_con(e1, 0, queue_of({e1, e1}, {kUnlabeled, kUnlabeled}), 0.1).skipped);
}

TEST(AnchorGradients, MatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 + rng() % 10, n = 1 + rng() % 8;
    QueueSnapshot q;
    q.embeddings = random_unit_rows(n, d, rng);
    for (std::size_t i = 0; i < n; ++i) q.labels.push_back(static_cast<int>(rng() % 3) - 1);
    Vec h = random_unit(d, rng);
    const Vec pos = random_unit(d, rng);
    const double tau = 0.05 + 0.95 * std::uniform_real_distribution<double>()(rng);
    const int label = static_cast<int>(rng() % 2);
    const AnchorLoss a = info_nce(h, pos, q, tau);
    const AnchorLoss s = sup_con(h, label, q, 0.07);
    for (std::size_t k = 0; k < d; ++k) {
      const double fa = central_difference([&] { return info_nce(h, pos, q, tau).value; }, h[k]);
      const double fs = central_difference([&] { return sup_con(h, label, q, 0.07).value; }, h[k]);
      EXPECT_LT(relative_error(a.grad[k], fa), 1e-5);
      EXPECT_LT(relative_error(s.grad[k], fs), 1e-5);
    }
  }
}

TEST(RepresentationLoss, WeightsAndDegenerateCases) {
  std::mt19937_64 rng(4);
  const std::size_t batch = 5, d = 6;
  const Matrix h = random_unit_rows(batch, d, rng);
  const Matrix b = random_unit_rows(batch, d, rng);
  QueueSnapshot q;
  q.embeddings = random_unit_rows(12, d, rng);
  q.labels = {0, 1, -1, 0, 1, -1, 2, 0, -1, -1, 1, 2};
  const std::vector<int> unlabeled(batch, kUnlabeled);
  const std::vector<int> labels{0, 1, kUnlabeled, 2, 0};
  const Vec taus{0.05, 0.3, 1.0, 0.5, 0.1};

  RepresentationInputs in{&h, &b, unlabeled, taus, 0.35, 0.07};
  const RepresentationLoss no_labels = representation_loss(in, q);
  double mean_u = 0.0;
  for (std::size_t i = 0; i < batch; ++i) mean_u += info_nce(h.row(i), b.row(i), q, taus[i]).value / batch;
  EXPECT_NEAR(no_labels.mean_unsup, mean_u, 1e-12);
  EXPECT_EQ(no_labels.mean_sup, 0.0);
  EXPECT_NEAR(no_labels.value, 0.65 * mean_u, 1e-12);

  in.labels = labels;
  in.lambda_rep = 0.0;
  EXPECT_NEAR(representation_loss(in, q).value, mean_u, 1e-12);

  const std::vector<int> all{0, 1, 2, 0, 1};
  in.labels = all;
  in.lambda_rep = 1.0;
  double mean_s = 0.0;
  for (std::size_t i = 0; i < batch; ++i) mean_s += sup_con(h.row(i), all[i], q, 0.07).value / batch;
  const RepresentationLoss sup_only = representation_loss(in, q);
  EXPECT_NEAR(sup_only.value, mean_s, 1e-12);
  EXPECT_NEAR(sup_only.value, (1.0 - 1.0) * sup_only.mean_unsup + 1.0 * sup_only.mean_sup, 1e-12);

  in.lambda_rep = 1.5;
  EXPECT_THROW(representation_loss(in, q), InvalidArgument);
}

TEST(RepresentationLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t batch = 1 + rng() % 8, d = 2 + rng() % 15;
    Matrix h = random_unit_rows(batch, d, rng);
    const Matrix b = random_unit_rows(batch, d, rng);
    QueueSnapshot q;
    q.embeddings = random_unit_rows(10, d, rng);
    for (int i = 0; i < 10; ++i) q.labels.push_back(static_cast<int>(rng() % 4) - 1);
    std::vector<int> labels;
    Vec taus;
    for (std::size_t i = 0; i < batch; ++i) {
      labels.push_back(static_cast<int>(rng() % 4) - 1);
      taus.push_back(0.05 + 0.95 * std::uniform_real_distribution<double>()(rng));
    }
    const RepresentationInputs in{&h, &b, labels, taus, 0.35, 0.07};
    const RepresentationLoss loss = representation_loss(in, q);
    EXPECT_NEAR(loss.value, 0.65 * loss.mean_unsup + 0.35 * loss.mean_sup, 1e-12);
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t k = 0; k < d; ++k) {
        const double fd = central_difference([&] { return representation_loss(in, q).value; }, h(i, k));
        EXPECT_LT(relative_error(loss.grad(i, k), fd), 1e-5) << "anchor " << i << " coord " << k;
      }
  }
}

TEST(SoftPseudoLabel, KnownValuesAndDegenerateCases) {
  const Vec q = soft_pseudo_label(Vec{0.0, 0.0}, Vec{0.0, 1.0}, 1.0, 1.0);
  EXPECT_NEAR(q[0], 0.2689, 1e-4);
  EXPECT_NEAR(q[1], 0.7311, 1e-4);
  const Vec logits{0.3, -0.2, 0.9};
  EXPECT_EQ(soft_pseudo_label(logits, Vec{0, 0, 0}, 1.0, 0.04), softmax_temp(logits, 0.04));
  EXPECT_EQ(soft_pseudo_label(logits, Vec{0.5, 0.1, 0.2}, 0.0, 0.04), softmax_temp(logits, 0.04));
  EXPECT_THROW(soft_pseudo_label(logits, Vec{0.0}, 1.0, 0.04), InvalidArgument);
}

TEST(SoftPseudoLabel, UncertaintyRaisesTheClassProbability) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec logits = random_vector(5, rng);
    Vec u(5);
    for (double& v : u) v = std::uniform_real_distribution<double>(0.0, 0.5)(rng);
    const std::size_t c = rng() % 5;
    const Vec before = soft_pseudo_label(logits, u, 1.0, 0.5);
    u[c] += 0.1;
    EXPECT_GT(soft_pseudo_label(logits, u, 1.0, 0.5)[c], before[c]);
  }
}

TEST(ClassifierLoss, CrossEntropyExamples) {
  // Large logit gaps make the student effectively one-hot.
  const Matrix confident = rows_of({Vec{50.0, 0.0, 0.0}});
  const Matrix target = rows_of({Vec{1.0, 0.0, 0.0}});
  EXPECT_NEAR(classifier_loss(confident, confident, target, target, 1.0, 0.0).mean_cross_entropy, 0.0, 1e-12);
  const Matrix flat = rows_of({Vec{0.2, 0.2, 0.2}});
  const ClassifierLoss uniform = classifier_loss(flat, flat, target, target, 0.1, 0.0);
  EXPECT_NEAR(uniform.mean_cross_entropy, std::log(3.0), 1e-12);
  EXPECT_NEAR(uniform.entropy, std::log(3.0), 1e-12);
  EXPECT_NEAR(classifier_loss(flat, flat, target, target, 0.1, 4.0).value, std::log(3.0) - 4.0 * std::log(3.0), 1e-12);
}

TEST(ClassifierLoss, RejectsBadTargets) {
  const Matrix logits = rows_of({Vec{0.1, 0.2}});
  EXPECT_THROW(classifier_loss(logits, logits, rows_of({Vec{0.5, 0.6}}), rows_of({Vec{0.5, 0.5}}), 0.1, 1.0),
               InvalidArgument);
  EXPECT_THROW(classifier_loss(logits, logits, rows_of({Vec{1.5, -0.5}}), rows_of({Vec{0.5, 0.5}}), 0.1, 1.0),
               InvalidArgument);
  EXPECT_THROW(classifier_loss(logits, logits, rows_of({Vec{1.0}}), rows_of({Vec{0.5, 0.5}}), 0.1, 1.0),
               InvalidArgument);
}

TEST(ClassifierLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t batch = 1 + rng() % 8, c = 2 + rng() % 5;
    Matrix la(batch, c), lb(batch, c);
    for (double& v : la.flat()) v = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    for (double& v : lb.flat()) v = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    const Matrix ta = trial % 2 ? one_hot_rows(batch, c, rng) : soft_rows(batch, c, rng);
    const Matrix tb = soft_rows(batch, c, rng);
    const double eps = std::uniform_real_distribution<double>(0.0, 5.0)(rng);
    const ClassifierLoss loss = classifier_loss(la, lb, ta, tb, 0.1, eps);
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t k = 0; k < c; ++k) {
        const double fa = central_difference([&] { return classifier_loss(la, lb, ta, tb, 0.1, eps).value; }, la(i, k));
        const double fb = central_difference([&] { return classifier_loss(la, lb, ta, tb, 0.1, eps).value; }, lb(i, k));
        EXPECT_LT(relative_error(loss.grad_first(i, k), fa), 1e-4);
        EXPECT_LT(relative_error(loss.grad_second(i, k), fb), 1e-4);
      }
  }
}

TEST(MeanEntropyTerm, MatchesClassifierLossRegularizer) {
  std::mt19937_64 rng(8);
  const Matrix la = random_unit_rows(4, 3, rng), lb = random_unit_rows(4, 3, rng);
  const EntropyTerm term = mean_entropy_term(la, lb, 0.1, 2.0);
  const Vec p = mean_prediction(la, lb, 0.1);
  double h = 0.0;
  for (double v : p) h -= v * std::log(v);
  EXPECT_NEAR(term.entropy, h, 1e-12);
  EXPECT_NEAR(classifier_loss(la, lb, soft_rows(4, 3, rng), soft_rows(4, 3, rng), 0.1, 2.0).entropy, h, 1e-12);
}

TEST(MeanEntropyTerm, DescentApproachesUniform) {
  std::mt19937_64 rng(9);
  for (int start = 0; start < 10; ++start) {
    Matrix la(6, 4), lb(6, 4);
    for (double& v : la.flat()) v = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    for (double& v : lb.flat()) v = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    double previous = kl_to_uniform(mean_prediction(la, lb, 0.1));
    for (int step = 0; step < 100; ++step) {
      const EntropyTerm t = mean_entropy_term(la, lb, 0.1, 1.0);
      for (std::size_t i = 0; i < la.flat().size(); ++i) {
        la.flat()[i] -= 0.01 * t.grad_first.flat()[i];
        lb.flat()[i] -= 0.01 * t.grad_second.flat()[i];
      }
      const double kl = kl_to_uniform(mean_prediction(la, lb, 0.1));
      ASSERT_LT(kl, previous) << "start " << start << " step " << step;
      previous = kl;
    }
  }
}

TEST(TotalLoss, IsAdditive) {
  RepresentationLoss rep;
  rep.value = 1.25;
  rep.mean_unsup = 1.5;
  rep.mean_sup = 0.75;
  ClassifierLoss cls;
  cls.value = -3.5;
  cls.mean_cross_entropy = 0.5;
  cls.entropy = 1.0;
  const LossBreakdown b = total_loss(rep, cls);
  EXPECT_EQ(b.total, 1.25 + -3.5);
  EXPECT_EQ(b.representation, 1.25);
  EXPECT_EQ(b.classification, -3.5);
  EXPECT_EQ(total_loss({}, {}).total, 0.0);
}
