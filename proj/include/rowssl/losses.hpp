#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rowssl/numerics.hpp"
#include "rowssl/queue.hpp"

namespace rowssl {

struct LossBreakdown {
  double mean_unsup = 0.0;   // mean l_u over the batch
  double mean_sup = 0.0;     // mean l_sup over labeled anchors
  double representation = 0.0;
  double mean_cross_entropy = 0.0;
  double entropy = 0.0;      // Shannon entropy of the mean prediction
  double classification = 0.0;
  double total = 0.0;
};

// Linear map of a tailedness score onto [tau_min, tau_max] using the current
// density range; midpoint when the densities are (numerically) all equal.
double dynamic_temperature(double score, std::span<const double> densities, double tau_min, double tau_max);

struct AnchorLoss {
  double value = 0.0;
  Vec grad;              // dL/dh for the unit-norm query
  bool skipped = false;  // sup_con only: no positive in the queue
};

// -log softmax of the positive among {positive} U negatives, at temperature tau.
AnchorLoss info_nce(std::span<const double> query, std::span<const double> positive, const Matrix& negatives,
                    double tau);
// Queue form; the queue must not be empty.
AnchorLoss info_nce(std::span<const double> query, std::span<const double> positive, const QueueSnapshot& queue,
                    double tau);

// Supervised contrastive term with queue positives (entries labelled `label`);
// denominator over the whole queue. Returns 0 and skipped when no positive exists.
AnchorLoss sup_con(std::span<const double> query, int label, const QueueSnapshot& queue, double tau);

struct RepresentationInputs {
  const Matrix* queries = nullptr;    // B x D unit-norm h
  const Matrix* positives = nullptr;  // B x D unit-norm b_+
  std::span<const int> labels;        // kUnlabeled for anchors outside B_l
  std::span<const double> temperatures;  // per-anchor tau for l_u
  double lambda_rep = 0.35;
  double tau_sup = 0.07;
};

struct RepresentationLoss {
  double value = 0.0;
  double mean_unsup = 0.0;
  double mean_sup = 0.0;
  std::size_t sup_skipped = 0;
  Matrix grad;  // B x D, dL_rep/dh
};

// (1 - lambda) mean(l_u) + lambda mean_{labeled}(l_sup); supervised term is 0 without labeled anchors.
RepresentationLoss representation_loss(const RepresentationInputs& inputs, const QueueSnapshot& queue);

// softmax((logits + lambda_var u) / tau_t); a stop-gradient target.
Vec soft_pseudo_label(std::span<const double> logits, std::span<const double> uncertainty, double lambda_var,
                      double tau_t);

struct ClassifierLoss {
  double value = 0.0;
  double mean_cross_entropy = 0.0;
  double entropy = 0.0;
  Matrix grad_first;   // dL/dlogits for the first view
  Matrix grad_second;  // dL/dlogits for the second view
};

// Self-distillation over two views: student p = softmax(logits / tau_s),
// targets are one-hot labels or soft pseudo-labels. Cross entropy is averaged
// over both views; the mean prediction's entropy is maximised with weight epsilon.
ClassifierLoss classifier_loss(const Matrix& logits_first, const Matrix& logits_second, const Matrix& targets_first,
                               const Matrix& targets_second, double tau_s, double epsilon);

struct EntropyTerm {
  double entropy = 0.0;  // Shannon entropy of the mean prediction
  Matrix grad_first;     // d(-epsilon * entropy)/dlogits
  Matrix grad_second;
};

EntropyTerm mean_entropy_term(const Matrix& logits_first, const Matrix& logits_second, double tau_s,
                              double epsilon);

// Fills the breakdown so that representation + classification == total.
LossBreakdown total_loss(const RepresentationLoss& rep, const ClassifierLoss& cls);

}  // namespace rowssl
