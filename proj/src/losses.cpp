#include "rowssl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rowssl/errors.hpp"

namespace rowssl {

double dynamic_temperature(double score, std::span<const double> densities, double tau_min, double tau_max) {
  if (!(tau_min > 0.0) || !(tau_max >= tau_min))
    throw InvalidArgument("dynamic_temperature: need 0 < tau_min <= tau_max");
  if (densities.empty()) throw InvalidArgument("dynamic_temperature: no densities");
  const auto [lo_it, hi_it] = std::minmax_element(densities.begin(), densities.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  if (range < 1e-12) return 0.5 * (tau_min + tau_max);
  const double tau = tau_min + (score - lo) / range * (tau_max - tau_min);
  return std::clamp(tau, tau_min, tau_max);
}

// ---------------------------------------------------------------------------

AnchorLoss info_nce(std::span<const double> query, std::span<const double> positive, const Matrix& negatives,
                    double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("info_nce: temperature must be positive");
  const std::size_t d = query.size();
  if (positive.size() != d || (negatives.rows() > 0 && negatives.cols() != d))
    throw InvalidArgument("info_nce: dimension mismatch");
  const std::size_t n = negatives.rows();
  Vec logits(n + 1);
  logits[0] = dot(query, positive) / tau;
  for (std::size_t j = 0; j < n; ++j) logits[j + 1] = dot(query, negatives.row(j)) / tau;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& a : logits) {
    a = std::exp(a - mx);
    z += a;
  }
  AnchorLoss out;
  // logits now hold unnormalised probabilities
  out.value = -std::log(logits[0] / z);
  out.grad.assign(d, 0.0);
  const double p0 = logits[0] / z;
  for (std::size_t i = 0; i < d; ++i) out.grad[i] = (p0 - 1.0) * positive[i];
  for (std::size_t j = 0; j < n; ++j) {
    const double p = logits[j + 1] / z;
    auto row = negatives.row(j);
    for (std::size_t i = 0; i < d; ++i) out.grad[i] += p * row[i];
  }
  for (double& g : out.grad) g /= tau;
  return out;
}

AnchorLoss info_nce(std::span<const double> query, std::span<const double> positive, const QueueSnapshot& queue,
                    double tau) {
  if (queue.empty()) throw StateError("info_nce: queue is empty (warmup must skip the contrastive term)");
  return info_nce(query, positive, queue.embeddings, tau);
}

AnchorLoss sup_con(std::span<const double> query, int label, const QueueSnapshot& queue, double tau) {
  if (label < 0) throw InvalidArgument("sup_con: anchor must carry a known-class label");
  if (!(tau > 0.0)) throw InvalidArgument("sup_con: temperature must be positive");
  const std::size_t d = query.size();
  AnchorLoss out;
  out.grad.assign(d, 0.0);
  const std::size_t n = queue.size();
  std::size_t num_pos = 0;
  for (int l : queue.labels) num_pos += (l == label);
  if (num_pos == 0) {
    out.skipped = true;
    return out;
  }
  if (queue.embeddings.cols() != d) throw InvalidArgument("sup_con: dimension mismatch");
  Vec logits(n);
  for (std::size_t j = 0; j < n; ++j) logits[j] = dot(query, queue.embeddings.row(j)) / tau;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double a : logits) z += std::exp(a - mx);
  const double log_z = mx + std::log(z);
  double pos_sum = 0.0;
  const double inv_pos = 1.0 / static_cast<double>(num_pos);
  for (std::size_t j = 0; j < n; ++j) {
    const double p = std::exp(logits[j] - log_z);
    const bool is_pos = queue.labels[j] == label;
    if (is_pos) pos_sum += logits[j] - log_z;
    const double coeff = p - (is_pos ? inv_pos : 0.0);
    auto row = queue.embeddings.row(j);
    for (std::size_t i = 0; i < d; ++i) out.grad[i] += coeff * row[i];
  }
  out.value = -pos_sum * inv_pos;
  for (double& g : out.grad) g /= tau;
  return out;
}

RepresentationLoss representation_loss(const RepresentationInputs& in, const QueueSnapshot& queue) {
  if (!in.queries || !in.positives) throw InvalidArgument("representation_loss: missing inputs");
  const Matrix& h = *in.queries;
  const Matrix& b = *in.positives;
  const std::size_t batch = h.rows();
  if (batch == 0) throw InvalidArgument("representation_loss: empty batch");
  if (b.rows() != batch || in.labels.size() != batch || in.temperatures.size() != batch)
    throw InvalidArgument("representation_loss: batch size mismatch");
  if (in.lambda_rep < 0.0 || in.lambda_rep > 1.0) throw InvalidArgument("representation_loss: lambda_rep outside [0, 1]");

  RepresentationLoss out;
  out.grad = Matrix(batch, h.cols(), 0.0);
  std::size_t num_labeled = 0;
  for (int l : in.labels) num_labeled += (l >= 0);

  const double w_unsup = (1.0 - in.lambda_rep) / static_cast<double>(batch);
  const double w_sup = num_labeled > 0 ? in.lambda_rep / static_cast<double>(num_labeled) : 0.0;
  double sum_unsup = 0.0;
  double sum_sup = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const AnchorLoss lu = info_nce(h.row(i), b.row(i), queue, in.temperatures[i]);
    sum_unsup += lu.value;
    auto g = out.grad.row(i);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += w_unsup * lu.grad[k];
    if (in.labels[i] >= 0) {
      const AnchorLoss ls = sup_con(h.row(i), in.labels[i], queue, in.tau_sup);
      out.sup_skipped += ls.skipped;
      sum_sup += ls.value;
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += w_sup * ls.grad[k];
    }
  }
  out.mean_unsup = sum_unsup / static_cast<double>(batch);
  out.mean_sup = num_labeled > 0 ? sum_sup / static_cast<double>(num_labeled) : 0.0;
  out.value = (1.0 - in.lambda_rep) * out.mean_unsup + in.lambda_rep * out.mean_sup;
  return out;
}

// ---------------------------------------------------------------------------

Vec soft_pseudo_label(std::span<const double> logits, std::span<const double> uncertainty, double lambda_var,
                      double tau_t) {
  if (logits.size() != uncertainty.size())
    throw InvalidArgument("soft_pseudo_label: logits have " + std::to_string(logits.size()) +
                          " entries, uncertainty " + std::to_string(uncertainty.size()));
  Vec adjusted(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) adjusted[k] = logits[k] + lambda_var * uncertainty[k];
  return softmax_temp(adjusted, tau_t);
}

namespace {

Matrix row_softmax(const Matrix& logits, double tau) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const Vec row = softmax_temp(logits.row(i), tau);
    std::copy(row.begin(), row.end(), p.row(i).begin());
  }
  return p;
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidArgument(std::string("classifier_loss: shape mismatch for ") + what);
}

// Adds d(-epsilon * H(pbar))/dlogits for one view into grad.
void add_entropy_grad(const Matrix& p, std::span<const double> g_prob, double tau_s, Matrix& grad) {
  const std::size_t c = p.cols();
  for (std::size_t i = 0; i < p.rows(); ++i) {
    auto pi = p.row(i);
    const double inner = dot(pi, g_prob);
    auto gi = grad.row(i);
    for (std::size_t k = 0; k < c; ++k) gi[k] += pi[k] * (g_prob[k] - inner) / tau_s;
  }
}

struct MeanPrediction {
  Vec mean;
  double entropy = 0.0;
  Vec grad_prob;  // d(-epsilon * H)/dp_ik, identical for every sample
};

MeanPrediction mean_prediction(const Matrix& pa, const Matrix& pb, double epsilon) {
  const std::size_t c = pa.cols();
  const double inv = 1.0 / static_cast<double>(pa.rows() + pb.rows());
  MeanPrediction m;
  m.mean.assign(c, 0.0);
  for (std::size_t i = 0; i < pa.rows(); ++i)
    for (std::size_t k = 0; k < c; ++k) m.mean[k] += pa(i, k);
  for (std::size_t i = 0; i < pb.rows(); ++i)
    for (std::size_t k = 0; k < c; ++k) m.mean[k] += pb(i, k);
  m.grad_prob.assign(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    m.mean[k] *= inv;
    const double log_p = std::log(std::max(m.mean[k], std::numeric_limits<double>::min()));
    m.entropy -= m.mean[k] * log_p;
    m.grad_prob[k] = epsilon * (log_p + 1.0) * inv;
  }
  return m;
}

}  // namespace

EntropyTerm mean_entropy_term(const Matrix& logits_first, const Matrix& logits_second, double tau_s,
                              double epsilon) {
  check_same_shape(logits_first, logits_second, "views");
  if (!(tau_s > 0.0)) throw InvalidArgument("mean_entropy_term: tau_s must be positive");
  const Matrix pa = row_softmax(logits_first, tau_s);
  const Matrix pb = row_softmax(logits_second, tau_s);
  const MeanPrediction m = mean_prediction(pa, pb, epsilon);
  EntropyTerm out;
  out.entropy = m.entropy;
  out.grad_first = Matrix(pa.rows(), pa.cols(), 0.0);
  out.grad_second = Matrix(pb.rows(), pb.cols(), 0.0);
  add_entropy_grad(pa, m.grad_prob, tau_s, out.grad_first);
  add_entropy_grad(pb, m.grad_prob, tau_s, out.grad_second);
  return out;
}

ClassifierLoss classifier_loss(const Matrix& logits_first, const Matrix& logits_second, const Matrix& targets_first,
                               const Matrix& targets_second, double tau_s, double epsilon) {
  check_same_shape(logits_first, logits_second, "views");
  check_same_shape(logits_first, targets_first, "first-view targets");
  check_same_shape(logits_second, targets_second, "second-view targets");
  if (logits_first.rows() == 0) throw InvalidArgument("classifier_loss: empty batch");
  if (!(tau_s > 0.0)) throw InvalidArgument("classifier_loss: tau_s must be positive");
  for (const Matrix* t : {&targets_first, &targets_second})
    for (std::size_t i = 0; i < t->rows(); ++i) {
      double s = 0.0;
      for (double v : t->row(i)) {
        if (v < 0.0) throw InvalidArgument("classifier_loss: negative target entry");
        s += v;
      }
      if (std::abs(s - 1.0) > 1e-6)
        throw InvalidArgument("classifier_loss: target row " + std::to_string(i) + " sums to " + std::to_string(s));
    }

  const Matrix pa = row_softmax(logits_first, tau_s);
  const Matrix pb = row_softmax(logits_second, tau_s);
  const std::size_t c = pa.cols();
  const double inv = 1.0 / static_cast<double>(pa.rows() + pb.rows());

  ClassifierLoss out;
  out.grad_first = Matrix(pa.rows(), c, 0.0);
  out.grad_second = Matrix(pb.rows(), c, 0.0);
  double ce = 0.0;
  auto cross_entropy = [&](const Matrix& logits, const Matrix& p, const Matrix& t, Matrix& grad) {
    for (std::size_t i = 0; i < p.rows(); ++i) {
      auto li = logits.row(i);
      const double mx = *std::max_element(li.begin(), li.end()) / tau_s;
      double z = 0.0;
      for (double l : li) z += std::exp(l / tau_s - mx);
      const double log_z = mx + std::log(z);
      for (std::size_t k = 0; k < c; ++k) {
        if (t(i, k) != 0.0) ce -= t(i, k) * (li[k] / tau_s - log_z);
        grad(i, k) += (p(i, k) - t(i, k)) * inv / tau_s;
      }
    }
  };
  cross_entropy(logits_first, pa, targets_first, out.grad_first);
  cross_entropy(logits_second, pb, targets_second, out.grad_second);

  const MeanPrediction m = mean_prediction(pa, pb, epsilon);
  add_entropy_grad(pa, m.grad_prob, tau_s, out.grad_first);
  add_entropy_grad(pb, m.grad_prob, tau_s, out.grad_second);

  out.mean_cross_entropy = ce * inv;
  out.entropy = m.entropy;
  out.value = out.mean_cross_entropy - epsilon * m.entropy;
  return out;
}

LossBreakdown total_loss(const RepresentationLoss& rep, const ClassifierLoss& cls) {
  LossBreakdown b;
  b.mean_unsup = rep.mean_unsup;
  b.mean_sup = rep.mean_sup;
  b.representation = rep.value;
  b.mean_cross_entropy = cls.mean_cross_entropy;
  b.entropy = cls.entropy;
  b.classification = cls.value;
  b.total = rep.value + cls.value;
  return b;
}

}  // namespace rowssl
