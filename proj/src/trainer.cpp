#include "rowssl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rowssl/errors.hpp"

namespace rowssl {

std::string to_string(ClassCountMode mode) { return mode == ClassCountMode::Known ? "known" : "estimate"; }

ClassCountMode parse_class_count_mode(const std::string& text) {
  if (text == "known") return ClassCountMode::Known;
  if (text == "estimate") return ClassCountMode::Estimate;
  throw InvalidArgument("unknown class-count mode '" + text + "' (expected known or estimate)");
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidArgument(std::string("TrainConfig: ") + what);
  };
  require(epochs >= 0, "epochs must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(learning_rate >= 0.0 && final_learning_rate >= 0.0, "learning rates must be >= 0");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must be in [0, 1)");
  require(lambda_rep >= 0.0 && lambda_rep <= 1.0, "lambda_rep must be in [0, 1]");
  require(tau_s > 0.0 && tau_t_start > 0.0 && tau_t_end > 0.0 && tau_sup > 0.0, "temperatures must be positive");
  require(tau_t_warmup_epochs >= 0, "tau_t_warmup_epochs must be >= 0");
  require(epsilon >= 0.0, "epsilon must be >= 0");
  require(lambda_tail >= 0.0 && lambda_tail <= 1.0, "lambda_tail must be in [0, 1]");
  require(knn_k >= 1, "knn_k must be >= 1");
  require(queue_size > knn_k, "queue_size must exceed knn_k");
  require(tau_min > 0.0 && tau_max >= tau_min, "need 0 < tau_min <= tau_max");
  require(lambda_var >= 0.0, "lambda_var must be >= 0");
  require(key_momentum >= 0.0 && key_momentum <= 1.0, "key_momentum must be in [0, 1]");
  require(class_tail_cap >= 1, "class_tail_cap must be >= 1");
  require(noise_scale >= 0.0, "noise_scale must be >= 0");
  require(drop_fraction >= 0.0 && drop_fraction < 1.0, "drop_fraction must be in [0, 1)");
  require(projector_layers >= 1 && projection_dim >= 1, "projector needs at least one layer");
  require(projector_layers == 1 || projector_hidden >= 1, "projector_hidden must be >= 1");
  require(encoder_jitter >= 0.0, "encoder_jitter must be >= 0");
}

// ---------------------------------------------------------------------------
// Model

Vec Model::features(std::span<const double> x) const { return encoder.forward(x); }

Vec Model::embedding(std::span<const double> x) const { return l2_normalize(projector.forward(encoder.forward(x))); }

Vec Model::key_embedding(std::span<const double> x) const {
  return l2_normalize(key_projector.forward(key_encoder.forward(x)));
}

Vec Model::logits(std::span<const double> x) const { return classifier.logits(encoder.forward(x)); }

std::size_t Model::predict(std::span<const double> x, const std::vector<bool>& active) const {
  const Vec l = logits(x);
  if (active.empty()) return argmax(l);
  if (active.size() != l.size()) throw InvalidArgument("Model::predict: active mask has wrong length");
  std::size_t best = l.size();
  for (std::size_t k = 0; k < l.size(); ++k)
    if (active[k] && (best == l.size() || l[k] > l[best])) best = k;
  if (best == l.size()) throw StateError("Model::predict: no active head");
  return best;
}

namespace {

template <typename Span>
void append(std::vector<Span>& dst, const std::vector<Span>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace

std::vector<std::span<double>> Model::query_parameters() {
  auto p = encoder.parameters();
  append(p, projector.parameters());
  append(p, classifier.parameters());
  return p;
}

std::vector<std::span<const double>> Model::query_parameters() const {
  auto p = encoder.parameters();
  append(p, projector.parameters());
  append(p, classifier.parameters());
  return p;
}

std::vector<std::span<double>> Model::query_gradients() {
  auto g = encoder.gradients();
  append(g, projector.gradients());
  append(g, classifier.gradients());
  return g;
}

std::vector<std::span<double>> Model::key_parameters() {
  auto p = key_encoder.parameters();
  append(p, key_projector.parameters());
  return p;
}

std::vector<std::span<const double>> Model::key_parameters() const {
  auto p = key_encoder.parameters();
  append(p, key_projector.parameters());
  return p;
}

std::vector<std::span<const double>> Model::query_branch_parameters() const {
  auto p = encoder.parameters();
  append(p, projector.parameters());
  return p;
}

void Model::zero_grad() {
  encoder.zero_grad();
  projector.zero_grad();
  classifier.zero_grad();
}

// ---------------------------------------------------------------------------
// State

std::size_t TrainerState::contrastive_warmup() const noexcept {
  return std::max(config.knn_k + 1, num_prototypes());
}

double TrainerState::learning_rate_at(std::int64_t s) const {
  return CosineSchedule{config.learning_rate, config.final_learning_rate, config.epochs * steps_per_epoch}.value(s);
}

double TrainerState::teacher_temperature_at(std::int64_t s) const {
  return CosineSchedule{config.tau_t_start, config.tau_t_end, config.tau_t_warmup_epochs * steps_per_epoch}.value(s);
}

TrainerState init_state(const TrainConfig& config, std::size_t input_dim, int num_old, int num_new,
                        std::int64_t steps_per_epoch) {
  config.validate();
  if (input_dim == 0) throw InvalidArgument("init_state: input dimension must be positive");
  if (num_old < 0 || num_new < 0 || num_old + num_new == 0) throw InvalidArgument("init_state: invalid class counts");
  TrainerState s;
  s.config = config;
  s.input_dim = input_dim;
  s.num_old = num_old;
  s.num_new = num_new;
  s.steps_per_epoch = steps_per_epoch;
  const auto classes = static_cast<std::size_t>(num_old + num_new);
  s.num_heads = config.class_count_mode == ClassCountMode::Known
                    ? classes
                    : (config.initial_heads > 0 ? config.initial_heads : 2 * classes);
  if (s.num_prototypes() > config.queue_size)
    throw InvalidArgument("init_state: more prototypes than queue entries");

  std::vector<std::size_t> widths{input_dim};
  for (std::size_t l = 1; l < config.projector_layers; ++l) widths.push_back(config.projector_hidden);
  widths.push_back(config.projection_dim);

  s.model.encoder = SmallNet::near_identity(input_dim, config.encoder_jitter, mix_seed({config.seed, 0xE1}));
  s.model.projector = SmallNet(widths, mix_seed({config.seed, 0xE2}));
  s.model.classifier = CosineClassifier(s.num_heads, input_dim, mix_seed({config.seed, 0xE3}));
  s.model.key_encoder = s.model.encoder;
  s.model.key_projector = s.model.projector;
  s.queue = FeatureQueue(config.queue_size, config.projection_dim);
  s.tail_queues = ClassTailQueues(s.num_heads, config.class_tail_cap);
  s.uncertainty.assign(s.num_heads, 0.0);
  const auto params = s.model.query_parameters();
  s.optimizer = SgdMomentum(config.learning_rate, config.momentum, params);
  return s;
}

// ---------------------------------------------------------------------------
// One step

BatchViews make_views(const EmbeddingDataset& dataset, std::span<const std::size_t> batch, const TrainConfig& config,
                      std::int64_t step) {
  BatchViews v;
  v.first = Matrix(batch.size(), dataset.dim);
  v.second = Matrix(batch.size(), dataset.dim);
  v.labels.resize(batch.size());
  const AugmentOptions aug{config.noise_scale, config.drop_fraction};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Sample& s = dataset.samples.at(batch[i]);
    const ViewPair pair = two_views(s.x, aug, s.id, step, config.seed);
    std::copy(pair.first.begin(), pair.first.end(), v.first.row(i).begin());
    std::copy(pair.second.begin(), pair.second.end(), v.second.row(i).begin());
    v.labels[i] = s.labeled ? s.label : kUnlabeled;
  }
  return v;
}

StepTargets prepare_targets(const Model& model, const TrainConfig& config, const BatchViews& views,
                            const PrototypeBank& bank, std::span<const double> uncertainty, double tau_t) {
  const std::size_t batch = views.first.rows();
  const std::size_t heads = model.classifier.num_classes();
  StepTargets t;
  t.keys = Matrix(batch, model.key_projector.output_dim());
  for (std::size_t i = 0; i < batch; ++i) {
    const Vec b = model.key_embedding(views.second.row(i));
    std::copy(b.begin(), b.end(), t.keys.row(i).begin());
  }
  t.temperatures.assign(batch, 0.5 * (config.tau_min + config.tau_max));
  if (bank.initialized) {
    t.scores = tailedness_scores(t.keys, bank);
    for (std::size_t i = 0; i < batch; ++i)
      t.temperatures[i] = dynamic_temperature(t.scores[i], bank.densities, config.tau_min, config.tau_max);
  }
  t.targets_first = Matrix(batch, heads, 0.0);
  t.targets_second = Matrix(batch, heads, 0.0);
  t.assigned.resize(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const int y = views.labels[i];
    if (y >= 0) {
      if (static_cast<std::size_t>(y) >= heads) throw InvalidArgument("prepare_targets: label exceeds head count");
      t.targets_first(i, static_cast<std::size_t>(y)) = 1.0;
      t.targets_second(i, static_cast<std::size_t>(y)) = 1.0;
      t.assigned[i] = y;
      continue;
    }
    const Vec q_first = soft_pseudo_label(model.logits(views.second.row(i)), uncertainty, config.lambda_var, tau_t);
    const Vec q_second = soft_pseudo_label(model.logits(views.first.row(i)), uncertainty, config.lambda_var, tau_t);
    std::copy(q_first.begin(), q_first.end(), t.targets_first.row(i).begin());
    std::copy(q_second.begin(), q_second.end(), t.targets_second.row(i).begin());
    t.assigned[i] = static_cast<int>(argmax(q_first));
  }
  return t;
}

namespace {

std::string first_non_finite(Model& model, const Matrix& h, const Matrix& keys, const Matrix& logits_first,
                             const Matrix& logits_second, const LossBreakdown& losses) {
  if (!all_finite(h.flat())) return "query embeddings";
  if (!all_finite(keys.flat())) return "key embeddings";
  if (!all_finite(logits_first.flat()) || !all_finite(logits_second.flat())) return "classifier logits";
  if (!std::isfinite(losses.representation)) return "representation loss";
  if (!std::isfinite(losses.classification)) return "classification loss";
  for (auto g : model.encoder.gradients())
    if (!all_finite(g)) return "encoder gradients";
  for (auto g : model.projector.gradients())
    if (!all_finite(g)) return "projector gradients";
  for (auto g : model.classifier.gradients())
    if (!all_finite(g)) return "classifier gradients";
  return {};
}

}  // namespace

ObjectiveResult compute_objective(Model& model, const TrainConfig& config, const BatchViews& views,
                                  const StepTargets& targets, const QueueSnapshot& queue, bool contrastive_active) {
  const std::size_t batch = views.first.rows();
  const std::size_t heads = model.classifier.num_classes();
  model.zero_grad();

  std::vector<ForwardTrace> enc_first(batch), enc_second(batch), proj_first(batch);
  Matrix z_first(batch, model.encoder.output_dim());
  Matrix z_second(batch, model.encoder.output_dim());
  Matrix raw_h(batch, model.projector.output_dim());
  Matrix h(batch, model.projector.output_dim());
  Matrix logits_first(batch, heads);
  Matrix logits_second(batch, heads);
  for (std::size_t i = 0; i < batch; ++i) {
    const Vec z1 = model.encoder.forward(views.first.row(i), enc_first[i]);
    const Vec z2 = model.encoder.forward(views.second.row(i), enc_second[i]);
    const Vec y1 = model.projector.forward(z1, proj_first[i]);
    const Vec h1 = l2_normalize(y1);
    const Vec c1 = model.classifier.logits(z1);
    const Vec c2 = model.classifier.logits(z2);
    std::copy(z1.begin(), z1.end(), z_first.row(i).begin());
    std::copy(z2.begin(), z2.end(), z_second.row(i).begin());
    std::copy(y1.begin(), y1.end(), raw_h.row(i).begin());
    std::copy(h1.begin(), h1.end(), h.row(i).begin());
    std::copy(c1.begin(), c1.end(), logits_first.row(i).begin());
    std::copy(c2.begin(), c2.end(), logits_second.row(i).begin());
  }

  RepresentationLoss rep;
  rep.grad = Matrix(batch, h.cols(), 0.0);
  if (contrastive_active) {
    RepresentationInputs in;
    in.queries = &h;
    in.positives = &targets.keys;
    in.labels = views.labels;
    in.temperatures = targets.temperatures;
    in.lambda_rep = config.lambda_rep;
    in.tau_sup = config.tau_sup;
    rep = representation_loss(in, queue);
  }
  const ClassifierLoss cls = classifier_loss(logits_first, logits_second, targets.targets_first,
                                             targets.targets_second, config.tau_s, config.epsilon);

  for (std::size_t i = 0; i < batch; ++i) {
    Vec dz1 = model.classifier.backward(z_first.row(i), cls.grad_first.row(i));
    if (contrastive_active) {
      const Vec dy1 = l2_normalize_backward(raw_h.row(i), rep.grad.row(i));
      const Vec dz_proj = model.projector.backward(proj_first[i], dy1);
      for (std::size_t k = 0; k < dz1.size(); ++k) dz1[k] += dz_proj[k];
    }
    model.encoder.backward(enc_first[i], dz1);
    const Vec dz2 = model.classifier.backward(z_second.row(i), cls.grad_second.row(i));
    model.encoder.backward(enc_second[i], dz2);
  }

  ObjectiveResult out;
  out.losses = total_loss(rep, cls);
  out.first_non_finite = first_non_finite(model, h, targets.keys, logits_first, logits_second, out.losses);
  return out;
}

LossBreakdown train_step(TrainerState& state, const EmbeddingDataset& dataset, std::span<const std::size_t> batch) {
  if (batch.empty()) throw InvalidArgument("train_step: empty batch");
  if (dataset.dim != state.input_dim) throw InvalidArgument("train_step: dataset dimension does not match the model");
  const TrainConfig& cfg = state.config;

  const BatchViews views = make_views(dataset, batch, cfg, state.step);
  const StepTargets targets =
      prepare_targets(state.model, cfg, views, state.bank, state.uncertainty, state.teacher_temperature_at(state.step));
  const QueueSnapshot snapshot = state.queue.snapshot();
  const bool contrastive = snapshot.size() >= state.contrastive_warmup();
  const ObjectiveResult result = compute_objective(state.model, cfg, views, targets, snapshot, contrastive);
  if (!result.first_non_finite.empty())
    throw NonFiniteError("train_step " + std::to_string(state.step) + ": non-finite " + result.first_non_finite);

  state.optimizer.set_learning_rate(state.learning_rate_at(state.step));
  const auto params = state.model.query_parameters();
  const auto grads = state.model.query_gradients();
  state.optimizer.step(params, grads);

  const auto key_params = state.model.key_parameters();
  const auto query_params = state.model.query_branch_parameters();
  ema_params(key_params, query_params, cfg.key_momentum);

  state.queue.push_batch(targets.keys, views.labels);

  if (state.queue.full()) {
    const QueueSnapshot filled = state.queue.snapshot();
    if (!state.bank.initialized) {
      state.bank = init_prototypes(filled, state.num_prototypes(),
                                   mix_seed({cfg.seed, static_cast<std::uint64_t>(state.step), 0x9307}));
      state.bank.densities = knn_density(state.bank, filled, cfg.knn_k);
    } else {
      update_prototypes(state.bank, filled, cfg.lambda_tail, cfg.knn_k);
    }
    state.queue_refilling = false;
  }

  if (!targets.scores.empty()) {
    state.tail_queues.update(targets.scores, targets.assigned);
    state.uncertainty = class_uncertainty(state.tail_queues);
  }
  ++state.step;
  return result.losses;
}

// ---------------------------------------------------------------------------

namespace {

void accumulate(LossBreakdown& acc, const LossBreakdown& b) {
  acc.mean_unsup += b.mean_unsup;
  acc.mean_sup += b.mean_sup;
  acc.representation += b.representation;
  acc.mean_cross_entropy += b.mean_cross_entropy;
  acc.entropy += b.entropy;
  acc.classification += b.classification;
  acc.total += b.total;
}

void scale(LossBreakdown& acc, double f) {
  acc.mean_unsup *= f;
  acc.mean_sup *= f;
  acc.representation *= f;
  acc.mean_cross_entropy *= f;
  acc.entropy *= f;
  acc.classification *= f;
  acc.total *= f;
}

}  // namespace

std::vector<EpochLog> resume(TrainerState& state, const EmbeddingDataset& train, const EpochCallback& on_epoch,
                             std::int64_t stop_epoch) {
  if (train.samples.empty()) throw InvalidArgument("fit: empty training set");
  const std::int64_t last = stop_epoch >= 0 ? std::min(stop_epoch, state.config.epochs) : state.config.epochs;
  std::vector<EpochLog> log;
  while (state.epoch < last) {
    const auto batches = iterate_batches(train.size(), state.config.batch_size, state.config.seed, state.epoch);
    EpochLog entry;
    entry.epoch = state.epoch + 1;
    for (const auto& batch : batches) {
      accumulate(entry.mean, train_step(state, train, batch));
      ++entry.steps;
    }
    scale(entry.mean, 1.0 / static_cast<double>(entry.steps));
    entry.learning_rate = state.learning_rate_at(state.step - 1);
    entry.teacher_temperature = state.teacher_temperature_at(state.step - 1);
    entry.prototypes_ready = state.bank.initialized;
    ++state.epoch;
    log.push_back(entry);
    if (on_epoch) on_epoch(state, entry);
  }
  return log;
}

FitResult fit(const EmbeddingDataset& train, const TrainConfig& config, const EpochCallback& on_epoch) {
  train.validate();
  const auto steps = static_cast<std::int64_t>((train.size() + config.batch_size - 1) / std::max<std::size_t>(config.batch_size, 1));
  FitResult result{init_state(config, train.dim, train.num_old, train.num_new, steps), {}};
  result.log = resume(result.state, train, on_epoch);
  return result;
}

ClassCountEstimate estimate_class_count(const Model& model, const EmbeddingDataset& dataset) {
  ClassCountEstimate est;
  const std::size_t heads = model.classifier.num_classes();
  est.assignments_per_head.assign(heads, 0);
  for (const auto& s : dataset.samples) ++est.assignments_per_head[model.predict(s.x)];
  est.active.resize(heads);
  for (std::size_t k = 0; k < heads; ++k) {
    est.active[k] = est.assignments_per_head[k] > 0;
    est.count += est.active[k];
  }
  return est;
}

}  // namespace rowssl
