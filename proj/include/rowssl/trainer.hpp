#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rowssl/data.hpp"
#include "rowssl/losses.hpp"
#include "rowssl/numerics.hpp"
#include "rowssl/queue.hpp"
#include "rowssl/tailedness.hpp"

namespace rowssl {

enum class ClassCountMode { Known, Estimate };

std::string to_string(ClassCountMode mode);
ClassCountMode parse_class_count_mode(const std::string& text);

struct TrainConfig {
  std::int64_t epochs = 200;
  std::size_t batch_size = 128;
  double learning_rate = 0.1;
  double final_learning_rate = 1e-4;
  double momentum = 0.9;
  double lambda_rep = 0.35;
  double tau_s = 0.1;
  double tau_t_start = 0.07;
  double tau_t_end = 0.04;
  std::int64_t tau_t_warmup_epochs = 30;
  double epsilon = 4.0;
  std::size_t num_prototypes = 0;  // 0: one per classifier head
  double lambda_tail = 0.9;
  std::size_t queue_size = 4096;
  std::size_t knn_k = 15;
  double tau_min = 0.05;
  double tau_max = 1.0;
  double lambda_var = 1.0;
  double tau_sup = 0.07;
  double key_momentum = 0.999;
  ClassCountMode class_count_mode = ClassCountMode::Known;
  std::size_t initial_heads = 0;  // estimate mode; 0 means 2C
  std::size_t class_tail_cap = 256;
  double noise_scale = 0.1;
  double drop_fraction = 0.1;
  std::size_t projector_hidden = 256;
  std::size_t projector_layers = 2;
  std::size_t projection_dim = 256;
  double encoder_jitter = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Query encoder + projector + classifier, and the EMA key encoder + projector.
struct Model {
  SmallNet encoder;
  SmallNet projector;
  CosineClassifier classifier;
  SmallNet key_encoder;
  SmallNet key_projector;

  Vec features(std::span<const double> x) const;
  Vec embedding(std::span<const double> x) const;  // unit-norm projector output
  Vec key_embedding(std::span<const double> x) const;
  Vec logits(std::span<const double> x) const;
  // Highest-scoring head among those enabled in `active` (all when empty).
  std::size_t predict(std::span<const double> x, const std::vector<bool>& active = {}) const;

  std::vector<std::span<double>> query_parameters();
  std::vector<std::span<const double>> query_parameters() const;
  std::vector<std::span<double>> query_gradients();
  std::vector<std::span<double>> key_parameters();
  std::vector<std::span<const double>> key_parameters() const;
  // Encoder/projector parameters of the query branch, in key_parameters() order.
  std::vector<std::span<const double>> query_branch_parameters() const;
  void zero_grad();
};

struct TrainerState {
  TrainConfig config;
  std::size_t input_dim = 0;
  int num_old = 0;
  int num_new = 0;
  std::size_t num_heads = 0;
  Model model;
  FeatureQueue queue;
  PrototypeBank bank;
  ClassTailQueues tail_queues;
  Vec uncertainty;  // u_{e-1}: computed by the previous step
  SgdMomentum optimizer;
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  std::int64_t steps_per_epoch = 0;
  bool queue_refilling = false;  // set after a checkpoint restore

  std::size_t num_classes() const noexcept { return static_cast<std::size_t>(num_old + num_new); }
  std::size_t num_prototypes() const noexcept {
    return config.num_prototypes > 0 ? config.num_prototypes : num_heads;
  }
  // Queue entries needed before the contrastive terms are active.
  std::size_t contrastive_warmup() const noexcept;
  double learning_rate_at(std::int64_t step) const;
  double teacher_temperature_at(std::int64_t step) const;
};

// Fresh state for a dataset of the given shape. steps_per_epoch feeds the schedules.
TrainerState init_state(const TrainConfig& config, std::size_t input_dim, int num_old, int num_new,
                        std::int64_t steps_per_epoch);

struct BatchViews {
  Matrix first;
  Matrix second;
  std::vector<int> labels;  // ground truth for labeled samples, kUnlabeled otherwise
};

BatchViews make_views(const EmbeddingDataset& dataset, std::span<const std::size_t> batch, const TrainConfig& config,
                      std::int64_t step);

// Stop-gradient quantities of one step: keys, tailedness, temperatures, targets.
struct StepTargets {
  Matrix keys;
  Vec scores;  // empty until prototypes exist
  Vec temperatures;
  Matrix targets_first;   // supervise view 1 (from view 2 teacher)
  Matrix targets_second;  // supervise view 2 (from view 1 teacher)
  std::vector<int> assigned;  // argmax of the view-1 target
};

StepTargets prepare_targets(const Model& model, const TrainConfig& config, const BatchViews& views,
                            const PrototypeBank& bank, std::span<const double> uncertainty, double tau_t);

struct ObjectiveResult {
  LossBreakdown losses;
  std::string first_non_finite;  // empty when every tensor is finite
};

// L_rep + L_cls for fixed targets; zeroes and then fills the query gradients.
ObjectiveResult compute_objective(Model& model, const TrainConfig& config, const BatchViews& views,
                                  const StepTargets& targets, const QueueSnapshot& queue, bool contrastive_active);

// One optimisation step on the given sample indices.
LossBreakdown train_step(TrainerState& state, const EmbeddingDataset& dataset, std::span<const std::size_t> batch);

struct EpochLog {
  std::int64_t epoch = 0;
  std::size_t steps = 0;
  LossBreakdown mean;
  double learning_rate = 0.0;
  double teacher_temperature = 0.0;
  bool prototypes_ready = false;
};

using EpochCallback = std::function<void(const TrainerState&, const EpochLog&)>;

struct FitResult {
  TrainerState state;
  std::vector<EpochLog> log;
};

// Trains on labeled + unlabeled samples for config.epochs epochs.
FitResult fit(const EmbeddingDataset& train, const TrainConfig& config, const EpochCallback& on_epoch = {});

// Continues training an existing state until state.config.epochs epochs are
// done, or until `stop_epoch` epochs when it is non-negative.
std::vector<EpochLog> resume(TrainerState& state, const EmbeddingDataset& train, const EpochCallback& on_epoch = {},
                             std::int64_t stop_epoch = -1);

struct ClassCountEstimate {
  std::size_t count = 0;
  std::vector<bool> active;  // per head
  std::vector<std::size_t> assignments_per_head;
};

// Heads that win the argmax for at least one training sample.
ClassCountEstimate estimate_class_count(const Model& model, const EmbeddingDataset& dataset);

// Binary container "ROWSSL-CKPT 1" with little-endian f64 tensors. The queue
// is not stored; a restored state refills it before contrastive terms resume.
void save_checkpoint(const TrainerState& state, const std::filesystem::path& path);
TrainerState load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const TrainerState& state);
TrainerState deserialize_checkpoint(const std::string& bytes);

}  // namespace rowssl
