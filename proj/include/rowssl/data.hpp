#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rowssl/numerics.hpp"

namespace rowssl {

struct Sample {
  std::int64_t id = 0;
  Vec x;
  int label = 0;
  bool labeled = false;

  friend bool operator==(const Sample&, const Sample&) = default;
};

// Embedding vectors with ground-truth labels. Classes [0, num_old) are known,
// [num_old, num_old + num_new) are novel. Labeled samples only carry known classes.
struct EmbeddingDataset {
  std::size_t dim = 0;
  int num_old = 0;
  int num_new = 0;
  std::vector<Sample> samples;

  int num_classes() const noexcept { return num_old + num_new; }
  std::size_t size() const noexcept { return samples.size(); }
  std::vector<std::size_t> class_counts() const;

  // Throws InvalidArgument naming the first violated invariant.
  void validate() const;

  friend bool operator==(const EmbeddingDataset&, const EmbeddingDataset&) = default;
};

// Concatenates datasets that share dim and class metadata.
EmbeddingDataset merge(const EmbeddingDataset& a, const EmbeddingDataset& b);

struct BlobSpec {
  int num_classes = 8;
  std::size_t dim = 32;
  double separation = 20.0;  // radius of the sphere holding class centers
  double stddev = 1.0;
  std::size_t per_class = 1000;
  std::uint64_t seed = 0;
};

// Isotropic Gaussian blobs around centers drawn on a sphere. Output has
// num_old = num_classes, num_new = 0, nothing labeled.
EmbeddingDataset generate_blobs(const BlobSpec& spec);
Matrix blob_centers(const BlobSpec& spec);

enum class MismatchMode { MCAR, MNAR };

std::string to_string(MismatchMode mode);
MismatchMode parse_mismatch_mode(const std::string& text);

struct SplitSpec {
  int num_old = 4;
  int num_new = 4;
  std::size_t n_max = 200;
  double gamma_l = 10.0;
  double gamma_u = 10.0;
  MismatchMode mode = MismatchMode::MCAR;
  // Labeled share of the head known class: its labeled count is
  // n_max * f / (1 - f), so the default 0.5 gives n_max labeled and n_max unlabeled.
  double labeled_fraction = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

// n_c = max(1, round_half_up(n_max * gamma^(-rank / (num_classes - 1)))).
std::vector<std::size_t> long_tail_profile(std::size_t n_max, double gamma, int num_classes);

struct SplitCounts {
  std::vector<std::size_t> labeled;    // per known class
  std::vector<std::size_t> unlabeled;  // per class (known then novel)
};

SplitCounts split_counts(const SplitSpec& spec);

struct SplitResult {
  EmbeddingDataset labeled;
  EmbeddingDataset unlabeled;
  SplitCounts counts;
};

// Draws the labeled (known classes, ratio gamma_l) and unlabeled (all classes,
// ratio gamma_u) sets without replacement. MNAR reverses the unlabeled ordering.
SplitResult make_long_tailed_split(const EmbeddingDataset& pool, const SplitSpec& spec);

// Balanced evaluation set drawn from pool samples whose ids are not in `exclude`.
EmbeddingDataset balanced_holdout(const EmbeddingDataset& pool, const std::vector<std::int64_t>& exclude,
                                  std::size_t per_class, int num_old, int num_new, std::uint64_t seed);

struct ViewPair {
  Vec first;
  Vec second;
};

struct AugmentOptions {
  double noise_scale = 0.1;
  double drop_fraction = 0.1;
};

// Two independently perturbed copies of x. Each view adds N(0, noise_scale^2)
// noise and zeroes floor(drop_fraction * d) random coordinates.
ViewPair two_views(std::span<const double> x, const AugmentOptions& options, std::int64_t sample_id,
                   std::int64_t step, std::uint64_t seed);

// Shuffled index batches for one epoch; the last batch may be partial.
std::vector<std::vector<std::size_t>> iterate_batches(std::size_t num_samples, std::size_t batch_size,
                                                      std::uint64_t seed, std::int64_t epoch);

// Text format: "ROWSSL-EMB 1", "N d C_old C_new", then "id label is_labeled v_1 ... v_d".
void save_dataset(const EmbeddingDataset& dataset, const std::filesystem::path& path);
EmbeddingDataset load_dataset(const std::filesystem::path& path);
std::string format_dataset(const EmbeddingDataset& dataset);
EmbeddingDataset parse_dataset(const std::string& text);

}  // namespace rowssl
