#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rowssl/data.hpp"
#include "rowssl/trainer.hpp"

namespace rowssl {

// JSON conversions. Readers reject unknown keys and keep defaults for absent ones.
nlohmann::json to_json(const BlobSpec& spec);
nlohmann::json to_json(const SplitSpec& spec);
nlohmann::json to_json(const TrainConfig& config);
void from_json(const nlohmann::json& j, BlobSpec& spec);
void from_json(const nlohmann::json& j, SplitSpec& spec);
void from_json(const nlohmann::json& j, TrainConfig& config);

// Everything one reproducible run needs.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "run";
  BlobSpec blobs;
  SplitSpec split;
  std::size_t test_per_class = 100;
  TrainConfig train;
  std::vector<std::string> protocols = {"train", "test-recluster", "test-rematch", "test-inductive"};

  // Seeds of the sections derived from `seed`.
  void propagate_seed();
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// Applies "section.key=value" (or "key=value" for top-level keys); the value
// is parsed as JSON when possible, otherwise taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

}  // namespace rowssl
