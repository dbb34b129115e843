#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rowssl/config.hpp"
#include "rowssl/eval.hpp"

namespace rowssl {

// File names inside a run directory.
namespace run_files {
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kPool = "pool.emb";
inline constexpr const char* kLabeled = "labeled.emb";
inline constexpr const char* kUnlabeled = "unlabeled.emb";
inline constexpr const char* kTest = "test.emb";
inline constexpr const char* kManifest = "split_manifest.json";
inline constexpr const char* kCheckpoint = "model.ckpt";
inline constexpr const char* kTrainLog = "train_log.csv";
inline constexpr const char* kReportCsv = "report.csv";
inline constexpr const char* kReportJson = "report.json";
inline constexpr const char* kSummary = "summary.csv";
inline constexpr const char* kLossChart = "loss.svg";
inline constexpr const char* kAccuracyChart = "accuracy.svg";
}  // namespace run_files

// Shortest round-trip decimal; "nan" for NaN.
std::string format_number(double value);

// Worker cap from ROWSSL_THREADS (default 1).
unsigned worker_threads();

struct EvalInputs {
  std::optional<std::filesystem::path> checkpoint;  // default: <out>/model.ckpt
  std::optional<std::filesystem::path> unlabeled;   // default: <out>/unlabeled.emb
  std::optional<std::filesystem::path> test;        // default: <out>/test.emb
};

struct EvalOutcome {
  std::vector<EvalReport> reports;
  std::optional<ClassCountEstimate> class_count;
};

// Evaluates `protocols` in order; the train protocol runs first whenever the
// inductive protocol needs its matching.
EvalOutcome evaluate_protocols(const TrainerState& state, const EmbeddingDataset& unlabeled,
                               const EmbeddingDataset& test, std::span<const std::size_t> train_class_counts,
                               const std::vector<std::string>& protocols, std::uint64_t seed);

std::string report_csv(const std::vector<EvalReport>& reports);
nlohmann::json report_json(const EvalOutcome& outcome);

// Subcommands. Each writes into config.out and echoes the effective config there.
void cmd_synth(const RunConfig& config, std::ostream& log);
void cmd_split(const RunConfig& config, std::ostream& log);
void cmd_train(const RunConfig& config, std::ostream& log);
void cmd_eval(const RunConfig& config, const EvalInputs& inputs, std::ostream& log);
// Aggregates one run directory, or every run directory directly below `dir`.
void cmd_report(const std::filesystem::path& dir, std::ostream& log);
// synth + split + train + eval + report in one directory.
void cmd_run(const RunConfig& config, std::ostream& log);

// Minimal SVG line chart; series share the x axis.
struct ChartSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<ChartSeries>& series);

// Entry point; returns the process exit code.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace rowssl
