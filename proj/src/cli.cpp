#include "rowssl/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "rowssl/errors.hpp"

namespace rowssl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kProtocolOrder = {"train", "test-recluster", "test-rematch", "test-inductive"};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing input '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void require_input(const fs::path& path, const char* producer) {
  if (!fs::exists(path))
    throw std::runtime_error("missing input '" + path.string() + "' (run `rowssl " + producer + "` first)");
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string join_counts(const std::vector<std::size_t>& counts) {
  std::string s;
  for (std::size_t i = 0; i < counts.size(); ++i) s += (i ? " " : "") + std::to_string(counts[i]);
  return s;
}

void echo_config(const RunConfig& config) {
  write_text(fs::path(config.out) / run_files::kConfig, to_json(config).dump(2) + "\n");
}

EmbeddingDataset load_training_set(const fs::path& dir) {
  const fs::path labeled = dir / run_files::kLabeled;
  const fs::path unlabeled = dir / run_files::kUnlabeled;
  require_input(labeled, "split");
  require_input(unlabeled, "split");
  return merge(load_dataset(labeled), load_dataset(unlabeled));
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) items.push_back(item);
  return items;
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

unsigned worker_threads() {
  const char* env = std::getenv("ROWSSL_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  unsigned n = 0;
  const char* end = env + std::char_traits<char>::length(env);
  const auto res = std::from_chars(env, end, n);
  if (res.ec != std::errc() || res.ptr != end || n == 0)
    throw InvalidArgument(std::string("ROWSSL_THREADS must be a positive integer, got '") + env + "'");
  return n;
}

// ---------------------------------------------------------------------------

EvalOutcome evaluate_protocols(const TrainerState& state, const EmbeddingDataset& unlabeled,
                               const EmbeddingDataset& test, std::span<const std::size_t> train_class_counts,
                               const std::vector<std::string>& protocols, std::uint64_t seed) {
  EvalOutcome outcome;
  EvalContext ctx;
  ctx.num_old = state.num_old;
  ctx.num_new = state.num_new;
  ctx.train_class_counts.assign(train_class_counts.begin(), train_class_counts.end());
  ctx.seed = seed;
  if (state.config.class_count_mode == ClassCountMode::Estimate) {
    outcome.class_count = estimate_class_count(state.model, unlabeled);
    ctx.active_heads = outcome.class_count->active;
  }

  std::vector<EvalProtocol> parsed;
  for (const auto& name : protocols) parsed.push_back(EvalProtocol::parse(name));
  const bool needs_train = std::any_of(parsed.begin(), parsed.end(), [](const EvalProtocol& p) {
    return p.set == EvalSet::TrainUnlabeled || (!p.recluster && !p.rematch);
  });
  std::optional<EvalReport> train_report;
  if (needs_train) {
    train_report = evaluate(state.model, unlabeled, EvalProtocol::parse("train"), ctx);
    ctx.train_matching = train_report->matching;
  }

  std::vector<std::optional<EvalReport>> results(parsed.size());
  const unsigned threads = worker_threads();
  std::size_t next = 0;
  while (next < parsed.size()) {
    std::vector<std::pair<std::size_t, std::future<EvalReport>>> wave;
    for (; next < parsed.size() && wave.size() < threads; ++next) {
      if (parsed[next].set == EvalSet::TrainUnlabeled) {
        results[next] = *train_report;
        continue;
      }
      const EvalProtocol protocol = parsed[next];
      if (threads == 1) {
        results[next] = evaluate(state.model, test, protocol, ctx);
      } else {
        wave.emplace_back(next, std::async(std::launch::async,
                                           [&, protocol] { return evaluate(state.model, test, protocol, ctx); }));
      }
    }
    for (auto& [i, f] : wave) results[i] = f.get();
  }
  for (auto& r : results) outcome.reports.push_back(std::move(*r));
  return outcome;
}

std::string report_csv(const std::vector<EvalReport>& reports) {
  std::string out = "protocol,metric,group,value\n";
  for (const auto& r : reports) {
    for (const char* metric : {"acc", "bacc"}) {
      const auto& values = std::string(metric) == "acc" ? r.metrics.acc : r.metrics.bacc;
      for (std::size_t g = 0; g < kNumGroups; ++g)
        out += r.protocol + "," + metric + "," + kGroupNames[g] + "," + format_number(values[g]) + "\n";
    }
  }
  return out;
}

json report_json(const EvalOutcome& outcome) {
  json protocols = json::object();
  for (const auto& r : outcome.reports) {
    json acc = json::object(), bacc = json::object(), recall = json::array();
    for (std::size_t g = 0; g < kNumGroups; ++g) {
      acc[kGroupNames[g]] = number_or_null(r.metrics.acc[g]);
      bacc[kGroupNames[g]] = number_or_null(r.metrics.bacc[g]);
    }
    for (double v : r.per_class_recall) recall.push_back(number_or_null(v));
    protocols[r.protocol] = {{"acc", acc},
                             {"bacc", bacc},
                             {"per_class_recall", recall},
                             {"matching", r.matching},
                             {"num_samples", r.num_samples}};
  }
  json j = {{"protocols", protocols}};
  if (outcome.class_count) {
    j["estimated_classes"] = outcome.class_count->count;
    j["assignments_per_head"] = outcome.class_count->assignments_per_head;
  }
  return j;
}

// ---------------------------------------------------------------------------

void cmd_synth(const RunConfig& config, std::ostream& log) {
  const EmbeddingDataset pool = generate_blobs(config.blobs);
  const fs::path path = fs::path(config.out) / run_files::kPool;
  echo_config(config);
  write_text(path, format_dataset(pool));
  log << "wrote " << path.string() << ": N=" << pool.size() << " d=" << pool.dim
      << " class counts [" << join_counts(pool.class_counts()) << "]\n";
}

void cmd_split(const RunConfig& config, std::ostream& log) {
  const fs::path dir(config.out);
  require_input(dir / run_files::kPool, "synth");
  const EmbeddingDataset pool = load_dataset(dir / run_files::kPool);
  const SplitResult split = make_long_tailed_split(pool, config.split);
  std::vector<std::int64_t> used;
  for (const auto* part : {&split.labeled, &split.unlabeled})
    for (const auto& s : part->samples) used.push_back(s.id);
  const EmbeddingDataset test = balanced_holdout(pool, used, config.test_per_class, config.split.num_old,
                                                 config.split.num_new, mix_seed({config.split.seed, 0x7E57}));
  echo_config(config);
  write_text(dir / run_files::kLabeled, format_dataset(split.labeled));
  write_text(dir / run_files::kUnlabeled, format_dataset(split.unlabeled));
  write_text(dir / run_files::kTest, format_dataset(test));
  const json manifest = {{"mode", to_string(config.split.mode)},
                         {"gamma_l", config.split.gamma_l},
                         {"gamma_u", config.split.gamma_u},
                         {"n_max", config.split.n_max},
                         {"num_old", config.split.num_old},
                         {"num_new", config.split.num_new},
                         {"labeled_counts", split.counts.labeled},
                         {"unlabeled_counts", split.counts.unlabeled},
                         {"test_per_class", config.test_per_class}};
  write_text(dir / run_files::kManifest, manifest.dump(2) + "\n");
  log << "split: labeled [" << join_counts(split.counts.labeled) << "], unlabeled ["
      << join_counts(split.counts.unlabeled) << "], test " << test.size() << " samples\n";
}

void cmd_train(const RunConfig& config, std::ostream& log) {
  const fs::path dir(config.out);
  const EmbeddingDataset train = load_training_set(dir);
  echo_config(config);
  const FitResult result = fit(train, config.train, [&](const TrainerState&, const EpochLog& e) {
    log << "epoch " << e.epoch << " loss " << format_number(e.mean.total) << "\n";
  });
  std::string csv =
      "epoch,steps,learning_rate,teacher_temperature,prototypes_ready,unsup,sup,representation,"
      "cross_entropy,entropy,classification,total\n";
  for (const auto& e : result.log) {
    const auto& m = e.mean;
    csv += std::to_string(e.epoch) + "," + std::to_string(e.steps) + "," + format_number(e.learning_rate) + "," +
           format_number(e.teacher_temperature) + "," + (e.prototypes_ready ? "1" : "0") + "," +
           format_number(m.mean_unsup) + "," + format_number(m.mean_sup) + "," + format_number(m.representation) +
           "," + format_number(m.mean_cross_entropy) + "," + format_number(m.entropy) + "," +
           format_number(m.classification) + "," + format_number(m.total) + "\n";
  }
  write_text(dir / run_files::kTrainLog, csv);
  save_checkpoint(result.state, dir / run_files::kCheckpoint);
  log << "wrote " << (dir / run_files::kCheckpoint).string() << " after " << result.state.epoch << " epochs\n";
}

void cmd_eval(const RunConfig& config, const EvalInputs& inputs, std::ostream& log) {
  const fs::path dir(config.out);
  const fs::path ckpt = inputs.checkpoint.value_or(dir / run_files::kCheckpoint);
  const fs::path unlabeled_path = inputs.unlabeled.value_or(dir / run_files::kUnlabeled);
  const fs::path test_path = inputs.test.value_or(dir / run_files::kTest);
  require_input(ckpt, "train");
  require_input(unlabeled_path, "split");
  require_input(test_path, "split");
  const TrainerState state = load_checkpoint(ckpt);
  const EmbeddingDataset unlabeled = load_dataset(unlabeled_path);
  const EmbeddingDataset test = load_dataset(test_path);

  // Group boundaries follow the full training distribution.
  std::vector<std::size_t> counts = unlabeled.class_counts();
  const fs::path labeled_path = unlabeled_path.parent_path() / run_files::kLabeled;
  if (fs::exists(labeled_path)) {
    const auto labeled_counts = load_dataset(labeled_path).class_counts();
    for (std::size_t c = 0; c < counts.size() && c < labeled_counts.size(); ++c) counts[c] += labeled_counts[c];
  }
  const EvalOutcome outcome =
      evaluate_protocols(state, unlabeled, test, counts, config.protocols, mix_seed({config.seed, 0xE7A1}));
  echo_config(config);
  write_text(dir / run_files::kReportCsv, report_csv(outcome.reports));
  write_text(dir / run_files::kReportJson, report_json(outcome).dump(2) + "\n");
  for (const auto& r : outcome.reports)
    log << r.protocol << ": ACC " << format_number(r.acc(kAll)) << " bACC " << format_number(r.bacc(kAll)) << "\n";
  if (outcome.class_count) log << "estimated classes: " << outcome.class_count->count << "\n";
}

// ---------------------------------------------------------------------------

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<ChartSeries>& series) {
  constexpr double width = 640, height = 400, left = 70, right = 160, top = 40, bottom = 50;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  double x_min = INFINITY, x_max = -INFINITY, y_min = INFINITY, y_max = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min(y_min, s.y[i]);
      y_max = std::max(y_max, s.y[i]);
    }
  if (!std::isfinite(x_min)) x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  if (x_max == x_min) x_min -= 0.5, x_max += 0.5;
  if (y_max == y_min) y_min -= 0.5, y_max += 0.5;
  auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
  auto py = [&](double y) { return top + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h; };
  auto num = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
    return std::string(buf, res.ptr);
  };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
                                  "#7f7f7f"};

  std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + xml_escape(title) +
         "</text>\n";
  svg += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(plot_w) + "\" height=\"" +
         num(plot_h) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = x_min + (x_max - x_min) * t / 4.0;
    const double fy = y_min + (y_max - y_min) * t / 4.0;
    svg += "<text x=\"" + num(px(fx)) + "\" y=\"" + num(top + plot_h + 16) + "\" text-anchor=\"middle\">" +
           format_number(std::round(fx * 1000) / 1000) + "</text>\n";
    svg += "<text x=\"" + num(left - 6) + "\" y=\"" + num(py(fy) + 4) + "\" text-anchor=\"end\">" +
           format_number(std::round(fy * 1000) / 1000) + "</text>\n";
  }
  svg += "<text x=\"" + num(left + plot_w / 2) + "\" y=\"" + num(height - 10) + "\" text-anchor=\"middle\">" +
         xml_escape(x_label) + "</text>\n";
  svg += "<text x=\"16\" y=\"" + num(top + plot_h / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         num(top + plot_h / 2) + ")\">" + xml_escape(y_label) + "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = palette[k % std::size(palette)];
    std::string points;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      points += (points.empty() ? "" : " ") + num(px(s.x[i])) + "," + num(py(s.y[i]));
    }
    if (!points.empty())
      svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + points +
             "\"/>\n";
    const double ly = top + 14 + 16.0 * static_cast<double>(k);
    svg += "<line x1=\"" + num(left + plot_w + 10) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(left + plot_w + 30) +
           "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + num(left + plot_w + 36) + "\" y=\"" + num(ly) + "\">" + xml_escape(s.name) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

void cmd_report(const fs::path& dir, std::ostream& log) {
  if (!fs::is_directory(dir)) throw std::runtime_error("missing input '" + dir.string() + "': not a directory");
  std::vector<fs::path> runs;
  if (fs::exists(dir / run_files::kReportJson)) {
    runs.push_back(dir);
  } else {
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_directory() && fs::exists(entry.path() / run_files::kReportJson)) runs.push_back(entry.path());
    std::sort(runs.begin(), runs.end());
  }
  if (runs.empty())
    throw std::runtime_error("missing input '" + (dir / run_files::kReportJson).string() +
                             "' (no run directory with a report found; run `rowssl eval` first)");

  struct RunData {
    std::string name;
    json config;
    json report;
    ChartSeries loss;
  };
  std::vector<RunData> data;
  std::set<std::string> seen_protocols;
  for (const auto& run : runs) {
    RunData d;
    d.name = fs::absolute(run).lexically_normal().filename().string();
    if (d.name.empty()) d.name = fs::absolute(run).lexically_normal().parent_path().filename().string();
    d.report = json::parse(read_text(run / run_files::kReportJson));
    if (fs::exists(run / run_files::kConfig)) d.config = json::parse(read_text(run / run_files::kConfig));
    d.loss.name = d.name;
    if (fs::exists(run / run_files::kTrainLog)) {
      std::stringstream lines(read_text(run / run_files::kTrainLog));
      std::string line;
      std::getline(lines, line);  // header
      while (std::getline(lines, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        d.loss.x.push_back(std::stod(cells.front()));
        d.loss.y.push_back(cells.back() == "nan" ? NAN : std::stod(cells.back()));
      }
    }
    for (const auto& item : d.report.at("protocols").items()) seen_protocols.insert(item.key());
    data.push_back(std::move(d));
  }
  std::vector<std::string> protocols;
  for (const auto& p : kProtocolOrder)
    if (seen_protocols.contains(p)) protocols.push_back(p);

  std::string csv = "run,seed,final_loss";
  for (const auto& p : protocols)
    for (const char* metric : {"acc", "bacc"})
      for (const char* group : {"All", "Old", "New"}) csv += "," + p + "/" + metric + "/" + group;
  csv += "\n";
  for (const auto& d : data) {
    csv += d.name + "," + (d.config.contains("seed") ? d.config["seed"].dump() : "") + "," +
           (d.loss.y.empty() ? "" : format_number(d.loss.y.back()));
    for (const auto& p : protocols)
      for (const char* metric : {"acc", "bacc"})
        for (const char* group : {"All", "Old", "New"}) {
          csv += ",";
          const json& protos = d.report.at("protocols");
          if (!protos.contains(p)) continue;
          const json& v = protos.at(p).at(metric).at(group);
          csv += v.is_null() ? "nan" : format_number(v.get<double>());
        }
    csv += "\n";
  }
  write_text(dir / run_files::kSummary, csv);

  std::vector<ChartSeries> losses;
  for (const auto& d : data) losses.push_back(d.loss);
  write_text(dir / run_files::kLossChart, line_chart_svg("Training loss", "epoch", "total loss", losses));

  std::vector<ChartSeries> accuracy;
  for (const auto& d : data) {
    ChartSeries s{d.name, {}, {}};
    for (std::size_t i = 0; i < protocols.size(); ++i) {
      const json& protos = d.report.at("protocols");
      if (!protos.contains(protocols[i])) continue;
      const json& v = protos.at(protocols[i]).at("bacc").at("All");
      s.x.push_back(static_cast<double>(i));
      s.y.push_back(v.is_null() ? NAN : v.get<double>());
    }
    accuracy.push_back(std::move(s));
  }
  std::string x_label = "protocol (";
  for (std::size_t i = 0; i < protocols.size(); ++i) x_label += (i ? ", " : "") + std::to_string(i) + "=" + protocols[i];
  x_label += ")";
  write_text(dir / run_files::kAccuracyChart, line_chart_svg("All-class bACC per protocol", x_label, "bACC", accuracy));
  log << "wrote " << (dir / run_files::kSummary).string() << " (" << data.size() << " run"
      << (data.size() == 1 ? "" : "s") << ")\n";
}

void cmd_run(const RunConfig& config, std::ostream& log) {
  cmd_synth(config, log);
  cmd_split(config, log);
  cmd_train(config, log);
  cmd_eval(config, {}, log);
  cmd_report(config.out, log);
}

// ---------------------------------------------------------------------------

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"rowssl: long-tailed open-world semi-supervised learning on embedding vectors"};
  app.require_subcommand(1);

  struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> protocols;
    std::vector<std::string> overrides;
  } common;
  EvalInputs eval_inputs;
  std::optional<std::string> report_dir;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Master seed");
    sub->add_option("--out", common.out, "Run directory");
    sub->add_option("--protocols", common.protocols,
                    "Comma-separated protocols: train,test-recluster,test-rematch,test-inductive");
    sub->add_option("--set", common.overrides, "Override one config key, e.g. train.epochs=20");
  };
  auto* synth = app.add_subcommand("synth", "Generate the Gaussian-blob embedding pool");
  auto* split = app.add_subcommand("split", "Draw long-tailed labeled/unlabeled splits and a balanced test set");
  auto* train = app.add_subcommand("train", "Train and write a checkpoint plus a per-epoch log");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint under the requested protocols");
  auto* report = app.add_subcommand("report", "Summarize one or more run directories");
  auto* run = app.add_subcommand("run", "synth, split, train, eval and report in one go");
  for (auto* sub : {synth, split, train, eval, report, run}) add_common(sub);
  eval->add_option("--checkpoint", eval_inputs.checkpoint, "Checkpoint file (default <out>/model.ckpt)");
  eval->add_option("--unlabeled", eval_inputs.unlabeled, "Unlabeled training set (default <out>/unlabeled.emb)");
  eval->add_option("--test", eval_inputs.test, "Test set (default <out>/test.emb)");
  report->add_option("dir", report_dir, "Run directory or a directory of runs (default --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    json j = json::object();
    if (!common.config_path.empty()) {
      try {
        j = json::parse(read_text(common.config_path));
      } catch (const json::parse_error& e) {
        throw InvalidArgument("config '" + common.config_path + "': " + e.what());
      }
    }
    for (const auto& o : common.overrides) apply_override(j, o);
    if (common.seed) j["seed"] = *common.seed;
    if (common.out) j["out"] = *common.out;
    if (common.protocols) j["protocols"] = split_list(*common.protocols);
    const RunConfig config = run_config_from_json(j);
    worker_threads();  // reject a malformed ROWSSL_THREADS before any work

    if (synth->parsed()) cmd_synth(config, out);
    if (split->parsed()) cmd_split(config, out);
    if (train->parsed()) cmd_train(config, out);
    if (eval->parsed()) cmd_eval(config, eval_inputs, out);
    if (report->parsed()) cmd_report(report_dir.value_or(config.out), out);
    if (run->parsed()) cmd_run(config, out);
  } catch (const std::exception& e) {
    err << "rowssl: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace rowssl
