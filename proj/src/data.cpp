#include "rowssl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "rowssl/errors.hpp"

namespace rowssl {

std::vector<std::size_t> EmbeddingDataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(num_classes(), 0)), 0);
  for (const auto& s : samples)
    if (s.label >= 0 && s.label < num_classes()) ++counts[static_cast<std::size_t>(s.label)];
  return counts;
}

void EmbeddingDataset::validate() const {
  if (dim == 0) throw InvalidArgument("dataset: dimension must be positive");
  if (num_old < 0 || num_new < 0 || num_classes() == 0) throw InvalidArgument("dataset: invalid class counts");
  std::unordered_set<std::int64_t> ids;
  for (const auto& s : samples) {
    const std::string where = "sample id " + std::to_string(s.id) + ": ";
    if (s.x.size() != dim) throw InvalidArgument(where + "wrong dimension");
    if (!all_finite(s.x)) throw InvalidArgument(where + "non-finite value");
    if (s.label < 0 || s.label >= num_classes()) throw InvalidArgument(where + "label out of range");
    if (s.labeled && s.label >= num_old) throw InvalidArgument(where + "labeled sample carries a novel class");
    if (!ids.insert(s.id).second) throw InvalidArgument(where + "duplicate id");
  }
}

EmbeddingDataset merge(const EmbeddingDataset& a, const EmbeddingDataset& b) {
  if (a.dim != b.dim || a.num_old != b.num_old || a.num_new != b.num_new)
    throw InvalidArgument("merge: datasets disagree on dimension or class metadata");
  EmbeddingDataset out = a;
  out.samples.insert(out.samples.end(), b.samples.begin(), b.samples.end());
  return out;
}

// ---------------------------------------------------------------------------

Matrix blob_centers(const BlobSpec& spec) {
  if (spec.num_classes <= 0 || spec.dim == 0) throw InvalidArgument("BlobSpec: empty shape");
  if (!(spec.separation > 0.0)) throw InvalidArgument("BlobSpec: separation must be positive");
  std::mt19937_64 rng(mix_seed({spec.seed, 0xB10B}));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix centers(static_cast<std::size_t>(spec.num_classes), spec.dim);
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    Vec dir(spec.dim);
    for (double& v : dir) v = normal(rng);
    const Vec unit = l2_normalize(dir);
    for (std::size_t j = 0; j < spec.dim; ++j) centers(c, j) = spec.separation * unit[j];
  }
  return centers;
}

EmbeddingDataset generate_blobs(const BlobSpec& spec) {
  if (!(spec.stddev > 0.0)) throw InvalidArgument("BlobSpec: stddev must be positive");
  const Matrix centers = blob_centers(spec);
  std::mt19937_64 rng(mix_seed({spec.seed, 0x5A3F}));
  std::normal_distribution<double> noise(0.0, spec.stddev);
  EmbeddingDataset ds;
  ds.dim = spec.dim;
  ds.num_old = spec.num_classes;
  ds.num_new = 0;
  std::int64_t next_id = 0;
  for (int c = 0; c < spec.num_classes; ++c) {
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      Sample s;
      s.id = next_id++;
      s.label = c;
      s.x.resize(spec.dim);
      for (std::size_t j = 0; j < spec.dim; ++j) s.x[j] = centers(static_cast<std::size_t>(c), j) + noise(rng);
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------

std::string to_string(MismatchMode mode) { return mode == MismatchMode::MCAR ? "MCAR" : "MNAR"; }

MismatchMode parse_mismatch_mode(const std::string& text) {
  if (text == "MCAR") return MismatchMode::MCAR;
  if (text == "MNAR") return MismatchMode::MNAR;
  throw InvalidArgument("unknown mismatch mode '" + text + "' (expected MCAR or MNAR)");
}

void SplitSpec::validate() const {
  if (num_old <= 0 || num_new < 0) throw InvalidArgument("SplitSpec: need at least one known class");
  if (n_max == 0) throw InvalidArgument("SplitSpec: n_max must be positive");
  if (!(gamma_l >= 1.0) || !(gamma_u >= 1.0)) throw InvalidArgument("SplitSpec: imbalance ratios must be >= 1");
  if (!(labeled_fraction > 0.0 && labeled_fraction < 1.0))
    throw InvalidArgument("SplitSpec: labeled_fraction must be in (0, 1)");
}

namespace {

std::size_t round_half_up(double v) { return static_cast<std::size_t>(std::floor(v + 0.5)); }

}  // namespace

std::vector<std::size_t> long_tail_profile(std::size_t n_max, double gamma, int num_classes) {
  if (num_classes <= 0) throw InvalidArgument("long_tail_profile: need at least one class");
  if (!(gamma >= 1.0)) throw InvalidArgument("long_tail_profile: gamma must be >= 1");
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes));
  for (int r = 0; r < num_classes; ++r) {
    const double exponent = num_classes == 1 ? 0.0 : -static_cast<double>(r) / (num_classes - 1);
    counts[static_cast<std::size_t>(r)] =
        std::max<std::size_t>(1, round_half_up(static_cast<double>(n_max) * std::pow(gamma, exponent)));
  }
  return counts;
}

SplitCounts split_counts(const SplitSpec& spec) {
  spec.validate();
  const std::size_t labeled_head =
      std::max<std::size_t>(1, round_half_up(static_cast<double>(spec.n_max) * spec.labeled_fraction /
                                             (1.0 - spec.labeled_fraction)));
  SplitCounts counts;
  counts.labeled = long_tail_profile(labeled_head, spec.gamma_l, spec.num_old);
  const int total = spec.num_old + spec.num_new;
  const auto profile = long_tail_profile(spec.n_max, spec.gamma_u, total);
  counts.unlabeled.resize(static_cast<std::size_t>(total));
  for (int c = 0; c < total; ++c) {
    const int rank = spec.mode == MismatchMode::MCAR ? c : total - 1 - c;
    counts.unlabeled[static_cast<std::size_t>(c)] = profile[static_cast<std::size_t>(rank)];
  }
  return counts;
}

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const EmbeddingDataset& pool, int num_classes) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < pool.samples.size(); ++i) {
    const int label = pool.samples[i].label;
    if (label < 0 || label >= num_classes)
      throw InvalidArgument("split: pool label " + std::to_string(label) + " outside the configured classes");
    by_class[static_cast<std::size_t>(label)].push_back(i);
  }
  return by_class;
}

EmbeddingDataset subset(const EmbeddingDataset& pool, std::vector<std::size_t> picks, bool labeled, int num_old,
                        int num_new) {
  std::sort(picks.begin(), picks.end());
  EmbeddingDataset out;
  out.dim = pool.dim;
  out.num_old = num_old;
  out.num_new = num_new;
  out.samples.reserve(picks.size());
  for (std::size_t i : picks) {
    Sample s = pool.samples[i];
    s.labeled = labeled;
    out.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace

SplitResult make_long_tailed_split(const EmbeddingDataset& pool, const SplitSpec& spec) {
  spec.validate();
  const int total = spec.num_old + spec.num_new;
  SplitResult result;
  result.counts = split_counts(spec);
  auto by_class = indices_by_class(pool, total);

  std::vector<std::size_t> labeled_picks;
  std::vector<std::size_t> unlabeled_picks;
  for (int c = 0; c < total; ++c) {
    auto& idx = by_class[static_cast<std::size_t>(c)];
    const std::size_t n_l = c < spec.num_old ? result.counts.labeled[static_cast<std::size_t>(c)] : 0;
    const std::size_t n_u = result.counts.unlabeled[static_cast<std::size_t>(c)];
    if (idx.size() < n_l + n_u)
      throw CapacityError("class " + std::to_string(c) + " needs " + std::to_string(n_l + n_u) +
                          " samples but the pool holds " + std::to_string(idx.size()));
    std::mt19937_64 rng(mix_seed({spec.seed, static_cast<std::uint64_t>(c), 0x5B17}));
    std::shuffle(idx.begin(), idx.end(), rng);
    labeled_picks.insert(labeled_picks.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_l));
    unlabeled_picks.insert(unlabeled_picks.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_l),
                           idx.begin() + static_cast<std::ptrdiff_t>(n_l + n_u));
  }
  result.labeled = subset(pool, std::move(labeled_picks), true, spec.num_old, spec.num_new);
  result.unlabeled = subset(pool, std::move(unlabeled_picks), false, spec.num_old, spec.num_new);
  return result;
}

EmbeddingDataset balanced_holdout(const EmbeddingDataset& pool, const std::vector<std::int64_t>& exclude,
                                  std::size_t per_class, int num_old, int num_new, std::uint64_t seed) {
  const int total = num_old + num_new;
  const std::unordered_set<std::int64_t> skip(exclude.begin(), exclude.end());
  auto by_class = indices_by_class(pool, total);
  std::vector<std::size_t> picks;
  for (int c = 0; c < total; ++c) {
    std::vector<std::size_t> avail;
    for (std::size_t i : by_class[static_cast<std::size_t>(c)])
      if (!skip.contains(pool.samples[i].id)) avail.push_back(i);
    if (avail.size() < per_class)
      throw CapacityError("class " + std::to_string(c) + " needs " + std::to_string(per_class) +
                          " held-out samples but only " + std::to_string(avail.size()) + " remain");
    std::mt19937_64 rng(mix_seed({seed, static_cast<std::uint64_t>(c), 0x7E57}));
    std::shuffle(avail.begin(), avail.end(), rng);
    picks.insert(picks.end(), avail.begin(), avail.begin() + static_cast<std::ptrdiff_t>(per_class));
  }
  return subset(pool, std::move(picks), false, num_old, num_new);
}

// ---------------------------------------------------------------------------

ViewPair two_views(std::span<const double> x, const AugmentOptions& options, std::int64_t sample_id,
                   std::int64_t step, std::uint64_t seed) {
  if (options.noise_scale < 0.0) throw InvalidArgument("two_views: noise_scale must be >= 0");
  if (options.drop_fraction < 0.0 || options.drop_fraction >= 1.0)
    throw InvalidArgument("two_views: drop_fraction must be in [0, 1)");
  std::mt19937_64 rng(
      mix_seed({seed, static_cast<std::uint64_t>(sample_id), static_cast<std::uint64_t>(step), 0xA06}));
  const std::size_t d = x.size();
  const auto n_drop = static_cast<std::size_t>(std::floor(options.drop_fraction * static_cast<double>(d)));
  auto perturb = [&]() {
    Vec v(x.begin(), x.end());
    if (options.noise_scale > 0.0) {
      std::normal_distribution<double> noise(0.0, options.noise_scale);
      for (double& e : v) e += noise(rng);
    }
    if (n_drop > 0) {
      std::vector<std::size_t> idx(d);
      std::iota(idx.begin(), idx.end(), 0);
      for (std::size_t i = 0; i < n_drop; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, d - 1);
        std::swap(idx[i], idx[pick(rng)]);
        v[idx[i]] = 0.0;
      }
    }
    return v;
  };
  ViewPair pair;
  pair.first = perturb();
  pair.second = perturb();
  return pair;
}

std::vector<std::vector<std::size_t>> iterate_batches(std::size_t num_samples, std::size_t batch_size,
                                                      std::uint64_t seed, std::int64_t epoch) {
  if (batch_size == 0) throw InvalidArgument("iterate_batches: batch_size must be at least 1");
  std::vector<std::size_t> order(num_samples);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed({seed, static_cast<std::uint64_t>(epoch), 0xBA7C}));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < num_samples; start += batch_size) {
    const std::size_t stop = std::min(num_samples, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

// ---------------------------------------------------------------------------
// Text I/O

namespace {

constexpr const char* kMagic = "ROWSSL-EMB 1";

void append_double(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

template <typename T>
T parse_number(std::string_view tok, std::size_t line, const char* what) {
  T value{};
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw ParseError(line, std::string("cannot parse ") + what + " '" + std::string(tok) + "'");
  return value;
}

}  // namespace

std::string format_dataset(const EmbeddingDataset& dataset) {
  std::string out;
  out.reserve(dataset.samples.size() * (dataset.dim * 20 + 16) + 64);
  out += kMagic;
  out += '\n';
  out += std::to_string(dataset.samples.size()) + ' ' + std::to_string(dataset.dim) + ' ' +
         std::to_string(dataset.num_old) + ' ' + std::to_string(dataset.num_new) + '\n';
  for (const auto& s : dataset.samples) {
    out += std::to_string(s.id);
    out += ' ';
    out += std::to_string(s.label);
    out += s.labeled ? " 1" : " 0";
    for (double v : s.x) {
      out += ' ';
      append_double(out, v);
    }
    out += '\n';
  }
  return out;
}

EmbeddingDataset parse_dataset(const std::string& text) {
  std::vector<std::string_view> lines;
  std::string_view rest(text);
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    lines.push_back(rest.substr(0, nl));
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  if (lines.empty() || lines[0] != kMagic) throw ParseError(1, "missing magic header '" + std::string(kMagic) + "'");
  if (lines.size() < 2) throw ParseError(2, "missing size line");
  const auto head = split_ws(lines[1]);
  if (head.size() != 4) throw ParseError(2, "size line must hold 'N d C_old C_new'");
  EmbeddingDataset ds;
  const auto n = parse_number<std::size_t>(head[0], 2, "N");
  ds.dim = parse_number<std::size_t>(head[1], 2, "d");
  ds.num_old = parse_number<int>(head[2], 2, "C_old");
  ds.num_new = parse_number<int>(head[3], 2, "C_new");
  if (ds.dim == 0) throw ParseError(2, "dimension must be positive");
  if (ds.num_old < 0 || ds.num_new < 0 || ds.num_classes() == 0) throw ParseError(2, "invalid class counts");
  if (lines.size() < n + 2) throw ParseError(lines.size() + 1, "expected " + std::to_string(n) + " sample rows");
  for (std::size_t k = n + 2; k < lines.size(); ++k)
    if (!lines[k].empty()) throw ParseError(k + 1, "unexpected trailing content");

  std::unordered_set<std::int64_t> ids;
  ds.samples.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t line_no = r + 3;
    const auto tok = split_ws(lines[r + 2]);
    if (tok.size() != ds.dim + 3)
      throw ParseError(line_no, "expected " + std::to_string(ds.dim + 3) + " columns, found " +
                                    std::to_string(tok.size()));
    Sample s;
    s.id = parse_number<std::int64_t>(tok[0], line_no, "id");
    s.label = parse_number<int>(tok[1], line_no, "label");
    const int flag = parse_number<int>(tok[2], line_no, "is_labeled");
    if (flag != 0 && flag != 1) throw ParseError(line_no, "is_labeled must be 0 or 1");
    s.labeled = flag == 1;
    s.x.resize(ds.dim);
    for (std::size_t j = 0; j < ds.dim; ++j) {
      s.x[j] = parse_number<double>(tok[j + 3], line_no, "value");
      if (!std::isfinite(s.x[j])) throw ParseError(line_no, "non-finite value");
    }
    if (s.label < 0 || s.label >= ds.num_classes()) throw ParseError(line_no, "validation: label out of range");
    if (s.labeled && s.label >= ds.num_old)
      throw ParseError(line_no, "validation: labeled sample with novel class " + std::to_string(s.label));
    if (!ids.insert(s.id).second) throw ParseError(line_no, "validation: duplicate id " + std::to_string(s.id));
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void save_dataset(const EmbeddingDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  const std::string text = format_dataset(dataset);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

EmbeddingDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

}  // namespace rowssl
