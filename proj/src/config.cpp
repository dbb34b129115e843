#include "rowssl/config.hpp"

#include <fstream>
#include <set>

#include "rowssl/errors.hpp"

namespace rowssl {

using nlohmann::json;

namespace {

// Reads known keys from an object and rejects everything else.
class KeyReader {
 public:
  KeyReader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw InvalidArgument("config: '" + section_ + "' must be a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    known_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw InvalidArgument("config: wrong type for '" + qualified(key) + "'");
    }
  }

  void allow(const char* key) { known_.insert(key); }

  void finish() const {
    for (const auto& item : j_.items())
      if (!known_.contains(item.key())) throw InvalidArgument("config: unknown key '" + qualified(item.key()) + "'");
  }

 private:
  std::string qualified(const std::string& key) const { return section_.empty() ? key : section_ + "." + key; }

  const json& j_;
  std::string section_;
  std::set<std::string> known_;
};

}  // namespace

json to_json(const BlobSpec& s) {
  return {{"num_classes", s.num_classes}, {"dim", s.dim},             {"separation", s.separation},
          {"stddev", s.stddev},           {"per_class", s.per_class}, {"seed", s.seed}};
}

void from_json(const json& j, BlobSpec& s) {
  KeyReader r(j, "blobs");
  r.get("num_classes", s.num_classes);
  r.get("dim", s.dim);
  r.get("separation", s.separation);
  r.get("stddev", s.stddev);
  r.get("per_class", s.per_class);
  r.get("seed", s.seed);
  r.finish();
}

json to_json(const SplitSpec& s) {
  return {{"num_old", s.num_old}, {"num_new", s.num_new},     {"n_max", s.n_max},
          {"gamma_l", s.gamma_l}, {"gamma_u", s.gamma_u},     {"mode", to_string(s.mode)},
          {"labeled_fraction", s.labeled_fraction},           {"seed", s.seed}};
}

void from_json(const json& j, SplitSpec& s) {
  KeyReader r(j, "split");
  r.get("num_old", s.num_old);
  r.get("num_new", s.num_new);
  r.get("n_max", s.n_max);
  r.get("gamma_l", s.gamma_l);
  r.get("gamma_u", s.gamma_u);
  std::string mode = to_string(s.mode);
  r.get("mode", mode);
  s.mode = parse_mismatch_mode(mode);
  r.get("labeled_fraction", s.labeled_fraction);
  r.get("seed", s.seed);
  r.finish();
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"final_learning_rate", c.final_learning_rate},
          {"momentum", c.momentum},
          {"lambda_rep", c.lambda_rep},
          {"tau_s", c.tau_s},
          {"tau_t_start", c.tau_t_start},
          {"tau_t_end", c.tau_t_end},
          {"tau_t_warmup_epochs", c.tau_t_warmup_epochs},
          {"epsilon", c.epsilon},
          {"num_prototypes", c.num_prototypes},
          {"lambda_tail", c.lambda_tail},
          {"queue_size", c.queue_size},
          {"knn_k", c.knn_k},
          {"tau_min", c.tau_min},
          {"tau_max", c.tau_max},
          {"lambda_var", c.lambda_var},
          {"tau_sup", c.tau_sup},
          {"key_momentum", c.key_momentum},
          {"class_count_mode", to_string(c.class_count_mode)},
          {"initial_heads", c.initial_heads},
          {"class_tail_cap", c.class_tail_cap},
          {"noise_scale", c.noise_scale},
          {"drop_fraction", c.drop_fraction},
          {"projector_hidden", c.projector_hidden},
          {"projector_layers", c.projector_layers},
          {"projection_dim", c.projection_dim},
          {"encoder_jitter", c.encoder_jitter},
          {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
  KeyReader r(j, "train");
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("learning_rate", c.learning_rate);
  r.get("final_learning_rate", c.final_learning_rate);
  r.get("momentum", c.momentum);
  r.get("lambda_rep", c.lambda_rep);
  r.get("tau_s", c.tau_s);
  r.get("tau_t_start", c.tau_t_start);
  r.get("tau_t_end", c.tau_t_end);
  r.get("tau_t_warmup_epochs", c.tau_t_warmup_epochs);
  r.get("epsilon", c.epsilon);
  r.get("num_prototypes", c.num_prototypes);
  r.get("lambda_tail", c.lambda_tail);
  r.get("queue_size", c.queue_size);
  r.get("knn_k", c.knn_k);
  r.get("tau_min", c.tau_min);
  r.get("tau_max", c.tau_max);
  r.get("lambda_var", c.lambda_var);
  r.get("tau_sup", c.tau_sup);
  r.get("key_momentum", c.key_momentum);
  std::string mode = to_string(c.class_count_mode);
  r.get("class_count_mode", mode);
  c.class_count_mode = parse_class_count_mode(mode);
  r.get("initial_heads", c.initial_heads);
  r.get("class_tail_cap", c.class_tail_cap);
  r.get("noise_scale", c.noise_scale);
  r.get("drop_fraction", c.drop_fraction);
  r.get("projector_hidden", c.projector_hidden);
  r.get("projector_layers", c.projector_layers);
  r.get("projection_dim", c.projection_dim);
  r.get("encoder_jitter", c.encoder_jitter);
  r.get("seed", c.seed);
  r.finish();
}

// ---------------------------------------------------------------------------

void RunConfig::propagate_seed() {
  blobs.seed = seed;
  split.seed = mix_seed({seed, 0x5B1});
  train.seed = mix_seed({seed, 0x7A1});
}

void RunConfig::validate() const {
  if (blobs.num_classes != split.num_old + split.num_new)
    throw InvalidArgument("config: blobs.num_classes must equal split.num_old + split.num_new");
  if (!(blobs.separation > 0.0) || !(blobs.stddev > 0.0))
    throw InvalidArgument("config: blobs.separation and blobs.stddev must be positive");
  split.validate();
  train.validate();
  static const std::set<std::string> known = {"train", "test-recluster", "test-rematch", "test-inductive"};
  for (const auto& p : protocols)
    if (!known.contains(p)) throw InvalidArgument("config: unknown protocol '" + p + "'");
}

json to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"out", c.out},
          {"blobs", to_json(c.blobs)},
          {"split", to_json(c.split)},
          {"test_per_class", c.test_per_class},
          {"train", to_json(c.train)},
          {"protocols", c.protocols}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  KeyReader r(j, "");
  r.get("seed", c.seed);
  c.propagate_seed();
  r.get("out", c.out);
  r.get("test_per_class", c.test_per_class);
  r.get("protocols", c.protocols);
  for (const char* section : {"blobs", "split", "train"}) r.allow(section);
  r.finish();
  // Section seeds given explicitly win over the derived ones.
  if (j.contains("blobs")) from_json(j.at("blobs"), c.blobs);
  if (j.contains("split")) from_json(j.at("split"), c.split);
  if (j.contains("train")) from_json(j.at("train"), c.train);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config '" + path.string() + "': " + e.what());
  }
  return run_config_from_json(j);
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw InvalidArgument("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw InvalidArgument("override '" + assignment + "' has an empty key segment");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part)) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace rowssl
