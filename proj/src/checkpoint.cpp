#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "rowssl/config.hpp"
#include "rowssl/errors.hpp"
#include "rowssl/trainer.hpp"

namespace rowssl {

namespace {

constexpr std::string_view kMagic = "ROWSSL-CKPT 1\n";
constexpr std::string_view kMagicPrefix = "ROWSSL-CKPT ";
constexpr char kStringTag = 'S';
constexpr char kTensorTag = 'T';
constexpr char kEndTag = 'E';

class Writer {
 public:
  void raw(std::string_view bytes) { out_.append(bytes); }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }

  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }

  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void name(std::string_view n) {
    u32(static_cast<std::uint32_t>(n.size()));
    out_.append(n);
  }

  void string(std::string_view key, std::string_view value) {
    out_.push_back(kStringTag);
    name(key);
    u64(value.size());
    out_.append(value);
  }

  void tensor(std::string_view key, std::span<const double> values, std::vector<std::uint64_t> shape) {
    out_.push_back(kTensorTag);
    name(key);
    u32(static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) u64(d);
    for (double v : values) f64(v);
  }

  void end() { out_.push_back(kEndTag); }

  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

struct Tensor {
  std::vector<std::uint64_t> shape;
  std::vector<double> values;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  bool at_end() const { return pos_ >= bytes_.size(); }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw LoadError("checkpoint: truncated file");
  }

  char byte() {
    need(1);
    return bytes_[pos_++];
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos_ = 0;

 private:
  const std::string& bytes_;
};

void write_net(Writer& w, const std::string& prefix, const SmallNet& net) {
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& layer = net.layers()[l];
    const std::string base = prefix + "." + std::to_string(l);
    w.tensor(base + ".weight", layer.weight.flat(), {layer.weight.rows(), layer.weight.cols()});
    w.tensor(base + ".bias", layer.bias, {layer.bias.size()});
  }
}

class TensorTable {
 public:
  explicit TensorTable(std::map<std::string, Tensor> tensors) : tensors_(std::move(tensors)) {}

  void fill(const std::string& key, std::span<double> dst, const std::vector<std::uint64_t>& shape) {
    auto it = tensors_.find(key);
    if (it == tensors_.end()) throw LoadError("checkpoint: missing tensor '" + key + "'");
    if (it->second.shape != shape) throw LoadError("checkpoint: shape mismatch for tensor '" + key + "'");
    std::copy(it->second.values.begin(), it->second.values.end(), dst.begin());
    tensors_.erase(it);
  }

  Vec take(const std::string& key) {
    auto it = tensors_.find(key);
    if (it == tensors_.end()) throw LoadError("checkpoint: missing tensor '" + key + "'");
    if (it->second.shape.size() != 1) throw LoadError("checkpoint: tensor '" + key + "' must be one-dimensional");
    Vec v = std::move(it->second.values);
    tensors_.erase(it);
    return v;
  }

  void expect_consumed() const {
    if (!tensors_.empty()) throw LoadError("checkpoint: unexpected tensor '" + tensors_.begin()->first + "'");
  }

 private:
  std::map<std::string, Tensor> tensors_;
};

void read_net(TensorTable& t, const std::string& prefix, SmallNet& net) {
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto& layer = net.layers()[l];
    const std::string base = prefix + "." + std::to_string(l);
    t.fill(base + ".weight", layer.weight.flat(), {layer.weight.rows(), layer.weight.cols()});
    t.fill(base + ".bias", layer.bias, {layer.bias.size()});
  }
}

std::uint64_t to_count(double v, const char* what) {
  if (!(v >= 0.0) || v != std::floor(v)) throw LoadError(std::string("checkpoint: invalid ") + what);
  return static_cast<std::uint64_t>(v);
}

}  // namespace

std::string serialize_checkpoint(const TrainerState& s) {
  Writer w;
  w.raw(kMagic);
  w.string("config", to_json(s.config).dump());
  const Vec meta{static_cast<double>(s.input_dim),     static_cast<double>(s.num_old),
                 static_cast<double>(s.num_new),       static_cast<double>(s.num_heads),
                 static_cast<double>(s.step),          static_cast<double>(s.epoch),
                 static_cast<double>(s.steps_per_epoch), s.bank.initialized ? 1.0 : 0.0};
  w.tensor("meta", meta, {meta.size()});
  write_net(w, "encoder", s.model.encoder);
  write_net(w, "projector", s.model.projector);
  w.tensor("classifier.weight", s.model.classifier.weight().flat(),
           {s.model.classifier.num_classes(), s.model.classifier.dim()});
  write_net(w, "key_encoder", s.model.key_encoder);
  write_net(w, "key_projector", s.model.key_projector);
  for (std::size_t t = 0; t < s.optimizer.velocity().size(); ++t)
    w.tensor("optimizer.velocity." + std::to_string(t), s.optimizer.velocity()[t], {s.optimizer.velocity()[t].size()});
  if (s.bank.initialized) {
    w.tensor("bank.prototypes", s.bank.prototypes.flat(), {s.bank.prototypes.rows(), s.bank.prototypes.cols()});
    w.tensor("bank.densities", s.bank.densities, {s.bank.densities.size()});
  }
  w.tensor("uncertainty", s.uncertainty, {s.uncertainty.size()});
  for (std::size_t c = 0; c < s.tail_queues.num_classes(); ++c) {
    const auto& q = s.tail_queues.scores(c);
    const Vec values(q.begin(), q.end());
    w.tensor("tail_queue." + std::to_string(c), values, {values.size()});
  }
  w.end();
  return w.take();
}

TrainerState deserialize_checkpoint(const std::string& bytes) {
  if (bytes.compare(0, kMagicPrefix.size(), kMagicPrefix) != 0) throw LoadError("checkpoint: bad magic bytes");
  if (bytes.compare(0, kMagic.size(), kMagic) != 0) throw LoadError("checkpoint: unsupported format version");
  Reader r(bytes);
  r.pos_ = kMagic.size();

  std::string config_text;
  std::map<std::string, Tensor> tensors;
  while (true) {
    const char tag = r.byte();
    if (tag == kEndTag) break;
    const std::string key = r.take(r.u32());
    if (tag == kStringTag) {
      const std::uint64_t n = r.u64();
      const std::string value = r.take(n);
      if (key == "config") config_text = value;
    } else if (tag == kTensorTag) {
      Tensor t;
      const std::uint32_t ndim = r.u32();
      std::uint64_t count = 1;
      for (std::uint32_t d = 0; d < ndim; ++d) {
        t.shape.push_back(r.u64());
        if (t.shape.back() > bytes.size()) throw LoadError("checkpoint: implausible tensor shape");
        count *= t.shape.back();
        if (count > bytes.size()) throw LoadError("checkpoint: implausible tensor shape");
      }
      r.need(count * 8);
      t.values.resize(count);
      for (auto& v : t.values) v = std::bit_cast<double>(r.u64());
      tensors.emplace(key, std::move(t));
    } else {
      throw LoadError("checkpoint: unknown record tag");
    }
  }
  if (!r.at_end()) throw LoadError("checkpoint: trailing bytes after end marker");
  if (config_text.empty()) throw LoadError("checkpoint: missing config record");

  TrainConfig config;
  try {
    from_json(nlohmann::json::parse(config_text), config);
  } catch (const std::exception& e) {
    throw LoadError(std::string("checkpoint: invalid config: ") + e.what());
  }

  TensorTable table(std::move(tensors));
  const Vec meta = table.take("meta");
  if (meta.size() != 8) throw LoadError("checkpoint: meta tensor has wrong length");
  TrainerState s = init_state(config, to_count(meta[0], "input dimension"), static_cast<int>(to_count(meta[1], "C_old")),
                              static_cast<int>(to_count(meta[2], "C_new")),
                              static_cast<std::int64_t>(to_count(meta[6], "steps per epoch")));
  if (s.num_heads != to_count(meta[3], "head count")) throw LoadError("checkpoint: head count mismatch");
  s.step = static_cast<std::int64_t>(to_count(meta[4], "step"));
  s.epoch = static_cast<std::int64_t>(to_count(meta[5], "epoch"));

  read_net(table, "encoder", s.model.encoder);
  read_net(table, "projector", s.model.projector);
  table.fill("classifier.weight", s.model.classifier.weight().flat(),
             {s.model.classifier.num_classes(), s.model.classifier.dim()});
  read_net(table, "key_encoder", s.model.key_encoder);
  read_net(table, "key_projector", s.model.key_projector);
  for (std::size_t t = 0; t < s.optimizer.velocity().size(); ++t)
    table.fill("optimizer.velocity." + std::to_string(t), s.optimizer.velocity()[t], {s.optimizer.velocity()[t].size()});
  if (meta[7] != 0.0) {
    s.bank.prototypes = Matrix(s.num_prototypes(), config.projection_dim);
    table.fill("bank.prototypes", s.bank.prototypes.flat(), {s.bank.prototypes.rows(), s.bank.prototypes.cols()});
    s.bank.densities.assign(s.num_prototypes(), 0.0);
    table.fill("bank.densities", s.bank.densities, {s.bank.densities.size()});
    s.bank.initialized = true;
  }
  const Vec u = table.take("uncertainty");
  if (u.size() != s.num_heads) throw LoadError("checkpoint: uncertainty vector has wrong length");
  s.uncertainty = u;
  for (std::size_t c = 0; c < s.num_heads; ++c) {
    const Vec scores = table.take("tail_queue." + std::to_string(c));
    if (scores.size() > config.class_tail_cap) throw LoadError("checkpoint: class tail queue exceeds its cap");
    std::vector<int> labels(scores.size(), static_cast<int>(c));
    s.tail_queues.update(scores, labels);
  }
  table.expect_consumed();
  s.queue_refilling = true;
  return s;
}

void save_checkpoint(const TrainerState& state, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(state);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

TrainerState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace rowssl
