#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "medctx/context.hpp"
#include "medctx/ner.hpp"
#include "medctx/pipeline.hpp"

namespace medctx {

// A model directory holds manifest.txt (key=value lines ending in a checksum)
// and params.bin (little-endian IEEE-754 values in manifest tensor order).
inline constexpr int kFormatVersion = 1;
inline constexpr std::string_view kManifestFile = "manifest.txt";
inline constexpr std::string_view kParamsFile = "params.bin";

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline double parse_double(std::string_view s, std::string_view key) {
  double v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw CorruptionError("bad number for " + std::string(key));
  return v;
}

inline std::uint64_t parse_uint(std::string_view s, std::string_view key) {
  std::uint64_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw CorruptionError("bad integer for " + std::string(key));
  return v;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

template <typename T>
void append_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

template <typename T>
T read_le(const char* p) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) bits |= static_cast<U>(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<T>(bits);
}

// Ordered key=value lines.
class Manifest {
 public:
  void set(std::string key, std::string value) {
    index_[key] = lines_.size();
    lines_.emplace_back(std::move(key), std::move(value));
  }
  template <typename V>
    requires std::is_arithmetic_v<V>
  void set(std::string key, V value) {
    if constexpr (std::is_floating_point_v<V>)
      set(std::move(key), fmt_double(static_cast<double>(value)));
    else
      set(std::move(key), std::to_string(value));
  }

  bool has(std::string_view key) const { return index_.count(std::string(key)) > 0; }

  const std::string& get(std::string_view key) const {
    auto it = index_.find(std::string(key));
    if (it == index_.end()) throw CorruptionError("manifest lacks '" + std::string(key) + "'");
    return lines_[it->second].second;
  }
  double number(std::string_view key) const { return parse_double(get(key), key); }
  std::uint64_t uint(std::string_view key) const { return parse_uint(get(key), key); }

  std::string body() const {
    std::string out;
    for (const auto& [k, v] : lines_) out += k + "=" + v + "\n";
    return out;
  }

  static Manifest parse(std::string_view text) {
    Manifest m;
    std::size_t pos = 0;
    while (pos < text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos) throw CorruptionError("manifest ends mid-line");
      auto line = text.substr(pos, nl - pos);
      pos = nl + 1;
      auto eq = line.find('=');
      if (eq == std::string_view::npos) throw CorruptionError("manifest line without '='");
      m.set(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
    }
    return m;
  }

 private:
  std::vector<std::pair<std::string, std::string>> lines_;
  std::map<std::string, std::size_t> index_;
};

inline void put_encoder_config(Manifest& m, const EncoderConfig& c) {
  m.set("precision", std::string(c.precision == Precision::F64 ? "f64" : "f32"));
  m.set("config.layers", c.layers);
  m.set("config.hidden_dim", c.hidden_dim);
  m.set("config.heads", c.heads);
  m.set("config.ffn_dim", c.ffn_dim);
  m.set("config.max_len", c.max_len);
  m.set("config.vocab_size", c.vocab_size);
  m.set("config.dropout_rate", c.dropout_rate);
  m.set("config.seed", c.seed);
}

inline Precision get_precision(const Manifest& m) {
  const auto& p = m.get("precision");
  if (p == "f32") return Precision::F32;
  if (p == "f64") return Precision::F64;
  throw CorruptionError("unknown precision '" + p + "'");
}

inline EncoderConfig get_encoder_config(const Manifest& m) {
  EncoderConfig c;
  c.precision = get_precision(m);
  c.layers = m.uint("config.layers");
  c.hidden_dim = m.uint("config.hidden_dim");
  c.heads = m.uint("config.heads");
  c.ffn_dim = m.uint("config.ffn_dim");
  c.max_len = m.uint("config.max_len");
  c.vocab_size = m.uint("config.vocab_size");
  c.dropout_rate = m.number("config.dropout_rate");
  c.seed = m.uint("config.seed");
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw CorruptionError(std::string("stored config invalid: ") + e.what());
  }
  return c;
}

inline void put_train_config(Manifest& m, const TrainConfig& t) {
  m.set("train.learning_rate", t.learning_rate);
  m.set("train.batch_size", t.batch_size);
  m.set("train.max_epochs", t.max_epochs);
  m.set("train.patience", t.patience);
  m.set("train.beta1", t.beta1);
  m.set("train.beta2", t.beta2);
  m.set("train.epsilon", t.epsilon);
  m.set("train.clip_norm", t.clip_norm);
  m.set("train.seed", t.seed);
}

inline TrainConfig get_train_config(const Manifest& m) {
  TrainConfig t;
  t.learning_rate = m.number("train.learning_rate");
  t.batch_size = m.uint("train.batch_size");
  t.max_epochs = m.uint("train.max_epochs");
  t.patience = m.uint("train.patience");
  t.beta1 = m.number("train.beta1");
  t.beta2 = m.number("train.beta2");
  t.epsilon = m.number("train.epsilon");
  t.clip_norm = m.number("train.clip_norm");
  t.seed = m.uint("train.seed");
  return t;
}

inline void put_history(Manifest& m, const TrainHistory& h) {
  m.set("history.epochs", h.epochs.size());
  for (const auto& e : h.epochs)
    m.set("history.epoch." + std::to_string(e.epoch), fmt_double(e.train_loss) + " " + fmt_double(e.dev_score));
  m.set("history.best_epoch", h.best_epoch);
  m.set("history.best_score", h.best_score);
  m.set("history.stopped_early", h.stopped_early ? 1 : 0);
}

inline TrainHistory get_history(const Manifest& m) {
  TrainHistory h;
  const auto n = m.uint("history.epochs");
  for (std::size_t e = 1; e <= n; ++e) {
    const auto key = "history.epoch." + std::to_string(e);
    const auto& v = m.get(key);
    const auto sp = v.find(' ');
    if (sp == std::string::npos) throw CorruptionError("bad " + key);
    h.epochs.push_back(EpochRecord{e, parse_double(std::string_view(v).substr(0, sp), key),
                                   parse_double(std::string_view(v).substr(sp + 1), key)});
  }
  h.best_epoch = m.uint("history.best_epoch");
  h.best_score = m.number("history.best_score");
  h.stopped_early = m.uint("history.stopped_early") != 0;
  return h;
}

inline void put_vocab(Manifest& m, const Vocabulary& v) {
  m.set("vocab.size", v.size());
  for (std::size_t i = Vocabulary::kNumSpecial; i < v.size(); ++i)
    m.set("vocab." + std::to_string(i), nlohmann::json(utf8::encode(v.piece(static_cast<int>(i)))).dump());
}

inline Vocabulary get_vocab(const Manifest& m) {
  const auto n = m.uint("vocab.size");
  if (n < Vocabulary::kNumSpecial) throw CorruptionError("vocabulary smaller than the special tokens");
  std::vector<std::u32string> pieces;
  for (std::size_t i = Vocabulary::kNumSpecial; i < n; ++i) {
    const auto key = "vocab." + std::to_string(i);
    try {
      pieces.push_back(utf8::decode(nlohmann::json::parse(m.get(key)).get<std::string>()));
    } catch (const nlohmann::json::exception&) {
      throw CorruptionError("bad " + key);
    }
  }
  return Vocabulary::from_pieces(pieces);
}

template <typename T>
void write_artifact(const std::filesystem::path& dir, Manifest m, const EncoderModel<T>& model) {
  std::string blob;
  std::size_t i = 0;
  for (const auto& p : model.parameters()) {
    m.set("tensor." + std::to_string(i++),
          p.name + " " + std::to_string(p.value->rows()) + " " + std::to_string(p.value->cols()));
    for (Eigen::Index k = 0; k < p.value->size(); ++k) append_le(blob, p.value->data()[k]);
  }
  m.set("tensors", i);
  const auto body = m.body();
  std::filesystem::create_directories(dir);
  write_file(dir / kParamsFile, blob);
  write_file(dir / kManifestFile, body + "checksum=" + hex64(fnv1a64(blob, fnv1a64(body))) + "\n");
}

struct RawArtifact {
  Manifest manifest;
  std::string blob;
};

// Version is checked before integrity so a newer format reads as incompatible
// rather than corrupt.
inline RawArtifact read_artifact(const std::filesystem::path& dir) {
  const auto mpath = dir / kManifestFile;
  if (!std::filesystem::exists(mpath)) throw InputError("no model artifact at " + dir.string());
  const std::string text = read_file(mpath);
  const std::string_view prefix = "format_version=";
  if (text.rfind(prefix, 0) != 0) throw CorruptionError("manifest does not start with format_version");
  const auto nl = text.find('\n');
  const auto version = std::string_view(text).substr(prefix.size(), nl == std::string::npos ? std::string::npos
                                                                                            : nl - prefix.size());
  if (version != std::to_string(kFormatVersion))
    throw CompatibilityError("artifact format version " + std::string(version) + ", this build reads " +
                             std::to_string(kFormatVersion));

  const auto ck = text.rfind("checksum=");
  if (ck == std::string::npos || (ck > 0 && text[ck - 1] != '\n')) throw CorruptionError("manifest lacks checksum");
  const std::string body = text.substr(0, ck);
  std::string stored = text.substr(ck + 9);
  while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r')) stored.pop_back();
  if (!std::filesystem::exists(dir / kParamsFile)) throw CorruptionError("missing " + std::string(kParamsFile));
  RawArtifact raw{{}, read_file(dir / kParamsFile)};
  if (stored != hex64(fnv1a64(raw.blob, fnv1a64(body)))) throw CorruptionError("checksum mismatch in " + dir.string());
  raw.manifest = Manifest::parse(body);
  return raw;
}

template <typename T>
EncoderModel<T> restore_model(const RawArtifact& raw) {
  const auto& m = raw.manifest;
  const auto cfg = get_encoder_config(m);
  if (cfg.precision != precision_of<T>) throw CompatibilityError("artifact precision differs from requested type");
  std::vector<HeadSpec> heads;
  const auto n = m.uint("tensors");
  std::vector<std::tuple<std::string, Eigen::Index, Eigen::Index>> shapes;
  for (std::size_t i = 0; i < n; ++i) {
    std::istringstream in(m.get("tensor." + std::to_string(i)));
    std::string name;
    Eigen::Index r = 0, c = 0;
    if (!(in >> name >> r >> c)) throw CorruptionError("bad tensor." + std::to_string(i));
    const std::string pre = "sequence_head.", suf = ".weight";
    if (name.rfind(pre, 0) == 0 && name.size() > pre.size() + suf.size() &&
        name.compare(name.size() - suf.size(), suf.size(), suf) == 0)
      heads.push_back(HeadSpec{name.substr(pre.size(), name.size() - pre.size() - suf.size()),
                               static_cast<std::size_t>(c)});
    shapes.emplace_back(name, r, c);
  }
  auto model = init_model<T>(cfg, heads);
  auto params = model.parameters();
  if (params.size() != n) throw CorruptionError("tensor count does not match the stored config");
  std::size_t need = 0;
  for (const auto& p : params) need += static_cast<std::size_t>(p.value->size()) * sizeof(T);
  if (raw.blob.size() != need)
    throw CorruptionError("params.bin holds " + std::to_string(raw.blob.size()) + " bytes, expected " +
                          std::to_string(need));
  const char* at = raw.blob.data();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& [name, r, c] = shapes[i];
    auto& v = *params[i].value;
    if (params[i].name != name || v.rows() != r || v.cols() != c)
      throw CorruptionError("tensor " + std::to_string(i) + " is " + name + ", expected " + params[i].name);
    for (Eigen::Index k = 0; k < v.size(); ++k, at += sizeof(T)) v.data()[k] = read_le<T>(at);
  }
  return model;
}

inline Manifest base_manifest(std::string_view kind, std::string_view task) {
  Manifest m;
  m.set("format_version", std::to_string(kFormatVersion));
  m.set("kind", std::string(kind));
  m.set("task", std::string(task));
  return m;
}

inline void expect_kind(const Manifest& m, std::string_view kind) {
  if (m.get("kind") != kind) throw InputError("artifact is a " + m.get("kind") + " model, expected " + std::string(kind));
}

}  // namespace detail

inline Precision artifact_precision(const std::filesystem::path& dir) {
  return detail::get_precision(detail::read_artifact(dir).manifest);
}

template <typename T>
void save_ner(const NerModelBundle<T>& b, const std::filesystem::path& dir) {
  auto m = detail::base_manifest("ner", "ner");
  detail::put_encoder_config(m, b.model.config);
  detail::put_train_config(m, b.train_config);
  detail::put_history(m, b.history);
  detail::put_vocab(m, b.vocab);
  detail::write_artifact(dir, std::move(m), b.model);
}

template <typename T>
NerModelBundle<T> load_ner(const std::filesystem::path& dir) {
  const auto raw = detail::read_artifact(dir);
  detail::expect_kind(raw.manifest, "ner");
  NerModelBundle<T> b;
  b.model = detail::restore_model<T>(raw);
  b.vocab = detail::get_vocab(raw.manifest);
  b.train_config = detail::get_train_config(raw.manifest);
  b.history = detail::get_history(raw.manifest);
  if (b.vocab.size() != b.model.config.vocab_size) throw CorruptionError("vocabulary size differs from embeddings");
  return b;
}

template <typename T>
void save_task(const TaskModel<T>& tm, const Vocabulary& v, const TrainConfig& tc, const std::filesystem::path& dir) {
  auto m = detail::base_manifest("classifier", task_name(tm.task));
  detail::put_encoder_config(m, tm.model.config);
  detail::put_train_config(m, tc);
  detail::put_history(m, tm.history);
  m.set("constant", tm.constant ? 1 : 0);
  detail::put_vocab(m, v);
  detail::write_artifact(dir, std::move(m), tm.model);
}

template <typename T>
struct LoadedTask {
  TaskModel<T> model;
  Vocabulary vocab;
  TrainConfig train_config;
};

template <typename T>
LoadedTask<T> load_task(const std::filesystem::path& dir) {
  const auto raw = detail::read_artifact(dir);
  detail::expect_kind(raw.manifest, "classifier");
  LoadedTask<T> out;
  const auto task = parse_task(raw.manifest.get("task"));
  if (!task) throw CorruptionError("unknown task '" + raw.manifest.get("task") + "'");
  out.model.task = *task;
  out.model.model = detail::restore_model<T>(raw);
  if (out.model.model.sequence_heads.size() != 1 ||
      out.model.model.sequence_heads[0].classes() != task_classes(*task).size())
    throw CorruptionError("classifier head does not match task '" + task_name(*task) + "'");
  out.model.history = detail::get_history(raw.manifest);
  out.model.constant = raw.manifest.uint("constant") != 0;
  out.vocab = detail::get_vocab(raw.manifest);
  out.train_config = detail::get_train_config(raw.manifest);
  return out;
}

// Model root layout: <root>/ner and <root>/<task> for each classifier.
inline std::filesystem::path task_dir(const std::filesystem::path& root, TaskKind t) { return root / task_name(t); }
inline std::filesystem::path ner_dir(const std::filesystem::path& root) { return root / "ner"; }

template <typename T>
void save_classifiers(const ClassifierBundle<T>& b, const std::filesystem::path& root) {
  for (const auto& [t, tm] : b.tasks) save_task(tm, b.vocab, b.train_config, task_dir(root, t));
}

template <typename T>
ClassifierBundle<T> load_classifiers(const std::filesystem::path& root, std::span<const TaskKind> tasks = kTasks) {
  ClassifierBundle<T> b;
  bool first = true;
  for (TaskKind t : tasks) {
    auto loaded = load_task<T>(task_dir(root, t));
    if (first) {
      b.vocab = std::move(loaded.vocab);
      b.train_config = loaded.train_config;
      first = false;
    } else if (!(loaded.vocab == b.vocab)) {
      throw CompatibilityError("classifier '" + task_name(t) + "' uses a different vocabulary");
    }
    b.tasks[t] = std::move(loaded.model);
  }
  return b;
}

template <typename T>
PipelineBundle<T> load_pipeline(const std::filesystem::path& root) {
  PipelineBundle<T> p{load_ner<T>(ner_dir(root)), load_classifiers<T>(root)};
  p.validate();
  return p;
}

}  // namespace medctx
