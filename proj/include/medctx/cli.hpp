#pragma once

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "medctx/artifact.hpp"
#include "medctx/eval.hpp"
#include "medctx/gradcheck.hpp"
#include "medctx/synth.hpp"

namespace medctx {

class UsageError : public Error {
 public:
  using Error::Error;
};

// Every setting a command can read. Config files and flags write the same keys.
struct RunConfig {
  EncoderConfig encoder;
  TrainConfig train;
  GeneratorSpec synth;
  std::string data, model = "model", out, in;
  std::string task, mode = "strict", gold_spans = "on", split = "test";
  std::size_t samples = 200;
};

namespace detail {

template <typename N>
N parse_number(std::string_view key, std::string_view s) {
  N v{};
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size())
    throw UsageError("invalid value '" + std::string(s) + "' for " + std::string(key));
  return v;
}

using Setter = std::function<void(RunConfig&, std::string_view)>;

inline const std::map<std::string, Setter, std::less<>>& config_keys() {
  static const std::map<std::string, Setter, std::less<>> keys = [] {
    std::map<std::string, Setter, std::less<>> k;
    auto size = [&](std::string name, auto get) {
      k[name] = [name, get](RunConfig& c, std::string_view v) { get(c) = parse_number<std::size_t>(name, v); };
    };
    auto real = [&](std::string name, auto get) {
      k[name] = [name, get](RunConfig& c, std::string_view v) { get(c) = parse_number<double>(name, v); };
    };
    auto text = [&](std::string name, auto get) {
      k[name] = [get](RunConfig& c, std::string_view v) { get(c) = std::string(v); };
    };
    size("layers", [](RunConfig& c) -> auto& { return c.encoder.layers; });
    size("hidden_dim", [](RunConfig& c) -> auto& { return c.encoder.hidden_dim; });
    size("heads", [](RunConfig& c) -> auto& { return c.encoder.heads; });
    size("ffn_dim", [](RunConfig& c) -> auto& { return c.encoder.ffn_dim; });
    size("max_len", [](RunConfig& c) -> auto& { return c.encoder.max_len; });
    size("vocab_size", [](RunConfig& c) -> auto& { return c.encoder.vocab_size; });
    real("dropout_rate", [](RunConfig& c) -> auto& { return c.encoder.dropout_rate; });
    k["encoder_seed"] = [](RunConfig& c, std::string_view v) {
      c.encoder.seed = parse_number<std::uint64_t>("encoder_seed", v);
    };
    k["precision"] = [](RunConfig& c, std::string_view v) {
      if (v == "f32") c.encoder.precision = Precision::F32;
      else if (v == "f64") c.encoder.precision = Precision::F64;
      else throw UsageError("precision must be f32 or f64");
    };
    real("learning_rate", [](RunConfig& c) -> auto& { return c.train.learning_rate; });
    size("batch_size", [](RunConfig& c) -> auto& { return c.train.batch_size; });
    size("max_epochs", [](RunConfig& c) -> auto& { return c.train.max_epochs; });
    size("patience", [](RunConfig& c) -> auto& { return c.train.patience; });
    real("beta1", [](RunConfig& c) -> auto& { return c.train.beta1; });
    real("beta2", [](RunConfig& c) -> auto& { return c.train.beta2; });
    real("epsilon", [](RunConfig& c) -> auto& { return c.train.epsilon; });
    real("clip_norm", [](RunConfig& c) -> auto& { return c.train.clip_norm; });
    k["train_seed"] = [](RunConfig& c, std::string_view v) {
      c.train.seed = parse_number<std::uint64_t>("train_seed", v);
    };
    k["synth_seed"] = [](RunConfig& c, std::string_view v) {
      c.synth.seed = parse_number<std::uint64_t>("synth_seed", v);
    };
    k["seed"] = [](RunConfig& c, std::string_view v) {
      const auto s = parse_number<std::uint64_t>("seed", v);
      c.encoder.seed = c.train.seed = c.synth.seed = s;
    };
    size("train_docs", [](RunConfig& c) -> auto& { return c.synth.n_docs[0]; });
    size("dev_docs", [](RunConfig& c) -> auto& { return c.synth.n_docs[1]; });
    size("test_docs", [](RunConfig& c) -> auto& { return c.synth.n_docs[2]; });
    size("lexicon_size", [](RunConfig& c) -> auto& { return c.synth.lexicon_size; });
    size("min_sentences", [](RunConfig& c) -> auto& { return c.synth.min_sentences; });
    size("max_sentences", [](RunConfig& c) -> auto& { return c.synth.max_sentences; });
    real("noise_rate", [](RunConfig& c) -> auto& { return c.synth.noise_rate; });
    k["difficulty"] = [](RunConfig& c, std::string_view v) {
      if (v == "separable") c.synth.difficulty = Difficulty::Separable;
      else if (v == "noisy") c.synth.difficulty = Difficulty::Noisy;
      else throw UsageError("difficulty must be separable or noisy");
    };
    text("data", [](RunConfig& c) -> auto& { return c.data; });
    text("model", [](RunConfig& c) -> auto& { return c.model; });
    text("out", [](RunConfig& c) -> auto& { return c.out; });
    text("in", [](RunConfig& c) -> auto& { return c.in; });
    text("task", [](RunConfig& c) -> auto& { return c.task; });
    text("mode", [](RunConfig& c) -> auto& { return c.mode; });
    text("gold_spans", [](RunConfig& c) -> auto& { return c.gold_spans; });
    text("split", [](RunConfig& c) -> auto& { return c.split; });
    size("samples", [](RunConfig& c) -> auto& { return c.samples; });
    return k;
  }();
  return keys;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace detail

inline void set_config_key(RunConfig& c, std::string_view key, std::string_view value) {
  const auto& keys = detail::config_keys();
  auto it = keys.find(key);
  if (it == keys.end()) throw UsageError("unknown config key '" + std::string(key) + "'");
  it->second(c, value);
}

// Flat key=value lines; blank lines and lines starting with '#' are skipped.
inline void apply_config_text(RunConfig& c, std::string_view text, std::string_view origin = "config") {
  std::size_t line_no = 0;
  for (auto raw : detail::split_on(text, '\n')) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw UsageError(std::string(origin) + ":" + std::to_string(line_no) + ": expected key=value");
    set_config_key(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
}

inline std::size_t thread_count() {
  const char* env = std::getenv("MEDCTX_THREADS");
  if (!env || !*env) return 1;
  const std::string_view s(env);
  std::size_t n = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
  if (ec != std::errc() || end != s.data() + s.size() || n == 0)
    throw UsageError("MEDCTX_THREADS must be a positive integer");
  return n;
}

namespace detail {

template <typename F>
decltype(auto) with_precision(Precision p, F&& f) {
  if (p == Precision::F64) return f.template operator()<double>();
  return f.template operator()<float>();
}

inline Precision stored_precision(const std::filesystem::path& root) {
  if (std::filesystem::exists(ner_dir(root) / kManifestFile)) return artifact_precision(ner_dir(root));
  for (TaskKind t : kTasks)
    if (std::filesystem::exists(task_dir(root, t) / kManifestFile)) return artifact_precision(task_dir(root, t));
  throw InputError("no model artifacts under " + root.string());
}

inline const std::vector<AnnotatedDocument>& pick_split(const Corpus& c, const std::string& name) {
  const auto s = parse_split(name);
  if (!s) throw UsageError("split must be train, dev or test");
  return split_docs(c, *s);
}

inline void require(const std::string& value, std::string_view flag) {
  if (value.empty()) throw UsageError("missing required --" + std::string(flag));
}

inline std::ostream& note(std::ostream& err) { return err << "medctx: "; }

// Classifier decisions for gold spans, as a document per input document.
template <typename T>
AnnotatedDocument classify_gold_spans(const ClassifierBundle<T>& b, const AnnotatedDocument& d, bool with_context) {
  AnnotatedDocument out{d.doc_id, d.text, {}};
  const auto sentences = segment(d.text);
  for (const auto& m : d.mentions) {
    MedicationMention pm{m.span, m.surface};
    const auto sent = sentence_for(sentences, m.span);
    pm.event = classify_event(b, sent, m.span);
    if (with_context && pm.event == EventLabel::Disposition) pm.context = classify_context(b, sent, m.span);
    out.mentions.push_back(std::move(pm));
  }
  return out;
}

// A dimension-only view: gold Disposition spans get predicted context.
template <typename T>
ContextPredictions context_on_gold(const ClassifierBundle<T>& b, std::span<const AnnotatedDocument> docs) {
  ContextPredictions out;
  for (const auto& d : docs) {
    const auto sentences = segment(d.text);
    for (const auto& m : d.mentions)
      if (m.event == EventLabel::Disposition)
        out[MentionKey{d.doc_id, m.span}] = classify_context(b, sentence_for(sentences, m.span), m.span);
  }
  return out;
}

inline ContextPredictions context_of(const DocumentPredictions& docs) {
  ContextPredictions out;
  for (const auto& [id, d] : docs)
    for (const auto& m : d.mentions)
      if (m.context) out[MentionKey{id, m.span}] = *m.context;
  return out;
}

inline std::string span_record(const std::string& doc_id, const std::u32string& text, CharSpan s) {
  nlohmann::ordered_json j;
  j["doc_id"] = doc_id;
  j["start"] = s.start;
  j["end"] = s.end;
  j["surface"] = utf8::encode(text.substr(s.start, s.length()));
  return j.dump() + "\n";
}

// Small double-precision model with every parameter randomized, on examples
// built from a tiny synthetic corpus.
inline GradCheckReport toy_grad_check(LossMode mode, std::size_t samples, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.seed = seed;
  spec.n_docs = {2, 1, 1};
  spec.min_sentences = 3;
  spec.max_sentences = 3;
  const auto c = gen_corpus(spec).corpus;
  const auto v = build_vocab(c.train, 60);
  EncoderConfig cfg;
  cfg.layers = 2;
  cfg.hidden_dim = 8;
  cfg.heads = 2;
  cfg.ffn_dim = 12;
  cfg.max_len = 24;
  cfg.vocab_size = v.size();
  cfg.precision = Precision::F64;
  cfg.seed = seed;
  auto model = init_model<double>(cfg, {HeadSpec{"event", task_classes(TaskKind::Event).size()}});
  std::mt19937_64 rng(seed);
  for (auto& p : model.parameters())
    for (auto& x : p.value->reshaped()) x += (unit_uniform(rng) * 2 - 1) * 0.2;
  auto batch = mode == LossMode::Token ? build_ner_examples(c.train, v, cfg.max_len)
                                       : build_task_examples(c.train, TaskKind::Event, v, cfg.max_len);
  if (batch.size() > 3) batch.resize(3);
  return grad_check(model, batch, mode, 0, samples, 1e-5, seed);
}

inline void write_output(const std::string& path, std::string_view content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  write_file(p, content);
}

inline Log stderr_log(std::ostream& err) {
  return [&err](const std::string& s) { note(err) << s << '\n'; };
}

}  // namespace detail

inline void cmd_synth(const RunConfig& c, std::ostream& err) {
  detail::require(c.out, "out");
  c.synth.validate();
  const auto r = gen_corpus(c.synth);
  write_synth(c.out, r);
  detail::note(err) << "wrote " << r.corpus.train.size() << "/" << r.corpus.dev.size() << "/" << r.corpus.test.size()
                    << " documents to " << c.out << '\n';
}

inline void cmd_stats(const RunConfig& c, std::ostream& out) {
  detail::require(c.data, "data");
  out << format_stats(corpus_stats(load_corpus(c.data)));
}

inline void cmd_train(const RunConfig& c, std::ostream& err) {
  detail::require(c.data, "data");
  detail::require(c.task, "task");
  std::vector<TaskKind> tasks;
  bool ner = false;
  if (c.task == "all") {
    ner = true;
    tasks.assign(kTasks.begin(), kTasks.end());
  } else if (c.task == "ner") {
    ner = true;
  } else if (auto t = parse_task(c.task)) {
    tasks.push_back(*t);
  } else {
    throw UsageError("unknown task '" + c.task + "'");
  }
  c.encoder.validate();
  c.train.validate();
  const auto corpus = load_corpus(c.data);
  if (corpus.train.empty()) throw DataError("train split of " + c.data + " is empty");
  // Every model trained from the same data and vocab_size shares this vocabulary.
  const auto vocab = build_vocab(corpus.train, c.encoder.vocab_size);
  const auto log = detail::stderr_log(err);
  detail::with_precision(c.encoder.precision, [&]<typename T>() {
    if (ner) {
      log("training ner");
      save_ner(train_ner<T>(corpus, c.encoder, c.train, &vocab, log), ner_dir(c.model));
    }
    if (!tasks.empty()) save_classifiers(train_classifiers<T>(corpus, tasks, c.encoder, c.train, vocab, log), c.model);
  });
  detail::note(err) << "saved to " << c.model << '\n';
}

inline void cmd_predict(const RunConfig& c, std::ostream& err) {
  detail::require(c.data, "data");
  detail::require(c.out, "out");
  const std::string task = c.task.empty() ? "all" : c.task;
  if (task != "ner" && task != "event" && task != "context" && task != "all")
    throw UsageError("predict --task must be ner, event, context or all");
  const auto corpus = load_corpus(c.data);
  const auto& docs = detail::pick_split(corpus, c.split);
  std::string text;
  detail::with_precision(detail::stored_precision(c.model), [&]<typename T>() {
    if (task == "ner") {
      const auto ner = load_ner<T>(ner_dir(c.model));
      for (const auto& d : docs)
        for (auto s : predict_ner(ner, d.text)) text += detail::span_record(d.doc_id, d.text, s);
    } else if (task == "all") {
      const auto p = load_pipeline<T>(c.model);
      for (const auto& d : run_pipeline(p, std::span<const AnnotatedDocument>(docs), thread_count())) text += to_jsonl(d);
    } else {
      const bool ctx = task == "context";
      std::vector<TaskKind> need = {TaskKind::Event};
      if (ctx) need.assign(kTasks.begin(), kTasks.end());
      const auto b = load_classifiers<T>(c.model, need);
      for (const auto& d : docs) text += to_jsonl(detail::classify_gold_spans(b, d, ctx));
    }
  });
  detail::write_output(c.out, text);
  detail::note(err) << "wrote predictions for " << docs.size() << " documents to " << c.out << '\n';
}

// --in is one text file (document id = file stem) or a directory of .txt files.
inline void cmd_pipeline(const RunConfig& c, std::ostream& err) {
  detail::require(c.in, "in");
  detail::require(c.out, "out");
  namespace fs = std::filesystem;
  std::vector<AnnotatedDocument> docs;
  const fs::path in(c.in);
  if (fs::is_directory(in)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(in))
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) docs.push_back({f.stem().string(), utf8::decode(detail::read_file(f)), {}});
  } else {
    if (!fs::exists(in)) throw InputError("no such input " + c.in);
    docs.push_back({in.stem().string(), utf8::decode(detail::read_file(in)), {}});
  }
  std::string text;
  detail::with_precision(detail::stored_precision(c.model), [&]<typename T>() {
    const auto p = load_pipeline<T>(c.model);
    for (const auto& d : run_pipeline(p, std::span<const AnnotatedDocument>(docs), thread_count())) text += to_jsonl(d);
  });
  detail::write_output(c.out, text);
  detail::note(err) << "processed " << docs.size() << " documents\n";
}

inline void cmd_evaluate(const RunConfig& c, std::ostream& err) {
  detail::require(c.data, "data");
  detail::require(c.task, "task");
  const auto mode = parse_mode(c.mode);
  if (!mode) throw UsageError("mode must be strict or lenient");
  if (c.gold_spans != "on" && c.gold_spans != "off") throw UsageError("gold-spans must be on or off");
  const bool gold = c.gold_spans == "on";
  if (c.task != "ner" && c.task != "event" && c.task != "context" && c.task != "end2end")
    throw UsageError("evaluate --task must be ner, event, context or end2end");
  const auto corpus = load_corpus(c.data);
  const auto& docs = detail::pick_split(corpus, c.split);
  const std::span<const AnnotatedDocument> gold_docs(docs);

  MetricsReport rep;
  detail::with_precision(detail::stored_precision(c.model), [&]<typename T>() {
    if (c.task == "ner") {
      rep = ner_metrics(gold_docs, predict_ner(load_ner<T>(ner_dir(c.model)), gold_docs), *mode);
      return;
    }
    if (gold) {
      const bool ctx = c.task != "event";
      std::vector<TaskKind> need;
      if (c.task != "context") need.push_back(TaskKind::Event);
      if (ctx) need.insert(need.end(), kTasks.begin() + 1, kTasks.end());
      const auto b = load_classifiers<T>(c.model, need);
      if (c.task == "context") {
        rep = context_metrics(gold_docs, detail::context_on_gold(b, gold_docs));
        return;
      }
      DocumentPredictions pred;
      for (const auto& d : docs) pred[d.doc_id] = detail::classify_gold_spans(b, d, ctx);
      if (c.task == "event") rep = event_metrics(gold_docs, pred, *mode);
      else rep.overall = combined_accuracy(gold_docs, pred);
      return;
    }
    const auto p = load_pipeline<T>(c.model);
    DocumentPredictions pred;
    for (auto& d : run_pipeline(p, gold_docs, thread_count())) pred[d.doc_id] = std::move(d);
    if (c.task == "event") rep = event_metrics(gold_docs, pred, *mode);
    else if (c.task == "context") rep = context_metrics(gold_docs, detail::context_of(pred));
    else rep.overall = combined_accuracy(gold_docs, pred);
  });
  const std::string title = c.task + " (" + c.split + ", " + std::string(mode_name(*mode)) + ", gold spans " +
                            c.gold_spans + ")";
  err << format_report(rep, title);
  if (!c.out.empty()) detail::write_output(c.out, report_jsonl(rep, c.task));
}

inline void cmd_gradcheck(const RunConfig& c, std::ostream& out) {
  bool ok = true;
  for (LossMode mode : {LossMode::Token, LossMode::Sequence}) {
    const auto r = detail::toy_grad_check(mode, c.samples, c.synth.seed);
    const bool pass = r.max_relative_error < 1e-4;
    ok = ok && pass;
    out << (mode == LossMode::Token ? "token" : "sequence") << ": samples " << r.samples << ", max relative error "
        << r.max_relative_error << " at " << r.worst_parameter << (pass ? "" : " (exceeds 1e-4)") << '\n';
  }
  if (!ok) throw NumericError("gradcheck", "analytic and numeric gradients disagree");
}

// Parses argv, runs one subcommand and maps failures to exit codes:
// 0 success, 2 usage, 1 runtime or data error.
inline int run_command(int argc, const char* const* argv, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  CLI::App app{"Medication mention extraction and context classification", "medctx"};
  app.require_subcommand(1);

  struct Bound {
    std::string key;
    std::string value;
    CLI::Option* option = nullptr;
  };
  std::map<CLI::App*, std::vector<std::unique_ptr<Bound>>> bound;
  std::map<CLI::App*, std::string> config_path;
  auto bind = [&](CLI::App* sub, std::string key, std::string help) {
    auto b = std::make_unique<Bound>();
    b->key = key;
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    b->option = sub->add_option(flag, b->value, std::move(help));
    bound[sub].push_back(std::move(b));
  };
  auto common = [&](CLI::App* sub) {
    bind(sub, "data", "corpus root with train/dev/test");
    bind(sub, "model", "model directory (default: model)");
    bind(sub, "out", "output path");
    bind(sub, "seed", "seed for generation, initialization and training");
    sub->add_option("--config", config_path[sub], "key=value settings file; flags take precedence");
  };
  const std::vector<std::string> encoder_keys = {"layers",   "hidden_dim",   "heads",      "ffn_dim",
                                                 "max_len",  "vocab_size",   "dropout_rate", "precision",
                                                 "encoder_seed"};
  const std::vector<std::string> train_keys = {"learning_rate", "batch_size", "max_epochs", "patience", "beta1",
                                               "beta2",         "epsilon",    "clip_norm",  "train_seed"};
  const std::vector<std::string> synth_keys = {"train_docs",    "dev_docs",      "test_docs",  "lexicon_size",
                                               "min_sentences", "max_sentences", "difficulty", "noise_rate",
                                               "synth_seed"};

  auto* synth = app.add_subcommand("synth", "generate a synthetic annotated corpus");
  common(synth);
  for (const auto& k : synth_keys) bind(synth, k, "");

  auto* train = app.add_subcommand("train", "train NER and/or classifiers");
  common(train);
  bind(train, "task", "ner|event|action|negation|temporality|certainty|actor|all");
  for (const auto& k : encoder_keys) bind(train, k, "");
  for (const auto& k : train_keys) bind(train, k, "");

  auto* predict = app.add_subcommand("predict", "predict on a corpus split (classifiers use gold spans)");
  common(predict);
  bind(predict, "task", "ner|event|context|all (default all)");
  bind(predict, "split", "train|dev|test (default test)");

  auto* pipeline = app.add_subcommand("pipeline", "run the end-to-end system on raw text");
  common(pipeline);
  bind(pipeline, "in", "text file or directory of .txt files");

  auto* evaluate = app.add_subcommand("evaluate", "score a trained model on a corpus split");
  common(evaluate);
  bind(evaluate, "task", "ner|event|context|end2end");
  bind(evaluate, "mode", "strict|lenient (default strict)");
  bind(evaluate, "gold_spans", "on|off (default on)");
  bind(evaluate, "split", "train|dev|test (default test)");

  auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic and numeric gradients on toy models");
  common(gradcheck);
  bind(gradcheck, "samples", "sampled parameters per mode (default 200)");

  auto* stats = app.add_subcommand("stats", "label distribution per split");
  common(stats);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    detail::note(err) << e.what() << '\n';
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    RunConfig c;
    if (!config_path[sub].empty()) {
      if (!std::filesystem::exists(config_path[sub])) throw UsageError("no such config file " + config_path[sub]);
      apply_config_text(c, detail::read_file(config_path[sub]), config_path[sub]);
    }
    // `seed` first so explicit per-component seeds given alongside it win.
    for (const auto& b : bound[sub])
      if (b->key == "seed" && b->option->count()) set_config_key(c, b->key, b->value);
    for (const auto& b : bound[sub])
      if (b->key != "seed" && b->option->count()) set_config_key(c, b->key, b->value);

    if (sub == synth) cmd_synth(c, err);
    else if (sub == train) cmd_train(c, err);
    else if (sub == predict) cmd_predict(c, err);
    else if (sub == pipeline) cmd_pipeline(c, err);
    else if (sub == evaluate) cmd_evaluate(c, err);
    else if (sub == gradcheck) cmd_gradcheck(c, out);
    else cmd_stats(c, out);
    return 0;
  } catch (const UsageError& e) {
    detail::note(err) << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    detail::note(err) << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    detail::note(err) << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace medctx
