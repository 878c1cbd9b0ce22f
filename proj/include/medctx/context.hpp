#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medctx/encoder.hpp"
#include "medctx/preproc.hpp"
#include "medctx/train.hpp"

namespace medctx {

// One encoder with a single sequence head. A constant classifier is the
// fallback when training data shows fewer than two classes.
template <typename T>
struct TaskModel {
  TaskKind task = TaskKind::Event;
  EncoderModel<T> model;
  TrainHistory history;  // dev score is accuracy
  bool constant = false;
};

template <typename T>
struct ClassifierBundle {
  Vocabulary vocab;
  TrainConfig train_config;
  std::map<TaskKind, TaskModel<T>> tasks;

  const TaskModel<T>& at(TaskKind t) const {
    auto it = tasks.find(t);
    if (it == tasks.end()) throw KeyError("no classifier for task '" + std::string(task_name(t)) + "'");
    return it->second;
  }
};

// [CLS] left [S] mention [E] right [SEP], padded to max_len. When too long,
// whole words are dropped from whichever side reaches farther from the
// mention (the right side on a tie).
inline LabeledSequence build_classification_example(const Sentence& sent, CharSpan mention, const Vocabulary& v,
                                                    std::size_t max_len = kDefaultMaxLen) {
  if (mention.start < sent.span.start || mention.end > sent.span.end || mention.length() == 0)
    throw RangeError("mention [" + std::to_string(mention.start) + "," + std::to_string(mention.end) +
                     ") outside sentence [" + std::to_string(sent.span.start) + "," +
                     std::to_string(sent.span.end) + ")");
  std::size_t first = sent.tokens.size(), last = 0;
  for (std::size_t t = 0; t < sent.tokens.size(); ++t)
    if (sent.tokens[t].span.overlaps(mention)) {
      first = std::min(first, t);
      last = t;
    }
  if (first == sent.tokens.size()) throw RangeError("mention covers no token");

  std::vector<std::vector<int>> pieces;
  pieces.reserve(sent.tokens.size());
  for (const auto& tok : sent.tokens) pieces.push_back(subword_encode(tok.text, v));

  std::size_t total = 4;
  for (const auto& p : pieces) total += p.size();
  std::size_t mention_len = 4;
  for (std::size_t w = first; w <= last; ++w) mention_len += pieces[w].size();
  if (mention_len > max_len)
    throw LengthError("mention needs " + std::to_string(mention_len) + " positions, limit is " +
                      std::to_string(max_len));

  std::size_t lo = 0, hi = sent.tokens.size();  // kept words [lo, hi)
  while (total > max_len) {
    const std::size_t left_reach = first - lo, right_reach = hi - 1 - last;
    if (right_reach >= left_reach && right_reach > 0) {
      total -= pieces[--hi].size();
    } else {
      total -= pieces[lo++].size();
    }
  }

  LabeledSequence seq;
  seq.sentence_span = sent.span;
  seq.words_kept = hi - lo;
  seq.ids.reserve(max_len);
  auto push = [&](int id, std::uint8_t m, int w) {
    seq.ids.push_back(id);
    seq.mask.push_back(m);
    seq.word_index.push_back(w);
    seq.tags.push_back(BioTag::O);
  };
  auto words = [&](std::size_t a, std::size_t b) {
    for (std::size_t w = a; w < b; ++w)
      for (int id : pieces[w]) push(id, 1, static_cast<int>(w));
  };
  push(Vocabulary::kCls, 1, -1);
  words(lo, first);
  seq.start_marker = seq.ids.size();
  push(Vocabulary::kStartMark, 1, -1);
  words(first, last + 1);
  seq.end_marker = seq.ids.size();
  push(Vocabulary::kEndMark, 1, -1);
  words(last + 1, hi);
  push(Vocabulary::kSep, 1, -1);
  while (seq.ids.size() < max_len) push(Vocabulary::kPad, 0, -1);
  return seq;
}

// The sentence holding the span's start; a span running past it pulls in the
// following sentences it reaches.
inline Sentence sentence_for(std::span<const Sentence> sentences, CharSpan span) {
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (sentences[i].span.start > span.start || span.start >= sentences[i].span.end) continue;
    Sentence s = sentences[i];
    for (std::size_t j = i + 1; j < sentences.size() && s.span.end < span.end; ++j) {
      s.tokens.insert(s.tokens.end(), sentences[j].tokens.begin(), sentences[j].tokens.end());
      s.span.end = sentences[j].span.end;
    }
    return s;
  }
  throw RangeError("no sentence contains offset " + std::to_string(span.start));
}

inline std::optional<int> task_label(TaskKind task, const MedicationMention& m) {
  if (!is_dimension(task)) return static_cast<int>(m.event);
  if (m.event != EventLabel::Disposition) return std::nullopt;
  return m.context.value_or(ContextAttributes::unknown()).get(task_dimension(task));
}

// Event examples cover every mention; dimension examples only Disposition ones.
inline std::vector<LabeledSequence> build_task_examples(std::span<const AnnotatedDocument> docs, TaskKind task,
                                                        const Vocabulary& v, std::size_t max_len = kDefaultMaxLen) {
  std::vector<LabeledSequence> out;
  for (const auto& doc : docs) {
    std::optional<std::vector<Sentence>> sentences;
    for (const auto& m : doc.mentions) {
      const auto label = task_label(task, m);
      if (!label) continue;
      if (!sentences) sentences = segment(doc.text);
      auto seq = build_classification_example(sentence_for(*sentences, m.span), m.span, v, max_len);
      seq.label = *label;
      seq.doc_id = doc.doc_id;
      out.push_back(std::move(seq));
    }
  }
  return out;
}

template <typename T>
std::size_t classify(const EncoderModel<T>& model, const LabeledSequence& seq) {
  const auto hidden = forward(model, seq);
  return argmax(sequence_logits(model, hidden, seq.start_marker, seq.end_marker, 0));
}

template <typename T>
double accuracy(const EncoderModel<T>& model, std::span<const LabeledSequence> examples) {
  if (examples.empty()) return 0.0;
  std::size_t right = 0;
  for (const auto& s : examples) right += classify(model, s) == static_cast<std::size_t>(s.label) ? 1 : 0;
  return static_cast<double>(right) / static_cast<double>(examples.size());
}

// Zero weights and a unit bias on `cls`: predicts `cls` for every input.
template <typename T>
void make_constant(EncoderModel<T>& model, std::size_t cls) {
  auto& h = model.sequence_heads.at(0);
  h.weight.setZero();
  h.bias.setZero();
  h.bias(0, static_cast<Eigen::Index>(cls)) = T(1);
}

template <typename T>
TaskModel<T> train_task(const Corpus& c, TaskKind task, const EncoderConfig& cfg, const TrainConfig& tc,
                        const Vocabulary& v, const Log& log = {}) {
  TaskModel<T> out;
  out.task = task;
  const std::size_t classes = task_classes(task).size();
  out.model = init_model<T>(cfg, {HeadSpec{std::string(task_name(task)), classes}});
  const auto train = build_task_examples(c.train, task, v, cfg.max_len);
  const auto dev = build_task_examples(c.dev, task, v, cfg.max_len);
  if (train.empty()) throw DataError("no training examples for task '" + std::string(task_name(task)) + "'");

  std::vector<std::size_t> counts(classes, 0);
  for (const auto& s : train) ++counts[static_cast<std::size_t>(s.label)];
  std::size_t observed = 0, majority = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    observed += counts[k] > 0 ? 1 : 0;
    if (counts[k] > counts[majority]) majority = k;
  }
  if (observed < 2) {
    if (log)
      log("warning: task '" + std::string(task_name(task)) + "' has a single observed class; using a constant classifier");
    make_constant(out.model, majority);
    out.constant = true;
    return out;
  }
  if (dev.empty() && log) log("warning: no dev examples for task '" + std::string(task_name(task)) + "'");
  auto dev_acc = [&](const EncoderModel<T>& m) { return accuracy(m, std::span<const LabeledSequence>(dev)); };
  out.history = fit(out.model, std::span<const LabeledSequence>(train), LossMode::Sequence, 0, tc, dev_acc, log);
  return out;
}

// Trains each requested task independently on one shared vocabulary.
template <typename T>
ClassifierBundle<T> train_classifiers(const Corpus& c, std::span<const TaskKind> tasks, EncoderConfig cfg,
                                      const TrainConfig& tc, const Vocabulary& v, const Log& log = {}) {
  if (c.train.empty() || c.dev.empty()) throw DataError("classifier training needs non-empty train and dev splits");
  cfg.vocab_size = v.size();
  ClassifierBundle<T> b;
  b.vocab = v;
  b.train_config = tc;
  for (TaskKind t : tasks) {
    if (log) log("training " + std::string(task_name(t)));
    b.tasks[t] = train_task<T>(c, t, cfg, tc, v, log);
  }
  return b;
}

template <typename T>
EventLabel classify_event(const ClassifierBundle<T>& b, const Sentence& sent, CharSpan mention) {
  const auto& m = b.at(TaskKind::Event).model;
  return static_cast<EventLabel>(classify(m, build_classification_example(sent, mention, b.vocab, m.config.max_len)));
}

// Five independent argmax decisions assembled into one tuple.
template <typename T>
ContextAttributes classify_context(const ClassifierBundle<T>& b, const Sentence& sent, CharSpan mention) {
  ContextAttributes ctx;
  std::optional<LabeledSequence> seq;
  for (Dimension d : kDimensions) {
    const auto& m = b.at(dimension_task(d)).model;
    if (!seq || seq->size() != m.config.max_len)
      seq = build_classification_example(sent, mention, b.vocab, m.config.max_len);
    ctx.set(d, static_cast<int>(classify(m, *seq)));
  }
  return ctx;
}

}  // namespace medctx
