#pragma once

#include <map>
#include <string>
#include <vector>

#include "medctx/encoder.hpp"
#include "medctx/eval.hpp"
#include "medctx/preproc.hpp"
#include "medctx/train.hpp"

namespace medctx {

template <typename T>
struct NerModelBundle {
  EncoderModel<T> model;
  Vocabulary vocab;
  TrainConfig train_config;
  TrainHistory history;  // dev score is strict micro-F1
};

// One sequence per sentence, mention-free sentences included.
inline std::vector<LabeledSequence> build_ner_examples(std::span<const AnnotatedDocument> docs, const Vocabulary& v,
                                                       std::size_t max_len = kDefaultMaxLen, const Log& log = {}) {
  std::vector<LabeledSequence> out;
  for (const auto& doc : docs) {
    const auto sentences = segment(doc.text);
    std::vector<CharSpan> spans;
    for (const auto& m : doc.mentions) {
      spans.push_back(m.span);
      bool inside = false;
      for (const auto& s : sentences) inside |= s.span.start <= m.span.start && m.span.end <= s.span.end;
      if (!inside && log)
        log("warning: " + doc.doc_id + " mention [" + std::to_string(m.span.start) + "," +
            std::to_string(m.span.end) + ") crosses a sentence boundary and will be split");
    }
    for (const auto& sent : sentences) {
      auto seq = align_to_subtokens(sent, spans_to_bio(sent, spans), v, max_len);
      seq.doc_id = doc.doc_id;
      out.push_back(std::move(seq));
    }
  }
  return out;
}

// Per-position argmax over B, I, O; specials and padding read as O.
template <typename T>
std::vector<BioTag> predict_tags(const EncoderModel<T>& model, const LabeledSequence& seq) {
  const auto logits = token_logits(model, forward(model, seq));
  std::vector<BioTag> tags(seq.size(), BioTag::O);
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    if (seq.word_index[static_cast<std::size_t>(i)] >= 0)
      tags[static_cast<std::size_t>(i)] = static_cast<BioTag>(argmax(RowVec<T>(logits.row(i))));
  return tags;
}

template <typename T>
std::vector<CharSpan> predict_sentence(const EncoderModel<T>& model, const Vocabulary& v, const Sentence& sent) {
  const std::vector<BioTag> none(sent.tokens.size(), BioTag::O);
  const auto seq = align_to_subtokens(sent, none, v, model.config.max_len);
  return decode_bio(seq, predict_tags(model, seq), sent);
}

template <typename T>
std::vector<CharSpan> predict_spans(const EncoderModel<T>& model, const Vocabulary& v, std::u32string_view text) {
  std::vector<CharSpan> spans;
  for (const auto& sent : segment(text)) {
    auto s = predict_sentence(model, v, sent);
    spans.insert(spans.end(), s.begin(), s.end());
  }
  return spans;
}

template <typename T>
std::vector<CharSpan> predict_ner(const NerModelBundle<T>& b, std::u32string_view text) {
  return predict_spans(b.model, b.vocab, text);
}

template <typename T>
SpanPredictions predict_ner(const NerModelBundle<T>& b, std::span<const AnnotatedDocument> docs) {
  SpanPredictions out;
  for (const auto& d : docs) out[d.doc_id] = predict_ner(b, d.text);
  return out;
}

// Fine-tunes a token tagger on the train split, keeping the epoch with the
// best strict micro-F1 on dev. A shared vocabulary may be supplied.
template <typename T>
NerModelBundle<T> train_ner(const Corpus& c, EncoderConfig cfg, const TrainConfig& tc,
                            const Vocabulary* shared_vocab = nullptr, const Log& log = {}) {
  if (c.train.empty() || c.dev.empty()) throw DataError("NER training needs non-empty train and dev splits");
  NerModelBundle<T> b;
  b.vocab = shared_vocab ? *shared_vocab : build_vocab(c.train, cfg.vocab_size);
  cfg.vocab_size = b.vocab.size();
  b.model = init_model<T>(cfg, {});
  b.train_config = tc;
  const auto examples = build_ner_examples(c.train, b.vocab, cfg.max_len, log);
  auto dev_f1 = [&](const EncoderModel<T>& m) {
    SpanPredictions pred;
    for (const auto& d : c.dev) pred[d.doc_id] = predict_spans(m, b.vocab, d.text);
    return ner_metrics(c.dev, pred, MatchMode::Strict).micro->f1;
  };
  b.history = fit(b.model, std::span<const LabeledSequence>(examples), LossMode::Token, 0, tc, dev_f1, log);
  return b;
}

}  // namespace medctx
