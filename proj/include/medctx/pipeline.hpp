#pragma once

#include <atomic>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "medctx/context.hpp"
#include "medctx/ner.hpp"

namespace medctx {

template <typename T>
struct PipelineBundle {
  NerModelBundle<T> ner;
  ClassifierBundle<T> classifiers;

  void validate() const {
    if (!(ner.vocab == classifiers.vocab)) throw CompatibilityError("NER and classifier vocabularies differ");
  }
};

// NER spans, then an event label per span, then context for Disposition spans.
template <typename T>
AnnotatedDocument run_pipeline(const PipelineBundle<T>& p, std::u32string_view text, std::string doc_id = {}) {
  AnnotatedDocument out;
  out.doc_id = std::move(doc_id);
  out.text = std::u32string(text);
  for (const auto& sent : segment(text)) {
    for (const auto span : predict_sentence(p.ner.model, p.ner.vocab, sent)) {
      MedicationMention m;
      m.span = span;
      m.surface = out.text.substr(span.start, span.length());
      m.event = classify_event(p.classifiers, sent, span);
      if (m.event == EventLabel::Disposition) m.context = classify_context(p.classifiers, sent, span);
      out.mentions.push_back(std::move(m));
    }
  }
  return out;
}

// Documents are independent; results keep input order for any thread count.
template <typename T>
std::vector<AnnotatedDocument> run_pipeline(const PipelineBundle<T>& p, std::span<const AnnotatedDocument> docs,
                                            std::size_t threads = 1) {
  std::vector<AnnotatedDocument> out(docs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next++) < docs.size();) out[i] = run_pipeline(p, docs[i].text, docs[i].doc_id);
  };
  threads = std::max<std::size_t>(1, std::min(threads, docs.size()));
  if (threads == 1) {
    work();
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  return out;
}

// One JSON object per mention; context fields only for Disposition.
inline std::string to_jsonl(const AnnotatedDocument& doc) {
  std::string out;
  for (const auto& m : doc.mentions) {
    nlohmann::ordered_json j;
    j["doc_id"] = doc.doc_id;
    j["start"] = m.span.start;
    j["end"] = m.span.end;
    j["surface"] = utf8::encode(m.surface);
    j["event"] = to_string(m.event);
    if (m.event == EventLabel::Disposition) {
      const auto ctx = m.context.value_or(ContextAttributes::unknown());
      for (Dimension d : kDimensions) {
        std::string key(dimension_name(d));
        for (auto& ch : key) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        j[key] = value_name(d, ctx.get(d));
      }
    }
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace medctx
