#include <gtest/gtest.h>

#include <random>

#include "json.hpp"
#include "medctx/eval.hpp"
#include "medctx/pipeline.hpp"
#include "medctx/synth.hpp"

namespace medctx {
namespace {

EncoderConfig tiny_config(std::size_t vocab_size) {
  EncoderConfig cfg;
  cfg.layers = 1;
  cfg.hidden_dim = 16;
  cfg.heads = 2;
  cfg.ffn_dim = 32;
  cfg.max_len = 64;
  cfg.vocab_size = vocab_size;
  return cfg;
}

Corpus small_corpus(std::uint64_t seed = 7) {
  GeneratorSpec spec;
  spec.seed = seed;
  spec.n_docs = {12, 4, 8};
  spec.min_sentences = 4;
  spec.max_sentences = 6;
  return gen_corpus(spec).corpus;
}

// Untrained models with randomized output heads: arbitrary but deterministic
// decisions, enough to exercise every dataflow path.
PipelineBundle<float> random_bundle(const Corpus& c, std::uint64_t seed) {
  PipelineBundle<float> p;
  const auto v = build_vocab(c.train, 300);
  auto cfg = tiny_config(v.size());
  std::mt19937_64 rng(seed);
  auto scramble = [&](Matrix<float>& m, double scale) {
    for (auto& x : m.reshaped()) x = static_cast<float>((detail::unit_uniform(rng) * 2 - 1) * scale);
  };
  p.ner.vocab = v;
  p.ner.model = init_model<float>(cfg, {});
  scramble(p.ner.model.token_head_weight, 2);
  scramble(p.ner.model.token_head_bias, 1);
  p.classifiers.vocab = v;
  for (TaskKind t : kTasks) {
    TaskModel<float> tm;
    tm.task = t;
    tm.model = init_model<float>(cfg, {HeadSpec{task_name(t), task_classes(t).size()}});
    scramble(tm.model.sequence_heads[0].weight, 2);
    scramble(tm.model.sequence_heads[0].bias, 1);
    p.classifiers.tasks[t] = tm;
  }
  return p;
}

TEST(Pipeline, EmptyTextGivesNoMentions) {
  const auto c = small_corpus();
  const auto p = random_bundle(c, 1);
  const auto doc = run_pipeline(p, U"", "empty");
  EXPECT_EQ(doc.doc_id, "empty");
  EXPECT_TRUE(doc.mentions.empty());
  EXPECT_EQ(to_jsonl(doc), "");
}

TEST(Pipeline, NoNerSpansMeansNoMentions) {
  const auto c = small_corpus();
  auto p = random_bundle(c, 2);
  // Every token tagged O.
  p.ner.model.token_head_weight.setZero();
  p.ner.model.token_head_bias.setZero();
  p.ner.model.token_head_bias(0, static_cast<int>(BioTag::O)) = 1;
  for (const auto& d : c.test) EXPECT_TRUE(run_pipeline(p, d.text, d.doc_id).mentions.empty());
}

TEST(Pipeline, SpansMatchNerAndContextIffDisposition) {
  const auto c = small_corpus();
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    const auto p = random_bundle(c, seed);
    std::size_t dispositions = 0, mentions = 0;
    for (const auto& d : c.test) {
      const auto out = run_pipeline(p, d.text, d.doc_id);
      std::vector<CharSpan> spans;
      for (const auto& m : out.mentions) {
        spans.push_back(m.span);
        EXPECT_EQ(m.context.has_value(), m.event == EventLabel::Disposition);
        EXPECT_EQ(m.surface, d.text.substr(m.span.start, m.span.length()));
        dispositions += m.event == EventLabel::Disposition ? 1 : 0;
      }
      mentions += out.mentions.size();
      EXPECT_EQ(spans, predict_ner(p.ner, d.text));
      EXPECT_NO_THROW(validate(out));
    }
    EXPECT_GT(mentions, 0u) << seed;
  }
}

TEST(Pipeline, ThreadCountDoesNotChangeOutput) {
  const auto c = small_corpus();
  const auto p = random_bundle(c, 6);
  const auto one = run_pipeline(p, std::span<const AnnotatedDocument>(c.test), 1);
  const auto four = run_pipeline(p, std::span<const AnnotatedDocument>(c.test), 4);
  ASSERT_EQ(one.size(), c.test.size());
  EXPECT_EQ(one, four);
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_EQ(one[i].doc_id, c.test[i].doc_id);
  EXPECT_TRUE(run_pipeline(p, std::span<const AnnotatedDocument>(), 3).empty());
}

TEST(Pipeline, MismatchedVocabulariesRejected) {
  const auto c = small_corpus();
  auto p = random_bundle(c, 7);
  EXPECT_NO_THROW(p.validate());
  p.classifiers.vocab = build_vocab(c.train, 200);
  EXPECT_THROW(p.validate(), CompatibilityError);
}

TEST(Pipeline, CombinedAccuracyBoundedByStages) {
  const auto c = small_corpus();
  for (std::uint64_t seed : {8u, 9u}) {
    auto p = random_bundle(c, seed);
    // Gold spans as the NER output makes every stage-one decision correct.
    DocumentPredictions end2end, on_gold;
    for (const auto& d : c.test) {
      end2end[d.doc_id] = run_pipeline(p, d.text, d.doc_id);
      AnnotatedDocument g{d.doc_id, d.text, {}};
      const auto sentences = segment(d.text);
      for (const auto& m : d.mentions) {
        MedicationMention pm{m.span, m.surface};
        const auto sent = sentence_for(sentences, m.span);
        pm.event = classify_event(p.classifiers, sent, m.span);
        if (pm.event == EventLabel::Disposition) pm.context = classify_context(p.classifiers, sent, m.span);
        g.mentions.push_back(pm);
      }
      on_gold[d.doc_id] = g;
    }
    const auto combined = combined_accuracy(c.test, end2end).value;
    EXPECT_LE(combined, combined_accuracy(c.test, on_gold).value);
    EXPECT_LE(combined, ner_metrics(c.test, predict_ner(p.ner, c.test), MatchMode::Strict).micro->recall + 1e-12);
  }
}

TEST(Jsonl, FieldNamesAndOrder) {
  AnnotatedDocument d;
  d.doc_id = "n1";
  d.text = U"Start Zorvex. Café Abc.";
  MedicationMention a{{6, 12}, U"Zorvex", EventLabel::Disposition,
                      ContextAttributes{Action::Start, Negation::NotNegated, Temporality::Present,
                                        Certainty::Certain, Actor::Physician}};
  MedicationMention b{{14, 18}, U"Café", EventLabel::NoDisposition, std::nullopt};
  d.mentions = {a, b};
  const auto text = to_jsonl(d);
  const auto nl = text.find('\n');
  ASSERT_NE(nl, std::string::npos);
  const auto first = nlohmann::ordered_json::parse(text.substr(0, nl));
  const auto second = nlohmann::ordered_json::parse(text.substr(nl + 1));
  std::vector<std::string> keys;
  for (auto it = first.begin(); it != first.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"doc_id", "start", "end", "surface", "event", "action", "negation",
                                            "temporality", "certainty", "actor"}));
  EXPECT_EQ(first["start"], 6);
  EXPECT_EQ(first["surface"], "Zorvex");
  EXPECT_EQ(first["event"], to_string(EventLabel::Disposition));
  EXPECT_EQ(first["action"], value_name(Dimension::Action, static_cast<int>(Action::Start)));
  EXPECT_EQ(second.size(), 5u);
  EXPECT_EQ(second["surface"], "Café");
  EXPECT_EQ(text.back(), '\n');
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
}

}  // namespace
}  // namespace medctx
