#include <gtest/gtest.h>

#include <random>

#include "medctx/eval.hpp"
#include "metric_oracle.hpp"

namespace medctx {
namespace {

AnnotatedDocument doc(std::string id, std::vector<std::pair<CharSpan, EventLabel>> mentions) {
  AnnotatedDocument d;
  d.doc_id = std::move(id);
  d.text = std::u32string(200, U'x');
  for (auto [span, ev] : mentions) {
    MedicationMention m;
    m.span = span;
    m.surface = d.text.substr(span.start, span.length());
    m.event = ev;
    if (ev == EventLabel::Disposition) m.context = ContextAttributes{};
    d.mentions.push_back(m);
  }
  return d;
}

TEST(MatchSpans, StrictAndLenient) {
  std::vector<CharSpan> g = {{0, 5}}, p = {{0, 5}};
  EXPECT_EQ(match_spans(g, p, MatchMode::Strict).pairs.size(), 1u);
  p = {{2, 7}};
  EXPECT_EQ(match_spans(g, p, MatchMode::Strict).pairs.size(), 0u);
  EXPECT_EQ(match_spans(g, p, MatchMode::Lenient).pairs.size(), 1u);
  g = {};
  p = {{0, 5}};
  auto r = match_spans(g, p, MatchMode::Strict);
  EXPECT_EQ(r.pairs.size(), 0u);
  EXPECT_EQ(r.unmatched_pred, std::vector<std::size_t>{0});
}

TEST(MatchSpans, OverlapWithinListIsInputError) {
  std::vector<CharSpan> g = {{0, 5}, {3, 8}}, p;
  EXPECT_THROW(match_spans(g, p, MatchMode::Strict), InputError);
  EXPECT_THROW(match_spans(p, g, MatchMode::Lenient), InputError);
}

TEST(MatchSpans, LenientGreedyGapIsVisibleToOracle) {
  // Gold out of offset order: greedy hands (2,5) to the first gold item and strands the second.
  std::vector<CharSpan> g = {{4, 8}, {0, 3}}, p = {{2, 5}, {7, 12}};
  const auto greedy = match_spans(g, p, MatchMode::Lenient);
  const auto best = oracle::best_matching(g.size(), p.size(), [&](std::size_t a, std::size_t b) {
    return oracle::compatible(g[a], p[b], MatchMode::Lenient);
  });
  EXPECT_EQ(greedy.pairs.size(), 1u);
  EXPECT_EQ(best.size(), 2u);
}

TEST(NerMetrics, PerfectAndHalf) {
  std::vector<AnnotatedDocument> gold = {doc("a", {{{0, 5}, EventLabel::NoDisposition}}),
                                         doc("b", {{{0, 5}, EventLabel::NoDisposition}})};
  SpanPredictions pred = {{"a", {{0, 5}}}, {"b", {{0, 5}}}};
  auto r = ner_metrics(gold, pred, MatchMode::Strict);
  EXPECT_EQ(r.micro->f1, 1.0);
  EXPECT_EQ(r.macro->f1, 1.0);
  EXPECT_EQ(r.macro->precision, 1.0);

  pred = {{"a", {{0, 5}}}};
  r = ner_metrics(gold, pred, MatchMode::Strict);
  EXPECT_DOUBLE_EQ(r.macro->f1, 0.5);
  EXPECT_EQ(r.micro->tp, 1u);
  EXPECT_EQ(r.micro->fp, 0u);
  EXPECT_EQ(r.micro->fn, 1u);
  EXPECT_DOUBLE_EQ(r.micro->precision, 1.0);
  EXPECT_DOUBLE_EQ(r.micro->recall, 0.5);
  EXPECT_DOUBLE_EQ(r.micro->f1, 2.0 / 3.0);
}

TEST(NerMetrics, UnknownDocumentIsKeyError) {
  std::vector<AnnotatedDocument> gold = {doc("a", {})};
  SpanPredictions pred = {{"zzz", {}}};
  EXPECT_THROW(ner_metrics(gold, pred, MatchMode::Strict), KeyError);
}

TEST(EventMetrics, GoldSpanMicroEqualsAccuracy) {
  std::vector<std::pair<CharSpan, EventLabel>> g, p;
  for (std::size_t i = 0; i < 10; ++i) {
    const CharSpan s{i * 10, i * 10 + 4};
    const auto ev = static_cast<EventLabel>(i % 3);
    g.emplace_back(s, ev);
    p.emplace_back(s, i < 8 ? ev : static_cast<EventLabel>((i + 1) % 3));
  }
  std::vector<AnnotatedDocument> gold = {doc("a", g)};
  std::vector<AnnotatedDocument> preds = {doc("a", p)};
  const auto r = event_metrics(gold, by_doc_id(preds));
  EXPECT_DOUBLE_EQ(r.micro->f1, 0.8);
  EXPECT_DOUBLE_EQ(r.micro->precision, 0.8);
  EXPECT_DOUBLE_EQ(r.micro->recall, 0.8);
}

TEST(EventMetrics, MislabelIsFpAndFn) {
  std::vector<AnnotatedDocument> gold = {doc("a", {{{0, 4}, EventLabel::Disposition}})};
  std::vector<AnnotatedDocument> preds = {doc("a", {{{0, 4}, EventLabel::Undetermined}})};
  const auto r = event_metrics(gold, by_doc_id(preds));
  EXPECT_EQ(r.classes[0].fn, 1u);
  EXPECT_EQ(r.classes[2].fp, 1u);
  EXPECT_EQ(r.micro->tp, 0u);
}

TEST(EventMetrics, EmptyPredictions) {
  std::vector<AnnotatedDocument> gold = {doc("a", {{{0, 4}, EventLabel::Disposition},
                                                   {{5, 9}, EventLabel::NoDisposition},
                                                   {{10, 14}, EventLabel::Undetermined}})};
  const auto r = event_metrics(gold, DocumentPredictions{});
  for (const auto& c : r.classes) {
    EXPECT_EQ(c.recall, 0.0);
    EXPECT_EQ(c.precision, 0.0);
    EXPECT_EQ(c.f1, 0.0);
  }
}

TEST(ContextMetrics, FiveAccuraciesGiveOverall) {
  // Action, Negation, Temporality, Certainty, Actor accuracies from the context results table.
  const std::vector<double> acc = {0.8862, 0.9790, 0.8503, 0.9102, 0.9371};
  const double overall = overall_from_dimensions(acc);
  EXPECT_NEAR(overall, 0.91256, 1e-12);
  EXPECT_EQ(std::round(overall * 1e4) / 1e4, 0.9126);
}

TEST(ContextMetrics, OverallIsMeanOfDimensions) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::pair<CharSpan, EventLabel>> ms;
    for (std::size_t i = 0; i < 10; ++i) ms.emplace_back(CharSpan{i * 10, i * 10 + 3}, EventLabel::Disposition);
    auto g = doc("a", ms);
    ContextPredictions pred;
    for (auto& m : g.mentions) {
      ContextAttributes c;
      for (Dimension d : kDimensions) c.set(d, static_cast<int>(rng() % dimension_values(d).size()));
      m.context = c;
      ContextAttributes p;
      for (Dimension d : kDimensions) p.set(d, static_cast<int>(rng() % dimension_values(d).size()));
      pred[MentionKey{"a", m.span}] = p;
    }
    std::vector<AnnotatedDocument> gold = {g};
    auto r = context_metrics(gold, pred);
    std::vector<double> acc;
    for (const auto& a : r.dimensions) acc.push_back(a.value);
    EXPECT_NEAR(r.overall->value, overall_from_dimensions(acc), 1e-15);
  }
}

TEST(ContextMetrics, MissingPredictionIsWrongEverywhere) {
  std::vector<AnnotatedDocument> gold = {doc("a", {{{0, 4}, EventLabel::Disposition}})};
  auto r = context_metrics(gold, ContextPredictions{});
  for (const auto& a : r.dimensions) EXPECT_EQ(a.value, 0.0);
  EXPECT_EQ(r.overall->total, 5u);
  ContextPredictions all = {{MentionKey{"a", {0, 4}}, ContextAttributes{}}};
  r = context_metrics(gold, all);
  EXPECT_EQ(r.overall->value, 1.0);
}

TEST(CombinedAccuracy, FourMentionCase) {
  std::vector<AnnotatedDocument> gold = {doc("a", {{{0, 4}, EventLabel::Disposition},
                                                   {{10, 14}, EventLabel::NoDisposition},
                                                   {{20, 24}, EventLabel::Disposition},
                                                   {{30, 34}, EventLabel::Disposition}})};
  auto pred = gold[0];
  pred.mentions[0].span = {0, 3};                                  // span miss
  pred.mentions[1].event = EventLabel::Undetermined;               // event miss
  pred.mentions[2].context->certainty = Certainty::Hypothetical;  // one dimension off
  std::vector<AnnotatedDocument> preds = {pred};
  EXPECT_DOUBLE_EQ(combined_accuracy(gold, by_doc_id(preds)).value, 0.25);
  EXPECT_DOUBLE_EQ(combined_accuracy(gold, by_doc_id(gold)).value, 1.0);
  EXPECT_DOUBLE_EQ(combined_accuracy(gold, DocumentPredictions{}).value, 0.0);
}


TEST(Oracle, StrictInstancesAgreeExactly) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    auto inst = oracle::random_instance(rng);
    SpanPredictions spans;
    ContextPredictions ctx;
    for (const auto& d : inst.pred) {
      auto& v = spans[d.doc_id];
      for (const auto& m : d.mentions) {
        v.push_back(m.span);
        if (m.context) ctx[MentionKey{d.doc_id, m.span}] = *m.context;
      }
    }
    const auto preds = by_doc_id(inst.pred);
    ASSERT_TRUE(oracle::same(ner_metrics(inst.gold, spans, MatchMode::Strict),
                             oracle::ner(inst.gold, spans, MatchMode::Strict)))
        << trial;
    ASSERT_TRUE(oracle::same(event_metrics(inst.gold, preds), oracle::event(inst.gold, preds, MatchMode::Strict)))
        << trial;
    ASSERT_TRUE(oracle::same(context_metrics(inst.gold, ctx), oracle::context(inst.gold, ctx))) << trial;
  }
}

TEST(Oracle, LenientOracleNeverBelowGreedy) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    auto inst = oracle::random_instance(rng);
    SpanPredictions spans;
    for (const auto& d : inst.pred)
      for (const auto& m : d.mentions) spans[d.doc_id].push_back(m.span);
    const auto main = ner_metrics(inst.gold, spans, MatchMode::Lenient);
    const auto exact = oracle::ner(inst.gold, spans, MatchMode::Lenient);
    EXPECT_GE(exact.micro.tp, static_cast<std::int64_t>(main.micro->tp));
  }
}

TEST(Oracle, RejectsLargeInstances) {
  EXPECT_THROW(oracle::best_matching(13, 1, [](std::size_t, std::size_t) { return false; }), SizeError);
}

TEST(Metrics, SymmetryBoundsIdentity) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = oracle::random_instance(rng);
    SpanPredictions fwd, gold_as_pred;
    for (const auto& d : inst.pred)
      for (const auto& m : d.mentions) fwd[d.doc_id].push_back(m.span);
    for (const auto& d : inst.gold)
      for (const auto& m : d.mentions) gold_as_pred[d.doc_id].push_back(m.span);
    // Swap roles: predictions become gold.
    std::vector<AnnotatedDocument> swapped_gold;
    for (const auto& g : inst.gold) {
      auto d = g;
      d.mentions.clear();
      for (const auto& p : inst.pred)
        if (p.doc_id == g.doc_id) d.mentions = p.mentions;
      swapped_gold.push_back(d);
    }
    const auto a = ner_metrics(inst.gold, fwd, MatchMode::Strict);
    const auto b = ner_metrics(swapped_gold, gold_as_pred, MatchMode::Strict);
    EXPECT_EQ(a.micro->precision, b.micro->recall);
    EXPECT_EQ(a.micro->recall, b.micro->precision);
    for (double v : {a.micro->precision, a.micro->recall, a.micro->f1, a.macro->f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_LE(a.micro->tp, std::min(a.micro->tp + a.micro->fn, a.micro->tp + a.micro->fp));

    std::size_t total = 0;
    for (const auto& g : inst.gold) total += g.mentions.size();
    const auto self = ner_metrics(inst.gold, gold_as_pred, MatchMode::Strict);
    if (total > 0) EXPECT_EQ(self.micro->f1, 1.0);
    const auto ev = event_metrics(inst.gold, by_doc_id(inst.gold));
    if (total > 0) EXPECT_EQ(ev.micro->f1, 1.0);
    EXPECT_EQ(combined_accuracy(inst.gold, by_doc_id(inst.gold)).correct, total);
  }
}

TEST(Report, TextAndJsonLines) {
  std::vector<AnnotatedDocument> gold = {doc("a", {{{0, 4}, EventLabel::Disposition}})};
  const auto r = event_metrics(gold, by_doc_id(gold));
  const auto text = format_report(r, "Event classification (strict)");
  EXPECT_NE(text.find("Disposition"), std::string::npos);
  EXPECT_NE(text.find("1.0000"), std::string::npos);
  const auto lines = report_jsonl(r, "event");
  std::size_t n = 0;
  for (std::size_t pos = 0; (pos = lines.find('\n', pos)) != std::string::npos; ++pos) ++n;
  EXPECT_EQ(n, 12u);  // 3 classes + micro, three metrics each
  auto first = nlohmann::json::parse(lines.substr(0, lines.find('\n')));
  EXPECT_EQ(first["name"], "event.precision");
  EXPECT_EQ(first["class"], "Disposition");
  EXPECT_EQ(first["tp"], 1);
}

}  // namespace
}  // namespace medctx
