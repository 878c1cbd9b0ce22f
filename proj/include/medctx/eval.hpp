#pragma once

#include <algorithm>
#include <array>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "medctx/corpus.hpp"
#include "medctx/error.hpp"

#include "json.hpp"

namespace medctx {

enum class MatchMode : std::uint8_t { Strict, Lenient };

inline std::string_view mode_name(MatchMode m) { return m == MatchMode::Strict ? "strict" : "lenient"; }

inline std::optional<MatchMode> parse_mode(std::string_view s) {
  if (s == "strict") return MatchMode::Strict;
  if (s == "lenient") return MatchMode::Lenient;
  return std::nullopt;
}

struct MatchResult {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (gold index, pred index)
  std::vector<std::size_t> unmatched_gold;
  std::vector<std::size_t> unmatched_pred;
};

struct Score {
  std::string name;
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;
};

struct Accuracy {
  std::string name;
  std::size_t correct = 0, total = 0;
  double value = 0;
};

struct MetricsReport {
  std::vector<Score> classes;
  std::optional<Score> micro;
  std::optional<Score> macro;  // counts are totals; P/R/F1 are per-document means
  std::vector<Accuracy> dimensions;
  std::optional<Accuracy> overall;
};

// Zero denominators give 0; F1 is 0 when P = R = 0.
inline double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

inline double harmonic(double p, double r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); }

inline Score make_score(std::string name, std::size_t tp, std::size_t fp, std::size_t fn) {
  Score s{std::move(name), tp, fp, fn};
  s.precision = ratio(tp, tp + fp);
  s.recall = ratio(tp, tp + fn);
  s.f1 = harmonic(s.precision, s.recall);
  return s;
}

inline Accuracy make_accuracy(std::string name, std::size_t correct, std::size_t total) {
  return Accuracy{std::move(name), correct, total, ratio(correct, total)};
}

namespace detail {

inline void require_disjoint(std::span<const CharSpan> spans, std::string_view which) {
  std::vector<CharSpan> sorted(spans.begin(), spans.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i - 1].overlaps(sorted[i]))
      throw InputError(std::string(which) + " spans overlap at offsets " + std::to_string(sorted[i - 1].start) +
                       " and " + std::to_string(sorted[i].start));
}

inline std::vector<CharSpan> spans_of(const AnnotatedDocument& d) {
  std::vector<CharSpan> out;
  out.reserve(d.mentions.size());
  for (const auto& m : d.mentions) out.push_back(m.span);
  return out;
}

}  // namespace detail

// Strict pairs identical offsets. Lenient pairs on any shared character,
// taking gold in order and giving each the leftmost free overlapping pred.
inline MatchResult match_spans(std::span<const CharSpan> gold, std::span<const CharSpan> pred, MatchMode mode) {
  detail::require_disjoint(gold, "gold");
  detail::require_disjoint(pred, "predicted");
  MatchResult r;
  std::vector<bool> used(pred.size(), false);
  for (std::size_t g = 0; g < gold.size(); ++g) {
    std::optional<std::size_t> best;
    for (std::size_t p = 0; p < pred.size(); ++p) {
      if (used[p]) continue;
      const bool ok = mode == MatchMode::Strict ? gold[g] == pred[p] : gold[g].overlaps(pred[p]);
      if (ok && (!best || pred[p].start < pred[*best].start)) best = p;
    }
    if (best) {
      used[*best] = true;
      r.pairs.emplace_back(g, *best);
    } else {
      r.unmatched_gold.push_back(g);
    }
  }
  for (std::size_t p = 0; p < pred.size(); ++p)
    if (!used[p]) r.unmatched_pred.push_back(p);
  return r;
}

using SpanPredictions = std::map<std::string, std::vector<CharSpan>>;

namespace detail {

template <typename Map>
void require_known_docs(std::span<const AnnotatedDocument> gold, const Map& predictions) {
  std::set<std::string_view> ids;
  for (const auto& d : gold) ids.insert(d.doc_id);
  for (const auto& [id, _] : predictions)
    if (!ids.count(id)) throw KeyError("prediction for unknown document '" + id + "'");
}

}  // namespace detail

// Micro over pooled counts; macro is the mean of per-document P, R and F1.
inline MetricsReport ner_metrics(std::span<const AnnotatedDocument> gold, const SpanPredictions& predictions,
                                 MatchMode mode) {
  detail::require_known_docs(gold, predictions);
  std::size_t tp = 0, fp = 0, fn = 0;
  double p_sum = 0, r_sum = 0, f_sum = 0;
  for (const auto& doc : gold) {
    const auto g = detail::spans_of(doc);
    auto it = predictions.find(doc.doc_id);
    const std::vector<CharSpan> none;
    const auto& p = it == predictions.end() ? none : it->second;
    const auto m = match_spans(g, p, mode);
    const auto s = make_score(doc.doc_id, m.pairs.size(), m.unmatched_pred.size(), m.unmatched_gold.size());
    tp += s.tp, fp += s.fp, fn += s.fn;
    p_sum += s.precision, r_sum += s.recall, f_sum += s.f1;
  }
  MetricsReport rep;
  rep.micro = make_score("micro", tp, fp, fn);
  Score macro{"macro", tp, fp, fn};
  if (!gold.empty()) {
    const auto n = static_cast<double>(gold.size());
    macro.precision = p_sum / n;
    macro.recall = r_sum / n;
    macro.f1 = f_sum / n;
  }
  rep.macro = macro;
  return rep;
}

using DocumentPredictions = std::map<std::string, AnnotatedDocument>;

inline DocumentPredictions by_doc_id(std::span<const AnnotatedDocument> docs) {
  DocumentPredictions out;
  for (const auto& d : docs) out[d.doc_id] = d;
  return out;
}

// A prediction is a true positive for class c when its span matches a gold
// mention and both carry c. A matched pair with different labels is a false
// positive for the predicted class and a false negative for the gold class.
inline MetricsReport event_metrics(std::span<const AnnotatedDocument> gold, const DocumentPredictions& predictions,
                                   MatchMode mode = MatchMode::Strict) {
  detail::require_known_docs(gold, predictions);
  std::array<std::size_t, 3> tp{}, fp{}, fn{};
  for (const auto& doc : gold) {
    auto it = predictions.find(doc.doc_id);
    const std::vector<MedicationMention> none;
    const auto& pm = it == predictions.end() ? none : it->second.mentions;
    std::vector<CharSpan> ps;
    for (const auto& m : pm) ps.push_back(m.span);
    const auto match = match_spans(detail::spans_of(doc), ps, mode);
    for (auto [g, p] : match.pairs) {
      const auto ge = static_cast<std::size_t>(doc.mentions[g].event), pe = static_cast<std::size_t>(pm[p].event);
      if (ge == pe) {
        ++tp[ge];
      } else {
        ++fp[pe];
        ++fn[ge];
      }
    }
    for (auto g : match.unmatched_gold) ++fn[static_cast<std::size_t>(doc.mentions[g].event)];
    for (auto p : match.unmatched_pred) ++fp[static_cast<std::size_t>(pm[p].event)];
  }
  MetricsReport rep;
  std::size_t T = 0, F = 0, N = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    rep.classes.push_back(make_score(std::string(event_names()[c]), tp[c], fp[c], fn[c]));
    T += tp[c], F += fp[c], N += fn[c];
  }
  rep.micro = make_score("micro", T, F, N);
  return rep;
}

struct MentionKey {
  std::string doc_id;
  CharSpan span;
  friend auto operator<=>(const MentionKey&, const MentionKey&) = default;
};

using ContextPredictions = std::map<MentionKey, ContextAttributes>;

// Per-dimension accuracy over gold Disposition mentions; overall is the micro
// average over every (mention, dimension) decision. A mention with no
// prediction is wrong in all five dimensions.
inline MetricsReport context_metrics(std::span<const AnnotatedDocument> gold, const ContextPredictions& predictions) {
  std::array<std::size_t, 5> correct{};
  std::size_t total = 0;
  for (const auto& doc : gold)
    for (const auto& m : doc.mentions) {
      if (m.event != EventLabel::Disposition) continue;
      ++total;
      auto it = predictions.find(MentionKey{doc.doc_id, m.span});
      if (it == predictions.end()) continue;
      const auto gold_ctx = m.context.value_or(ContextAttributes::unknown());
      for (Dimension d : kDimensions)
        if (it->second.get(d) == gold_ctx.get(d)) ++correct[static_cast<int>(d)];
    }
  MetricsReport rep;
  std::size_t all = 0;
  for (Dimension d : kDimensions) {
    rep.dimensions.push_back(make_accuracy(std::string(dimension_name(d)), correct[static_cast<int>(d)], total));
    all += correct[static_cast<int>(d)];
  }
  rep.overall = make_accuracy("overall", all, total * kDimensions.size());
  return rep;
}

// Micro overall accuracy from per-dimension accuracies with equal denominators.
inline double overall_from_dimensions(std::span<const double> accuracies) {
  if (accuracies.empty()) return 0.0;
  double sum = 0;
  for (double a : accuracies) sum += a;
  return sum / static_cast<double>(accuracies.size());
}

// A gold mention is correct when a prediction has its exact span and event
// and, for Disposition, all five dimensions. Denominator: every gold mention.
inline Accuracy combined_accuracy(std::span<const AnnotatedDocument> gold, const DocumentPredictions& predictions) {
  detail::require_known_docs(gold, predictions);
  std::size_t correct = 0, total = 0;
  for (const auto& doc : gold) {
    auto it = predictions.find(doc.doc_id);
    std::map<CharSpan, const MedicationMention*> pred;
    if (it != predictions.end())
      for (const auto& m : it->second.mentions) pred[m.span] = &m;
    for (const auto& g : doc.mentions) {
      ++total;
      auto p = pred.find(g.span);
      if (p == pred.end() || p->second->event != g.event) continue;
      if (g.event == EventLabel::Disposition &&
          p->second->context.value_or(ContextAttributes::unknown()) != g.context.value_or(ContextAttributes::unknown()))
        continue;
      ++correct;
    }
  }
  return make_accuracy("combined", correct, total);
}

// Aligned text table: one row per class or dimension.
inline std::string format_report(const MetricsReport& rep, std::string_view title) {
  std::ostringstream out;
  out << title << '\n' << std::fixed << std::setprecision(4);
  auto score_row = [&](const Score& s) {
    out << "  " << std::left << std::setw(16) << s.name << std::right << std::setw(10) << s.precision
        << std::setw(10) << s.recall << std::setw(10) << s.f1 << std::setw(8) << s.tp << std::setw(8) << s.fp
        << std::setw(8) << s.fn << '\n';
  };
  if (!rep.classes.empty() || rep.micro || rep.macro) {
    out << "  " << std::left << std::setw(16) << "" << std::right << std::setw(10) << "Precision" << std::setw(10)
        << "Recall" << std::setw(10) << "F1" << std::setw(8) << "TP" << std::setw(8) << "FP" << std::setw(8) << "FN"
        << '\n';
    for (const auto& s : rep.classes) score_row(s);
    if (rep.micro) score_row(*rep.micro);
    if (rep.macro) score_row(*rep.macro);
  }
  auto acc_row = [&](const Accuracy& a) {
    out << "  " << std::left << std::setw(16) << a.name << std::right << std::setw(10) << a.value << std::setw(8)
        << a.correct << std::setw(8) << a.total << '\n';
  };
  if (!rep.dimensions.empty() || rep.overall) {
    out << "  " << std::left << std::setw(16) << "" << std::right << std::setw(10) << "Accuracy" << std::setw(8)
        << "Correct" << std::setw(8) << "Total" << '\n';
    for (const auto& a : rep.dimensions) acc_row(a);
    if (rep.overall) acc_row(*rep.overall);
  }
  return out.str();
}

// One JSON object per metric value: name, class, value, tp, fp, fn
// (accuracies carry correct/total in tp/fn slots as counts of right/wrong).
inline std::string report_jsonl(const MetricsReport& rep, std::string_view name) {
  std::string out;
  auto emit = [&](std::string_view cls, std::string_view metric, double value, std::size_t tp, std::size_t fp,
                  std::size_t fn) {
    nlohmann::ordered_json j;
    j["name"] = std::string(name) + "." + std::string(metric);
    j["class"] = cls;
    j["value"] = value;
    j["tp"] = tp;
    j["fp"] = fp;
    j["fn"] = fn;
    out += j.dump() + "\n";
  };
  auto scores = [&](const Score& s) {
    emit(s.name, "precision", s.precision, s.tp, s.fp, s.fn);
    emit(s.name, "recall", s.recall, s.tp, s.fp, s.fn);
    emit(s.name, "f1", s.f1, s.tp, s.fp, s.fn);
  };
  for (const auto& s : rep.classes) scores(s);
  if (rep.micro) scores(*rep.micro);
  if (rep.macro) scores(*rep.macro);
  for (const auto& a : rep.dimensions) emit(a.name, "accuracy", a.value, a.correct, 0, a.total - a.correct);
  if (rep.overall) emit(rep.overall->name, "accuracy", rep.overall->value, rep.overall->correct, 0,
                        rep.overall->total - rep.overall->correct);
  return out;
}

}  // namespace medctx
