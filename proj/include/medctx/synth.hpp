#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "medctx/corpus.hpp"
#include "medctx/preproc.hpp"
#include "medctx/utf8.hpp"

namespace medctx {

enum class Difficulty : std::uint8_t { Separable, Noisy };

// Phrase alternatives per class, indexed like the class inventories.
using CueTable = std::vector<std::vector<std::string>>;

struct CueTables {
  CueTable event;  // sentence frames with {drug} and {dose} slots
  std::array<CueTable, 5> dims;

  const CueTable& dim(Dimension d) const { return dims[static_cast<int>(d)]; }
  CueTable& dim(Dimension d) { return dims[static_cast<int>(d)]; }
};

// Disposition sentences read "<temporality>, <actor> <certainty> <negation> <action> DRUG DOSE."
// NotNegated is the absence of the negation cue.
inline CueTables default_cues() {
  CueTables c;
  c.event = {
      {},  // Disposition frames are assembled from the dimension cues
      {"Continues {drug} {dose}.", "Currently taking {drug} {dose}.",
       "Home medications include {drug} and {drug}.", "Remains on {drug} {dose}.", "Tolerating {drug} well."},
      {"Discussed {drug} at length.", "Questions about {drug} were reviewed.",
       "Reviewed options including {drug}.", "Mentioned {drug} in passing."},
  };
  c.dim(Dimension::Action) = {{"start", "begin"},
                              {"stop", "discontinue"},
                              {"increase", "raise"},
                              {"decrease", "lower"},
                              {"give one dose of", "administer a single dose of"},
                              {"switch the formulation of"},
                              {"adjust", "modify"}};
  c.dim(Dimension::Negation) = {{"not"}, {""}};
  c.dim(Dimension::Temporality) = {{"Previously", "Last visit"},
                                   {"Today", "At this visit"},
                                   {"At the next visit", "Next month"},
                                   {"At some point", "Sometime"}};
  c.dim(Dimension::Certainty) = {{"decided to", "chose to"},
                                 {"may", "might"},
                                 {"will if needed", "would if symptoms recur"},
                                 {"perhaps wants to"}};
  c.dim(Dimension::Actor) = {{"the provider", "Dr Lane"}, {"the patient", "pt"}, {"someone"}};
  return c;
}

// Train-split proportions from the reference corpus summary.
inline std::vector<double> normalized(std::initializer_list<double> counts) {
  double total = 0;
  for (double c : counts) total += c;
  std::vector<double> out;
  for (double c : counts) out.push_back(c / total);
  return out;
}

struct GeneratorSpec {
  std::uint64_t seed = 7;
  std::array<std::size_t, 3> n_docs = {350, 50, 100};
  std::size_t lexicon_size = 80;
  std::size_t min_sentences = 8;
  std::size_t max_sentences = 14;
  Difficulty difficulty = Difficulty::Separable;
  double noise_rate = 0.2;  // noisy mode: chance a cue is drawn from a different class
  std::vector<double> event_dist = normalized({1412, 5260, 557});
  std::array<std::vector<double>, 5> dim_dist = {
      normalized({568, 340, 129, 54, 285, 1, 35}), normalized({32, 1380}), normalized({744, 494, 145, 29}),
      normalized({1176, 134, 100, 2}), normalized({1278, 106, 28})};
  CueTables cues = default_cues();

  void validate() const;
};

struct LedgerEntry {
  Split split = Split::Train;
  std::string doc_id;
  CharSpan span;
  std::u32string surface;
  EventLabel event = EventLabel::NoDisposition;
  std::optional<ContextAttributes> context;
};

struct SynthResult {
  Corpus corpus;
  std::vector<LedgerEntry> ledger;
  std::vector<std::string> lexicon;
};

namespace detail {

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

inline std::size_t sample(std::mt19937_64& rng, const std::vector<double>& dist) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  double acc = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    acc += dist[i];
    if (u < acc) return i;
  }
  return dist.size() - 1;
}

inline std::set<std::string> lowercase_words(const CueTables& cues) {
  std::set<std::string> words;
  auto add = [&](const std::string& phrase) {
    for (const auto& tok : tokenize(utf8::decode(phrase))) {
      std::string w = utf8::encode(tok.text);
      for (auto& ch : w) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      words.insert(w);
    }
  };
  for (const auto& cls : cues.event)
    for (const auto& p : cls) add(p);
  for (const auto& table : cues.dims)
    for (const auto& cls : table)
      for (const auto& p : cls) add(p);
  return words;
}

}  // namespace detail

inline void GeneratorSpec::validate() const {
  auto check = [](const std::vector<double>& dist, std::size_t classes, std::string_view what) {
    if (dist.size() != classes) throw ConfigError(std::string(what) + " distribution has wrong class count");
    double total = 0;
    for (double p : dist) {
      if (!(p >= 0)) throw ConfigError(std::string(what) + " distribution has a negative entry");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError(std::string(what) + " distribution does not sum to 1");
  };
  check(event_dist, 3, "event");
  for (Dimension d : kDimensions)
    check(dim_dist[static_cast<int>(d)], dimension_values(d).size(), dimension_name(d));
  if (lexicon_size == 0) throw ConfigError("lexicon must not be empty");
  if (min_sentences == 0 || min_sentences > max_sentences) throw ConfigError("bad sentence count range");
  if (!(noise_rate >= 0 && noise_rate <= 1)) throw ConfigError("noise_rate must lie in [0, 1]");
  if (cues.event.size() != 3) throw ConfigError("event cue table needs 3 classes");
  for (std::size_t e = 1; e < 3; ++e)
    if (cues.event[e].empty()) throw ConfigError("event cue class without frames");
  for (Dimension d : kDimensions) {
    const auto& t = cues.dim(d);
    if (t.size() != dimension_values(d).size()) throw ConfigError("cue table class count mismatch");
    for (const auto& cls : t)
      if (cls.empty()) throw ConfigError("cue class without phrases");
  }
  for (const auto& table : cues.dims)
    for (const auto& cls : table)
      for (const auto& p : cls)
        if (p.find_first_of(".!?{}") != std::string::npos)
          throw ConfigError("cue phrase must not end a sentence or hold a slot: " + p);
}

// Fictional drug names from syllables; a few carry a release suffix.
inline std::vector<std::string> make_lexicon(std::size_t size, std::uint64_t seed, const CueTables& cues) {
  static constexpr std::array<std::string_view, 16> kOnset = {"zor", "vel", "tra", "mi", "quen", "bal",
                                                              "cer", "dox", "fen", "lum", "nex", "pra",
                                                              "sil", "tor", "var", "kel"};
  static constexpr std::array<std::string_view, 12> kMiddle = {"a", "o", "i", "eta", "ova", "ur",
                                                               "ami", "eli", "ox", "ul", "ep", "in"};
  static constexpr std::array<std::string_view, 10> kSuffix = {"pril", "statin", "zole", "mab", "dine",
                                                               "cillin", "tide", "lol", "parin", "vir"};
  static constexpr std::array<std::string_view, 3> kRelease = {"XR", "ER", "SR"};
  const auto reserved = detail::lowercase_words(cues);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::set<std::string> seen;
  std::vector<std::string> lexicon;
  while (lexicon.size() < size) {
    std::string name(kOnset[detail::pick(rng, kOnset.size())]);
    name += kMiddle[detail::pick(rng, kMiddle.size())];
    name += kSuffix[detail::pick(rng, kSuffix.size())];
    name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    std::string lower = name;
    lower[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(lower[0])));
    if (reserved.count(lower) || !seen.insert(name).second) continue;
    if (rng() % 7 == 0) name += " " + std::string(kRelease[detail::pick(rng, kRelease.size())]);
    lexicon.push_back(name);
  }
  return lexicon;
}

class NoteBuilder {
 public:
  NoteBuilder(std::string doc_id, Split split) : split_(split) { doc_.doc_id = std::move(doc_id); }

  void text(std::string_view s) { doc_.text += utf8::decode(s); }

  void mention(std::string_view drug, EventLabel event, std::optional<ContextAttributes> context) {
    const std::size_t start = doc_.text.size();
    text(drug);
    MedicationMention m;
    m.span = CharSpan{start, doc_.text.size()};
    m.surface = doc_.text.substr(start);
    m.event = event;
    m.context = context;
    doc_.mentions.push_back(m);
    ledger_.push_back(LedgerEntry{split_, doc_.doc_id, m.span, m.surface, event, context});
  }

  // Drugs fill {drug} slots in order, doses fill {dose} slots.
  void frame(std::string_view f, std::span<const std::string> drugs, std::span<const std::string> doses,
             EventLabel event) {
    std::size_t d = 0, g = 0, pos = 0;
    while (pos < f.size()) {
      const auto hole = f.find('{', pos);
      if (hole == std::string_view::npos) {
        text(f.substr(pos));
        break;
      }
      text(f.substr(pos, hole - pos));
      if (f.substr(hole, 6) == "{drug}") {
        mention(drugs[d++ % drugs.size()], event, std::nullopt);
        pos = hole + 6;
      } else if (f.substr(hole, 6) == "{dose}") {
        text(doses[g++ % doses.size()]);
        pos = hole + 6;
      } else {
        throw ConfigError("unknown slot in frame: " + std::string(f));
      }
    }
  }

  AnnotatedDocument doc_;
  std::vector<LedgerEntry> ledger_;

 private:
  Split split_;
};

inline std::string dose_phrase(std::mt19937_64& rng) {
  static constexpr std::array<int, 8> kAmount = {5, 10, 20, 25, 40, 50, 100, 250};
  static constexpr std::array<std::string_view, 4> kFreq = {"daily", "twice daily", "at bedtime", "weekly"};
  return std::to_string(kAmount[detail::pick(rng, kAmount.size())]) + " mg " +
         std::string(kFreq[detail::pick(rng, kFreq.size())]);
}

inline SynthResult gen_corpus(const GeneratorSpec& spec) {
  spec.validate();
  SynthResult out;
  out.lexicon = make_lexicon(spec.lexicon_size, spec.seed, spec.cues);
  std::mt19937_64 rng(spec.seed);

  static constexpr std::array<std::string_view, 8> kFiller = {
      "Vitals are stable.", "Blood pressure is 128/82.", "No acute distress.",
      "Follow up in 3 weeks.", "Labs were unremarkable.", "Sleeping well overall.",
      "Denies chest pain or dyspnea.", "Weight unchanged from prior."};
  static constexpr std::array<std::string_view, 4> kHeading = {"HISTORY", "ASSESSMENT", "PLAN", "MEDICATIONS"};

  // Sentence-level event weights: NoDisposition frames average more than one
  // mention, so their weight is scaled down to keep mention proportions on target.
  auto mentions_per_frame = [&](std::size_t e) {
    double total = 0;
    for (const auto& f : spec.cues.event[e])
      for (std::size_t p = f.find("{drug}"); p != std::string::npos; p = f.find("{drug}", p + 1)) total += 1;
    return total / static_cast<double>(spec.cues.event[e].size());
  };
  std::vector<double> sentence_dist(3);
  double norm = 0;
  for (std::size_t e = 0; e < 3; ++e) {
    sentence_dist[e] = spec.event_dist[e] / (e == 0 ? 1.0 : mentions_per_frame(e));
    norm += sentence_dist[e];
  }
  for (auto& p : sentence_dist) p /= norm;

  const bool noisy = spec.difficulty == Difficulty::Noisy;
  auto cue = [&](const CueTable& table, std::size_t cls) -> const std::string& {
    std::size_t c = cls;
    if (noisy && table.size() > 1 && static_cast<double>(rng() >> 11) * 0x1.0p-53 < spec.noise_rate)
      c = (cls + 1 + detail::pick(rng, table.size() - 1)) % table.size();
    const auto& alts = table[c];
    return alts[detail::pick(rng, alts.size())];
  };
  auto drug = [&] { return out.lexicon[detail::pick(rng, out.lexicon.size())]; };

  for (Split split : kSplits) {
    const std::size_t n = spec.n_docs[static_cast<int>(split)];
    for (std::size_t i = 0; i < n; ++i) {
      std::string id = "synth-" + std::string(split_name(split)) + "-";
      const std::string num = std::to_string(i);
      id += std::string(num.size() < 4 ? 4 - num.size() : 0, '0') + num;
      NoteBuilder note(id, split);
      const std::size_t sentences =
          spec.min_sentences + detail::pick(rng, spec.max_sentences - spec.min_sentences + 1);
      for (std::size_t s = 0; s < sentences; ++s) {
        if (s > 0) note.text(rng() % 5 == 0 ? "\n\n" : " ");
        if (rng() % 6 == 0) {
          note.text(kHeading[detail::pick(rng, kHeading.size())]);
          note.text("\n\n");
        }
        if (rng() % 4 == 0) {
          note.text(kFiller[detail::pick(rng, kFiller.size())]);
          continue;
        }
        const auto event = static_cast<EventLabel>(detail::sample(rng, sentence_dist));
        if (event != EventLabel::Disposition) {
          const auto& frames = spec.cues.event[static_cast<int>(event)];
          const auto& f = frames[detail::pick(rng, frames.size())];
          std::vector<std::string> drugs = {drug(), drug()};
          while (drugs[1] == drugs[0]) drugs[1] = drug();
          std::vector<std::string> doses = {dose_phrase(rng)};
          note.frame(f, drugs, doses, event);
          continue;
        }
        ContextAttributes ctx;
        for (Dimension d : kDimensions) ctx.set(d, static_cast<int>(detail::sample(rng, spec.dim_dist[static_cast<int>(d)])));
        std::string lead = cue(spec.cues.dim(Dimension::Temporality), static_cast<std::size_t>(ctx.get(Dimension::Temporality)));
        lead += ", " + cue(spec.cues.dim(Dimension::Actor), static_cast<std::size_t>(ctx.get(Dimension::Actor)));
        lead += " " + cue(spec.cues.dim(Dimension::Certainty), static_cast<std::size_t>(ctx.get(Dimension::Certainty)));
        const auto& neg = cue(spec.cues.dim(Dimension::Negation), static_cast<std::size_t>(ctx.get(Dimension::Negation)));
        if (!neg.empty()) lead += " " + neg;
        lead += " " + cue(spec.cues.dim(Dimension::Action), static_cast<std::size_t>(ctx.get(Dimension::Action))) + " ";
        note.text(lead);
        note.mention(drug(), EventLabel::Disposition, ctx);
        note.text(" " + dose_phrase(rng) + ".");
      }
      validate(note.doc_);
      split_docs(out.corpus, split).push_back(std::move(note.doc_));
      out.ledger.insert(out.ledger.end(), note.ledger_.begin(), note.ledger_.end());
    }
  }
  return out;
}

// Label counts straight from the emission log.
inline CorpusStats ledger_stats(const std::vector<LedgerEntry>& ledger, const GeneratorSpec& spec) {
  CorpusStats stats;
  for (Split s : kSplits) stats[s].documents = spec.n_docs[static_cast<int>(s)];
  for (const auto& e : ledger) {
    MedicationMention m;
    m.event = e.event;
    m.context = e.context;
    stats[e.split].add(m);
  }
  return stats;
}

inline void write_synth(const std::filesystem::path& root, const SynthResult& r) { write_corpus(root, r.corpus); }

}  // namespace medctx
