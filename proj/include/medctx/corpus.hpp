#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "medctx/error.hpp"
#include "medctx/labels.hpp"
#include "medctx/utf8.hpp"

namespace medctx {

// Half-open code point range [start, end) into a document's text.
struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool overlaps(const CharSpan& o) const { return start < o.end && o.start < end; }
  bool contains(std::size_t pos) const { return start <= pos && pos < end; }

  friend auto operator<=>(const CharSpan&, const CharSpan&) = default;
};

struct MedicationMention {
  CharSpan span;
  std::u32string surface;
  EventLabel event = EventLabel::NoDisposition;
  std::optional<ContextAttributes> context;  // present iff event == Disposition

  friend bool operator==(const MedicationMention&, const MedicationMention&) = default;
};

struct AnnotatedDocument {
  std::string doc_id;
  std::u32string text;
  std::vector<MedicationMention> mentions;  // sorted by span, non-overlapping

  friend bool operator==(const AnnotatedDocument&, const AnnotatedDocument&) = default;
};

struct Corpus {
  std::vector<AnnotatedDocument> train;
  std::vector<AnnotatedDocument> dev;
  std::vector<AnnotatedDocument> test;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

enum class Split : std::uint8_t { Train, Dev, Test };
inline constexpr std::array<Split, 3> kSplits = {Split::Train, Split::Dev, Split::Test};

inline std::string_view split_name(Split s) {
  constexpr std::array<std::string_view, 3> names = {"train", "dev", "test"};
  return names[static_cast<int>(s)];
}

inline std::optional<Split> parse_split(std::string_view s) {
  for (Split sp : kSplits)
    if (split_name(sp) == s) return sp;
  return std::nullopt;
}

inline std::vector<AnnotatedDocument>& split_docs(Corpus& c, Split s) {
  return s == Split::Train ? c.train : s == Split::Dev ? c.dev : c.test;
}
inline const std::vector<AnnotatedDocument>& split_docs(const Corpus& c, Split s) {
  return s == Split::Train ? c.train : s == Split::Dev ? c.dev : c.test;
}

class MissingPairError : public DataError {
  using DataError::DataError;
};
class UniquenessError : public DataError {
  using DataError::DataError;
};

// Throws on any violated document invariant: span bounds, surface equality,
// overlap, context presence.
inline void validate(const AnnotatedDocument& doc) {
  const CharSpan* prev = nullptr;
  for (const auto& m : doc.mentions) {
    if (m.span.start >= m.span.end || m.span.end > doc.text.size())
      throw RangeError(doc.doc_id + ": mention span [" + std::to_string(m.span.start) + "," +
                       std::to_string(m.span.end) + ") outside text of length " + std::to_string(doc.text.size()));
    if (doc.text.compare(m.span.start, m.span.length(), m.surface) != 0)
      throw IntegrityError(doc.doc_id + ": surface does not match text at [" + std::to_string(m.span.start) + "," +
                           std::to_string(m.span.end) + ")");
    if (m.context.has_value() != (m.event == EventLabel::Disposition))
      throw SchemaError(doc.doc_id + ": context must be present exactly for Disposition mentions");
    if (prev && (m.span < *prev || prev->overlaps(m.span)))
      throw ConflictError(doc.doc_id + ": mentions overlap or are unsorted at offset " +
                          std::to_string(m.span.start));
    prev = &m.span;
  }
}

namespace detail {

inline std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t begin = 0;
  while (true) {
    auto pos = s.find(sep, begin);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(begin));
      return out;
    }
    out.push_back(s.substr(begin, pos - begin));
    begin = pos + 1;
  }
}

inline std::optional<std::size_t> parse_count(std::string_view s) {
  std::size_t v = 0;
  if (s.empty()) return std::nullopt;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

// "T12" -> 12 for the given prefix letter.
inline std::optional<std::size_t> parse_ref(std::string_view s, char prefix) {
  if (s.size() < 2 || s.front() != prefix) return std::nullopt;
  return parse_count(s.substr(1));
}

inline bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

}  // namespace detail

// Parses a standoff annotation against its text.
//
// Grammar, one record per line with TAB between fields:
//   T<n>\tDrug <start> <end>\t<surface>
//   E<n>\t<EventLabel>:T<m>
//   A<n>\t<Dimension> E<m> <Value>
// Records may reference ids defined on later lines. Blank lines are skipped.
inline AnnotatedDocument parse_standoff(std::string_view text_utf8, std::string_view ann, std::string doc_id = {}) {
  AnnotatedDocument doc;
  doc.doc_id = std::move(doc_id);
  doc.text = utf8::decode(utf8::normalize_newlines(text_utf8));

  struct TRec {
    std::size_t line;
    CharSpan span;
    std::u32string surface;
  };
  struct ERec {
    std::size_t line;
    EventLabel event;
    std::size_t target;
  };
  struct ARec {
    std::size_t line;
    Dimension dim;
    std::size_t target;
    int value;
  };
  std::map<std::size_t, TRec> ts;
  std::map<std::size_t, ERec> es;
  std::vector<ARec> as;

  const std::string normalized = utf8::normalize_newlines(ann);
  auto lines = detail::split_on(normalized, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    std::string_view line = lines[i];
    if (detail::blank(line)) continue;
    auto fields = detail::split_on(line, '\t');
    if (fields.empty() || fields[0].empty()) throw ParseError(lineno, "missing record id");
    const char kind = fields[0].front();
    auto id = detail::parse_count(fields[0].substr(1));
    if (!id) throw ParseError(lineno, "bad record id '" + std::string(fields[0]) + "'");

    if (kind == 'T') {
      if (fields.size() != 3) throw ParseError(lineno, "T record needs 3 tab-separated fields");
      auto parts = detail::split_on(fields[1], ' ');
      if (parts.size() != 3 || parts[0] != "Drug")
        throw ParseError(lineno, "expected 'Drug <start> <end>', got '" + std::string(fields[1]) + "'");
      auto s = detail::parse_count(parts[1]);
      auto e = detail::parse_count(parts[2]);
      if (!s || !e) throw ParseError(lineno, "offsets must be non-negative integers");
      if (*s >= *e || *e > doc.text.size())
        throw RangeError("line " + std::to_string(lineno) + ": span [" + std::to_string(*s) + "," +
                         std::to_string(*e) + ") outside text of length " + std::to_string(doc.text.size()));
      auto surface = utf8::decode(fields[2]);
      if (doc.text.compare(*s, *e - *s, surface) != 0)
        throw IntegrityError("line " + std::to_string(lineno) + ": surface '" + std::string(fields[2]) +
                             "' does not match the text slice");
      if (!ts.emplace(*id, TRec{lineno, CharSpan{*s, *e}, std::move(surface)}).second)
        throw ParseError(lineno, "duplicate id T" + std::to_string(*id));
    } else if (kind == 'E') {
      if (fields.size() != 2) throw ParseError(lineno, "E record needs 2 tab-separated fields");
      auto colon = fields[1].find(':');
      if (colon == std::string_view::npos) throw ParseError(lineno, "expected '<EventLabel>:T<m>'");
      auto label = parse_event(fields[1].substr(0, colon));
      auto target = detail::parse_ref(fields[1].substr(colon + 1), 'T');
      if (!label) throw ParseError(lineno, "unknown event label '" + std::string(fields[1].substr(0, colon)) + "'");
      if (!target) throw ParseError(lineno, "bad T reference");
      if (!es.emplace(*id, ERec{lineno, *label, *target}).second)
        throw ParseError(lineno, "duplicate id E" + std::to_string(*id));
    } else if (kind == 'A') {
      if (fields.size() != 2) throw ParseError(lineno, "A record needs 2 tab-separated fields");
      auto parts = detail::split_on(fields[1], ' ');
      if (parts.size() != 3) throw ParseError(lineno, "expected '<Dimension> E<m> <Value>'");
      auto dim = parse_dimension(parts[0]);
      if (!dim) throw ParseError(lineno, "unknown dimension '" + std::string(parts[0]) + "'");
      auto target = detail::parse_ref(parts[1], 'E');
      if (!target) throw ParseError(lineno, "bad E reference");
      auto value = parse_dimension_value(*dim, parts[2]);
      if (!value) throw ParseError(lineno, "unknown " + std::string(parts[0]) + " value '" + std::string(parts[2]) + "'");
      as.push_back(ARec{lineno, *dim, *target, *value});
    } else {
      throw ParseError(lineno, std::string("unknown record type '") + kind + "'");
    }
  }

  // Resolve references.
  std::map<std::size_t, std::optional<EventLabel>> event_of_t;
  for (const auto& [tid, t] : ts) event_of_t[tid] = std::nullopt;
  for (const auto& [eid, e] : es) {
    auto it = event_of_t.find(e.target);
    if (it == event_of_t.end()) throw SchemaError("line " + std::to_string(e.line) + ": E" + std::to_string(eid) +
                                                  " references missing T" + std::to_string(e.target));
    if (it->second) throw SchemaError("line " + std::to_string(e.line) + ": T" + std::to_string(e.target) +
                                      " already has an event");
    it->second = e.event;
  }
  std::map<std::size_t, ContextAttributes> ctx_of_t;
  std::map<std::size_t, std::set<Dimension>> seen_dims;
  for (const auto& a : as) {
    auto eit = es.find(a.target);
    if (eit == es.end())
      throw SchemaError("line " + std::to_string(a.line) + ": references missing E" + std::to_string(a.target));
    if (eit->second.event != EventLabel::Disposition)
      throw SchemaError("line " + std::to_string(a.line) + ": attribute on non-Disposition event E" +
                        std::to_string(a.target));
    const std::size_t tid = eit->second.target;
    if (!seen_dims[tid].insert(a.dim).second)
      throw SchemaError("line " + std::to_string(a.line) + ": duplicate " + std::string(dimension_name(a.dim)) +
                        " for E" + std::to_string(a.target));
    ctx_of_t.try_emplace(tid, ContextAttributes::unknown()).first->second.set(a.dim, a.value);
  }

  for (auto& [tid, t] : ts) {
    auto ev = event_of_t[tid];
    if (!ev) throw SchemaError("line " + std::to_string(t.line) + ": T" + std::to_string(tid) + " has no event");
    MedicationMention m;
    m.span = t.span;
    m.surface = std::move(t.surface);
    m.event = *ev;
    if (*ev == EventLabel::Disposition) {
      auto it = ctx_of_t.find(tid);
      m.context = it == ctx_of_t.end() ? ContextAttributes::unknown() : it->second;
    }
    doc.mentions.push_back(std::move(m));
  }
  std::sort(doc.mentions.begin(), doc.mentions.end(),
            [](const MedicationMention& a, const MedicationMention& b) { return a.span < b.span; });
  for (std::size_t i = 1; i < doc.mentions.size(); ++i) {
    if (doc.mentions[i - 1].span.overlaps(doc.mentions[i].span))
      throw ConflictError(doc.doc_id + ": overlapping mentions at offsets " +
                          std::to_string(doc.mentions[i - 1].span.start) + " and " +
                          std::to_string(doc.mentions[i].span.start));
  }
  return doc;
}

// Serializes mentions in span order. Attributes equal to Unknown are omitted;
// Negation is always written since it has no Unknown category.
inline std::string write_standoff(const AnnotatedDocument& doc) {
  validate(doc);
  std::ostringstream t_lines, e_lines, a_lines;
  std::size_t a_id = 1;
  for (std::size_t i = 0; i < doc.mentions.size(); ++i) {
    const auto& m = doc.mentions[i];
    const std::size_t n = i + 1;
    for (char32_t c : m.surface)
      if (c == U'\n' || c == U'\t') throw SchemaError(doc.doc_id + ": mention surface contains a tab or newline");
    t_lines << 'T' << n << "\tDrug " << m.span.start << ' ' << m.span.end << '\t' << utf8::encode(m.surface) << '\n';
    e_lines << 'E' << n << '\t' << to_string(m.event) << ":T" << n << '\n';
    if (!m.context) continue;
    for (Dimension d : kDimensions) {
      const int v = m.context->get(d);
      if (unknown_index(d) == v) continue;
      a_lines << 'A' << a_id++ << '\t' << dimension_name(d) << " E" << n << ' ' << value_name(d, v) << '\n';
    }
  }
  return t_lines.str() + e_lines.str() + a_lines.str();
}

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, std::string_view content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

}  // namespace detail

// Reads root/{train,dev,test}/ with .txt/.ann pairs matched by basename.
inline Corpus load_corpus(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  Corpus corpus;
  std::set<std::string> ids;
  for (Split split : kSplits) {
    const fs::path dir = root / split_name(split);
    if (!fs::is_directory(dir)) throw DataError("missing split directory " + dir.string());
    std::set<std::string> txt, ann;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      const auto ext = entry.path().extension();
      if (ext == ".txt") txt.insert(entry.path().stem().string());
      if (ext == ".ann") ann.insert(entry.path().stem().string());
    }
    for (const auto& a : ann)
      if (!txt.count(a)) throw MissingPairError("annotation without text: " + (dir / (a + ".ann")).string());
    auto& docs = split_docs(corpus, split);
    for (const auto& stem : txt) {
      if (!ann.count(stem)) throw MissingPairError("text without annotation: " + (dir / (stem + ".txt")).string());
      if (!ids.insert(stem).second) throw UniquenessError("duplicate doc_id '" + stem + "'");
      const auto text = detail::read_file(dir / (stem + ".txt"));
      const auto annotation = detail::read_file(dir / (stem + ".ann"));
      try {
        docs.push_back(parse_standoff(text, annotation, stem));
      } catch (const ParseError& e) {
        throw ParseError(e.line(), stem + ".ann: " + e.what());
      }
    }
  }
  return corpus;
}

inline void write_corpus(const std::filesystem::path& root, const Corpus& corpus) {
  namespace fs = std::filesystem;
  std::set<std::string> ids;
  for (Split split : kSplits) {
    const fs::path dir = root / split_name(split);
    fs::create_directories(dir);
    for (const auto& doc : split_docs(corpus, split)) {
      if (!ids.insert(doc.doc_id).second) throw UniquenessError("duplicate doc_id '" + doc.doc_id + "'");
      detail::write_file(dir / (doc.doc_id + ".txt"), utf8::encode(doc.text));
      detail::write_file(dir / (doc.doc_id + ".ann"), write_standoff(doc));
    }
  }
}

// Label counts for one split. dims[d][v] counts Disposition mentions whose
// dimension d has value v.
struct SplitStats {
  std::size_t documents = 0;
  std::size_t mentions = 0;
  std::array<std::size_t, 3> events{};
  std::array<std::vector<std::size_t>, 5> dims;

  SplitStats() {
    for (Dimension d : kDimensions) dims[static_cast<int>(d)].assign(dimension_values(d).size(), 0);
  }

  std::size_t event(EventLabel e) const { return events[static_cast<int>(e)]; }
  std::size_t dim(Dimension d, int v) const { return dims[static_cast<int>(d)][static_cast<std::size_t>(v)]; }

  void add(const MedicationMention& m) {
    ++mentions;
    ++events[static_cast<int>(m.event)];
    if (m.context)
      for (Dimension d : kDimensions) ++dims[static_cast<int>(d)][static_cast<std::size_t>(m.context->get(d))];
  }

  friend bool operator==(const SplitStats&, const SplitStats&) = default;
};

struct CorpusStats {
  std::array<SplitStats, 3> splits;
  const SplitStats& operator[](Split s) const { return splits[static_cast<int>(s)]; }
  SplitStats& operator[](Split s) { return splits[static_cast<int>(s)]; }
  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

inline SplitStats split_stats(const std::vector<AnnotatedDocument>& docs) {
  SplitStats s;
  s.documents = docs.size();
  for (const auto& doc : docs)
    for (const auto& m : doc.mentions) s.add(m);
  return s;
}

inline CorpusStats corpus_stats(const Corpus& c) {
  CorpusStats stats;
  for (Split s : kSplits) stats[s] = split_stats(split_docs(c, s));
  return stats;
}

// One row per category, one count/percentage column per split.
inline std::string format_stats(const CorpusStats& stats) {
  std::ostringstream out;
  auto cell = [](std::size_t n, std::size_t total) {
    std::ostringstream c;
    c << n << " (";
    c.setf(std::ios::fixed);
    c.precision(1);
    c << (total ? 100.0 * static_cast<double>(n) / static_cast<double>(total) : 0.0) << "%)";
    return c.str();
  };
  auto row = [&](std::string_view task, std::string_view cat, auto count_of, auto total_of) {
    out << std::left;
    out.width(24);
    out << task;
    out.width(16);
    out << cat;
    for (Split s : kSplits) {
      out.width(18);
      out << cell(count_of(stats[s]), total_of(stats[s]));
    }
    out << '\n';
  };
  out << std::left;
  out.width(24);
  out << "Task";
  out.width(16);
  out << "Category";
  for (Split s : kSplits) {
    out.width(18);
    out << split_name(s);
  }
  out << '\n';
  auto mentions = [](const SplitStats& s) { return s.mentions; };
  auto dispositions = [](const SplitStats& s) { return s.event(EventLabel::Disposition); };
  for (std::size_t e = 0; e < 3; ++e)
    row(e == 0 ? "Event" : "", event_names()[e], [e](const SplitStats& s) { return s.events[e]; }, mentions);
  for (Dimension d : kDimensions) {
    auto values = dimension_values(d);
    for (std::size_t v = 0; v < values.size(); ++v)
      row(v == 0 ? dimension_name(d) : "", values[v],
          [d, v](const SplitStats& s) { return s.dim(d, static_cast<int>(v)); }, dispositions);
  }
  row("Medication extraction", "Medication", mentions, mentions);
  return out.str();
}

}  // namespace medctx
