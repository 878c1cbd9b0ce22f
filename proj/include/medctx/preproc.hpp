#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "medctx/corpus.hpp"
#include "medctx/error.hpp"
#include "medctx/vocab.hpp"

namespace medctx {

struct Token {
  std::u32string text;
  CharSpan span;
  friend bool operator==(const Token&, const Token&) = default;
};

struct Sentence {
  CharSpan span;
  std::vector<Token> tokens;
  friend bool operator==(const Sentence&, const Sentence&) = default;
};

enum class BioTag : std::uint8_t { B, I, O };
inline constexpr int kNumBioTags = 3;

inline char to_char(BioTag t) { return "BIO"[static_cast<int>(t)]; }

inline bool is_space(char32_t c) {
  switch (c) {
    case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

// Letters and digits. Outside ASCII every code point counts except whitespace,
// Latin-1 punctuation/symbols and the General Punctuation block.
inline bool is_word_char(char32_t c) {
  if (c < 0x80) return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || (c >= U'0' && c <= U'9');
  if (is_space(c)) return false;
  if (c >= 0xA1 && c <= 0xBF) return false;
  if (c == 0xD7 || c == 0xF7) return false;
  if (c >= 0x2010 && c <= 0x205E) return false;
  return true;
}

// Maximal letter/digit runs are tokens; every other non-space character is a
// token by itself.
inline std::vector<Token> tokenize(std::u32string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    if (is_word_char(text[i]))
      while (j < text.size() && is_word_char(text[j])) ++j;
    tokens.push_back(Token{std::u32string(text.substr(i, j - i)), CharSpan{i, j}});
    i = j;
  }
  return tokens;
}

// Boundaries fall after ".", "!" or "?" tokens and at blank lines (a
// whitespace gap holding two or more newlines).
inline std::vector<Sentence> split_sentences(std::u32string_view text, std::span<const Token> tokens) {
  std::vector<Sentence> sentences;
  Sentence current;
  auto flush = [&] {
    if (current.tokens.empty()) return;
    current.span = CharSpan{current.tokens.front().span.start, current.tokens.back().span.end};
    sentences.push_back(std::move(current));
    current = Sentence{};
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) {
      const auto gap = text.substr(tokens[i - 1].span.end, tokens[i].span.start - tokens[i - 1].span.end);
      if (std::count(gap.begin(), gap.end(), U'\n') >= 2) flush();
    }
    current.tokens.push_back(tokens[i]);
    const auto& t = tokens[i].text;
    if (t == U"." || t == U"!" || t == U"?") flush();
  }
  flush();
  return sentences;
}

inline std::vector<Sentence> segment(std::u32string_view text) {
  const auto tokens = tokenize(text);
  return split_sentences(text, tokens);
}

// Builds the shared subword vocabulary from raw texts.
inline Vocabulary build_vocab(std::span<const std::u32string> texts, std::size_t target_size = 4096) {
  std::map<std::u32string, std::size_t> counts;
  for (const auto& text : texts)
    for (auto& tok : tokenize(text)) ++counts[std::move(tok.text)];
  return build_vocab_from_words(counts, target_size);
}

inline Vocabulary build_vocab(std::span<const AnnotatedDocument> docs, std::size_t target_size = 4096) {
  std::vector<std::u32string> texts;
  texts.reserve(docs.size());
  for (const auto& d : docs) texts.push_back(d.text);
  return build_vocab(texts, target_size);
}

// Word-level BIO tags. A token belongs to a mention when it overlaps it by at
// least one character; spans outside the sentence are ignored.
inline std::vector<BioTag> spans_to_bio(const Sentence& sent, std::span<const CharSpan> mentions) {
  std::vector<CharSpan> sorted(mentions.begin(), mentions.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i - 1].overlaps(sorted[i]))
      throw ConflictError("overlapping mentions at offsets " + std::to_string(sorted[i - 1].start) + " and " +
                          std::to_string(sorted[i].start));

  std::vector<BioTag> tags(sent.tokens.size(), BioTag::O);
  std::vector<int> owner(sent.tokens.size(), -1);
  for (std::size_t m = 0; m < sorted.size(); ++m) {
    bool first = true;
    for (std::size_t t = 0; t < sent.tokens.size(); ++t) {
      if (!sent.tokens[t].span.overlaps(sorted[m])) continue;
      if (owner[t] >= 0)
        throw ConflictError("token at offset " + std::to_string(sent.tokens[t].span.start) +
                            " overlaps two mentions");
      owner[t] = static_cast<int>(m);
      tags[t] = first ? BioTag::B : BioTag::I;
      first = false;
    }
  }
  return tags;
}

// Word-level decode: B opens a span, I extends it, an I with no open span is
// treated as B.
inline std::vector<CharSpan> decode_word_tags(const Sentence& sent, std::span<const BioTag> word_tags) {
  std::vector<CharSpan> spans;
  bool open = false;
  for (std::size_t w = 0; w < word_tags.size() && w < sent.tokens.size(); ++w) {
    const auto& span = sent.tokens[w].span;
    switch (word_tags[w]) {
      case BioTag::B:
        spans.push_back(span);
        open = true;
        break;
      case BioTag::I:
        if (open)
          spans.back().end = span.end;
        else
          spans.push_back(span);
        open = true;
        break;
      case BioTag::O:
        open = false;
        break;
    }
  }
  return spans;
}

// Subtoken sequence for one sentence: [CLS] pieces... [SEP] [PAD]...
// word_index is -1 on specials and padding.
struct LabeledSequence {
  std::vector<int> ids;
  std::vector<std::uint8_t> mask;
  std::vector<int> word_index;
  std::vector<BioTag> tags;  // token mode
  int label = -1;            // sequence mode
  std::size_t start_marker = 0;
  std::size_t end_marker = 0;
  std::size_t words_kept = 0;
  std::string doc_id;
  CharSpan sentence_span;

  std::size_t size() const { return ids.size(); }

  // Prefix up to and including the last unmasked position.
  std::size_t active_length() const {
    std::size_t n = mask.size();
    while (n > 0 && mask[n - 1] == 0) --n;
    return n;
  }

  std::string origin() const {
    return doc_id + "[" + std::to_string(sentence_span.start) + "," + std::to_string(sentence_span.end) + ")";
  }
};

inline constexpr std::size_t kDefaultMaxLen = 256;

// Projects word tags onto subword pieces. A B word yields B then I on its
// remaining pieces; I words yield I throughout. When the sentence does not fit,
// trailing words are dropped, backing off further so no mention is cut.
inline LabeledSequence align_to_subtokens(const Sentence& sent, std::span<const BioTag> word_tags,
                                          const Vocabulary& v, std::size_t max_len = kDefaultMaxLen) {
  if (word_tags.size() != sent.tokens.size())
    throw InputError("word tag count " + std::to_string(word_tags.size()) + " != token count " +
                     std::to_string(sent.tokens.size()));
  if (max_len < 2) throw LengthError("max_len must leave room for [CLS] and [SEP]");

  std::vector<std::vector<int>> pieces;
  pieces.reserve(sent.tokens.size());
  for (const auto& tok : sent.tokens) pieces.push_back(subword_encode(tok.text, v));

  const std::size_t budget = max_len - 2;
  std::size_t kept = 0, used = 0;
  while (kept < pieces.size() && used + pieces[kept].size() <= budget) used += pieces[kept++].size();
  while (kept > 0 && kept < pieces.size() && word_tags[kept] == BioTag::I) --kept;

  LabeledSequence seq;
  seq.sentence_span = sent.span;
  seq.words_kept = kept;
  seq.ids.reserve(max_len);
  auto push = [&](int id, std::uint8_t m, int w, BioTag t) {
    seq.ids.push_back(id);
    seq.mask.push_back(m);
    seq.word_index.push_back(w);
    seq.tags.push_back(t);
  };
  push(Vocabulary::kCls, 1, -1, BioTag::O);
  for (std::size_t w = 0; w < kept; ++w) {
    for (std::size_t p = 0; p < pieces[w].size(); ++p) {
      BioTag t = word_tags[w];
      if (t == BioTag::B && p > 0) t = BioTag::I;
      push(pieces[w][p], 1, static_cast<int>(w), t);
    }
  }
  push(Vocabulary::kSep, 1, -1, BioTag::O);
  while (seq.ids.size() < max_len) push(Vocabulary::kPad, 0, -1, BioTag::O);
  return seq;
}

// Word tag = prediction on the word's first piece; words lost to truncation are O.
inline std::vector<BioTag> project_to_words(const LabeledSequence& seq, std::span<const BioTag> predicted,
                                            std::size_t n_words) {
  if (predicted.size() != seq.size())
    throw InputError("predicted tag count " + std::to_string(predicted.size()) + " != sequence length " +
                     std::to_string(seq.size()));
  std::vector<BioTag> words(n_words, BioTag::O);
  std::vector<bool> seen(n_words, false);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const int w = seq.word_index[i];
    if (w < 0 || static_cast<std::size_t>(w) >= n_words || seen[static_cast<std::size_t>(w)]) continue;
    seen[static_cast<std::size_t>(w)] = true;
    words[static_cast<std::size_t>(w)] = predicted[i];
  }
  return words;
}

inline std::vector<CharSpan> decode_bio(const LabeledSequence& seq, std::span<const BioTag> predicted,
                                        const Sentence& sent) {
  const auto words = project_to_words(seq, predicted, sent.tokens.size());
  return decode_word_tags(sent, words);
}

// Snaps a character span outward to the tokens it overlaps.
inline CharSpan snap_to_tokens(const Sentence& sent, CharSpan span) {
  CharSpan out{0, 0};
  bool any = false;
  for (const auto& t : sent.tokens) {
    if (!t.span.overlaps(span)) continue;
    if (!any) out.start = t.span.start;
    out.end = t.span.end;
    any = true;
  }
  if (!any) throw RangeError("span [" + std::to_string(span.start) + "," + std::to_string(span.end) +
                             ") covers no token of the sentence");
  return out;
}

}  // namespace medctx
