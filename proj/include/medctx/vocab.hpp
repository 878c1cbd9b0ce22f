#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "medctx/error.hpp"
#include "medctx/utf8.hpp"

namespace medctx {

namespace detail {
struct U32Hash {
  std::size_t operator()(const std::u32string& s) const noexcept { return std::hash<std::u32string>{}(s); }
};
}  // namespace detail

// Subword piece inventory. Ids 0-5 are reserved for the special tokens and
// never collide with text pieces, whatever characters the corpus contains.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kStartMark = 4;
  static constexpr int kEndMark = 5;
  static constexpr int kNumSpecial = 6;

  Vocabulary() = default;

  // Pieces are assigned ids kNumSpecial, kNumSpecial+1, ... in the given order.
  static Vocabulary from_pieces(std::span<const std::u32string> pieces) {
    Vocabulary v;
    for (const auto& p : pieces) {
      if (p.empty()) throw InputError("empty vocabulary piece");
      if (!v.add(p)) throw InputError("duplicate vocabulary piece '" + utf8::encode(p) + "'");
    }
    return v;
  }

  std::size_t size() const { return kNumSpecial + pieces_.size(); }
  std::size_t max_piece_length() const { return max_len_; }

  std::optional<int> id_of(std::u32string_view piece) const {
    auto it = index_.find(std::u32string(piece));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(std::u32string_view piece) const { return id_of(piece).has_value(); }

  // Text of a piece id; specials render as bracketed names.
  std::u32string piece(int id) const {
    static const std::u32string special[kNumSpecial] = {U"[PAD]", U"[UNK]", U"[CLS]", U"[SEP]", U"[S]", U"[E]"};
    if (id < 0 || static_cast<std::size_t>(id) >= size()) throw IndexError("piece id out of range");
    if (id < kNumSpecial) return special[id];
    return pieces_[static_cast<std::size_t>(id - kNumSpecial)];
  }

  // Text pieces in id order (specials excluded).
  const std::vector<std::u32string>& pieces() const { return pieces_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.pieces_ == b.pieces_; }

 private:
  bool add(const std::u32string& p) {
    const int id = static_cast<int>(size());
    if (!index_.emplace(p, id).second) return false;
    pieces_.push_back(p);
    max_len_ = std::max(max_len_, p.size());
    return true;
  }

  friend Vocabulary build_vocab_from_words(const std::map<std::u32string, std::size_t>&, std::size_t);

  std::vector<std::u32string> pieces_;
  std::unordered_map<std::u32string, int, detail::U32Hash> index_;
  std::size_t max_len_ = 0;
};

// Greedy frequency-based merge vocabulary over a word-frequency table.
// Starts from every single character (code point order), then repeatedly adds
// the most frequent adjacent-piece concatenation. Ties go to the
// lexicographically smallest concatenation, then the smallest left piece.
// Stops at target_size or when every word is a single piece.
inline Vocabulary build_vocab_from_words(const std::map<std::u32string, std::size_t>& word_counts,
                                         std::size_t target_size) {
  std::set<char32_t> chars;
  for (const auto& [w, _] : word_counts) chars.insert(w.begin(), w.end());
  if (target_size < chars.size() + Vocabulary::kNumSpecial)
    throw CapacityError("vocabulary target size " + std::to_string(target_size) + " below " +
                        std::to_string(chars.size()) + " distinct characters + " +
                        std::to_string(Vocabulary::kNumSpecial) + " specials");

  Vocabulary v;
  for (char32_t c : chars) v.add(std::u32string(1, c));

  struct Word {
    std::vector<std::u32string> pieces;
    std::size_t count;
  };
  std::vector<Word> words;
  words.reserve(word_counts.size());
  for (const auto& [w, n] : word_counts) {
    Word word{{}, n};
    for (char32_t c : w) word.pieces.emplace_back(1, c);
    words.push_back(std::move(word));
  }

  using Pair = std::pair<std::u32string, std::u32string>;
  while (v.size() < target_size) {
    std::map<Pair, std::size_t> pair_counts;
    for (const auto& w : words)
      for (std::size_t i = 0; i + 1 < w.pieces.size(); ++i) pair_counts[{w.pieces[i], w.pieces[i + 1]}] += w.count;
    if (pair_counts.empty()) break;

    const Pair* best = nullptr;
    std::size_t best_count = 0;
    std::u32string best_concat;
    for (const auto& [pair, n] : pair_counts) {
      std::u32string concat = pair.first + pair.second;
      if (!best || n > best_count || (n == best_count && concat < best_concat)) {
        best = &pair;
        best_count = n;
        best_concat = std::move(concat);
      }
    }

    for (auto& w : words) {
      std::vector<std::u32string> merged;
      merged.reserve(w.pieces.size());
      for (std::size_t i = 0; i < w.pieces.size(); ++i) {
        if (i + 1 < w.pieces.size() && w.pieces[i] == best->first && w.pieces[i + 1] == best->second) {
          merged.push_back(best_concat);
          ++i;
        } else {
          merged.push_back(std::move(w.pieces[i]));
        }
      }
      w.pieces = std::move(merged);
    }
    v.add(best_concat);
  }
  return v;
}

// Greedy longest-match segmentation. Characters missing from the vocabulary
// become UNK one code point at a time, so this never fails.
inline std::vector<int> subword_encode(std::u32string_view word, const Vocabulary& v) {
  std::vector<int> ids;
  std::size_t i = 0;
  while (i < word.size()) {
    const std::size_t longest = std::min(v.max_piece_length(), word.size() - i);
    std::optional<int> hit;
    std::size_t len = longest;
    for (; len >= 1; --len) {
      hit = v.id_of(word.substr(i, len));
      if (hit) break;
    }
    if (hit) {
      ids.push_back(*hit);
      i += len;
    } else {
      ids.push_back(Vocabulary::kUnk);
      ++i;
    }
  }
  return ids;
}

}  // namespace medctx
