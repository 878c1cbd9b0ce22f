#include <gtest/gtest.h>

#include <random>

#include "medctx/preproc.hpp"

using namespace medctx;

namespace {

std::vector<std::u32string> texts_of(const std::vector<Token>& toks) {
  std::vector<std::u32string> out;
  for (const auto& t : toks) out.push_back(t.text);
  return out;
}

Sentence single_sentence(std::u32string_view text) {
  auto sents = segment(text);
  EXPECT_EQ(sents.size(), 1u);
  return sents.at(0);
}

Vocabulary char_vocab(std::u32string_view text) {
  std::vector<std::u32string> t{std::u32string(text)};
  return build_vocab(t, 10000);
}

}  // namespace

TEST(Tokenize, Empty) { EXPECT_TRUE(tokenize(U"").empty()); }

TEST(Tokenize, AlnumRunsAndPunctuation) {
  auto toks = tokenize(U"lisinopril 10mg, daily");
  EXPECT_EQ(texts_of(toks), (std::vector<std::u32string>{U"lisinopril", U"10mg", U",", U"daily"}));
  ASSERT_EQ(toks.size(), 4u);
  EXPECT_EQ(toks[0].span, (CharSpan{0, 10}));
  EXPECT_EQ(toks[1].span, (CharSpan{11, 15}));
  EXPECT_EQ(toks[2].span, (CharSpan{15, 16}));
  EXPECT_EQ(toks[3].span, (CharSpan{17, 22}));
}

TEST(Tokenize, AlphanumericTokensAreIdempotent) {
  for (const auto& tok : tokenize(U"Start plavix 75mg q.d. x3 days")) {
    if (!is_word_char(tok.text[0])) continue;
    auto again = tokenize(tok.text);
    ASSERT_EQ(again.size(), 1u);
    EXPECT_EQ(again[0].text, tok.text);
  }
}

// Fuzz: every token is its text slice, tokens are sorted and disjoint, and
// together they cover exactly the non-whitespace characters.
TEST(Tokenize, OffsetIntegrityFuzz) {
  std::mt19937_64 rng(5);
  const std::u32string alphabet = U"ab9 Z.,;\n\t-é(";
  for (int trial = 0; trial < 2000; ++trial) {
    std::u32string text;
    const auto len = rng() % 40;
    for (std::size_t i = 0; i < len; ++i) text.push_back(alphabet[rng() % alphabet.size()]);
    auto toks = tokenize(text);
    std::vector<bool> covered(text.size(), false);
    for (std::size_t i = 0; i < toks.size(); ++i) {
      ASSERT_LT(toks[i].span.start, toks[i].span.end);
      ASSERT_EQ(text.substr(toks[i].span.start, toks[i].span.length()), toks[i].text);
      if (i > 0) ASSERT_LE(toks[i - 1].span.end, toks[i].span.start);
      for (auto p = toks[i].span.start; p < toks[i].span.end; ++p) covered[p] = true;
    }
    for (std::size_t p = 0; p < text.size(); ++p) ASSERT_EQ(covered[p], !is_space(text[p])) << "pos " << p;
    for (const auto& s : split_sentences(text, toks))
      for (const auto& t : s.tokens) ASSERT_TRUE(s.span.start <= t.span.start && t.span.end <= s.span.end);
  }
}

TEST(SplitSentences, PeriodTerminates) {
  const std::u32string text = U"Stopped aspirin. Start plavix.";
  auto sents = split_sentences(text, tokenize(text));
  ASSERT_EQ(sents.size(), 2u);
  EXPECT_EQ(sents[0].tokens.size(), 3u);
  EXPECT_EQ(sents[1].tokens.size(), 3u);
  EXPECT_EQ(sents[1].span, (CharSpan{17, 30}));
}

TEST(SplitSentences, NoTerminatorIsOneSentence) {
  const std::u32string text = U"continue metformin 500 mg daily";
  auto toks = tokenize(text);
  auto sents = split_sentences(text, toks);
  ASSERT_EQ(sents.size(), 1u);
  EXPECT_EQ(sents[0].tokens, toks);
}

TEST(SplitSentences, BlankLineTerminates) {
  EXPECT_EQ(segment(U"a.\n\nb").size(), 2u);
  EXPECT_EQ(segment(U"a\n\nb").size(), 2u);
  EXPECT_EQ(segment(U"a\n \nb").size(), 2u);
  EXPECT_EQ(segment(U"a\nb").size(), 1u);
  EXPECT_TRUE(segment(U"  \n").empty());
}

TEST(BuildVocab, MostFrequentMergeFirst) {
  std::vector<std::u32string> texts{U"aaaa"};
  auto v = build_vocab(texts, 100);
  EXPECT_TRUE(v.contains(U"a"));
  EXPECT_TRUE(v.contains(U"aa"));
  EXPECT_EQ(*v.id_of(U"a"), Vocabulary::kNumSpecial);
  EXPECT_EQ(*v.id_of(U"aa"), Vocabulary::kNumSpecial + 1);
}

TEST(BuildVocab, AllCharactersPresentAndDeterministic) {
  std::vector<std::u32string> texts{U"Stop lisinopril 10 mg.", U"start warfarin; hold heparin!"};
  auto a = build_vocab(texts, 40);
  auto b = build_vocab(texts, 40);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 40u);
  for (const auto& t : texts)
    for (char32_t c : t)
      if (!is_space(c)) EXPECT_TRUE(a.contains(std::u32string(1, c)));
}

TEST(BuildVocab, TieBreakIsLexicographic) {
  // "ab" and "cd" both occur once; "ab" sorts first.
  std::vector<std::u32string> texts{U"ab cd"};
  auto v = build_vocab(texts, 4 + Vocabulary::kNumSpecial + 1);
  EXPECT_TRUE(v.contains(U"ab"));
  EXPECT_FALSE(v.contains(U"cd"));
}

TEST(BuildVocab, StopsWhenWordsAreWhole) {
  std::vector<std::u32string> texts{U"abc"};
  auto v = build_vocab(texts, 1000);
  EXPECT_TRUE(v.contains(U"abc"));
  EXPECT_EQ(v.size(), Vocabulary::kNumSpecial + 5u);  // a b c ab abc
}

TEST(BuildVocab, CapacityError) {
  std::vector<std::u32string> texts{U"abcdef"};
  EXPECT_THROW(build_vocab(texts, 11), CapacityError);
  EXPECT_NO_THROW(build_vocab(texts, 12));
}

TEST(SubwordEncode, WholeWordIsOnePiece) {
  auto v = Vocabulary::from_pieces(std::vector<std::u32string>{U"a", U"s", U"p", U"i", U"r", U"n", U"aspirin"});
  EXPECT_EQ(subword_encode(U"aspirin", v), (std::vector<int>{*v.id_of(U"aspirin")}));
}

TEST(SubwordEncode, GreedyLongestMatch) {
  auto v = Vocabulary::from_pieces(std::vector<std::u32string>{U"a", U"b", U"c", U"ab"});
  EXPECT_EQ(subword_encode(U"abc", v), (std::vector<int>{*v.id_of(U"ab"), *v.id_of(U"c")}));
}

TEST(SubwordEncode, UnknownCharacterIsUnk) {
  auto v = Vocabulary::from_pieces(std::vector<std::u32string>{U"a", U"b"});
  EXPECT_EQ(subword_encode(U"axb", v), (std::vector<int>{*v.id_of(U"a"), Vocabulary::kUnk, *v.id_of(U"b")}));
}

TEST(SubwordEncode, PiecesConcatenateToWord) {
  std::vector<std::u32string> texts{U"metoprolol tartrate metformin metronidazole"};
  auto v = build_vocab(texts, 40);
  std::mt19937_64 rng(3);
  const std::u32string letters = U"metoprlinazd";
  for (int i = 0; i < 500; ++i) {
    std::u32string w;
    for (auto n = 1 + rng() % 12; n > 0; --n) w.push_back(letters[rng() % letters.size()]);
    std::u32string joined;
    for (int id : subword_encode(w, v)) {
      ASSERT_NE(id, Vocabulary::kUnk);
      joined += v.piece(id);
    }
    ASSERT_EQ(joined, w);
  }
}

TEST(SpansToBio, SingleTokenMention) {
  auto s = single_sentence(U"pt started lisinopril 10mg daily");
  std::vector<CharSpan> m{{11, 21}};
  EXPECT_EQ(spans_to_bio(s, m), (std::vector<BioTag>{BioTag::O, BioTag::O, BioTag::B, BioTag::O, BioTag::O}));
}

TEST(SpansToBio, TwoTokenMention) {
  auto s = single_sentence(U"insulin glargine");
  std::vector<CharSpan> m{{0, 16}};
  EXPECT_EQ(spans_to_bio(s, m), (std::vector<BioTag>{BioTag::B, BioTag::I}));
}

TEST(SpansToBio, NoMentionsAllOutside) {
  auto s = single_sentence(U"vitals stable today");
  EXPECT_EQ(spans_to_bio(s, {}), std::vector<BioTag>(3, BioTag::O));
}

TEST(SpansToBio, PartialOverlapTakesWholeToken) {
  auto s = single_sentence(U"start 10mg");
  std::vector<CharSpan> m{{6, 8}};
  EXPECT_EQ(spans_to_bio(s, m), (std::vector<BioTag>{BioTag::O, BioTag::B}));
}

TEST(SpansToBio, Conflicts) {
  auto s = single_sentence(U"insulin glargine");
  std::vector<CharSpan> overlapping{{0, 10}, {5, 16}};
  EXPECT_THROW(spans_to_bio(s, overlapping), ConflictError);
  std::vector<CharSpan> same_token{{0, 3}, {4, 7}};
  EXPECT_THROW(spans_to_bio(s, same_token), ConflictError);
}

TEST(AlignToSubtokens, BWordSplitsIntoBII) {
  auto s = single_sentence(U"start lisinopril");
  auto v = Vocabulary::from_pieces(std::vector<std::u32string>{U"start", U"lis", U"ino", U"pril"});
  std::vector<BioTag> tags{BioTag::O, BioTag::B};
  auto seq = align_to_subtokens(s, tags, v, 16);
  ASSERT_EQ(seq.size(), 16u);
  EXPECT_EQ(seq.ids[0], Vocabulary::kCls);
  EXPECT_EQ(seq.ids[5], Vocabulary::kSep);
  EXPECT_EQ(seq.tags[1], BioTag::O);
  EXPECT_EQ(seq.tags[2], BioTag::B);
  EXPECT_EQ(seq.tags[3], BioTag::I);
  EXPECT_EQ(seq.tags[4], BioTag::I);
  EXPECT_EQ(seq.word_index, (std::vector<int>{-1, 0, 1, 1, 1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1}));
  EXPECT_EQ(seq.active_length(), 6u);
  for (std::size_t i = 6; i < 16; ++i) {
    EXPECT_EQ(seq.mask[i], 0);
    EXPECT_EQ(seq.tags[i], BioTag::O);
  }
}

TEST(AlignToSubtokens, IWordIsAllI) {
  auto s = single_sentence(U"insulin glargine");
  auto v = Vocabulary::from_pieces(std::vector<std::u32string>{U"insulin", U"glar", U"gine"});
  std::vector<BioTag> tags{BioTag::B, BioTag::I};
  auto seq = align_to_subtokens(s, tags, v, 8);
  EXPECT_EQ(std::vector<BioTag>(seq.tags.begin() + 1, seq.tags.begin() + 4),
            (std::vector<BioTag>{BioTag::B, BioTag::I, BioTag::I}));
}

TEST(AlignToSubtokens, TruncationNeverCutsAMention) {
  auto s = single_sentence(U"a b insulin glargine c");
  auto v = char_vocab(U"abc");
  std::vector<BioTag> tags{BioTag::O, BioTag::O, BioTag::B, BioTag::I, BioTag::O};
  // insulin and glargine are all UNK pieces; only a, b and insulin fit, so the mention is dropped.
  auto seq = align_to_subtokens(s, tags, v, 2 + 1 + 1 + 7 + 3);
  EXPECT_EQ(seq.words_kept, 2u);
  EXPECT_EQ(std::count(seq.tags.begin(), seq.tags.end(), BioTag::B), 0);
  auto full = align_to_subtokens(s, tags, v, 64);
  EXPECT_EQ(full.words_kept, 5u);
}

TEST(AlignToSubtokens, TagCountMismatch) {
  auto s = single_sentence(U"a b");
  std::vector<BioTag> tags{BioTag::O};
  EXPECT_THROW(align_to_subtokens(s, tags, char_vocab(U"ab")), InputError);
}

TEST(DecodeBio, SingleSpan) {
  auto s = single_sentence(U"pt started lisinopril 10mg daily");
  std::vector<BioTag> words{BioTag::O, BioTag::O, BioTag::B, BioTag::O, BioTag::O};
  EXPECT_EQ(decode_word_tags(s, words), (std::vector<CharSpan>{{11, 21}}));
}

TEST(DecodeBio, OrphanIIsRepaired) {
  auto s = single_sentence(U"x y z");
  std::vector<BioTag> words{BioTag::O, BioTag::I, BioTag::O};
  EXPECT_EQ(decode_word_tags(s, words), (std::vector<CharSpan>{{2, 3}}));
  std::vector<BioTag> none(3, BioTag::O);
  EXPECT_TRUE(decode_word_tags(s, none).empty());
}

TEST(DecodeBio, ReadsFirstPieceOfEachWord) {
  auto s = single_sentence(U"start lisinopril");
  auto v = Vocabulary::from_pieces(std::vector<std::u32string>{U"start", U"lis", U"ino", U"pril"});
  auto seq = align_to_subtokens(s, std::vector<BioTag>{BioTag::O, BioTag::O}, v, 8);
  std::vector<BioTag> pred(8, BioTag::O);
  pred[2] = BioTag::B;  // first piece of lisinopril
  pred[3] = BioTag::O;  // ignored
  EXPECT_EQ(decode_bio(seq, pred, s), (std::vector<CharSpan>{{6, 16}}));
  pred.pop_back();
  EXPECT_THROW(decode_bio(seq, pred, s), InputError);
}

namespace {

// Random sentence plus a random non-overlapping, token-aligned mention set.
struct Case {
  std::u32string text;
  Sentence sent;
  std::vector<CharSpan> mentions;
};

Case random_case(std::mt19937_64& rng) {
  static const std::vector<std::u32string> words = {U"start", U"lisinopril", U"10", U"mg", U",", U"insulin",
                                                    U"glargine", U"q", U"daily", U"(", U")", U"hold",
                                                    U"warfarin", U"é", U"x"};
  Case c;
  const auto n = 1 + rng() % 30;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) c.text += U' ';
    c.text += words[rng() % words.size()];
  }
  auto toks = tokenize(c.text);
  c.sent = Sentence{CharSpan{toks.front().span.start, toks.back().span.end}, toks};
  std::size_t t = rng() % 3;
  while (t < toks.size()) {
    const auto len = 1 + rng() % 3;
    const auto last = std::min(toks.size() - 1, t + len - 1);
    c.mentions.push_back({toks[t].span.start, toks[last].span.end});
    t = last + 1 + rng() % 4;
  }
  return c;
}

}  // namespace

TEST(Properties, BioRoundTrip) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    auto c = random_case(rng);
    auto tags = spans_to_bio(c.sent, c.mentions);
    ASSERT_EQ(decode_word_tags(c.sent, tags), c.mentions) << "trial " << trial;
  }
}

TEST(Properties, AlignmentConservation) {
  std::mt19937_64 rng(12);
  std::vector<std::u32string> corpus{U"start lisinopril 10 mg insulin glargine daily hold warfarin"};
  auto v = build_vocab(corpus, 40);
  for (int trial = 0; trial < 2000; ++trial) {
    auto c = random_case(rng);
    auto tags = spans_to_bio(c.sent, c.mentions);
    const std::size_t max_len = 4 + rng() % 60;
    auto seq = align_to_subtokens(c.sent, tags, v, max_len);
    ASSERT_EQ(seq.size(), max_len);
    const auto b_words = std::count(tags.begin(), tags.begin() + static_cast<long>(seq.words_kept), BioTag::B);
    ASSERT_EQ(std::count(seq.tags.begin(), seq.tags.end(), BioTag::B), b_words);
    // First-piece projection inverts the alignment on surviving words.
    auto words = project_to_words(seq, seq.tags, tags.size());
    for (std::size_t w = 0; w < tags.size(); ++w)
      ASSERT_EQ(words[w], w < seq.words_kept ? tags[w] : BioTag::O);
    // Surviving mentions decode exactly.
    std::vector<CharSpan> kept;
    for (const auto& m : c.mentions)
      if (seq.words_kept > 0 && m.end <= c.sent.tokens[seq.words_kept - 1].span.end) kept.push_back(m);
    ASSERT_EQ(decode_bio(seq, seq.tags, c.sent), kept);
  }
}
