#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "helpers.hpp"

using namespace stackptr;

namespace {

const char* kCatSleeps =
    "1\t猫\t_\tNN\tNN\t_\t2\tnsubj\t_\t_\n"
    "2\t睡\t_\tVV\tVV\t_\t0\troot\t_\t_\n";

std::size_t error_line(const std::string& text) {
  try {
    parse_conll(text);
  } catch (const FormatError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(ParseConll, EmptyInput) { EXPECT_TRUE(parse_conll("").empty()); }

TEST(ParseConll, TwoTokenFixture) {
  auto c = parse_conll(kCatSleeps);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].tree.heads, (std::vector<int>{kNoHead, 2, 0}));
  EXPECT_EQ(c[0].tree.labels, (std::vector<std::string>{"", "nsubj", "root"}));
  EXPECT_EQ(c[0].sentence.tokens[0].form, "<ROOT>");
  EXPECT_EQ(c[0].sentence.tokens[0].pos, "<ROOT>");
  EXPECT_EQ(c[0].sentence.tokens[1].form, "猫");
  EXPECT_EQ(c[0].sentence.tokens[1].chars, std::u32string(U"猫"));
  EXPECT_EQ(c[0].sentence.n(), 2u);
}

TEST(ParseConll, NonIntegerHeadNamesLine) {
  EXPECT_EQ(error_line("# comment\n1\ta\t_\tNN\tNN\t_\tx\tdep\t_\t_\n"), 2u);
}

TEST(ParseConll, FormatErrorsNameLines) {
  EXPECT_EQ(error_line(std::string(kCatSleeps) + "\n1\ta\t_\tNN\n"), 4u);                          // columns
  EXPECT_EQ(error_line("1\ta\t_\tNN\tNN\t_\t0\troot\t_\t_\n3\tb\t_\tNN\tNN\t_\t1\tdep\t_\t_\n"), 2u);  // ids
  EXPECT_EQ(error_line("1\ta\t_\tNN\tNN\t_\t0\troot\t_\t_\n2\tb\t_\tNN\tNN\t_\t7\tdep\t_\t_\n"), 2u);  // range
  EXPECT_EQ(error_line("1\ta\t_\tNN\tNN\t_\t-1\troot\t_\t_\n"), 1u);
}

TEST(ParseConll, CommentsCrlfAndBlankLines) {
  std::string text = "# sent 1\r\n1\ta\t_\tNN\tNN\t_\t0\troot\t_\t_\r\n\r\n\r\n# sent 2\n1\tb\t_\t_\tVV\t_\t0\troot\t_\t_";
  auto c = parse_conll(text);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].sentence.tokens[1].form, "a");
  EXPECT_EQ(c[1].sentence.tokens[1].pos, "VV");  // fallback when the CPOS column is "_"
}

TEST(ParseConll, CycleRejected) {
  EXPECT_THROW(parse_conll("1\ta\t_\tNN\tNN\t_\t2\tx\t_\t_\n2\tb\t_\tNN\tNN\t_\t1\tx\t_\t_\n"), FormatError);
}

TEST(ParseConll, MultipleRootsNeedTheOverride) {
  const std::string text = "1\ta\t_\tNN\tNN\t_\t0\troot\t_\t_\n2\tb\t_\tNN\tNN\t_\t0\troot\t_\t_\n";
  EXPECT_THROW(parse_conll(text), FormatError);
  EXPECT_EQ(parse_conll(text, {.single_root = false}).size(), 1u);
}

TEST(ParseConll, UnparsedInputWhenHeadsOptional) {
  auto c = parse_conll("1\ta\t_\tNN\tNN\t_\t_\t_\t_\t_\n", {.heads_optional = true});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].tree.heads[1], kNoHead);
  EXPECT_THROW(parse_conll("1\ta\t_\tNN\tNN\t_\t_\t_\t_\t_\n"), FormatError);
}

TEST(WriteConll, EmptyList) { EXPECT_EQ(write_conll({}), ""); }

TEST(WriteConll, FixtureRoundTrip) {
  auto c = parse_conll(kCatSleeps);
  auto again = parse_conll(write_conll(c));
  ASSERT_EQ(again.size(), 1u);
  EXPECT_EQ(again[0].tree, c[0].tree);
  EXPECT_EQ(write_conll(again), write_conll(c));
  EXPECT_EQ(write_conll(c), kCatSleeps + std::string("\n"));
}

TEST(WriteConll, UnknownColumnsWrittenAsUnderscore) {
  auto ex = testutil::sentence({"x"}, {"NN"}, {0}, {"root"});
  EXPECT_EQ(write_conll(std::vector{ex}), "1\tx\t_\tNN\tNN\t_\t0\troot\t_\t_\n\n");
}

TEST(WriteConll, CycleIsAnError) {
  auto ex = testutil::sentence({"a", "b"}, {"NN", "NN"}, {2, 1}, {"x", "y"});
  try {
    write_conll(std::vector{ex});
    FAIL();
  } catch (const InvariantError& e) {
    EXPECT_NE(std::string(e.what()).find("ill-formed tree"), std::string::npos);
  }
}

TEST(WriteConll, ParseWriteParseIsIdempotentOnRandomTrees) {
  Rng rng(77);
  const std::vector<std::string> labels{"nsubj", "dobj", "det", "root"};
  const std::vector<std::string> forms{"猫", "dog", "Ünïcode", "a_b", "x"};
  std::vector<AnnotatedSentence> corpus;
  for (int k = 0; k < 300; ++k) {
    AnnotatedSentence ex;
    const std::size_t n = 1 + rng.index(12);
    ex.tree = random_tree(n, rng, labels);
    for (std::size_t i = 0; i < n; ++i) ex.sentence.add(forms[rng.index(forms.size())], "T" + std::to_string(i % 4));
    corpus.push_back(std::move(ex));
  }
  const std::string once = write_conll(corpus);
  auto parsed = parse_conll(once);
  ASSERT_EQ(parsed.size(), corpus.size());
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    EXPECT_EQ(parsed[k].tree, corpus[k].tree);
    for (std::size_t i = 1; i <= corpus[k].sentence.n(); ++i) {
      EXPECT_EQ(parsed[k].sentence.tokens[i].form, corpus[k].sentence.tokens[i].form);
      EXPECT_EQ(parsed[k].sentence.tokens[i].pos, corpus[k].sentence.tokens[i].pos);
    }
  }
  EXPECT_EQ(write_conll(parsed), once);
}

TEST(Vocabulary, EmptyCorpusHasOnlyReservedSymbols) {
  auto v = build_vocabulary({}, 2);
  EXPECT_EQ(v.words.size(), 3u);
  EXPECT_EQ(v.words.symbol(kPadId), "<PAD>");
  EXPECT_EQ(v.words.symbol(kUnkId), "<UNK>");
  EXPECT_EQ(v.words.symbol(kRootId), "<ROOT>");
  EXPECT_EQ(v.chars.size(), 3u);
  EXPECT_EQ(v.pos.size(), 3u);
  EXPECT_EQ(v.labels.size(), 0u);
}

TEST(Vocabulary, RareWordsMapToUnk) {
  auto ex = testutil::sentence({"a", "a", "b"}, {"X", "X", "Y"}, {0, 1, 1}, {"root", "l", "l"});
  auto v = build_vocabulary(std::vector{ex}, 2);
  EXPECT_EQ(v.word_id("a"), 3);
  EXPECT_EQ(v.word_id("b"), kUnkId);
  EXPECT_NE(v.char_id(U'b'), kUnkId);  // characters are kept regardless of frequency
  EXPECT_NE(v.pos_id("Y"), kUnkId);
  EXPECT_EQ(v.label_id("l"), 0);  // more frequent first
  EXPECT_EQ(v.label_id("root"), 1);
}

TEST(Vocabulary, DeterministicAndBijective) {
  auto corpus = testutil::small_corpus();
  auto a = build_vocabulary(corpus, 1), b = build_vocabulary(corpus, 1);
  EXPECT_TRUE(a == b);
  for (const SymbolTable* t : {&a.words, &a.chars, &a.pos, &a.labels}) {
    std::set<std::string> seen;
    for (std::size_t id = 0; id < t->size(); ++id) {
      EXPECT_TRUE(seen.insert(t->symbol(static_cast<int>(id))).second);
      EXPECT_EQ(t->find(t->symbol(static_cast<int>(id))), static_cast<int>(id));
    }
  }
}

TEST(Vocabulary, FrozenRejectsInsertion) {
  auto v = build_vocabulary(testutil::small_corpus(), 1);
  EXPECT_TRUE(v.frozen());
  EXPECT_THROW(v.words.add("new"), InvariantError);
}

TEST(Vocabulary, TextRoundTrip) {
  auto v = build_vocabulary(testutil::small_corpus(), 1);
  EXPECT_TRUE(vocabulary_from_text(vocabulary_to_text(v)) == v);
}

TEST(Vocabulary, ExtensionKeepsExistingIds) {
  auto corpus = testutil::small_corpus();
  auto v = build_vocabulary(corpus, 1);
  auto more = std::vector{testutil::sentence({"birds", "fly"}, {"NN", "VB"}, {2, 0}, {"nsubj", "root"})};
  auto w = extend_vocabulary(v, more, 1);
  for (std::size_t id = 0; id < v.words.size(); ++id)
    EXPECT_EQ(w.words.symbol(static_cast<int>(id)), v.words.symbol(static_cast<int>(id)));
  EXPECT_EQ(w.words.size(), v.words.size() + 2);
  EXPECT_EQ(w.pos.size(), v.pos.size() + 1);
}

TEST(PretrainedEmbeddings, RowsCopiedFromFile) {
  auto v = build_vocabulary(testutil::small_corpus(), 1);
  std::istringstream in("cat 0.5 -0.25 1.0\nthe 2 3 4\nzebra 9 9 9\n");
  Rng rng(1);
  Tensor t = load_pretrained_embeddings(in, v, 3, rng);
  ASSERT_EQ(t.shape, (Shape{v.words.size(), 3}));
  const auto cat = static_cast<std::size_t>(v.word_id("cat")), the = static_cast<std::size_t>(v.word_id("the"));
  EXPECT_EQ(t(cat, 0), 0.5);
  EXPECT_EQ(t(cat, 1), -0.25);
  EXPECT_EQ(t(cat, 2), 1.0);
  EXPECT_EQ(t(the, 2), 4.0);
  const auto dog = static_cast<std::size_t>(v.word_id("dog"));
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_GE(t(dog, j), -0.05);
    EXPECT_LE(t(dog, j), 0.05);
  }
}

TEST(PretrainedEmbeddings, Errors) {
  auto v = build_vocabulary(testutil::small_corpus(), 1);
  Rng rng(1);
  std::istringstream short_line("cat 1 2 3\nthe 1 2\n");
  EXPECT_THROW(load_pretrained_embeddings(short_line, v, 3, rng), FormatError);
  std::istringstream wrong_dim("cat 1 2 3 4\n");
  EXPECT_THROW(load_pretrained_embeddings(wrong_dim, v, 3, rng), ConfigError);
  EXPECT_EQ(TrainConfig{}.d_w, 300);
}

TEST(Utf8, DecodeEncodeRoundTrip) {
  const std::string s = "a猫Ü€😀";
  EXPECT_EQ(utf8::encode(utf8::decode(s)), s);
  EXPECT_EQ(utf8::decode(s).size(), 5u);
  EXPECT_EQ(utf8::decode("\xff"), std::u32string(U"�"));
}

TEST(Synthetic, GeneratedTreesAreWellFormed) {
  Rng rng(3);
  auto corpus = generate_corpus(make_lexicon(5), 200, rng);
  for (const auto& ex : corpus) EXPECT_EQ(tree_defect(ex.tree, true), "");
  EXPECT_EQ(parse_conll(write_conll(corpus)).size(), corpus.size());
}

TEST(Synthetic, DomainOverlap) {
  Lexicon a = make_lexicon(1), b = derive_domain(a, 0.6, 2);
  for (const auto& [tag, ws] : a.words) {
    std::size_t shared = 0;
    for (const auto& w : b.words.at(tag)) shared += std::count(ws.begin(), ws.end(), w);
    const bool closed = tag == "DT" || tag == "P" || tag == "PU";
    const auto expected = closed ? ws.size() : static_cast<std::size_t>(0.6 * static_cast<double>(ws.size()) + 0.5);
    EXPECT_EQ(shared, expected) << tag;
  }
}
