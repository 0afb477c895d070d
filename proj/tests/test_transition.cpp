#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace stackptr;

namespace {

DependencyTree tree_of(const std::vector<int>& heads) {
  DependencyTree t;
  for (int h : heads) t.add(h, "dep");
  return t;
}

std::vector<int> targets(const std::vector<ParseStep>& steps) {
  std::vector<int> out;
  for (const auto& s : steps) out.push_back(s.target);
  return out;
}

constexpr ChildOrder kOrders[] = {ChildOrder::inside_out, ChildOrder::left2right, ChildOrder::right2left};

}  // namespace

TEST(Step, SingleTokenSentence) {
  DecoderState s(1);
  EXPECT_EQ(s.legal_mask(), (std::vector<bool>{false, true}));  // ROOT cannot finish before token 1 has a head
  s = step(s, {1, 0});
  EXPECT_EQ(s.stack(), (std::vector<int>{0, 1}));
  s = step(s, {1, -1});
  s = step(s, {0, -1});
  EXPECT_TRUE(s.terminal());
  EXPECT_EQ(s.step_count(), 3u);
  EXPECT_EQ(s.arcs(), (std::vector<std::pair<int, int>>{{0, 1}}));
}

TEST(Step, SelfPointPops) {
  DecoderState s(3);
  s.apply({2, 0});
  auto before = s.arcs();
  s.apply({2, -1});
  EXPECT_EQ(s.stack(), std::vector<int>{0});
  EXPECT_EQ(s.arcs(), before);
}

TEST(Step, IllegalTargetsThrow) {
  DecoderState s(3);
  s.apply({2, 0});
  EXPECT_THROW(s.apply({0, 0}), InvariantError);   // ROOT never becomes a child
  EXPECT_THROW(s.apply({9, 0}), InvariantError);   // out of range
  s.apply({1, 0});
  s.apply({1, -1});
  EXPECT_THROW(s.apply({1, 0}), InvariantError);  // already attached
  s.apply({2, -1});
  EXPECT_THROW(s.apply({2, 0}), InvariantError);
}

TEST(Step, SingleRootPolicy) {
  DecoderState s(2, true);
  s.apply({1, 0});
  EXPECT_FALSE(s.is_legal(1)) << "token 1 cannot pop while token 2 is unattached";
  s.apply({2, 0});
  s.apply({2, -1});
  s.apply({1, -1});
  EXPECT_FALSE(s.is_legal(2));
  EXPECT_TRUE(s.is_legal(0));
  DecoderState multi(2, false);
  multi.apply({1, 0});
  multi.apply({1, -1});
  EXPECT_TRUE(multi.is_legal(2));
}

TEST(GoldPath, Chain) {
  auto steps = gold_path(tree_of({0, 1, 2}));
  EXPECT_EQ(targets(steps), (std::vector<int>{1, 2, 3, 3, 2, 1, 0}));
}

TEST(GoldPath, SingleToken) { EXPECT_EQ(targets(gold_path(tree_of({0}))), (std::vector<int>{1, 1, 0})); }

TEST(GoldPath, ChildOrders) {
  // Head 3 with children 1, 2, 4, 5.
  auto t = tree_of({3, 3, 0, 3, 3});
  EXPECT_EQ(ordered_children(t, 3, ChildOrder::left2right), (std::vector<int>{1, 2, 4, 5}));
  EXPECT_EQ(ordered_children(t, 3, ChildOrder::right2left), (std::vector<int>{5, 4, 2, 1}));
  EXPECT_EQ(ordered_children(t, 3, ChildOrder::inside_out), (std::vector<int>{2, 4, 1, 5}));
}

TEST(GoldPath, IllFormedTree) { EXPECT_THROW(gold_path(tree_of({2, 1})), InvariantError); }

TEST(GoldPath, ReplayRecoversEveryTreeUpToFiveTokens) {
  std::size_t trees = 0;
  for (std::size_t n = 1; n <= 5; ++n)
    for (bool single : {false, true})
      testutil::for_each_tree(n, single, [&](const DependencyTree& t) {
        for (ChildOrder order : kOrders) {
          auto steps = gold_path(t, order);
          ASSERT_EQ(steps.size(), 2 * n + 1);
          DecoderState s = replay(n, steps, single);
          ASSERT_TRUE(s.terminal());
          for (std::size_t i = 1; i <= n; ++i) ASSERT_EQ(s.heads()[i], t.heads[i]);
        }
        ++trees;
      });
  // (n+1)^(n-1) rooted trees per n, plus n^(n-1) single-root trees per n.
  EXPECT_EQ(trees, (1u + 3 + 16 + 125 + 1296) + (1u + 2 + 9 + 64 + 625));
}

TEST(GreedyDecoding, OracleScorerRecoversEveryTree) {
  for (std::size_t n = 1; n <= 5; ++n)
    for (bool single : {false, true})
      testutil::for_each_tree(n, single, [&](const DependencyTree& t) {
        std::vector<int> labels(n + 1, -1);
        for (std::size_t i = 1; i <= n; ++i) labels[i] = static_cast<int>(i % 3);
        testutil::OracleScorer scorer(gold_path(t, ChildOrder::inside_out, labels));
        DecoderState s = decode_greedy(n, scorer, single);
        ASSERT_EQ(s.step_count(), 2 * n + 1);
        ASSERT_EQ(s.heads(), t.heads);
        for (std::size_t i = 1; i <= n; ++i) ASSERT_EQ(s.labels()[i], labels[i]);
      });
}

namespace {

struct RandomScorer {
  Rng* rng;
  std::vector<double> pointer_scores(const DecoderState& s) {
    std::vector<double> v(s.n() + 1);
    for (double& x : v) x = rng->uniform(-3.0, 3.0);
    return v;
  }
  int label_for(const DecoderState&, int) { return static_cast<int>(rng->index(4)); }
};

}  // namespace

TEST(GreedyDecoding, RandomScorersAlwaysYieldTrees) {
  Rng rng(11);
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 1 + rng.index(6);
    const bool single = rng.bernoulli(0.5);
    RandomScorer scorer{&rng};
    DecoderState s = decode_greedy(n, scorer, single);
    ASSERT_EQ(s.step_count(), 2 * n + 1);
    const std::vector<std::string> names{"a", "b", "c", "d"};
    ASSERT_EQ(tree_defect(s.to_tree(names), single), "");
  }
}

TEST(GreedyDecoding, RandomLegalPlayoutsTerminate) {
  Rng rng(12);
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 1 + rng.index(6);
    DecoderState s(n, k % 2 == 0);
    while (!s.terminal()) {
      auto mask = s.legal_mask();
      std::vector<int> legal;
      for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) legal.push_back(static_cast<int>(i));
      ASSERT_FALSE(legal.empty());
      s.apply({legal[rng.index(legal.size())], 0});
    }
    ASSERT_EQ(s.step_count(), 2 * n + 1);
    ASSERT_EQ(s.unattached_count(), 0u);
  }
}

TEST(ArgmaxLegal, TiesGoToLowestPositionAndShiftInvariant) {
  EXPECT_EQ(argmax_legal({1, 1, 1}, {true, true, true}), 0);
  EXPECT_EQ(argmax_legal({5, 1, 1}, {false, true, true}), 1);
  Rng rng(13);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> s(6);
    std::vector<bool> m(6);
    for (std::size_t i = 0; i < 6; ++i) {
      s[i] = std::round(rng.uniform(-3, 3));
      m[i] = rng.bernoulli(0.7);
    }
    m[rng.index(6)] = true;
    auto shifted = s;
    for (double& x : shifted) x += 17.0;
    EXPECT_EQ(argmax_legal(s, m), argmax_legal(shifted, m));
  }
  EXPECT_THROW(argmax_legal({1, 2}, {false, false}), InvariantError);
}
