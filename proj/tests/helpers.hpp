#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stackptr/stackptr.hpp"

namespace testutil {

using namespace stackptr;

// Tiny dimensions so exhaustive checks and finite differences stay fast.
inline TrainConfig tiny_config(std::uint64_t seed = 3) {
  TrainConfig c;
  c.d_w = 4;
  c.char_dim = 3;
  c.pos_dim = 3;
  c.num_filters = 5;
  c.r = 3;
  c.d_h = 4;
  c.batch_size = 4;
  c.max_epochs = 3;
  c.patience = 3;
  c.seed = seed;
  c.min_word_count = 1;
  return c;
}

inline TrainConfig no_dropout(TrainConfig c) {
  c.p_in = c.p_out = c.p_rnn = 0.0;
  return c;
}

inline AnnotatedSentence sentence(const std::vector<std::string>& forms, const std::vector<std::string>& tags,
                                  const std::vector<int>& heads, const std::vector<std::string>& labels) {
  AnnotatedSentence ex;
  for (std::size_t i = 0; i < forms.size(); ++i) {
    ex.sentence.add(forms[i], tags[i]);
    ex.tree.add(heads[i], labels[i]);
  }
  return ex;
}

inline std::vector<AnnotatedSentence> small_corpus() {
  return {sentence({"the", "cat", "sleeps"}, {"DT", "NN", "VV"}, {2, 3, 0}, {"det", "nsubj", "root"}),
          sentence({"a", "dog", "sees", "the", "cat"}, {"DT", "NN", "VV", "DT", "NN"}, {2, 3, 0, 5, 3},
                   {"det", "nsubj", "root", "det", "dobj"}),
          sentence({"cats", "run"}, {"NN", "VV"}, {2, 0}, {"nsubj", "root"})};
}

// Every head assignment over n tokens that forms a tree rooted at ROOT.
inline void for_each_tree(std::size_t n, bool single_root, const std::function<void(const DependencyTree&)>& fn) {
  std::vector<int> heads(n + 1, 0);
  heads[0] = kNoHead;
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i > n) {
      DependencyTree t;
      for (std::size_t k = 1; k <= n; ++k) t.add(heads[k], "dep" + std::to_string(k % 3));
      if (tree_defect(t, single_root).empty()) fn(t);
      return;
    }
    for (int h = 0; h <= static_cast<int>(n); ++h) {
      if (h == static_cast<int>(i)) continue;
      heads[i] = h;
      rec(i + 1);
    }
  };
  rec(1);
}

// Scores +1 on the gold target of the current step, 0 elsewhere.
class OracleScorer {
 public:
  explicit OracleScorer(std::vector<ParseStep> gold) : gold_(std::move(gold)) {}
  std::vector<double> pointer_scores(const DecoderState& s) {
    std::vector<double> v(s.n() + 1, 0.0);
    v[static_cast<std::size_t>(gold_.at(s.step_count()).target)] = 1.0;
    return v;
  }
  int label_for(const DecoderState& s, int) { return gold_.at(s.step_count()).label; }

 private:
  std::vector<ParseStep> gold_;
};

inline void set_all(ParameterStore& p, double v) {
  for (auto& e : p.entries()) std::fill(e.tensor.values.begin(), e.tensor.values.end(), v);
}

inline std::string data_path(const std::string& name) { return std::string(STACKPTR_DATA_DIR) + "/" + name; }

}  // namespace testutil
