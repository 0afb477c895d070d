#pragma once

// Top-down, depth-first stack-pointer transition system.
//
// The stack starts as [ROOT]. At each step the token on top of the stack
// either points to an unattached token p (arc top -> p, p is pushed) or
// points to itself (top is popped). Parsing ends when ROOT points to itself
// while alone on the stack; a sentence of n tokens takes exactly 2n+1 steps.

#include <algorithm>
#include <concepts>
#include <cstdlib>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stackptr/config.hpp"
#include "stackptr/errors.hpp"
#include "stackptr/treebank.hpp"

namespace stackptr {

struct ParseStep {
  int target = 0;
  int label = -1;  // label id for an arc; -1 for a self-point

  friend bool operator==(const ParseStep&, const ParseStep&) = default;
};

class DecoderState {
 public:
  explicit DecoderState(std::size_t n, bool single_root = false)
      : n_(n), single_root_(single_root), heads_(n + 1, kNoHead), labels_(n + 1, -1), on_stack_(n + 1, false),
        unattached_(n) {
    stack_.push_back(0);
    on_stack_[0] = true;
  }

  std::size_t n() const { return n_; }
  const std::vector<int>& stack() const { return stack_; }
  bool terminal() const { return stack_.empty(); }
  int top() const {
    if (stack_.empty()) throw InvariantError("top() on a terminal state");
    return stack_.back();
  }
  std::size_t step_count() const { return steps_; }
  bool attached(std::size_t i) const { return i != 0 && heads_[i] != kNoHead; }
  std::size_t unattached_count() const { return unattached_; }
  bool root_has_child() const { return root_children_ > 0; }

  const std::vector<int>& heads() const { return heads_; }
  const std::vector<int>& labels() const { return labels_; }

  std::vector<std::pair<int, int>> arcs() const {
    std::vector<std::pair<int, int>> out;
    for (std::size_t i = 1; i <= n_; ++i)
      if (heads_[i] != kNoHead) out.emplace_back(heads_[i], static_cast<int>(i));
    return out;
  }

  bool is_legal(int target) const {
    if (terminal() || target < 0 || static_cast<std::size_t>(target) > n_) return false;
    const int t = stack_.back();
    if (target == t) {
      // ROOT may only finish once every token has a head.
      if (t == 0) return unattached_ == 0;
      // Under single_root, popping ROOT's only child early would strand the rest.
      if (single_root_ && stack_.size() == 2 && root_has_child() && unattached_ > 0) return false;
      return true;
    }
    if (target == 0 || attached(static_cast<std::size_t>(target))) return false;
    if (single_root_ && t == 0 && root_has_child()) return false;
    return true;
  }

  // legal[i] for every position 0..n.
  std::vector<bool> legal_mask() const {
    std::vector<bool> mask(n_ + 1, false);
    for (std::size_t i = 0; i <= n_; ++i) mask[i] = is_legal(static_cast<int>(i));
    return mask;
  }

  void apply(ParseStep s) {
    if (!is_legal(s.target)) throw InvariantError("illegal transition to position " + std::to_string(s.target));
    const int t = stack_.back();
    if (s.target == t) {
      on_stack_[static_cast<std::size_t>(t)] = false;
      stack_.pop_back();
    } else {
      const auto p = static_cast<std::size_t>(s.target);
      heads_[p] = t;
      labels_[p] = s.label;
      --unattached_;
      if (t == 0) ++root_children_;
      stack_.push_back(s.target);
      on_stack_[p] = true;
    }
    ++steps_;
  }

  DependencyTree to_tree(std::span<const std::string> label_names) const {
    DependencyTree tree;
    for (std::size_t i = 1; i <= n_; ++i) {
      const int l = labels_[i];
      tree.add(heads_[i], l >= 0 && static_cast<std::size_t>(l) < label_names.size() ? label_names[l] : "_");
    }
    return tree;
  }

 private:
  std::size_t n_;
  bool single_root_;
  std::vector<int> stack_;
  std::vector<int> heads_;
  std::vector<int> labels_;
  std::vector<bool> on_stack_;
  std::size_t unattached_;
  std::size_t root_children_ = 0;
  std::size_t steps_ = 0;
};

inline DecoderState step(DecoderState state, ParseStep choice) {
  state.apply(choice);
  return state;
}

// Children of `head`, ordered for the depth-first traversal.
inline std::vector<int> ordered_children(const DependencyTree& tree, int head, ChildOrder order) {
  std::vector<int> kids;
  for (std::size_t i = 1; i <= tree.n(); ++i)
    if (tree.heads[i] == head) kids.push_back(static_cast<int>(i));
  switch (order) {
    case ChildOrder::left2right: break;
    case ChildOrder::right2left: std::reverse(kids.begin(), kids.end()); break;
    case ChildOrder::inside_out:
      std::stable_sort(kids.begin(), kids.end(),
                       [head](int a, int b) { return std::abs(a - head) < std::abs(b - head); });
      break;
  }
  return kids;
}

// Gold step sequence for `tree`; label_ids[i] is the label id of token i.
inline std::vector<ParseStep> gold_path(const DependencyTree& tree, ChildOrder order, std::span<const int> label_ids) {
  validate_tree(tree, false);
  if (label_ids.size() != tree.heads.size()) throw InvariantError("label id count differs from tree size");
  const std::size_t n = tree.n();
  std::vector<std::vector<int>> children(n + 1);
  for (std::size_t h = 0; h <= n; ++h) children[h] = ordered_children(tree, static_cast<int>(h), order);
  std::vector<std::size_t> next(n + 1, 0);
  std::vector<int> stack{0};
  std::vector<ParseStep> steps;
  steps.reserve(2 * n + 1);
  while (!stack.empty()) {
    const int h = stack.back();
    auto& kids = children[static_cast<std::size_t>(h)];
    auto& k = next[static_cast<std::size_t>(h)];
    if (k < kids.size()) {
      const int c = kids[k++];
      steps.push_back({c, label_ids[static_cast<std::size_t>(c)]});
      stack.push_back(c);
    } else {
      steps.push_back({h, -1});
      stack.pop_back();
    }
  }
  return steps;
}

inline std::vector<ParseStep> gold_path(const DependencyTree& tree, ChildOrder order = ChildOrder::inside_out) {
  std::vector<int> ids(tree.heads.size(), -1);
  for (std::size_t i = 1; i < ids.size(); ++i) ids[i] = 0;
  return gold_path(tree, order, ids);
}

inline DecoderState replay(std::size_t n, std::span<const ParseStep> steps, bool single_root = false) {
  DecoderState s(n, single_root);
  for (const auto& st : steps) s.apply(st);
  return s;
}

// Anything that scores pointer targets for a state and labels a new arc.
template <typename S>
concept PointerScorer = requires(S s, const DecoderState& st, int child) {
  { s.pointer_scores(st) } -> std::convertible_to<std::vector<double>>;
  { s.label_for(st, child) } -> std::convertible_to<int>;
};

// Highest-scoring legal target at every step; ties go to the lowest position.
inline int argmax_legal(const std::vector<double>& scores, const std::vector<bool>& legal) {
  int best = -1;
  for (std::size_t i = 0; i < legal.size(); ++i)
    if (legal[i] && (best < 0 || scores[i] > scores[static_cast<std::size_t>(best)])) best = static_cast<int>(i);
  if (best < 0) throw InvariantError("no legal transition");
  return best;
}

template <PointerScorer Scorer>
DecoderState decode_greedy(std::size_t n, Scorer& scorer, bool single_root = false) {
  DecoderState state(n, single_root);
  while (!state.terminal()) {
    const std::vector<double> scores = scorer.pointer_scores(state);
    const int target = argmax_legal(scores, state.legal_mask());
    ParseStep s{target, -1};
    if (target != state.top()) s.label = scorer.label_for(state, target);
    state.apply(s);
  }
  return state;
}

}  // namespace stackptr
