#pragma once

// Toy treebanks from a small fixed grammar:
//   [DT] [JJ] NN(nsubj) [AD] VV(root) [DT] [JJ] NN(dobj) [P NN] PU
// A prepositional phrase hangs off the verb or the object depending only on
// the preposition word. Domains share the grammar and differ in lexicon.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "stackptr/rng.hpp"
#include "stackptr/treebank.hpp"

namespace stackptr {

struct Lexicon {
  std::map<std::string, std::vector<std::string>> words;  // by POS tag
  std::set<std::string> verbal_preps;                     // prepositions attaching to the verb
};

namespace detail {

inline std::string random_form(Rng& rng, std::set<std::string>& used) {
  static const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "tr"};
  static const char* nuclei[] = {"a", "e", "i", "o", "u", "ai", "ou"};
  for (;;) {
    std::string w;
    const std::size_t syllables = 2 + rng.index(2);
    for (std::size_t s = 0; s < syllables; ++s) {
      w += onsets[rng.index(std::size(onsets))];
      w += nuclei[rng.index(std::size(nuclei))];
    }
    if (used.insert(w).second) return w;
  }
}

inline const std::map<std::string, std::size_t>& lexicon_sizes() {
  static const std::map<std::string, std::size_t> sizes{{"NN", 24}, {"VV", 12}, {"JJ", 10}, {"DT", 4},
                                                        {"P", 6},   {"AD", 6},  {"PU", 2}};
  return sizes;
}

}  // namespace detail

inline Lexicon make_lexicon(std::uint64_t seed) {
  Rng rng = Rng(seed).derive("lexicon");
  std::set<std::string> used;
  Lexicon lex;
  for (const auto& [tag, count] : detail::lexicon_sizes())
    for (std::size_t i = 0; i < count; ++i) lex.words[tag].push_back(detail::random_form(rng, used));
  const auto& preps = lex.words["P"];
  for (std::size_t i = 0; i < preps.size(); i += 2) lex.verbal_preps.insert(preps[i]);
  return lex;
}

// A second domain keeping a fraction `overlap` of every open-class word list
// and replacing the rest with fresh forms. Closed classes (DT, P, PU) are shared.
inline Lexicon derive_domain(const Lexicon& base, double overlap, std::uint64_t seed) {
  Rng rng = Rng(seed).derive("domain");
  std::set<std::string> used;
  for (const auto& [tag, ws] : base.words) used.insert(ws.begin(), ws.end());
  Lexicon out = base;
  for (auto& [tag, ws] : out.words) {
    if (tag == "DT" || tag == "P" || tag == "PU") continue;
    const auto keep = static_cast<std::size_t>(overlap * static_cast<double>(ws.size()) + 0.5);
    for (std::size_t i = keep; i < ws.size(); ++i) ws[i] = detail::random_form(rng, used);
  }
  return out;
}

inline AnnotatedSentence generate_sentence(const Lexicon& lex, Rng& rng) {
  AnnotatedSentence ex;
  auto pick = [&](const std::string& tag) {
    const auto& ws = lex.words.at(tag);
    return ws[rng.index(ws.size())];
  };
  // Tokens first with symbolic heads, resolved after positions are known.
  struct Item {
    std::string form, pos, label;
    int head_ref;  // index into items, -1 for ROOT
  };
  std::vector<Item> items;
  auto noun_phrase = [&](int head_ref, const std::string& label) {
    const bool det = rng.bernoulli(0.6), adj = rng.bernoulli(0.4);
    const int base = static_cast<int>(items.size());
    const int noun = base + (det ? 1 : 0) + (adj ? 1 : 0);
    if (det) items.push_back({pick("DT"), "DT", "det", noun});
    if (adj) items.push_back({pick("JJ"), "JJ", "amod", noun});
    items.push_back({pick("NN"), "NN", label, head_ref});
    return noun;
  };
  const int verb_slot = -2;  // placeholder until the verb is placed
  noun_phrase(verb_slot, "nsubj");
  if (rng.bernoulli(0.3)) items.push_back({pick("AD"), "AD", "advmod", verb_slot});
  const int verb = static_cast<int>(items.size());
  items.push_back({pick("VV"), "VV", "root", -1});
  int obj = -1;
  if (rng.bernoulli(0.8)) obj = noun_phrase(verb, "dobj");
  if (rng.bernoulli(0.5)) {
    const std::string p = pick("P");
    const int attach = obj >= 0 && !lex.verbal_preps.count(p) ? obj : verb;
    const int prep = static_cast<int>(items.size());
    items.push_back({p, "P", "prep", attach});
    noun_phrase(prep, "pobj");
  }
  items.push_back({pick("PU"), "PU", "punct", verb});
  for (auto& it : items) {
    if (it.head_ref == verb_slot) it.head_ref = verb;
    ex.sentence.add(it.form, it.pos);
    ex.tree.add(it.head_ref < 0 ? 0 : it.head_ref + 1, it.label);
  }
  return ex;
}

inline std::vector<AnnotatedSentence> generate_corpus(const Lexicon& lex, std::size_t count, Rng& rng) {
  std::vector<AnnotatedSentence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_sentence(lex, rng));
  return out;
}

// Random well-formed tree over n tokens (possibly non-projective,
// single root) with labels drawn from `labels`.
inline DependencyTree random_tree(std::size_t n, Rng& rng, const std::vector<std::string>& labels) {
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i + 1);
  rng.shuffle(order);
  std::vector<int> heads(n + 1, kNoHead);
  heads[static_cast<std::size_t>(order[0])] = 0;
  for (std::size_t k = 1; k < n; ++k) heads[static_cast<std::size_t>(order[k])] = order[rng.index(k)];
  DependencyTree t;
  for (std::size_t i = 1; i <= n; ++i) t.add(heads[i], labels[rng.index(labels.size())]);
  return t;
}

}  // namespace stackptr
