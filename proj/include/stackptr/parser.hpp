#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stackptr/config.hpp"
#include "stackptr/decoder.hpp"
#include "stackptr/encoder.hpp"
#include "stackptr/parameters.hpp"
#include "stackptr/transition.hpp"
#include "stackptr/treebank.hpp"
#include "stackptr/vocabulary.hpp"

namespace stackptr {

// A stack-pointer parser: configuration, frozen vocabulary and parameters.
class Parser {
 public:
  Parser(TrainConfig config, Vocabulary vocab, ParameterStore params)
      : config_(std::move(config)), vocab_(std::move(vocab)), params_(std::move(params)) {
    config_.validate();
    vocab_.freeze();
  }

  // Fresh parameters for a vocabulary built from `train`.
  static Parser create(const TrainConfig& config, std::span<const AnnotatedSentence> train,
                       const std::optional<Tensor>& pretrained_words = std::nullopt) {
    Vocabulary v = build_vocabulary(train, static_cast<std::size_t>(config.min_word_count));
    ParameterStore p = init_parameters(config, v, pretrained_words);
    return Parser(config, std::move(v), std::move(p));
  }

  const TrainConfig& config() const { return config_; }
  TrainConfig& config() { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  // Label id per position (index 0 unused, set to -1).
  std::vector<int> label_ids(const DependencyTree& tree) const {
    std::vector<int> ids(tree.heads.size(), -1);
    for (std::size_t i = 1; i < ids.size(); ++i) {
      ids[i] = vocab_.label_id(tree.labels[i]);
      if (ids[i] < 0) throw InvariantError("label '" + tree.labels[i] + "' is not in the vocabulary");
    }
    return ids;
  }

  std::vector<ParseStep> gold_steps(const DependencyTree& tree) const {
    return gold_path(tree, config_.child_order, label_ids(tree));
  }

  Var encode(Graph& g, const Sentence& s, bool training, Rng& rng, EncoderTrace* trace = nullptr) {
    EncoderWeights w = EncoderWeights::bind(params_, static_cast<std::size_t>(config_.r));
    return stackptr::encode(g, w, config_, index_sentence(s, vocab_), training, rng, trace);
  }

  PathLikelihood log_likelihood(Graph& g, const AnnotatedSentence& ex, bool training, Rng& rng) {
    const auto steps = gold_steps(ex.tree);
    Var e = encode(g, ex.sentence, training, rng);
    DecoderWeights dw = DecoderWeights::bind(params_);
    PointerNetwork net(g, dw, e, config_, training, rng);
    return path_log_likelihood(net, ex.sentence.n(), steps, config_.single_root);
  }

  // Greedy parse with dropout disabled.
  DependencyTree parse(const Sentence& s) {
    Graph g(false);
    Rng rng(0);
    Var e = encode(g, s, false, rng);
    DecoderWeights dw = DecoderWeights::bind(params_);
    PointerNetwork net(g, dw, e, config_, false, rng);
    NetworkScorer scorer(net);
    DecoderState st = decode_greedy(s.n(), scorer, config_.single_root);
    return st.to_tree(vocab_.labels.symbols());
  }

  std::vector<DependencyTree> parse_all(std::span<const AnnotatedSentence> corpus) {
    std::vector<DependencyTree> out;
    out.reserve(corpus.size());
    for (const auto& ex : corpus) out.push_back(parse(ex.sentence));
    return out;
  }

  // Encoder states in inference mode, row-major (n+1) × 2·d_h.
  std::vector<double> encoder_states(const Sentence& s) {
    Graph g(false);
    Rng rng(0);
    auto v = g.value(encode(g, s, false, rng));
    return {v.begin(), v.end()};
  }

 private:
  TrainConfig config_;
  Vocabulary vocab_;
  ParameterStore params_;
};

}  // namespace stackptr
