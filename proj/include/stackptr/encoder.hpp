#pragma once

// Token representation, multi-head self-attention and the BiLSTM encoder.

#include <cmath>
#include <span>
#include <vector>

#include "stackptr/config.hpp"
#include "stackptr/functional.hpp"
#include "stackptr/graph.hpp"
#include "stackptr/parameters.hpp"
#include "stackptr/treebank.hpp"
#include "stackptr/vocabulary.hpp"

namespace stackptr {

// Vocabulary ids for every position of a sentence, ROOT included.
struct SentenceIds {
  std::vector<int> words;
  std::vector<int> pos;
  std::vector<std::vector<int>> chars;

  std::size_t length() const { return words.size(); }
};

inline SentenceIds index_sentence(const Sentence& s, const Vocabulary& v) {
  SentenceIds ids;
  ids.words.push_back(kRootId);
  ids.pos.push_back(kRootId);
  ids.chars.push_back({kRootId});
  for (std::size_t i = 1; i <= s.n(); ++i) {
    const Token& t = s.tokens[i];
    ids.words.push_back(v.word_id(t.form));
    ids.pos.push_back(v.pos_id(t.pos));
    std::vector<int> cs;
    for (char32_t c : t.chars) cs.push_back(v.char_id(c));
    if (cs.empty()) throw InvariantError("empty character sequence for token " + std::to_string(i));
    ids.chars.push_back(std::move(cs));
  }
  return ids;
}

struct CharCnnWeights {
  Tensor* table;
  Tensor* W;
  Tensor* b;
};

struct AttentionWeights {
  std::vector<Tensor*> q, k, v;
  Tensor* m;
  std::size_t heads() const { return q.size(); }
};

struct LstmWeights {
  Tensor* W;
  Tensor* b;
};

struct EncoderWeights {
  Tensor* word;
  Tensor* pos;
  CharCnnWeights chars;
  AttentionWeights attn;
  LstmWeights fwd, bwd;

  static EncoderWeights bind(ParameterStore& p, std::size_t heads) {
    EncoderWeights w;
    w.word = &p.at("embeddings.word");
    w.pos = &p.at("embeddings.pos");
    w.chars = {&p.at("embeddings.char"), &p.at("encoder.char_cnn.W"), &p.at("encoder.char_cnn.b")};
    for (std::size_t h = 0; h < heads; ++h) {
      w.attn.q.push_back(&p.at(head_name(h) + ".Wq"));
      w.attn.k.push_back(&p.at(head_name(h) + ".Wk"));
      w.attn.v.push_back(&p.at(head_name(h) + ".Wv"));
    }
    w.attn.m = &p.at("encoder.attn.Wm");
    w.fwd = {&p.at("encoder.lstm.fwd.W"), &p.at("encoder.lstm.fwd.b")};
    w.bwd = {&p.at("encoder.lstm.bwd.W"), &p.at("encoder.lstm.bwd.b")};
    return w;
  }
};

// Width-3 convolution over character embeddings followed by max-over-time
// pooling. Sequences shorter than the kernel are right-padded with PAD.
inline Var char_cnn(Graph& g, const CharCnnWeights& w, std::span<const int> char_ids) {
  if (char_ids.empty()) throw InvariantError("char_cnn: empty character sequence");
  std::vector<int> ids(char_ids.begin(), char_ids.end());
  while (ids.size() < kCharKernelWidth) ids.push_back(kPadId);
  Var x = g.lookup(*w.table, std::move(ids));
  Var windows = g.unfold_rows(x, kCharKernelWidth);
  return g.max_rows(g.linear(windows, g.param(*w.W), g.param(*w.b)));
}

// One row per position: [word ; char-CNN ; POS].
inline Var embed_tokens(Graph& g, const EncoderWeights& w, const SentenceIds& ids) {
  Var words = g.lookup(*w.word, ids.words);
  Var tags = g.lookup(*w.pos, ids.pos);
  std::vector<Var> rows;
  rows.reserve(ids.length());
  for (const auto& cs : ids.chars) rows.push_back(char_cnn(g, w.chars, cs));
  Var chars = g.concat_rows(rows);
  return g.concat_cols({words, chars, tags});
}

inline double attention_scale(std::size_t d_model, std::size_t heads, AttentionScale mode) {
  return std::sqrt(static_cast<double>(mode == AttentionScale::per_head ? d_model / heads : d_model));
}

// softmax(Q Kᵀ / scale) V per head, heads concatenated then mixed by W^M.
// X is (m × d_model); the output has the same shape. When `probs` is given
// it receives each head's (m × m) attention matrix.
inline Var multi_head_self_attention(Graph& g, Var x, const AttentionWeights& w, AttentionScale mode,
                                     std::vector<Var>* probs = nullptr) {
  const std::size_t d = g.cols(x), heads = w.heads();
  if (heads == 0 || d % heads != 0) throw ConfigError("model width is not divisible by the head count");
  const double inv = 1.0 / attention_scale(d, heads, mode);
  std::vector<Var> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var q = g.matmul_nt(x, g.param(*w.q[h]));
    Var k = g.matmul_nt(x, g.param(*w.k[h]));
    Var v = g.matmul_nt(x, g.param(*w.v[h]));
    Var p = g.softmax_rows(g.scale(g.matmul_nt(q, k), inv));
    if (probs) probs->push_back(p);
    outs.push_back(g.matmul(p, v));
  }
  return g.matmul_nt(g.concat_cols(outs), g.param(*w.m));
}

// Runs one LSTM over the rows of x (reversed when `backward`), returning the
// hidden state per row in original order. A single recurrent-dropout mask is
// shared by all time steps of the sequence.
inline std::vector<Var> lstm_sequence(Graph& g, Var x, const LstmWeights& w, bool backward, double p_rnn,
                                      bool training, Rng& rng) {
  const std::size_t m = g.rows(x), hidden = w.b->size() / 4;
  Var W = g.param(*w.W), b = g.param(*w.b);
  LstmCarry carry = lstm_zero_state(g, hidden);
  const bool drop = training && p_rnn > 0.0;
  std::vector<double> mask = drop ? dropout_mask(hidden, p_rnn, rng) : std::vector<double>{};
  std::vector<Var> hs(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t t = backward ? m - 1 - k : k;
    LstmCarry in = carry;
    if (drop) in.h = g.mul_const(in.h, mask);
    carry = lstm_cell(g, g.row(x, t), in, W, b);
    hs[t] = carry.h;
  }
  return hs;
}

// Forward ⊕ backward hidden states, one (2·d_h)-wide row per input row.
inline Var bilstm_encode(Graph& g, Var h, const LstmWeights& fwd, const LstmWeights& bwd, double p_rnn, bool training,
                         Rng& rng) {
  if (g.rows(h) == 0) throw InvariantError("bilstm_encode: empty input");
  auto f = lstm_sequence(g, h, fwd, false, p_rnn, training, rng);
  auto b = lstm_sequence(g, h, bwd, true, p_rnn, training, rng);
  std::vector<Var> rows(f.size());
  for (std::size_t t = 0; t < f.size(); ++t) rows[t] = g.concat_cols({f[t], b[t]});
  return g.concat_rows(rows);
}

// Intermediate values of one encoder pass, for inspection and tests.
struct EncoderTrace {
  Var tokens;
  Var attended;
  std::vector<Var> attention_probs;
};

// Full encoder: token rows -> input dropout -> self-attention -> BiLSTM ->
// output dropout. Returns the (n+1) × 2·d_h encoder states.
inline Var encode(Graph& g, const EncoderWeights& w, const TrainConfig& cfg, const SentenceIds& ids, bool training,
                  Rng& rng, EncoderTrace* trace = nullptr) {
  Var x = embed_tokens(g, w, ids);
  Var xd = dropout(g, x, cfg.p_in, training, rng);
  std::vector<Var>* probs = trace ? &trace->attention_probs : nullptr;
  Var a = multi_head_self_attention(g, xd, w.attn, cfg.attention_scale, probs);
  Var e = bilstm_encode(g, a, w.fwd, w.bwd, cfg.p_rnn, training, rng);
  if (trace) {
    trace->tokens = x;
    trace->attended = a;
  }
  return dropout(g, e, cfg.p_out, training, rng);
}

}  // namespace stackptr
