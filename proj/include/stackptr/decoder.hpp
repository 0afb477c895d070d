#pragma once

// Pointer decoder: decoder LSTM, biaffine arc scorer, biaffine label
// classifier, teacher-forced path likelihood and greedy decoding.

#include <cmath>
#include <span>
#include <vector>

#include "stackptr/config.hpp"
#include "stackptr/functional.hpp"
#include "stackptr/graph.hpp"
#include "stackptr/tensor.hpp"
#include "stackptr/transition.hpp"

namespace stackptr {

struct MlpWeights {
  Tensor* W;
  Tensor* b;
};

struct DecoderWeights {
  Tensor* lstm_W;
  Tensor* lstm_b;
  MlpWeights arc_dec, arc_enc;
  Tensor* U;
  Tensor* u_dec;
  Tensor* u_enc;
  Tensor* arc_b;
  MlpWeights label_dec, label_enc;
  Tensor* label_W;  // (labels, k, k)
  Tensor* label_V;  // (labels, 2k)
  Tensor* label_b;  // (labels)

  std::size_t label_count() const { return label_b->size(); }

  static DecoderWeights bind(ParameterStore& p) {
    DecoderWeights w;
    w.lstm_W = &p.at("decoder.lstm.W");
    w.lstm_b = &p.at("decoder.lstm.b");
    w.arc_dec = {&p.at("biaffine.arc.dec_mlp.W"), &p.at("biaffine.arc.dec_mlp.b")};
    w.arc_enc = {&p.at("biaffine.arc.enc_mlp.W"), &p.at("biaffine.arc.enc_mlp.b")};
    w.U = &p.at("biaffine.arc.U");
    w.u_dec = &p.at("biaffine.arc.u_dec");
    w.u_enc = &p.at("biaffine.arc.u_enc");
    w.arc_b = &p.at("biaffine.arc.b");
    w.label_dec = {&p.at("biaffine.label.dec_mlp.W"), &p.at("biaffine.label.dec_mlp.b")};
    w.label_enc = {&p.at("biaffine.label.enc_mlp.W"), &p.at("biaffine.label.enc_mlp.b")};
    w.label_W = &p.at("biaffine.label.W");
    w.label_V = &p.at("biaffine.label.V");
    w.label_b = &p.at("biaffine.label.b");
    return w;
  }
};

inline Var mlp(Graph& g, Var x, const MlpWeights& w) { return g.elu(g.linear(x, g.param(*w.W), g.param(*w.b))); }

// score_i = dᵀ U e_i + u_decᵀ d + u_encᵀ e_i + b for every row e_i of `enc`.
// d is (1 × k), enc is (m × k'), U is (k × k'); returns (1 × m).
inline Var arc_biaffine(Graph& g, Var d, Var enc, Var U, Var u_dec, Var u_enc, Var b) {
  const std::size_t m = g.rows(enc);
  Var bilinear = g.matmul_nt(g.matmul(d, U), enc);
  Var enc_term = g.reshape(g.matmul_nt(enc, u_enc), 1, m);
  Var shared = g.add(g.matmul_nt(d, u_dec), g.reshape(b, 1, 1));
  Var ones = g.constant(1, m, std::vector<double>(m, 1.0));
  return g.add(g.add(bilinear, enc_term), g.matmul(shared, ones));
}

// Plain-value arc scores with masked positions set to −infinity.
inline std::vector<double> biaffine_score(std::span<const double> d, const Tensor& enc, const std::vector<bool>& mask,
                                          const Tensor& U, const Tensor& u_dec, const Tensor& u_enc, double b) {
  Graph g;
  Var dv = g.constant(1, d.size(), {d.begin(), d.end()});
  Var ev = g.constant(enc.rows(), enc.cols(), enc.values);
  Var Uv = g.constant(U.rows(), U.cols(), U.values);
  Var ud = g.constant(1, u_dec.size(), u_dec.values);
  Var ue = g.constant(1, u_enc.size(), u_enc.values);
  Var bv = g.constant(1, 1, {b});
  auto s = g.value(arc_biaffine(g, dv, ev, Uv, ud, ue, bv));
  std::vector<double> out(s.begin(), s.end());
  if (mask.size() != out.size()) throw InvariantError("biaffine_score: mask length differs from position count");
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!mask[i]) out[i] = kNegInf;
  return out;
}

// Label logits: s_l = dᵀ W_l c + V_l [d ; c] + b_l. d and c are (1 × k).
inline Var label_logits(Graph& g, Var d, Var c, Var W, Var V, Var b, std::size_t labels) {
  const std::size_t k = g.cols(d);
  Var Wc = g.reshape(g.matmul_nt(c, W), labels, k);
  Var bilinear = g.matmul_nt(d, Wc);
  Var linear = g.matmul_nt(g.concat_cols({d, c}), V);
  return g.add(g.add(bilinear, linear), b);
}

// Label distribution for plain-value projected states d (decoder side) and
// c (child side); W is (labels, k, k), V is (labels, 2k), b is (labels).
inline std::vector<double> label_classify(std::span<const double> d, std::span<const double> c, const Tensor& W,
                                          const Tensor& V, const Tensor& b) {
  Graph g;
  Var dv = g.constant(1, d.size(), {d.begin(), d.end()});
  Var cv = g.constant(1, c.size(), {c.begin(), c.end()});
  Var Wv = g.constant(W.rows(), W.cols(), W.values);
  Var Vv = g.constant(V.rows(), V.cols(), V.values);
  Var bv = g.constant(1, b.size(), b.values);
  return softmax(g.value(label_logits(g, dv, cv, Wv, Vv, bv, b.size())));
}

// Per-sentence decoder: owns the decoder LSTM carry and the projected
// encoder states; advances one LSTM step per call to `advance`.
class PointerNetwork {
 public:
  PointerNetwork(Graph& g, const DecoderWeights& w, Var encoder_states, const TrainConfig& cfg, bool training,
                 Rng& rng)
      : g_(g), w_(w), enc_(encoder_states), cfg_(cfg), training_(training), rng_(rng) {
    const std::size_t hidden = w.lstm_b->size() / 4;
    carry_ = lstm_zero_state(g, hidden);
    if (training && cfg.p_rnn > 0.0) rnn_mask_ = dropout_mask(hidden, cfg.p_rnn, rng);
    arc_enc_ = mlp(g, enc_, w.arc_enc);
    label_enc_ = mlp(g, enc_, w.label_enc);
    lstm_W_ = g.param(*w.lstm_W);
    lstm_b_ = g.param(*w.lstm_b);
    U_ = g.param(*w.U);
    u_dec_ = g.param(*w.u_dec);
    u_enc_ = g.param(*w.u_enc);
    arc_b_ = g.param(*w.arc_b);
  }

  // Feeds the encoder state of `top` to the decoder LSTM and returns the
  // raw arc scores over all positions (1 × (n+1)).
  Var advance(int top) {
    LstmCarry in = carry_;
    if (!rnn_mask_.empty()) in.h = g_.mul_const(in.h, rnn_mask_);
    carry_ = lstm_cell(g_, g_.row(enc_, static_cast<std::size_t>(top)), in, lstm_W_, lstm_b_);
    Var h = dropout(g_, carry_.h, cfg_.p_out, training_, rng_);
    dec_out_ = h;
    Var d = mlp(g_, h, w_.arc_dec);
    return arc_biaffine(g_, d, arc_enc_, U_, u_dec_, u_enc_, arc_b_);
  }

  // Label logits for an arc from the current decoder state to `child`.
  Var labels(int child) {
    Var d = mlp(g_, dec_out_, w_.label_dec);
    Var c = g_.row(label_enc_, static_cast<std::size_t>(child));
    return label_logits(g_, d, c, g_.param(*w_.label_W), g_.param(*w_.label_V), g_.param(*w_.label_b),
                        w_.label_count());
  }

  Graph& graph() { return g_; }

 private:
  Graph& g_;
  const DecoderWeights& w_;
  Var enc_;
  const TrainConfig& cfg_;
  bool training_;
  Rng& rng_;
  LstmCarry carry_;
  std::vector<double> rnn_mask_;
  Var arc_enc_, label_enc_, lstm_W_, lstm_b_, U_, u_dec_, u_enc_, arc_b_;
  Var dec_out_;
};

struct PathLikelihood {
  Var total;  // arc + label log-likelihood (≤ 0)
  double arc = 0.0;
  double label = 0.0;
  std::vector<double> step_log_probs;   // one per transition
  std::vector<double> label_log_probs;  // one per arc
};

// Teacher-forced log P(tree) = Σ_steps log softmax(arc scores)[gold]
// + Σ_arcs log softmax(label logits)[gold label].
inline PathLikelihood path_log_likelihood(PointerNetwork& net, std::size_t n, std::span<const ParseStep> gold,
                                          bool single_root) {
  Graph& g = net.graph();
  DecoderState state(n, single_root);
  std::vector<Var> terms;
  PathLikelihood out;
  for (const ParseStep& s : gold) {
    const int top = state.top();
    Var scores = net.advance(top);
    Var lp = g.log_softmax_pick(scores, state.legal_mask(), static_cast<std::size_t>(s.target));
    out.step_log_probs.push_back(g.scalar(lp));
    out.arc += g.scalar(lp);
    terms.push_back(lp);
    if (s.target != top) {
      if (s.label < 0) throw InvariantError("gold arc without a label");
      Var ll = g.log_softmax_pick(net.labels(s.target), static_cast<std::size_t>(s.label));
      out.label_log_probs.push_back(g.scalar(ll));
      out.label += g.scalar(ll);
      terms.push_back(ll);
    }
    state.apply(s);
  }
  if (!state.terminal()) throw InvariantError("gold path does not terminate");
  out.total = g.concat_cols(terms);
  out.total = g.sum(out.total);
  return out;
}

// Adapts a PointerNetwork to the greedy decoding loop.
class NetworkScorer {
 public:
  explicit NetworkScorer(PointerNetwork& net) : net_(net) {}

  std::vector<double> pointer_scores(const DecoderState& s) {
    Var v = net_.advance(s.top());
    auto vals = net_.graph().value(v);
    return {vals.begin(), vals.end()};
  }

  int label_for(const DecoderState&, int child) {
    auto logits = net_.graph().value(net_.labels(child));
    int best = 0;
    for (std::size_t l = 1; l < logits.size(); ++l)
      if (logits[l] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(l);
    return best;
  }

 private:
  PointerNetwork& net_;
};

}  // namespace stackptr
