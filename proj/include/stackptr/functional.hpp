#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "stackptr/errors.hpp"
#include "stackptr/graph.hpp"
#include "stackptr/rng.hpp"
#include "stackptr/tensor.hpp"

namespace stackptr {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Probability vector from scores; −infinity entries are masked and map to 0.
inline std::vector<double> softmax(std::span<const double> scores) {
  if (scores.empty()) throw InvariantError("softmax of an empty vector");
  const double mx = *std::max_element(scores.begin(), scores.end());
  if (mx == kNegInf) throw NumericError("fully masked distribution");
  std::vector<double> p(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) z += (p[i] = scores[i] == kNegInf ? 0.0 : std::exp(scores[i] - mx));
  for (auto& x : p) x /= z;
  return p;
}

// Inverted-dropout keep mask: entries are 0 or 1/(1-rate).
inline std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
  std::vector<double> mask(n);
  const double keep = 1.0 - rate;
  for (auto& m : mask) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return mask;
}

inline Tensor dropout(const Tensor& input, double rate, bool training, Rng& rng) {
  if (!training || rate == 0.0) return input;
  Tensor out = input;
  auto mask = dropout_mask(out.size(), rate, rng);
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= mask[i];
  return out;
}

inline Var dropout(Graph& g, Var x, double rate, bool training, Rng& rng) {
  if (!training || rate == 0.0) return x;
  return g.mul_const(x, dropout_mask(g.numel(x), rate, rng));
}

struct LstmCarry {
  Var h;
  Var c;
};

// Standard LSTM cell. W is (4·hidden × (in + hidden)) with gate blocks in
// the order input, forget, candidate, output; b is (4·hidden).
inline LstmCarry lstm_cell(Graph& g, Var x, LstmCarry prev, Var w, Var b) {
  const std::size_t hidden = g.cols(prev.h);
  Var gates = g.linear(g.concat_cols({x, prev.h}), w, b);
  Var i = g.sigmoid(g.slice_cols(gates, 0, hidden));
  Var f = g.sigmoid(g.slice_cols(gates, hidden, hidden));
  Var cand = g.tanh(g.slice_cols(gates, 2 * hidden, hidden));
  Var o = g.sigmoid(g.slice_cols(gates, 3 * hidden, hidden));
  Var c = g.add(g.mul(f, prev.c), g.mul(i, cand));
  Var h = g.mul(o, g.tanh(c));
  return {h, c};
}

inline LstmCarry lstm_zero_state(Graph& g, std::size_t hidden) {
  Var z = g.constant(1, hidden, std::vector<double>(hidden, 0.0));
  return {z, z};
}

}  // namespace stackptr
