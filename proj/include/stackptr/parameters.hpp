#pragma once

// Parameter layout of the parser. Names are grouped by prefix:
//   embeddings.*  word / character / POS lookup tables
//   encoder.*     character CNN, self-attention, BiLSTM
//   decoder.*     decoder LSTM
//   biaffine.*    arc and label scorers (including their MLP projections)

#include <cmath>
#include <optional>
#include <string>

#include "stackptr/config.hpp"
#include "stackptr/rng.hpp"
#include "stackptr/tensor.hpp"
#include "stackptr/vocabulary.hpp"

namespace stackptr {

inline constexpr std::size_t kCharKernelWidth = 3;

inline std::string head_name(std::size_t i) { return "encoder.attn.head" + std::to_string(i); }

// Shape of every parameter for a given config and vocabulary, in store order.
inline std::vector<std::pair<std::string, Shape>> parameter_layout(const TrainConfig& c, const Vocabulary& v) {
  const std::size_t D = c.d_model(), H = static_cast<std::size_t>(c.d_h), E = c.encoder_dim();
  const std::size_t Dh = c.decoder_hidden(), A = c.arc_dim(), Lb = c.label_dim();
  const std::size_t heads = static_cast<std::size_t>(c.r), per_head = D / heads;
  const std::size_t F = static_cast<std::size_t>(c.num_filters), C = static_cast<std::size_t>(c.char_dim);
  const std::size_t L = std::max<std::size_t>(v.labels.size(), 1);

  std::vector<std::pair<std::string, Shape>> out = {
      {"embeddings.word", {v.words.size(), static_cast<std::size_t>(c.d_w)}},
      {"embeddings.char", {v.chars.size(), C}},
      {"embeddings.pos", {v.pos.size(), static_cast<std::size_t>(c.pos_dim)}},
      {"encoder.char_cnn.W", {F, kCharKernelWidth * C}},
      {"encoder.char_cnn.b", {F}},
  };
  for (std::size_t h = 0; h < heads; ++h)
    for (const char* m : {".Wq", ".Wk", ".Wv"}) out.push_back({head_name(h) + m, {per_head, D}});
  out.push_back({"encoder.attn.Wm", {D, D}});
  for (const char* dir : {"fwd", "bwd"}) {
    out.push_back({std::string("encoder.lstm.") + dir + ".W", {4 * H, D + H}});
    out.push_back({std::string("encoder.lstm.") + dir + ".b", {4 * H}});
  }
  out.push_back({"decoder.lstm.W", {4 * Dh, E + Dh}});
  out.push_back({"decoder.lstm.b", {4 * Dh}});
  out.insert(out.end(), {
                            {"biaffine.arc.dec_mlp.W", {A, Dh}},
                            {"biaffine.arc.dec_mlp.b", {A}},
                            {"biaffine.arc.enc_mlp.W", {A, E}},
                            {"biaffine.arc.enc_mlp.b", {A}},
                            {"biaffine.arc.U", {A, A}},
                            {"biaffine.arc.u_dec", {A}},
                            {"biaffine.arc.u_enc", {A}},
                            {"biaffine.arc.b", {1}},
                            {"biaffine.label.dec_mlp.W", {Lb, Dh}},
                            {"biaffine.label.dec_mlp.b", {Lb}},
                            {"biaffine.label.enc_mlp.W", {Lb, E}},
                            {"biaffine.label.enc_mlp.b", {Lb}},
                            {"biaffine.label.W", {L, Lb, Lb}},
                            {"biaffine.label.V", {L, 2 * Lb}},
                            {"biaffine.label.b", {L}},
                        });
  return out;
}

// Fresh value for one parameter; depends only on (seed, name, shape).
// Embedding tables: uniform ±√(3/dim). Arc scorer vectors and its scalar
// bias: uniform ±√(6/(k+1)); the pointer softmax cancels u_dec and b, so they
// never move from their initial draw. Other vectors (biases): zeros.
// Everything else: Glorot uniform.
inline Tensor initial_value(const std::string& name, const Shape& shape, std::uint64_t seed) {
  Rng rng = Rng(seed).derive(name);
  if (starts_with(name, "embeddings.")) {
    const double bound = std::sqrt(3.0 / static_cast<double>(shape.back()));
    return uniform_tensor(shape, -bound, bound, rng);
  }
  if (name == "biaffine.arc.u_dec" || name == "biaffine.arc.u_enc" || name == "biaffine.arc.b") {
    const double bound = std::sqrt(6.0 / static_cast<double>(shape_size(shape) + 1));
    return uniform_tensor(shape, -bound, bound, rng);
  }
  if (shape.size() == 1) return Tensor::zeros(shape);
  return glorot_uniform(shape, rng);
}

inline ParameterStore init_parameters(const TrainConfig& c, const Vocabulary& v,
                                      const std::optional<Tensor>& pretrained_words = std::nullopt) {
  c.validate();
  ParameterStore store(c.seed);
  for (const auto& [name, shape] : parameter_layout(c, v)) {
    if (name == "embeddings.word" && pretrained_words) {
      if (pretrained_words->shape != shape) throw ConfigError("pretrained embedding shape does not match vocabulary");
      store.add(name, *pretrained_words);
    } else {
      store.add(name, initial_value(name, shape, c.seed));
    }
  }
  return store;
}

}  // namespace stackptr
