#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"

using namespace stackptr;

namespace {

using Matrix = std::vector<std::vector<double>>;

Matrix to_matrix(const Graph& g, Var v) {
  Matrix m(g.rows(v));
  for (std::size_t r = 0; r < m.size(); ++r) m[r] = g.row_values(v, r);
  return m;
}

Matrix rows_of(const Tensor& t) {
  Matrix m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t(r, c);
  return m;
}

// a · bᵀ
Matrix mul_nt(const Matrix& a, const Matrix& b) {
  Matrix out(a.size(), std::vector<double>(b.size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      for (std::size_t k = 0; k < a[i].size(); ++k) out[i][j] += a[i][k] * b[j][k];
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a[0].size(), std::vector<double>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) out[j][i] = a[i][j];
  return out;
}

struct Fixture {
  TrainConfig cfg;
  Vocabulary vocab;
  ParameterStore params;
  EncoderWeights w;

  explicit Fixture(TrainConfig c) : cfg(c), vocab(build_vocabulary(testutil::small_corpus(), 1)) {
    params = init_parameters(cfg, vocab);
    w = EncoderWeights::bind(params, static_cast<std::size_t>(cfg.r));
  }
  SentenceIds ids(std::initializer_list<std::string> forms) const {
    Sentence s;
    for (const auto& f : forms) s.add(f, "NN");
    return index_sentence(s, vocab);
  }
};

Var random_input(Graph& g, std::size_t m, std::size_t d, Rng& rng) {
  std::vector<double> v(m * d);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return g.constant(m, d, v);
}

}  // namespace

TEST(EncoderShapes, DefaultConfiguration) {
  Fixture f{TrainConfig{}};
  Graph g(false);
  Rng rng(0);
  auto ids = f.ids({"the", "cat", "sleeps"});
  Var chars = char_cnn(g, f.w.chars, ids.chars[2]);
  EXPECT_EQ(g.rows(chars), 1u);
  EXPECT_EQ(g.cols(chars), 50u);
  Var tokens = embed_tokens(g, f.w, ids);
  EXPECT_EQ(g.rows(tokens), 4u);
  EXPECT_EQ(g.cols(tokens), 400u);
  EncoderTrace trace;
  Var e = encode(g, f.w, f.cfg, ids, false, rng, &trace);
  EXPECT_EQ(g.rows(trace.attended), 4u);
  EXPECT_EQ(g.cols(trace.attended), 400u);
  EXPECT_EQ(g.rows(e), 4u);
  EXPECT_EQ(g.cols(e), 512u);
  EXPECT_EQ(trace.attention_probs.size(), 4u);
}

TEST(EncoderShapes, WidthNotDivisibleByHeads) {
  TrainConfig c = testutil::tiny_config();  // d_model = 4 + 5 + 3 = 12
  c.r = 5;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(CharCnn, ShortWordsArePaddedWithPad) {
  Fixture f{testutil::tiny_config()};
  Graph g(false);
  const int c = f.vocab.char_id(U'a');
  Var one = char_cnn(g, f.w.chars, std::vector<int>{c});
  Var padded = char_cnn(g, f.w.chars, std::vector<int>{c, kPadId, kPadId});
  EXPECT_EQ(to_matrix(g, one), to_matrix(g, padded));
  EXPECT_THROW(char_cnn(g, f.w.chars, std::vector<int>{}), InvariantError);
}

TEST(CharCnn, CharacterOrderMatters) {
  Fixture f{testutil::tiny_config()};
  Graph g(false);
  const int a = f.vocab.char_id(U'a'), t = f.vocab.char_id(U't');
  Var ab = char_cnn(g, f.w.chars, std::vector<int>{a, t});
  Var ba = char_cnn(g, f.w.chars, std::vector<int>{t, a});
  EXPECT_NE(to_matrix(g, ab), to_matrix(g, ba));
}

TEST(TokenRepresentation, UnknownWordUsesUnkRow) {
  Fixture f{testutil::tiny_config()};
  Graph g(false);
  auto ids = f.ids({"zebra"});
  EXPECT_EQ(ids.words[1], kUnkId);
  Var tokens = embed_tokens(g, f.w, ids);
  const Tensor& table = f.params.at("embeddings.word");
  for (std::size_t j = 0; j < table.cols(); ++j) EXPECT_EQ(g.value(tokens, 1, j), table(kUnkId, j));
}

TEST(TokenRepresentation, RootRowUsesRootIds) {
  Fixture f{testutil::tiny_config()};
  auto ids = f.ids({"cat"});
  EXPECT_EQ(ids.words[0], kRootId);
  EXPECT_EQ(ids.pos[0], kRootId);
  EXPECT_EQ(ids.chars[0], std::vector<int>{kRootId});
}

TEST(TokenRepresentation, IdenticalTokensGiveIdenticalRows) {
  Fixture f{testutil::tiny_config()};
  Graph g(false);
  Var tokens = embed_tokens(g, f.w, f.ids({"the", "cat", "the"}));
  EXPECT_EQ(g.row_values(tokens, 1), g.row_values(tokens, 3));
  EXPECT_NE(g.row_values(tokens, 1), g.row_values(tokens, 2));
}

TEST(SelfAttention, RowsAreDistributions) {
  Fixture f{testutil::tiny_config()};
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Graph g(false);
    Var x = random_input(g, 1 + rng.index(8), f.cfg.d_model(), rng);
    std::vector<Var> probs;
    multi_head_self_attention(g, x, f.w.attn, f.cfg.attention_scale, &probs);
    ASSERT_EQ(probs.size(), 3u);
    for (Var p : probs)
      for (std::size_t r = 0; r < g.rows(p); ++r) {
        auto row = g.row_values(p, r);
        EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-12);
        for (double v : row) EXPECT_GE(v, 0.0);
      }
  }
}

TEST(SelfAttention, SingleRowIsLinear) {
  Fixture f{testutil::tiny_config()};
  Rng rng(6);
  Graph g(false);
  Var x = random_input(g, 1, f.cfg.d_model(), rng);
  Var out = multi_head_self_attention(g, x, f.w.attn, f.cfg.attention_scale);
  // One row attends only to itself: output = [x Wvᵀ per head] Wmᵀ.
  Matrix X = to_matrix(g, x), heads(1);
  for (Tensor* v : f.w.attn.v) {
    auto part = mul_nt(X, rows_of(*v))[0];
    heads[0].insert(heads[0].end(), part.begin(), part.end());
  }
  auto expect = mul_nt(heads, rows_of(*f.w.attn.m))[0];
  auto got = g.row_values(out, 0);
  for (std::size_t j = 0; j < expect.size(); ++j) EXPECT_NEAR(got[j], expect[j], 1e-12);
}

TEST(SelfAttention, SingleHeadMatchesDirectFormula) {
  TrainConfig c = testutil::tiny_config();
  c.r = 1;
  Fixture f{c};
  Rng rng(7);
  Graph g(false);
  const std::size_t m = 4, d = c.d_model();
  Var x = random_input(g, m, d, rng);
  Var out = multi_head_self_attention(g, x, f.w.attn, AttentionScale::per_head);
  Matrix X = to_matrix(g, x);
  Matrix Q = mul_nt(X, rows_of(*f.w.attn.q[0])), K = mul_nt(X, rows_of(*f.w.attn.k[0]));
  Matrix V = mul_nt(X, rows_of(*f.w.attn.v[0]));
  Matrix S = mul_nt(Q, K);
  for (auto& row : S) {
    double mx = *std::max_element(row.begin(), row.end()), z = 0.0;
    for (double& s : row) z += (s = std::exp((s - mx) / std::sqrt(static_cast<double>(d))));
    for (double& s : row) s /= z;
  }
  Matrix A = mul_nt(S, transpose(V));
  Matrix expect = mul_nt(A, rows_of(*f.w.attn.m));
  Matrix got = to_matrix(g, out);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(got[i][j], expect[i][j], 1e-12);
}

TEST(SelfAttention, ScaleModes) {
  EXPECT_DOUBLE_EQ(attention_scale(400, 4, AttentionScale::per_head), 10.0);
  EXPECT_DOUBLE_EQ(attention_scale(400, 4, AttentionScale::model_dim), 20.0);
}

TEST(SelfAttention, PermutationCovariant) {
  Fixture f{testutil::tiny_config()};
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 2 + rng.index(7), d = f.cfg.d_model();
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Graph g(false);
    Var x = random_input(g, m, d, rng);
    std::vector<double> px;
    for (std::size_t i = 0; i < m; ++i) {
      auto r = g.row_values(x, perm[i]);
      px.insert(px.end(), r.begin(), r.end());
    }
    Var y = multi_head_self_attention(g, x, f.w.attn, f.cfg.attention_scale);
    Var py = multi_head_self_attention(g, g.constant(m, d, px), f.w.attn, f.cfg.attention_scale);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(g.value(py, i, j), g.value(y, perm[i], j), 1e-8);
  }
}

TEST(BiLstm, DirectionalIndependence) {
  Fixture f{testutil::tiny_config()};
  Rng rng(9);
  const std::size_t m = 6, d = f.cfg.d_model(), H = static_cast<std::size_t>(f.cfg.d_h), t = 3;
  Graph g(false);
  Var x = random_input(g, m, d, rng);
  std::vector<double> later(g.value(x).begin(), g.value(x).end()), earlier = later;
  for (std::size_t j = 0; j < d; ++j) {
    later[(m - 1) * d + j] += 1.0;
    earlier[0 * d + j] += 1.0;
  }
  Rng r0(0), r1(0), r2(0);
  Var base = bilstm_encode(g, x, f.w.fwd, f.w.bwd, 0.0, false, r0);
  Var chg_late = bilstm_encode(g, g.constant(m, d, later), f.w.fwd, f.w.bwd, 0.0, false, r1);
  Var chg_early = bilstm_encode(g, g.constant(m, d, earlier), f.w.fwd, f.w.bwd, 0.0, false, r2);
  EXPECT_EQ(g.cols(base), 2 * H);
  bool late_moves_bwd = false, early_moves_fwd = false;
  for (std::size_t j = 0; j < H; ++j) {
    EXPECT_EQ(g.value(chg_late, t, j), g.value(base, t, j));                // forward half ignores the future
    EXPECT_EQ(g.value(chg_early, t, H + j), g.value(base, t, H + j));      // backward half ignores the past
    late_moves_bwd |= g.value(chg_late, t, H + j) != g.value(base, t, H + j);
    early_moves_fwd |= g.value(chg_early, t, j) != g.value(base, t, j);
  }
  EXPECT_TRUE(late_moves_bwd);
  EXPECT_TRUE(early_moves_fwd);
}

TEST(Encoder, InferenceIsDeterministic) {
  Fixture f{testutil::tiny_config()};
  auto ids = f.ids({"a", "dog", "sees", "the", "cat"});
  Graph g1(false), g2(false);
  Rng r1(1), r2(2);
  EXPECT_EQ(to_matrix(g1, encode(g1, f.w, f.cfg, ids, false, r1)), to_matrix(g2, encode(g2, f.w, f.cfg, ids, false, r2)));
}

TEST(Encoder, GradientsMatchFiniteDifferences) {
  Fixture f{testutil::no_dropout(testutil::tiny_config())};
  auto ids = f.ids({"the", "cat", "sleeps"});
  Rng wr(10);
  std::vector<double> weights(ids.length() * f.cfg.encoder_dim());
  for (double& x : weights) x = wr.uniform(-1.0, 1.0);
  LossBuilder loss = [&](Graph& g, ParameterStore& p) {
    auto w = EncoderWeights::bind(p, static_cast<std::size_t>(f.cfg.r));
    Rng rng(0);
    Var e = encode(g, w, f.cfg, ids, true, rng);
    return g.sum(g.mul(e, g.constant(g.rows(e), g.cols(e), weights)));
  };
  auto report = grad_check(loss, f.params);
  for (const auto& [name, err] : report) {
    if (!starts_with(name, "embeddings.") && !starts_with(name, "encoder.")) continue;
    EXPECT_LT(err, 1e-4) << name;
  }
}
