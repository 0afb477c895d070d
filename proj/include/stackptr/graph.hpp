#pragma once

// Tape-based reverse-mode differentiation over small dense matrices.
//
// A Graph records every operation as a node holding its value and a backward
// closure. Parameter tensors enter by reference: their values are read in
// place and their gradients accumulate directly into Tensor::grad. A graph is
// built per sentence, differentiated once, and discarded.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "stackptr/errors.hpp"
#include "stackptr/tensor.hpp"

namespace stackptr {

struct Var {
  std::size_t id = 0;
};

class Graph {
 public:
  // With record_gradients=false no node needs a gradient (inference mode).
  explicit Graph(bool record_gradients = true) : record_(record_gradients) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  std::size_t size() const { return nodes_.size(); }
  std::size_t rows(Var v) const { return nodes_[v.id].rows; }
  std::size_t cols(Var v) const { return nodes_[v.id].cols; }
  std::size_t numel(Var v) const { return rows(v) * cols(v); }

  std::span<const double> value(Var v) const { return {nodes_[v.id].data, numel(v)}; }
  double value(Var v, std::size_t r, std::size_t c) const { return nodes_[v.id].data[r * cols(v) + c]; }
  double scalar(Var v) const {
    if (numel(v) != 1) throw InvariantError("scalar() on a non-scalar node");
    return nodes_[v.id].data[0];
  }
  std::vector<double> row_values(Var v, std::size_t r) const {
    auto s = value(v).subspan(r * cols(v), cols(v));
    return {s.begin(), s.end()};
  }

  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

  std::span<double> grad(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad_ext) return {n.grad_ext, n.rows * n.cols};
    if (n.grad_own.empty()) n.grad_own.assign(n.rows * n.cols, 0.0);
    return n.grad_own;
  }

  // Leaf holding a copy of `values`; never receives gradient.
  Var constant(std::size_t rows, std::size_t cols, std::vector<double> values) {
    if (values.size() != rows * cols) throw InvariantError("constant: size mismatch");
    return emit(rows, cols, std::move(values), false, nullptr);
  }

  // Leaf bound to a parameter tensor; repeated calls return the same node.
  Var param(Tensor& t) {
    auto it = params_.find(&t);
    if (it != params_.end()) return it->second;
    Node n;
    n.rows = t.rows();
    n.cols = t.cols();
    n.data = t.values.data();
    n.needs_grad = record_ && t.requires_grad;
    if (n.needs_grad) {
      t.ensure_grad();
      n.grad_ext = t.grad.data();
    }
    nodes_.push_back(std::move(n));
    Var v{nodes_.size() - 1};
    params_.emplace(&t, v);
    return v;
  }

  // ---- linear algebra ----------------------------------------------------

  // A (m×k) · B (k×n)
  Var matmul(Var a, Var b) {
    const std::size_t m = rows(a), k = cols(a), n = cols(b);
    if (rows(b) != k) throw InvariantError("matmul: inner dimension mismatch");
    std::vector<double> out(m * n, 0.0);
    auto A = value(a);
    auto B = value(b);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = A[i * k + p];
        if (aip == 0.0) continue;
        const double* brow = &B[p * n];
        double* orow = &out[i * n];
        for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
      }
    return emit(m, n, std::move(out), any(a, b), [a, b, m, k, n](Graph& g, std::size_t self) {
      auto G = g.grad_of(self);
      if (g.needs_grad(a)) {
        auto gA = g.grad(a);
        auto B = g.value(b);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * B[p * n + j];
            gA[i * k + p] += s;
          }
      }
      if (g.needs_grad(b)) {
        auto gB = g.grad(b);
        auto A = g.value(a);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = A[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) gB[p * n + j] += aip * G[i * n + j];
          }
      }
    });
  }

  // A (m×k) · Bᵀ where B is (n×k)
  Var matmul_nt(Var a, Var b) {
    const std::size_t m = rows(a), k = cols(a), n = rows(b);
    if (cols(b) != k) throw InvariantError("matmul_nt: inner dimension mismatch");
    std::vector<double> out(m * n);
    auto A = value(a);
    auto B = value(b);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        const double* ar = &A[i * k];
        const double* br = &B[j * k];
        for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
        out[i * n + j] = s;
      }
    return emit(m, n, std::move(out), any(a, b), [a, b, m, k, n](Graph& g, std::size_t self) {
      auto G = g.grad_of(self);
      if (g.needs_grad(a)) {
        auto gA = g.grad(a);
        auto B = g.value(b);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const double gij = G[i * n + j];
            if (gij == 0.0) continue;
            for (std::size_t p = 0; p < k; ++p) gA[i * k + p] += gij * B[j * k + p];
          }
      }
      if (g.needs_grad(b)) {
        auto gB = g.grad(b);
        auto A = g.value(a);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const double gij = G[i * n + j];
            if (gij == 0.0) continue;
            for (std::size_t p = 0; p < k; ++p) gB[j * k + p] += gij * A[i * k + p];
          }
      }
    });
  }

  // x Wᵀ + b, with W stored (out × in) and b a single row of length out.
  Var linear(Var x, Var w, Var b) { return add_row(matmul_nt(x, w), b); }
  Var linear(Var x, Var w) { return matmul_nt(x, w); }

  // ---- elementwise -------------------------------------------------------

  Var add(Var a, Var b) {
    same_shape(a, b, "add");
    auto A = value(a);
    auto B = value(b);
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
    return emit(rows(a), cols(a), std::move(out), any(a, b), [a, b](Graph& g, std::size_t self) {
      auto G = g.grad_of(self);
      for (Var v : {a, b}) {
        if (!g.needs_grad(v)) continue;
        auto gv = g.grad(v);
        for (std::size_t i = 0; i < G.size(); ++i) gv[i] += G[i];
      }
    });
  }

  Var add(std::span<const Var> terms) {
    if (terms.empty()) throw InvariantError("add: no terms");
    Var acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
    return acc;
  }

  // a (m×n) + b broadcast over rows, b is (1×n)
  Var add_row(Var a, Var b) {
    const std::size_t m = rows(a), n = cols(a);
    if (numel(b) != n) throw InvariantError("add_row: width mismatch");
    auto A = value(a);
    auto B = value(b);
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] = A[i * n + j] + B[j];
    return emit(m, n, std::move(out), any(a, b), [a, b, m, n](Graph& g, std::size_t self) {
      auto G = g.grad_of(self);
      if (g.needs_grad(a)) {
        auto ga = g.grad(a);
        for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i];
      }
      if (g.needs_grad(b)) {
        auto gb = g.grad(b);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gb[j] += G[i * n + j];
      }
    });
  }

  Var mul(Var a, Var b) {
    same_shape(a, b, "mul");
    auto A = value(a);
    auto B = value(b);
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
    return emit(rows(a), cols(a), std::move(out), any(a, b), [a, b](Graph& g, std::size_t self) {
      auto G = g.grad_of(self);
      if (g.needs_grad(a)) {
        auto ga = g.grad(a);
        auto B = g.value(b);
        for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i] * B[i];
      }
      if (g.needs_grad(b)) {
        auto gb = g.grad(b);
        auto A = g.value(a);
        for (std::size_t i = 0; i < G.size(); ++i) gb[i] += G[i] * A[i];
      }
    });
  }

  // Elementwise product with a fixed (non-differentiable) mask.
  Var mul_const(Var a, std::vector<double> mask) {
    if (mask.size() != numel(a)) throw InvariantError("mul_const: size mismatch");
    auto A = value(a);
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * mask[i];
    return emit(rows(a), cols(a), std::move(out), needs_grad(a),
                [a, mask = std::move(mask)](Graph& g, std::size_t self) {
                  auto G = g.grad_of(self);
                  auto ga = g.grad(a);
                  for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i] * mask[i];
                });
  }

  Var scale(Var a, double c) {
    auto A = value(a);
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * c;
    return emit(rows(a), cols(a), std::move(out), needs_grad(a), [a, c](Graph& g, std::size_t self) {
      auto G = g.grad_of(self);
      auto ga = g.grad(a);
      for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i] * c;
    });
  }

  Var sigmoid(Var a) {
    return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                 [](double, double y) { return y * (1.0 - y); });
  }

  Var tanh(Var a) {
    return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
  }

  Var elu(Var a) {
    return unary(a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
                 [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
  }

  // ---- shape manipulation ------------------------------------------------

  Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw InvariantError("concat_cols: no parts");
    const std::size_t m = rows(parts[0]);
    std::size_t n = 0;
    bool ng = false;
    for (Var p : parts) {
      if (rows(p) != m) throw InvariantError("concat_cols: row count mismatch");
      n += cols(p);
      ng = ng || needs_grad(p);
    }
    std::vector<double> out(m * n);
    std::size_t off = 0;
    for (Var p : parts) {
      const std::size_t pc = cols(p);
      auto P = value(p);
      for (std::size_t i = 0; i < m; ++i) std::copy_n(&P[i * pc], pc, &out[i * n + off]);
      off += pc;
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    return emit(m, n, std::move(out), ng, [ps = std::move(ps), m, n](Graph& g, std::size_t self) {
      auto G = g.grad_of(self);
      std::size_t off = 0;
      for (Var p : ps) {
        const std::size_t pc = g.cols(p);
        if (g.needs_grad(p)) {
          auto gp = g.grad(p);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < pc; ++j) gp[i * pc + j] += G[i * n + off + j];
        }
        off += pc;
      }
    });
  }
  Var concat_cols(std::initializer_list<Var> parts) { return concat_cols(std::span<const Var>(parts.begin(), parts.size())); }

  Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw InvariantError("concat_rows: no parts");
    const std::size_t n = cols(parts[0]);
    std::size_t m = 0;
    bool ng = false;
    for (Var p : parts) {
      if (cols(p) != n) throw InvariantError("concat_rows: column count mismatch");
      m += rows(p);
      ng = ng || needs_grad(p);
    }
    std::vector<double> out;
    out.reserve(m * n);
    for (Var p : parts) {
      auto P = value(p);
      out.insert(out.end(), P.begin(), P.end());
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    return emit(m, n, std::move(out), ng, [ps = std::move(ps)](Graph& g, std::size_t self) {
      auto G = g.grad_of(self);
      std::size_t off = 0;
      for (Var p : ps) {
        const std::size_t len = g.numel(p);
        if (g.needs_grad(p)) {
          auto gp = g.grad(p);
          for (std::size_t i = 0; i < len; ++i) gp[i] += G[off + i];
        }
        off += len;
      }
    });
  }
  Var concat_rows(std::initializer_list<Var> parts) { return concat_rows(std::span<const Var>(parts.begin(), parts.size())); }

  Var slice_cols(Var a, std::size_t start, std::size_t len) {
    const std::size_t m = rows(a), n = cols(a);
    if (start + len > n) throw InvariantError("slice_cols: out of range");
    auto A = value(a);
    std::vector<double> out(m * len);
    for (std::size_t i = 0; i < m; ++i) std::copy_n(&A[i * n + start], len, &out[i * len]);
    return emit(m, len, std::move(out), needs_grad(a), [a, start, len, m, n](Graph& g, std::size_t self) {
      auto G = g.grad_of(self);
      auto ga = g.grad(a);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < len; ++j) ga[i * n + start + j] += G[i * len + j];
    });
  }

  Var slice_rows(Var a, std::size_t start, std::size_t len) {
    const std::size_t n = cols(a);
    if (start + len > rows(a)) throw InvariantError("slice_rows: out of range");
    auto A = value(a);
    std::vector<double> out(A.begin() + start * n, A.begin() + (start + len) * n);
    return emit(len, n, std::move(out), needs_grad(a), [a, start, n](Graph& g, std::size_t self) {
      auto G = g.grad_of(self);
      auto ga = g.grad(a);
      for (std::size_t i = 0; i < G.size(); ++i) ga[start * n + i] += G[i];
    });
  }

  Var row(Var a, std::size_t r) { return slice_rows(a, r, 1); }

  Var reshape(Var a, std::size_t new_rows, std::size_t new_cols) {
    if (new_rows * new_cols != numel(a)) throw InvariantError("reshape: size mismatch");
    auto A = value(a);
    std::vector<double> out(A.begin(), A.end());
    return emit(new_rows, new_cols, std::move(out), needs_grad(a), [a](Graph& g, std::size_t self) {
      auto G = g.grad_of(self);
      auto ga = g.grad(a);
      for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i];
    });
  }

  // Rows of `table` selected by `ids`; gradient scatters back into the rows.
  Var lookup(Tensor& table, std::vector<int> ids) {
    const std::size_t n = table.cols();
    std::vector<double> out(ids.size() * n);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= table.rows())
        throw InvariantError("lookup: id out of range");
      std::copy_n(&table.values[static_cast<std::size_t>(ids[i]) * n], n, &out[i * n]);
    }
    const bool ng = record_ && table.requires_grad;
    if (ng) table.ensure_grad();
    Tensor* t = &table;
    const std::size_t count = ids.size();
    return emit(count, n, std::move(out), ng, [t, ids = std::move(ids), n](Graph& g, std::size_t self) {
      auto G = g.grad_of(self);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        double* dst = &t->grad[static_cast<std::size_t>(ids[i]) * n];
        for (std::size_t j = 0; j < n; ++j) dst[j] += G[i * n + j];
      }
    });
  }

  // Sliding windows of `width` consecutive rows, each flattened into one row:
  // (L×c) -> ((L-width+1) × width·c). With a linear layer this is a 1-D convolution.
  Var unfold_rows(Var a, std::size_t width) {
    const std::size_t L = rows(a), c = cols(a);
    if (width == 0 || L < width) throw InvariantError("unfold_rows: sequence shorter than window");
    const std::size_t out_rows = L - width + 1;
    auto A = value(a);
    std::vector<double> out(out_rows * width * c);
    for (std::size_t t = 0; t < out_rows; ++t) std::copy_n(&A[t * c], width * c, &out[t * width * c]);
    return emit(out_rows, width * c, std::move(out), needs_grad(a),
                [a, width, c, out_rows](Graph& g, std::size_t self) {
                  auto G = g.grad_of(self);
                  auto ga = g.grad(a);
                  for (std::size_t t = 0; t < out_rows; ++t)
                    for (std::size_t j = 0; j < width * c; ++j) ga[t * c + j] += G[t * width * c + j];
                });
  }

  // Column-wise maximum over rows (max-over-time pooling): (L×c) -> (1×c).
  Var max_rows(Var a) {
    const std::size_t L = rows(a), c = cols(a);
    auto A = value(a);
    std::vector<double> out(c);
    std::vector<std::size_t> arg(c, 0);
    for (std::size_t j = 0; j < c; ++j) {
      double best = A[j];
      for (std::size_t t = 1; t < L; ++t)
        if (A[t * c + j] > best) {
          best = A[t * c + j];
          arg[j] = t;
        }
      out[j] = best;
    }
    return emit(1, c, std::move(out), needs_grad(a), [a, c, arg = std::move(arg)](Graph& g, std::size_t self) {
      auto G = g.grad_of(self);
      auto ga = g.grad(a);
      for (std::size_t j = 0; j < c; ++j) ga[arg[j] * c + j] += G[j];
    });
  }

  Var sum(Var a) {
    double s = 0.0;
    for (double x : value(a)) s += x;
    return emit(1, 1, {s}, needs_grad(a), [a](Graph& g, std::size_t self) {
      const double G = g.grad_of(self)[0];
      auto ga = g.grad(a);
      for (auto& x : ga) x += G;
    });
  }

  // ---- normalisation and losses ------------------------------------------

  // Softmax applied independently to each row.
  Var softmax_rows(Var a) {
    const std::size_t m = rows(a), n = cols(a);
    auto A = value(a);
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i) {
      const double* x = &A[i * n];
      double mx = *std::max_element(x, x + n);
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) z += (out[i * n + j] = std::exp(x[j] - mx));
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
    }
    return emit(m, n, std::move(out), needs_grad(a), [a, m, n](Graph& g, std::size_t self) {
      auto G = g.grad_of(self);
      auto Y = g.value(Var{self});
      auto ga = g.grad(a);
      for (std::size_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += G[i * n + j] * Y[i * n + j];
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += Y[i * n + j] * (G[i * n + j] - dot);
      }
    });
  }

  // log softmax(scores)[target] over the entries where legal[j] is true;
  // illegal entries act as −infinity. `scores` is a single row.
  Var log_softmax_pick(Var scores, const std::vector<bool>& legal, std::size_t target) {
    const std::size_t n = numel(scores);
    if (legal.size() != n || target >= n || !legal[target])
      throw InvariantError("log_softmax_pick: target is masked or out of range");
    auto S = value(scores);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (legal[j]) mx = std::max(mx, S[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (legal[j]) z += std::exp(S[j] - mx);
    const double lse = mx + std::log(z);
    std::vector<double> probs(n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (legal[j]) probs[j] = std::exp(S[j] - lse);
    return emit(1, 1, {S[target] - lse}, needs_grad(scores),
                [scores, target, probs = std::move(probs)](Graph& g, std::size_t self) {
                  const double G = g.grad_of(self)[0];
                  auto gs = g.grad(scores);
                  for (std::size_t j = 0; j < probs.size(); ++j) gs[j] -= G * probs[j];
                  gs[target] += G;
                });
  }

  Var log_softmax_pick(Var scores, std::size_t target) {
    return log_softmax_pick(scores, std::vector<bool>(numel(scores), true), target);
  }

  // Accumulate d(loss)/d(node) for every node that feeds `loss` (a 1×1 node).
  void backward(Var loss) {
    if (numel(loss) != 1) throw InvariantError("backward: loss must be scalar");
    grad(loss)[0] += 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.back || n.grad_own.empty()) continue;
      n.back(*this, i);
    }
  }

 private:
  struct Node {
    std::size_t rows = 0, cols = 0;
    std::vector<double> value;
    const double* data = nullptr;
    std::vector<double> grad_own;
    double* grad_ext = nullptr;
    bool needs_grad = false;
    std::function<void(Graph&, std::size_t)> back;
  };

  std::span<const double> grad_of(std::size_t id) const { return nodes_[id].grad_own; }

  bool any(Var a, Var b) const { return needs_grad(a) || needs_grad(b); }

  void same_shape(Var a, Var b, const char* op) const {
    if (rows(a) != rows(b) || cols(a) != cols(b)) throw InvariantError(std::string(op) + ": shape mismatch");
  }

  template <typename F, typename D>
  Var unary(Var a, F f, D df) {
    auto A = value(a);
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(A[i]);
    return emit(rows(a), cols(a), std::move(out), needs_grad(a), [a, df](Graph& g, std::size_t self) {
      auto G = g.grad_of(self);
      auto X = g.value(a);
      auto Y = g.value(Var{self});
      auto ga = g.grad(a);
      for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i] * df(X[i], Y[i]);
    });
  }

  Var emit(std::size_t rows, std::size_t cols, std::vector<double> value, bool needs_grad,
           std::function<void(Graph&, std::size_t)> back) {
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    Node& stored = nodes_.back();
    stored.data = stored.value.data();
    return Var{nodes_.size() - 1};
  }

  bool record_ = true;
  std::deque<Node> nodes_;
  std::unordered_map<const Tensor*, Var> params_;
};

}  // namespace stackptr
