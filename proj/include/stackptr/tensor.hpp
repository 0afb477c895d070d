#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stackptr/errors.hpp"
#include "stackptr/rng.hpp"

namespace stackptr {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(shape[i]);
  }
  return s;
}

// Dense row-major array of doubles with an optional gradient buffer.
//
// Graph code views a tensor as a matrix: the last dimension is the column
// count and all leading dimensions fold into rows (a 1-D tensor is one row).
struct Tensor {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty when absent, else same length as values
  bool requires_grad = true;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (shape_size(shape) != values.size()) {
      throw InvariantError("tensor values do not match shape [" + shape_string(shape) + "]");
    }
  }

  static Tensor zeros(Shape s) {
    std::vector<double> v(shape_size(s), 0.0);
    return Tensor(std::move(s), std::move(v));
  }

  std::size_t size() const { return values.size(); }
  std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }
  std::size_t rows() const { return cols() ? size() / cols() : 0; }

  bool has_grad() const { return !grad.empty(); }
  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
};

// Glorot/Xavier uniform for weight matrices; fan_in is the last dimension,
// fan_out the product of the leading ones.
inline Tensor glorot_uniform(Shape shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  const double fan_in = static_cast<double>(t.cols());
  const double fan_out = static_cast<double>(t.rows());
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : t.values) v = rng.uniform(-bound, bound);
  return t;
}

inline Tensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.values) v = rng.uniform(lo, hi);
  return t;
}

// Named, insertion-ordered collection of trainable tensors.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
  };

  ParameterStore() = default;
  explicit ParameterStore(std::uint64_t seed) : rng_seed(seed) {}

  // Entries are kept in a vector; handles into it are invalidated by add().
  Tensor& add(std::string name, Tensor t) {
    if (index_.count(name)) throw InvariantError("duplicate parameter name " + name);
    index_.emplace(name, entries_.size());
    entries_.push_back({std::move(name), std::move(t)});
    return entries_.back().tensor;
  }

  bool contains(std::string_view name) const { return index_.find(std::string(name)) != index_.end(); }

  Tensor& at(std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw InvariantError("unknown parameter " + std::string(name));
    return entries_[it->second].tensor;
  }
  const Tensor& at(std::string_view name) const {
    return const_cast<ParameterStore*>(this)->at(name);
  }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.name);
    return out;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) {
      e.tensor.ensure_grad();
      e.tensor.zero_grad();
    }
  }

  double grad_norm() const {
    double sq = 0.0;
    for (const auto& e : entries_)
      for (double g : e.tensor.grad) sq += g * g;
    return std::sqrt(sq);
  }

  // Values only; gradients and seeds are not compared.
  friend bool operator==(const ParameterStore& a, const ParameterStore& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      const auto& x = a.entries_[i];
      const auto& y = b.entries_[i];
      if (x.name != y.name || x.tensor.shape != y.tensor.shape || x.tensor.values != y.tensor.values) return false;
    }
    return true;
  }

  std::uint64_t rng_seed = 0;

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

inline bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

}  // namespace stackptr
