#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "stackptr/errors.hpp"
#include "stackptr/tensor.hpp"

namespace stackptr {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step_count = 0;
  // Moments are stored positionally, aligned with ParameterStore::entries().
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One bias-corrected Adam update using the gradients held in each tensor.
// Tensors without requires_grad are left untouched.
inline void adam_step(ParameterStore& params, AdamState& state, double learning_rate) {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  auto& entries = params.entries();
  if (state.m.empty()) {
    state.m.resize(entries.size());
    state.v.resize(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      state.m[i].assign(entries[i].tensor.size(), 0.0);
      state.v[i].assign(entries[i].tensor.size(), 0.0);
    }
  }
  if (state.m.size() != entries.size()) throw InvariantError("gradient shape mismatch: parameter count changed");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Tensor& t = entries[i].tensor;
    if (!t.requires_grad) continue;
    if (t.grad.size() != t.values.size() || state.m[i].size() != t.values.size())
      throw InvariantError("gradient shape mismatch for " + entries[i].name);
  }

  state.step_count += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor& t = entries[i].tensor;
    if (!t.requires_grad) continue;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < t.values.size(); ++k) {
      const double g = t.grad[k];
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      v[k] = b2 * v[k] + (1.0 - b2) * g * g;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      t.values[k] -= learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
inline double clip_grad_norm(ParameterStore& params, double max_norm) {
  const double norm = params.grad_norm();
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& e : params.entries())
      for (auto& g : e.tensor.grad) g *= s;
  }
  return norm;
}

}  // namespace stackptr
