#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "stackptr/errors.hpp"
#include "stackptr/graph.hpp"
#include "stackptr/rng.hpp"
#include "stackptr/tensor.hpp"

namespace stackptr {

// Builds the loss for the current parameter values on a fresh graph.
using LossBuilder = std::function<Var(Graph&, ParameterStore&)>;

struct GradCheckOptions {
  double epsilon = 1e-5;
  // When nonzero, only this many randomly chosen scalars per tensor are probed.
  std::size_t max_probes_per_tensor = 0;
  std::uint64_t seed = 0;
};

// Compares analytic gradients with central differences
// (f(w+ε) − f(w−ε)) / 2ε and returns, per tensor, the largest
// |analytic − numeric| / max(1, |analytic|, |numeric|).
inline std::map<std::string, double> grad_check(const LossBuilder& loss_fn, ParameterStore& params,
                                                GradCheckOptions opt = {}) {
  if (opt.epsilon < 1e-7 || opt.epsilon > 1e-3) throw ConfigError("grad_check epsilon must lie in [1e-7, 1e-3]");
  auto evaluate = [&]() {
    Graph g;
    double f = g.scalar(loss_fn(g, params));
    if (!std::isfinite(f)) throw NumericError("non-finite objective");
    return f;
  };

  params.zero_grad();
  {
    Graph g;
    Var loss = loss_fn(g, params);
    if (!std::isfinite(g.scalar(loss))) throw NumericError("non-finite objective");
    g.backward(loss);
  }

  Rng rng(opt.seed);
  std::map<std::string, double> report;
  for (auto& e : params.entries()) {
    Tensor& t = e.tensor;
    if (!t.requires_grad) continue;
    const std::vector<double> analytic = t.grad;
    std::vector<std::size_t> probes;
    if (opt.max_probes_per_tensor == 0 || opt.max_probes_per_tensor >= t.size()) {
      probes.resize(t.size());
      for (std::size_t k = 0; k < t.size(); ++k) probes[k] = k;
    } else {
      for (std::size_t k = 0; k < opt.max_probes_per_tensor; ++k) probes.push_back(rng.index(t.size()));
    }
    double worst = 0.0;
    for (std::size_t k : probes) {
      const double w = t.values[k];
      t.values[k] = w + opt.epsilon;
      const double fp = evaluate();
      t.values[k] = w - opt.epsilon;
      const double fm = evaluate();
      t.values[k] = w;
      const double numeric = (fp - fm) / (2.0 * opt.epsilon);
      const double a = analytic[k];
      const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, rel);
    }
    report[e.name] = worst;
  }
  return report;
}

}  // namespace stackptr
