#pragma once

// Central finite-difference check of loss_and_gradient on random small
// networks. Shared by the unit tests and the acceptance suite.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "msrl/agents/network.hpp"
#include "msrl/rng.hpp"

namespace msrl::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t parameters = 0;
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor); the floor keeps
// near-zero gradients from dividing roundoff by roundoff.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline GradCheckResult gradient_check(std::uint64_t seed, double h = 1e-6) {
  Rng rng(seed);
  std::vector<std::size_t> sizes{2 + rng.below(4)};
  const auto hidden = 1 + rng.below(2);
  for (std::uint64_t i = 0; i < hidden; ++i) sizes.push_back(3 + rng.below(6));
  sizes.push_back(2 + rng.below(3));
  ValueNetwork net(sizes, derive_seed(seed, 1));
  for (auto& l : net.layers())
    for (auto& b : l.bias) b = rng.uniform(-0.5, 0.5);

  const auto batch_size = 1 + rng.below(8);
  std::vector<std::vector<double>> states(batch_size);
  std::vector<QSample> batch(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    states[i].resize(sizes.front());
    for (auto& x : states[i]) x = rng.uniform(-1.0, 1.0);
    batch[i] = {states[i], static_cast<std::size_t>(rng.below(sizes.back())), rng.uniform(-2.0, 2.0)};
  }

  Gradients grad;
  loss_and_gradient(net, batch, &grad);
  GradCheckResult res;
  auto check = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double up = loss_and_gradient(net, batch, nullptr);
    param = saved - h;
    const double down = loss_and_gradient(net, batch, nullptr);
    param = saved;
    res.max_rel_error = std::max(res.max_rel_error, relative_error(analytic, (up - down) / (2.0 * h)));
    ++res.parameters;
  };
  auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t k = 0; k < layers[l].weights.size(); ++k) check(layers[l].weights[k], grad[l].weights[k]);
    for (std::size_t k = 0; k < layers[l].bias.size(); ++k) check(layers[l].bias[k], grad[l].bias[k]);
  }
  return res;
}

}  // namespace msrl::testing
