#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "msrl/error.hpp"
#include "msrl/rng.hpp"

namespace msrl {

/// Fully connected layer; weights are row-major `out x in`.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in_size, std::size_t out_size)
      : in(in_size), out(out_size), weights(in_size * out_size, 0.0), bias(out_size, 0.0) {}

  double& w(std::size_t o, std::size_t i) { return weights[o * in + i]; }
  double w(std::size_t o, std::size_t i) const { return weights[o * in + i]; }
};

/// Feedforward Q approximator: affine layers with rectifiers between them
/// and an identity output.
class ValueNetwork {
 public:
  ValueNetwork() = default;

  /// Zero-initialized.
  explicit ValueNetwork(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw Error(ErrorCode::ArchitectureMismatch, "need at least input and output layers");
    for (auto s : sizes_)
      if (s == 0) throw Error(ErrorCode::ArchitectureMismatch, "layer sizes must be positive");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) layers_.emplace_back(sizes_[l], sizes_[l + 1]);
  }

  /// He-uniform weights, zero biases.
  ValueNetwork(std::vector<std::size_t> sizes, std::uint64_t seed) : ValueNetwork(std::move(sizes)) {
    Rng rng(seed);
    for (auto& layer : layers_) {
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.in));
      for (auto& w : layer.weights) w = rng.uniform(-limit, limit);
    }
  }

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
  }

  /// Visits every parameter in serialization order (per layer: weights
  /// row-major, then biases).
  template <class F>
  void for_each_parameter(F&& f) {
    for (auto& l : layers_) {
      for (auto& w : l.weights) f(w);
      for (auto& b : l.bias) f(b);
    }
  }
  template <class F>
  void for_each_parameter(F&& f) const {
    for (const auto& l : layers_) {
      for (const auto& w : l.weights) f(w);
      for (const auto& b : l.bias) f(b);
    }
  }

  bool finite() const {
    bool ok = true;
    for_each_parameter([&](double v) { ok = ok && std::isfinite(v); });
    return ok;
  }

  std::vector<double> forward(std::span<const double> input) const {
    check_input(input);
    std::vector<double> cur(input.begin(), input.end());
    std::vector<double> next;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      affine(layers_[l], cur, next);
      if (l + 1 < layers_.size())
        for (auto& v : next) v = std::max(v, 0.0);
      cur.swap(next);
    }
    return cur;
  }

  void check_input(std::span<const double> input) const {
    if (input.size() != input_size())
      throw Error(ErrorCode::DimensionMismatch, "input length " + std::to_string(input.size()) +
                                                    " != network input " + std::to_string(input_size()));
  }

  static void affine(const DenseLayer& layer, std::span<const double> x, std::vector<double>& y) {
    y.assign(layer.bias.begin(), layer.bias.end());
    const double* w = layer.weights.data();
    for (std::size_t o = 0; o < layer.out; ++o, w += layer.in) {
      double acc = 0.0;
      for (std::size_t i = 0; i < layer.in; ++i) acc += w[i] * x[i];
      y[o] += acc;
    }
  }

  friend bool operator==(const ValueNetwork& a, const ValueNetwork& b) {
    if (a.sizes_ != b.sizes_) return false;
    for (std::size_t l = 0; l < a.layers_.size(); ++l)
      if (a.layers_[l].weights != b.layers_[l].weights || a.layers_[l].bias != b.layers_[l].bias) return false;
    return true;
  }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<DenseLayer> layers_;
};

inline std::vector<double> forward(const ValueNetwork& net, std::span<const double> state) {
  return net.forward(state);
}

/// Same shape as the network's layers; holds dL/dparam.
using Gradients = std::vector<DenseLayer>;

inline Gradients zero_gradients(const ValueNetwork& net) {
  Gradients g;
  for (const auto& l : net.layers()) g.emplace_back(l.in, l.out);
  return g;
}

/// One supervised sample: the loss only sees output `action`.
struct QSample {
  std::span<const double> state;
  std::size_t action = 0;
  double target = 0.0;
};

/// L = mean_i (Q(s_i)[a_i] - y_i)^2 and, if `grad` is non-null, its
/// gradient by backpropagation.
inline double loss_and_gradient(const ValueNetwork& net, std::span<const QSample> batch, Gradients* grad) {
  if (batch.empty()) return 0.0;
  const auto& layers = net.layers();
  const std::size_t depth = layers.size();
  if (grad) *grad = zero_gradients(net);
  std::vector<std::vector<double>> act(depth + 1);  // act[0] input, act[l+1] output of layer l (post-ReLU)
  std::vector<double> delta, prev;
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& sample : batch) {
    net.check_input(sample.state);
    if (sample.action >= net.output_size())
      throw Error(ErrorCode::IndexOutOfRange, "action outside network output");
    act[0].assign(sample.state.begin(), sample.state.end());
    for (std::size_t l = 0; l < depth; ++l) {
      ValueNetwork::affine(layers[l], act[l], act[l + 1]);
      if (l + 1 < depth)
        for (auto& v : act[l + 1]) v = std::max(v, 0.0);
    }
    const double err = act[depth][sample.action] - sample.target;
    loss += err * err * scale;
    if (!grad) continue;

    delta.assign(layers.back().out, 0.0);
    delta[sample.action] = 2.0 * err * scale;
    for (std::size_t l = depth; l-- > 0;) {
      const auto& layer = layers[l];
      auto& g = (*grad)[l];
      const auto& x = act[l];
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        g.bias[o] += d;
        double* gw = g.weights.data() + o * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i) gw[i] += d * x[i];
      }
      if (l == 0) break;
      prev.assign(layer.in, 0.0);
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* w = layer.weights.data() + o * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i) prev[i] += d * w[i];
      }
      // ReLU derivative, taken as 0 at the kink.
      for (std::size_t i = 0; i < layer.in; ++i)
        if (x[i] <= 0.0) prev[i] = 0.0;
      delta.swap(prev);
    }
  }
  return loss;
}

/// One plain gradient-descent step on the squared TD error. Returns the
/// batch loss measured before the update.
inline double sgd_step(ValueNetwork& net, std::span<const QSample> batch, double learning_rate) {
  Gradients g;
  const double loss = loss_and_gradient(net, batch, &g);
  if (!std::isfinite(loss)) throw Error(ErrorCode::NonFiniteLoss, "batch loss is not finite");
  if (learning_rate == 0.0) return loss;
  auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t k = 0; k < layers[l].weights.size(); ++k)
      layers[l].weights[k] -= learning_rate * g[l].weights[k];
    for (std::size_t k = 0; k < layers[l].bias.size(); ++k) layers[l].bias[k] -= learning_rate * g[l].bias[k];
  }
  return loss;
}

/// Frozen snapshot of an online network used for TD targets.
struct TargetNetwork {
  ValueNetwork net;
  std::size_t sync_interval = 500;
};

inline void sync_target(const ValueNetwork& online, ValueNetwork& target) {
  if (online.layer_sizes() != target.layer_sizes())
    throw Error(ErrorCode::ArchitectureMismatch, "online and target layer sizes differ");
  target = online;
}

inline void sync_target(const ValueNetwork& online, TargetNetwork& target) { sync_target(online, target.net); }

// Text format:
//   msrl-valuenet 1
//   layers <count> <size>...
//   one parameter per line, per layer: weights row-major, then biases
inline void save_network(std::ostream& out, const ValueNetwork& net) {
  out << "msrl-valuenet 1\n";
  out << "layers " << net.layer_sizes().size();
  for (auto s : net.layer_sizes()) out << ' ' << s;
  out << '\n';
  char buf[64];
  net.for_each_parameter([&](double v) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, ptr - buf);
    out.put('\n');
  });
}

inline ValueNetwork load_network(std::istream& in) {
  std::string magic, tag;
  int version = 0;
  if (!(in >> magic >> version) || magic != "msrl-valuenet" || version != 1)
    throw Error(ErrorCode::ParseError, "not a version-1 value network");
  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != "layers" || count < 2) throw Error(ErrorCode::ParseError, "bad layer header");
  std::vector<std::size_t> sizes(count);
  for (auto& s : sizes)
    if (!(in >> s)) throw Error(ErrorCode::ParseError, "bad layer size");
  ValueNetwork net(sizes);
  std::string token;
  net.for_each_parameter([&](double& v) {
    if (!(in >> token)) throw Error(ErrorCode::ParseError, "truncated parameter list");
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size())
      throw Error(ErrorCode::ParseError, "bad parameter '" + token + "'");
  });
  return net;
}

}  // namespace msrl
