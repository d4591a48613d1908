#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "esdrl/nnet.hpp"

namespace esdrl::nn {

struct AdamState {
  MlpParams m;
  MlpParams v;
  long step = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(const MlpParams& like, double lr) : m(like.zeros_like()), v(like.zeros_like()), learning_rate(lr) {}
};

/// Bias-corrected Adam. Throws before touching anything if a gradient is
/// not finite.
inline void adam_step(MlpParams& params, const MlpParams& grads, AdamState& st) {
  grads.for_each([](const std::string& name, Eigen::Map<const Vector> g) {
    if (!g.allFinite()) throw std::invalid_argument("adam_step: non-finite gradient in " + name);
  });
  if (params.count() != grads.count() || params.count() != st.m.count())
    throw std::invalid_argument("adam_step: shape mismatch");

  ++st.step;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
      m = st.beta1 * m + (1.0 - st.beta1) * g;
      v = st.beta2 * v + (1.0 - st.beta2) * g.cwiseProduct(g);
      p.array() -= st.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + st.epsilon);
    };
    auto& P = params.layers[l];
    const auto& G = grads.layers[l];
    auto& M = st.m.layers[l];
    auto& V = st.v.layers[l];
    update(P.W, G.W, M.W, V.W);
    update(P.b, G.b, M.b, V.b);
    if (P.ln_gain.size()) {
      update(P.ln_gain, G.ln_gain, M.ln_gain, V.ln_gain);
      update(P.ln_bias, G.ln_bias, M.ln_bias, V.ln_bias);
    }
  }
}

/// target <- tau * online + (1 - tau) * target
inline void polyak(MlpParams& target, const MlpParams& online, double tau) {
  if (target.count() != online.count()) throw std::invalid_argument("polyak: shape mismatch");
  for (std::size_t l = 0; l < target.layers.size(); ++l) {
    auto mix = [&](auto& t, const auto& o) { t = tau * o + (1.0 - tau) * t; };
    auto& T = target.layers[l];
    const auto& O = online.layers[l];
    mix(T.W, O.W);
    mix(T.b, O.b);
    if (T.ln_gain.size()) {
      mix(T.ln_gain, O.ln_gain);
      mix(T.ln_bias, O.ln_bias);
    }
  }
}

}  // namespace esdrl::nn
