#pragma once

#include <cmath>
#include <map>
#include <string>

#include "viref/tensor.hpp"

namespace viref {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename S>
struct AdamState {
  std::map<std::string, Tensor<S>> m;  // first moments
  std::map<std::string, Tensor<S>> v;  // second moments
  long step = 0;
};

// Standard bias-corrected Adam over every trainable entry of the store.
// Gradients must be keyed identically to the trainable parameters.
template <typename S>
void adam_step(ParameterStore<S>& params, const GradMap<S>& grads,
               AdamState<S>& state, const AdamConfig& cfg = {}) {
  for (auto& [name, entry] : params) {
    if (!entry.trainable) continue;
    auto git = grads.find(name);
    if (git == grads.end())
      fail(ErrorKind::contract, "adam: missing gradient for " + name);
    if (!git->second.same_shape(entry.value))
      fail(ErrorKind::shape, "adam: gradient shape mismatch for " + name);
  }
  state.step += 1;
  const S b1 = static_cast<S>(cfg.beta1);
  const S b2 = static_cast<S>(cfg.beta2);
  const S corr1 =
      S(1) - static_cast<S>(std::pow(cfg.beta1, double(state.step)));
  const S corr2 =
      S(1) - static_cast<S>(std::pow(cfg.beta2, double(state.step)));
  for (auto& [name, entry] : params) {
    if (!entry.trainable) continue;
    const MatX<S>& g = grads.at(name).data;
    auto mit = state.m.find(name);
    if (mit == state.m.end()) {
      Tensor<S> z;
      z.shape = entry.value.shape;
      z.data = MatX<S>::Zero(g.rows(), g.cols());
      mit = state.m.emplace(name, z).first;
      state.v.emplace(name, std::move(z));
    }
    MatX<S>& m = mit->second.data;
    MatX<S>& v = state.v.at(name).data;
    m = b1 * m + (S(1) - b1) * g;
    v = b2 * v + (S(1) - b2) * g.cwiseProduct(g);
    entry.value.data.array() -=
        static_cast<S>(cfg.lr) * (m.array() / corr1) /
        ((v.array() / corr2).sqrt() + static_cast<S>(cfg.eps));
    if (!entry.value.data.allFinite())
      fail(ErrorKind::divergence,
           "adam: non-finite values in " + name + " after step " +
               std::to_string(state.step));
  }
}

}  // namespace viref
