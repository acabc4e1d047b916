#include "neurotube/adam.hpp"

#include <cmath>

#include "neurotube/error.hpp"

namespace neurotube {

void adam_step(std::span<Tensor> params, AdamState& state) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad())
      throw StateError("adam_step: parameter " + std::to_string(i) + " has no gradient");
  }
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].numel(), real(0));
      state.v[i].assign(params[i].numel(), real(0));
    }
  }
  if (state.m.size() != params.size())
    throw StateError("adam_step: state tracks " + std::to_string(state.m.size()) +
                     " parameters, got " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i)
    if (state.m[i].size() != params[i].numel() || state.v[i].size() != params[i].numel())
      throw StateError("adam_step: moment shape mismatch for parameter " + std::to_string(i));

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i].data();
    auto g = params[i].grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double gk = g[k];
      const double mk = state.beta1 * m[k] + (1.0 - state.beta1) * gk;
      const double vk = state.beta2 * v[k] + (1.0 - state.beta2) * gk * gk;
      m[k] = static_cast<real>(mk);
      v[k] = static_cast<real>(vk);
      const double mhat = mk / bc1;
      const double vhat = vk / bc2;
      theta[k] = static_cast<real>(theta[k] - state.lr * mhat / (std::sqrt(vhat) + state.eps));
    }
    params[i].zero_grad();
  }
}

}  // namespace neurotube
