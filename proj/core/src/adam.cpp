#include "vebm/adam.hpp"

#include <cmath>
#include <string>

namespace vebm {

AdamState make_adam_state(const ParamSet& params, AdamConfig config,
                          Objective objective) {
  AdamState s;
  s.config = config;
  s.objective = objective;
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.first_moment.emplace_back(params[i].shape());
    s.second_moment.emplace_back(params[i].shape());
  }
  return s;
}

void adam_step(ParamSet& params, std::span<const Tensor> grads, AdamState& state) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: " + std::to_string(grads.size()) +
                     " gradients for " + std::to_string(params.size()) +
                     " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].shape() ||
        state.first_moment[i].shape() != params[i].shape()) {
      throw ShapeError("adam_step: shape mismatch for '" + params.name(i) + "'");
    }
  }
  ++state.step;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);
  const double sign = state.objective == Objective::kMaximize ? 1.0 : -1.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    const auto g = grads[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k];
      const double mk = c.beta1 * m[k] + (1.0 - c.beta1) * gk;
      const double vk = c.beta2 * v[k] + (1.0 - c.beta2) * gk * gk;
      m[k] = static_cast<float>(mk);
      v[k] = static_cast<float>(vk);
      const double update =
          c.learning_rate * (mk / correct1) / (std::sqrt(vk / correct2) + c.epsilon);
      p[k] = static_cast<float>(p[k] + sign * update);
    }
  }
}

}  // namespace vebm
