#include "icvae/adam.hpp"

#include <cmath>

#include "icvae/error.hpp"

namespace icvae {

Adam::Adam(AdamOptions options) : options_(options) {
  if (!(options_.learning_rate > 0.0)) throw ValueError("adam: learning rate must be positive");
  if (!(options_.beta1 >= 0.0 && options_.beta1 < 1.0) || !(options_.beta2 >= 0.0 && options_.beta2 < 1.0)) {
    throw ValueError("adam: betas must lie in [0, 1)");
  }
}

void Adam::step(const ParameterStore& store) {
  for (const auto& [name, param] : store) {
    if (!param.has_grad()) throw ValueError("adam: parameter '" + name + "' has no gradient");
  }
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (const auto& [name, param] : store) {
    Tensor p = param;
    auto& mom = moments_[name];
    if (mom.m.size() != p.numel()) {
      mom.m.assign(p.numel(), 0.0);
      mom.v.assign(p.numel(), 0.0);
    }
    auto values = p.mutable_data();
    auto g = p.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      mom.m[i] = b1 * mom.m[i] + (1.0 - b1) * g[i];
      mom.v[i] = b2 * mom.v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = mom.m[i] / correction1;
      const double v_hat = mom.v[i] / correction2;
      values[i] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
    p.zero_grad();
  }
}

void Adam::restore(std::uint64_t t, std::map<std::string, Moments> moments) {
  for (const auto& [name, mom] : moments) {
    if (mom.m.size() != mom.v.size()) throw ValueError("adam: moment size mismatch for '" + name + "'");
  }
  t_ = t;
  moments_ = std::move(moments);
}

}  // namespace icvae
