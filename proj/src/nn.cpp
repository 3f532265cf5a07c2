#include "icvae/nn.hpp"

#include <cmath>

#include "icvae/error.hpp"

namespace icvae {

Tensor ParameterStore::add(const std::string& name, Shape shape) {
  if (params_.contains(name)) throw ValueError("duplicate parameter name '" + name + "'");
  Tensor t = Tensor::zeros(std::move(shape), true);
  params_.emplace(name, t);
  return t;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ValueError("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParameterStore::numel() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

void ParameterStore::zero_grad() const {
  for (const auto& [name, t] : params_) {
    Tensor p = t;
    p.zero_grad();
  }
}

LinearLayer::LinearLayer(ParameterStore& store, const std::string& name, std::size_t in_dim, std::size_t out_dim)
    : weight_(store.add(name + ".weight", {in_dim, out_dim})), bias_(store.add(name + ".bias", {out_dim})) {}

Tensor LinearLayer::forward(Tape& tape, const Tensor& x) const {
  return tape.add_bias(tape.matmul(x, weight_), bias_);
}

DropoutLayer::DropoutLayer(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ValueError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
}

Tensor DropoutLayer::forward(Tape& tape, const Tensor& x, Rng& rng, Mode mode) const {
  if (mode == Mode::eval || rate_ == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate_);
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = rng.uniform() < rate_ ? 0.0 : keep_scale;
  return tape.mul(x, Tensor(x.shape(), std::move(mask)));
}

void init_parameters(const ParameterStore& store, Rng& rng) {
  for (const auto& [name, param] : store) {
    Tensor t = param;
    auto values = t.mutable_data();
    const bool is_weight = name.size() >= 7 && name.compare(name.size() - 7, 7, ".weight") == 0;
    if (is_weight) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(t.shape()[0]));
      for (auto& v : values) v = (2.0 * rng.uniform() - 1.0) * bound;
    } else {
      for (auto& v : values) v = 0.0;
    }
  }
}

}  // namespace icvae
