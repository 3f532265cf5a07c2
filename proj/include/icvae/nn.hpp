#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "icvae/rng.hpp"
#include "icvae/tape.hpp"
#include "icvae/tensor.hpp"

namespace icvae {

/// Whether stochastic layers (dropout) are active.
enum class Mode { train, eval };

/// Named trainable tensors. Iteration order is lexicographic by name and
/// therefore identical across runs.
class ParameterStore {
 public:
  using Map = std::map<std::string, Tensor>;

  /// Registers a new zero-initialized parameter that requires grad.
  Tensor add(const std::string& name, Shape shape);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.contains(name); }
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t numel() const;

  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

  /// Allocates (or resets) a zero grad buffer on every parameter.
  void zero_grad() const;

 private:
  Map params_;
};

/// Fully connected layer y = x W + b with W of shape (in x out).
class LinearLayer {
 public:
  LinearLayer() = default;
  /// Registers `<name>.weight` and `<name>.bias` in the store.
  LinearLayer(ParameterStore& store, const std::string& name, std::size_t in_dim, std::size_t out_dim);

  Tensor forward(Tape& tape, const Tensor& x) const;

  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }
  std::size_t in_dim() const { return weight_.shape()[0]; }
  std::size_t out_dim() const { return weight_.shape()[1]; }

 private:
  Tensor weight_;
  Tensor bias_;
};

/// Inverted dropout: in train mode each activation is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate); eval mode is the identity.
class DropoutLayer {
 public:
  explicit DropoutLayer(double rate = 0.0);

  double rate() const noexcept { return rate_; }
  Tensor forward(Tape& tape, const Tensor& x, Rng& rng, Mode mode) const;

 private:
  double rate_;
};

/// Weights (names ending in ".weight", shape in x out) ~ U(-1/sqrt(in), 1/sqrt(in));
/// everything else is set to zero. Parameters are visited in store order.
void init_parameters(const ParameterStore& store, Rng& rng);

}  // namespace icvae
