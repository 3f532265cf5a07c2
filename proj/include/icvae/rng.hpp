#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "icvae/tensor.hpp"

namespace icvae {

/// Seedable random source used for every stochastic step (parameter init,
/// dropout masks, reparametrization noise, prior sampling, shuffling).
///
/// Engine: std::mt19937_64. Uniforms take the top 53 bits of one draw.
/// Standard normals use the cosine branch of Box-Muller with two fresh
/// uniforms per variate, so the complete generator state is the engine state.
class Rng {
 public:
  /// Number of 64-bit words in the engine's textual form: the state_size
  /// words followed by the position index (libstdc++ layout).
  static constexpr std::size_t kStateWords = std::mt19937_64::state_size + 1;

  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Uniform in [0, 1).
  double uniform();
  double normal();
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  /// Index drawn with probability proportional to `weights`.
  std::size_t categorical(std::span<const double> weights);

  Tensor normal_tensor(const Shape& shape);
  Tensor uniform_tensor(const Shape& shape);

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

  /// Engine state as kStateWords words, in the order of the engine's
  /// textual representation.
  std::vector<std::uint64_t> state() const;
  void set_state(std::span<const std::uint64_t> words);

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace icvae
