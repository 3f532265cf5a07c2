#include "icvae/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "icvae/error.hpp"

namespace icvae {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw ValueError("Rng::index: empty range");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

std::size_t Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValueError("categorical: weights must be finite and nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw ValueError("categorical: weights sum to zero");
  const double u = uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) last_positive = i;
    acc += weights[i];
    if (u < acc && weights[i] > 0.0) return i;
  }
  return last_positive;
}

Tensor Rng::normal_tensor(const Shape& shape) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = normal();
  return Tensor(shape, std::move(v));
}

Tensor Rng::uniform_tensor(const Shape& shape) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = uniform();
  return Tensor(shape, std::move(v));
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[index(i)]);
  return p;
}

std::vector<std::uint64_t> Rng::state() const {
  std::stringstream ss;
  ss << engine_;
  std::vector<std::uint64_t> words(kStateWords);
  for (auto& w : words) ss >> w;
  if (!ss) throw ValueError("Rng::state: unexpected engine serialization");
  return words;
}

void Rng::set_state(std::span<const std::uint64_t> words) {
  if (words.size() != kStateWords) {
    throw ValueError("Rng::set_state: expected " + std::to_string(kStateWords) + " words, got " +
                     std::to_string(words.size()));
  }
  std::stringstream ss;
  for (auto w : words) ss << w << ' ';
  ss >> engine_;
  if (!ss) throw ValueError("Rng::set_state: engine rejected state");
}

}  // namespace icvae
