#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "icvae/nn.hpp"

namespace icvae {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are keyed by parameter name and
/// created lazily on the first step.
class Adam {
 public:
  explicit Adam(AdamOptions options = {});

  const AdamOptions& options() const noexcept { return options_; }
  std::uint64_t step_count() const noexcept { return t_; }

  /// Applies one update to every parameter, then zeroes the grads.
  /// Throws ValueError naming the first parameter without a grad.
  void step(const ParameterStore& store);

  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  const std::map<std::string, Moments>& moments() const noexcept { return moments_; }

  /// Restores optimizer state (used when resuming from a checkpoint).
  void restore(std::uint64_t t, std::map<std::string, Moments> moments);

 private:
  AdamOptions options_;
  std::uint64_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace icvae
