#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace icvae {

struct GradCheckResult {
  std::string name;
  double error = 0.0;  // worst relative error over all trials
  double tolerance = 0.0;
  std::size_t trials = 0;
  bool passed() const { return error <= tolerance; }
};

struct GradSuiteOptions {
  std::uint64_t seed = 0;
  std::size_t op_trials = 20;        // random inputs per op
  double op_tolerance = 1e-4;
  std::size_t sampled_params = 240;  // spread evenly over the parameter tensors
  double model_tolerance = 1e-3;
  std::size_t batch = 8;
};

/// Finite-difference checks of every tape op plus the full InfoCatVAE loss on
/// the default architecture (eval mode, noise frozen by reseeding each call).
std::vector<GradCheckResult> run_gradient_suite(const GradSuiteOptions& options = {});

}  // namespace icvae
