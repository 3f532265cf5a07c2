#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "icvae/tensor.hpp"

namespace icvae {

/// Isotropic Gaussian kernel density estimate:
/// p(x) = (1/M) sum_m N(x; support_m, h^2 I).
struct KdeModel {
  Tensor support;  // M x D
  double bandwidth = 1.0;

  /// Throws ValueError unless support is a nonempty matrix and bandwidth > 0.
  void validate() const;
};

/// log p(x_i) for every row of `points` (N x D). Scored with log-sum-exp, so
/// points far from all support give large negative but finite values.
std::vector<double> kde_log_densities(const KdeModel& model, const Tensor& points);

/// Mean of kde_log_densities.
double kde_mean_loglik(const KdeModel& model, const Tensor& points);

/// `count` values geometrically spaced from lo to hi inclusive.
std::vector<double> log_spaced_grid(double lo, double hi, std::size_t count);

struct BandwidthSearch {
  double best = 0.0;
  std::vector<double> grid;
  std::vector<double> scores;  // mean held-out log-density per candidate
  double best_score() const;
};

/// Picks the grid bandwidth with the highest mean held-out log-density over
/// `folds` folds. Fold membership: position in Rng(seed).permutation(n) modulo
/// folds. Ties keep the earliest candidate.
BandwidthSearch kde_fit_bandwidth(const Tensor& points, const std::vector<double>& grid, std::size_t folds,
                                  std::uint64_t seed = 0);

}  // namespace icvae
