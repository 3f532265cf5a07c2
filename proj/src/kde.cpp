#include "icvae/kde.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "icvae/error.hpp"
#include "icvae/rng.hpp"

namespace icvae {

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const Matrix>;

constexpr std::size_t kChunkRows = 256;

Matrix gather_rows(const Tensor& t, const std::vector<std::size_t>& rows) {
  const std::size_t d = t.cols();
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  auto v = t.data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(rows[i] * d), d, out.data() + i * d);
  }
  return out;
}

/// Pairwise squared distances (rows of a) x (rows of b), clamped at zero.
Matrix squared_distances(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b,
                         const Eigen::VectorXd& b_norms) {
  Matrix d2 = -2.0 * (a * b.transpose());
  const Eigen::VectorXd a_norms = a.rowwise().squaredNorm();
  d2.colwise() += a_norms;
  d2.rowwise() += b_norms.transpose();
  return d2.cwiseMax(0.0);
}

/// log (1/M) sum_m N(x; s_m, h^2 I) for one row of squared distances.
double log_density_row(const double* d2, std::size_t m, double h, std::size_t dim) {
  const double inv = 1.0 / (2.0 * h * h);
  double lo = d2[0];
  for (std::size_t j = 1; j < m; ++j) lo = std::min(lo, d2[j]);
  double acc = 0.0;
  for (std::size_t j = 0; j < m; ++j) acc += std::exp(-(d2[j] - lo) * inv);
  const double log_norm = 0.5 * static_cast<double>(dim) * std::log(2.0 * std::numbers::pi * h * h);
  return -lo * inv + std::log(acc) - std::log(static_cast<double>(m)) - log_norm;
}

void check_points(const Tensor& points, std::size_t dim) {
  if (points.rank() != 2) throw ShapeError("KDE points must be a matrix, got " + shape_to_string(points.shape()));
  if (points.cols() != dim) {
    throw ShapeError("KDE points have " + std::to_string(points.cols()) + " columns, support has " +
                     std::to_string(dim));
  }
}

}  // namespace

void KdeModel::validate() const {
  if (!support.defined() || support.rank() != 2) throw ValueError("KDE support must be a nonempty matrix");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ValueError("KDE bandwidth must be positive and finite");
}

std::vector<double> kde_log_densities(const KdeModel& model, const Tensor& points) {
  model.validate();
  const std::size_t dim = model.support.cols();
  check_points(points, dim);
  const std::size_t m = model.support.rows();
  const std::size_t n = points.rows();

  ConstMap support(model.support.data().data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(dim));
  ConstMap all(points.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  const Eigen::VectorXd support_norms = support.rowwise().squaredNorm();

  std::vector<double> out(n);
  for (std::size_t begin = 0; begin < n; begin += kChunkRows) {
    const std::size_t rows = std::min(kChunkRows, n - begin);
    const Matrix d2 = squared_distances(all.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(rows)),
                                        support, support_norms);
    for (std::size_t i = 0; i < rows; ++i) out[begin + i] = log_density_row(d2.data() + i * m, m, model.bandwidth, dim);
  }
  return out;
}

double kde_mean_loglik(const KdeModel& model, const Tensor& points) {
  const auto lp = kde_log_densities(model, points);
  double s = 0.0;
  for (double v : lp) s += v;
  return s / static_cast<double>(lp.size());
}

std::vector<double> log_spaced_grid(double lo, double hi, std::size_t count) {
  if (count == 0) throw ValueError("bandwidth grid size must be at least 1");
  if (!(lo > 0.0) || !(hi >= lo)) throw ValueError("bandwidth grid needs 0 < lo <= hi");
  if (count == 1) return {lo};
  std::vector<double> g(count);
  const double a = std::log(lo);
  const double step = (std::log(hi) - a) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) g[i] = std::exp(a + step * static_cast<double>(i));
  g.front() = lo;
  g.back() = hi;
  return g;
}

double BandwidthSearch::best_score() const {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] == best) return scores[i];
  }
  throw ValueError("bandwidth search is empty");
}

BandwidthSearch kde_fit_bandwidth(const Tensor& points, const std::vector<double>& grid, std::size_t folds,
                                  std::uint64_t seed) {
  if (grid.empty()) throw ValueError("bandwidth grid is empty");
  for (double h : grid) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ValueError("bandwidth grid values must be positive and finite");
  }
  if (folds < 2) throw ValueError("cross-validation needs at least 2 folds");
  if (points.rank() != 2) throw ShapeError("KDE points must be a matrix, got " + shape_to_string(points.shape()));
  const std::size_t n = points.rows();
  const std::size_t dim = points.cols();
  if (n < folds) throw ValueError("need at least as many points as folds");

  Rng rng(seed);
  const auto perm = rng.permutation(n);
  std::vector<std::vector<std::size_t>> members(folds);
  for (std::size_t i = 0; i < n; ++i) members[i % folds].push_back(perm[i]);

  std::vector<double> fold_sum(grid.size(), 0.0);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train;
    for (std::size_t g = 0; g < folds; ++g) {
      if (g != f) train.insert(train.end(), members[g].begin(), members[g].end());
    }
    std::sort(train.begin(), train.end());
    std::vector<std::size_t> held = members[f];
    std::sort(held.begin(), held.end());

    const Matrix support = gather_rows(points, train);
    const Eigen::VectorXd support_norms = support.rowwise().squaredNorm();
    const Matrix query = gather_rows(points, held);
    const std::size_t m = train.size();

    std::vector<double> sums(grid.size(), 0.0);
    for (std::size_t begin = 0; begin < held.size(); begin += kChunkRows) {
      const std::size_t rows = std::min(kChunkRows, held.size() - begin);
      const Matrix d2 = squared_distances(
          query.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(rows)), support, support_norms);
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t k = 0; k < grid.size(); ++k) sums[k] += log_density_row(d2.data() + i * m, m, grid[k], dim);
      }
    }
    for (std::size_t k = 0; k < grid.size(); ++k) fold_sum[k] += sums[k] / static_cast<double>(held.size());
  }

  BandwidthSearch out;
  out.grid = grid;
  out.scores.resize(grid.size());
  std::size_t best = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out.scores[k] = fold_sum[k] / static_cast<double>(folds);
    if (out.scores[k] > out.scores[best]) best = k;
  }
  out.best = grid[best];
  return out;
}

}  // namespace icvae
