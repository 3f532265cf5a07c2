#pragma once

// Shared test helpers and independent reference implementations. The
// references deliberately avoid the library's tape and Eigen paths: they are
// plain loops over std::vector written from the defining formulas.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "icvae/model.hpp"
#include "icvae/tensor.hpp"

namespace testsupport {

inline std::filesystem::path source_dir() { return ICVAE_SOURCE_DIR; }
inline std::filesystem::path mnist_dir() { return source_dir() / "data" / "mnist"; }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("icvae-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void set_values(const icvae::Tensor& t, const std::vector<double>& v) {
  icvae::Tensor h = t;
  auto d = h.mutable_data();
  std::copy(v.begin(), v.end(), d.begin());
}

inline void fill(const icvae::Tensor& t, double v) {
  icvae::Tensor h = t;
  for (auto& x : h.mutable_data()) x = v;
}

inline void set_param(const icvae::InfoCatVae& m, const std::string& name, const std::vector<double>& v) {
  set_values(m.parameters().get(name), v);
}

inline std::vector<double> to_vec(const icvae::Tensor& t) { return {t.data().begin(), t.data().end()}; }

/// KL(p || Uniform(K)) for one row, summed directly as sum_k p_k log(K p_k).
inline double ref_categorical_kl_row(const std::vector<double>& p) {
  const double k = static_cast<double>(p.size());
  double s = 0.0;
  for (double v : p) {
    if (v > 0.0) s += v * std::log(k * v);
  }
  return s;
}

/// KL(N(mu, diag(exp(log_var))) || N(m, I)) summed per coordinate.
inline double ref_gaussian_kl(const std::vector<double>& mu, const std::vector<double>& log_var,
                              const std::vector<double>& m) {
  double s = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    const double var = std::exp(log_var[j]);
    s += 0.5 * (var + (mu[j] - m[j]) * (mu[j] - m[j]) - 1.0 - log_var[j]);
  }
  return s;
}

/// log of (1/M) sum_m N(x; s_m, h^2 I) by direct summation of densities.
inline double ref_kde_log_density(const std::vector<double>& x, const std::vector<std::vector<double>>& support,
                                  double h) {
  const double dim = static_cast<double>(x.size());
  const double norm = std::pow(2.0 * std::numbers::pi * h * h, -dim / 2.0);
  double s = 0.0;
  for (const auto& p : support) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) d2 += (x[j] - p[j]) * (x[j] - p[j]);
    s += norm * std::exp(-d2 / (2.0 * h * h));
  }
  return std::log(s / static_cast<double>(support.size()));
}

/// Two-category model on 2-pixel inputs whose classifier recovers the
/// generating category of every prior sample with near certainty: the prior
/// means are 100 * e_c, the decoder maps z to sigmoid(relu(z) - 50) and the
/// classifier compares the two pixels with weight 1000.
inline icvae::InfoCatVae oracle_model() {
  icvae::ModelConfig cfg;
  cfg.categories = 2;
  cfg.delta = 1;
  cfg.latent_dim = 2;
  cfg.lambda = 100.0;
  cfg.input_dim = 2;
  cfg.hidden_dim = 2;
  cfg.dropout = 0.0;
  icvae::InfoCatVae m(cfg);
  set_param(m, "decoder.fc.weight", {1, 0, 0, 1});
  set_param(m, "decoder.out.weight", {1, 0, 0, 1});
  set_param(m, "decoder.out.bias", {-50, -50});
  set_param(m, "encoder.fc.weight", {1, 0, 0, 1});
  set_param(m, "encoder.classifier.weight", {1000, -1000, -1000, 1000});
  return m;
}

/// Small architecture for exhaustive gradient checks.
inline icvae::ModelConfig tiny_config() {
  icvae::ModelConfig cfg;
  cfg.categories = 3;
  cfg.delta = 2;
  cfg.latent_dim = 6;
  cfg.lambda = 1.5;
  cfg.input_dim = 12;
  cfg.hidden_dim = 8;
  cfg.dropout = 0.25;
  return cfg;
}

/// Deterministic test image i: pixel p = ((37 i + 11 p) mod 256) / 255.
/// Shared with tests/golden/make_golden.py.
inline icvae::Tensor pattern_images(std::size_t n, std::size_t pixels = 784) {
  std::vector<double> v(n * pixels);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < pixels; ++p) v[i * pixels + p] = static_cast<double>((37 * i + 11 * p) % 256) / 255.0;
  }
  return icvae::Tensor({n, pixels}, std::move(v));
}

}  // namespace testsupport
