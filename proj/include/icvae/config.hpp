#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "icvae/model.hpp"
#include "icvae/train.hpp"

namespace icvae {

struct EvalConfig {
  std::size_t kde_fit_samples = 5000;   // training images the KDE is fitted on
  std::size_t kde_eval_samples = 1000;  // generated samples scored under it
  std::size_t kde_folds = 5;
  double kde_grid_min = 0.05;
  double kde_grid_max = 1.0;
  std::size_t kde_grid_size = 20;
  std::size_t eval_n = 10000;  // prior draws for the generated cross-entropy
  std::size_t per_class = 8;
  std::size_t interp_steps = 9;
  std::vector<double> lambda_values{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::size_t sweep_category = 0;
  std::size_t grid_sep = 2;
};

/// Everything a run needs. Plain-text form: one `key = value` per line, `#`
/// starts a comment, unknown keys are rejected.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  std::filesystem::path data_dir = "data/mnist";
  std::size_t train_subset = 1000;  // 0 uses every image
  std::filesystem::path out;         // empty: command default
  std::filesystem::path checkpoint;  // empty: fresh model from `seed`

  /// Throws ConfigError naming the first invalid key.
  void validate() const;
};

using Overrides = std::vector<std::pair<std::string, std::string>>;

/// Splits `key=value` lines. Blank lines and `#` comments are skipped.
/// Throws ConfigError on a line without '='.
Overrides parse_assignments(std::string_view text);

/// Defaults, then `text`, then `overrides` (later wins). latent_dim defaults
/// to categories * delta when not given.
RunConfig parse_config_text(std::string_view text, const Overrides& overrides = {});
/// Same, reading the file when given. Throws IoError if it cannot be read.
RunConfig parse_config(const std::optional<std::filesystem::path>& file, const Overrides& overrides = {});

/// Every key with its current value, in a form parse_config_text reads back
/// to an identical config.
std::string materialize(const RunConfig& config);

/// All accepted keys in documentation order.
std::vector<std::string_view> config_keys();

}  // namespace icvae
