#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "icvae/adam.hpp"
#include "icvae/checkpoint.hpp"
#include "icvae/data.hpp"
#include "icvae/model.hpp"
#include "icvae/objective.hpp"

namespace icvae {

/// How the information term is combined with the inference objective.
/// joint: one gradient step on the full loss per batch.
/// alternate: a step on recon + KL terms, then a separate step on the info term.
enum class InfoSchedule { joint, alternate };

std::string_view to_string(InfoSchedule s);
InfoSchedule parse_info_schedule(std::string_view s);

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 128;
  double learning_rate = 1e-4;
  Variant mode = Variant::infocatvae;
  Betas betas;
  std::uint64_t seed = 0;
  /// Prior draws per step for the info term; follows batch_size when unset.
  std::optional<std::size_t> info_samples;
  InfoSchedule info_schedule = InfoSchedule::joint;
  bool info_grad_to_decoder = true;
  Likelihood likelihood = Likelihood::bernoulli;
  bool shuffle = true;
  /// Write a checkpoint every N epochs (0 disables periodic checkpoints).
  std::size_t checkpoint_every = 0;

  std::size_t info_samples_per_step() const { return info_samples.value_or(batch_size); }
  ObjectiveOptions objective() const;
  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

/// Everything needed to continue training bit-exactly.
struct TrainState {
  InfoCatVae model;
  LatentPrior prior;
  Adam adam;
  Rng rng;
  std::size_t epoch = 0;  // completed epochs
  std::uint64_t step = 0;

  /// Fresh state: parameters initialized from Rng(seed), which then drives
  /// every later random draw.
  static TrainState initialize(const ModelConfig& model, const TrainConfig& train);
};

/// Serializes model config, parameters, Adam moments, counters and RNG state.
std::vector<NamedTensor> to_checkpoint(const TrainState& state);
/// Rebuilds a state from checkpoint entries; optimizer settings come from `train`.
TrainState from_checkpoint(const std::vector<NamedTensor>& entries, const TrainConfig& train);
/// Model configuration and parameters only (for sampling and evaluation).
InfoCatVae model_from_checkpoint(const std::vector<NamedTensor>& entries);

/// One optimization step on a batch. Returns the loss measured before the update.
/// Throws NumericalError, listing every term, when the loss is not finite.
LossBreakdown train_step(TrainState& state, const TrainConfig& config, const Tensor& x);

struct EpochMetrics {
  std::size_t epoch = 0;
  LossBreakdown mean;  // per-sample average over the epoch
};

/// "epoch\trecon\tkl_cat\tkl_gauss\tinfo\ttotal" with round-trip precision.
std::string format_metrics_line(const EpochMetrics& m);

/// Trains from state.epoch up to config.epochs. With `out_dir`, appends one
/// line per epoch to metrics.tsv, writes checkpoint-epoch-NNNN.icvae every
/// config.checkpoint_every epochs and final.icvae at the end.
std::vector<EpochMetrics> train_loop(TrainState& state, const TrainConfig& config, const IdxDataset& data,
                                     const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                                     const std::function<void(const EpochMetrics&)>& on_epoch = {});

}  // namespace icvae
