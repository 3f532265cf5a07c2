#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "icvae/model.hpp"

namespace icvae {

enum class Likelihood { bernoulli, gaussian };

/// vanilla_catvae omits the information-maximization term.
enum class Variant { vanilla_catvae, infocatvae };

std::string_view to_string(Likelihood l);
std::string_view to_string(Variant v);
Likelihood parse_likelihood(std::string_view s);
Variant parse_variant(std::string_view s);

struct Betas {
  double cont = 10.0;
  double cat = 10.0;
  double info = 100.0;

  /// Throws ValueError on a negative weight.
  void validate() const;
};

/// Loss values of one evaluation. All terms are stored as nonnegative losses
/// (the ELBO is negated); total = recon + cat*kl_cat + cont*kl_gauss + info*info.
struct LossBreakdown {
  double recon = 0.0;
  double kl_cat = 0.0;
  double kl_gauss = 0.0;
  double info = 0.0;
  double total = 0.0;
  Betas betas;

  double recomposed_total() const { return recon + betas.cat * kl_cat + betas.cont * kl_gauss + betas.info * info; }
};

struct ObjectiveOptions {
  Variant variant = Variant::infocatvae;
  Betas betas;
  Likelihood likelihood = Likelihood::bernoulli;
  std::size_t info_samples = 128;
  /// When false the decoder output is detached before classification, so the
  /// info term only trains the classifier path.
  bool info_grad_to_decoder = true;
  Mode mode = Mode::train;
};

/// Per-row reconstruction loss for decoder logits: pixel-summed binary
/// cross-entropy (bernoulli) or squared error against sigmoid(logits)
/// (gaussian). Shape (batch x 1).
Tensor reconstruction_loss_rows(Tape& tape, const Tensor& x, const Tensor& decoder_logits, Likelihood likelihood);

/// sum_c q(c|x) * loss(x, decode(z_c)), averaged over the batch, given the
/// decoder logits of every category branch.
Tensor weighted_reconstruction(Tape& tape, const Tensor& x, const Tensor& cat_probs,
                               const std::vector<Tensor>& decoder_logits, Likelihood likelihood);

/// Reparametrizes every category branch, decodes it and weights its loss by q(c|x).
Tensor reconstruction_term(Tape& tape, const InfoCatVae& model, const Tensor& x, const EncoderOutput& enc, Rng& rng,
                           Likelihood likelihood, Mode mode);

/// Batch mean of KL(q(c|x) || Uniform(K)) = log K - H(q(c|x)).
Tensor categorical_kl(Tape& tape, const EncoderOutput& enc);

/// Batch mean of sum_c q(c|x) KL(N(mu_c(x), sigma_c^2(x)) || N(mean_c, I)), in closed form.
Tensor gaussian_kl_expected(Tape& tape, const EncoderOutput& enc, const LatentPrior& prior);

/// -(1/n) sum_i log q(c_i | decode(z_i)) for n draws (c_i, z_i) from the prior.
/// The decoder's mean output is classified directly (no pixel sampling).
Tensor info_max_term(Tape& tape, const InfoCatVae& model, const LatentPrior& prior, Rng& rng, std::size_t n_samples,
                     Mode mode, bool grad_to_decoder = true);

/// Differentiable loss terms plus their values.
struct Loss {
  Tensor recon;
  Tensor kl_cat;
  Tensor kl_gauss;
  Tensor info;  // undefined for vanilla_catvae
  Tensor total;
  LossBreakdown breakdown;
};

Loss total_loss(Tape& tape, const InfoCatVae& model, const LatentPrior& prior, const Tensor& x, Rng& rng,
                const ObjectiveOptions& options);

}  // namespace icvae
