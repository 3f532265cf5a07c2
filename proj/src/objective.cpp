#include "icvae/objective.hpp"

#include <cmath>

#include "icvae/error.hpp"

namespace icvae {

std::string_view to_string(Likelihood l) { return l == Likelihood::bernoulli ? "bernoulli" : "gaussian"; }

std::string_view to_string(Variant v) { return v == Variant::vanilla_catvae ? "vanilla_catvae" : "infocatvae"; }

Likelihood parse_likelihood(std::string_view s) {
  if (s == "bernoulli") return Likelihood::bernoulli;
  if (s == "gaussian") return Likelihood::gaussian;
  throw ValueError("unknown likelihood '" + std::string(s) + "' (expected bernoulli or gaussian)");
}

Variant parse_variant(std::string_view s) {
  if (s == "vanilla_catvae") return Variant::vanilla_catvae;
  if (s == "infocatvae") return Variant::infocatvae;
  throw ValueError("unknown mode '" + std::string(s) + "' (expected vanilla_catvae or infocatvae)");
}

void Betas::validate() const {
  if (!(cont >= 0.0)) throw ValueError("beta_cont must be nonnegative");
  if (!(cat >= 0.0)) throw ValueError("beta_cat must be nonnegative");
  if (!(info >= 0.0)) throw ValueError("beta_info must be nonnegative");
}

Tensor reconstruction_loss_rows(Tape& tape, const Tensor& x, const Tensor& decoder_logits, Likelihood likelihood) {
  if (likelihood == Likelihood::bernoulli) return tape.bce_with_logits_rows(decoder_logits, x);
  return tape.sum_rows(tape.square(tape.sub(tape.sigmoid(decoder_logits), x)));
}

Tensor weighted_reconstruction(Tape& tape, const Tensor& x, const Tensor& cat_probs,
                               const std::vector<Tensor>& decoder_logits, Likelihood likelihood) {
  if (decoder_logits.size() != cat_probs.cols()) {
    throw ShapeError("weighted_reconstruction: " + std::to_string(decoder_logits.size()) + " branches for " +
                     std::to_string(cat_probs.cols()) + " categories");
  }
  if (likelihood == Likelihood::bernoulli) {
    for (double v : x.data()) {
      if (!(v >= 0.0 && v <= 1.0)) throw DomainError("bernoulli likelihood needs inputs in [0, 1]");
    }
  }
  Tensor per_sample;
  for (std::size_t c = 0; c < decoder_logits.size(); ++c) {
    Tensor weighted = tape.mul(tape.slice_cols(cat_probs, c, c + 1),
                               reconstruction_loss_rows(tape, x, decoder_logits[c], likelihood));
    per_sample = per_sample.defined() ? tape.add(per_sample, weighted) : weighted;
  }
  return tape.mean(per_sample);
}

Tensor reconstruction_term(Tape& tape, const InfoCatVae& model, const Tensor& x, const EncoderOutput& enc, Rng& rng,
                           Likelihood likelihood, Mode mode) {
  std::vector<Tensor> logits;
  logits.reserve(enc.categories());
  for (std::size_t c = 0; c < enc.categories(); ++c) {
    Tensor z = reparameterize(tape, enc.mu[c], enc.log_var[c], rng);
    logits.push_back(model.decode_logits(tape, z, rng, mode));
  }
  return weighted_reconstruction(tape, x, enc.cat_probs, logits, likelihood);
}

Tensor categorical_kl(Tape& tape, const EncoderOutput& enc) {
  const double batch = static_cast<double>(enc.cat_probs.rows());
  const double log_k = std::log(static_cast<double>(enc.cat_probs.cols()));
  // p * log p with log p from log_softmax: finite for finite logits, and exactly
  // 0 where p underflows to 0.
  Tensor neg_entropy = tape.scalar_mul(tape.sum(tape.mul(enc.cat_probs, enc.log_probs)), 1.0 / batch);
  return tape.add(neg_entropy, Tensor::scalar(log_k));
}

Tensor gaussian_kl_expected(Tape& tape, const EncoderOutput& enc, const LatentPrior& prior) {
  if (enc.categories() != prior.categories()) throw ShapeError("gaussian_kl_expected: category count mismatch");
  const double batch = static_cast<double>(enc.cat_probs.rows());
  Tensor per_sample;
  for (std::size_t c = 0; c < enc.categories(); ++c) {
    const Tensor& mu = enc.mu[c];
    const Tensor& log_var = enc.log_var[c];
    if (mu.cols() != prior.latent_dim()) throw ShapeError("gaussian_kl_expected: latent dimension mismatch");
    for (double v : log_var.data()) {
      if (!std::isfinite(v)) throw DomainError("gaussian_kl_expected: non-finite log-variance");
    }
    auto m = prior.mean(c);
    std::vector<double> neg_mean(m.size());
    for (std::size_t j = 0; j < m.size(); ++j) neg_mean[j] = -m[j];
    Tensor diff = tape.add_bias(mu, Tensor({m.size()}, std::move(neg_mean)));
    // sigma^2 + (mu - mean)^2 - 1 - log sigma^2, summed over latent dims
    Tensor inner = tape.sub(tape.add(tape.exp(log_var), tape.square(diff)), tape.add(log_var, Tensor::scalar(1.0)));
    Tensor kl_rows = tape.scalar_mul(tape.sum_rows(inner), 0.5);
    Tensor weighted = tape.mul(tape.slice_cols(enc.cat_probs, c, c + 1), kl_rows);
    per_sample = per_sample.defined() ? tape.add(per_sample, weighted) : weighted;
  }
  return tape.scalar_mul(tape.sum(per_sample), 1.0 / batch);
}

Tensor info_max_term(Tape& tape, const InfoCatVae& model, const LatentPrior& prior, Rng& rng, std::size_t n_samples,
                     Mode mode, bool grad_to_decoder) {
  if (n_samples == 0) throw ValueError("info_max_term: n_samples must be at least 1");
  PriorBatch draws = sample_prior_batch(prior, n_samples, rng);
  Tensor generated = model.decode(tape, draws.z, rng, mode);
  if (!grad_to_decoder) generated = tape.detach(generated);
  Tensor log_q = tape.log_softmax_rows(model.classify_logits(tape, generated, rng, mode));
  Tensor picks = Tensor::zeros({n_samples, prior.categories()});
  auto pv = picks.mutable_data();
  for (std::size_t i = 0; i < n_samples; ++i) pv[i * prior.categories() + draws.categories[i]] = 1.0;
  return tape.scalar_mul(tape.sum(tape.mul(log_q, picks)), -1.0 / static_cast<double>(n_samples));
}

Loss total_loss(Tape& tape, const InfoCatVae& model, const LatentPrior& prior, const Tensor& x, Rng& rng,
                const ObjectiveOptions& options) {
  options.betas.validate();
  Loss loss;
  EncoderOutput enc = model.encode(tape, x, rng, options.mode);
  loss.recon = reconstruction_term(tape, model, x, enc, rng, options.likelihood, options.mode);
  loss.kl_cat = categorical_kl(tape, enc);
  loss.kl_gauss = gaussian_kl_expected(tape, enc, prior);

  const auto& b = options.betas;
  loss.total = tape.add(loss.recon, tape.add(tape.scalar_mul(loss.kl_cat, b.cat), tape.scalar_mul(loss.kl_gauss, b.cont)));
  if (options.variant == Variant::infocatvae) {
    loss.info = info_max_term(tape, model, prior, rng, options.info_samples, options.mode, options.info_grad_to_decoder);
    loss.total = tape.add(loss.total, tape.scalar_mul(loss.info, b.info));
  }

  loss.breakdown.recon = loss.recon.item();
  loss.breakdown.kl_cat = loss.kl_cat.item();
  loss.breakdown.kl_gauss = loss.kl_gauss.item();
  loss.breakdown.info = loss.info.defined() ? loss.info.item() : 0.0;
  loss.breakdown.total = loss.total.item();
  loss.breakdown.betas = b;
  return loss;
}

}  // namespace icvae
