#include "icvae/model.hpp"

#include <cmath>
#include <string>

#include "icvae/error.hpp"

namespace icvae {

void ModelConfig::validate() const {
  if (categories == 0) throw ConfigError("categories", "must be positive");
  if (delta == 0) throw ConfigError("delta", "must be positive");
  if (latent_dim == 0) throw ConfigError("latent_dim", "must be positive");
  if (latent_dim % categories != 0) {
    throw ConfigError("latent_dim", std::to_string(latent_dim) + " is not divisible by categories=" +
                                        std::to_string(categories));
  }
  if (latent_dim != categories * delta) {
    throw ConfigError("latent_dim", "must equal categories * delta = " + std::to_string(categories * delta));
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda", "must be finite and nonnegative");
  if (input_dim == 0) throw ConfigError("input_dim", "must be positive");
  if (hidden_dim == 0) throw ConfigError("hidden_dim", "must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout", "must lie in [0, 1)");
}

LatentPrior::LatentPrior(std::size_t categories, std::size_t delta, std::size_t latent_dim, double lambda)
    : categories_(categories), delta_(delta), latent_dim_(latent_dim), lambda_(lambda) {
  if (categories == 0 || delta == 0) throw ValueError("prior: categories and delta must be positive");
  if (latent_dim % categories != 0 || latent_dim != categories * delta) {
    throw ValueError("prior: latent_dim " + std::to_string(latent_dim) + " must equal categories * delta = " +
                     std::to_string(categories * delta));
  }
  means_.assign(categories * latent_dim, 0.0);
  for (std::size_t c = 0; c < categories; ++c) {
    for (std::size_t j = c * delta; j < (c + 1) * delta; ++j) means_[c * latent_dim + j] = lambda;
  }
}

std::span<const double> LatentPrior::mean(std::size_t c) const {
  if (c >= categories_) {
    throw ValueError("prior: category " + std::to_string(c) + " out of range for K=" + std::to_string(categories_));
  }
  return std::span<const double>(means_).subspan(c * latent_dim_, latent_dim_);
}

Tensor LatentPrior::means() const { return Tensor({categories_, latent_dim_}, means_); }

std::vector<double> LatentPrior::code(std::size_t c, std::span<const double> noise) const {
  auto m = mean(c);
  if (noise.size() != latent_dim_) throw ShapeError("prior: noise has wrong dimension");
  std::vector<double> z(m.begin(), m.end());
  for (std::size_t j = 0; j < z.size(); ++j) z[j] += noise[j];
  return z;
}

LatentPrior build_prior_means(const ModelConfig& config) {
  config.validate();
  return LatentPrior(config.categories, config.delta, config.latent_dim, config.lambda);
}

PriorSample sample_prior(const LatentPrior& prior, std::optional<std::size_t> category, Rng& rng) {
  const std::size_t c = category ? *category : rng.index(prior.categories());
  if (c >= prior.categories()) {
    throw ValueError("sample_prior: category " + std::to_string(c) + " >= K=" + std::to_string(prior.categories()));
  }
  std::vector<double> noise(prior.latent_dim());
  for (auto& e : noise) e = rng.normal();
  return {c, prior.code(c, noise)};
}

PriorBatch sample_prior_batch(const LatentPrior& prior, std::size_t n, Rng& rng) {
  if (n == 0) throw ValueError("sample_prior_batch: n must be positive");
  PriorBatch batch;
  batch.categories.reserve(n);
  std::vector<double> z;
  z.reserve(n * prior.latent_dim());
  for (std::size_t i = 0; i < n; ++i) {
    auto s = sample_prior(prior, std::nullopt, rng);
    batch.categories.push_back(s.category);
    z.insert(z.end(), s.z.begin(), s.z.end());
  }
  batch.z = Tensor({n, prior.latent_dim()}, std::move(z));
  return batch;
}

EncoderOutput categorical_posterior(Tape& tape, const Tensor& logits) {
  EncoderOutput out;
  out.logits = logits;
  out.cat_probs = tape.softmax_rows(logits);
  out.log_probs = tape.log_softmax_rows(logits);
  return out;
}

Tensor one_hot_rows(std::size_t rows, std::size_t categories, std::size_t c) {
  Tensor t = Tensor::zeros({rows, categories});
  auto v = t.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) v[r * categories + c] = 1.0;
  return t;
}

InfoCatVae::InfoCatVae(const ModelConfig& config) : config_(config), dropout_(config.dropout) {
  config_.validate();
  const auto in = config_.input_dim, hid = config_.hidden_dim, k = config_.categories, d = config_.latent_dim;
  enc_fc_ = LinearLayer(params_, "encoder.fc", in, hid);
  classifier_ = LinearLayer(params_, "encoder.classifier", hid, k);
  mu_head_ = LinearLayer(params_, "encoder.mu", hid + k, d);
  log_var_head_ = LinearLayer(params_, "encoder.log_var", hid + k, d);
  dec_fc_ = LinearLayer(params_, "decoder.fc", d, hid);
  dec_out_ = LinearLayer(params_, "decoder.out", hid, in);
}

void InfoCatVae::check_input(const Tensor& x, std::size_t width, const char* what) const {
  if (x.rank() != 2 || x.cols() != width) {
    throw ShapeError(std::string(what) + ": expected (batch x " + std::to_string(width) + "), got " +
                     shape_to_string(x.shape()));
  }
}

Tensor InfoCatVae::trunk(Tape& tape, const Tensor& x, Rng& rng, Mode mode) const {
  check_input(x, config_.input_dim, "encode");
  return tape.relu(dropout_.forward(tape, enc_fc_.forward(tape, x), rng, mode));
}

Tensor InfoCatVae::classify_logits(Tape& tape, const Tensor& x, Rng& rng, Mode mode) const {
  return classifier_.forward(tape, trunk(tape, x, rng, mode));
}

EncoderOutput InfoCatVae::encode(Tape& tape, const Tensor& x, Rng& rng, Mode mode) const {
  Tensor h = trunk(tape, x, rng, mode);
  EncoderOutput out = categorical_posterior(tape, classifier_.forward(tape, h));
  const auto batch = x.rows();
  out.mu.reserve(config_.categories);
  out.log_var.reserve(config_.categories);
  for (std::size_t c = 0; c < config_.categories; ++c) {
    Tensor conditioned = tape.concat_cols(h, one_hot_rows(batch, config_.categories, c));
    out.mu.push_back(mu_head_.forward(tape, conditioned));
    out.log_var.push_back(log_var_head_.forward(tape, conditioned));
  }
  return out;
}

Tensor InfoCatVae::decode_logits(Tape& tape, const Tensor& z, Rng& rng, Mode mode) const {
  check_input(z, config_.latent_dim, "decode");
  Tensor h = tape.relu(dropout_.forward(tape, dec_fc_.forward(tape, z), rng, mode));
  return dec_out_.forward(tape, h);
}

Tensor InfoCatVae::decode(Tape& tape, const Tensor& z, Rng& rng, Mode mode) const {
  return tape.sigmoid(decode_logits(tape, z, rng, mode));
}

Tensor reparameterize(Tape& tape, const Tensor& mu, const Tensor& log_var, const Tensor& eps) {
  if (mu.shape() != log_var.shape() || mu.shape() != eps.shape()) {
    throw ShapeError("reparameterize: shapes " + shape_to_string(mu.shape()) + ", " +
                     shape_to_string(log_var.shape()) + ", " + shape_to_string(eps.shape()) + " differ");
  }
  Tensor sigma = tape.exp(tape.scalar_mul(log_var, 0.5));
  return tape.add(mu, tape.mul(sigma, eps));
}

Tensor reparameterize(Tape& tape, const Tensor& mu, const Tensor& log_var, Rng& rng) {
  if (mu.shape() != log_var.shape()) {
    throw ShapeError("reparameterize: shapes " + shape_to_string(mu.shape()) + " and " +
                     shape_to_string(log_var.shape()) + " differ");
  }
  return reparameterize(tape, mu, log_var, rng.normal_tensor(mu.shape()));
}

}  // namespace icvae
