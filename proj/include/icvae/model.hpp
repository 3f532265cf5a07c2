#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "icvae/nn.hpp"
#include "icvae/rng.hpp"
#include "icvae/tape.hpp"

namespace icvae {

/// Network and prior dimensions. Defaults are the MNIST configuration.
struct ModelConfig {
  std::size_t categories = 10;  // K
  std::size_t delta = 2;        // width of each category's latent block
  std::size_t latent_dim = 20;  // d, must equal categories * delta
  double lambda = 2.0;          // prior mean magnitude
  std::size_t input_dim = 784;
  std::size_t hidden_dim = 400;
  double dropout = 0.25;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

/// Fixed prior p(c) p(z|c): c uniform over K categories, z|c ~ N(mean_c, I).
///
/// mean_c is lambda on coordinates [c*delta, (c+1)*delta) (0-based) and zero
/// elsewhere, so the means are mutually orthogonal with squared norm
/// delta * lambda^2.
class LatentPrior {
 public:
  LatentPrior(std::size_t categories, std::size_t delta, std::size_t latent_dim, double lambda);

  std::size_t categories() const noexcept { return categories_; }
  std::size_t delta() const noexcept { return delta_; }
  std::size_t latent_dim() const noexcept { return latent_dim_; }
  double lambda() const noexcept { return lambda_; }

  std::span<const double> mean(std::size_t c) const;
  /// Means stacked as a (K x d) tensor.
  Tensor means() const;
  /// mean_c + noise.
  std::vector<double> code(std::size_t c, std::span<const double> noise) const;
  /// Same block structure with a different magnitude.
  LatentPrior rescaled(double lambda) const { return {categories_, delta_, latent_dim_, lambda}; }

 private:
  std::size_t categories_;
  std::size_t delta_;
  std::size_t latent_dim_;
  double lambda_;
  std::vector<double> means_;  // row-major K x d
};

LatentPrior build_prior_means(const ModelConfig& config);

struct PriorSample {
  std::size_t category;
  std::vector<double> z;
};

/// Draws (c, z). When `category` is empty, c is uniform over the K categories.
PriorSample sample_prior(const LatentPrior& prior, std::optional<std::size_t> category, Rng& rng);

struct PriorBatch {
  std::vector<std::size_t> categories;
  Tensor z;  // n x d
};

/// n independent draws with uniform categories.
PriorBatch sample_prior_batch(const LatentPrior& prior, std::size_t n, Rng& rng);

/// q(c|x) and the per-category Gaussian parameters of q(z|x,c).
struct EncoderOutput {
  Tensor logits;     // batch x K
  Tensor cat_probs;  // batch x K, rows on the simplex
  Tensor log_probs;  // batch x K
  std::vector<Tensor> mu;       // K tensors, each batch x d
  std::vector<Tensor> log_var;  // K tensors, each batch x d

  std::size_t batch() const { return cat_probs.rows(); }
  std::size_t categories() const { return mu.size(); }
};

/// Builds EncoderOutput's categorical fields from classifier logits.
EncoderOutput categorical_posterior(Tape& tape, const Tensor& logits);

/// Row one-hot matrix (rows x K) with ones in column c.
Tensor one_hot_rows(std::size_t rows, std::size_t categories, std::size_t c);

/// The encoder, classifier head and decoder.
///
/// Encoder trunk: ReLU(Dropout(FC input->hidden)). Classifier: softmax(FC hidden->K).
/// For each category c the trunk output is concatenated with one_hot(c) and fed
/// to two FC (hidden+K)->d heads giving mu and log-variance.
/// Decoder: ReLU(Dropout(FC d->hidden)), then Sigmoid(FC hidden->input).
class InfoCatVae {
 public:
  explicit InfoCatVae(const ModelConfig& config);

  InfoCatVae(const InfoCatVae&) = delete;
  InfoCatVae& operator=(const InfoCatVae&) = delete;
  InfoCatVae(InfoCatVae&&) = default;
  InfoCatVae& operator=(InfoCatVae&&) = default;

  const ModelConfig& config() const noexcept { return config_; }
  const ParameterStore& parameters() const noexcept { return params_; }

  Tensor trunk(Tape& tape, const Tensor& x, Rng& rng, Mode mode) const;
  /// Classifier logits computed from inputs x.
  Tensor classify_logits(Tape& tape, const Tensor& x, Rng& rng, Mode mode) const;
  EncoderOutput encode(Tape& tape, const Tensor& x, Rng& rng, Mode mode) const;

  /// Pre-sigmoid decoder output.
  Tensor decode_logits(Tape& tape, const Tensor& z, Rng& rng, Mode mode) const;
  /// Pixel means in (0, 1).
  Tensor decode(Tape& tape, const Tensor& z, Rng& rng, Mode mode) const;

 private:
  void check_input(const Tensor& x, std::size_t width, const char* what) const;

  ModelConfig config_;
  ParameterStore params_;
  LinearLayer enc_fc_;
  LinearLayer classifier_;
  LinearLayer mu_head_;
  LinearLayer log_var_head_;
  LinearLayer dec_fc_;
  LinearLayer dec_out_;
  DropoutLayer dropout_;
};

/// z = mu + exp(log_var / 2) * eps with eps ~ N(0, I) drawn from rng.
Tensor reparameterize(Tape& tape, const Tensor& mu, const Tensor& log_var, Rng& rng);
/// Same with explicit noise (treated as a constant).
Tensor reparameterize(Tape& tape, const Tensor& mu, const Tensor& log_var, const Tensor& eps);

}  // namespace icvae
