#include "icvae/eval.hpp"

#include <algorithm>

#include "icvae/error.hpp"

namespace icvae {

namespace {

constexpr std::size_t kChunk = 1000;

Tensor decode_eval(const InfoCatVae& model, const Tensor& z) {
  Tape tape(false);
  Rng unused(0);
  return model.decode(tape, z, unused, Mode::eval);
}

ImageGrid stack(std::size_t rows, std::size_t cols, const std::vector<std::vector<double>>& images) {
  std::vector<double> flat;
  const std::size_t width = images.front().size();
  flat.reserve(images.size() * width);
  for (const auto& img : images) flat.insert(flat.end(), img.begin(), img.end());
  return {rows, cols, Tensor({images.size(), width}, std::move(flat))};
}

}  // namespace

std::vector<double> decode_code(const InfoCatVae& model, std::span<const double> z) {
  Tensor out = decode_eval(model, Tensor({1, z.size()}, std::vector<double>(z.begin(), z.end())));
  return {out.data().begin(), out.data().end()};
}

Tensor generate_samples(const InfoCatVae& model, const LatentPrior& prior, std::size_t n, Rng& rng) {
  if (n == 0) throw ValueError("generate_samples: n must be at least 1");
  std::vector<double> flat;
  flat.reserve(n * model.config().input_dim);
  for (std::size_t done = 0; done < n;) {
    const std::size_t m = std::min(kChunk, n - done);
    const PriorBatch draws = sample_prior_batch(prior, m, rng);
    const Tensor x = decode_eval(model, draws.z);
    flat.insert(flat.end(), x.data().begin(), x.data().end());
    done += m;
  }
  return Tensor({n, model.config().input_dim}, std::move(flat));
}

double generated_crossentropy(const InfoCatVae& model, const LatentPrior& prior, std::size_t n, Rng& rng) {
  if (n == 0) throw ValueError("generated_crossentropy: n must be at least 1");
  const std::size_t k = prior.categories();
  double total = 0.0;
  for (std::size_t done = 0; done < n;) {
    const std::size_t m = std::min(kChunk, n - done);
    const PriorBatch draws = sample_prior_batch(prior, m, rng);
    Tape tape(false);
    Rng unused(0);
    const Tensor x = model.decode(tape, draws.z, unused, Mode::eval);
    const Tensor log_q = tape.log_softmax_rows(model.classify_logits(tape, x, unused, Mode::eval));
    auto lq = log_q.data();
    for (std::size_t i = 0; i < m; ++i) total -= lq[i * k + draws.categories[i]];
    done += m;
  }
  return total / static_cast<double>(n);
}

ImageGrid interpolate_centroids(const InfoCatVae& model, const LatentPrior& prior, std::size_t steps) {
  const std::size_t k = prior.categories();
  const std::size_t d = prior.latent_dim();
  std::vector<std::vector<double>> images;
  images.reserve(k * (steps + 1));
  for (std::size_t c = 0; c < k; ++c) {
    const auto from = prior.mean(c);
    const auto to = prior.mean((c + 1) % k);
    images.push_back(decode_code(model, from));
    for (std::size_t s = 1; s <= steps; ++s) {
      const double t = static_cast<double>(s) / static_cast<double>(steps + 1);
      std::vector<double> z(d);
      for (std::size_t j = 0; j < d; ++j) z[j] = (1.0 - t) * from[j] + t * to[j];
      images.push_back(decode_code(model, z));
    }
  }
  return stack(k, steps + 1, images);
}

ImageGrid lambda_sweep(const InfoCatVae& model, const LatentPrior& prior, std::size_t category,
                       const std::vector<double>& values) {
  if (values.empty()) throw ValueError("lambda_sweep: no values given");
  if (category >= prior.categories()) {
    throw ValueError("lambda_sweep: category " + std::to_string(category) + " out of range");
  }
  std::vector<std::vector<double>> images;
  for (double lambda : values) images.push_back(decode_code(model, prior.rescaled(lambda).mean(category)));
  return stack(1, values.size(), images);
}

ImageGrid sample_grid(const InfoCatVae& model, const LatentPrior& prior, std::size_t per_class, Rng& rng) {
  if (per_class == 0) throw ValueError("sample_grid: per_class must be at least 1");
  const std::size_t k = prior.categories();
  const std::size_t d = prior.latent_dim();
  std::vector<double> z;
  z.reserve(k * per_class * d);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const auto draw = sample_prior(prior, c, rng);
      z.insert(z.end(), draw.z.begin(), draw.z.end());
    }
  }
  return {k, per_class, decode_eval(model, Tensor({k * per_class, d}, std::move(z)))};
}

}  // namespace icvae
