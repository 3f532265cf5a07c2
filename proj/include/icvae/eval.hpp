#pragma once

#include <cstddef>
#include <vector>

#include "icvae/image.hpp"
#include "icvae/model.hpp"

namespace icvae {

/// Decodes n prior draws (eval mode) as an n x input_dim tensor.
Tensor generate_samples(const InfoCatVae& model, const LatentPrior& prior, std::size_t n, Rng& rng);

/// -(1/n) sum_i log q(c_i | decode(z_i)) over n prior draws (c_i, z_i), in nats.
/// Eval mode; draws are processed in chunks of at most 1000.
double generated_crossentropy(const InfoCatVae& model, const LatentPrior& prior, std::size_t n, Rng& rng);

/// K rows of steps+1 images. Row c starts at decode(mean_c) and continues with
/// z(t) = (1-t) mean_c + t mean_{c+1} at t = k/(steps+1), k = 1..steps. The last
/// row wraps around to mean_0.
ImageGrid interpolate_centroids(const InfoCatVae& model, const LatentPrior& prior, std::size_t steps);

/// One row: decode(mean_c) with the prior magnitude replaced by each value.
ImageGrid lambda_sweep(const InfoCatVae& model, const LatentPrior& prior, std::size_t category,
                       const std::vector<double>& values);

/// K rows of per_class images, row c decoding mean_c + N(0, I) draws.
ImageGrid sample_grid(const InfoCatVae& model, const LatentPrior& prior, std::size_t per_class, Rng& rng);

/// Eval-mode decode of a single code (a 1-row batch).
std::vector<double> decode_code(const InfoCatVae& model, std::span<const double> z);

}  // namespace icvae
