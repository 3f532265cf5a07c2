#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "icvae/tensor.hpp"

namespace icvae {

/// Images laid out row-major on a grid: row r, column c is images row r*cols + c.
struct ImageGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Tensor images;  // (rows*cols) x pixels
};

/// Pixel value in [0, 1] to a byte: floor(v*255 + 0.5), clamped to [0, 255].
std::uint8_t to_byte(double v);

/// Binary PGM ("P5") of a rows x cols grid of side x side images separated by
/// `sep`-pixel white gutters. Throws ShapeError when the image count or size
/// does not match.
std::vector<std::uint8_t> render_sample_grid(const Tensor& images, std::size_t rows, std::size_t cols, std::size_t sep,
                                             std::size_t side = 28);
std::vector<std::uint8_t> render_sample_grid(const ImageGrid& grid, std::size_t sep, std::size_t side = 28);

}  // namespace icvae
