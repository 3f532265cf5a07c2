#include "icvae/image.hpp"

#include <cmath>
#include <string>

#include "icvae/error.hpp"

namespace icvae {

std::uint8_t to_byte(double v) {
  if (!(v > 0.0)) return 0;  // also maps NaN to black
  const double b = std::floor(v * 255.0 + 0.5);
  return b >= 255.0 ? 255 : static_cast<std::uint8_t>(b);
}

std::vector<std::uint8_t> render_sample_grid(const Tensor& images, std::size_t rows, std::size_t cols, std::size_t sep,
                                             std::size_t side) {
  if (rows == 0 || cols == 0 || side == 0) throw ShapeError("render_sample_grid: empty grid");
  if (images.rank() != 2 || images.rows() != rows * cols) {
    throw ShapeError("render_sample_grid: expected " + std::to_string(rows * cols) + " images, got " +
                     shape_to_string(images.shape()));
  }
  if (images.cols() != side * side) {
    throw ShapeError("render_sample_grid: images have " + std::to_string(images.cols()) + " pixels, expected " +
                     std::to_string(side * side));
  }
  const std::size_t width = cols * side + (cols - 1) * sep;
  const std::size_t height = rows * side + (rows - 1) * sep;
  const std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";

  std::vector<std::uint8_t> out(header.begin(), header.end());
  const std::size_t body = out.size();
  out.resize(body + width * height, 255);
  auto px = images.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double* img = px.data() + (r * cols + c) * side * side;
      const std::size_t y0 = r * (side + sep);
      const std::size_t x0 = c * (side + sep);
      for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) out[body + (y0 + y) * width + x0 + x] = to_byte(img[y * side + x]);
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> render_sample_grid(const ImageGrid& grid, std::size_t sep, std::size_t side) {
  return render_sample_grid(grid.images, grid.rows, grid.cols, sep, side);
}

}  // namespace icvae
