#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace icvae {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// A Tensor is a handle: copies share the same storage, which is what lets a
/// Tape hold references to the values it recorded. Use clone() for a deep copy.
/// All values are 64-bit; the library does not have a separate 32-bit path.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  /// 2-D tensor from nested rows; all rows must have equal length.
  static Tensor matrix(const std::vector<std::vector<double>>& rows, bool requires_grad = false);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  /// Leading dimension of a rank-2 tensor.
  std::size_t rows() const;
  /// Trailing dimension of a rank-2 tensor.
  std::size_t cols() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

  bool requires_grad() const;
  void set_requires_grad(bool on);

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  /// Adds `g` into the gradient buffer, allocating it on first use.
  void accumulate_grad(std::span<const double> g);
  /// Fills the gradient buffer with zeros (allocating it if absent).
  void zero_grad();
  /// Drops the gradient buffer entirely.
  void clear_grad();

  /// Deep copy of the values; the copy does not require grad.
  Tensor clone() const;
  bool same_storage(const Tensor& other) const noexcept { return impl_ == other.impl_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    bool has_grad = false;
  };

  Storage& storage() const;

  std::shared_ptr<Storage> impl_;
};

}  // namespace icvae
