#include "icvae/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "icvae/error.hpp"

namespace icvae {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor shape " + shape_to_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  impl_ = std::make_shared<Storage>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

Tensor Tensor::matrix(const std::vector<std::vector<double>>& rows, bool requires_grad) {
  if (rows.empty() || rows.front().empty()) throw ShapeError("matrix needs at least one row and column");
  std::vector<double> flat;
  flat.reserve(rows.size() * rows.front().size());
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) throw ShapeError("ragged rows in matrix literal");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), rows.front().size()}, std::move(flat), requires_grad);
}

Tensor::Storage& Tensor::storage() const {
  if (!impl_) throw ValueError("use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return storage().shape; }
std::size_t Tensor::numel() const { return storage().data.size(); }

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows() needs a rank-2 tensor, got " + shape_to_string(shape()));
  return shape()[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols() needs a rank-2 tensor, got " + shape_to_string(shape()));
  return shape()[1];
}

std::span<const double> Tensor::data() const { return storage().data; }
std::span<double> Tensor::mutable_data() { return storage().data; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_to_string(shape()));
  return storage().data[0];
}

bool Tensor::requires_grad() const { return storage().requires_grad; }
void Tensor::set_requires_grad(bool on) { storage().requires_grad = on; }
bool Tensor::has_grad() const { return storage().has_grad; }

std::span<const double> Tensor::grad() const {
  auto& s = storage();
  if (!s.has_grad) throw ValueError("tensor of shape " + shape_to_string(s.shape) + " has no gradient");
  return s.grad;
}

std::span<double> Tensor::mutable_grad() {
  auto& s = storage();
  if (!s.has_grad) zero_grad();
  return s.grad;
}

void Tensor::accumulate_grad(std::span<const double> g) {
  auto& s = storage();
  if (g.size() != s.data.size()) throw ShapeError("gradient size mismatch for " + shape_to_string(s.shape));
  if (!s.has_grad) {
    s.grad.assign(g.begin(), g.end());
    s.has_grad = true;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) s.grad[i] += g[i];
}

void Tensor::zero_grad() {
  auto& s = storage();
  s.grad.assign(s.data.size(), 0.0);
  s.has_grad = true;
}

void Tensor::clear_grad() {
  auto& s = storage();
  s.grad.clear();
  s.grad.shrink_to_fit();
  s.has_grad = false;
}

Tensor Tensor::clone() const { return Tensor(shape(), storage().data, false); }

}  // namespace icvae
