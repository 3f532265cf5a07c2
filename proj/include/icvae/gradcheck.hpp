#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "icvae/tape.hpp"
#include "icvae/tensor.hpp"

namespace icvae {

/// Scalar-valued function of one tensor, built on the given tape.
using ScalarFn = std::function<Tensor(Tape&, const Tensor&)>;
/// Scalar-valued function whose inputs are captured (e.g. model parameters).
using ClosureFn = std::function<Tensor(Tape&)>;

/// A single coordinate of a tensor to probe.
struct Coordinate {
  Tensor tensor;
  std::size_t index;
};

/// Compares the tape gradient of `f` at `x` with central differences of step
/// `h`. Returns max_i |analytic_i - fd_i| / max(1, |fd_i|).
///
/// `f` must be deterministic; h must lie in [1e-6, 1e-4]. Throws DomainError
/// when f evaluates to a non-finite value.
double finite_difference_check(const ScalarFn& f, const Tensor& x, double h = 1e-6);

/// Same check over an explicit set of coordinates of tensors captured by `f`.
/// Each probed tensor must already require grad. Existing grads are cleared.
double finite_difference_check(const ClosureFn& f, const std::vector<Coordinate>& coords, double h = 1e-6);

}  // namespace icvae
