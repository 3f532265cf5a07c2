#include "icvae/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "icvae/error.hpp"

namespace icvae {

namespace {

void check_step(double h) {
  if (!(h >= 1e-6 && h <= 1e-4)) throw ValueError("finite_difference_check: step must lie in [1e-6, 1e-4]");
}

double evaluate(const ClosureFn& f) {
  Tape tape(false);
  const double v = f(tape).item();
  if (!std::isfinite(v)) throw DomainError("finite_difference_check: function value is not finite");
  return v;
}

}  // namespace

double finite_difference_check(const ScalarFn& f, const Tensor& x, double h) {
  Tensor probe = x.clone();
  probe.set_requires_grad(true);
  std::vector<Coordinate> coords;
  coords.reserve(probe.numel());
  for (std::size_t i = 0; i < probe.numel(); ++i) coords.push_back({probe, i});
  return finite_difference_check([&](Tape& tape) { return f(tape, probe); }, coords, h);
}

double finite_difference_check(const ClosureFn& f, const std::vector<Coordinate>& coords, double h) {
  check_step(h);
  for (const auto& c : coords) {
    if (!c.tensor.requires_grad()) throw ValueError("finite_difference_check: probed tensor does not require grad");
    if (c.index >= c.tensor.numel()) throw ValueError("finite_difference_check: coordinate out of range");
    Tensor t = c.tensor;
    t.clear_grad();
  }

  Tape tape;
  Tensor root = f(tape);
  if (!std::isfinite(root.item())) throw DomainError("finite_difference_check: function value is not finite");
  // A constant function records nothing; its analytic gradient is zero.
  if (tape.size() > 0) tape.backward(root);

  double worst = 0.0;
  for (const auto& c : coords) {
    Tensor t = c.tensor;
    const double analytic = t.has_grad() ? t.grad()[c.index] : 0.0;
    auto values = t.mutable_data();
    const double saved = values[c.index];
    values[c.index] = saved + h;
    const double up = evaluate(f);
    values[c.index] = saved - h;
    const double down = evaluate(f);
    values[c.index] = saved;
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric)));
  }
  return worst;
}

}  // namespace icvae
