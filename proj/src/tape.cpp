#include "icvae/tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "icvae/error.hpp"

namespace icvae {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(std::span<const double> v, std::size_t r, std::size_t c) {
  return ConstMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

[[noreturn]] void shape_mismatch(std::string_view op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_to_string(a.shape()) + " and " +
                   shape_to_string(b.shape()));
}

void require_rank2(std::string_view op, const Tensor& a) {
  if (a.rank() != 2) throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " + shape_to_string(a.shape()));
}

// Broadcast pattern for elementwise binary ops: identical shapes, or one side has
// a single element.
enum class Broadcast { none, left_scalar, right_scalar };

Broadcast broadcast_of(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::none;
  if (b.numel() == 1) return Broadcast::right_scalar;
  if (a.numel() == 1) return Broadcast::left_scalar;
  shape_mismatch(op, a, b);
}

const Shape& result_shape(Broadcast bc, const Tensor& a, const Tensor& b) {
  return bc == Broadcast::left_scalar ? b.shape() : a.shape();
}

// Reduces a full-size gradient onto the operand that was broadcast.
std::vector<double> reduce_for(const Tensor& operand, std::vector<double> g) {
  if (operand.numel() == g.size()) return g;
  double s = 0.0;
  for (double v : g) s += v;
  return {s};
}

}  // namespace

Tensor Tape::record(std::string_view kind, std::vector<Tensor> inputs, Shape shape, std::vector<double> values,
                    std::function<void(const Node&)> backward) {
  bool any = false;
  if (recording_) {
    for (const auto& t : inputs) any = any || t.requires_grad();
  }
  Tensor out(std::move(shape), std::move(values), any);
  if (any) nodes_.push_back(Node{kind, std::move(inputs), out, std::move(backward)});
  return out;
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  const auto n = a.rows(), k = a.cols(), m = b.cols();
  std::vector<double> out(n * m);
  MutMap(out.data(), n, m).noalias() = as_matrix(a.data(), n, k) * as_matrix(b.data(), k, m);
  return record("matmul", {a, b}, {n, m}, std::move(out), [n, k, m](const Node& node) {
    Tensor a = node.inputs[0], b = node.inputs[1];
    auto g = as_matrix(node.output.grad(), n, m);
    if (a.requires_grad()) {
      std::vector<double> ga(n * k);
      MutMap(ga.data(), n, k).noalias() = g * as_matrix(b.data(), k, m).transpose();
      a.accumulate_grad(ga);
    }
    if (b.requires_grad()) {
      std::vector<double> gb(k * m);
      MutMap(gb.data(), k, m).noalias() = as_matrix(a.data(), n, k).transpose() * g;
      b.accumulate_grad(gb);
    }
  });
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  const auto bc = broadcast_of("add", a, b);
  const Shape shape = result_shape(bc, a, b);
  const auto n = shape_numel(shape);
  std::vector<double> out(n);
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = av[bc == Broadcast::left_scalar ? 0 : i] + bv[bc == Broadcast::right_scalar ? 0 : i];
  }
  return record("add", {a, b}, shape, std::move(out), [](const Node& node) {
    Tensor a = node.inputs[0], b = node.inputs[1];
    std::vector<double> g(node.output.grad().begin(), node.output.grad().end());
    if (a.requires_grad()) a.accumulate_grad(reduce_for(a, g));
    if (b.requires_grad()) b.accumulate_grad(reduce_for(b, g));
  });
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  const auto bc = broadcast_of("sub", a, b);
  const Shape shape = result_shape(bc, a, b);
  const auto n = shape_numel(shape);
  std::vector<double> out(n);
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = av[bc == Broadcast::left_scalar ? 0 : i] - bv[bc == Broadcast::right_scalar ? 0 : i];
  }
  return record("sub", {a, b}, shape, std::move(out), [](const Node& node) {
    Tensor a = node.inputs[0], b = node.inputs[1];
    std::vector<double> g(node.output.grad().begin(), node.output.grad().end());
    if (a.requires_grad()) a.accumulate_grad(reduce_for(a, g));
    if (b.requires_grad()) {
      for (auto& v : g) v = -v;
      b.accumulate_grad(reduce_for(b, std::move(g)));
    }
  });
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  const auto bc = broadcast_of("mul", a, b);
  const Shape shape = result_shape(bc, a, b);
  const auto n = shape_numel(shape);
  std::vector<double> out(n);
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = av[bc == Broadcast::left_scalar ? 0 : i] * bv[bc == Broadcast::right_scalar ? 0 : i];
  }
  return record("mul", {a, b}, shape, std::move(out), [bc, n](const Node& node) {
    Tensor a = node.inputs[0], b = node.inputs[1];
    auto g = node.output.grad();
    auto av = a.data(), bv = b.data();
    if (a.requires_grad()) {
      std::vector<double> ga(n);
      for (std::size_t i = 0; i < n; ++i) ga[i] = g[i] * bv[bc == Broadcast::right_scalar ? 0 : i];
      a.accumulate_grad(reduce_for(a, std::move(ga)));
    }
    if (b.requires_grad()) {
      std::vector<double> gb(n);
      for (std::size_t i = 0; i < n; ++i) gb[i] = g[i] * av[bc == Broadcast::left_scalar ? 0 : i];
      b.accumulate_grad(reduce_for(b, std::move(gb)));
    }
  });
}

Tensor Tape::scalar_mul(const Tensor& a, double s) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= s;
  return record("scalar_mul", {a}, a.shape(), std::move(out), [s](const Node& node) {
    Tensor a = node.inputs[0];
    std::vector<double> g(node.output.grad().begin(), node.output.grad().end());
    for (auto& v : g) v *= s;
    a.accumulate_grad(g);
  });
}

Tensor Tape::add_bias(const Tensor& x, const Tensor& bias) {
  require_rank2("add_bias", x);
  const auto n = x.rows(), m = x.cols();
  if (bias.numel() != m || bias.rank() > 2 || (bias.rank() == 2 && bias.shape()[0] != 1)) {
    shape_mismatch("add_bias", x, bias);
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  auto bv = bias.data();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] += bv[c];
  }
  return record("add_bias", {x, bias}, x.shape(), std::move(out), [n, m](const Node& node) {
    Tensor x = node.inputs[0], bias = node.inputs[1];
    auto g = node.output.grad();
    if (x.requires_grad()) x.accumulate_grad(g);
    if (bias.requires_grad()) {
      std::vector<double> gb(m, 0.0);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < m; ++c) gb[c] += g[r * m + c];
      }
      bias.accumulate_grad(gb);
    }
  });
}

Tensor Tape::relu(const Tensor& a) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  return record("relu", {a}, a.shape(), std::move(out), [](const Node& node) {
    Tensor a = node.inputs[0];
    auto g = node.output.grad();
    auto av = a.data();
    std::vector<double> ga(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = av[i] > 0.0 ? g[i] : 0.0;
    a.accumulate_grad(ga);
  });
}

Tensor Tape::sigmoid(const Tensor& a) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) {
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  return record("sigmoid", {a}, a.shape(), std::move(out), [](const Node& node) {
    Tensor a = node.inputs[0];
    auto g = node.output.grad();
    auto y = node.output.data();
    std::vector<double> ga(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * y[i] * (1.0 - y[i]);
    a.accumulate_grad(ga);
  });
}

Tensor Tape::log(const Tensor& a) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] > 0.0)) {
      throw DomainError("log: argument " + std::to_string(out[i]) + " at index " + std::to_string(i) +
                        " is not positive");
    }
    out[i] = std::log(out[i]);
  }
  return record("log", {a}, a.shape(), std::move(out), [](const Node& node) {
    Tensor a = node.inputs[0];
    auto g = node.output.grad();
    auto av = a.data();
    std::vector<double> ga(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] / av[i];
    a.accumulate_grad(ga);
  });
}

Tensor Tape::exp(const Tensor& a) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = out[i];
    out[i] = std::exp(x);
    if (!std::isfinite(out[i])) {
      throw DomainError("exp: argument " + std::to_string(x) + " at index " + std::to_string(i) +
                        " overflows or is not finite");
    }
  }
  return record("exp", {a}, a.shape(), std::move(out), [](const Node& node) {
    Tensor a = node.inputs[0];
    auto g = node.output.grad();
    auto y = node.output.data();
    std::vector<double> ga(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * y[i];
    a.accumulate_grad(ga);
  });
}

Tensor Tape::square(const Tensor& a) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= v;
  return record("square", {a}, a.shape(), std::move(out), [](const Node& node) {
    Tensor a = node.inputs[0];
    auto g = node.output.grad();
    auto av = a.data();
    std::vector<double> ga(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = 2.0 * av[i] * g[i];
    a.accumulate_grad(ga);
  });
}

Tensor Tape::softmax_rows(const Tensor& a) {
  require_rank2("softmax_rows", a);
  const auto n = a.rows(), m = a.cols();
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t r = 0; r < n; ++r) {
    double* row = out.data() + r * m;
    const double mx = *std::max_element(row, row + m);
    double total = 0.0;
    for (std::size_t c = 0; c < m; ++c) total += (row[c] = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < m; ++c) row[c] /= total;
  }
  return record("softmax_rows", {a}, a.shape(), std::move(out), [n, m](const Node& node) {
    Tensor a = node.inputs[0];
    auto g = node.output.grad();
    auto y = node.output.data();
    std::vector<double> ga(n * m);
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < m; ++c) dot += g[r * m + c] * y[r * m + c];
      for (std::size_t c = 0; c < m; ++c) ga[r * m + c] = y[r * m + c] * (g[r * m + c] - dot);
    }
    a.accumulate_grad(ga);
  });
}

Tensor Tape::log_softmax_rows(const Tensor& a) {
  require_rank2("log_softmax_rows", a);
  const auto n = a.rows(), m = a.cols();
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t r = 0; r < n; ++r) {
    double* row = out.data() + r * m;
    const double mx = *std::max_element(row, row + m);
    double total = 0.0;
    for (std::size_t c = 0; c < m; ++c) total += std::exp(row[c] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t c = 0; c < m; ++c) row[c] -= lse;
  }
  return record("log_softmax_rows", {a}, a.shape(), std::move(out), [n, m](const Node& node) {
    Tensor a = node.inputs[0];
    auto g = node.output.grad();
    auto y = node.output.data();
    std::vector<double> ga(n * m);
    for (std::size_t r = 0; r < n; ++r) {
      double gsum = 0.0;
      for (std::size_t c = 0; c < m; ++c) gsum += g[r * m + c];
      for (std::size_t c = 0; c < m; ++c) ga[r * m + c] = g[r * m + c] - std::exp(y[r * m + c]) * gsum;
    }
    a.accumulate_grad(ga);
  });
}

Tensor Tape::sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return record("sum", {a}, {1}, {s}, [](const Node& node) {
    Tensor a = node.inputs[0];
    a.accumulate_grad(std::vector<double>(a.numel(), node.output.grad()[0]));
  });
}

Tensor Tape::mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  const double inv = 1.0 / static_cast<double>(a.numel());
  return record("mean", {a}, {1}, {s * inv}, [inv](const Node& node) {
    Tensor a = node.inputs[0];
    a.accumulate_grad(std::vector<double>(a.numel(), node.output.grad()[0] * inv));
  });
}

Tensor Tape::sum_rows(const Tensor& a) {
  require_rank2("sum_rows", a);
  const auto n = a.rows(), m = a.cols();
  std::vector<double> out(n, 0.0);
  auto av = a.data();
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) s += av[r * m + c];
    out[r] = s;
  }
  return record("sum_rows", {a}, {n, 1}, std::move(out), [n, m](const Node& node) {
    Tensor a = node.inputs[0];
    auto g = node.output.grad();
    std::vector<double> ga(n * m);
    for (std::size_t r = 0; r < n; ++r) std::fill_n(ga.begin() + static_cast<std::ptrdiff_t>(r * m), m, g[r]);
    a.accumulate_grad(ga);
  });
}

Tensor Tape::concat_cols(const Tensor& a, const Tensor& b) {
  require_rank2("concat_cols", a);
  require_rank2("concat_cols", b);
  if (a.rows() != b.rows()) shape_mismatch("concat_cols", a, b);
  const auto n = a.rows(), ma = a.cols(), mb = b.cols();
  std::vector<double> out(n * (ma + mb));
  auto av = a.data(), bv = b.data();
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(av.begin() + static_cast<std::ptrdiff_t>(r * ma), ma, out.begin() + static_cast<std::ptrdiff_t>(r * (ma + mb)));
    std::copy_n(bv.begin() + static_cast<std::ptrdiff_t>(r * mb), mb,
                out.begin() + static_cast<std::ptrdiff_t>(r * (ma + mb) + ma));
  }
  return record("concat_cols", {a, b}, {n, ma + mb}, std::move(out), [n, ma, mb](const Node& node) {
    Tensor a = node.inputs[0], b = node.inputs[1];
    auto g = node.output.grad();
    if (a.requires_grad()) {
      std::vector<double> ga(n * ma);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < ma; ++c) ga[r * ma + c] = g[r * (ma + mb) + c];
      }
      a.accumulate_grad(ga);
    }
    if (b.requires_grad()) {
      std::vector<double> gb(n * mb);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < mb; ++c) gb[r * mb + c] = g[r * (ma + mb) + ma + c];
      }
      b.accumulate_grad(gb);
    }
  });
}

Tensor Tape::slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank2("slice_cols", a);
  const auto n = a.rows(), m = a.cols();
  if (begin >= end || end > m) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for shape " + shape_to_string(a.shape()));
  }
  const auto w = end - begin;
  std::vector<double> out(n * w);
  auto av = a.data();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < w; ++c) out[r * w + c] = av[r * m + begin + c];
  }
  return record("slice_cols", {a}, {n, w}, std::move(out), [n, m, w, begin](const Node& node) {
    Tensor a = node.inputs[0];
    auto g = node.output.grad();
    std::vector<double> ga(n * m, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < w; ++c) ga[r * m + begin + c] = g[r * w + c];
    }
    a.accumulate_grad(ga);
  });
}

Tensor Tape::bce_with_logits_rows(const Tensor& logits, const Tensor& target) {
  require_rank2("bce_with_logits_rows", logits);
  if (logits.shape() != target.shape()) shape_mismatch("bce_with_logits_rows", logits, target);
  const auto n = logits.rows(), m = logits.cols();
  auto lv = logits.data(), tv = target.data();
  std::vector<double> out(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const double l = lv[r * m + c];
      s += std::max(l, 0.0) + std::log1p(std::exp(-std::abs(l))) - tv[r * m + c] * l;
    }
    out[r] = s;
  }
  // Only the logits receive a gradient.
  return record("bce_with_logits_rows", {logits}, {n, 1}, std::move(out), [n, m, target](const Node& node) {
    Tensor logits = node.inputs[0];
    auto g = node.output.grad();
    auto lv = logits.data(), tv = target.data();
    std::vector<double> gl(n * m);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < m; ++c) {
        const double l = lv[r * m + c];
        const double p = l >= 0.0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l));
        gl[r * m + c] = g[r] * (p - tv[r * m + c]);
      }
    }
    logits.accumulate_grad(gl);
  });
}

Tensor Tape::detach(const Tensor& a) { return a.clone(); }

void Tape::backward(const Tensor& root) {
  if (!root.defined()) throw ValueError("backward: undefined root");
  if (root.numel() != 1) throw ShapeError("backward: root must be a scalar, got shape " + shape_to_string(root.shape()));
  if (nodes_.empty()) throw ValueError("backward: nothing recorded on this tape");
  const bool produced_here =
      std::any_of(nodes_.begin(), nodes_.end(), [&](const Node& n) { return n.output.same_storage(root); });
  if (!produced_here) throw ValueError("backward: root was not produced on this tape");

  // Intermediate grads from an earlier pass over the same tensors must not leak in.
  for (auto& node : nodes_) node.output.clear_grad();
  Tensor seed = root;
  seed.accumulate_grad(std::vector<double>{1.0});

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    it->backward(*it);
  }
  nodes_.clear();
}

}  // namespace icvae
