#include "icvae/grad_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "icvae/gradcheck.hpp"
#include "icvae/model.hpp"
#include "icvae/objective.hpp"

namespace icvae {

namespace {

using Inputs = std::vector<Tensor>;

struct OpCase {
  std::string name;
  std::function<Inputs(Rng&)> make;
  std::function<Tensor(Tape&, const Inputs&)> apply;
};

Tensor leaf(Tensor t) {
  t.set_requires_grad(true);
  return t;
}

Tensor normal(Rng& rng, Shape s) { return leaf(rng.normal_tensor(s)); }

Tensor uniform_in(Rng& rng, Shape s, double lo, double hi, bool grad = true) {
  Tensor t = rng.uniform_tensor(s);
  for (auto& v : t.mutable_data()) v = lo + (hi - lo) * v;
  if (grad) t.set_requires_grad(true);
  return t;
}

Tensor rng_constant(Rng& rng, Shape s) { return rng.normal_tensor(s); }

/// Normal values pushed at least `gap` away from zero (keeps FD off kinks).
Tensor away_from_zero(Rng& rng, Shape s, double gap) {
  Tensor t = rng.normal_tensor(s);
  for (auto& v : t.mutable_data()) v += v < 0.0 ? -gap : gap;
  return leaf(t);
}

std::vector<OpCase> op_cases() {
  using T = Tape;
  return {
      {"matmul", [](Rng& r) { return Inputs{normal(r, {3, 4}), normal(r, {4, 2})}; },
       [](T& t, const Inputs& in) { return t.matmul(in[0], in[1]); }},
      {"add", [](Rng& r) { return Inputs{normal(r, {3, 4}), normal(r, {3, 4})}; },
       [](T& t, const Inputs& in) { return t.add(in[0], in[1]); }},
      {"add_broadcast", [](Rng& r) { return Inputs{normal(r, {3, 4}), normal(r, {1})}; },
       [](T& t, const Inputs& in) { return t.add(in[1], in[0]); }},
      {"sub", [](Rng& r) { return Inputs{normal(r, {3, 4}), normal(r, {3, 4})}; },
       [](T& t, const Inputs& in) { return t.sub(in[0], in[1]); }},
      {"sub_broadcast", [](Rng& r) { return Inputs{normal(r, {3, 4}), normal(r, {1})}; },
       [](T& t, const Inputs& in) { return t.sub(in[0], in[1]); }},
      {"mul", [](Rng& r) { return Inputs{normal(r, {3, 4}), normal(r, {3, 4})}; },
       [](T& t, const Inputs& in) { return t.mul(in[0], in[1]); }},
      {"mul_broadcast", [](Rng& r) { return Inputs{normal(r, {3, 4}), normal(r, {1})}; },
       [](T& t, const Inputs& in) { return t.mul(in[0], in[1]); }},
      {"scalar_mul", [](Rng& r) { return Inputs{normal(r, {3, 4})}; },
       [](T& t, const Inputs& in) { return t.scalar_mul(in[0], -1.7); }},
      {"add_bias", [](Rng& r) { return Inputs{normal(r, {3, 4}), normal(r, {4})}; },
       [](T& t, const Inputs& in) { return t.add_bias(in[0], in[1]); }},
      {"relu", [](Rng& r) { return Inputs{away_from_zero(r, {3, 4}, 0.05)}; },
       [](T& t, const Inputs& in) { return t.relu(in[0]); }},
      {"sigmoid", [](Rng& r) { return Inputs{normal(r, {3, 4})}; },
       [](T& t, const Inputs& in) { return t.sigmoid(in[0]); }},
      {"log", [](Rng& r) { return Inputs{uniform_in(r, {3, 4}, 0.5, 2.0)}; },
       [](T& t, const Inputs& in) { return t.log(in[0]); }},
      {"exp", [](Rng& r) { return Inputs{normal(r, {3, 4})}; },
       [](T& t, const Inputs& in) { return t.exp(in[0]); }},
      {"square", [](Rng& r) { return Inputs{normal(r, {3, 4})}; },
       [](T& t, const Inputs& in) { return t.square(in[0]); }},
      {"softmax_rows", [](Rng& r) { return Inputs{normal(r, {3, 5})}; },
       [](T& t, const Inputs& in) { return t.softmax_rows(in[0]); }},
      {"log_softmax_rows", [](Rng& r) { return Inputs{normal(r, {3, 5})}; },
       [](T& t, const Inputs& in) { return t.log_softmax_rows(in[0]); }},
      {"sum", [](Rng& r) { return Inputs{normal(r, {3, 4})}; },
       [](T& t, const Inputs& in) { return t.sum(in[0]); }},
      {"mean", [](Rng& r) { return Inputs{normal(r, {3, 4})}; },
       [](T& t, const Inputs& in) { return t.mean(in[0]); }},
      {"sum_rows", [](Rng& r) { return Inputs{normal(r, {3, 4})}; },
       [](T& t, const Inputs& in) { return t.sum_rows(in[0]); }},
      {"concat_cols", [](Rng& r) { return Inputs{normal(r, {3, 2}), normal(r, {3, 4})}; },
       [](T& t, const Inputs& in) { return t.concat_cols(in[0], in[1]); }},
      {"slice_cols", [](Rng& r) { return Inputs{normal(r, {3, 5})}; },
       [](T& t, const Inputs& in) { return t.slice_cols(in[0], 1, 4); }},
      {"bce_with_logits_rows",
       [](Rng& r) { return Inputs{normal(r, {3, 6}), uniform_in(r, {3, 6}, 0.0, 1.0, false)}; },
       [](T& t, const Inputs& in) { return t.bce_with_logits_rows(in[0], in[1]); }},
      {"detach", [](Rng& r) { return Inputs{normal(r, {3, 4}), rng_constant(r, {3, 4})}; },
       [](T& t, const Inputs& in) { return t.mul(in[0], t.detach(t.exp(in[1]))); }},
  };
}

/// sum(w * y) with fixed pseudo-random weights, so every output entry matters.
Tensor weighted_sum(Tape& tape, const Tensor& y, std::uint64_t weight_seed) {
  Rng wr(weight_seed);
  Tensor w = wr.uniform_tensor(y.shape());
  for (auto& v : w.mutable_data()) v = 2.0 * v - 1.0;
  return tape.sum(tape.mul(y, w));
}

GradCheckResult check_op(const OpCase& op, const GradSuiteOptions& opt, Rng& rng) {
  GradCheckResult res{op.name, 0.0, opt.op_tolerance, opt.op_trials};
  for (std::size_t trial = 0; trial < opt.op_trials; ++trial) {
    const Inputs in = op.make(rng);
    const std::uint64_t weight_seed = opt.seed * 1000003ULL + trial;
    std::vector<Coordinate> coords;
    for (const auto& t : in) {
      if (!t.requires_grad()) continue;
      for (std::size_t i = 0; i < t.numel(); ++i) coords.push_back({t, i});
    }
    const double err = finite_difference_check(
        [&](Tape& tape) { return weighted_sum(tape, op.apply(tape, in), weight_seed); }, coords, 1e-6);
    res.error = std::max(res.error, err);
  }
  return res;
}

GradCheckResult check_model(const GradSuiteOptions& opt) {
  const ModelConfig cfg;
  InfoCatVae model(cfg);
  const LatentPrior prior = build_prior_means(cfg);
  Rng rng(opt.seed);
  init_parameters(model.parameters(), rng);
  const Tensor x = rng.uniform_tensor({opt.batch, cfg.input_dim});

  const std::size_t per_tensor = (opt.sampled_params + model.parameters().size() - 1) / model.parameters().size();
  std::vector<Coordinate> coords;
  for (const auto& [name, p] : model.parameters()) {
    for (std::size_t i = 0; i < per_tensor; ++i) coords.push_back({p, rng.index(p.numel())});
  }

  ObjectiveOptions objective;
  objective.variant = Variant::infocatvae;
  objective.info_samples = 16;
  objective.mode = Mode::eval;
  const std::uint64_t noise_seed = opt.seed + 1;
  const double err = finite_difference_check(
      [&](Tape& tape) {
        Rng noise(noise_seed);
        return total_loss(tape, model, prior, x, noise, objective).total;
      },
      coords, 1e-6);
  return {"total_loss", err, opt.model_tolerance, coords.size()};
}

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(const GradSuiteOptions& options) {
  std::vector<GradCheckResult> out;
  Rng rng(options.seed);
  for (const auto& op : op_cases()) out.push_back(check_op(op, options, rng));
  out.push_back(check_model(options));
  return out;
}

}  // namespace icvae
