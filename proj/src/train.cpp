#include "icvae/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "icvae/error.hpp"

namespace icvae {

namespace {

NamedTensor scalar_entry(std::string name, double v) { return {std::move(name), Tensor::scalar(v)}; }

class EntryIndex {
 public:
  explicit EntryIndex(const std::vector<NamedTensor>& entries) {
    for (const auto& e : entries) by_name_.emplace(e.name, &e.tensor);
  }

  const Tensor& get(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ValueError("checkpoint has no entry '" + name + "'");
    return *it->second;
  }

  const Tensor* find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
  }

  std::size_t count(const std::string& name) const { return static_cast<std::size_t>(get(name).item()); }

 private:
  std::map<std::string, const Tensor*> by_name_;
};

ModelConfig model_config_from(const EntryIndex& idx) {
  ModelConfig cfg;
  cfg.categories = idx.count("model/categories");
  cfg.delta = idx.count("model/delta");
  cfg.latent_dim = idx.count("model/latent_dim");
  cfg.lambda = idx.get("model/lambda").item();
  cfg.input_dim = idx.count("model/input_dim");
  cfg.hidden_dim = idx.count("model/hidden_dim");
  cfg.dropout = idx.get("model/dropout").item();
  cfg.validate();
  return cfg;
}

void load_parameters(const EntryIndex& idx, const InfoCatVae& model) {
  for (const auto& [name, param] : model.parameters()) {
    const Tensor& stored = idx.get("param/" + name);
    if (stored.shape() != param.shape()) {
      throw ValueError("checkpoint parameter '" + name + "' has shape " + shape_to_string(stored.shape()) +
                       ", model expects " + shape_to_string(param.shape()));
    }
    Tensor dst = param;
    auto out = dst.mutable_data();
    auto in = stored.data();
    std::copy(in.begin(), in.end(), out.begin());
  }
}

void check_finite(const LossBreakdown& b, std::uint64_t step) {
  if (std::isfinite(b.recon) && std::isfinite(b.kl_cat) && std::isfinite(b.kl_gauss) && std::isfinite(b.info) &&
      std::isfinite(b.total)) {
    return;
  }
  std::ostringstream os;
  os.precision(17);
  os << "non-finite loss at step " << step << ": recon=" << b.recon << " kl_cat=" << b.kl_cat
     << " kl_gauss=" << b.kl_gauss << " info=" << b.info << " total=" << b.total;
  throw NumericalError(os.str());
}

void append_line(const std::filesystem::path& path, const std::string& line, bool truncate) {
  std::ofstream out(path, truncate ? std::ios::trunc : std::ios::app);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << line << '\n';
  if (!out) throw IoError("error writing " + path.string());
}

}  // namespace

std::string_view to_string(InfoSchedule s) { return s == InfoSchedule::joint ? "joint" : "alternate"; }

InfoSchedule parse_info_schedule(std::string_view s) {
  if (s == "joint") return InfoSchedule::joint;
  if (s == "alternate") return InfoSchedule::alternate;
  throw ValueError("unknown info schedule '" + std::string(s) + "' (expected joint or alternate)");
}

ObjectiveOptions TrainConfig::objective() const {
  ObjectiveOptions o;
  o.variant = mode;
  o.betas = betas;
  o.likelihood = likelihood;
  o.info_samples = info_samples_per_step();
  o.info_grad_to_decoder = info_grad_to_decoder;
  o.mode = Mode::train;
  return o;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size", "must be at least 1");
  if (info_samples && *info_samples == 0) throw ConfigError("info_samples", "must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate", "must be positive");
  if (!(betas.cont >= 0.0)) throw ConfigError("beta_cont", "must be nonnegative");
  if (!(betas.cat >= 0.0)) throw ConfigError("beta_cat", "must be nonnegative");
  if (!(betas.info >= 0.0)) throw ConfigError("beta_info", "must be nonnegative");
}

TrainState TrainState::initialize(const ModelConfig& model, const TrainConfig& train) {
  train.validate();
  TrainState state{InfoCatVae(model), build_prior_means(model), Adam(AdamOptions{.learning_rate = train.learning_rate}),
                   Rng(train.seed)};
  init_parameters(state.model.parameters(), state.rng);
  return state;
}

std::vector<NamedTensor> to_checkpoint(const TrainState& state) {
  const auto& cfg = state.model.config();
  std::vector<NamedTensor> out;
  out.push_back(scalar_entry("model/categories", static_cast<double>(cfg.categories)));
  out.push_back(scalar_entry("model/delta", static_cast<double>(cfg.delta)));
  out.push_back(scalar_entry("model/latent_dim", static_cast<double>(cfg.latent_dim)));
  out.push_back(scalar_entry("model/lambda", cfg.lambda));
  out.push_back(scalar_entry("model/input_dim", static_cast<double>(cfg.input_dim)));
  out.push_back(scalar_entry("model/hidden_dim", static_cast<double>(cfg.hidden_dim)));
  out.push_back(scalar_entry("model/dropout", cfg.dropout));

  for (const auto& [name, param] : state.model.parameters()) out.push_back({"param/" + name, param.clone()});

  out.push_back(scalar_entry("adam/t", static_cast<double>(state.adam.step_count())));
  for (const auto& [name, mom] : state.adam.moments()) {
    out.push_back({"adam/m/" + name, Tensor({mom.m.size()}, mom.m)});
    out.push_back({"adam/v/" + name, Tensor({mom.v.size()}, mom.v)});
  }

  out.push_back(scalar_entry("train/epoch", static_cast<double>(state.epoch)));
  out.push_back(scalar_entry("train/step", static_cast<double>(state.step)));

  // 64-bit words are split into exact 32-bit halves so they survive the f64 payload.
  const auto words = state.rng.state();
  std::vector<double> halves;
  halves.reserve(words.size() * 2);
  for (auto w : words) {
    halves.push_back(static_cast<double>(w >> 32));
    halves.push_back(static_cast<double>(w & 0xffffffffULL));
  }
  out.push_back({"rng/state", Tensor({words.size(), 2}, std::move(halves))});
  const auto seed = state.rng.seed();
  out.push_back({"rng/seed", Tensor({2}, {static_cast<double>(seed >> 32), static_cast<double>(seed & 0xffffffffULL)})});
  return out;
}

InfoCatVae model_from_checkpoint(const std::vector<NamedTensor>& entries) {
  EntryIndex idx(entries);
  InfoCatVae model(model_config_from(idx));
  load_parameters(idx, model);
  return model;
}

TrainState from_checkpoint(const std::vector<NamedTensor>& entries, const TrainConfig& train) {
  EntryIndex idx(entries);
  const ModelConfig cfg = model_config_from(idx);

  const Tensor& seed_halves = idx.get("rng/seed");
  const auto seed = (static_cast<std::uint64_t>(seed_halves.at(0)) << 32) | static_cast<std::uint64_t>(seed_halves.at(1));
  TrainState state{InfoCatVae(cfg), build_prior_means(cfg), Adam(AdamOptions{.learning_rate = train.learning_rate}),
                   Rng(seed)};
  load_parameters(idx, state.model);

  std::map<std::string, Adam::Moments> moments;
  for (const auto& [name, param] : state.model.parameters()) {
    const Tensor* m = idx.find("adam/m/" + name);
    const Tensor* v = idx.find("adam/v/" + name);
    if (!m && !v) continue;
    if (!m || !v || m->numel() != param.numel() || v->numel() != param.numel()) {
      throw ValueError("checkpoint Adam moments for '" + name + "' are incomplete");
    }
    moments[name] = {{m->data().begin(), m->data().end()}, {v->data().begin(), v->data().end()}};
  }
  state.adam.restore(static_cast<std::uint64_t>(idx.get("adam/t").item()), std::move(moments));

  const Tensor& halves = idx.get("rng/state");
  if (halves.numel() != 2 * Rng::kStateWords) throw ValueError("checkpoint RNG state has wrong size");
  std::vector<std::uint64_t> words(Rng::kStateWords);
  for (std::size_t i = 0; i < words.size(); ++i) {
    words[i] = (static_cast<std::uint64_t>(halves.at(2 * i)) << 32) | static_cast<std::uint64_t>(halves.at(2 * i + 1));
  }
  state.rng.set_state(words);

  state.epoch = idx.count("train/epoch");
  state.step = static_cast<std::uint64_t>(idx.get("train/step").item());
  return state;
}

LossBreakdown train_step(TrainState& state, const TrainConfig& config, const Tensor& x) {
  const ParameterStore& params = state.model.parameters();
  ObjectiveOptions opts = config.objective();
  const bool split_info = config.mode == Variant::infocatvae && config.info_schedule == InfoSchedule::alternate;
  if (split_info) opts.variant = Variant::vanilla_catvae;

  params.zero_grad();
  Tape tape;
  Loss loss = total_loss(tape, state.model, state.prior, x, state.rng, opts);
  LossBreakdown out = loss.breakdown;
  check_finite(out, state.step);
  tape.backward(loss.total);
  state.adam.step(params);

  if (split_info) {
    params.zero_grad();
    Tape info_tape;
    Tensor info = info_max_term(info_tape, state.model, state.prior, state.rng, opts.info_samples, Mode::train,
                                opts.info_grad_to_decoder);
    out.info = info.item();
    out.total = out.recomposed_total();
    check_finite(out, state.step);
    info_tape.backward(info_tape.scalar_mul(info, config.betas.info));
    state.adam.step(params);
  }
  ++state.step;
  return out;
}

std::string format_metrics_line(const EpochMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g", m.epoch, m.mean.recon, m.mean.kl_cat,
                m.mean.kl_gauss, m.mean.info, m.mean.total);
  return buf;
}

std::vector<EpochMetrics> train_loop(TrainState& state, const TrainConfig& config, const IdxDataset& data,
                                     const std::optional<std::filesystem::path>& out_dir,
                                     const std::function<void(const EpochMetrics&)>& on_epoch) {
  config.validate();
  if (data.pixels() != state.model.config().input_dim) {
    throw ValueError("dataset has " + std::to_string(data.pixels()) + " pixels per row, model expects " +
                     std::to_string(state.model.config().input_dim));
  }
  if (out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir->string() + ": " + ec.message());
  }

  std::vector<EpochMetrics> metrics;
  const bool fresh = state.epoch == 0;
  while (state.epoch < config.epochs) {
    BatchSequence batches(data, config.batch_size, state.rng, config.shuffle);
    LossBreakdown sum;
    double rows = 0.0;
    for (std::size_t i = 0; i < batches.size(); ++i) {
      Batch batch = batches[i];
      const LossBreakdown b = train_step(state, config, batch.x);
      const double w = static_cast<double>(batch.x.rows());
      sum.recon += w * b.recon;
      sum.kl_cat += w * b.kl_cat;
      sum.kl_gauss += w * b.kl_gauss;
      sum.info += w * b.info;
      sum.total += w * b.total;
      rows += w;
    }
    ++state.epoch;

    EpochMetrics m;
    m.epoch = state.epoch;
    m.mean = {sum.recon / rows, sum.kl_cat / rows, sum.kl_gauss / rows, sum.info / rows, sum.total / rows,
              config.betas};
    metrics.push_back(m);

    if (out_dir) {
      append_line(*out_dir / "metrics.tsv", format_metrics_line(m), fresh && metrics.size() == 1);
      if (config.checkpoint_every > 0 && state.epoch % config.checkpoint_every == 0) {
        char name[64];
        std::snprintf(name, sizeof(name), "checkpoint-epoch-%04zu.icvae", state.epoch);
        save_checkpoint(*out_dir / name, to_checkpoint(state));
      }
    }
    if (on_epoch) on_epoch(m);
  }
  if (out_dir) {
    // An untouched run still gets an (empty) metrics log.
    if (fresh && metrics.empty()) std::ofstream(*out_dir / "metrics.tsv", std::ios::trunc);
    save_checkpoint(*out_dir / "final.icvae", to_checkpoint(state));
  }
  return metrics;
}

}  // namespace icvae
