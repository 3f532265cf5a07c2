#include "icvae/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>

#include "icvae/checkpoint.hpp"
#include "icvae/config.hpp"
#include "icvae/error.hpp"
#include "icvae/eval.hpp"
#include "icvae/grad_suite.hpp"
#include "icvae/image.hpp"
#include "icvae/kde.hpp"
#include "icvae/train.hpp"

namespace icvae {

namespace {

struct Flags {
  std::optional<std::string> config;
  std::vector<std::string> set;
  // Shorthands for config keys, applied after the file and in this order.
  std::vector<std::pair<std::string, std::optional<std::string>>> keyed;
};

std::string metric_line(const std::string& name, double value, std::size_t n, std::uint64_t seed) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return name + "\t" + buf + "\t" + std::to_string(n) + "\t" + std::to_string(seed);
}

InfoCatVae load_model(const RunConfig& cfg) {
  if (!cfg.checkpoint.empty()) return model_from_checkpoint(load_checkpoint(cfg.checkpoint));
  return std::move(TrainState::initialize(cfg.model, cfg.train).model);
}

void write_pgm(const std::filesystem::path& path, const ImageGrid& grid, std::size_t sep, std::ostream& out) {
  write_file(path, render_sample_grid(grid, sep));
  out << "wrote " << path.string() << " (" << grid.rows << "x" << grid.cols << " images)\n";
}

std::filesystem::path out_or(const RunConfig& cfg, const char* fallback) {
  return cfg.out.empty() ? std::filesystem::path(fallback) : cfg.out;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const DatasetFiles files = find_training_files(cfg.data_dir);
  const IdxDataset data = load_dataset(files.images, files.labels, cfg.train_subset);
  TrainState state = cfg.checkpoint.empty() ? TrainState::initialize(cfg.model, cfg.train)
                                            : from_checkpoint(load_checkpoint(cfg.checkpoint), cfg.train);
  const std::filesystem::path dir = out_or(cfg, "run");
  std::filesystem::create_directories(dir);
  RunConfig echoed = cfg;
  echoed.model = state.model.config();
  echoed.out = dir;
  std::ofstream(dir / "config.txt") << materialize(echoed);

  out << "# epoch\trecon\tkl_cat\tkl_gauss\tinfo\ttotal\n";
  train_loop(state, cfg.train, data, dir, [&](const EpochMetrics& m) { out << format_metrics_line(m) << '\n'; });
  out << "wrote " << (dir / "final.icvae").string() << '\n';
  return kExitOk;
}

int cmd_sample(const RunConfig& cfg, std::ostream& out) {
  const InfoCatVae model = load_model(cfg);
  const LatentPrior prior = build_prior_means(model.config());
  Rng rng(cfg.train.seed);
  write_pgm(out_or(cfg, "samples.pgm"), sample_grid(model, prior, cfg.eval.per_class, rng), cfg.eval.grid_sep, out);
  return kExitOk;
}

int cmd_interpolate(const RunConfig& cfg, std::ostream& out) {
  const InfoCatVae model = load_model(cfg);
  const LatentPrior prior = build_prior_means(model.config());
  write_pgm(out_or(cfg, "interpolation.pgm"), interpolate_centroids(model, prior, cfg.eval.interp_steps),
            cfg.eval.grid_sep, out);
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  const InfoCatVae model = load_model(cfg);
  const LatentPrior prior = build_prior_means(model.config());
  write_pgm(out_or(cfg, "lambda_sweep.pgm"),
            lambda_sweep(model, prior, cfg.eval.sweep_category, cfg.eval.lambda_values), cfg.eval.grid_sep, out);
  return kExitOk;
}

int cmd_eval_ll(const RunConfig& cfg, std::ostream& out) {
  const InfoCatVae model = load_model(cfg);
  const LatentPrior prior = build_prior_means(model.config());
  const DatasetFiles files = find_training_files(cfg.data_dir);
  const IdxDataset fit = load_dataset(files.images, std::nullopt, cfg.eval.kde_fit_samples);
  const auto& e = cfg.eval;
  const std::uint64_t seed = cfg.train.seed;

  const BandwidthSearch search =
      kde_fit_bandwidth(fit.images, log_spaced_grid(e.kde_grid_min, e.kde_grid_max, e.kde_grid_size), e.kde_folds, seed);
  Rng rng(seed);
  const Tensor generated = generate_samples(model, prior, e.kde_eval_samples, rng);
  const double ll = kde_mean_loglik({fit.images, search.best}, generated);

  out << "# kde_loglik: mean log-density (nats) of generated samples under a Gaussian KDE fitted to training images\n";
  out << metric_line("kde_bandwidth", search.best, fit.size(), seed) << '\n';
  out << metric_line("kde_cv_loglik", search.best_score(), fit.size(), seed) << '\n';
  out << metric_line("kde_loglik", ll, e.kde_eval_samples, seed) << '\n';
  return kExitOk;
}

int cmd_eval_ce(const RunConfig& cfg, std::ostream& out) {
  const InfoCatVae model = load_model(cfg);
  const LatentPrior prior = build_prior_means(model.config());
  Rng rng(cfg.train.seed);
  const double ce = generated_crossentropy(model, prior, cfg.eval.eval_n, rng);
  out << metric_line("generated_crossentropy", ce, cfg.eval.eval_n, cfg.train.seed) << '\n';
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& cfg, std::ostream& out) {
  GradSuiteOptions opt;
  opt.seed = cfg.train.seed;
  bool ok = true;
  for (const auto& r : run_gradient_suite(opt)) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%.3e\t%.0e\t%zu\t%s", r.error, r.tolerance, r.trials, r.passed() ? "ok" : "FAIL");
    out << r.name << '\t' << buf << '\n';
    ok = ok && r.passed();
  }
  return ok ? kExitOk : kExitNumerical;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"InfoCatVAE training and evaluation", "icvae"};
  app.require_subcommand(1);
  Flags flags;
  app.add_option("--config", flags.config, "key=value configuration file");
  app.add_option("--set", flags.set, "extra key=value override (repeatable)");
  const std::vector<std::pair<std::string, std::string>> shorthands = {
      {"--seed", "seed"},           {"--mode", "mode"},         {"--epochs", "epochs"},
      {"--batch-size", "batch_size"}, {"--out", "out"},         {"--data-dir", "data_dir"},
      {"--per-class", "per_class"}, {"--steps", "interp_steps"}, {"--lambda-values", "lambda_values"},
      {"--n", "eval_n"},            {"--likelihood", "likelihood"}, {"--checkpoint", "checkpoint"},
      {"--category", "sweep_category"}};
  flags.keyed.reserve(shorthands.size());
  for (const auto& [flag, key] : shorthands) {
    flags.keyed.emplace_back(key, std::nullopt);
    app.add_option(flag, flags.keyed.back().second, "sets config key " + key);
  }

  std::string command;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"train", "train a model (writes config.txt, metrics.tsv, checkpoints)"},
      {"sample", "K x per_class grid of prior samples as PGM"},
      {"interpolate", "centroid interpolation grid as PGM"},
      {"sweep", "prior-magnitude sweep for one category as PGM"},
      {"eval-ll", "KDE log-likelihood of generated samples"},
      {"eval-ce", "classifier cross-entropy of generated samples"},
      {"gradcheck", "finite-difference gradient suite"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    sub->callback([&command, n = name] { command = n; });
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    Overrides overrides;
    for (const auto& s : flags.set) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError(s, "--set expects key=value");
      overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [key, value] : flags.keyed) {
      if (value) overrides.emplace_back(key, *value);
    }
    const RunConfig cfg = parse_config(flags.config ? std::optional<std::filesystem::path>(*flags.config) : std::nullopt,
                                       overrides);

    if (command == "train") return cmd_train(cfg, out);
    if (command == "sample") return cmd_sample(cfg, out);
    if (command == "interpolate") return cmd_interpolate(cfg, out);
    if (command == "sweep") return cmd_sweep(cfg, out);
    if (command == "eval-ll") return cmd_eval_ll(cfg, out);
    if (command == "eval-ce") return cmd_eval_ce(cfg, out);
    if (command == "gradcheck") return cmd_gradcheck(cfg, out);
    err << app.help();
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DomainError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
}

}  // namespace icvae
