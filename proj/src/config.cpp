#include "icvae/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "icvae/error.hpp"

namespace icvae {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::size_t parse_count(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size() || v.empty()) {
    throw ConfigError(std::string(key), "expected a nonnegative integer, got '" + std::string(v) + "'");
  }
  return out;
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size() || v.empty()) {
    throw ConfigError(std::string(key), "expected a nonnegative integer, got '" + std::string(v) + "'");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    throw ConfigError(std::string(key), "expected a finite number, got '" + std::string(v) + "'");
  }
  return out;
}

bool parse_flag(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(std::string(key), "expected true or false, got '" + std::string(v) + "'");
}

std::vector<double> parse_list(std::string_view key, std::string_view v) {
  std::vector<double> out;
  while (true) {
    const auto comma = v.find(',');
    out.push_back(parse_real(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

template <typename F>
auto wrap(std::string_view key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string(key), e.what());
  }
}

std::string real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string count(std::size_t v) { return std::to_string(v); }
std::string flag(bool v) { return v ? "true" : "false"; }

std::string list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + real(v[i]);
  return out;
}

/// Parsing state; latent_dim stays unset until given so it can follow K * delta.
struct Draft {
  RunConfig cfg;
  std::optional<std::size_t> latent_dim;
};

struct Field {
  std::string_view key;
  std::function<void(Draft&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      // model
      {"categories", [](Draft& d, std::string_view v) { d.cfg.model.categories = parse_count("categories", v); },
       [](const RunConfig& c) { return count(c.model.categories); }},
      {"delta", [](Draft& d, std::string_view v) { d.cfg.model.delta = parse_count("delta", v); },
       [](const RunConfig& c) { return count(c.model.delta); }},
      {"latent_dim", [](Draft& d, std::string_view v) { d.latent_dim = parse_count("latent_dim", v); },
       [](const RunConfig& c) { return count(c.model.latent_dim); }},
      {"lambda", [](Draft& d, std::string_view v) { d.cfg.model.lambda = parse_real("lambda", v); },
       [](const RunConfig& c) { return real(c.model.lambda); }},
      {"input_dim", [](Draft& d, std::string_view v) { d.cfg.model.input_dim = parse_count("input_dim", v); },
       [](const RunConfig& c) { return count(c.model.input_dim); }},
      {"hidden_dim", [](Draft& d, std::string_view v) { d.cfg.model.hidden_dim = parse_count("hidden_dim", v); },
       [](const RunConfig& c) { return count(c.model.hidden_dim); }},
      {"dropout", [](Draft& d, std::string_view v) { d.cfg.model.dropout = parse_real("dropout", v); },
       [](const RunConfig& c) { return real(c.model.dropout); }},
      // training
      {"mode", [](Draft& d, std::string_view v) { d.cfg.train.mode = wrap("mode", [&] { return parse_variant(v); }); },
       [](const RunConfig& c) { return std::string(to_string(c.train.mode)); }},
      {"epochs", [](Draft& d, std::string_view v) { d.cfg.train.epochs = parse_count("epochs", v); },
       [](const RunConfig& c) { return count(c.train.epochs); }},
      {"batch_size", [](Draft& d, std::string_view v) { d.cfg.train.batch_size = parse_count("batch_size", v); },
       [](const RunConfig& c) { return count(c.train.batch_size); }},
      {"learning_rate",
       [](Draft& d, std::string_view v) { d.cfg.train.learning_rate = parse_real("learning_rate", v); },
       [](const RunConfig& c) { return real(c.train.learning_rate); }},
      {"beta_cont", [](Draft& d, std::string_view v) { d.cfg.train.betas.cont = parse_real("beta_cont", v); },
       [](const RunConfig& c) { return real(c.train.betas.cont); }},
      {"beta_cat", [](Draft& d, std::string_view v) { d.cfg.train.betas.cat = parse_real("beta_cat", v); },
       [](const RunConfig& c) { return real(c.train.betas.cat); }},
      {"beta_info", [](Draft& d, std::string_view v) { d.cfg.train.betas.info = parse_real("beta_info", v); },
       [](const RunConfig& c) { return real(c.train.betas.info); }},
      {"seed", [](Draft& d, std::string_view v) { d.cfg.train.seed = parse_u64("seed", v); },
       [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      {"info_samples",
       [](Draft& d, std::string_view v) {
         if (v == "auto") {
           d.cfg.train.info_samples.reset();
         } else {
           d.cfg.train.info_samples = parse_count("info_samples", v);
         }
       },
       [](const RunConfig& c) { return c.train.info_samples ? count(*c.train.info_samples) : std::string("auto"); }},
      {"info_schedule",
       [](Draft& d, std::string_view v) {
         d.cfg.train.info_schedule = wrap("info_schedule", [&] { return parse_info_schedule(v); });
       },
       [](const RunConfig& c) { return std::string(to_string(c.train.info_schedule)); }},
      {"info_grad_to_decoder",
       [](Draft& d, std::string_view v) { d.cfg.train.info_grad_to_decoder = parse_flag("info_grad_to_decoder", v); },
       [](const RunConfig& c) { return flag(c.train.info_grad_to_decoder); }},
      {"likelihood",
       [](Draft& d, std::string_view v) {
         d.cfg.train.likelihood = wrap("likelihood", [&] { return parse_likelihood(v); });
       },
       [](const RunConfig& c) { return std::string(to_string(c.train.likelihood)); }},
      {"shuffle", [](Draft& d, std::string_view v) { d.cfg.train.shuffle = parse_flag("shuffle", v); },
       [](const RunConfig& c) { return flag(c.train.shuffle); }},
      {"checkpoint_every",
       [](Draft& d, std::string_view v) { d.cfg.train.checkpoint_every = parse_count("checkpoint_every", v); },
       [](const RunConfig& c) { return count(c.train.checkpoint_every); }},
      // data and files
      {"data_dir", [](Draft& d, std::string_view v) { d.cfg.data_dir = std::string(v); },
       [](const RunConfig& c) { return c.data_dir.string(); }},
      {"train_subset", [](Draft& d, std::string_view v) { d.cfg.train_subset = parse_count("train_subset", v); },
       [](const RunConfig& c) { return count(c.train_subset); }},
      {"out", [](Draft& d, std::string_view v) { d.cfg.out = std::string(v); },
       [](const RunConfig& c) { return c.out.string(); }},
      {"checkpoint", [](Draft& d, std::string_view v) { d.cfg.checkpoint = std::string(v); },
       [](const RunConfig& c) { return c.checkpoint.string(); }},
      // evaluation
      {"kde_fit_samples",
       [](Draft& d, std::string_view v) { d.cfg.eval.kde_fit_samples = parse_count("kde_fit_samples", v); },
       [](const RunConfig& c) { return count(c.eval.kde_fit_samples); }},
      {"kde_eval_samples",
       [](Draft& d, std::string_view v) { d.cfg.eval.kde_eval_samples = parse_count("kde_eval_samples", v); },
       [](const RunConfig& c) { return count(c.eval.kde_eval_samples); }},
      {"kde_folds", [](Draft& d, std::string_view v) { d.cfg.eval.kde_folds = parse_count("kde_folds", v); },
       [](const RunConfig& c) { return count(c.eval.kde_folds); }},
      {"kde_grid_min", [](Draft& d, std::string_view v) { d.cfg.eval.kde_grid_min = parse_real("kde_grid_min", v); },
       [](const RunConfig& c) { return real(c.eval.kde_grid_min); }},
      {"kde_grid_max", [](Draft& d, std::string_view v) { d.cfg.eval.kde_grid_max = parse_real("kde_grid_max", v); },
       [](const RunConfig& c) { return real(c.eval.kde_grid_max); }},
      {"kde_grid_size",
       [](Draft& d, std::string_view v) { d.cfg.eval.kde_grid_size = parse_count("kde_grid_size", v); },
       [](const RunConfig& c) { return count(c.eval.kde_grid_size); }},
      {"eval_n", [](Draft& d, std::string_view v) { d.cfg.eval.eval_n = parse_count("eval_n", v); },
       [](const RunConfig& c) { return count(c.eval.eval_n); }},
      {"per_class", [](Draft& d, std::string_view v) { d.cfg.eval.per_class = parse_count("per_class", v); },
       [](const RunConfig& c) { return count(c.eval.per_class); }},
      {"interp_steps", [](Draft& d, std::string_view v) { d.cfg.eval.interp_steps = parse_count("interp_steps", v); },
       [](const RunConfig& c) { return count(c.eval.interp_steps); }},
      {"lambda_values", [](Draft& d, std::string_view v) { d.cfg.eval.lambda_values = parse_list("lambda_values", v); },
       [](const RunConfig& c) { return list(c.eval.lambda_values); }},
      {"sweep_category",
       [](Draft& d, std::string_view v) { d.cfg.eval.sweep_category = parse_count("sweep_category", v); },
       [](const RunConfig& c) { return count(c.eval.sweep_category); }},
      {"grid_sep", [](Draft& d, std::string_view v) { d.cfg.eval.grid_sep = parse_count("grid_sep", v); },
       [](const RunConfig& c) { return count(c.eval.grid_sep); }},
  };
  return table;
}

const Field& field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError(std::string(key), "unknown key");
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  const auto& e = eval;
  if (e.kde_folds < 2) throw ConfigError("kde_folds", "must be at least 2");
  if (e.kde_fit_samples < e.kde_folds) throw ConfigError("kde_fit_samples", "must be at least kde_folds");
  if (e.kde_eval_samples == 0) throw ConfigError("kde_eval_samples", "must be positive");
  if (!(e.kde_grid_min > 0.0)) throw ConfigError("kde_grid_min", "must be positive");
  if (!(e.kde_grid_max >= e.kde_grid_min)) throw ConfigError("kde_grid_max", "must be at least kde_grid_min");
  if (e.kde_grid_size == 0) throw ConfigError("kde_grid_size", "must be positive");
  if (e.eval_n == 0) throw ConfigError("eval_n", "must be positive");
  if (e.per_class == 0) throw ConfigError("per_class", "must be positive");
  if (e.lambda_values.empty()) throw ConfigError("lambda_values", "must not be empty");
  if (e.sweep_category >= model.categories) throw ConfigError("sweep_category", "must be below categories");
}

Overrides parse_assignments(std::string_view text) {
  Overrides out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(line), "line " + std::to_string(line_no) + " is not of the form key = value");
    }
    out.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

RunConfig parse_config_text(std::string_view text, const Overrides& overrides) {
  Draft d;
  auto apply = [&](const Overrides& kv) {
    for (const auto& [k, v] : kv) field(k).set(d, v);
  };
  apply(parse_assignments(text));
  apply(overrides);
  d.cfg.model.latent_dim = d.latent_dim.value_or(d.cfg.model.categories * d.cfg.model.delta);
  d.cfg.validate();
  return d.cfg;
}

RunConfig parse_config(const std::optional<std::filesystem::path>& file, const Overrides& overrides) {
  std::string text;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw IoError("cannot read config file " + file->string());
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return parse_config_text(text, overrides);
}

std::string materialize(const RunConfig& config) {
  std::string out = "# icvae run configuration (all keys, resolved values)\n";
  out += "# parameter init: weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0, from Rng(seed)\n";
  out += "# info_samples=auto uses batch_size prior draws per step\n";
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(config) + "\n";
  return out;
}

std::vector<std::string_view> config_keys() {
  std::vector<std::string_view> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

}  // namespace icvae
