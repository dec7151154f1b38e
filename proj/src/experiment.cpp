#include "herd/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "herd/errors.hpp"
#include "herd/herding.hpp"
#include "herd/parallel.hpp"
#include "herd/rng.hpp"

namespace herd {
namespace {

using nlohmann::json;

constexpr std::uint64_t kChainHerdingSalt = 0x636861696e686472ULL;
constexpr std::uint64_t kChainGumbelSalt = 0x636861696e676d62ULL;
constexpr std::uint64_t kOracleSalt = 0x6f7261636c65ULL;

// 17 significant digits round-trip any double bit-exactly.
std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string tokens_string(const TokenSequence& tokens) {
  std::string s;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) s += ' ';
    s += std::to_string(tokens[i]);
  }
  return s;
}

// The resolved config embeds every field that determines result content.
// `out` and `threads` are execution-only (results are independent of the
// thread count by construction) and are left out so reruns stay
// byte-identical under any parallelism.
json config_to_json(const ExperimentConfig& c) {
  json j;
  j["process"] = c.process;
  j["K"] = c.vocab;
  j["L"] = c.length;
  j["steps"] = c.steps;
  j["schedule"] = c.schedule;
  j["sampler"] = c.sampler;
  j["delta"] = c.delta;
  j["weight_scale"] = c.weight_scale;
  j["chains"] = c.chains;
  j["seed"] = c.seed;
  j["data"] = c.data;
  j["mask_index"] = c.mask_index;
  j["delta_list"] = c.delta_list;
  j["target_p"] = c.target_p;
  j["t_grid"] = c.t_grid;
  j["curve_seeds"] = c.curve_seeds;
  j["oracle"] = c.oracle;
  j["inject_fault"] = c.inject_fault;
  return j;
}

std::int64_t field_i64(const json& value, const std::string& key) {
  if (!value.is_number_integer() && !value.is_number_unsigned()) {
    throw ConfigError(key, "must be an integer");
  }
  return value.get<std::int64_t>();
}

double field_f64(const json& value, const std::string& key) {
  if (!value.is_number()) throw ConfigError(key, "must be a number");
  return value.get<double>();
}

std::string field_str(const json& value, const std::string& key) {
  if (!value.is_string()) throw ConfigError(key, "must be a string");
  return value.get<std::string>();
}

bool field_bool(const json& value, const std::string& key) {
  if (!value.is_boolean()) throw ConfigError(key, "must be a boolean");
  return value.get<bool>();
}

std::vector<double> field_f64_list(const json& value, const std::string& key) {
  if (!value.is_array()) throw ConfigError(key, "must be an array of numbers");
  std::vector<double> out;
  for (const json& v : value) out.push_back(field_f64(v, key));
  return out;
}

std::vector<std::int64_t> field_i64_list(const json& value, const std::string& key) {
  if (!value.is_array()) throw ConfigError(key, "must be an array of integers");
  std::vector<std::int64_t> out;
  for (const json& v : value) out.push_back(field_i64(v, key));
  return out;
}

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw Error("cannot create output directory '" + out + "': " + ec.message());
}

void write_file(const std::string& dir, const std::string& name, const std::string& body) {
  const std::filesystem::path path = std::filesystem::path(dir) / name;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f << body;
  if (!f) throw Error("failed while writing '" + path.string() + "'");
}

std::vector<SamplerKind> selected_samplers(const std::string& sampler) {
  if (sampler == "herding") return {SamplerKind::herding};
  if (sampler == "gumbel") return {SamplerKind::gumbel_max};
  // Both: gumbel sorts before herding, matching the canonical row order.
  return {SamplerKind::gumbel_max, SamplerKind::herding};
}

json run_metrics_json(const RunMetrics& m) {
  json j;
  j["tv_to_target"] = m.tv_to_target;
  j["token_entropy"] = m.token_entropy;
  j["max_weight_norm"] = m.max_weight_norm;
  j["discrepancy_norm"] = m.discrepancy_norm;
  j["switches_total"] = m.switches_total;
  j["switch_counts"] = m.switch_counts;
  return j;
}

std::vector<TokenSequence> collect_samples(const std::vector<ChainOutput>& outputs) {
  std::vector<TokenSequence> samples;
  samples.reserve(outputs.size());
  for (const ChainOutput& out : outputs) samples.push_back(out.sample);
  return samples;
}

std::int64_t joint_space_size(const ExperimentConfig& config) {
  std::int64_t m = 1;
  for (int l = 0; l < config.length; ++l) {
    if (m > kEnumerationCap / config.vocab) {
      throw EnumerationCapExceeded("joint state space K^L exceeds the enumeration cap " +
                                   std::to_string(kEnumerationCap));
    }
    m *= config.vocab;
  }
  return m;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config", "top level must be a JSON object");

  ExperimentConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "process") {
      c.process = field_str(value, key);
    } else if (key == "K") {
      c.vocab = static_cast<int>(field_i64(value, key));
    } else if (key == "L") {
      c.length = static_cast<int>(field_i64(value, key));
    } else if (key == "steps") {
      c.steps = field_i64(value, key);
    } else if (key == "schedule") {
      c.schedule = field_str(value, key);
    } else if (key == "sampler") {
      c.sampler = field_str(value, key);
    } else if (key == "delta") {
      c.delta = field_f64(value, key);
    } else if (key == "weight_scale") {
      c.weight_scale = field_f64(value, key);
    } else if (key == "chains") {
      c.chains = field_i64(value, key);
    } else if (key == "seed") {
      if (!value.is_number_unsigned() &&
          !(value.is_number_integer() && value.get<std::int64_t>() >= 0)) {
        throw ConfigError(key, "must be a non-negative integer");
      }
      c.seed = value.get<std::uint64_t>();
    } else if (key == "data") {
      c.data = field_str(value, key);
    } else if (key == "out") {
      c.out = field_str(value, key);
    } else if (key == "threads") {
      c.threads = static_cast<int>(field_i64(value, key));
    } else if (key == "mask_index") {
      c.mask_index = static_cast<int>(field_i64(value, key));
    } else if (key == "delta_list") {
      c.delta_list = field_f64_list(value, key);
    } else if (key == "target_p") {
      c.target_p = field_f64_list(value, key);
    } else if (key == "t_grid") {
      c.t_grid = field_i64_list(value, key);
    } else if (key == "curve_seeds") {
      c.curve_seeds = static_cast<int>(field_i64(value, key));
    } else if (key == "oracle") {
      c.oracle = field_bool(value, key);
    } else if (key == "inject_fault") {
      c.inject_fault = field_bool(value, key);
    } else {
      throw ConfigError(key, "unknown configuration field");
    }
  }
  validate_experiment_config(c);
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("config", "cannot open file '" + path + "'");
  std::ostringstream body;
  body << f.rdbuf();
  return parse_experiment_config(body.str());
}

void validate_experiment_config(const ExperimentConfig& c) {
  if (c.process != "uniform" && c.process != "absorbing") {
    throw ConfigError("process", "must be \"uniform\" or \"absorbing\"");
  }
  if (c.vocab < 2) throw ConfigError("K", "must be >= 2");
  if (c.length < 1) throw ConfigError("L", "must be >= 1");
  if (c.steps < 1) throw ConfigError("steps", "must be >= 1");
  if (c.schedule != "linear" && c.schedule != "geometric") {
    throw ConfigError("schedule", "must be \"linear\" or \"geometric\"");
  }
  if (c.sampler != "herding" && c.sampler != "gumbel" && c.sampler != "both") {
    throw ConfigError("sampler", "must be \"herding\", \"gumbel\", or \"both\"");
  }
  if (!(c.delta >= 0.0) || !std::isfinite(c.delta)) {
    throw ConfigError("delta", "must be a finite value >= 0");
  }
  if (!(c.weight_scale > 0.0) || !std::isfinite(c.weight_scale)) {
    throw ConfigError("weight_scale", "must be a finite value > 0");
  }
  if (c.chains < 1) throw ConfigError("chains", "must be >= 1");
  if (c.out.empty()) throw ConfigError("out", "must be a non-empty directory path");
  if (c.threads < 0) throw ConfigError("threads", "must be >= 0");
  if (c.mask_index < -1 || c.mask_index >= c.vocab) {
    throw ConfigError("mask_index", "must be -1 (last token) or in [0, K)");
  }
  if (c.curve_seeds < 1) throw ConfigError("curve_seeds", "must be >= 1");
}

std::string resolved_config_json(const ExperimentConfig& config, bool compact) {
  const json j = config_to_json(config);
  return compact ? j.dump() : j.dump(2);
}

DataDistribution builtin_benchmark() {
  std::vector<TokenSequence> support = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6},
                                        {6, 7}, {7, 0}, {0, 3}, {2, 5}, {4, 7}, {6, 1}};
  double h = 0.0;
  for (int i = 1; i <= 12; ++i) h += 1.0 / i;
  std::vector<double> probs(12);
  for (int i = 1; i <= 12; ++i) probs[static_cast<size_t>(i - 1)] = 1.0 / (i * h);
  return make_data_distribution(8, 2, std::move(support), std::move(probs));
}

DataDistribution builtin_mini() {
  return make_data_distribution(3, 1, {{0}, {1}}, {0.5, 0.5});
}

DataDistribution resolve_data(const ExperimentConfig& config) {
  DataDistribution data;
  if (config.data.empty() || config.data == "builtin:benchmark") {
    data = builtin_benchmark();
  } else if (config.data == "builtin:mini") {
    data = builtin_mini();
  } else {
    data = load_data_distribution(config.data);
  }
  if (data.vocab != config.vocab) {
    throw ConfigError("K", "config K=" + std::to_string(config.vocab) +
                               " does not match the data distribution (K=" +
                               std::to_string(data.vocab) + ")");
  }
  if (data.length != config.length) {
    throw ConfigError("L", "config L=" + std::to_string(config.length) +
                               " does not match the data distribution (L=" +
                               std::to_string(data.length) + ")");
  }
  return data;
}

ForwardProcess make_process(const ExperimentConfig& config) {
  NoiseSchedule schedule = config.schedule == "linear" ? linear_schedule(config.steps)
                                                       : geometric_schedule(config.steps);
  if (config.process == "uniform") {
    return make_forward_process(ProcessKind::uniform, config.vocab, std::move(schedule));
  }
  const int mask = config.mask_index < 0 ? config.vocab - 1 : config.mask_index;
  return make_forward_process(ProcessKind::absorbing, config.vocab, std::move(schedule), mask);
}

std::uint64_t chain_seed(std::uint64_t root, std::int64_t chain, SamplerKind sampler) {
  const std::uint64_t salt =
      sampler == SamplerKind::herding ? kChainHerdingSalt : kChainGumbelSalt;
  return derive_key(root, static_cast<std::uint64_t>(chain), salt);
}

std::vector<ChainOutput> run_sampler(const ReverseModel& model,
                                     const ExperimentConfig& config, SamplerKind sampler) {
  DenoiseConfig dc;
  dc.delta = config.delta;
  dc.weight_scale = config.weight_scale;
  dc.steps = config.steps;
  dc.sampler = sampler;
  validate_denoise_config(dc);

  std::vector<ChainOutput> outputs(static_cast<size_t>(config.chains));
  parallel_for(config.chains, config.threads, [&](std::int64_t i) {
    outputs[static_cast<size_t>(i)] =
        run_reverse_chain(model, dc, chain_seed(config.seed, i, sampler), false);
  });
  return outputs;
}

int cmd_diffuse(const ExperimentConfig& config) {
  validate_experiment_config(config);
  const DataDistribution data = resolve_data(config);
  const ForwardProcess process = make_process(config);
  const ExactBayesModel model(data, process);
  const std::vector<SamplerKind> samplers = selected_samplers(config.sampler);

  std::vector<std::vector<ChainOutput>> outputs;
  outputs.reserve(samplers.size());
  for (SamplerKind kind : samplers) outputs.push_back(run_sampler(model, config, kind));

  std::vector<double> dp;
  if (config.oracle) dp = exact_chain_marginals(model, config.steps);

  json metrics;
  metrics["config"] = config_to_json(config);
  for (size_t si = 0; si < samplers.size(); ++si) {
    const std::string name = to_string(samplers[si]);
    const RunMetrics m = aggregate_run_metrics(outputs[si], data);
    json jm = run_metrics_json(m);
    if (config.oracle) {
      const std::vector<double> emp =
          empirical_joint(collect_samples(outputs[si]), config.vocab, config.length);
      jm["tv_to_dp"] = total_variation(emp, dp);
    }
    metrics["samplers"][name] = jm;
    std::cout << "sampler=" << name << " tv_to_target=" << format_double(m.tv_to_target)
              << " token_entropy=" << format_double(m.token_entropy)
              << " switches_total=" << m.switches_total << "\n";
  }

  std::ostringstream csv;
  csv << "# resolved_config: " << resolved_config_json(config, true) << "\n";
  csv << "chain,sampler,tokens,max_weight_norm,discrepancy_norm,switches_total\n";
  for (std::int64_t chain = 0; chain < config.chains; ++chain) {
    for (size_t si = 0; si < samplers.size(); ++si) {
      const ChainOutput& out = outputs[si][static_cast<size_t>(chain)];
      csv << chain << ',' << to_string(samplers[si]) << ',' << tokens_string(out.sample)
          << ',' << format_double(out.max_weight_norm) << ','
          << format_double(out.discrepancy_norm) << ',' << out.switches_total << "\n";
    }
  }

  ensure_out_dir(config.out);
  write_file(config.out, "results.csv", csv.str());
  write_file(config.out, "metrics.json", metrics.dump(2) + "\n");
  write_file(config.out, "resolved_config.json", resolved_config_json(config, false) + "\n");
  return 0;
}

int cmd_sweep_delta(const ExperimentConfig& config) {
  validate_experiment_config(config);
  if (config.delta_list.empty()) throw ConfigError("delta_list", "must be non-empty");
  for (size_t i = 0; i < config.delta_list.size(); ++i) {
    const double d = config.delta_list[i];
    if (!(d >= 0.0) || !std::isfinite(d)) {
      throw ConfigError("delta_list", "entries must be finite and >= 0");
    }
    if (i > 0 && d < config.delta_list[i - 1]) {
      throw ConfigError("delta_list", "entries must be nondecreasing");
    }
  }
  const DataDistribution data = resolve_data(config);
  const ForwardProcess process = make_process(config);
  const ExactBayesModel model(data, process);

  std::ostringstream csv;
  csv << "# resolved_config: " << resolved_config_json(config, true) << "\n";
  csv << "delta,tv_to_target,token_entropy,max_weight_norm,switches_total\n";
  json rows = json::array();
  for (double d : config.delta_list) {
    ExperimentConfig run = config;
    run.delta = d;
    // Same root seed and chain salts as cmd_diffuse, so the delta = 0 row
    // reproduces a plain herding run exactly.
    const std::vector<ChainOutput> outputs = run_sampler(model, run, SamplerKind::herding);
    const RunMetrics m = aggregate_run_metrics(outputs, data);
    csv << format_double(d) << ',' << format_double(m.tv_to_target) << ','
        << format_double(m.token_entropy) << ',' << format_double(m.max_weight_norm) << ','
        << m.switches_total << "\n";
    json jm = run_metrics_json(m);
    jm["delta"] = d;
    rows.push_back(std::move(jm));
    std::cout << "delta=" << format_double(d) << " tv_to_target=" << format_double(m.tv_to_target)
              << " token_entropy=" << format_double(m.token_entropy)
              << " switches_total=" << m.switches_total << "\n";
  }

  json metrics;
  metrics["config"] = config_to_json(config);
  metrics["rows"] = rows;
  ensure_out_dir(config.out);
  write_file(config.out, "results.csv", csv.str());
  write_file(config.out, "metrics.json", metrics.dump(2) + "\n");
  write_file(config.out, "resolved_config.json", resolved_config_json(config, false) + "\n");
  return 0;
}

int cmd_herd_cat(const ExperimentConfig& config) {
  validate_experiment_config(config);
  std::vector<double> target_values = config.target_p;
  ProbVector target = [&] {
    try {
      return ProbVector(std::move(target_values));
    } catch (const Error& e) {
      throw ConfigError("target_p", e.what());
    }
  }();
  if (config.t_grid.empty()) throw ConfigError("t_grid", "must be non-empty");
  for (size_t g = 0; g < config.t_grid.size(); ++g) {
    if (config.t_grid[g] < 1 || (g > 0 && config.t_grid[g] <= config.t_grid[g - 1])) {
      throw ConfigError("t_grid", "entries must be positive and strictly increasing");
    }
  }

  const std::vector<SamplerKind> samplers = selected_samplers(config.sampler);
  std::ostringstream csv;
  csv << "# resolved_config: " << resolved_config_json(config, true) << "\n";
  csv << "sampler,T,seed,max_norm_error,fitted_slope\n";
  json metrics;
  metrics["config"] = config_to_json(config);

  for (SamplerKind kind : samplers) {
    const std::string name = to_string(kind);
    const ConvergenceCurve curve = convergence_curve(target, kind, config.t_grid,
                                                     config.curve_seeds, config.seed,
                                                     config.threads);
    for (int s = 0; s < config.curve_seeds; ++s) {
      for (size_t g = 0; g < config.t_grid.size(); ++g) {
        csv << name << ',' << config.t_grid[g] << ',' << s << ','
            << format_double(curve.per_seed_errors[static_cast<size_t>(s)][g]) << ','
            << format_double(curve.slope) << "\n";
      }
    }
    json jc;
    jc["slope"] = curve.slope;
    json points = json::array();
    for (const ConvergencePoint& pt : curve.points) {
      points.push_back({{"T", pt.steps}, {"mean_error", pt.mean_error}});
    }
    jc["points"] = points;
    metrics["samplers"][name] = jc;
    std::cout << "sampler=" << name << " slope=" << format_double(curve.slope) << "\n";
  }

  ensure_out_dir(config.out);
  write_file(config.out, "results.csv", csv.str());
  write_file(config.out, "metrics.json", metrics.dump(2) + "\n");
  write_file(config.out, "resolved_config.json", resolved_config_json(config, false) + "\n");
  return 0;
}

int cmd_oracle_check(const ExperimentConfig& config) {
  validate_experiment_config(config);
  // Sized up front: an oversized joint space aborts before any output.
  const std::int64_t joint = joint_space_size(config);
  (void)joint;

  bool all_ok = true;
  const auto report = [&all_ok](const std::string& name, double deviation, double tolerance,
                                bool extra_ok, const std::string& note) {
    const bool ok = extra_ok && deviation <= tolerance;
    all_ok = all_ok && ok;
    std::cout << (ok ? "[ok] " : "[FAIL] ") << name << ": max deviation "
              << format_double(deviation) << " (tolerance " << format_double(tolerance) << ")"
              << (note.empty() ? "" : " " + note) << "\n";
  };

  {
    CounterRng rng(derive_key(config.seed, 1, kOracleSalt));
    double deviation = 0.0;
    for (int n = 0; n < 50; ++n) {
      const int k = 2 + static_cast<int>(rng.next_below(7));
      const std::int64_t t_max = 1 + static_cast<std::int64_t>(rng.next_below(16));
      std::vector<double> betas(static_cast<size_t>(t_max));
      for (double& b : betas) b = 0.05 + 0.9 * rng.next_unit();
      const NoiseSchedule schedule = make_schedule(betas);
      for (ProcessKind kind : {ProcessKind::uniform, ProcessKind::absorbing}) {
        const ForwardProcess process = make_forward_process(
            kind, k, schedule, kind == ProcessKind::absorbing ? k - 1 : -1);
        for (std::int64_t s = 0; s < t_max; ++s) {
          for (std::int64_t t = s + 1; t <= t_max; ++t) {
            const TransitionMatrix closed = cumulative_transition(process, s, t);
            const TransitionMatrix product = transition_product_oracle(process, s, t);
            for (int i = 0; i < k; ++i) {
              for (int j = 0; j < k; ++j) {
                deviation = std::max(deviation, std::fabs(closed.at(i, j) - product.at(i, j)));
              }
            }
          }
        }
      }
    }
    report("closed_form_vs_product", deviation, 1e-12, true, "");
  }

  {
    CounterRng rng(derive_key(config.seed, 2, kOracleSalt));
    double deviation = 0.0;
    int zero_cases = 0;
    bool agree = true;
    for (int n = 0; n < 200; ++n) {
      const int k = 2 + static_cast<int>(rng.next_below(5));
      const std::int64_t t_max = 1 + static_cast<std::int64_t>(rng.next_below(8));
      std::vector<double> betas(static_cast<size_t>(t_max));
      for (double& b : betas) b = 0.05 + 0.9 * rng.next_unit();
      const ProcessKind kind =
          rng.next_below(2) == 0 ? ProcessKind::uniform : ProcessKind::absorbing;
      const ForwardProcess process = make_forward_process(
          kind, k, make_schedule(betas), kind == ProcessKind::absorbing ? k - 1 : -1);
      const std::int64_t t =
          1 + static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(t_max)));
      const Token x_t = static_cast<Token>(rng.next_below(static_cast<std::uint64_t>(k)));
      const Token x0 = static_cast<Token>(rng.next_below(static_cast<std::uint64_t>(k)));

      bool impl_zero = false;
      bool oracle_zero = false;
      std::vector<double> impl;
      std::vector<double> oracle;
      try {
        impl = reverse_posterior(x_t, x0, process, t).values();
      } catch (const ZeroMassPosterior&) {
        impl_zero = true;
      }
      try {
        oracle = posterior_enumeration_oracle(x_t, x0, process, t);
      } catch (const ZeroMassPosterior&) {
        oracle_zero = true;
      }
      if (impl_zero != oracle_zero) agree = false;
      if (impl_zero || oracle_zero) {
        ++zero_cases;
        continue;
      }
      for (int y = 0; y < k; ++y) {
        deviation = std::max(deviation, std::fabs(impl[static_cast<size_t>(y)] -
                                                  oracle[static_cast<size_t>(y)]));
      }
    }
    report("posterior_vs_enumeration", deviation, 1e-10, agree,
           "(zero-mass cases: " + std::to_string(zero_cases) + ", " +
               (agree ? "both sides agree" : "SIDES DISAGREE") + ")");
  }

  {
    const DataDistribution data = resolve_data(config);
    const ForwardProcess process = make_process(config);
    const ExactBayesModel model(data, process);
    const std::vector<double> dp = exact_chain_marginals(model, config.steps);
    const std::vector<ChainOutput> outputs =
        run_sampler(model, config, SamplerKind::gumbel_max);
    const std::vector<double> emp =
        empirical_joint(collect_samples(outputs), config.vocab, config.length);
    const double tv = total_variation(emp, dp);
    const double m = static_cast<double>(dp.size());
    const double n = static_cast<double>(config.chains);
    // Expected TV of an N-sample empirical law scales like sqrt(M/N); the
    // second term covers the tail at small M.
    const double tolerance = 0.5 * std::sqrt(m / n) + 3.0 / std::sqrt(n);
    report("gumbel_vs_dp", tv, tolerance, true,
           "(" + std::to_string(config.chains) + " chains)");
  }

  {
    CounterRng rng(derive_key(config.seed, 4, kOracleSalt));
    double deviation = 0.0;
    for (int n = 0; n < 20; ++n) {
      const int k = n == 0 ? 4 : 2 + static_cast<int>(rng.next_below(15));
      const std::int64_t steps =
          n == 0 ? 1000 : 100 + static_cast<std::int64_t>(rng.next_below(19901));
      std::vector<double> raw(static_cast<size_t>(k));
      double sum = 0.0;
      for (double& v : raw) {
        v = 0.05 + rng.next_unit();
        sum += v;
      }
      for (double& v : raw) v /= sum;
      const ProbVector p(std::move(raw));
      WeightVector w0(static_cast<size_t>(k));
      for (double& w : w0) w = -1.0 + 2.0 * rng.next_unit();

      HerdingRun run = herding_run(p, w0, steps);
      if (config.inject_fault && n == 0) {
        // Documented test hook: corrupt one sample; the residual must jump
        // to 1/steps and turn this check red.
        run.samples[0] = static_cast<Token>((run.samples[0] + 1) % k);
      }
      const std::vector<double> residual =
          discrepancy(run.samples, p, w0, run.final_state.weight);
      for (double v : residual) deviation = std::max(deviation, std::fabs(v));
    }
    report("telescoping_residual", deviation, 1e-12, true,
           config.inject_fault ? "(fault injected into one sample)" : "");
  }

  return all_ok ? 0 : 1;
}

}  // namespace herd
