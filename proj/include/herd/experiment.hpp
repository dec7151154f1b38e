#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "herd/denoise.hpp"
#include "herd/diffusion.hpp"
#include "herd/metrics.hpp"

namespace herd {

// Resolved experiment parameters. JSON config files and CLI flags both fill
// this struct; flags win. Field names below match the JSON keys (`vocab` is
// "K", `length` is "L").
struct ExperimentConfig {
  std::string process = "uniform";   // uniform | absorbing
  int vocab = 8;                     // K
  int length = 2;                    // L
  std::int64_t steps = 64;           // T
  std::string schedule = "linear";   // linear | geometric
  std::string sampler = "both";      // herding | gumbel | both
  double delta = 0.0;
  double weight_scale = 1.0;
  std::int64_t chains = 4096;
  std::uint64_t seed = 1;
  std::string data;                  // "", "builtin:benchmark", "builtin:mini", or a path
  std::string out = "out";
  int threads = 0;                   // 0 = hardware concurrency
  int mask_index = -1;               // -1 = vocab - 1 (absorbing only)
  std::vector<double> delta_list = {0.0, 0.05, 0.1, 0.2, 0.5};
  std::vector<double> target_p = {0.7, 0.2, 0.1};
  std::vector<std::int64_t> t_grid = {100, 1000, 10000, 100000};
  int curve_seeds = 100;
  bool oracle = false;        // diffuse: also compare against the DP oracle
  bool inject_fault = false;  // oracle-check: flip one sample, must turn red
};

// Parse / load / validate throw ConfigError naming the offending field.
// Unknown keys are rejected so typos cannot silently fall back to defaults.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);
void validate_experiment_config(const ExperimentConfig& config);

// Canonical JSON form with sorted keys; compact form is embedded as the
// leading `# resolved_config:` comment line of every results.csv.
std::string resolved_config_json(const ExperimentConfig& config, bool compact);

// Shipped default benchmark: K=8, L=2, 12 support pairs with Zipf weights.
// data/benchmark_k8_l2.json holds the same distribution for external tools.
DataDistribution builtin_benchmark();
// Small exact fixture: K=3, L=1, uniform over the two sequences (0) and (1).
DataDistribution builtin_mini();

// Materialize the configured data distribution ("" = builtin benchmark) and
// check it against the configured K and L.
DataDistribution resolve_data(const ExperimentConfig& config);

ForwardProcess make_process(const ExperimentConfig& config);

// Chain seeds are split per (root seed, chain index, sampler); the two
// samplers never share a stream, and chain order never matters.
std::uint64_t chain_seed(std::uint64_t root, std::int64_t chain, SamplerKind sampler);

// Runs config.chains reverse chains (trajectories not recorded), parallel
// over chains, deterministic in content for any thread count.
std::vector<ChainOutput> run_sampler(const ReverseModel& model,
                                     const ExperimentConfig& config, SamplerKind sampler);

// Subcommand bodies; each returns a process exit code (0 = success, 1 =
// checks failed). Invalid configuration surfaces as ConfigError instead.
int cmd_herd_cat(const ExperimentConfig& config);
int cmd_diffuse(const ExperimentConfig& config);
int cmd_sweep_delta(const ExperimentConfig& config);
int cmd_oracle_check(const ExperimentConfig& config);

}  // namespace herd
