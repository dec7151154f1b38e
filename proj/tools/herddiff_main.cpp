#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "herd/errors.hpp"
#include "herd/experiment.hpp"

namespace {

// Flags are tri-state (absent = keep config/default value), so a config file
// is only overridden by flags the user actually passed.
struct FlagOverrides {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> steps;
  std::optional<std::int64_t> chains;
  std::optional<double> delta;
  std::optional<double> weight_scale;
  std::optional<std::string> sampler;
  std::optional<std::string> process;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<std::string> data;
  bool oracle = false;
  bool inject_fault = false;
};

void add_common_flags(CLI::App* cmd, FlagOverrides& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file; flags override its fields");
  cmd->add_option("--seed", flags.seed, "root seed (u64)");
  cmd->add_option("--steps", flags.steps, "reverse steps T");
  cmd->add_option("--chains", flags.chains, "chains per sampler");
  cmd->add_option("--delta", flags.delta, "switching margin (>= 0)");
  cmd->add_option("--weight-scale", flags.weight_scale, "initial weight scale (> 0)");
  cmd->add_option("--sampler", flags.sampler, "herding | gumbel | both")
      ->check(CLI::IsMember({"herding", "gumbel", "both"}));
  cmd->add_option("--process", flags.process, "uniform | absorbing")
      ->check(CLI::IsMember({"uniform", "absorbing"}));
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--threads", flags.threads, "worker threads (0 = hardware)");
  cmd->add_option("--data", flags.data,
                  "data distribution: path, builtin:benchmark, or builtin:mini");
}

herd::ExperimentConfig build_config(const FlagOverrides& flags) {
  herd::ExperimentConfig config;
  if (flags.config_path) config = herd::load_experiment_config(*flags.config_path);
  if (flags.seed) config.seed = *flags.seed;
  if (flags.steps) config.steps = *flags.steps;
  if (flags.chains) config.chains = *flags.chains;
  if (flags.delta) config.delta = *flags.delta;
  if (flags.weight_scale) config.weight_scale = *flags.weight_scale;
  if (flags.sampler) config.sampler = *flags.sampler;
  if (flags.process) config.process = *flags.process;
  if (flags.out) config.out = *flags.out;
  if (flags.threads) config.threads = *flags.threads;
  if (flags.data) config.data = *flags.data;
  if (flags.oracle) config.oracle = true;
  if (flags.inject_fault) config.inject_fault = true;
  herd::validate_experiment_config(config);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic herding samplers for discrete diffusion chains"};
  app.require_subcommand(1);

  FlagOverrides flags;
  CLI::App* herd_cat =
      app.add_subcommand("herd-cat", "convergence curves of categorical herding");
  CLI::App* diffuse =
      app.add_subcommand("diffuse", "run reverse denoising chains and score them");
  CLI::App* sweep =
      app.add_subcommand("sweep-delta", "trade-off table over switching margins");
  CLI::App* oracle =
      app.add_subcommand("oracle-check", "cross-check closed forms against oracles");
  for (CLI::App* cmd : {herd_cat, diffuse, sweep, oracle}) add_common_flags(cmd, flags);
  diffuse->add_flag("--oracle", flags.oracle,
                    "also compare empirical joints against the DP oracle");
  oracle->add_flag("--inject-fault", flags.inject_fault,
                   "test hook: corrupt one sample so the residual check fails");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // malformed usage is a config-level failure
  }

  try {
    const herd::ExperimentConfig config = build_config(flags);
    if (herd_cat->parsed()) return herd::cmd_herd_cat(config);
    if (diffuse->parsed()) return herd::cmd_diffuse(config);
    if (sweep->parsed()) return herd::cmd_sweep_delta(config);
    return herd::cmd_oracle_check(config);
  } catch (const herd::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const herd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
