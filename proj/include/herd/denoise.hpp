#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "herd/diffusion.hpp"
#include "herd/rng.hpp"
#include "herd/types.hpp"

namespace herd {

enum class SamplerKind { herding, gumbel_max };

std::string to_string(SamplerKind kind);

struct DenoiseConfig {
  double delta = 0.0;         // switching margin, >= 0
  double weight_scale = 1.0;  // initial weights are uniform on [0, scale)
  std::int64_t steps = 1;     // reverse steps T, >= 1
  SamplerKind sampler = SamplerKind::herding;
};

// Throws ConfigError naming the offending field.
void validate_denoise_config(const DenoiseConfig& config);

// Hybrid per-position state of the derandomized chain.
struct PositionState {
  Token token = 0;
  WeightVector weight;
};

// Random start: token uniform over the vocabulary, each weight component
// uniform on [0, weight_scale). Consumes exactly 1 + vocab draws, in that
// order, so states are reproducible from the stream alone.
PositionState init_position_state(int vocab, CounterRng& rng, double weight_scale);

// One derandomized update. Scores are s = w + p_next; the candidate is the
// lowest-index argmax; the token switches only when the candidate's score
// exceeds the current token's score by at least delta (any improvement
// suffices at delta = 0, where the step is exactly the score argmax). The
// weight always moves by p_next - onehot(chosen), held token included.
PositionState derandomized_step(const PositionState& state, const ProbVector& p_next,
                                double delta);

// Stochastic baseline: argmax_k log p_k + Gumbel noise, exact categorical
// sampling. Consumes exactly vocab draws; zero-probability entries are never
// selected. An all-zero row raises AllZeroProbability before any draw.
Token gumbel_max_step(const ProbVector& p_next, CounterRng& rng);
Token gumbel_max_step_raw(const double* p_next, std::int64_t n, CounterRng& rng);

// One recorded state: tokens and (herding only) weights at time t, plus the
// model row that produced the transition into t (empty at the initial t = T).
struct StepRecord {
  std::int64_t t = 0;
  TokenSequence tokens;
  std::vector<double> weights;  // length * vocab, empty for gumbel
  std::vector<double> probs;    // length * vocab, empty at t = T
};

struct ChainTrajectory {
  int vocab = 0;
  int length = 0;
  std::uint64_t seed = 0;
  double delta = 0.0;
  double weight_scale = 1.0;
  SamplerKind sampler = SamplerKind::herding;
  std::string process;
  std::vector<StepRecord> steps;  // T + 1 records, t = T down to 0
};

struct ChainOutput {
  TokenSequence sample;  // x_0
  ChainTrajectory trajectory;
  double max_weight_norm = 0.0;  // max over t and positions; 0 for gumbel
  // max over positions of || sum_tau (p_tau - onehot(x_tau)) ||_inf / T.
  double discrepancy_norm = 0.0;
  std::vector<std::int32_t> switch_counts;  // [T], positions changed per step
  std::int64_t switches_total = 0;
  std::vector<std::uint64_t> draws_per_position;  // RNG draws consumed
};

// Runs one reverse chain from t = T (config.steps) down to 0. The chain
// queries the model once per step with the full sequence and then updates
// every position independently. Per-position streams are split from the
// chain seed, so results do not depend on scheduling. Herding chains draw
// randomness only during initialization (observable via draws_per_position);
// weight accumulation is compensated per component so the per-position
// telescoping identity holds to 1e-12 at any chain length handled here.
// Model exceptions surface as ModelFailure; non-finite weights abort with
// NonFiniteWeight.
ChainOutput run_reverse_chain(const ReverseModel& model, const DenoiseConfig& config,
                              std::uint64_t seed, bool record_trajectory = true);

// Largest single-step weight-update residual over a recorded herding
// trajectory: | w_{t-1} - (w_t + p - onehot(x_{t-1})) | per component.
double trajectory_max_step_residual(const ChainTrajectory& trajectory);

// Largest telescoping residual over a recorded herding trajectory:
// | (w_t - w_T) - sum_{tau >= t} (p_tau - onehot(x_tau)) | per component,
// evaluated at every recorded t.
double trajectory_max_telescoping_residual(const ChainTrajectory& trajectory);

}  // namespace herd
