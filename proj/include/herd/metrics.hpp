#pragma once

#include <cstdint>
#include <vector>

#include "herd/denoise.hpp"
#include "herd/diffusion.hpp"
#include "herd/types.hpp"

namespace herd {

// Half the L1 distance between two distributions on the same support.
double total_variation(const std::vector<double>& p, const std::vector<double>& q);

// Frequency vector over a vocabulary; counts are integers so the sum is 1 to
// within accumulated division error (1e-12 budget).
ProbVector empirical_distribution(const std::vector<Token>& samples, int vocab);

// Shannon entropy in nats of the pooled unigram token distribution across
// all positions of all samples. Always within [0, ln vocab].
double token_entropy(const std::vector<TokenSequence>& samples, int vocab);

// Big-endian mixed-radix index of a sequence (position 0 most significant).
std::int64_t joint_index(const TokenSequence& sequence, int vocab);

// Empirical joint distribution over full sequences, indexed by joint_index.
// vocab^length must stay within `cap`.
std::vector<double> empirical_joint(const std::vector<TokenSequence>& samples, int vocab,
                                    int length, std::int64_t cap = kEnumerationCap);

// TV between the empirical sequence distribution and a data distribution,
// evaluated over the union of observed and target atoms.
double sequence_tv_to_data(const std::vector<TokenSequence>& samples,
                           const DataDistribution& data);

// Exact distribution over final sequences of the *stochastic* reverse chain:
// forward DP over joint states, starting from the product of the model's
// initial distribution and applying the model's per-position rows as an
// independent product kernel at every step. Aborts if total mass leaves
// [1 - 1e-10, 1 + 1e-10] at any slice.
std::vector<double> exact_chain_marginals(const ReverseModel& model, std::int64_t steps,
                                          std::int64_t cap = kEnumerationCap);

struct ConvergencePoint {
  std::int64_t steps = 0;
  double mean_error = 0.0;  // max-norm frequency error averaged over seeds
};

struct ConvergenceCurve {
  std::vector<ConvergencePoint> points;
  double slope = 0.0;  // least-squares slope of log(error) vs log(steps)
  std::vector<std::vector<double>> per_seed_errors;  // [seed][grid point]
};

// Empirical-frequency error curves on a static target. Herding seeds draw
// w_0 uniformly from [0,1)^K (an all-zero start lands on periodic orbits
// whose grid error is exactly zero, which has no log); Gumbel-max seeds
// drive the sampler directly. Each seed is one pass to the largest grid
// value with counts checkpointed at every grid point.
ConvergenceCurve convergence_curve(const ProbVector& p, SamplerKind sampler,
                                   const std::vector<std::int64_t>& t_grid,
                                   int seed_count, std::uint64_t root_seed,
                                   int threads = 0);

// Least-squares slope of log(err) vs log(T). Points with err <= 0 are
// dropped; returns NaN when fewer than two usable points remain.
double fit_loglog_slope(const std::vector<ConvergencePoint>& points);

// Regularized upper incomplete gamma Q(a, x), a > 0, x >= 0. Series below
// a + 1, Lentz continued fraction above.
double regularized_gamma_q(double a, double x);

// Goodness-of-fit p-value for observed counts against expected proportions:
// Q(df/2, stat/2) with df = (positive-expectation bins) - 1.
double chi_square_pvalue(const std::vector<std::int64_t>& counts,
                         const std::vector<double>& expected);

// Oracle: cumulative transition built by explicit single-step composition,
// independent of the closed-form retention kernels.
TransitionMatrix transition_product_oracle(const ForwardProcess& process, std::int64_t s,
                                           std::int64_t t);

// Oracle: one-position reverse posterior built from stepwise forward DP and
// direct Bayes inversion over single-step matrices.
std::vector<double> posterior_enumeration_oracle(Token x_t, Token x0,
                                                 const ForwardProcess& process,
                                                 std::int64_t t);

// Oracle: the exact-Bayes model's row block recomputed from product-built
// cumulative matrices and a dense sweep over the data support.
std::vector<double> model_enumeration_oracle(const ExactBayesModel& model,
                                             const TokenSequence& x_t, std::int64_t t);

struct RunMetrics {
  double tv_to_target = 0.0;
  double token_entropy = 0.0;
  double max_weight_norm = 0.0;   // max over chains
  double discrepancy_norm = 0.0;  // max over chains
  std::vector<std::int64_t> switch_counts;  // per-step totals over chains
  std::int64_t switches_total = 0;
};

RunMetrics aggregate_run_metrics(const std::vector<ChainOutput>& outputs,
                                 const DataDistribution& data);

}  // namespace herd
