#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "herd/types.hpp"

namespace herd {

// Lowest index attaining the maximum. Ties resolve to the smallest index so
// runs are reproducible even from exactly tied states (e.g. all-zero weights).
int argmax_lowest(const double* values, std::int64_t n);

// General herding inputs: column j of `features` holds the feature vector of
// item j; `targets` is the vector of target feature means.
struct FeatureTable {
  std::int64_t feature_count = 0;  // rows
  std::int64_t item_count = 0;     // columns
  std::vector<double> features;    // row-major feature_count x item_count
  std::vector<double> targets;     // length feature_count
};

FeatureTable make_feature_table(std::int64_t feature_count, std::int64_t item_count,
                                std::vector<double> features,
                                std::vector<double> targets);

// Identity features over K categories: selecting item k contributes
// onehot(k), and the target means are the category probabilities. With this
// table, general herding reproduces categorical herding step for step.
FeatureTable identity_feature_table(const ProbVector& p);

struct HerdingState {
  WeightVector weight;
  WeightVector initial_weight;  // retained for the telescoping identity
  std::int64_t step_count = 0;
};

HerdingState make_herding_state(WeightVector w0);

// One herding step: pick argmax_j w . phi(x_j), then move the weight by the
// residual between target means and the selected item's features.
std::pair<std::int64_t, HerdingState> feature_herding_step(const HerdingState& state,
                                                           const FeatureTable& table);

// Categorical specialization: pick argmax_k w_k, then w += p - onehot(pick).
std::pair<Token, HerdingState> categorical_herding_step(const HerdingState& state,
                                                        const ProbVector& p);

struct HerdingRun {
  std::vector<Token> samples;
  HerdingState final_state;
  double max_weight_norm = 0.0;  // max over t in [0, T] of ||w_t||_inf
};

// Runs T categorical herding steps. The weight is accumulated with
// per-component compensated (Neumaier) summation so the telescoping identity
//   p - (1/T) sum_t onehot(x_t) = (w_T - w_0) / T
// holds to 1e-12 per component even at T = 1e5.
HerdingRun herding_run(const ProbVector& p, const WeightVector& w0, std::int64_t steps);

// Residual of the telescoping identity:
//   [p - empirical frequency] - (w_T - w_0) / T.
// Sample counts are integers, so the empirical sum is exact.
std::vector<double> discrepancy(const std::vector<Token>& samples, const ProbVector& p,
                                const WeightVector& w0, const WeightVector& wT);

// Running max of ||w_t||_inf (including t = 0) evaluated at each checkpoint;
// checkpoints must be positive and strictly increasing.
std::vector<double> max_abs_weight_through(const ProbVector& p, const WeightVector& w0,
                                           const std::vector<std::int64_t>& checkpoints);

}  // namespace herd
