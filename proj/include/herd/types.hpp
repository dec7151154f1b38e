#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "herd/errors.hpp"

namespace herd {

// Tokens are plain category indices; one-hot form is materialized on demand
// only, since every inner product against a one-hot reduces to a lookup.
using Token = std::int32_t;
using TokenSequence = std::vector<Token>;
using WeightVector = std::vector<double>;

// Neumaier update: s + c carries the exact running sum of all added terms.
// Naive accumulation drifts past 1e-11 over 1e5 weight updates; this keeps
// round-trip identities inside a 1e-12 budget.
inline void compensated_add(double& s, double& c, double v) {
  const double t = s + v;
  if (std::fabs(s) >= std::fabs(v)) {
    c += (s - t) + v;
  } else {
    c += (v - t) + s;
  }
  s = t;
}

// Absolute tolerance on probability sums (per vector / per matrix column).
inline constexpr double kProbSumTol = 1e-9;

// Validated probability vector: entries finite and >= 0, sum within
// kProbSumTol of 1. Entries are never renormalized.
class ProbVector {
 public:
  explicit ProbVector(std::vector<double> values);

  int size() const { return static_cast<int>(values_.size()); }
  double operator[](int k) const { return values_[static_cast<size_t>(k)]; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;
};

ProbVector validate_prob_vector(std::vector<double> values);

std::vector<double> onehot(Token token, int vocab);

// Column-stochastic square matrix: at(i, j) = P(next = i | current = j).
// Every column is validated like a probability vector.
class TransitionMatrix {
 public:
  TransitionMatrix(int size, std::vector<double> row_major);

  int size() const { return size_; }
  double at(int i, int j) const {
    return entries_[static_cast<size_t>(i) * size_ + j];
  }
  const std::vector<double>& entries() const { return entries_; }

  // Matrix-vector product Q * dist (dist indexed by current state).
  std::vector<double> apply(const std::vector<double>& dist) const;
  // Matrix product this * other (composition of transitions).
  TransitionMatrix compose(const TransitionMatrix& other) const;

 private:
  int size_ = 0;
  std::vector<double> entries_;
};

// Per-step corruption rates beta_t in (0,1) with cumulative retention
// products. cumulative_alphas[t] = prod_{s<=t} (1 - beta_s), index 0 = 1.
struct NoiseSchedule {
  std::vector<double> betas;
  std::vector<double> cumulative_alphas;  // length steps+1
  std::vector<double> log_alphas;         // prefix sums of log1p(-beta)

  std::int64_t steps() const { return static_cast<std::int64_t>(betas.size()); }
  double beta(std::int64_t t) const {  // t in [1, steps]
    return betas[static_cast<size_t>(t - 1)];
  }
  // Retention over (s, t]: prod_{tau = s+1 .. t} (1 - beta_tau).
  // Exact single factor when t == s + 1; log-space prefix difference
  // otherwise so long products near zero do not underflow step by step.
  double retention(std::int64_t s, std::int64_t t) const;
};

NoiseSchedule make_schedule(std::vector<double> betas);

// Linear retention: cumulative_alphas[t] targets 1 - t/steps, which gives
// beta_t = 1 / (steps - t + 1); betas are clipped to (1e-9, 1 - 1e-9).
NoiseSchedule linear_schedule(std::int64_t steps);

// Constant beta chosen so the final retention is final_retention.
NoiseSchedule geometric_schedule(std::int64_t steps, double final_retention = 1e-4);

}  // namespace herd
