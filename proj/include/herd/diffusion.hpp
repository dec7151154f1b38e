#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "herd/rng.hpp"
#include "herd/types.hpp"

namespace herd {

// Joint state spaces larger than this are never enumerated by the exact
// oracles; callers get EnumerationCapExceeded instead of a stalled process.
inline constexpr std::int64_t kEnumerationCap = 4096;

enum class ProcessKind { uniform, absorbing };

std::string to_string(ProcessKind kind);

// Forward corruption chain: per-step kernels mix toward the uniform
// distribution or absorb into a dedicated mask category.
struct ForwardProcess {
  ProcessKind kind = ProcessKind::uniform;
  int vocab = 0;
  int mask_index = -1;  // meaningful for absorbing only
  NoiseSchedule schedule;
};

ForwardProcess make_forward_process(ProcessKind kind, int vocab,
                                    NoiseSchedule schedule, int mask_index = -1);

// Single-step kernels, column-stochastic (at(i, j) = P(next = i | cur = j)).
TransitionMatrix uniform_transition(double beta, int vocab);
TransitionMatrix absorbing_transition(double beta, int vocab, int mask_index);

// Q_t of the process, t in [1, T].
TransitionMatrix single_step_transition(const ForwardProcess& process, std::int64_t t);

// Product Q_t ... Q_{s+1} in closed form, 0 <= s < t <= T. Returns the
// single-step matrix bit-identically when t == s + 1.
TransitionMatrix cumulative_transition(const ForwardProcess& process, std::int64_t s,
                                       std::int64_t t);

ProbVector stationary_distribution(const ForwardProcess& process);

// Corrupts x0 to time t: per position, one categorical draw from the
// cumulative kernel column of that position's clean token.
TokenSequence forward_sample(const TokenSequence& x0, const ForwardProcess& process,
                             std::int64_t t, CounterRng& rng);

// Exact single-position reverse posterior q(x_{t-1} | x_t, x_0),
// proportional to P(x_t | x_{t-1}) * P(x_{t-1} | x_0). Impossible
// (x_t, x_0, t) combinations raise ZeroMassPosterior instead of being
// silently renormalized.
ProbVector reverse_posterior(Token x_t, Token x0, const ForwardProcess& process,
                             std::int64_t t);

// Finite ground-truth distribution over sequences; the stand-in for data.
struct DataDistribution {
  int vocab = 0;
  int length = 0;
  std::vector<TokenSequence> support;
  std::vector<double> probs;
};

DataDistribution make_data_distribution(int vocab, int length,
                                        std::vector<TokenSequence> support,
                                        std::vector<double> probs);

// JSON document {"K": int, "L": int, "support": [[int,...],...],
// "probs": [float,...]}.
DataDistribution load_data_distribution(const std::string& path);
std::string data_distribution_json(const DataDistribution& data);

// Reverse-transition source: given the full current sequence and the time,
// yields one probability row per position for the previous time step.
class ReverseModel {
 public:
  virtual ~ReverseModel() = default;

  virtual int vocab_size() const = 0;
  virtual int seq_len() const = 0;
  virtual std::int64_t steps() const = 0;

  // Distribution of x_T; reverse chains start here.
  virtual const ProbVector& init_distribution() const = 0;

  // Writes seq_len() * vocab_size() entries, row l = p(x_{t-1}^l | x_t, t).
  // Every row must be a valid probability row. t in [1, steps()].
  virtual void predict(const TokenSequence& x_t, std::int64_t t,
                       std::vector<double>& out) const = 0;

  virtual std::string process_name() const { return "custom"; }
};

// Exact Bayesian inversion of the forward process over an enumerable data
// distribution: the posterior over clean sequences given x_t is computed in
// closed form and mixed through the single-position reverse posteriors.
// Replaces a trained network at desk scale. Immutable after construction and
// safe for concurrent queries.
class ExactBayesModel final : public ReverseModel {
 public:
  ExactBayesModel(DataDistribution data, ForwardProcess process);

  int vocab_size() const override { return process_.vocab; }
  int seq_len() const override { return data_.length; }
  std::int64_t steps() const override { return process_.schedule.steps(); }
  const ProbVector& init_distribution() const override { return stationary_; }
  void predict(const TokenSequence& x_t, std::int64_t t,
               std::vector<double>& out) const override;
  std::string process_name() const override { return to_string(process_.kind); }

  const DataDistribution& data() const { return data_; }
  const ForwardProcess& process() const { return process_; }

 private:
  DataDistribution data_;
  ForwardProcess process_;
  ProbVector stationary_;
  // cached_single_[t-1] = Q_t; cached_cumulative_[t] = cumulative kernel
  // from 0 to t (identity at t = 0). Row-major vocab x vocab.
  std::vector<std::vector<double>> cached_single_;
  std::vector<std::vector<double>> cached_cumulative_;
};

}  // namespace herd
