#include "herd/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace herd {
namespace {

void check_probability_entries(const std::vector<double>& values) {
  for (size_t k = 0; k < values.size(); ++k) {
    const double v = values[k];
    if (!(v >= 0.0)) {
      throw NegativeEntry("entry " + std::to_string(k) + " = " +
                          std::to_string(v) + " is not a nonnegative value");
    }
  }
}

void check_probability_sum(const std::vector<double>& values,
                           const std::string& what) {
  double sum = 0.0;
  for (double v : values) sum += v;
  if (!(std::fabs(sum - 1.0) <= kProbSumTol)) {
    throw SumOutOfTolerance(what + " sums to " + std::to_string(sum) +
                            ", outside 1 +/- 1e-9");
  }
}

}  // namespace

ProbVector::ProbVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw EmptyVector("probability vector is empty");
  check_probability_entries(values_);
  check_probability_sum(values_, "probability vector");
}

ProbVector validate_prob_vector(std::vector<double> values) {
  return ProbVector(std::move(values));
}

std::vector<double> onehot(Token token, int vocab) {
  if (vocab < 1 || token < 0 || token >= vocab) {
    throw DimensionMismatch("token " + std::to_string(token) +
                            " outside vocabulary of size " + std::to_string(vocab));
  }
  std::vector<double> v(static_cast<size_t>(vocab), 0.0);
  v[static_cast<size_t>(token)] = 1.0;
  return v;
}

TransitionMatrix::TransitionMatrix(int size, std::vector<double> row_major)
    : size_(size), entries_(std::move(row_major)) {
  if (size_ < 1) throw EmptyVector("transition matrix has no states");
  if (entries_.size() != static_cast<size_t>(size_) * size_) {
    throw DimensionMismatch("transition matrix entry count " +
                            std::to_string(entries_.size()) + " != " +
                            std::to_string(size_) + "^2");
  }
  check_probability_entries(entries_);
  for (int j = 0; j < size_; ++j) {
    std::vector<double> column(static_cast<size_t>(size_));
    for (int i = 0; i < size_; ++i) column[static_cast<size_t>(i)] = at(i, j);
    check_probability_sum(column, "transition matrix column " + std::to_string(j));
  }
}

std::vector<double> TransitionMatrix::apply(const std::vector<double>& dist) const {
  if (dist.size() != static_cast<size_t>(size_)) {
    throw DimensionMismatch("distribution length " + std::to_string(dist.size()) +
                            " != matrix size " + std::to_string(size_));
  }
  std::vector<double> out(static_cast<size_t>(size_), 0.0);
  for (int i = 0; i < size_; ++i) {
    double acc = 0.0;
    for (int j = 0; j < size_; ++j) acc += at(i, j) * dist[static_cast<size_t>(j)];
    out[static_cast<size_t>(i)] = acc;
  }
  return out;
}

TransitionMatrix TransitionMatrix::compose(const TransitionMatrix& other) const {
  if (other.size_ != size_) {
    throw DimensionMismatch("cannot compose transition matrices of sizes " +
                            std::to_string(size_) + " and " +
                            std::to_string(other.size_));
  }
  std::vector<double> out(static_cast<size_t>(size_) * size_, 0.0);
  for (int i = 0; i < size_; ++i) {
    for (int k = 0; k < size_; ++k) {
      const double a = at(i, k);
      if (a == 0.0) continue;
      for (int j = 0; j < size_; ++j) {
        out[static_cast<size_t>(i) * size_ + j] += a * other.at(k, j);
      }
    }
  }
  return TransitionMatrix(size_, std::move(out));
}

double NoiseSchedule::retention(std::int64_t s, std::int64_t t) const {
  if (s < 0 || t < s || t > steps()) {
    throw BadTimeRange("retention requires 0 <= s <= t <= " +
                       std::to_string(steps()) + ", got s=" + std::to_string(s) +
                       " t=" + std::to_string(t));
  }
  if (t == s) return 1.0;
  if (t == s + 1) return 1.0 - beta(t);
  return std::exp(log_alphas[static_cast<size_t>(t)] -
                  log_alphas[static_cast<size_t>(s)]);
}

NoiseSchedule make_schedule(std::vector<double> betas) {
  if (betas.empty()) throw EmptyVector("noise schedule has no steps");
  for (size_t i = 0; i < betas.size(); ++i) {
    const double b = betas[i];
    if (!(b > 0.0) || !(b < 1.0) || !std::isfinite(b)) {
      throw BetaOutOfRange("beta_" + std::to_string(i + 1) + " = " +
                           std::to_string(b) + " is outside (0, 1)");
    }
  }
  NoiseSchedule sched;
  sched.betas = std::move(betas);
  sched.cumulative_alphas.resize(sched.betas.size() + 1);
  sched.log_alphas.resize(sched.betas.size() + 1);
  sched.cumulative_alphas[0] = 1.0;
  sched.log_alphas[0] = 0.0;
  for (size_t t = 1; t <= sched.betas.size(); ++t) {
    sched.cumulative_alphas[t] =
        sched.cumulative_alphas[t - 1] * (1.0 - sched.betas[t - 1]);
    sched.log_alphas[t] = sched.log_alphas[t - 1] + std::log1p(-sched.betas[t - 1]);
    if (!(sched.cumulative_alphas[t] > 0.0) ||
        !(sched.cumulative_alphas[t] < sched.cumulative_alphas[t - 1])) {
      throw BetaOutOfRange("cumulative retention is not strictly decreasing in (0, 1]");
    }
  }
  return sched;
}

namespace {
double clip_beta(double b) {
  return std::min(std::max(b, 1e-9), 1.0 - 1e-9);
}
}  // namespace

NoiseSchedule linear_schedule(std::int64_t steps) {
  if (steps < 1) throw BadTimeRange("schedule needs at least one step");
  std::vector<double> betas(static_cast<size_t>(steps));
  for (std::int64_t t = 1; t <= steps; ++t) {
    betas[static_cast<size_t>(t - 1)] =
        clip_beta(1.0 / static_cast<double>(steps - t + 1));
  }
  return make_schedule(std::move(betas));
}

NoiseSchedule geometric_schedule(std::int64_t steps, double final_retention) {
  if (steps < 1) throw BadTimeRange("schedule needs at least one step");
  if (!(final_retention > 0.0) || !(final_retention < 1.0)) {
    throw BetaOutOfRange("final retention must lie in (0, 1)");
  }
  const double beta =
      clip_beta(1.0 - std::exp(std::log(final_retention) / static_cast<double>(steps)));
  return make_schedule(std::vector<double>(static_cast<size_t>(steps), beta));
}

}  // namespace herd
