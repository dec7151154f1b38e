#include "herd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "herd/errors.hpp"
#include "herd/herding.hpp"
#include "herd/parallel.hpp"
#include "herd/rng.hpp"

namespace herd {
namespace {

constexpr std::uint64_t kCurveHerdingSalt = 0x6375727665686472ULL;
constexpr std::uint64_t kCurveGumbelSalt = 0x6375727665676d62ULL;

std::int64_t checked_power(int vocab, int length, std::int64_t cap) {
  if (vocab < 1 || length < 1) throw EmptyVector("need vocab >= 1 and length >= 1");
  std::int64_t m = 1;
  for (int l = 0; l < length; ++l) {
    if (m > cap / vocab) {
      throw EnumerationCapExceeded("joint state space exceeds cap " + std::to_string(cap));
    }
    m *= vocab;
  }
  if (m > cap) {
    throw EnumerationCapExceeded("joint state space exceeds cap " + std::to_string(cap));
  }
  return m;
}

TokenSequence decode_joint(std::int64_t index, int vocab, int length) {
  TokenSequence seq(static_cast<size_t>(length));
  for (int l = length - 1; l >= 0; --l) {
    seq[static_cast<size_t>(l)] = static_cast<Token>(index % vocab);
    index /= vocab;
  }
  return seq;
}

// Regularized lower incomplete gamma by power series; valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 10000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma by Lentz continued fraction; x >= a + 1.
double gamma_q_fraction(double a, double x) {
  constexpr double kTiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) {
    throw DimensionMismatch("total variation needs equal supports, got " +
                            std::to_string(p.size()) + " and " + std::to_string(q.size()));
  }
  double sum = 0.0;
  for (size_t k = 0; k < p.size(); ++k) sum += std::fabs(p[k] - q[k]);
  return 0.5 * sum;
}

ProbVector empirical_distribution(const std::vector<Token>& samples, int vocab) {
  if (samples.empty()) throw EmptySampleSet("no samples to tabulate");
  std::vector<std::int64_t> counts(static_cast<size_t>(vocab), 0);
  for (Token tok : samples) {
    if (tok < 0 || tok >= vocab) throw DimensionMismatch("token outside vocabulary");
    ++counts[static_cast<size_t>(tok)];
  }
  const double n = static_cast<double>(samples.size());
  std::vector<double> freq(static_cast<size_t>(vocab));
  for (int k = 0; k < vocab; ++k) freq[static_cast<size_t>(k)] = counts[static_cast<size_t>(k)] / n;
  return ProbVector(std::move(freq));
}

double token_entropy(const std::vector<TokenSequence>& samples, int vocab) {
  if (samples.empty()) throw EmptySampleSet("no samples to pool");
  std::vector<std::int64_t> counts(static_cast<size_t>(vocab), 0);
  std::int64_t total = 0;
  for (const TokenSequence& seq : samples) {
    for (Token tok : seq) {
      if (tok < 0 || tok >= vocab) throw DimensionMismatch("token outside vocabulary");
      ++counts[static_cast<size_t>(tok)];
      ++total;
    }
  }
  if (total == 0) throw EmptySampleSet("samples contain no tokens");
  double entropy = 0.0;
  for (std::int64_t c : counts) {
    if (c == 0) continue;
    const double f = static_cast<double>(c) / static_cast<double>(total);
    entropy -= f * std::log(f);
  }
  return entropy;
}

std::int64_t joint_index(const TokenSequence& sequence, int vocab) {
  if (sequence.empty()) throw EmptyVector("cannot index an empty sequence");
  std::int64_t index = 0;
  for (Token tok : sequence) {
    if (tok < 0 || tok >= vocab) throw DimensionMismatch("token outside vocabulary");
    index = index * vocab + tok;
  }
  return index;
}

std::vector<double> empirical_joint(const std::vector<TokenSequence>& samples, int vocab,
                                    int length, std::int64_t cap) {
  const std::int64_t m = checked_power(vocab, length, cap);
  if (samples.empty()) throw EmptySampleSet("no samples to tabulate");
  std::vector<std::int64_t> counts(static_cast<size_t>(m), 0);
  for (const TokenSequence& seq : samples) {
    if (static_cast<int>(seq.size()) != length) {
      throw DimensionMismatch("sample length does not match the declared length");
    }
    ++counts[static_cast<size_t>(joint_index(seq, vocab))];
  }
  const double n = static_cast<double>(samples.size());
  std::vector<double> freq(static_cast<size_t>(m));
  for (std::int64_t j = 0; j < m; ++j) {
    freq[static_cast<size_t>(j)] = counts[static_cast<size_t>(j)] / n;
  }
  return freq;
}

double sequence_tv_to_data(const std::vector<TokenSequence>& samples,
                           const DataDistribution& data) {
  if (samples.empty()) throw EmptySampleSet("no samples to compare");
  std::map<TokenSequence, double> empirical;
  const double unit = 1.0 / static_cast<double>(samples.size());
  for (const TokenSequence& seq : samples) {
    if (static_cast<int>(seq.size()) != data.length) {
      throw DimensionMismatch("sample length does not match the data distribution");
    }
    empirical[seq] += unit;
  }
  std::map<TokenSequence, double> target;
  for (size_t i = 0; i < data.support.size(); ++i) {
    target[data.support[i]] = data.probs[i];
  }
  double sum = 0.0;
  for (const auto& [seq, freq] : empirical) {
    const auto it = target.find(seq);
    sum += std::fabs(freq - (it == target.end() ? 0.0 : it->second));
  }
  for (const auto& [seq, prob] : target) {
    if (empirical.find(seq) == empirical.end()) sum += prob;
  }
  return 0.5 * sum;
}

std::vector<double> exact_chain_marginals(const ReverseModel& model, std::int64_t steps,
                                          std::int64_t cap) {
  const int vocab = model.vocab_size();
  const int length = model.seq_len();
  const std::int64_t m = checked_power(vocab, length, cap);
  if (steps < 1 || steps > model.steps()) {
    throw BadTimeRange("DP wants " + std::to_string(steps) + " steps, model supports " +
                       std::to_string(model.steps()));
  }

  const ProbVector& init = model.init_distribution();
  std::vector<double> dist(static_cast<size_t>(m));
  for (std::int64_t j = 0; j < m; ++j) {
    const TokenSequence seq = decode_joint(j, vocab, length);
    double p = 1.0;
    for (Token tok : seq) p *= init[tok];
    dist[static_cast<size_t>(j)] = p;
  }

  const auto check_mass = [m](const std::vector<double>& d, std::int64_t t) {
    double mass = 0.0;
    for (std::int64_t j = 0; j < m; ++j) mass += d[static_cast<size_t>(j)];
    if (std::fabs(mass - 1.0) > 1e-10) {
      throw Error("DP mass " + std::to_string(mass) + " at t=" + std::to_string(t) +
                  " is outside 1e-10 of 1");
    }
  };
  check_mass(dist, steps);

  std::vector<double> rows;
  std::vector<double> next(static_cast<size_t>(m));
  for (std::int64_t t = steps; t >= 1; --t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::int64_t j = 0; j < m; ++j) {
      const double mass = dist[static_cast<size_t>(j)];
      if (mass == 0.0) continue;
      const TokenSequence seq = decode_joint(j, vocab, length);
      try {
        model.predict(seq, t, rows);
      } catch (const Error&) {
        throw;
      } catch (const std::exception& e) {
        throw ModelFailure(std::string("model predict failed: ") + e.what());
      }
      for (double v : rows) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
          throw ModelFailure("model row has a negative or non-finite entry");
        }
      }
      // Positions move independently, so successor mass factorizes per digit.
      for (std::int64_t y = 0; y < m; ++y) {
        double p = mass;
        std::int64_t rem = y;
        for (int l = length - 1; l >= 0 && p > 0.0; --l) {
          const std::int64_t tok = rem % vocab;
          rem /= vocab;
          p *= rows[static_cast<size_t>(l) * vocab + static_cast<size_t>(tok)];
        }
        next[static_cast<size_t>(y)] += p;
      }
    }
    dist.swap(next);
    check_mass(dist, t - 1);
  }
  return dist;
}

ConvergenceCurve convergence_curve(const ProbVector& p, SamplerKind sampler,
                                   const std::vector<std::int64_t>& t_grid,
                                   int seed_count, std::uint64_t root_seed, int threads) {
  if (t_grid.empty()) throw BadTimeRange("empty step grid");
  for (size_t g = 0; g < t_grid.size(); ++g) {
    if (t_grid[g] < 1 || (g > 0 && t_grid[g] <= t_grid[g - 1])) {
      throw BadTimeRange("step grid must be positive and strictly increasing");
    }
  }
  if (seed_count < 1) throw EmptySampleSet("need at least one seed");

  const int vocab = p.size();
  const std::int64_t max_steps = t_grid.back();
  ConvergenceCurve curve;
  curve.per_seed_errors.assign(static_cast<size_t>(seed_count),
                               std::vector<double>(t_grid.size(), 0.0));

  parallel_for(seed_count, threads, [&](std::int64_t s) {
    std::vector<std::int64_t> counts(static_cast<size_t>(vocab), 0);
    size_t next_grid = 0;
    auto& errors = curve.per_seed_errors[static_cast<size_t>(s)];

    if (sampler == SamplerKind::herding) {
      CounterRng rng(derive_key(root_seed, static_cast<std::uint64_t>(s), kCurveHerdingSalt));
      std::vector<double> sum(static_cast<size_t>(vocab));
      std::vector<double> comp(static_cast<size_t>(vocab), 0.0);
      std::vector<double> value(static_cast<size_t>(vocab));
      for (int k = 0; k < vocab; ++k) {
        sum[static_cast<size_t>(k)] = rng.next_unit();
        value[static_cast<size_t>(k)] = sum[static_cast<size_t>(k)];
      }
      for (std::int64_t t = 1; t <= max_steps; ++t) {
        const int pick = argmax_lowest(value.data(), vocab);
        ++counts[static_cast<size_t>(pick)];
        for (int k = 0; k < vocab; ++k) {
          double delta = p[k];
          if (k == pick) delta -= 1.0;
          compensated_add(sum[static_cast<size_t>(k)], comp[static_cast<size_t>(k)], delta);
          value[static_cast<size_t>(k)] =
              sum[static_cast<size_t>(k)] + comp[static_cast<size_t>(k)];
        }
        if (next_grid < t_grid.size() && t == t_grid[next_grid]) {
          double err = 0.0;
          for (int k = 0; k < vocab; ++k) {
            const double f = static_cast<double>(counts[static_cast<size_t>(k)]) /
                             static_cast<double>(t);
            err = std::max(err, std::fabs(p[k] - f));
          }
          errors[next_grid++] = err;
        }
      }
    } else {
      CounterRng rng(derive_key(root_seed, static_cast<std::uint64_t>(s), kCurveGumbelSalt));
      for (std::int64_t t = 1; t <= max_steps; ++t) {
        const Token pick = gumbel_max_step_raw(p.values().data(), vocab, rng);
        ++counts[static_cast<size_t>(pick)];
        if (next_grid < t_grid.size() && t == t_grid[next_grid]) {
          double err = 0.0;
          for (int k = 0; k < vocab; ++k) {
            const double f = static_cast<double>(counts[static_cast<size_t>(k)]) /
                             static_cast<double>(t);
            err = std::max(err, std::fabs(p[k] - f));
          }
          errors[next_grid++] = err;
        }
      }
    }
  });

  curve.points.resize(t_grid.size());
  for (size_t g = 0; g < t_grid.size(); ++g) {
    double mean = 0.0;
    for (int s = 0; s < seed_count; ++s) {
      mean += curve.per_seed_errors[static_cast<size_t>(s)][g];
    }
    curve.points[g].steps = t_grid[g];
    curve.points[g].mean_error = mean / static_cast<double>(seed_count);
  }
  curve.slope = fit_loglog_slope(curve.points);
  return curve;
}

double fit_loglog_slope(const std::vector<ConvergencePoint>& points) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const ConvergencePoint& pt : points) {
    if (pt.steps >= 1 && pt.mean_error > 0.0) {
      xs.push_back(std::log(static_cast<double>(pt.steps)));
      ys.push_back(std::log(pt.mean_error));
    }
  }
  if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0;
  double my = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double sxx = 0.0;
  double sxy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  return sxy / sxx;
}

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) {
    throw Error("regularized_gamma_q requires a > 0 and x >= 0");
  }
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_fraction(a, x);
}

double chi_square_pvalue(const std::vector<std::int64_t>& counts,
                         const std::vector<double>& expected) {
  if (counts.size() != expected.size()) {
    throw DimensionMismatch("counts and expected proportions differ in length");
  }
  if (counts.empty()) throw EmptyVector("no bins");
  std::int64_t total = 0;
  for (std::int64_t c : counts) {
    if (c < 0) throw NegativeEntry("negative count");
    total += c;
  }
  if (total == 0) throw EmptySampleSet("no observations");

  int df = -1;
  double stat = 0.0;
  for (size_t k = 0; k < counts.size(); ++k) {
    if (!(expected[k] >= 0.0) || !std::isfinite(expected[k])) {
      throw NegativeEntry("expected proportion is negative or non-finite");
    }
    if (expected[k] == 0.0) {
      if (counts[k] > 0) return 0.0;  // impossible bin observed
      continue;
    }
    const double e = expected[k] * static_cast<double>(total);
    const double d = static_cast<double>(counts[k]) - e;
    stat += d * d / e;
    ++df;
  }
  if (df < 1) return 1.0;  // a single admissible bin fits trivially
  return regularized_gamma_q(0.5 * static_cast<double>(df), 0.5 * stat);
}

TransitionMatrix transition_product_oracle(const ForwardProcess& process, std::int64_t s,
                                           std::int64_t t) {
  if (s < 0 || s >= t || t > process.schedule.steps()) {
    throw BadTimeRange("product oracle needs 0 <= s < t <= steps");
  }
  TransitionMatrix result = single_step_transition(process, s + 1);
  for (std::int64_t tau = s + 2; tau <= t; ++tau) {
    result = single_step_transition(process, tau).compose(result);
  }
  return result;
}

std::vector<double> posterior_enumeration_oracle(Token x_t, Token x0,
                                                 const ForwardProcess& process,
                                                 std::int64_t t) {
  const int vocab = process.vocab;
  if (x_t < 0 || x_t >= vocab || x0 < 0 || x0 >= vocab) {
    throw DimensionMismatch("token outside vocabulary");
  }
  if (t < 1 || t > process.schedule.steps()) {
    throw BadTimeRange("posterior oracle needs t in [1, steps]");
  }
  std::vector<double> prior = onehot(x0, vocab);
  for (std::int64_t tau = 1; tau < t; ++tau) {
    prior = single_step_transition(process, tau).apply(prior);
  }
  const TransitionMatrix step = single_step_transition(process, t);
  std::vector<double> unnormalized(static_cast<size_t>(vocab));
  double mass = 0.0;
  for (int y = 0; y < vocab; ++y) {
    unnormalized[static_cast<size_t>(y)] = step.at(x_t, y) * prior[static_cast<size_t>(y)];
    mass += unnormalized[static_cast<size_t>(y)];
  }
  if (mass == 0.0) {
    throw ZeroMassPosterior("noisy state is unreachable from the clean state");
  }
  for (double& v : unnormalized) v /= mass;
  return unnormalized;
}

std::vector<double> model_enumeration_oracle(const ExactBayesModel& model,
                                             const TokenSequence& x_t, std::int64_t t) {
  const ForwardProcess& process = model.process();
  const DataDistribution& data = model.data();
  const int vocab = process.vocab;
  const int length = data.length;
  if (static_cast<int>(x_t.size()) != length) {
    throw DimensionMismatch("sequence length does not match the model");
  }
  if (t < 1 || t > model.steps()) {
    throw BadTimeRange("model oracle needs t in [1, steps]");
  }
  for (Token tok : x_t) {
    if (tok < 0 || tok >= vocab) throw DimensionMismatch("token outside vocabulary");
  }

  const TransitionMatrix step = single_step_transition(process, t);
  const TransitionMatrix cum_t = transition_product_oracle(process, 0, t);
  std::vector<double> identity(static_cast<size_t>(vocab) * vocab, 0.0);
  for (int i = 0; i < vocab; ++i) identity[static_cast<size_t>(i) * vocab + i] = 1.0;
  const TransitionMatrix cum_prev =
      t == 1 ? TransitionMatrix(vocab, identity) : transition_product_oracle(process, 0, t - 1);

  const size_t n = data.support.size();
  std::vector<double> posterior(n, 0.0);
  double mass = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double w = data.probs[i];
    for (int l = 0; l < length && w > 0.0; ++l) {
      w *= cum_t.at(x_t[static_cast<size_t>(l)], data.support[i][static_cast<size_t>(l)]);
    }
    posterior[i] = w;
    mass += w;
  }
  if (mass == 0.0) {
    throw ZeroMassPosterior("noisy sequence has zero likelihood under the data distribution");
  }

  std::vector<double> out(static_cast<size_t>(length) * vocab, 0.0);
  std::vector<double> row(static_cast<size_t>(vocab));
  for (int l = 0; l < length; ++l) {
    const int cur = x_t[static_cast<size_t>(l)];
    for (size_t i = 0; i < n; ++i) {
      if (posterior[i] == 0.0) continue;
      const int clean = data.support[i][static_cast<size_t>(l)];
      double z = 0.0;
      for (int y = 0; y < vocab; ++y) {
        const double v = step.at(cur, y) * cum_prev.at(y, clean);
        row[static_cast<size_t>(y)] = v;
        z += v;
      }
      if (z == 0.0) {
        throw ZeroMassPosterior("no reverse path to a supported clean token");
      }
      const double scale = posterior[i] / (mass * z);
      for (int y = 0; y < vocab; ++y) {
        out[static_cast<size_t>(l) * vocab + static_cast<size_t>(y)] +=
            scale * row[static_cast<size_t>(y)];
      }
    }
  }
  return out;
}

RunMetrics aggregate_run_metrics(const std::vector<ChainOutput>& outputs,
                                 const DataDistribution& data) {
  if (outputs.empty()) throw EmptySampleSet("no chains to aggregate");
  std::vector<TokenSequence> samples;
  samples.reserve(outputs.size());
  RunMetrics metrics;
  metrics.switch_counts.assign(outputs.front().switch_counts.size(), 0);
  for (const ChainOutput& out : outputs) {
    samples.push_back(out.sample);
    metrics.max_weight_norm = std::max(metrics.max_weight_norm, out.max_weight_norm);
    metrics.discrepancy_norm = std::max(metrics.discrepancy_norm, out.discrepancy_norm);
    if (out.switch_counts.size() != metrics.switch_counts.size()) {
      throw DimensionMismatch("chains disagree on step count");
    }
    for (size_t i = 0; i < out.switch_counts.size(); ++i) {
      metrics.switch_counts[i] += out.switch_counts[i];
    }
    metrics.switches_total += out.switches_total;
  }
  metrics.tv_to_target = sequence_tv_to_data(samples, data);
  metrics.token_entropy = token_entropy(samples, data.vocab);
  return metrics;
}

}  // namespace herd
