#include "herd/denoise.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "herd/errors.hpp"
#include "herd/herding.hpp"

namespace herd {
namespace {

constexpr std::uint64_t kPositionSalt = 0x706f736974696f6eULL;  // "position"

void check_model_row(const double* row, std::int64_t n) {
  double sum = 0.0;
  for (std::int64_t k = 0; k < n; ++k) {
    if (!std::isfinite(row[k]) || row[k] < 0.0) {
      throw ModelFailure("model row has a negative or non-finite entry");
    }
    sum += row[k];
  }
  if (std::abs(sum - 1.0) > kProbSumTol) {
    throw ModelFailure("model row sums to " + std::to_string(sum) +
                       ", outside 1e-9 of 1");
  }
}

}  // namespace

std::string to_string(SamplerKind kind) {
  return kind == SamplerKind::herding ? "herding" : "gumbel";
}

void validate_denoise_config(const DenoiseConfig& config) {
  if (!(config.delta >= 0.0) || !std::isfinite(config.delta)) {
    throw ConfigError("delta", "must be a finite value >= 0");
  }
  if (!(config.weight_scale > 0.0) || !std::isfinite(config.weight_scale)) {
    throw ConfigError("weight_scale", "must be a finite value > 0");
  }
  if (config.steps < 1) {
    throw ConfigError("steps", "must be >= 1");
  }
}

PositionState init_position_state(int vocab, CounterRng& rng, double weight_scale) {
  if (vocab < 1) throw DimensionMismatch("vocab must be >= 1");
  if (!(weight_scale > 0.0) || !std::isfinite(weight_scale)) {
    throw ConfigError("weight_scale", "must be a finite value > 0");
  }
  PositionState state;
  state.token = static_cast<Token>(rng.next_below(static_cast<std::uint64_t>(vocab)));
  state.weight.resize(static_cast<std::size_t>(vocab));
  for (int k = 0; k < vocab; ++k) {
    state.weight[static_cast<std::size_t>(k)] = weight_scale * rng.next_unit();
  }
  return state;
}

PositionState derandomized_step(const PositionState& state, const ProbVector& p_next,
                                double delta) {
  const int vocab = p_next.size();
  if (static_cast<int>(state.weight.size()) != vocab) {
    throw DimensionMismatch("state weight has " + std::to_string(state.weight.size()) +
                            " components, model row has " + std::to_string(vocab));
  }
  if (state.token < 0 || state.token >= vocab) {
    throw DimensionMismatch("state token out of vocabulary range");
  }
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw ConfigError("delta", "must be a finite value >= 0");
  }

  std::vector<double> scores(static_cast<std::size_t>(vocab));
  for (int k = 0; k < vocab; ++k) {
    scores[static_cast<std::size_t>(k)] =
        state.weight[static_cast<std::size_t>(k)] + p_next[k];
  }
  const Token candidate =
      static_cast<Token>(argmax_lowest(scores.data(), vocab));

  Token chosen = candidate;
  if (candidate != state.token &&
      scores[static_cast<std::size_t>(candidate)] -
              scores[static_cast<std::size_t>(state.token)] <
          delta) {
    chosen = state.token;
  }

  PositionState next;
  next.token = chosen;
  next.weight.resize(static_cast<std::size_t>(vocab));
  for (int k = 0; k < vocab; ++k) {
    double w = state.weight[static_cast<std::size_t>(k)] + p_next[k];
    if (k == chosen) w -= 1.0;
    if (!std::isfinite(w)) {
      throw NonFiniteWeight("weight diverged at component " + std::to_string(k));
    }
    next.weight[static_cast<std::size_t>(k)] = w;
  }
  return next;
}

Token gumbel_max_step_raw(const double* p_next, std::int64_t n, CounterRng& rng) {
  if (n < 1) throw EmptyVector("probability row is empty");
  bool any_positive = false;
  for (std::int64_t k = 0; k < n; ++k) {
    if (p_next[k] > 0.0) {
      any_positive = true;
      break;
    }
  }
  if (!any_positive) {
    throw AllZeroProbability("gumbel step received an all-zero row");
  }

  double best = -std::numeric_limits<double>::infinity();
  std::int64_t best_index = 0;
  for (std::int64_t k = 0; k < n; ++k) {
    const double u = rng.next_open_unit();  // consumed even when p_k = 0
    if (p_next[k] <= 0.0) continue;
    const double score = std::log(p_next[k]) - std::log(-std::log(u));
    if (score > best) {
      best = score;
      best_index = k;
    }
  }
  return static_cast<Token>(best_index);
}

Token gumbel_max_step(const ProbVector& p_next, CounterRng& rng) {
  return gumbel_max_step_raw(p_next.values().data(), p_next.size(), rng);
}

ChainOutput run_reverse_chain(const ReverseModel& model, const DenoiseConfig& config,
                              std::uint64_t seed, bool record_trajectory) {
  validate_denoise_config(config);
  const int vocab = model.vocab_size();
  const int length = model.seq_len();
  const std::int64_t steps = config.steps;
  if (steps > model.steps()) {
    throw BadTimeRange("chain wants " + std::to_string(steps) +
                       " steps, model supports " + std::to_string(model.steps()));
  }
  const bool herding = config.sampler == SamplerKind::herding;
  const std::size_t cells = static_cast<std::size_t>(length) * static_cast<std::size_t>(vocab);

  ChainOutput out;
  out.switch_counts.assign(static_cast<std::size_t>(steps), 0);
  out.draws_per_position.assign(static_cast<std::size_t>(length), 0);

  // Per-position streams: reordering positions cannot change any draw.
  std::vector<CounterRng> streams;
  streams.reserve(static_cast<std::size_t>(length));
  for (int l = 0; l < length; ++l) {
    streams.emplace_back(derive_key(seed, static_cast<std::uint64_t>(l), kPositionSalt));
  }

  TokenSequence tokens(static_cast<std::size_t>(length), 0);
  std::vector<double> weight_sum;   // compensated weight accumulators
  std::vector<double> weight_comp;
  std::vector<double> weights;      // materialized w values, refreshed per step
  if (herding) {
    weight_sum.assign(cells, 0.0);
    weight_comp.assign(cells, 0.0);
    weights.assign(cells, 0.0);
  }

  // Initial state at t = T.
  ProbVector init = model.init_distribution();
  if (init.size() != vocab) {
    throw ModelFailure("model init distribution has wrong size");
  }
  for (int l = 0; l < length; ++l) {
    auto& rng = streams[static_cast<std::size_t>(l)];
    if (herding) {
      PositionState st = init_position_state(vocab, rng, config.weight_scale);
      tokens[static_cast<std::size_t>(l)] = st.token;
      for (int k = 0; k < vocab; ++k) {
        const std::size_t c = static_cast<std::size_t>(l) * static_cast<std::size_t>(vocab) +
                              static_cast<std::size_t>(k);
        weight_sum[c] = st.weight[static_cast<std::size_t>(k)];
        weights[c] = st.weight[static_cast<std::size_t>(k)];
      }
    } else {
      tokens[static_cast<std::size_t>(l)] =
          static_cast<Token>(inverse_cdf_index(init.values().data(), vocab, rng));
    }
    out.draws_per_position[static_cast<std::size_t>(l)] = rng.draw_count();
  }

  double max_weight_norm = 0.0;
  if (herding) {
    for (std::size_t c = 0; c < cells; ++c) {
      max_weight_norm = std::max(max_weight_norm, std::abs(weights[c]));
    }
  }

  // Online residual accumulators for sum_tau (p_tau - onehot(x_tau)).
  std::vector<double> resid_sum(cells, 0.0);
  std::vector<double> resid_comp(cells, 0.0);

  if (record_trajectory) {
    out.trajectory.vocab = vocab;
    out.trajectory.length = length;
    out.trajectory.seed = seed;
    out.trajectory.delta = config.delta;
    out.trajectory.weight_scale = config.weight_scale;
    out.trajectory.sampler = config.sampler;
    out.trajectory.process = model.process_name();
    out.trajectory.steps.reserve(static_cast<std::size_t>(steps) + 1);
    StepRecord rec;
    rec.t = steps;
    rec.tokens = tokens;
    if (herding) rec.weights = weights;
    out.trajectory.steps.push_back(std::move(rec));
  }

  std::vector<double> rows(cells);
  for (std::int64_t t = steps; t >= 1; --t) {
    try {
      model.predict(tokens, t, rows);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw ModelFailure(std::string("model predict failed: ") + e.what());
    }
    for (int l = 0; l < length; ++l) {
      check_model_row(rows.data() + static_cast<std::size_t>(l) * static_cast<std::size_t>(vocab),
                      vocab);
    }

    std::int32_t switched = 0;
    for (int l = 0; l < length; ++l) {
      const std::size_t base =
          static_cast<std::size_t>(l) * static_cast<std::size_t>(vocab);
      const double* row = rows.data() + base;
      const Token prev = tokens[static_cast<std::size_t>(l)];
      Token chosen;

      if (herding) {
        // Score with materialized weights, then update the accumulators.
        double best = -std::numeric_limits<double>::infinity();
        int best_k = 0;
        for (int k = 0; k < vocab; ++k) {
          const double s = weights[base + static_cast<std::size_t>(k)] + row[k];
          if (s > best) {
            best = s;
            best_k = k;
          }
        }
        chosen = static_cast<Token>(best_k);
        if (chosen != prev &&
            best - (weights[base + static_cast<std::size_t>(prev)] + row[prev]) <
                config.delta) {
          chosen = prev;
        }
        for (int k = 0; k < vocab; ++k) {
          const std::size_t c = base + static_cast<std::size_t>(k);
          double delta_w = row[k];
          if (k == chosen) delta_w -= 1.0;
          compensated_add(weight_sum[c], weight_comp[c], delta_w);
          const double w = weight_sum[c] + weight_comp[c];
          if (!std::isfinite(w)) {
            throw NonFiniteWeight("weight diverged at position " + std::to_string(l) +
                                  " component " + std::to_string(k));
          }
          weights[c] = w;
          max_weight_norm = std::max(max_weight_norm, std::abs(w));
        }
      } else {
        auto& rng = streams[static_cast<std::size_t>(l)];
        chosen = gumbel_max_step_raw(row, vocab, rng);
        out.draws_per_position[static_cast<std::size_t>(l)] = rng.draw_count();
      }

      for (int k = 0; k < vocab; ++k) {
        const std::size_t c = base + static_cast<std::size_t>(k);
        double delta_r = row[k];
        if (k == chosen) delta_r -= 1.0;
        compensated_add(resid_sum[c], resid_comp[c], delta_r);
      }

      if (chosen != prev) ++switched;
      tokens[static_cast<std::size_t>(l)] = chosen;
    }
    out.switch_counts[static_cast<std::size_t>(steps - t)] = switched;
    out.switches_total += switched;

    if (record_trajectory) {
      StepRecord rec;
      rec.t = t - 1;
      rec.tokens = tokens;
      if (herding) rec.weights = weights;
      rec.probs = rows;
      out.trajectory.steps.push_back(std::move(rec));
    }
  }

  double max_resid = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    max_resid = std::max(max_resid, std::abs(resid_sum[c] + resid_comp[c]));
  }
  out.discrepancy_norm = max_resid / static_cast<double>(steps);
  out.max_weight_norm = herding ? max_weight_norm : 0.0;
  out.sample = tokens;
  return out;
}

double trajectory_max_step_residual(const ChainTrajectory& trajectory) {
  if (trajectory.sampler != SamplerKind::herding) {
    throw Error("step residuals are defined only for herding trajectories");
  }
  const std::size_t cells =
      static_cast<std::size_t>(trajectory.length) * static_cast<std::size_t>(trajectory.vocab);
  double worst = 0.0;
  for (std::size_t i = 1; i < trajectory.steps.size(); ++i) {
    const StepRecord& prev = trajectory.steps[i - 1];
    const StepRecord& cur = trajectory.steps[i];
    for (int l = 0; l < trajectory.length; ++l) {
      const std::size_t base =
          static_cast<std::size_t>(l) * static_cast<std::size_t>(trajectory.vocab);
      const Token chosen = cur.tokens[static_cast<std::size_t>(l)];
      for (int k = 0; k < trajectory.vocab; ++k) {
        const std::size_t c = base + static_cast<std::size_t>(k);
        double expected = prev.weights[c] + cur.probs[c];
        if (k == chosen) expected -= 1.0;
        worst = std::max(worst, std::abs(cur.weights[c] - expected));
      }
    }
  }
  (void)cells;
  return worst;
}

double trajectory_max_telescoping_residual(const ChainTrajectory& trajectory) {
  if (trajectory.sampler != SamplerKind::herding) {
    throw Error("telescoping residuals are defined only for herding trajectories");
  }
  const std::size_t cells =
      static_cast<std::size_t>(trajectory.length) * static_cast<std::size_t>(trajectory.vocab);
  if (trajectory.steps.empty()) return 0.0;
  const StepRecord& top = trajectory.steps.front();
  std::vector<double> acc_sum(cells, 0.0);
  std::vector<double> acc_comp(cells, 0.0);
  double worst = 0.0;
  for (std::size_t i = 1; i < trajectory.steps.size(); ++i) {
    const StepRecord& cur = trajectory.steps[i];
    for (int l = 0; l < trajectory.length; ++l) {
      const std::size_t base =
          static_cast<std::size_t>(l) * static_cast<std::size_t>(trajectory.vocab);
      const Token chosen = cur.tokens[static_cast<std::size_t>(l)];
      for (int k = 0; k < trajectory.vocab; ++k) {
        const std::size_t c = base + static_cast<std::size_t>(k);
        double delta_r = cur.probs[c];
        if (k == chosen) delta_r -= 1.0;
        compensated_add(acc_sum[c], acc_comp[c], delta_r);
        const double lhs = cur.weights[c] - top.weights[c];
        worst = std::max(worst, std::abs(lhs - (acc_sum[c] + acc_comp[c])));
      }
    }
  }
  return worst;
}

}  // namespace herd
