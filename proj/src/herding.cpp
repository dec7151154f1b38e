#include "herd/herding.hpp"

#include <cmath>
#include <string>

namespace herd {

int argmax_lowest(const double* values, std::int64_t n) {
  int best = 0;
  for (std::int64_t k = 1; k < n; ++k) {
    if (values[k] > values[best]) best = static_cast<int>(k);
  }
  return best;
}

FeatureTable make_feature_table(std::int64_t feature_count, std::int64_t item_count,
                                std::vector<double> features,
                                std::vector<double> targets) {
  if (feature_count < 1 || item_count < 1) {
    throw EmptyVector("feature table needs at least one feature and one item");
  }
  if (features.size() != static_cast<size_t>(feature_count) * item_count ||
      targets.size() != static_cast<size_t>(feature_count)) {
    throw DimensionMismatch("feature table shapes do not match declared sizes");
  }
  for (double v : features) {
    if (!std::isfinite(v)) throw NonFiniteWeight("feature entry is not finite");
  }
  for (double v : targets) {
    if (!std::isfinite(v)) throw NonFiniteWeight("target entry is not finite");
  }
  return FeatureTable{feature_count, item_count, std::move(features), std::move(targets)};
}

FeatureTable identity_feature_table(const ProbVector& p) {
  const std::int64_t k = p.size();
  std::vector<double> features(static_cast<size_t>(k) * k, 0.0);
  for (std::int64_t i = 0; i < k; ++i) features[static_cast<size_t>(i) * k + i] = 1.0;
  return make_feature_table(k, k, std::move(features), p.values());
}

HerdingState make_herding_state(WeightVector w0) {
  if (w0.empty()) throw EmptyVector("herding weight vector is empty");
  for (double v : w0) {
    if (!std::isfinite(v)) throw NonFiniteWeight("initial weight is not finite");
  }
  HerdingState state;
  state.initial_weight = w0;
  state.weight = std::move(w0);
  return state;
}

std::pair<std::int64_t, HerdingState> feature_herding_step(const HerdingState& state,
                                                           const FeatureTable& table) {
  const std::int64_t n = table.feature_count;
  const std::int64_t m = table.item_count;
  if (state.weight.size() != static_cast<size_t>(n)) {
    throw DimensionMismatch("weight length " + std::to_string(state.weight.size()) +
                            " != feature count " + std::to_string(n));
  }
  std::vector<double> scores(static_cast<size_t>(m), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    const double w = state.weight[static_cast<size_t>(i)];
    if (w == 0.0) continue;
    const double* row = table.features.data() + i * m;
    for (std::int64_t j = 0; j < m; ++j) scores[static_cast<size_t>(j)] += w * row[j];
  }
  const std::int64_t pick = argmax_lowest(scores.data(), m);

  HerdingState next = state;
  for (std::int64_t i = 0; i < n; ++i) {
    const double updated = next.weight[static_cast<size_t>(i)] +
                           table.targets[static_cast<size_t>(i)] -
                           table.features[static_cast<size_t>(i) * m + pick];
    if (!std::isfinite(updated)) {
      throw NonFiniteWeight("weight component " + std::to_string(i) +
                            " became non-finite after a herding step");
    }
    next.weight[static_cast<size_t>(i)] = updated;
  }
  next.step_count += 1;
  return {pick, std::move(next)};
}

std::pair<Token, HerdingState> categorical_herding_step(const HerdingState& state,
                                                        const ProbVector& p) {
  const std::int64_t k = p.size();
  if (state.weight.size() != static_cast<size_t>(k)) {
    throw DimensionMismatch("weight length " + std::to_string(state.weight.size()) +
                            " != vocabulary size " + std::to_string(k));
  }
  const Token pick = static_cast<Token>(argmax_lowest(state.weight.data(), k));
  HerdingState next = state;
  for (std::int64_t i = 0; i < k; ++i) {
    next.weight[static_cast<size_t>(i)] +=
        p[static_cast<int>(i)] - (i == pick ? 1.0 : 0.0);
  }
  next.step_count += 1;
  return {pick, std::move(next)};
}

HerdingRun herding_run(const ProbVector& p, const WeightVector& w0, std::int64_t steps) {
  const std::int64_t k = p.size();
  if (w0.size() != static_cast<size_t>(k)) {
    throw DimensionMismatch("initial weight length != vocabulary size");
  }
  if (steps < 1) throw BadTimeRange("herding run needs at least one step");

  std::vector<double> sum = w0;
  std::vector<double> comp(static_cast<size_t>(k), 0.0);
  std::vector<double> value = w0;

  HerdingRun run;
  run.samples.reserve(static_cast<size_t>(steps));
  double max_norm = 0.0;
  for (std::int64_t i = 0; i < k; ++i) {
    max_norm = std::max(max_norm, std::fabs(value[static_cast<size_t>(i)]));
  }

  for (std::int64_t t = 0; t < steps; ++t) {
    const Token pick = static_cast<Token>(argmax_lowest(value.data(), k));
    run.samples.push_back(pick);
    for (std::int64_t i = 0; i < k; ++i) {
      compensated_add(sum[static_cast<size_t>(i)], comp[static_cast<size_t>(i)],
                      p[static_cast<int>(i)] - (i == pick ? 1.0 : 0.0));
      const double v = sum[static_cast<size_t>(i)] + comp[static_cast<size_t>(i)];
      if (!std::isfinite(v)) {
        throw NonFiniteWeight("weight became non-finite at step " + std::to_string(t + 1));
      }
      value[static_cast<size_t>(i)] = v;
      max_norm = std::max(max_norm, std::fabs(v));
    }
  }

  run.final_state.initial_weight = w0;
  run.final_state.weight = value;
  run.final_state.step_count = steps;
  run.max_weight_norm = max_norm;
  return run;
}

std::vector<double> discrepancy(const std::vector<Token>& samples, const ProbVector& p,
                                const WeightVector& w0, const WeightVector& wT) {
  const std::int64_t k = p.size();
  if (w0.size() != static_cast<size_t>(k) || wT.size() != static_cast<size_t>(k)) {
    throw DimensionMismatch("weight lengths do not match vocabulary size");
  }
  if (samples.empty()) throw EmptySampleSet("discrepancy over an empty sample list");
  std::vector<std::int64_t> counts(static_cast<size_t>(k), 0);
  for (Token s : samples) {
    if (s < 0 || s >= k) throw DimensionMismatch("sample token outside vocabulary");
    counts[static_cast<size_t>(s)] += 1;
  }
  const double steps = static_cast<double>(samples.size());
  std::vector<double> residual(static_cast<size_t>(k), 0.0);
  for (std::int64_t i = 0; i < k; ++i) {
    const double freq = static_cast<double>(counts[static_cast<size_t>(i)]) / steps;
    const double drift =
        (wT[static_cast<size_t>(i)] - w0[static_cast<size_t>(i)]) / steps;
    residual[static_cast<size_t>(i)] = (p[static_cast<int>(i)] - freq) - drift;
  }
  return residual;
}

std::vector<double> max_abs_weight_through(const ProbVector& p, const WeightVector& w0,
                                           const std::vector<std::int64_t>& checkpoints) {
  const std::int64_t k = p.size();
  if (w0.size() != static_cast<size_t>(k)) {
    throw DimensionMismatch("initial weight length != vocabulary size");
  }
  if (checkpoints.empty()) throw EmptyVector("no checkpoints requested");
  for (size_t i = 0; i < checkpoints.size(); ++i) {
    if (checkpoints[i] < 1 || (i > 0 && checkpoints[i] <= checkpoints[i - 1])) {
      throw BadTimeRange("checkpoints must be positive and strictly increasing");
    }
  }

  std::vector<double> sum = w0;
  std::vector<double> comp(static_cast<size_t>(k), 0.0);
  std::vector<double> value = w0;
  double max_norm = 0.0;
  for (double v : value) max_norm = std::max(max_norm, std::fabs(v));

  std::vector<double> out;
  out.reserve(checkpoints.size());
  size_t next_checkpoint = 0;
  for (std::int64_t t = 1; t <= checkpoints.back(); ++t) {
    const Token pick = static_cast<Token>(argmax_lowest(value.data(), k));
    for (std::int64_t i = 0; i < k; ++i) {
      compensated_add(sum[static_cast<size_t>(i)], comp[static_cast<size_t>(i)],
                      p[static_cast<int>(i)] - (i == pick ? 1.0 : 0.0));
      const double v = sum[static_cast<size_t>(i)] + comp[static_cast<size_t>(i)];
      value[static_cast<size_t>(i)] = v;
      max_norm = std::max(max_norm, std::fabs(v));
    }
    if (t == checkpoints[next_checkpoint]) {
      out.push_back(max_norm);
      ++next_checkpoint;
    }
  }
  return out;
}

}  // namespace herd
