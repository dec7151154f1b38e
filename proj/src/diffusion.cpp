#include "herd/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace herd {

std::string to_string(ProcessKind kind) {
  return kind == ProcessKind::uniform ? "uniform" : "absorbing";
}

ForwardProcess make_forward_process(ProcessKind kind, int vocab,
                                    NoiseSchedule schedule, int mask_index) {
  if (vocab < 1) throw EmptyVector("forward process needs at least one category");
  ForwardProcess process;
  process.kind = kind;
  process.vocab = vocab;
  process.schedule = std::move(schedule);
  if (kind == ProcessKind::absorbing) {
    if (mask_index < 0 || mask_index >= vocab) {
      throw BadMaskIndex("mask index " + std::to_string(mask_index) +
                         " outside vocabulary of size " + std::to_string(vocab));
    }
    process.mask_index = mask_index;
  }
  return process;
}

namespace {

void check_beta(double beta) {
  if (!(beta > 0.0) || !(beta < 1.0) || !std::isfinite(beta)) {
    throw BetaOutOfRange("beta = " + std::to_string(beta) + " is outside (0, 1)");
  }
}

// Uniform mixing kernel with retention r: r * I + (1 - r) / K * ones.
TransitionMatrix uniform_kernel(double retention, int vocab) {
  const double off = (1.0 - retention) / static_cast<double>(vocab);
  std::vector<double> entries(static_cast<size_t>(vocab) * vocab, off);
  for (int i = 0; i < vocab; ++i) {
    entries[static_cast<size_t>(i) * vocab + i] = retention + off;
  }
  return TransitionMatrix(vocab, std::move(entries));
}

// Absorbing kernel with retention r: survive in place with r, else mask.
TransitionMatrix absorbing_kernel(double retention, int vocab, int mask_index) {
  std::vector<double> entries(static_cast<size_t>(vocab) * vocab, 0.0);
  for (int j = 0; j < vocab; ++j) {
    if (j == mask_index) {
      entries[static_cast<size_t>(mask_index) * vocab + j] = 1.0;
    } else {
      entries[static_cast<size_t>(j) * vocab + j] = retention;
      entries[static_cast<size_t>(mask_index) * vocab + j] = 1.0 - retention;
    }
  }
  return TransitionMatrix(vocab, std::move(entries));
}

}  // namespace

TransitionMatrix uniform_transition(double beta, int vocab) {
  check_beta(beta);
  if (vocab < 1) throw EmptyVector("transition needs at least one category");
  return uniform_kernel(1.0 - beta, vocab);
}

TransitionMatrix absorbing_transition(double beta, int vocab, int mask_index) {
  check_beta(beta);
  if (vocab < 1) throw EmptyVector("transition needs at least one category");
  if (mask_index < 0 || mask_index >= vocab) {
    throw BadMaskIndex("mask index " + std::to_string(mask_index) +
                       " outside vocabulary of size " + std::to_string(vocab));
  }
  return absorbing_kernel(1.0 - beta, vocab, mask_index);
}

TransitionMatrix single_step_transition(const ForwardProcess& process, std::int64_t t) {
  if (t < 1 || t > process.schedule.steps()) {
    throw BadTimeRange("single-step kernel requires t in [1, " +
                       std::to_string(process.schedule.steps()) + "]");
  }
  const double beta = process.schedule.beta(t);
  return process.kind == ProcessKind::uniform
             ? uniform_transition(beta, process.vocab)
             : absorbing_transition(beta, process.vocab, process.mask_index);
}

TransitionMatrix cumulative_transition(const ForwardProcess& process, std::int64_t s,
                                       std::int64_t t) {
  if (s < 0 || s >= t || t > process.schedule.steps()) {
    throw BadTimeRange("cumulative kernel requires 0 <= s < t <= " +
                       std::to_string(process.schedule.steps()));
  }
  if (t == s + 1) return single_step_transition(process, t);
  const double retention = process.schedule.retention(s, t);
  return process.kind == ProcessKind::uniform
             ? uniform_kernel(retention, process.vocab)
             : absorbing_kernel(retention, process.vocab, process.mask_index);
}

ProbVector stationary_distribution(const ForwardProcess& process) {
  if (process.kind == ProcessKind::uniform) {
    return ProbVector(std::vector<double>(
        static_cast<size_t>(process.vocab), 1.0 / static_cast<double>(process.vocab)));
  }
  return ProbVector(onehot(static_cast<Token>(process.mask_index), process.vocab));
}

TokenSequence forward_sample(const TokenSequence& x0, const ForwardProcess& process,
                             std::int64_t t, CounterRng& rng) {
  if (t < 1 || t > process.schedule.steps()) {
    throw BadTimeRange("forward sample requires t in [1, " +
                       std::to_string(process.schedule.steps()) + "]");
  }
  const TransitionMatrix kernel = cumulative_transition(process, 0, t);
  const int vocab = process.vocab;
  TokenSequence out(x0.size());
  std::vector<double> column(static_cast<size_t>(vocab));
  for (size_t l = 0; l < x0.size(); ++l) {
    if (x0[l] < 0 || x0[l] >= vocab) {
      throw DimensionMismatch("clean token outside vocabulary");
    }
    for (int i = 0; i < vocab; ++i) column[static_cast<size_t>(i)] = kernel.at(i, x0[l]);
    out[l] = static_cast<Token>(inverse_cdf_index(column.data(), vocab, rng));
  }
  return out;
}

ProbVector reverse_posterior(Token x_t, Token x0, const ForwardProcess& process,
                             std::int64_t t) {
  if (t < 1 || t > process.schedule.steps()) {
    throw BadTimeRange("reverse posterior requires t in [1, " +
                       std::to_string(process.schedule.steps()) + "]");
  }
  const int vocab = process.vocab;
  if (x_t < 0 || x_t >= vocab || x0 < 0 || x0 >= vocab) {
    throw DimensionMismatch("token outside vocabulary");
  }
  const TransitionMatrix step = single_step_transition(process, t);
  // Cumulative kernel from 0 to t-1; identity when t == 1.
  std::vector<double> prior(static_cast<size_t>(vocab), 0.0);
  if (t == 1) {
    prior[static_cast<size_t>(x0)] = 1.0;
  } else {
    const TransitionMatrix cum = cumulative_transition(process, 0, t - 1);
    for (int y = 0; y < vocab; ++y) prior[static_cast<size_t>(y)] = cum.at(y, x0);
  }
  std::vector<double> unnormalized(static_cast<size_t>(vocab), 0.0);
  double mass = 0.0;
  for (int y = 0; y < vocab; ++y) {
    const double v = step.at(x_t, y) * prior[static_cast<size_t>(y)];
    unnormalized[static_cast<size_t>(y)] = v;
    mass += v;
  }
  if (mass == 0.0) {
    throw ZeroMassPosterior("no path assigns mass to (x_t=" + std::to_string(x_t) +
                            ", x_0=" + std::to_string(x0) + ", t=" + std::to_string(t) +
                            ")");
  }
  for (double& v : unnormalized) v /= mass;
  return ProbVector(std::move(unnormalized));
}

DataDistribution make_data_distribution(int vocab, int length,
                                        std::vector<TokenSequence> support,
                                        std::vector<double> probs) {
  if (vocab < 1) throw EmptyVector("data distribution needs at least one category");
  if (length < 1) throw EmptyVector("data distribution needs positive sequence length");
  if (support.empty()) throw EmptyVector("data distribution has empty support");
  if (static_cast<std::int64_t>(support.size()) > kEnumerationCap) {
    throw EnumerationCapExceeded("support size " + std::to_string(support.size()) +
                                 " exceeds enumeration cap " +
                                 std::to_string(kEnumerationCap));
  }
  if (probs.size() != support.size()) {
    throw DimensionMismatch("support and probability lengths differ");
  }
  std::set<TokenSequence> seen;
  for (const TokenSequence& seq : support) {
    if (static_cast<int>(seq.size()) != length) {
      throw DimensionMismatch("support sequence length != declared length");
    }
    for (Token tok : seq) {
      if (tok < 0 || tok >= vocab) {
        throw DimensionMismatch("support token outside vocabulary");
      }
    }
    if (!seen.insert(seq).second) {
      throw DimensionMismatch("support sequences must be distinct");
    }
  }
  ProbVector validated(probs);  // enforces nonnegativity and unit sum
  DataDistribution data;
  data.vocab = vocab;
  data.length = length;
  data.support = std::move(support);
  data.probs = validated.values();
  return data;
}

DataDistribution load_data_distribution(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("data", "cannot open file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw ConfigError("data", "file '" + path + "' is not valid JSON: " + e.what());
  }
  for (const char* key : {"K", "L", "support", "probs"}) {
    if (!doc.contains(key)) {
      throw ConfigError("data", "file '" + path + "' is missing key '" +
                                    std::string(key) + "'");
    }
  }
  try {
    const int vocab = doc.at("K").get<int>();
    const int length = doc.at("L").get<int>();
    std::vector<TokenSequence> support;
    for (const auto& row : doc.at("support")) {
      support.push_back(row.get<TokenSequence>());
    }
    std::vector<double> probs = doc.at("probs").get<std::vector<double>>();
    return make_data_distribution(vocab, length, std::move(support), std::move(probs));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("data", "file '" + path + "' is invalid: " + e.what());
  } catch (const std::exception& e) {
    throw ConfigError("data", "file '" + path + "' has wrong field types: " + e.what());
  }
}

std::string data_distribution_json(const DataDistribution& data) {
  nlohmann::json doc;
  doc["K"] = data.vocab;
  doc["L"] = data.length;
  doc["support"] = data.support;
  doc["probs"] = data.probs;
  return doc.dump(2) + "\n";
}

ExactBayesModel::ExactBayesModel(DataDistribution data, ForwardProcess process)
    : data_(std::move(data)),
      process_(std::move(process)),
      stationary_(stationary_distribution(process_)) {
  if (data_.vocab != process_.vocab) {
    throw DimensionMismatch("data vocabulary " + std::to_string(data_.vocab) +
                            " != process vocabulary " + std::to_string(process_.vocab));
  }
  const std::int64_t horizon = process_.schedule.steps();
  cached_single_.reserve(static_cast<size_t>(horizon));
  cached_cumulative_.reserve(static_cast<size_t>(horizon) + 1);
  // Identity at t = 0.
  const int vocab = process_.vocab;
  std::vector<double> identity(static_cast<size_t>(vocab) * vocab, 0.0);
  for (int i = 0; i < vocab; ++i) identity[static_cast<size_t>(i) * vocab + i] = 1.0;
  cached_cumulative_.push_back(std::move(identity));
  for (std::int64_t t = 1; t <= horizon; ++t) {
    cached_single_.push_back(single_step_transition(process_, t).entries());
    cached_cumulative_.push_back(cumulative_transition(process_, 0, t).entries());
  }
}

void ExactBayesModel::predict(const TokenSequence& x_t, std::int64_t t,
                              std::vector<double>& out) const {
  const int vocab = process_.vocab;
  const int length = data_.length;
  if (static_cast<int>(x_t.size()) != length) {
    throw DimensionMismatch("sequence length " + std::to_string(x_t.size()) +
                            " != model length " + std::to_string(length));
  }
  if (t < 1 || t > steps()) {
    throw BadTimeRange("prediction requires t in [1, " + std::to_string(steps()) + "]");
  }
  for (Token tok : x_t) {
    if (tok < 0 || tok >= vocab) throw DimensionMismatch("token outside vocabulary");
  }

  const std::vector<double>& step = cached_single_[static_cast<size_t>(t - 1)];
  const std::vector<double>& cum_t = cached_cumulative_[static_cast<size_t>(t)];
  const std::vector<double>& cum_prev = cached_cumulative_[static_cast<size_t>(t - 1)];

  // Posterior over clean support sequences given the full noisy sequence.
  const size_t n = data_.support.size();
  std::vector<double> posterior(n, 0.0);
  double mass = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double w = data_.probs[i];
    for (int l = 0; l < length && w > 0.0; ++l) {
      w *= cum_t[static_cast<size_t>(x_t[static_cast<size_t>(l)]) * vocab +
                 data_.support[i][static_cast<size_t>(l)]];
    }
    posterior[i] = w;
    mass += w;
  }
  if (mass == 0.0) {
    throw ZeroMassPosterior("noisy sequence has zero likelihood under the data "
                            "distribution at t=" + std::to_string(t));
  }
  for (double& w : posterior) w /= mass;

  out.assign(static_cast<size_t>(length) * vocab, 0.0);
  std::vector<double> row(static_cast<size_t>(vocab));
  for (int l = 0; l < length; ++l) {
    const int cur = x_t[static_cast<size_t>(l)];
    double* out_row = out.data() + static_cast<size_t>(l) * vocab;
    for (size_t i = 0; i < n; ++i) {
      if (posterior[i] == 0.0) continue;
      const int clean = data_.support[i][static_cast<size_t>(l)];
      // Single-position reverse posterior toward this clean token.
      double z = 0.0;
      for (int y = 0; y < vocab; ++y) {
        const double v = step[static_cast<size_t>(cur) * vocab + y] *
                         cum_prev[static_cast<size_t>(y) * vocab + clean];
        row[static_cast<size_t>(y)] = v;
        z += v;
      }
      if (z == 0.0) continue;  // unreachable when posterior[i] > 0
      const double scale = posterior[i] / z;
      for (int y = 0; y < vocab; ++y) out_row[y] += scale * row[static_cast<size_t>(y)];
    }
  }
}

}  // namespace herd
