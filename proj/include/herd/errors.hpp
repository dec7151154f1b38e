#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace herd {

// Base class for every failure raised by this library. All invariants fail
// loudly; nothing is renormalized or clamped silently.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define HERD_ERROR_TYPE(Name)   \
  class Name : public Error {   \
   public:                      \
    using Error::Error;         \
  }

// Probability / matrix validation.
HERD_ERROR_TYPE(NegativeEntry);
HERD_ERROR_TYPE(SumOutOfTolerance);
HERD_ERROR_TYPE(EmptyVector);
HERD_ERROR_TYPE(DimensionMismatch);

// Herding and reverse-chain execution.
HERD_ERROR_TYPE(NonFiniteWeight);
HERD_ERROR_TYPE(AllZeroProbability);
HERD_ERROR_TYPE(ModelFailure);

// Forward-process construction and queries.
HERD_ERROR_TYPE(BetaOutOfRange);
HERD_ERROR_TYPE(BadMaskIndex);
HERD_ERROR_TYPE(BadTimeRange);
HERD_ERROR_TYPE(ZeroMassPosterior);

// Oracles and data distributions.
HERD_ERROR_TYPE(EnumerationCapExceeded);
HERD_ERROR_TYPE(EmptySampleSet);

#undef HERD_ERROR_TYPE

// Invalid experiment configuration; always names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error("config field '" + field + "': " + message),
        field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace herd
