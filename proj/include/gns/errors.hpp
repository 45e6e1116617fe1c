#pragma once

#include <stdexcept>
#include <string>

namespace gns {

/// Base class for all errors thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Mismatched vector/matrix sizes between caller data and problem dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid problem or solver configuration (bad horizon, M out of range, ...).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, std::string field = {})
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// A forward integration produced a non-finite state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int interval, int stage)
      : Error(what), interval_(interval), stage_(stage) {}
  int interval() const { return interval_; }
  int stage() const { return stage_; }

 private:
  int interval_;
  int stage_;
};

/// A model violated one of its contracts (e.g. R not positive definite,
/// non-finite cost).
class ModelError : public Error {
 public:
  explicit ModelError(const std::string& what, int stage = -1)
      : Error(what), stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

/// Backward sweep could not restore positive definiteness of H within the
/// regularization budget.
class NonConvexityError : public Error {
 public:
  NonConvexityError(const std::string& what, int stage)
      : Error(what), stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

/// Not enough usable iterates to estimate a contraction rate.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// KKT matrix of an LQ subproblem is singular.
class DegenerateProblemError : public Error {
 public:
  using Error::Error;
};

}  // namespace gns
