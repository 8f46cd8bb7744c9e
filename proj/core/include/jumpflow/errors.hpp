#pragma once

#include <stdexcept>
#include <string>

namespace jumpflow {

// Shape disagreement between a vector and the layer/network consuming it.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed corpus, config or checkpoint input.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated internal invariant (a bug, not bad input).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Simulated dynamics left the range where sampling is meaningful.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double time)
      : std::runtime_error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace jumpflow
