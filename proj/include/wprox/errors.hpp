#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace wprox {

// Invalid configuration or arity: bad shapes, unknown config keys,
// malformed files. Mapped to CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An operation was called outside its contract (unpaired batches,
// unsupported sample dimension, mismatched mixture ratios).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite intermediates or degenerate statistics. Mapped to CLI exit
// code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A per-coordinate statistic fell below its floor; carries the coordinate.
struct DegenerateCoordinateError : NumericError {
  DegenerateCoordinateError(int coord, const std::string& what)
      : NumericError(what), coordinate(coord) {}
  int coordinate;
};

// Inner minimization blew past the divergence guard; carries the recent
// objective values for diagnosis.
struct DivergenceError : NumericError {
  DivergenceError(std::string what, std::vector<double> objective_trace)
      : NumericError(std::move(what)), trace(std::move(objective_trace)) {}
  std::vector<double> trace;
};

}  // namespace wprox
