#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "wprox/param_vector.hpp"
#include "wprox/tape.hpp"

namespace wprox::diff {

// A differentiable map of a flat parameter vector (and an optional fixed
// input batch), expressed as a composition of tape primitives. The builder
// is re-run for every evaluation; data-dependent choices it makes (sort
// orders, activation masks) end up in the tape's kink signature.
struct DiffFunction {
  int param_dim = 0;
  int input_cols = 0;   // expected inputs.cols(); 0 means "no inputs"
  int output_cols = 1;  // columns of the builder's result
  std::function<Var(Tape&, Var theta, const Matrix& inputs)> build;

  Var operator()(Tape& tape, Var theta, const Matrix& inputs = Matrix()) const;
};

// Scalar objective without an input batch.
DiffFunction scalar_function(int param_dim,
                             std::function<Var(Tape&, Var)> build);

struct GradResult {
  double value = 0.0;
  Vector gradient;
};

// Value and d(value)/d(theta) of a scalar-valued DiffFunction.
GradResult grad_scalar(const DiffFunction& f, const Vector& theta,
                       const Matrix& inputs = Matrix());
GradResult grad_scalar(const DiffFunction& f, const ParamVector& theta,
                       const Matrix& inputs = Matrix());

double eval_value(const DiffFunction& f, const Vector& theta,
                  const Matrix& inputs = Matrix());

// Rows = output coordinates, columns = parameters. The function must
// produce a single output row (one sample).
Matrix jacobian(const DiffFunction& g, const Vector& theta, const Matrix& z);

struct FdReport {
  double max_rel_err = 0.0;
  int worst_coordinate = -1;
  double worst_ad = 0.0;
  double worst_fd = 0.0;
  std::vector<int> non_comparable;  // coordinates straddling a kink

  bool comparable(int coord) const;
};

// Central-difference audit of grad_scalar, coordinate by coordinate.
// Coordinates whose +/-step evaluations disagree on any kink decision are
// reported as non-comparable and excluded from the error maximum.
FdReport finite_diff_check(const DiffFunction& f, const Vector& theta,
                           double step, const Matrix& inputs = Matrix());

inline double rel_err(double a, double b) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) / scale;
}

}  // namespace wprox::diff
