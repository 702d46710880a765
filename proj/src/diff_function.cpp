#include "wprox/diff_function.hpp"

#include <algorithm>
#include <cmath>

namespace wprox::diff {

Var DiffFunction::operator()(Tape& tape, Var theta,
                             const Matrix& inputs) const {
  const Matrix& th = tape.value(theta);
  if (th.cols() != 1 || th.rows() != param_dim)
    throw ConfigError("DiffFunction: theta must be " +
                      std::to_string(param_dim) + "x1, got " +
                      std::to_string(th.rows()) + "x" +
                      std::to_string(th.cols()));
  if (input_cols > 0 && inputs.cols() != input_cols)
    throw ConfigError("DiffFunction: inputs must have " +
                      std::to_string(input_cols) + " columns, got " +
                      std::to_string(inputs.cols()));
  if (input_cols == 0 && inputs.size() != 0)
    throw ConfigError("DiffFunction: function takes no inputs");
  return build(tape, theta, inputs);
}

DiffFunction scalar_function(int param_dim,
                             std::function<Var(Tape&, Var)> build) {
  DiffFunction f;
  f.param_dim = param_dim;
  f.input_cols = 0;
  f.output_cols = 1;
  f.build = [b = std::move(build)](Tape& tape, Var theta, const Matrix&) {
    return b(tape, theta);
  };
  return f;
}

GradResult grad_scalar(const DiffFunction& f, const Vector& theta,
                       const Matrix& inputs) {
  Tape tape;
  Var th = tape.leaf(theta);
  Var out = f(tape, th, inputs);
  GradResult r;
  r.value = tape.scalar_value(out);
  tape.backward(out);
  r.gradient = tape.gradient(th).col(0);
  return r;
}

GradResult grad_scalar(const DiffFunction& f, const ParamVector& theta,
                       const Matrix& inputs) {
  if (theta.size() != f.param_dim)
    throw ConfigError("parameter vector length " + std::to_string(theta.size()) +
                      " does not match function arity " +
                      std::to_string(f.param_dim));
  return grad_scalar(f, theta.values(), inputs);
}

double eval_value(const DiffFunction& f, const Vector& theta,
                  const Matrix& inputs) {
  Tape tape;
  Var th = tape.leaf(theta);
  Var out = f(tape, th, inputs);
  return tape.scalar_value(out);
}

Matrix jacobian(const DiffFunction& g, const Vector& theta, const Matrix& z) {
  Tape tape;
  Var th = tape.leaf(theta);
  Var out = g(tape, th, z);
  const Matrix& v = tape.value(out);
  if (v.rows() != 1)
    throw ConfigError("jacobian expects a single output row, got " +
                      std::to_string(v.rows()));
  const int n = static_cast<int>(v.cols());
  const int d = static_cast<int>(theta.size());
  Matrix jac(n, d);
  for (int i = 0; i < n; ++i) {
    Matrix seed = Matrix::Zero(1, n);
    seed(0, i) = 1.0;
    tape.backward(out, seed);
    jac.row(i) = tape.gradient(th).col(0).transpose();
  }
  return jac;
}

bool FdReport::comparable(int coord) const {
  return std::find(non_comparable.begin(), non_comparable.end(), coord) ==
         non_comparable.end();
}

namespace {

struct ValueAndSignature {
  double value;
  std::vector<std::uint64_t> signature;
};

ValueAndSignature eval_with_signature(const DiffFunction& f,
                                      const Vector& theta,
                                      const Matrix& inputs) {
  Tape tape;
  Var th = tape.leaf(theta);
  Var out = f(tape, th, inputs);
  return {tape.scalar_value(out), tape.kink_signature()};
}

}  // namespace

FdReport finite_diff_check(const DiffFunction& f, const Vector& theta,
                           double step, const Matrix& inputs) {
  if (step <= 0.0) throw UsageError("finite_diff_check: step must be > 0");
  const GradResult ad = grad_scalar(f, theta, inputs);
  FdReport report;
  for (int j = 0; j < theta.size(); ++j) {
    Vector tp = theta;
    Vector tm = theta;
    tp[j] += step;
    tm[j] -= step;
    const ValueAndSignature plus = eval_with_signature(f, tp, inputs);
    const ValueAndSignature minus = eval_with_signature(f, tm, inputs);
    if (plus.signature != minus.signature) {
      report.non_comparable.push_back(j);
      continue;
    }
    const double fd = (plus.value - minus.value) / (2.0 * step);
    const double err = rel_err(ad.gradient[j], fd);
    if (err > report.max_rel_err) {
      report.max_rel_err = err;
      report.worst_coordinate = j;
      report.worst_ad = ad.gradient[j];
      report.worst_fd = fd;
    }
  }
  return report;
}

}  // namespace wprox::diff
