#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "wprox/errors.hpp"

namespace wprox::diff {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Reverse-mode differentiation over an explicit operation trace. Values are
// dense matrices (a scalar is 1x1, a batch is rows-of-samples). Each
// evaluation owns its private tape; tapes are not shared across threads.
//
// Kinked primitives (relu, leaky_relu, abs, step, clamp) use subgradient 0
// at the kink. Every kink-sensitive decision taken while building a tape
// (activation masks, clamp regions, gather permutations) is folded into a
// signature so finite-difference checks can tell when two evaluations
// straddle a kink and are not comparable.

enum class Op : std::uint8_t {
  kLeaf,
  kConst,
  kSliceReshape,  // i0=offset, i1=rows, i2=cols; input is a column vector
  kColSlice,      // i0=column index
  kAdd,
  kSub,
  kCMul,
  kCDiv,
  kScale,         // c0 = factor
  kAddConst,      // c0 = addend
  kMulScalarVar,  // a (any shape) times b (1x1)
  kMatMul,        // a * b
  kMatMulNT,      // a * b^T
  kAddRowVec,     // a + ones * r   (r is 1 x cols)
  kMulRowVec,     // a .* (ones * r)
  kRepRow,        // ones(i0,1) * r
  kGather,        // rows of a permuted/selected by idx
  kTanh,
  kSigmoid,
  kRelu,
  kLeakyRelu,  // c0 = slope
  kStep,       // indicator(x > 0); derivative 0 everywhere
  kAbs,
  kSquare,
  kLog,
  kExp,
  kClamp,  // c0 = lo, c1 = hi
  kSum,    // 1x1
  kMean,   // 1x1
  kColMean  // 1 x cols
};

const char* op_name(Op op);

class Tape;

// Cheap handle to a tape node.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(const Matrix& value);
  Var leaf(const Vector& value);  // column vector
  Var constant(const Matrix& value);
  Var constant(const Vector& value);
  Var constant_scalar(double value);

  const Matrix& value(Var v) const;
  double scalar_value(Var v) const;

  // Accumulates d(output)/d(node) into every grad-requiring node. The
  // output must be 1x1 for the seedless overload.
  void backward(Var output);
  void backward(Var output, const Matrix& seed);

  // Zero for grad-requiring nodes the output does not depend on.
  Matrix gradient(Var v) const;
  bool requires_grad(Var v) const;

  const std::vector<std::uint64_t>& kink_signature() const { return kinks_; }

  int size() const { return static_cast<int>(nodes_.size()); }
  void reserve(int n) { nodes_.reserve(n); }

 private:
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double c0 = 0.0;
    double c1 = 0.0;
    int i0 = 0;
    int i1 = 0;
    int i2 = 0;
    std::vector<int> idx;
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
  };

  Var emit(Node node);
  void accumulate(int id, const Matrix& g);
  void record_mask_kink(const Matrix& values, double where);
  void record_region_kink(const Matrix& values, double lo, double hi);
  void record_index_kink(const std::vector<int>& idx);

  std::vector<Node> nodes_;
  std::vector<std::uint64_t> kinks_;

  friend Var add(Var, Var);
  friend Var sub(Var, Var);
  friend Var cmul(Var, Var);
  friend Var cdiv(Var, Var);
  friend Var scale(Var, double);
  friend Var add_const(Var, double);
  friend Var mul_scalar(Var, Var);
  friend Var matmul(Var, Var);
  friend Var matmul_nt(Var, Var);
  friend Var add_rowvec(Var, Var);
  friend Var mul_rowvec(Var, Var);
  friend Var replicate_row(Var, int);
  friend Var gather_rows(Var, const std::vector<int>&);
  friend Var slice_reshape(Var, int, int, int);
  friend Var col(Var, int);
  friend Var tanh(Var);
  friend Var sigmoid(Var);
  friend Var relu(Var);
  friend Var leaky_relu(Var, double);
  friend Var step(Var);
  friend Var abs(Var);
  friend Var square(Var);
  friend Var log(Var);
  friend Var exp(Var);
  friend Var clamp(Var, double, double);
  friend Var sum(Var);
  friend Var mean(Var);
  friend Var colmean(Var);
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var cmul(Var a, Var b);
Var cdiv(Var a, Var b);
Var scale(Var a, double c);
Var add_const(Var a, double c);
Var mul_scalar(Var a, Var s);
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);
Var add_rowvec(Var a, Var r);
Var mul_rowvec(Var a, Var r);
Var replicate_row(Var r, int rows);
Var gather_rows(Var a, const std::vector<int>& idx);
Var slice_reshape(Var colvec, int offset, int rows, int cols);
Var col(Var a, int j);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var step(Var a);
Var abs(Var a);
Var square(Var a);
Var log(Var a);
Var exp(Var a);
Var clamp(Var a, double lo, double hi);
Var sum(Var a);
Var mean(Var a);
Var colmean(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, double c) { return scale(a, c); }
inline Var operator*(double c, Var a) { return scale(a, c); }

}  // namespace wprox::diff
