#include "wprox/tape.hpp"

#include <cmath>

namespace wprox::diff {

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConst: return "const";
    case Op::kSliceReshape: return "slice_reshape";
    case Op::kColSlice: return "col";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kCMul: return "cmul";
    case Op::kCDiv: return "cdiv";
    case Op::kScale: return "scale";
    case Op::kAddConst: return "add_const";
    case Op::kMulScalarVar: return "mul_scalar";
    case Op::kMatMul: return "matmul";
    case Op::kMatMulNT: return "matmul_nt";
    case Op::kAddRowVec: return "add_rowvec";
    case Op::kMulRowVec: return "mul_rowvec";
    case Op::kRepRow: return "replicate_row";
    case Op::kGather: return "gather_rows";
    case Op::kTanh: return "tanh";
    case Op::kSigmoid: return "sigmoid";
    case Op::kRelu: return "relu";
    case Op::kLeakyRelu: return "leaky_relu";
    case Op::kStep: return "step";
    case Op::kAbs: return "abs";
    case Op::kSquare: return "square";
    case Op::kLog: return "log";
    case Op::kExp: return "exp";
    case Op::kClamp: return "clamp";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kColMean: return "colmean";
  }
  return "?";
}

namespace {

std::uint64_t fnv1a(const unsigned char* data, std::size_t n,
                    std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ConfigError(std::string("shape mismatch in '") + what + "': " +
                      std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                      " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()));
}

}  // namespace

Var Tape::emit(Node node) {
  if (!node.value.allFinite())
    throw NumericError(std::string("non-finite value produced by primitive '") +
                       op_name(node.op) + "'");
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(const Matrix& value) {
  Node n;
  n.op = Op::kLeaf;
  n.value = value;
  n.needs_grad = true;
  return emit(std::move(n));
}

Var Tape::leaf(const Vector& value) { return leaf(Matrix(value)); }

Var Tape::constant(const Matrix& value) {
  Node n;
  n.op = Op::kConst;
  n.value = value;
  n.needs_grad = false;
  return emit(std::move(n));
}

Var Tape::constant(const Vector& value) { return constant(Matrix(value)); }

Var Tape::constant_scalar(double value) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return constant(m);
}

const Matrix& Tape::value(Var v) const { return nodes_.at(v.id).value; }

double Tape::scalar_value(Var v) const {
  const Matrix& m = value(v);
  if (m.rows() != 1 || m.cols() != 1)
    throw ConfigError("expected a scalar (1x1) value, got " +
                      std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  return m(0, 0);
}

bool Tape::requires_grad(Var v) const { return nodes_.at(v.id).needs_grad; }

Matrix Tape::gradient(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (!n.needs_grad)
    throw UsageError("node does not require grad");
  if (n.grad.size() == 0)
    return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0)
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  n.grad += g;
}

void Tape::record_mask_kink(const Matrix& values, double where) {
  std::vector<unsigned char> mask(static_cast<std::size_t>(values.size()));
  const double* p = values.data();
  for (Eigen::Index i = 0; i < values.size(); ++i)
    mask[static_cast<std::size_t>(i)] = p[i] > where ? 1 : 0;
  kinks_.push_back(fnv1a(mask.data(), mask.size()));
}

void Tape::record_region_kink(const Matrix& values, double lo, double hi) {
  std::vector<unsigned char> mask(static_cast<std::size_t>(values.size()));
  const double* p = values.data();
  for (Eigen::Index i = 0; i < values.size(); ++i)
    mask[static_cast<std::size_t>(i)] =
        p[i] <= lo ? 0 : (p[i] >= hi ? 2 : 1);
  kinks_.push_back(fnv1a(mask.data(), mask.size()));
}

void Tape::record_index_kink(const std::vector<int>& idx) {
  kinks_.push_back(fnv1a(reinterpret_cast<const unsigned char*>(idx.data()),
                         idx.size() * sizeof(int)));
}

namespace {

Tape* same_tape(Var a, Var b, const char* what) {
  if (a.tape == nullptr || b.tape == nullptr || a.tape != b.tape)
    throw UsageError(std::string("operands of '") + what +
                     "' live on different tapes");
  return a.tape;
}

}  // namespace

#define WPROX_BINARY_PRELUDE(a, b, name)                  \
  Tape* t = same_tape(a, b, name);                        \
  const Matrix& va = t->value(a);                         \
  const Matrix& vb = t->value(b);                         \
  (void)va;                                               \
  (void)vb;

Var add(Var a, Var b) {
  WPROX_BINARY_PRELUDE(a, b, "add");
  check_same_shape(va, vb, "add");
  Tape::Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.value = va + vb;
  n.needs_grad = t->requires_grad(a) || t->requires_grad(b);
  return t->emit(std::move(n));
}

Var sub(Var a, Var b) {
  WPROX_BINARY_PRELUDE(a, b, "sub");
  check_same_shape(va, vb, "sub");
  Tape::Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.value = va - vb;
  n.needs_grad = t->requires_grad(a) || t->requires_grad(b);
  return t->emit(std::move(n));
}

Var cmul(Var a, Var b) {
  WPROX_BINARY_PRELUDE(a, b, "cmul");
  check_same_shape(va, vb, "cmul");
  Tape::Node n;
  n.op = Op::kCMul;
  n.a = a.id;
  n.b = b.id;
  n.value = va.cwiseProduct(vb);
  n.needs_grad = t->requires_grad(a) || t->requires_grad(b);
  return t->emit(std::move(n));
}

Var cdiv(Var a, Var b) {
  WPROX_BINARY_PRELUDE(a, b, "cdiv");
  check_same_shape(va, vb, "cdiv");
  Tape::Node n;
  n.op = Op::kCDiv;
  n.a = a.id;
  n.b = b.id;
  n.value = va.cwiseQuotient(vb);
  n.needs_grad = t->requires_grad(a) || t->requires_grad(b);
  return t->emit(std::move(n));
}

Var scale(Var a, double c) {
  Tape* t = a.tape;
  Tape::Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.c0 = c;
  n.value = t->value(a) * c;
  n.needs_grad = t->requires_grad(a);
  return t->emit(std::move(n));
}

Var add_const(Var a, double c) {
  Tape* t = a.tape;
  Tape::Node n;
  n.op = Op::kAddConst;
  n.a = a.id;
  n.c0 = c;
  n.value = t->value(a).array() + c;
  n.needs_grad = t->requires_grad(a);
  return t->emit(std::move(n));
}

Var mul_scalar(Var a, Var s) {
  WPROX_BINARY_PRELUDE(a, s, "mul_scalar");
  if (vb.rows() != 1 || vb.cols() != 1)
    throw ConfigError("mul_scalar: second operand must be 1x1");
  Tape::Node n;
  n.op = Op::kMulScalarVar;
  n.a = a.id;
  n.b = s.id;
  n.value = va * vb(0, 0);
  n.needs_grad = t->requires_grad(a) || t->requires_grad(s);
  return t->emit(std::move(n));
}

Var matmul(Var a, Var b) {
  WPROX_BINARY_PRELUDE(a, b, "matmul");
  if (va.cols() != vb.rows())
    throw ConfigError("matmul: inner dimensions disagree: " +
                      std::to_string(va.cols()) + " vs " +
                      std::to_string(vb.rows()));
  Tape::Node n;
  n.op = Op::kMatMul;
  n.a = a.id;
  n.b = b.id;
  n.value = va * vb;
  n.needs_grad = t->requires_grad(a) || t->requires_grad(b);
  return t->emit(std::move(n));
}

Var matmul_nt(Var a, Var b) {
  WPROX_BINARY_PRELUDE(a, b, "matmul_nt");
  if (va.cols() != vb.cols())
    throw ConfigError("matmul_nt: inner dimensions disagree: " +
                      std::to_string(va.cols()) + " vs " +
                      std::to_string(vb.cols()));
  Tape::Node n;
  n.op = Op::kMatMulNT;
  n.a = a.id;
  n.b = b.id;
  n.value = va * vb.transpose();
  n.needs_grad = t->requires_grad(a) || t->requires_grad(b);
  return t->emit(std::move(n));
}

Var add_rowvec(Var a, Var r) {
  WPROX_BINARY_PRELUDE(a, r, "add_rowvec");
  if (vb.rows() != 1 || vb.cols() != va.cols())
    throw ConfigError("add_rowvec: second operand must be 1 x cols");
  Tape::Node n;
  n.op = Op::kAddRowVec;
  n.a = a.id;
  n.b = r.id;
  n.value = va.rowwise() + vb.row(0);
  n.needs_grad = t->requires_grad(a) || t->requires_grad(r);
  return t->emit(std::move(n));
}

Var mul_rowvec(Var a, Var r) {
  WPROX_BINARY_PRELUDE(a, r, "mul_rowvec");
  if (vb.rows() != 1 || vb.cols() != va.cols())
    throw ConfigError("mul_rowvec: second operand must be 1 x cols");
  Tape::Node n;
  n.op = Op::kMulRowVec;
  n.a = a.id;
  n.b = r.id;
  n.value = va.array().rowwise() * vb.row(0).array();
  n.needs_grad = t->requires_grad(a) || t->requires_grad(r);
  return t->emit(std::move(n));
}

Var replicate_row(Var r, int rows) {
  Tape* t = r.tape;
  const Matrix& vr = t->value(r);
  if (vr.rows() != 1) throw ConfigError("replicate_row: operand must be 1 x k");
  Tape::Node n;
  n.op = Op::kRepRow;
  n.a = r.id;
  n.i0 = rows;
  n.value = vr.replicate(rows, 1);
  n.needs_grad = t->requires_grad(r);
  return t->emit(std::move(n));
}

Var gather_rows(Var a, const std::vector<int>& idx) {
  Tape* t = a.tape;
  const Matrix& va = t->value(a);
  Matrix out(static_cast<Eigen::Index>(idx.size()), va.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= va.rows())
      throw ConfigError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = va.row(idx[i]);
  }
  t->record_index_kink(idx);
  Tape::Node n;
  n.op = Op::kGather;
  n.a = a.id;
  n.idx = idx;
  n.value = std::move(out);
  n.needs_grad = t->requires_grad(a);
  return t->emit(std::move(n));
}

Var slice_reshape(Var colvec, int offset, int rows, int cols) {
  Tape* t = colvec.tape;
  const Matrix& v = t->value(colvec);
  if (v.cols() != 1) throw ConfigError("slice_reshape: operand must be a column");
  if (offset < 0 || offset + rows * cols > v.rows())
    throw ConfigError("slice_reshape: slice exceeds vector length");
  Tape::Node n;
  n.op = Op::kSliceReshape;
  n.a = colvec.id;
  n.i0 = offset;
  n.i1 = rows;
  n.i2 = cols;
  n.value = Eigen::Map<const Matrix>(v.data() + offset, rows, cols);
  n.needs_grad = t->requires_grad(colvec);
  return t->emit(std::move(n));
}

Var col(Var a, int j) {
  Tape* t = a.tape;
  const Matrix& va = t->value(a);
  if (j < 0 || j >= va.cols()) throw ConfigError("col: index out of range");
  Tape::Node n;
  n.op = Op::kColSlice;
  n.a = a.id;
  n.i0 = j;
  n.value = va.col(j);
  n.needs_grad = t->requires_grad(a);
  return t->emit(std::move(n));
}

#define WPROX_UNARY(name, opkind, expr)          \
  Var name(Var a) {                              \
    Tape* t = a.tape;                            \
    const Matrix& va = t->value(a);              \
    Tape::Node n;                                \
    n.op = opkind;                               \
    n.a = a.id;                                  \
    n.value = (expr);                            \
    n.needs_grad = t->requires_grad(a);          \
    return t->emit(std::move(n));                \
  }

WPROX_UNARY(tanh, Op::kTanh, va.array().tanh().matrix())
WPROX_UNARY(sigmoid, Op::kSigmoid,
            (1.0 / (1.0 + (-va.array()).exp())).matrix())
WPROX_UNARY(square, Op::kSquare, va.cwiseProduct(va))
WPROX_UNARY(log, Op::kLog, va.array().log().matrix())
WPROX_UNARY(exp, Op::kExp, va.array().exp().matrix())

Var relu(Var a) {
  Tape* t = a.tape;
  const Matrix& va = t->value(a);
  t->record_mask_kink(va, 0.0);
  Tape::Node n;
  n.op = Op::kRelu;
  n.a = a.id;
  n.value = va.cwiseMax(0.0);
  n.needs_grad = t->requires_grad(a);
  return t->emit(std::move(n));
}

Var leaky_relu(Var a, double slope) {
  Tape* t = a.tape;
  const Matrix& va = t->value(a);
  t->record_mask_kink(va, 0.0);
  Tape::Node n;
  n.op = Op::kLeakyRelu;
  n.a = a.id;
  n.c0 = slope;
  n.value = va.cwiseMax(va * slope);
  n.needs_grad = t->requires_grad(a);
  return t->emit(std::move(n));
}

Var step(Var a) {
  Tape* t = a.tape;
  const Matrix& va = t->value(a);
  t->record_mask_kink(va, 0.0);
  Tape::Node n;
  n.op = Op::kStep;
  n.a = a.id;
  n.value = (va.array() > 0.0).cast<double>().matrix();
  n.needs_grad = false;  // derivative is zero everywhere it exists
  return t->emit(std::move(n));
}

Var abs(Var a) {
  Tape* t = a.tape;
  const Matrix& va = t->value(a);
  t->record_mask_kink(va, 0.0);
  Tape::Node n;
  n.op = Op::kAbs;
  n.a = a.id;
  n.value = va.cwiseAbs();
  n.needs_grad = t->requires_grad(a);
  return t->emit(std::move(n));
}

Var clamp(Var a, double lo, double hi) {
  Tape* t = a.tape;
  const Matrix& va = t->value(a);
  t->record_region_kink(va, lo, hi);
  Tape::Node n;
  n.op = Op::kClamp;
  n.a = a.id;
  n.c0 = lo;
  n.c1 = hi;
  n.value = va.cwiseMax(lo).cwiseMin(hi);
  n.needs_grad = t->requires_grad(a);
  return t->emit(std::move(n));
}

Var sum(Var a) {
  Tape* t = a.tape;
  Tape::Node n;
  n.op = Op::kSum;
  n.a = a.id;
  n.value = Matrix::Constant(1, 1, t->value(a).sum());
  n.needs_grad = t->requires_grad(a);
  return t->emit(std::move(n));
}

Var mean(Var a) {
  Tape* t = a.tape;
  Tape::Node n;
  n.op = Op::kMean;
  n.a = a.id;
  n.value = Matrix::Constant(1, 1, t->value(a).mean());
  n.needs_grad = t->requires_grad(a);
  return t->emit(std::move(n));
}

Var colmean(Var a) {
  Tape* t = a.tape;
  Tape::Node n;
  n.op = Op::kColMean;
  n.a = a.id;
  n.value = t->value(a).colwise().mean();
  n.needs_grad = t->requires_grad(a);
  return t->emit(std::move(n));
}

void Tape::backward(Var output) {
  const Matrix& v = value(output);
  if (v.rows() != 1 || v.cols() != 1)
    throw ConfigError("backward without seed requires a scalar output");
  backward(output, Matrix::Constant(1, 1, 1.0));
}

void Tape::backward(Var output, const Matrix& seed) {
  if (output.tape != this) throw UsageError("output var is not on this tape");
  for (Node& n : nodes_)
    if (n.grad.size() != 0) n.grad.setZero();
  {
    const Node& out = nodes_.at(output.id);
    check_same_shape(out.value, seed, "backward seed");
  }
  accumulate(output.id, seed);

  for (int id = output.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConst:
        break;
      case Op::kSliceReshape: {
        Node& src = nodes_[n.a];
        if (src.needs_grad) {
          if (src.grad.size() == 0)
            src.grad = Matrix::Zero(src.value.rows(), src.value.cols());
          Eigen::Map<Matrix>(src.grad.data() + n.i0, n.i1, n.i2) += g;
        }
        break;
      }
      case Op::kColSlice: {
        Node& src = nodes_[n.a];
        if (src.needs_grad) {
          if (src.grad.size() == 0)
            src.grad = Matrix::Zero(src.value.rows(), src.value.cols());
          src.grad.col(n.i0) += g;
        }
        break;
      }
      case Op::kAdd:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::kSub:
        accumulate(n.a, g);
        accumulate(n.b, -g);
        break;
      case Op::kCMul:
        accumulate(n.a, g.cwiseProduct(nodes_[n.b].value));
        accumulate(n.b, g.cwiseProduct(nodes_[n.a].value));
        break;
      case Op::kCDiv: {
        const Matrix& vb = nodes_[n.b].value;
        accumulate(n.a, g.cwiseQuotient(vb));
        accumulate(n.b, -g.cwiseProduct(n.value).cwiseQuotient(vb));
        break;
      }
      case Op::kScale:
        accumulate(n.a, g * n.c0);
        break;
      case Op::kAddConst:
        accumulate(n.a, g);
        break;
      case Op::kMulScalarVar: {
        const double s = nodes_[n.b].value(0, 0);
        accumulate(n.a, g * s);
        accumulate(n.b, Matrix::Constant(
                            1, 1, g.cwiseProduct(nodes_[n.a].value).sum()));
        break;
      }
      case Op::kMatMul:
        accumulate(n.a, g * nodes_[n.b].value.transpose());
        accumulate(n.b, nodes_[n.a].value.transpose() * g);
        break;
      case Op::kMatMulNT:
        accumulate(n.a, g * nodes_[n.b].value);
        accumulate(n.b, g.transpose() * nodes_[n.a].value);
        break;
      case Op::kAddRowVec:
        accumulate(n.a, g);
        accumulate(n.b, g.colwise().sum());
        break;
      case Op::kMulRowVec: {
        const Matrix& r = nodes_[n.b].value;
        accumulate(n.a, g.array().rowwise() * r.row(0).array());
        accumulate(n.b, g.cwiseProduct(nodes_[n.a].value).colwise().sum());
        break;
      }
      case Op::kRepRow:
        accumulate(n.a, g.colwise().sum());
        break;
      case Op::kGather: {
        Node& src = nodes_[n.a];
        if (src.needs_grad) {
          if (src.grad.size() == 0)
            src.grad = Matrix::Zero(src.value.rows(), src.value.cols());
          for (std::size_t i = 0; i < n.idx.size(); ++i)
            src.grad.row(n.idx[i]) += g.row(static_cast<Eigen::Index>(i));
        }
        break;
      }
      case Op::kTanh:
        accumulate(n.a,
                   (g.array() * (1.0 - n.value.array().square())).matrix());
        break;
      case Op::kSigmoid:
        accumulate(
            n.a,
            (g.array() * n.value.array() * (1.0 - n.value.array())).matrix());
        break;
      case Op::kRelu:
        accumulate(n.a, (g.array() *
                         (nodes_[n.a].value.array() > 0.0).cast<double>())
                            .matrix());
        break;
      case Op::kLeakyRelu: {
        const Eigen::ArrayXXd mask =
            (nodes_[n.a].value.array() > 0.0).cast<double>();
        accumulate(n.a,
                   (g.array() * (mask + n.c0 * (1.0 - mask))).matrix());
        break;
      }
      case Op::kStep:
        break;
      case Op::kAbs:
        accumulate(n.a, (g.array() * nodes_[n.a].value.array().sign()).matrix());
        break;
      case Op::kSquare:
        accumulate(n.a, 2.0 * g.cwiseProduct(nodes_[n.a].value));
        break;
      case Op::kLog:
        accumulate(n.a, g.cwiseQuotient(nodes_[n.a].value));
        break;
      case Op::kExp:
        accumulate(n.a, g.cwiseProduct(n.value));
        break;
      case Op::kClamp: {
        const Eigen::ArrayXXd inside =
            ((nodes_[n.a].value.array() > n.c0) &&
             (nodes_[n.a].value.array() < n.c1))
                .cast<double>();
        accumulate(n.a, (g.array() * inside).matrix());
        break;
      }
      case Op::kSum: {
        const Node& src = nodes_[n.a];
        accumulate(n.a, Matrix::Constant(src.value.rows(), src.value.cols(),
                                         g(0, 0)));
        break;
      }
      case Op::kMean: {
        const Node& src = nodes_[n.a];
        accumulate(n.a,
                   Matrix::Constant(src.value.rows(), src.value.cols(),
                                    g(0, 0) / static_cast<double>(
                                                  src.value.size())));
        break;
      }
      case Op::kColMean: {
        const Node& src = nodes_[n.a];
        const double inv = 1.0 / static_cast<double>(src.value.rows());
        accumulate(n.a, (g * inv).replicate(src.value.rows(), 1));
        break;
      }
    }
  }
}

}  // namespace wprox::diff
