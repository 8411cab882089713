#include "protoloss/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "protoloss/error.hpp"

namespace protoloss {
namespace {

Tape& common_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) {
    throw ContractViolation("operands recorded on different tapes");
  }
  return *a.tape;
}

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw ContractViolation("uninitialized Var");
  return *a.tape;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ContractViolation(std::string(op) + ": expected rank " +
                            std::to_string(rank) + ", got shape " +
                            shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ContractViolation(std::string(op) + ": shape mismatch " +
                            shape_to_string(a.shape()) + " vs " +
                            shape_to_string(b.shape()));
  }
}

Tape::Record unary(Op op, Var a, Tensor value, double param = 0.0) {
  Tape::Record r;
  r.op = op;
  r.lhs = a.id;
  r.value = std::move(value);
  r.requires_grad = tape_of(a).record(a.id).requires_grad;
  r.param = param;
  return r;
}

Tape::Record binary(Op op, Var a, Var b, Tensor value) {
  Tape& tape = common_tape(a, b);
  Tape::Record r;
  r.op = op;
  r.lhs = a.id;
  r.rhs = b.id;
  r.value = std::move(value);
  r.requires_grad =
      tape.record(a.id).requires_grad || tape.record(b.id).requires_grad;
  return r;
}

// c[m,n] += a[m,k] * b[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m,n] += a[m,k] * b[n,k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[i * n + j] += s;
    }
  }
}

// c[k,n] += a[m,k]^T * b[m,n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + i * n;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void accumulate(std::vector<Tensor>& adjoints, std::uint32_t id,
                const Tensor& contribution) {
  Tensor& slot = adjoints[id];
  if (slot.empty() && !contribution.empty()) {
    slot = contribution;
    return;
  }
  auto dst = slot.data();
  auto src = contribution.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatmul: return "matmul";
    case Op::kMatmulNT: return "matmul_nt";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kAddRow: return "add_row";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kRelu: return "relu";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kRowSum: return "row_sum";
    case Op::kSquare: return "square";
    case Op::kSqrt: return "sqrt";
    case Op::kHalfPower: return "half_power";
    case Op::kRoot4: return "root4";
    case Op::kGatherRows: return "gather_rows";
    case Op::kLogSumExp: return "log_sum_exp";
  }
  return "?";
}

double half_power(double t, double eps) {
  return std::pow(t * t + eps, 0.25);
}

double half_power_derivative(double t, double eps) {
  if (t == 0.0) return 0.0;
  return t / (2.0 * std::pow(t * t + eps, 0.75));
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Record r;
  r.op = Op::kLeaf;
  r.value = std::move(value);
  r.requires_grad = requires_grad;
  return push(std::move(r));
}

Var Tape::push(Record record) {
  if (records_.size() >= std::numeric_limits<std::uint32_t>::max()) {
    throw ContractViolation("tape record limit reached");
  }
  records_.push_back(std::move(record));
  return Var{this, static_cast<std::uint32_t>(records_.size() - 1)};
}

std::vector<Tensor> Tape::gradients(Var loss, std::span<const Var> leaves) {
  if (loss.tape != this) {
    throw ContractViolation("loss was not recorded on this tape");
  }
  const Tensor& loss_value = records_[loss.id].value;
  if (loss_value.rank() != 0) {
    throw ContractViolation("gradients() needs a scalar loss, got shape " +
                            shape_to_string(loss_value.shape()));
  }

  std::vector<Tensor> adjoints(loss.id + 1);
  adjoints[loss.id] = Tensor::scalar(1.0);
  last_visits_ = 0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    if (adjoints[id].empty() || !records_[id].requires_grad) continue;
    ++last_visits_;
    if (records_[id].op == Op::kLeaf) continue;
    backprop(id, adjoints[id], adjoints);
    // Intermediate adjoints are dead once propagated.
    if (records_[id].op != Op::kLeaf) adjoints[id] = Tensor();
  }

  std::vector<Tensor> out;
  out.reserve(leaves.size());
  for (const Var& leaf : leaves) {
    if (leaf.tape != this) {
      out.push_back(leaf.tape ? Tensor::zeros_like(leaf.value()) : Tensor());
      continue;
    }
    if (leaf.id < adjoints.size() && !adjoints[leaf.id].empty()) {
      out.push_back(adjoints[leaf.id]);
    } else {
      out.push_back(Tensor::zeros_like(records_[leaf.id].value));
    }
  }
  return out;
}

void Tape::backprop(std::size_t id, const Tensor& g,
                    std::vector<Tensor>& adjoints) const {
  const Record& r = records_[id];
  const Record& a = records_[r.lhs];
  const bool want_a = a.requires_grad;
  const bool want_b = r.op == Op::kMatmul || r.op == Op::kMatmulNT ||
                      r.op == Op::kAdd || r.op == Op::kSub ||
                      r.op == Op::kAddRow || r.op == Op::kMul
                          ? records_[r.rhs].requires_grad
                          : false;
  const auto elementwise = [&](auto&& derivative) {
    Tensor da = Tensor::zeros_like(a.value);
    auto gd = g.data();
    for (std::size_t i = 0; i < da.size(); ++i) {
      da[i] = gd[i] * derivative(i);
    }
    accumulate(adjoints, r.lhs, da);
  };

  switch (r.op) {
    case Op::kLeaf:
      break;
    case Op::kMatmul: {
      const Tensor& b = records_[r.rhs].value;
      const std::size_t m = a.value.rows(), k = a.value.cols(), n = b.cols();
      if (want_a) {
        Tensor da = Tensor::zeros_like(a.value);
        gemm_nt(g.data().data(), b.data().data(), da.data().data(), m, n, k);
        accumulate(adjoints, r.lhs, da);
      }
      if (want_b) {
        Tensor db = Tensor::zeros_like(b);
        gemm_tn(a.value.data().data(), g.data().data(), db.data().data(), m, k,
                n);
        accumulate(adjoints, r.rhs, db);
      }
      break;
    }
    case Op::kMatmulNT: {
      const Tensor& b = records_[r.rhs].value;
      const std::size_t m = a.value.rows(), k = a.value.cols(), n = b.rows();
      if (want_a) {
        Tensor da = Tensor::zeros_like(a.value);
        gemm_nn(g.data().data(), b.data().data(), da.data().data(), m, n, k);
        accumulate(adjoints, r.lhs, da);
      }
      if (want_b) {
        // db[n,k] = g[m,n]^T * a[m,k]
        Tensor db = Tensor::zeros_like(b);
        gemm_tn(g.data().data(), a.value.data().data(), db.data().data(), m, n,
                k);
        accumulate(adjoints, r.rhs, db);
      }
      break;
    }
    case Op::kAdd:
    case Op::kSub: {
      if (want_a) accumulate(adjoints, r.lhs, g);
      if (want_b) {
        if (r.op == Op::kAdd) {
          accumulate(adjoints, r.rhs, g);
        } else {
          Tensor neg = g;
          for (double& v : neg.data()) v = -v;
          accumulate(adjoints, r.rhs, neg);
        }
      }
      break;
    }
    case Op::kAddRow: {
      if (want_a) accumulate(adjoints, r.lhs, g);
      if (want_b) {
        const Tensor& bias = records_[r.rhs].value;
        Tensor db = Tensor::zeros_like(bias);
        const std::size_t m = g.rows(), n = g.cols();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) db[j] += g.at(i, j);
        }
        accumulate(adjoints, r.rhs, db);
      }
      break;
    }
    case Op::kMul: {
      const Tensor& b = records_[r.rhs].value;
      if (want_a) elementwise([&](std::size_t i) { return b[i]; });
      if (want_b) {
        Tensor db = Tensor::zeros_like(b);
        for (std::size_t i = 0; i < db.size(); ++i) db[i] = g[i] * a.value[i];
        accumulate(adjoints, r.rhs, db);
      }
      break;
    }
    case Op::kScale:
      elementwise([&](std::size_t) { return r.param; });
      break;
    case Op::kRelu:
      elementwise([&](std::size_t i) { return a.value[i] > 0.0 ? 1.0 : 0.0; });
      break;
    case Op::kSum: {
      const double gs = g.item();
      Tensor da = Tensor::zeros_like(a.value);
      for (double& v : da.data()) v = gs;
      accumulate(adjoints, r.lhs, da);
      break;
    }
    case Op::kMean: {
      const double gs = g.item() / static_cast<double>(a.value.size());
      Tensor da = Tensor::zeros_like(a.value);
      for (double& v : da.data()) v = gs;
      accumulate(adjoints, r.lhs, da);
      break;
    }
    case Op::kRowSum: {
      Tensor da = Tensor::zeros_like(a.value);
      const std::size_t m = a.value.rows(), n = a.value.cols();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) da.at(i, j) = g[i];
      }
      accumulate(adjoints, r.lhs, da);
      break;
    }
    case Op::kSquare:
      elementwise([&](std::size_t i) { return 2.0 * a.value[i]; });
      break;
    case Op::kSqrt:
      elementwise([&](std::size_t i) {
        const double y = r.value[i];
        return y > 0.0 ? 0.5 / y : 0.0;
      });
      break;
    case Op::kHalfPower:
      elementwise([&](std::size_t i) {
        return half_power_derivative(a.value[i], r.param);
      });
      break;
    case Op::kRoot4:
      elementwise([&](std::size_t i) {
        const double y = r.value[i];  // (s + eps)^(1/4)
        return y > 0.0 ? 0.25 / (y * y * y) : 0.0;
      });
      break;
    case Op::kGatherRows: {
      Tensor da = Tensor::zeros_like(a.value);
      const std::size_t n = a.value.cols();
      for (std::size_t k = 0; k < r.indices.size(); ++k) {
        auto dst = da.row(r.indices[k]);
        for (std::size_t j = 0; j < n; ++j) dst[j] += g.at(k, j);
      }
      accumulate(adjoints, r.lhs, da);
      break;
    }
    case Op::kLogSumExp: {
      Tensor da = Tensor::zeros_like(a.value);
      const std::size_t m = a.value.rows(), n = a.value.cols();
      for (std::size_t i = 0; i < m; ++i) {
        const double lse = r.value[i];
        for (std::size_t j = 0; j < n; ++j) {
          da.at(i, j) = g[i] * std::exp(a.value.at(i, j) - lse);
        }
      }
      accumulate(adjoints, r.lhs, da);
      break;
    }
  }
}

Var matmul(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_rank(x, 2, "matmul");
  require_rank(y, 2, "matmul");
  if (x.cols() != y.rows()) {
    throw ContractViolation("matmul: inner dimensions differ " +
                            shape_to_string(x.shape()) + " x " +
                            shape_to_string(y.shape()));
  }
  Tensor out(Shape{x.rows(), y.cols()});
  gemm_nn(x.data().data(), y.data().data(), out.data().data(), x.rows(),
          x.cols(), y.cols());
  return tape.push(binary(Op::kMatmul, a, b, std::move(out)));
}

Var matmul_nt(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_rank(x, 2, "matmul_nt");
  require_rank(y, 2, "matmul_nt");
  if (x.cols() != y.cols()) {
    throw ContractViolation("matmul_nt: inner dimensions differ " +
                            shape_to_string(x.shape()) + " x " +
                            shape_to_string(y.shape()) + "^T");
  }
  Tensor out(Shape{x.rows(), y.rows()});
  gemm_nt(x.data().data(), y.data().data(), out.data().data(), x.rows(),
          x.cols(), y.rows());
  return tape.push(binary(Op::kMatmulNT, a, b, std::move(out)));
}

Var add(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  return tape.push(binary(Op::kAdd, a, b, std::move(out)));
}

Var sub(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  return tape.push(binary(Op::kSub, a, b, std::move(out)));
}

Var add_row(Var a, Var bias) {
  Tape& tape = common_tape(a, bias);
  const Tensor& x = a.value();
  const Tensor& b = bias.value();
  require_rank(x, 2, "add_row");
  require_rank(b, 1, "add_row");
  if (b.size() != x.cols()) {
    throw ContractViolation("add_row: bias " + shape_to_string(b.shape()) +
                            " does not match " + shape_to_string(x.shape()));
  }
  Tensor out = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
  }
  return tape.push(binary(Op::kAddRow, a, bias, std::move(out)));
}

Var mul(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  return tape.push(binary(Op::kMul, a, b, std::move(out)));
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return tape_of(a).push(unary(Op::kScale, a, std::move(out), factor));
}

Var relu(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return tape_of(a).push(unary(Op::kRelu, a, std::move(out)));
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return tape_of(a).push(unary(Op::kSum, a, Tensor::scalar(s)));
}

Var mean(Var a) {
  const Tensor& x = a.value();
  if (x.empty()) throw ContractViolation("mean of an empty tensor");
  double s = 0.0;
  for (double v : x.data()) s += v;
  return tape_of(a).push(
      unary(Op::kMean, a, Tensor::scalar(s / static_cast<double>(x.size()))));
}

Var row_sum(Var a) {
  const Tensor& x = a.value();
  require_rank(x, 2, "row_sum");
  Tensor out(Shape{x.rows()});
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (double v : x.row(i)) s += v;
    out[i] = s;
  }
  return tape_of(a).push(unary(Op::kRowSum, a, std::move(out)));
}

Var square(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = v * v;
  return tape_of(a).push(unary(Op::kSquare, a, std::move(out)));
}

Var sqrt(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) {
    if (v < 0.0) throw ContractViolation("sqrt of a negative value");
    v = std::sqrt(v);
  }
  return tape_of(a).push(unary(Op::kSqrt, a, std::move(out)));
}

Var half_power(Var a, double eps) {
  if (!(eps >= 0.0)) throw ContractViolation("half_power: eps must be >= 0");
  Tensor out = a.value();
  for (double& v : out.data()) v = half_power(v, eps);
  return tape_of(a).push(unary(Op::kHalfPower, a, std::move(out), eps));
}

Var root4(Var a, double eps) {
  if (!(eps >= 0.0)) throw ContractViolation("root4: eps must be >= 0");
  Tensor out = a.value();
  for (double& v : out.data()) {
    if (v < 0.0) throw ContractViolation("root4 of a negative value");
    v = std::pow(v + eps, 0.25);
  }
  return tape_of(a).push(unary(Op::kRoot4, a, std::move(out), eps));
}

Var gather_rows(Var a, std::vector<std::size_t> indices) {
  const Tensor& x = a.value();
  require_rank(x, 2, "gather_rows");
  Tensor out(Shape{indices.size(), x.cols()});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= x.rows()) {
      throw ContractViolation("gather_rows: index " +
                              std::to_string(indices[k]) + " out of range");
    }
    auto src = x.row(indices[k]);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  Tape::Record r = unary(Op::kGatherRows, a, std::move(out));
  r.indices = std::move(indices);
  return tape_of(a).push(std::move(r));
}

Var log_sum_exp(Var a) {
  const Tensor& x = a.value();
  require_rank(x, 2, "log_sum_exp");
  if (x.cols() == 0) throw ContractViolation("log_sum_exp over zero columns");
  Tensor out(Shape{x.rows()});
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = x.row(i);
    const double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - m);
    out[i] = m + std::log(s);
  }
  return tape_of(a).push(unary(Op::kLogSumExp, a, std::move(out)));
}

std::vector<Tensor> grad(Var loss, std::span<const Var> leaves) {
  return tape_of(loss).gradients(loss, leaves);
}

}  // namespace protoloss
