#pragma once

// Reverse-mode differentiation over a flat, append-only record of primitive
// ops. Every op appends one record whose inputs were all appended earlier, so
// the record list is already in topological order and the backward pass is a
// single reverse sweep.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "protoloss/tensor.hpp"

namespace protoloss {

class Tape;

enum class Op : std::uint8_t {
  kLeaf,
  kMatmul,      // a[m,k] * b[k,n]
  kMatmulNT,    // a[m,k] * b[n,k]^T
  kAdd,
  kSub,
  kAddRow,      // a[m,n] + b[n] broadcast over rows (bias add)
  kMul,         // elementwise
  kScale,       // a * constant
  kRelu,
  kSum,         // all elements -> scalar
  kMean,        // all elements -> scalar
  kRowSum,      // a[m,n] -> [m]
  kSquare,
  kSqrt,
  kHalfPower,   // (t^2 + eps)^(1/4), elementwise
  kRoot4,       // (s + eps)^(1/4), elementwise, s >= 0
  kGatherRows,  // a[m,n], indices[k] -> [k,n]
  kLogSumExp,   // a[m,n] -> [m], row-wise
};

const char* op_name(Op op);

// Handle to a value recorded on a tape. Cheap to copy; valid as long as the
// tape lives.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

class Tape {
 public:
  struct Record {
    Op op = Op::kLeaf;
    std::uint32_t lhs = 0;
    std::uint32_t rhs = 0;
    Tensor value;
    bool requires_grad = false;
    double param = 0.0;                // scale factor or eps
    std::vector<std::size_t> indices;  // gather indices
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  std::size_t size() const { return records_.size(); }
  const Record& record(std::size_t id) const { return records_[id]; }

  // Gradient of a rank-0 `loss` with respect to each of `leaves`. Leaves the
  // loss does not depend on (or that live on another tape) get zeros.
  std::vector<Tensor> gradients(Var loss, std::span<const Var> leaves);

  // Number of records whose adjoint rule ran during the last gradients()
  // call. Each record is visited at most once per pass.
  std::size_t last_backward_visits() const { return last_visits_; }

  Var push(Record record);

 private:
  void backprop(std::size_t id, const Tensor& adjoint,
                std::vector<Tensor>& adjoints) const;

  std::deque<Record> records_;
  std::size_t last_visits_ = 0;
};

inline const Tensor& Var::value() const { return tape->record(id).value; }

// Primitive ops. Inputs must share a tape; shape mismatches throw
// ContractViolation.
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_row(Var a, Var bias);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var relu(Var a);
Var sum(Var a);
Var mean(Var a);
Var row_sum(Var a);
Var square(Var a);
// Adjoint at exactly 0 is taken as 0.
Var sqrt(Var a);
Var half_power(Var a, double eps);
Var root4(Var a, double eps);
Var gather_rows(Var a, std::vector<std::size_t> indices);
Var log_sum_exp(Var a);

// Convenience wrapper around Tape::gradients.
std::vector<Tensor> grad(Var loss, std::span<const Var> leaves);

// Scalar form of half_power, shared by metric code that reports values
// without a tape.
double half_power(double t, double eps);
double half_power_derivative(double t, double eps);

}  // namespace protoloss
