#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace emodub {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix row_vector(std::span<const double> values);
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  bool all_finite() const;
  std::string shape_str() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// out += a * b
void gemm_acc(const Matrix& a, const Matrix& b, Matrix& out);
// out += a * b^T
void gemm_nt_acc(const Matrix& a, const Matrix& b, Matrix& out);
// out += a^T * b
void gemm_tn_acc(const Matrix& a, const Matrix& b, Matrix& out);
Matrix matmul(const Matrix& a, const Matrix& b);

// Trainable matrix with its gradient buffer.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string name, std::size_t rows, std::size_t cols)
      : name(std::move(name)), value(rows, cols), grad(rows, cols) {}

  void zero_grad() { grad.fill(0.0); }
  // uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) from a stream keyed by (seed, name).
  void init_uniform(std::uint64_t seed, std::size_t fan_in);
};

using ParameterList = std::vector<Parameter*>;

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid as long as the tape lives.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording. Each op appends a node holding its value and a
/// closure that pushes the node's gradient into its inputs. backward() walks
/// the nodes in reverse creation order, which is a valid topological order.
/// A tape is single-threaded; independent tapes share nothing.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_value, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that receives a gradient but propagates nowhere.
  Var constant(Matrix value);
  // Leaf bound to a Parameter; backward adds into p.grad.
  Var param(Parameter& p);
  Var record(Matrix value, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1; loss must be 1x1.
  void backward(Var loss);

  const Matrix& value(const Var& v) const { return nodes_.at(v.id_).value; }
  const Matrix& grad(const Var& v) const { return nodes_.at(v.id_).grad; }
  // Gradient buffer of `v` for accumulation inside backward closures.
  Matrix& grad_acc(const Var& v);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    bool touched = false;
  };
  std::deque<Node> nodes_;
};

// --- differentiable ops ------------------------------------------------------
// All inputs must live on the same tape. Shape violations throw ShapeError.

Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);               // a * b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_row(Var a, Var row);               // row (1 x c) broadcast over rows of a
Var scale(Var a, double s);
Var concat_cols(Var a, Var b);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t first, std::size_t count);
Var softmax_rows(Var a);
// Softmax over entries with mask != 0; masked entries are exactly 0.
// Every row must keep at least one entry.
Var masked_softmax_rows(Var a, std::vector<std::uint8_t> mask);
Var leaky_relu(Var a, double slope);
Var pairwise_sum(Var u, Var v);            // u: n x 1, v: m x 1 -> n x m, u_i + v_j
Var unfold_rows(Var a, std::size_t k);     // L x c -> L x (k c), zero padded, k odd
Var mean_squared_error(Var pred, const Matrix& target);
Var sum_squares(Var a);

}  // namespace emodub
