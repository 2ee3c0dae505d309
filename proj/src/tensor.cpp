#include "emodub/tensor.h"

#include <cmath>
#include <limits>

#include "emodub/errors.h"
#include "emodub/rng.h"

namespace emodub {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("from_rows: ragged initializer");
    std::size_t j = 0;
    for (double x : row) m(i, j++) = x;
    ++i;
  }
  return m;
}

Matrix Matrix::row_vector(std::span<const double> values) {
  Matrix m(1, values.size());
  std::copy(values.begin(), values.end(), m.data_.begin());
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::string Matrix::shape_str() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

void gemm_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* o = out.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      const double* br = b.row(p).data();
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
}

void gemm_nt_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* ar = a.row(i).data();
    for (std::size_t j = 0; j < m; ++j) {
      const double* br = b.row(j).data();
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
      out(i, j) += s;
    }
  }
}

void gemm_tn_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t r = 0; r < n; ++r) {
    const double* br = b.row(r).data();
    for (std::size_t i = 0; i < k; ++i) {
      const double av = a(r, i);
      if (av == 0.0) continue;
      double* o = out.row(i).data();
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul " + a.shape_str() + " by " + b.shape_str());
  Matrix out(a.rows(), b.cols());
  gemm_acc(a, b, out);
  return out;
}

void Parameter::init_uniform(std::uint64_t seed, std::size_t fan_in) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in == 0 ? 1 : fan_in));
  auto rng = SplitMix64::keyed(seed, name, 0);
  for (double& x : value.data()) x = rng.uniform(-bound, bound);
  zero_grad();
}

// --- tape --------------------------------------------------------------------

const Matrix& Var::value() const { return tape_->value(*this); }
const Matrix& Var::grad() const { return tape_->grad(*this); }

Var Tape::constant(Matrix value) { return record(std::move(value), nullptr); }

Var Tape::param(Parameter& p) {
  return record(p.value, [&p](Tape&, const Matrix&, const Matrix& g) {
    auto dst = p.grad.data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  });
}

Var Tape::record(Matrix value, BackwardFn backward) {
  Node n;
  n.grad = Matrix(value.rows(), value.cols());
  n.value = std::move(value);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Matrix& Tape::grad_acc(const Var& v) {
  Node& n = nodes_.at(v.id_);
  n.touched = true;
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw StateError("backward on a Var from another tape");
  Node& root = nodes_.at(loss.id_);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw ShapeError("backward needs a 1x1 loss, got " + root.value.shape_str());
  }
  root.grad(0, 0) += 1.0;
  root.touched = true;
  for (std::size_t id = loss.id_ + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.touched || !n.backward) continue;
    n.backward(*this, n.value, n.grad);
  }
}

// --- ops ---------------------------------------------------------------------

namespace {

Tape& same_tape(const Var& a, const Var& b) {
  if (!a.valid() || a.tape() != b.tape()) throw StateError("operands live on different tapes");
  return *a.tape();
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

void add_into(Matrix& dst, const Matrix& src, double s = 1.0) {
  auto d = dst.data();
  auto x = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * x[i];
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require(a.cols() == b.rows(), "matmul " + a.value().shape_str() + " by " + b.value().shape_str());
  return t.record(matmul(a.value(), b.value()), [a, b](Tape& t, const Matrix&, const Matrix& g) {
    gemm_nt_acc(g, t.value(b), t.grad_acc(a));
    gemm_tn_acc(t.value(a), g, t.grad_acc(b));
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require(a.cols() == b.cols(), "matmul_nt " + a.value().shape_str() + " by " + b.value().shape_str());
  Matrix out(a.rows(), b.rows());
  gemm_nt_acc(a.value(), b.value(), out);
  return t.record(std::move(out), [a, b](Tape& t, const Matrix&, const Matrix& g) {
    gemm_acc(g, t.value(b), t.grad_acc(a));
    gemm_tn_acc(g, t.value(a), t.grad_acc(b));
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "add " + a.value().shape_str() + " and " + b.value().shape_str());
  Matrix out = a.value();
  add_into(out, b.value());
  return t.record(std::move(out), [a, b](Tape& t, const Matrix&, const Matrix& g) {
    add_into(t.grad_acc(a), g);
    add_into(t.grad_acc(b), g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "sub " + a.value().shape_str() + " and " + b.value().shape_str());
  Matrix out = a.value();
  add_into(out, b.value(), -1.0);
  return t.record(std::move(out), [a, b](Tape& t, const Matrix&, const Matrix& g) {
    add_into(t.grad_acc(a), g);
    add_into(t.grad_acc(b), g, -1.0);
  });
}

Var add_row(Var a, Var row) {
  Tape& t = same_tape(a, row);
  require(row.rows() == 1 && row.cols() == a.cols(),
          "add_row " + a.value().shape_str() + " with " + row.value().shape_str());
  Matrix out = a.value();
  const Matrix& r = row.value();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += r(0, j);
  }
  return t.record(std::move(out), [a, row](Tape& t, const Matrix&, const Matrix& g) {
    add_into(t.grad_acc(a), g);
    Matrix& gr = t.grad_acc(row);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
    }
  });
}

Var scale(Var a, double s) {
  Matrix out = a.value();
  for (double& x : out.data()) x *= s;
  return a.tape()->record(std::move(out), [a, s](Tape& t, const Matrix&, const Matrix& g) {
    add_into(t.grad_acc(a), g, s);
  });
}

Var concat_cols(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require(a.rows() == b.rows(), "concat_cols " + a.value().shape_str() + " and " + b.value().shape_str());
  const std::size_t ca = a.cols(), cb = b.cols();
  Matrix out(a.rows(), ca + cb);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    std::copy_n(a.value().row(i).data(), ca, out.row(i).data());
    std::copy_n(b.value().row(i).data(), cb, out.row(i).data() + ca);
  }
  return t.record(std::move(out), [a, b, ca, cb](Tape& t, const Matrix&, const Matrix& g) {
    Matrix& ga = t.grad_acc(a);
    Matrix& gb = t.grad_acc(b);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < ca; ++j) ga(i, j) += g(i, j);
      for (std::size_t j = 0; j < cb; ++j) gb(i, j) += g(i, ca + j);
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows of nothing");
  Tape& t = *parts.front().tape();
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    same_tape(parts.front(), p);
    require(p.cols() == cols, "concat_rows column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::size_t at = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + at * cols);
    at += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record(std::move(out), [inputs, cols](Tape& t, const Matrix&, const Matrix& g) {
    std::size_t at = 0;
    for (const Var& p : inputs) {
      Matrix& gp = t.grad_acc(p);
      auto dst = gp.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g.data()[at * cols + i];
      at += gp.rows();
    }
  });
}

Var slice_cols(Var a, std::size_t first, std::size_t count) {
  require(first + count <= a.cols(), "slice_cols past the end of " + a.value().shape_str());
  Matrix out(a.rows(), count);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < count; ++j) out(i, j) = a.value()(i, first + j);
  }
  return a.tape()->record(std::move(out), [a, first, count](Tape& t, const Matrix&, const Matrix& g) {
    Matrix& ga = t.grad_acc(a);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < count; ++j) ga(i, first + j) += g(i, j);
    }
  });
}

namespace {

// y_ij (g_ij - sum_k g_ik y_ik); masked entries have y = 0 and drop out.
void softmax_backward(const Matrix& y, const Matrix& g, Matrix& gx) {
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
    for (std::size_t j = 0; j < y.cols(); ++j) gx(i, j) += y(i, j) * (g(i, j) - dot);
  }
}

Matrix softmax_forward(const Matrix& x, const std::vector<std::uint8_t>* mask) {
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto keep = [&](std::size_t j) { return mask == nullptr || (*mask)[i * x.cols() + j] != 0; };
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (keep(j)) mx = std::max(mx, x(i, j));
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw ArgumentError("softmax row " + std::to_string(i) + " has no unmasked entry");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (!keep(j)) continue;
      y(i, j) = std::exp(x(i, j) - mx);
      sum += y(i, j);
    }
    for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) /= sum;
  }
  return y;
}

}  // namespace

Var softmax_rows(Var a) {
  return a.tape()->record(softmax_forward(a.value(), nullptr),
                          [a](Tape& t, const Matrix& y, const Matrix& g) { softmax_backward(y, g, t.grad_acc(a)); });
}

Var masked_softmax_rows(Var a, std::vector<std::uint8_t> mask) {
  require(mask.size() == a.value().size(), "mask size does not match " + a.value().shape_str());
  return a.tape()->record(softmax_forward(a.value(), &mask),
                          [a](Tape& t, const Matrix& y, const Matrix& g) { softmax_backward(y, g, t.grad_acc(a)); });
}

Var leaky_relu(Var a, double slope) {
  Matrix out = a.value();
  for (double& x : out.data()) x = x > 0.0 ? x : slope * x;
  return a.tape()->record(std::move(out), [a, slope](Tape& t, const Matrix&, const Matrix& g) {
    const auto x = t.value(a).data();
    auto ga = t.grad_acc(a).data();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += (x[i] > 0.0 ? 1.0 : slope) * g.data()[i];
  });
}

Var pairwise_sum(Var u, Var v) {
  Tape& t = same_tape(u, v);
  require(u.cols() == 1 && v.cols() == 1, "pairwise_sum needs column vectors");
  Matrix out(u.rows(), v.rows());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = u.value()(i, 0) + v.value()(j, 0);
  }
  return t.record(std::move(out), [u, v](Tape& t, const Matrix&, const Matrix& g) {
    Matrix& gu = t.grad_acc(u);
    Matrix& gv = t.grad_acc(v);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) {
        gu(i, 0) += g(i, j);
        gv(j, 0) += g(i, j);
      }
    }
  });
}

Var unfold_rows(Var a, std::size_t k) {
  if (k % 2 == 0) throw ConfigError("unfold_rows needs an odd window, got " + std::to_string(k));
  const std::size_t len = a.rows(), c = a.cols();
  const auto half = static_cast<std::ptrdiff_t>(k / 2);
  Matrix out(len, k * c);
  for (std::size_t l = 0; l < len; ++l) {
    for (std::size_t w = 0; w < k; ++w) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l + w) - half;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
      std::copy_n(a.value().row(static_cast<std::size_t>(src)).data(), c, out.row(l).data() + w * c);
    }
  }
  return a.tape()->record(std::move(out), [a, k, half, c](Tape& t, const Matrix&, const Matrix& g) {
    Matrix& ga = t.grad_acc(a);
    const auto len = static_cast<std::ptrdiff_t>(ga.rows());
    for (std::ptrdiff_t l = 0; l < len; ++l) {
      for (std::size_t w = 0; w < k; ++w) {
        const std::ptrdiff_t src = l + static_cast<std::ptrdiff_t>(w) - half;
        if (src < 0 || src >= len) continue;
        for (std::size_t j = 0; j < c; ++j) {
          ga(static_cast<std::size_t>(src), j) += g(static_cast<std::size_t>(l), w * c + j);
        }
      }
    }
  });
}

Var mean_squared_error(Var pred, const Matrix& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(),
          "mse prediction " + pred.value().shape_str() + " vs target " + target.shape_str());
  const double n = static_cast<double>(target.size());
  double s = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = pred.value().data()[i] - target.data()[i];
    s += d * d;
  }
  Matrix out(1, 1, s / n);
  return pred.tape()->record(std::move(out), [pred, target, n](Tape& t, const Matrix&, const Matrix& g) {
    const auto p = t.value(pred).data();
    auto gp = t.grad_acc(pred).data();
    const double coef = 2.0 * g(0, 0) / n;
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += coef * (p[i] - target.data()[i]);
  });
}

Var sum_squares(Var a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x * x;
  return a.tape()->record(Matrix(1, 1, s), [a](Tape& t, const Matrix&, const Matrix& g) {
    const auto x = t.value(a).data();
    auto ga = t.grad_acc(a).data();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * g(0, 0) * x[i];
  });
}

}  // namespace emodub
