#include "samgpt/tensor.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "samgpt/error.hpp"

namespace samgpt {

namespace {

std::string shape_str(Index r, Index c) {
  return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

void check_same_tape(const Var& a, const Var& b, const char* op) {
  if (&a.tape() != &b.tape()) throw std::logic_error(std::string(op) + ": operands on different tapes");
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Matrix value, bool requires_grad) : value_(std::move(value)) {
  set_requires_grad(requires_grad);
}

void Tensor::set_requires_grad(bool on) {
  if (on && !grad_) grad_ = Matrix::Zero(value_.rows(), value_.cols());
  if (!on) grad_.reset();
}

const Matrix& Tensor::grad() const {
  if (!grad_) throw std::logic_error("Tensor::grad: tensor does not require gradients");
  return *grad_;
}

Matrix& Tensor::grad() {
  if (!grad_) throw std::logic_error("Tensor::grad: tensor does not require gradients");
  return *grad_;
}

void Tensor::zero_grad() {
  if (grad_) grad_->setZero();
}

// ---------------------------------------------------------------------------
// Tape

const Matrix& Var::value() const { return tape_->value(id_); }
bool Var::needs_grad() const { return tape_->needs_grad(id_); }

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::watch(Tensor& t) {
  Node n;
  n.value = t.value();
  n.needs_grad = t.requires_grad();
  n.leaf = n.needs_grad ? &t : nullptr;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::span<const Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw std::logic_error("Tape::record: input from another tape");
    n.needs_grad = n.needs_grad || in.needs_grad();
  }
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Matrix& Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accumulate(const Var& v, const Matrix& g) {
  if (!v.needs_grad()) return;
  grad_slot(v.id()) += g;
}

void Tape::backward(const Var& loss) {
  if (&loss.tape() != this) throw std::logic_error("Tape::backward: loss from another tape");
  if (loss.rows() != 1 || loss.cols() != 1)
    throw ShapeError("backward: loss must be 1x1, got " + shape_str(loss.rows(), loss.cols()));
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  if (!loss.needs_grad()) return;
  grad_slot(loss.id()).setOnes();
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    if (n.leaf) {
      n.leaf->grad() += n.grad;
    } else if (n.backward) {
      // grad of node i is final here: every consumer has a larger index
      n.backward(*this, n.grad);
    }
  }
}

// ---------------------------------------------------------------------------
// Operations

Var matmul(const Var& a, const Var& b) {
  check_same_tape(a, b, "matmul");
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions differ " + shape_str(a.rows(), a.cols()) + " * " +
                     shape_str(b.rows(), b.cols()));
  Matrix out = a.value() * b.value();
  Var inputs[] = {a, b};
  return a.tape().record(std::move(out), inputs, [a, b](Tape& t, const Matrix& g) {
    if (a.needs_grad()) t.accumulate(a, g * b.value().transpose());
    if (b.needs_grad()) t.accumulate(b, a.value().transpose() * g);
  });
}

Var transpose(const Var& a) {
  Matrix out = a.value().transpose();
  return a.tape().record(std::move(out), std::span<const Var>(&a, 1),
                         [a](Tape& t, const Matrix& g) { t.accumulate(a, g.transpose()); });
}

Var spmm(std::shared_ptr<const SparseMatrix> adj, const Var& x) {
  if (!adj) throw std::invalid_argument("spmm: null matrix");
  if (adj->cols() != x.rows())
    throw ShapeError("spmm: matrix " + shape_str(adj->rows(), adj->cols()) + " vs input " +
                     shape_str(x.rows(), x.cols()));
  Matrix out = (*adj) * x.value();
  Var inputs[] = {x};
  return x.tape().record(std::move(out), inputs, [adj, x](Tape& t, const Matrix& g) {
    t.accumulate(x, adj->transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  check_same_tape(a, b, "add");
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("add: shapes differ " + shape_str(a.rows(), a.cols()) + " vs " +
                     shape_str(b.rows(), b.cols()));
  Matrix out = a.value() + b.value();
  Var inputs[] = {a, b};
  return a.tape().record(std::move(out), inputs, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_tape(a, b, "sub");
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("sub: shapes differ " + shape_str(a.rows(), a.cols()) + " vs " +
                     shape_str(b.rows(), b.cols()));
  Matrix out = a.value() - b.value();
  Var inputs[] = {a, b};
  return a.tape().record(std::move(out), inputs, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (b.needs_grad()) t.accumulate(b, -g);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_tape(a, b, "mul");
  Var inputs[] = {a, b};
  if (a.rows() == b.rows() && a.cols() == b.cols()) {
    Matrix out = a.value().cwiseProduct(b.value());
    return a.tape().record(std::move(out), inputs, [a, b](Tape& t, const Matrix& g) {
      if (a.needs_grad()) t.accumulate(a, g.cwiseProduct(b.value()));
      if (b.needs_grad()) t.accumulate(b, g.cwiseProduct(a.value()));
    });
  }
  if (b.rows() == 1 && b.cols() == a.cols()) {
    Matrix out = a.value().array().rowwise() * b.value().row(0).array();
    return a.tape().record(std::move(out), inputs, [a, b](Tape& t, const Matrix& g) {
      if (a.needs_grad()) {
        Matrix ga = g.array().rowwise() * b.value().row(0).array();
        t.accumulate(a, ga);
      }
      if (b.needs_grad()) t.accumulate(b, g.cwiseProduct(a.value()).colwise().sum());
    });
  }
  throw ShapeError("mul: cannot broadcast " + shape_str(b.rows(), b.cols()) + " over " +
                   shape_str(a.rows(), a.cols()));
}

Var scalar_mul(const Var& a, double c) {
  Matrix out = c * a.value();
  Var inputs[] = {a};
  return a.tape().record(std::move(out), inputs,
                         [a, c](Tape& t, const Matrix& g) { t.accumulate(a, c * g); });
}

Var relu(const Var& a) {
  if (a.value().size()) a.tape().note_kink_distance(a.value().cwiseAbs().minCoeff());
  Matrix out = a.value().cwiseMax(0.0);
  Var inputs[] = {a};
  return a.tape().record(std::move(out), inputs, [a](Tape& t, const Matrix& g) {
    Matrix ga = (a.value().array() > 0.0).select(g, 0.0);
    t.accumulate(a, ga);
  });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  Var inputs[] = {a};
  return a.tape().record(std::move(out), inputs, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean_rows(const Var& a) {
  if (a.rows() == 0 || a.cols() == 0) throw ShapeError("mean_rows: empty input");
  // row-by-row sum, same order as group_mean so the two readouts agree bit for bit
  RowVector acc = RowVector::Zero(a.cols());
  for (Index r = 0; r < a.rows(); ++r) acc += a.value().row(r);
  Matrix out = acc / static_cast<double>(a.rows());
  Var inputs[] = {a};
  return a.tape().record(std::move(out), inputs, [a](Tape& t, const Matrix& g) {
    const double inv = 1.0 / static_cast<double>(a.rows());
    Matrix ga = (inv * g).replicate(a.rows(), 1);
    t.accumulate(a, ga);
  });
}

Var group_mean(const Var& a, std::shared_ptr<const std::vector<std::vector<Index>>> groups) {
  if (!groups || groups->empty()) throw ShapeError("group_mean: no groups");
  Matrix out(static_cast<Index>(groups->size()), a.cols());
  for (std::size_t k = 0; k < groups->size(); ++k) {
    const auto& rows = (*groups)[k];
    if (rows.empty()) throw ShapeError("group_mean: group " + std::to_string(k) + " is empty");
    RowVector acc = RowVector::Zero(a.cols());
    for (Index r : rows) {
      if (r < 0 || r >= a.rows()) throw ShapeError("group_mean: row index out of range");
      acc += a.value().row(r);
    }
    out.row(static_cast<Index>(k)) = acc / static_cast<double>(rows.size());
  }
  Var inputs[] = {a};
  return a.tape().record(std::move(out), inputs, [a, groups](Tape& t, const Matrix& g) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t k = 0; k < groups->size(); ++k) {
      const auto& rows = (*groups)[k];
      const double inv = 1.0 / static_cast<double>(rows.size());
      for (Index r : rows) ga.row(r) += inv * g.row(static_cast<Index>(k));
    }
    t.accumulate(a, ga);
  });
}

Var select_rows(const Var& a, std::vector<Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) throw ShapeError("select_rows: row index out of range");
    out.row(static_cast<Index>(i)) = a.value().row(rows[i]);
  }
  Var inputs[] = {a};
  return a.tape().record(std::move(out), inputs, [a, rows = std::move(rows)](Tape& t, const Matrix& g) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) ga.row(rows[i]) += g.row(static_cast<Index>(i));
    t.accumulate(a, ga);
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  Index total = 0;
  const Index cols = parts.front().cols();
  for (const Var& p : parts) {
    check_same_tape(parts.front(), p, "concat_rows");
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    total += p.rows();
  }
  Matrix out(total, cols);
  Index offset = 0;
  for (const Var& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return parts.front().tape().record(std::move(out), parts, [saved](Tape& t, const Matrix& g) {
    Index off = 0;
    for (const Var& p : saved) {
      if (p.needs_grad()) t.accumulate(p, Matrix(g.middleRows(off, p.rows())));
      off += p.rows();
    }
  });
}

Var normalize_rows(const Var& a) {
  Eigen::VectorXd norms = a.value().rowwise().norm();
  for (Index i = 0; i < norms.size(); ++i)
    if (!(norms(i) > 0.0)) throw NumericError("normalize_rows: row " + std::to_string(i) + " has zero norm");
  Matrix out = norms.cwiseInverse().asDiagonal() * a.value();
  Var inputs[] = {a};
  return a.tape().record(out, inputs, [a, y = out, norms](Tape& t, const Matrix& g) {
    // d(x/|x|) = (g - y <g, y>) / |x|, row by row
    Eigen::VectorXd proj = g.cwiseProduct(y).rowwise().sum();
    Matrix ga = norms.cwiseInverse().asDiagonal() * (g - proj.asDiagonal() * y);
    t.accumulate(a, ga);
  });
}

Var cosine_sim(const Var& a, const Var& b) {
  check_same_tape(a, b, "cosine_sim");
  if (a.rows() != 1 || b.rows() != 1 || a.cols() != b.cols() || a.cols() < 1)
    throw ShapeError("cosine_sim: expects two 1xd rows, got " + shape_str(a.rows(), a.cols()) +
                     " and " + shape_str(b.rows(), b.cols()));
  const double na = a.value().norm();
  const double nb = b.value().norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw NumericError("cosine_sim: zero-norm input");
  const double dot = a.value().row(0).dot(b.value().row(0));
  Matrix out(1, 1);
  out(0, 0) = dot / (na * nb);
  const double c = out(0, 0);
  Var inputs[] = {a, b};
  return a.tape().record(std::move(out), inputs, [a, b, na, nb, c](Tape& t, const Matrix& g) {
    const double s = g(0, 0);
    if (a.needs_grad())
      t.accumulate(a, s * (b.value() / (na * nb) - c * a.value() / (na * na)));
    if (b.needs_grad())
      t.accumulate(b, s * (a.value() / (na * nb) - c * b.value() / (nb * nb)));
  });
}

Var masked_logsumexp(const Var& s,
                     std::shared_ptr<const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>> mask) {
  if (!mask || mask->rows() != s.rows() || mask->cols() != s.cols())
    throw ShapeError("masked_logsumexp: mask shape differs from input");
  const Index n = s.rows();
  Matrix out(n, 1);
  Matrix weights = Matrix::Zero(s.rows(), s.cols());  // softmax over the selected entries
  for (Index i = 0; i < n; ++i) {
    double hi = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (Index j = 0; j < s.cols(); ++j)
      if ((*mask)(i, j)) {
        hi = std::max(hi, s.value()(i, j));
        any = true;
      }
    if (!any) throw ShapeError("masked_logsumexp: row " + std::to_string(i) + " selects nothing");
    double total = 0.0;
    for (Index j = 0; j < s.cols(); ++j)
      if ((*mask)(i, j)) {
        weights(i, j) = std::exp(s.value()(i, j) - hi);
        total += weights(i, j);
      }
    weights.row(i) /= total;
    out(i, 0) = hi + std::log(total);
  }
  Var inputs[] = {s};
  return s.tape().record(std::move(out), inputs, [s, weights = std::move(weights)](Tape& t, const Matrix& g) {
    Matrix gs = g.col(0).asDiagonal() * weights;
    t.accumulate(s, gs);
  });
}

}  // namespace samgpt
