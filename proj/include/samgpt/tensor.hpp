#pragma once

#include <deque>
#include <algorithm>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "samgpt/types.hpp"

namespace samgpt {

/// A named dense array that may own a gradient buffer. Every learnable or
/// frozen parameter of the model lives in one of these. All arrays are
/// two-dimensional (vectors are 1×d rows, scalars 1×1).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor zeros(Index rows, Index cols, bool requires_grad = false) {
    return Tensor(Matrix::Zero(rows, cols), requires_grad);
  }
  static Tensor ones(Index rows, Index cols, bool requires_grad = false) {
    return Tensor(Matrix::Ones(rows, cols), requires_grad);
  }

  Index rows() const { return value_.rows(); }
  Index cols() const { return value_.cols(); }

  const Matrix& value() const { return value_; }
  Matrix& value() { return value_; }

  bool requires_grad() const { return grad_.has_value(); }
  /// Enabling allocates a zero gradient; disabling drops the buffer.
  void set_requires_grad(bool on);

  /// Throws std::logic_error when the tensor does not require gradients.
  const Matrix& grad() const;
  Matrix& grad();
  void zero_grad();

 private:
  Matrix value_;
  std::optional<Matrix> grad_;
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  /// Whether any gradient-carrying tensor feeds this value.
  bool needs_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Ordered record of primitive operations for reverse-mode differentiation.
/// A tape and the values on it belong to one thread.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Record a value that never receives gradients.
  Var constant(Matrix value);
  /// Record a leaf bound to `t`; backward accumulates into t.grad() when
  /// t.requires_grad(). The tensor must outlive the tape's backward call.
  Var watch(Tensor& t);
  /// Leaf view of a tensor that is never differentiated (frozen parameters).
  Var watch(const Tensor& t) { return constant(t.value()); }

  /// Record an op result. `backward` runs only if the result needs gradients;
  /// it receives d(loss)/d(result) and calls accumulate() on its inputs.
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn backward);

  /// Add `g` into the gradient slot of `v` (no-op when v needs no gradient).
  void accumulate(const Var& v, const Matrix& g);
  template <class Expr>
  void accumulate(const Var& v, const Eigen::MatrixBase<Expr>& g) {
    if (!v.needs_grad()) return;
    grad_slot(v.id()) += g;
  }

  /// Reverse sweep from a 1×1 loss. Leaf tensor gradients accumulate across
  /// calls; intermediate gradients are reset at the start of each call.
  void backward(const Var& loss);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Smallest |x| seen by any relu on this tape (+inf when none). Gradient
  /// checks use it to skip configurations sitting on a kink.
  double kink_distance() const { return kink_distance_; }
  void note_kink_distance(double d) { kink_distance_ = std::min(kink_distance_, d); }

 private:
  struct Node {
    Matrix value;
    bool needs_grad = false;
    Tensor* leaf = nullptr;
    BackwardFn backward;
    Matrix grad;
    bool has_grad = false;
  };
  Matrix& grad_slot(std::size_t id);

  std::deque<Node> nodes_;
  double kink_distance_ = std::numeric_limits<double>::infinity();
};

// ---------------------------------------------------------------------------
// Differentiable operations. All inputs must live on the same tape.

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

/// y = adj · x for a constant sparse matrix; adj may be rectangular
/// (rows: output nodes, cols: input nodes).
Var spmm(std::shared_ptr<const SparseMatrix> adj, const Var& x);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// Elementwise product. `b` may be a 1×d row broadcast over the rows of `a`.
Var mul(const Var& a, const Var& b);
Var scalar_mul(const Var& a, double c);
/// Subgradient 0 at 0.
Var relu(const Var& a);

/// Sum of all entries, 1×1.
Var sum(const Var& a);
/// Column means, 1×d.
Var mean_rows(const Var& a);
/// Row g of the result is the mean of rows groups[g] of `a`. Empty groups are rejected.
Var group_mean(const Var& a, std::shared_ptr<const std::vector<std::vector<Index>>> groups);
Var select_rows(const Var& a, std::vector<Index> rows);
Var concat_rows(std::span<const Var> parts);

/// Each row divided by its Euclidean norm; zero rows are rejected.
Var normalize_rows(const Var& a);
/// Cosine similarity of two 1×d rows, 1×1. Zero-norm inputs are rejected.
Var cosine_sim(const Var& a, const Var& b);
/// out(i) = log Σ_{j : mask(i,j)} exp(s(i,j)), n×1. Every row needs at least one
/// selected entry. Stable under large magnitudes.
Var masked_logsumexp(const Var& s, std::shared_ptr<const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>> mask);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(double c, const Var& a) { return scalar_mul(a, c); }

}  // namespace samgpt
