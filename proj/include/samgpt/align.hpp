#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "samgpt/error.hpp"
#include "samgpt/tensor.hpp"
#include "samgpt/types.hpp"

namespace samgpt {

/// Result of projecting one domain's features to the shared width.
template <class Scalar>
struct DimAlignment {
  MatrixX<Scalar> features;  ///< n × target_dim
  Index rank = 0;            ///< numerical rank of the input
  Index kept = 0;            ///< nonzero columns, min(target_dim, rank)
};

/// Truncated-SVD dimension alignment: X ≈ U S Vᵀ, returns U_k S_k with columns
/// in descending singular value order, zero-padded to `target_dim` when the
/// rank is smaller. Each left singular vector is signed so its
/// largest-magnitude entry is non-negative (first such entry on ties).
/// Features are not centered.
template <class Derived>
DimAlignment<typename Derived::Scalar> fit_dal(const Eigen::MatrixBase<Derived>& x, Index target_dim) {
  using Scalar = typename Derived::Scalar;
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (x.rows() < 1 || x.cols() < 1) throw ShapeError("fit_dal: empty feature matrix");
  if (target_dim < 1) throw ShapeError("fit_dal: target_dim must be >= 1");
  if (!x.allFinite()) throw NumericError("fit_dal: non-finite feature values");

  Eigen::BDCSVD<Dense> svd(Dense(x), Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const Scalar tol = sv.size() ? sv(0) * static_cast<Scalar>(std::max(x.rows(), x.cols())) *
                                     Eigen::NumTraits<Scalar>::epsilon()
                               : Scalar(0);
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;

  DimAlignment<Scalar> out;
  out.rank = rank;
  out.kept = std::min(target_dim, rank);
  out.features = MatrixX<Scalar>::Zero(x.rows(), target_dim);
  for (Index k = 0; k < out.kept; ++k) {
    auto u = svd.matrixU().col(k);
    Index arg = 0;
    for (Index i = 1; i < u.size(); ++i)
      if (std::abs(u(i)) > std::abs(u(arg))) arg = i;
    const Scalar sign = u(arg) < Scalar(0) ? Scalar(-1) : Scalar(1);
    out.features.col(k) = sign * sv(k) * u;
  }
  return out;
}

/// Applies fit_dal per domain and remembers the achieved rank of each.
class DimAligner {
 public:
  explicit DimAligner(Index target_dim = 50) : target_dim_(target_dim) {}

  Index target_dim() const { return target_dim_; }
  Matrix align(const std::string& domain, const Matrix& features);
  const std::map<std::string, Index>& ranks() const { return ranks_; }

  /// Same as align(), but reuses `cache_dir/<key>/` when present. The key
  /// hashes the raw feature bytes and the target width.
  Matrix align_cached(const std::string& domain, const Matrix& features,
                      const std::filesystem::path& cache_dir);

 private:
  Index target_dim_;
  std::map<std::string, Index> ranks_;
};

/// Cache key for aligned features: hash of the raw feature bytes plus width.
std::string dal_cache_key(const Matrix& features, Index target_dim);

/// Per-source-domain feature tokens f_i (each 1×d̃), applied by row-broadcast
/// multiplication to the dimension-aligned features.
struct FeatureTokens {
  std::vector<Tensor> tokens;

  static FeatureTokens ones(std::size_t num_domains, Index dim, bool trainable);
  std::size_t size() const { return tokens.size(); }
  Index dim() const { return tokens.empty() ? 0 : tokens.front().cols(); }
  /// K × d̃ stack of the token values.
  Matrix stacked() const;
};

/// Downstream feature adaptation: effective token = μ·F + g, where F stacks
/// the frozen pre-trained feature tokens.
struct FeatureAdapter {
  Tensor mixture;  ///< μ, 1×K
  Tensor offset;   ///< g, 1×d̃

  /// μ = 1/K, g = 0, both trainable.
  static FeatureAdapter init(std::size_t num_domains, Index dim);
};

Var apply_fal(const Var& aligned, std::size_t domain_index, FeatureTokens& tokens);
Var apply_fal(const Var& aligned, std::size_t domain_index, const FeatureTokens& tokens);

/// `frozen_stack` is FeatureTokens::stacked() of the checkpoint tokens.
Var feature_adapter_token(FeatureAdapter& adapter, const Matrix& frozen_stack, Tape& tape);
Var apply_fad(const Var& aligned, FeatureAdapter& adapter, const Matrix& frozen_stack);

}  // namespace samgpt
