#include "samgpt/align.hpp"

#include "samgpt/serialize.hpp"

namespace samgpt {

namespace fs = std::filesystem;

Matrix DimAligner::align(const std::string& domain, const Matrix& features) {
  auto result = fit_dal(features, target_dim_);
  ranks_[domain] = result.rank;
  return std::move(result.features);
}

std::string dal_cache_key(const Matrix& features, Index target_dim) {
  std::string bytes = tensor_bytes(features);
  bytes += "|dal|" + std::to_string(target_dim);
  return sha256_hex(bytes).substr(0, 24) + "_d" + std::to_string(target_dim);
}

Matrix DimAligner::align_cached(const std::string& domain, const Matrix& features,
                                const fs::path& cache_dir) {
  const std::string key = dal_cache_key(features, target_dim_);
  const fs::path entry = cache_dir / key;
  if (fs::exists(entry / "manifest.json")) {
    TensorDir dir(entry);
    if (dir.manifest().value("cache_key", "") == key) {
      ranks_[domain] = dir.manifest().value("rank", Index{0});
      return dir.load("features");
    }
  }
  auto result = fit_dal(features, target_dim_);
  ranks_[domain] = result.rank;
  nlohmann::ordered_json extra;
  extra["cache_key"] = key;
  extra["domain"] = domain;
  extra["target_dim"] = target_dim_;
  extra["rank"] = result.rank;
  save_tensor_dir(entry, {{"features", &result.features}}, extra);
  return std::move(result.features);
}

FeatureTokens FeatureTokens::ones(std::size_t num_domains, Index dim, bool trainable) {
  FeatureTokens f;
  for (std::size_t i = 0; i < num_domains; ++i) f.tokens.push_back(Tensor::ones(1, dim, trainable));
  return f;
}

Matrix FeatureTokens::stacked() const {
  Matrix out(static_cast<Index>(tokens.size()), dim());
  for (std::size_t i = 0; i < tokens.size(); ++i) out.row(static_cast<Index>(i)) = tokens[i].value();
  return out;
}

FeatureAdapter FeatureAdapter::init(std::size_t num_domains, Index dim) {
  FeatureAdapter a;
  a.mixture = Tensor(Matrix::Constant(1, static_cast<Index>(num_domains), 1.0 / static_cast<double>(num_domains)), true);
  a.offset = Tensor::zeros(1, dim, true);
  return a;
}

namespace {

void check_token(const Var& aligned, std::size_t domain_index, const FeatureTokens& tokens) {
  if (domain_index >= tokens.size())
    throw ShapeError("apply_fal: domain index " + std::to_string(domain_index) + " >= " +
                     std::to_string(tokens.size()) + " domains");
  if (tokens.tokens[domain_index].cols() != aligned.cols())
    throw ShapeError("apply_fal: token width " + std::to_string(tokens.tokens[domain_index].cols()) +
                     " != feature width " + std::to_string(aligned.cols()));
}

}  // namespace

Var apply_fal(const Var& aligned, std::size_t domain_index, FeatureTokens& tokens) {
  check_token(aligned, domain_index, tokens);
  return mul(aligned, aligned.tape().watch(tokens.tokens[domain_index]));
}

Var apply_fal(const Var& aligned, std::size_t domain_index, const FeatureTokens& tokens) {
  check_token(aligned, domain_index, tokens);
  return mul(aligned, aligned.tape().watch(tokens.tokens[domain_index]));
}

Var feature_adapter_token(FeatureAdapter& adapter, const Matrix& frozen_stack, Tape& tape) {
  if (adapter.mixture.cols() != frozen_stack.rows())
    throw ShapeError("apply_fad: mixture has " + std::to_string(adapter.mixture.cols()) +
                     " coefficients for " + std::to_string(frozen_stack.rows()) + " tokens");
  if (adapter.offset.cols() != frozen_stack.cols())
    throw ShapeError("apply_fad: offset width differs from token width");
  return matmul(tape.watch(adapter.mixture), tape.constant(frozen_stack)) + tape.watch(adapter.offset);
}

Var apply_fad(const Var& aligned, FeatureAdapter& adapter, const Matrix& frozen_stack) {
  if (frozen_stack.cols() != aligned.cols()) throw ShapeError("apply_fad: token width != feature width");
  return mul(aligned, feature_adapter_token(adapter, frozen_stack, aligned.tape()));
}

}  // namespace samgpt
