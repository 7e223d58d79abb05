#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "samgpt/graphstore.hpp"
#include "samgpt/tensor.hpp"

namespace samgpt {

struct EncoderConfig {
  Index input_dim = 50;
  Index hidden_dim = 256;
  int num_layers = 3;
};

/// Layer weights Θ. Layer l maps width in_dim(l) to hidden_dim; no biases.
class EncoderState {
 public:
  EncoderState() = default;

  /// Uniform init in [-1/sqrt(in), 1/sqrt(in)] from `seed`, trainable.
  static EncoderState init(const EncoderConfig& config, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  int num_layers() const { return config_.num_layers; }
  Index in_dim(int layer) const { return layer == 0 ? config_.input_dim : config_.hidden_dim; }
  Index out_dim() const { return config_.hidden_dim; }

  std::vector<Tensor>& weights() { return weights_; }
  const std::vector<Tensor>& weights() const { return weights_; }

  /// Drop gradient buffers; tape views become constants.
  void freeze();
  void unfreeze();
  bool frozen() const;

  /// Record every weight on `tape` (differentiable unless frozen).
  std::vector<Var> bind(Tape& tape);
  std::vector<Var> bind(Tape& tape) const;

  static EncoderState from_weights(const EncoderConfig& config, std::vector<Tensor> weights);

 private:
  EncoderConfig config_;
  std::vector<Tensor> weights_;
};

/// Per-domain, per-layer structure tokens t^l_i (1 × in_dim(l)).
struct StructureTokens {
  std::vector<std::vector<Tensor>> tokens;  ///< [domain][layer]

  static StructureTokens ones(std::size_t num_domains, const EncoderState& encoder, bool trainable);
  std::size_t num_domains() const { return tokens.size(); }
  /// K × in_dim(layer) stack across domains.
  Matrix stacked(int layer) const;
  std::vector<Var> bind(Tape& tape, std::size_t domain);
};

/// Constant propagation operators derived from Ŝ = D̂^{-1/2}(A+I)D̂^{-1/2},
/// split into neighbor messages (off-diagonal) and self contribution.
///
/// A full plan computes every node at every layer. A restricted plan computes
/// layer l only on nodes within (L-l) hops of the targets, which yields the
/// targets' rows exactly while touching only their receptive field.
/// Normalization always uses degrees in the whole graph.
class PropagationPlan {
 public:
  struct Layer {
    std::shared_ptr<const SparseMatrix> neighbor;  ///< rows: layer output nodes, cols: layer input nodes
    std::shared_ptr<const SparseMatrix> self;
  };

  static PropagationPlan full(const GraphBundle& g, int num_layers);
  static PropagationPlan restricted(const GraphBundle& g, int num_layers, std::span<const NodeId> targets);

  int num_layers() const { return static_cast<int>(layers_.size()); }
  const Layer& layer(int l) const { return layers_[static_cast<std::size_t>(l)]; }
  /// Graph nodes whose input features feed layer 0, in row order.
  const std::vector<NodeId>& input_nodes() const { return input_nodes_; }
  /// Graph nodes of the output rows, in row order.
  const std::vector<NodeId>& output_nodes() const { return output_nodes_; }

  /// Gather input rows of `features` in input_nodes() order.
  Matrix gather_inputs(const Matrix& features) const;

 private:
  std::vector<Layer> layers_;
  std::vector<NodeId> input_nodes_;
  std::vector<NodeId> output_nodes_;
};

/// Message-passing encoder. For each layer l:
///   Z = Ŝ_off · (H ⊙ m^l) + diag(ŝ) · H,   H' = act(Z · W^l)
/// with act = relu except on the last layer. An empty `modulators` span
/// skips the elementwise product entirely (unmodulated aggregation).
Var encode(const PropagationPlan& plan, const Var& inputs, std::span<const Var> weights,
           std::span<const Var> modulators = {});

/// Feature path: unmodulated encoding; feature tokens act on `inputs` only.
inline Var encode_feature_path(const PropagationPlan& plan, const Var& inputs, std::span<const Var> weights) {
  return encode(plan, inputs, weights);
}

/// primary + coeff · secondary.
Var fuse(const Var& primary, const Var& secondary, double coeff);

/// Mean over node rows.
inline Var readout(const Var& node_embeddings) { return mean_rows(node_embeddings); }

}  // namespace samgpt
