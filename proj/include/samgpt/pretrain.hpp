#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "samgpt/checkpoint.hpp"
#include "samgpt/graphstore.hpp"
#include "samgpt/rng.hpp"

namespace samgpt {

struct PretrainConfig {
  double alpha = 1.0;
  double tau = 0.5;
  double edge_drop_ratio = 0.2;
  std::size_t subgraphs_per_domain = 8;
  int subgraph_radius = 2;
  std::size_t steps = 100;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  /// false realizes the token-free ablation: tokens stay all-ones.
  bool train_structure_tokens = true;
  EncoderConfig encoder;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
  nlohmann::ordered_json to_json() const;
  /// Missing keys keep the values of `defaults`.
  static PretrainConfig from_json(const nlohmann::json& j, PretrainConfig defaults);
};

/// `count` centers drawn uniformly from `candidates`, without replacement
/// when count <= candidates.size(), with replacement otherwise.
std::vector<NodeId> sample_centers(std::span<const NodeId> candidates, std::size_t count, Rng& rng);

/// Ego-networks around uniformly drawn centers (all nodes are candidates).
std::vector<GraphBundle> sample_subgraphs(const GraphBundle& g, std::size_t count, int radius, Rng& rng);

/// Removes floor(ratio · E) undirected edges chosen uniformly without
/// replacement. Nodes, features and labels are unchanged.
GraphBundle augment_edge_drop(const GraphBundle& g, double ratio, Rng& rng);

/// Which rows of an embedding matrix are anchors, and each anchor's
/// positive and negative rows.
struct ContrastiveBatch {
  std::vector<Index> anchors;
  std::vector<std::vector<Index>> positives;
  std::vector<std::vector<Index>> negatives;

  /// Rows laid out as [o_0, a_0, b_0, o_1, a_1, b_1, ...]: positives of o_k are
  /// a_k and b_k, negatives are the augmentations of every other anchor.
  static ContrastiveBatch graphcl(std::size_t num_anchors);
  std::size_t rows() const;
  /// Throws std::invalid_argument on empty sets or an anchor in its own negatives.
  void validate() const;
};

/// -Σ_o ln( Σ_{a∈Pos_o} exp(cos(h_a,h_o)/τ) / Σ_{b∈Neg_o} exp(cos(h_b,h_o)/τ) ), 1×1.
Var contrastive_loss(const Var& embeddings, const ContrastiveBatch& batch, double tau);

/// Graph embeddings readout(H^FAL + α·H^SAL) for graphs of source domain
/// `domain`, one row per graph. The graphs are encoded as one disjoint union.
Var embed_fused(Tape& tape, Checkpoint& model, std::span<const GraphBundle> graphs, std::size_t domain);

/// Domain of every anchor slot in one batch: each domain contributes
/// `per_domain` consecutive slots, domains in roster order.
std::vector<std::size_t> anchor_domains(std::size_t num_domains, std::size_t per_domain);

/// Nodes whose `radius`-hop ball contains a non-zero feature row; centers
/// outside this set would produce an all-zero graph embedding.
std::vector<NodeId> informative_centers(const GraphBundle& g, int radius);

/// Fresh model for `roster`: random Θ, all-ones structure and feature tokens.
Checkpoint init_model(const std::vector<std::string>& roster, const PretrainConfig& config);

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<double> losses;  ///< per step, normalized by anchors per batch
};

/// Contrastive pre-training over dimension-aligned source domains. Each step
/// draws `subgraphs_per_domain` anchors from every domain. Throws
/// NumericError when the loss becomes non-finite.
PretrainResult pretrain_run(std::span<const GraphBundle> domains, const PretrainConfig& config,
                            const std::function<void(std::size_t, double)>& on_step = {});

}  // namespace samgpt
