#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "samgpt/checkpoint.hpp"
#include "samgpt/encoder.hpp"
#include "samgpt/graphstore.hpp"

namespace samgpt {

enum class TaskKind { node, graph };

TaskKind parse_task_kind(const std::string& s);
std::string to_string(TaskKind kind);

struct AdaptOptions {
  double beta = 1.0;
  std::size_t tune_steps = 100;
  double tune_lr = 1e-2;
  /// false keeps every holistic prompt at all-ones and out of the optimizer.
  bool holistic = true;
  /// false drops the specific path (H^spe) from the fused embedding.
  bool specific = true;
};

/// Learnable downstream state: holistic prompts, specific-prompt
/// coefficients Λ (L × K) and the feature adapter.
struct PromptState {
  std::vector<Tensor> holistic;  ///< p^l_hol, 1 × in_dim(l)
  Tensor coefficients;           ///< Λ, row l holds λ^l_1..λ^l_K
  FeatureAdapter features;
  double alpha = 1.0;
  double beta = 1.0;

  /// p_hol = 1, Λ = 1/K, μ = 1/K, g = 0; α from the checkpoint.
  static PromptState init(const Checkpoint& ckpt, const AdaptOptions& options);
  /// Tensors the optimizer updates under `options`.
  std::vector<Tensor*> trainable(const AdaptOptions& options);
};

/// p^l_spe = Σ_i λ^l_i · t^l_i as a 1 × in_dim(layer) row.
Var specific_prompt(const Var& coefficients, const StructureTokens& tokens, int layer);

/// What to embed: a propagation plan over a target graph (already dimension
/// aligned) and, for graph tasks, the node rows pooled into each graph.
struct EmbedInput {
  PropagationPlan plan;
  Matrix inputs;  ///< rows in plan.input_nodes() order
  std::shared_ptr<const std::vector<std::vector<Index>>> groups;  ///< null for node tasks

  /// Output rows are `nodes`, in order.
  static EmbedInput nodes(const GraphBundle& g, int num_layers, std::span<const NodeId> nodes);
  /// One output row per graph (mean readout), graphs encoded as a disjoint union.
  static EmbedInput graphs(std::span<const GraphBundle> graphs, int num_layers);
  std::size_t instances() const;
};

/// Intermediate embeddings (node level, before readout).
struct AdaptedPaths {
  Var fad;
  Var hol;
  std::optional<Var> spe;
  Var sad;  ///< hol + β·spe (hol when spe is absent)
  Var ad;   ///< fad + α·sad
  Var out;  ///< ad, pooled per graph for graph tasks
};

AdaptedPaths embed_adapted_paths(Tape& tape, const Checkpoint& ckpt, PromptState& prompts,
                                 const EmbedInput& input, const AdaptOptions& options);

/// One row per instance: node rows, or readout per graph.
Var embed_adapted(Tape& tape, const Checkpoint& ckpt, PromptState& prompts, const EmbedInput& input,
                  const AdaptOptions& options);

/// Row c is the mean of the embeddings labeled c. Throws std::invalid_argument
/// when a class in [0, num_classes) has no instance.
Var build_prototypes(const Var& embeddings, std::span<const int> labels, std::size_t num_classes);
Matrix build_prototypes(const Matrix& embeddings, std::span<const int> labels, std::size_t num_classes);

/// -Σ_x ln( exp(cos(h_x,h_{y_x})/τ) / Σ_y exp(cos(h_x,h_y)/τ) ), 1×1.
/// Zero-norm embeddings or prototypes throw NumericError.
Var downstream_loss(const Var& embeddings, std::span<const int> labels, const Var& prototypes, double tau);

/// argmax_y cos(h, h_y) per row; ties go to the lowest class. A zero query
/// row has similarity 0 with every prototype.
std::vector<int> predict(const Matrix& queries, const Matrix& prototypes);

struct TuneResult {
  PromptState prompts;
  Matrix prototypes;  ///< from the support under the final prompts
  std::vector<double> losses;
};

/// Prompt tuning on a support set. The checkpoint is only read.
TuneResult prompt_tune(const Checkpoint& ckpt, const EmbedInput& support, std::span<const int> labels,
                       std::size_t num_classes, const AdaptOptions& options);

/// Embeddings under fixed prompts, no gradients recorded.
Matrix embed_eval(const Checkpoint& ckpt, const PromptState& prompts, const EmbedInput& input,
                  const AdaptOptions& options);

}  // namespace samgpt
