#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "samgpt/align.hpp"
#include "samgpt/encoder.hpp"

namespace samgpt {

/// Everything pre-training produces. The roster order is part of the
/// artifact: specific-prompt coefficients and feature-adapter mixtures index it.
struct Checkpoint {
  EncoderState encoder;
  StructureTokens structure;
  FeatureTokens features;
  std::vector<std::string> roster;
  double alpha = 1.0;
  double tau = 0.5;
  bool structure_tokens_trained = true;
  nlohmann::ordered_json pretrain_config = nlohmann::ordered_json::object();

  std::size_t num_domains() const { return roster.size(); }
  /// Drop every gradient buffer.
  void freeze();
  /// Hyperparameters and roster as written to the manifest.
  nlohmann::ordered_json describe() const;
  /// Named tensors in manifest order.
  std::vector<std::pair<std::string, const Matrix*>> named_tensors() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
/// Loaded checkpoints are frozen.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// SHA-256 over the manifest description and every tensor's file bytes.
std::string checkpoint_hash(const Checkpoint& ckpt);

}  // namespace samgpt
