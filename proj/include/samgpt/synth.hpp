#pragma once

#include <cstdint>
#include <string>

#include "samgpt/graphstore.hpp"

namespace samgpt {

/// Planted-partition graph with class-correlated bag-of-words features.
struct SynthConfig {
  std::string name = "synth";
  std::size_t num_nodes = 300;
  std::size_t num_classes = 3;
  std::size_t feature_dim = 64;
  double avg_degree = 4.0;
  double homophily = 0.8;        ///< probability an edge stays inside the class
  std::size_t words_per_node = 8;
  double topic_affinity = 0.7;   ///< probability a word comes from the class topic
  std::uint64_t seed = 0;
};

/// Labels are balanced (node v starts in class v mod C, then shuffled).
/// Class c's topic is a contiguous block of feature columns.
GraphBundle make_synthetic(const SynthConfig& config);

}  // namespace samgpt
