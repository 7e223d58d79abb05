#include "samgpt/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "samgpt/rng.hpp"

namespace samgpt {

GraphBundle make_synthetic(const SynthConfig& c) {
  if (c.num_classes < 1 || c.num_nodes < c.num_classes)
    throw std::invalid_argument("synth: need at least one node per class");
  if (c.feature_dim < c.num_classes) throw std::invalid_argument("synth: feature_dim must be >= num_classes");
  if (!(c.homophily >= 0.0 && c.homophily <= 1.0) || !(c.topic_affinity >= 0.0 && c.topic_affinity <= 1.0))
    throw std::invalid_argument("synth: probabilities must be in [0, 1]");
  if (!(c.avg_degree >= 0.0)) throw std::invalid_argument("synth: avg_degree must be >= 0");
  Rng rng(c.seed);
  const std::size_t n = c.num_nodes;

  std::vector<int> labels(n);
  for (std::size_t v = 0; v < n; ++v) labels[v] = static_cast<int>(v % c.num_classes);
  rng.shuffle(labels);
  std::vector<std::vector<NodeId>> members(c.num_classes);
  for (std::size_t v = 0; v < n; ++v) members[static_cast<std::size_t>(labels[v])].push_back(static_cast<NodeId>(v));

  std::vector<Edge> edges;
  const auto m = static_cast<std::size_t>(std::llround(c.avg_degree * static_cast<double>(n) / 2.0));
  while (edges.size() < m && n > 1) {
    const auto u = static_cast<NodeId>(rng.below(n));
    const auto& same = members[static_cast<std::size_t>(labels[u])];
    NodeId v = rng.uniform() < c.homophily ? same[rng.below(same.size())] : static_cast<NodeId>(rng.below(n));
    if (u != v) edges.emplace_back(u, v);
  }

  Matrix x = Matrix::Zero(static_cast<Index>(n), static_cast<Index>(c.feature_dim));
  const std::size_t block = c.feature_dim / c.num_classes;
  for (std::size_t v = 0; v < n; ++v) {
    const auto y = static_cast<std::size_t>(labels[v]);
    for (std::size_t w = 0; w < c.words_per_node; ++w) {
      const std::size_t col = rng.uniform() < c.topic_affinity ? y * block + rng.below(block) : rng.below(c.feature_dim);
      x(static_cast<Index>(v), static_cast<Index>(col)) = 1.0;
    }
  }
  return GraphBundle::from_edges(c.name, n, edges, std::move(x), std::move(labels), c.num_classes);
}

}  // namespace samgpt
