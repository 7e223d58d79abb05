#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "samgpt/types.hpp"

namespace samgpt {

using NodeId = std::int32_t;
using Edge = std::pair<NodeId, NodeId>;

/// One domain's graph: undirected adjacency in compressed sorted form, a dense
/// feature matrix and per-node class labels.
///
/// Construction canonicalizes the edge list (drops self-loops and duplicate
/// pairs, symmetrizes, sorts neighbor lists) and validates every index, so a
/// GraphBundle that exists always satisfies its invariants.
class GraphBundle {
 public:
  GraphBundle() = default;

  /// Throws ShapeError on out-of-range endpoints/labels or a feature row
  /// count that differs from num_nodes.
  static GraphBundle from_edges(std::string domain_name, std::size_t num_nodes,
                                std::span<const Edge> edges, Matrix features,
                                std::vector<int> labels, std::size_t num_classes);

  const std::string& domain_name() const { return domain_name_; }
  void set_domain_name(std::string name) { domain_name_ = std::move(name); }

  std::size_t num_nodes() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_undirected_edges() const { return neighbors_.size() / 2; }
  std::size_t num_directed_edges() const { return neighbors_.size(); }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features_.cols()); }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {neighbors_.data() + offsets_[v], neighbors_.data() + offsets_[v + 1]};
  }
  std::size_t degree(NodeId v) const {
    return static_cast<std::size_t>(offsets_[v + 1] - offsets_[v]);
  }

  /// Canonical undirected edge list, u < v, lexicographically sorted.
  std::vector<Edge> undirected_edges() const;

  const Matrix& features() const { return features_; }
  /// Replace the feature matrix (e.g. with dimension-aligned features).
  void set_features(Matrix features);

  const std::vector<int>& labels() const { return labels_; }
  int label(NodeId v) const { return labels_[v]; }

  /// Class of the whole graph (ego-networks carry their center's label); -1 if unset.
  int graph_label() const { return graph_label_; }
  void set_graph_label(int y) { graph_label_ = y; }

  friend bool operator==(const GraphBundle&, const GraphBundle&) = default;

 private:
  std::string domain_name_;
  std::vector<std::int64_t> offsets_;
  std::vector<NodeId> neighbors_;
  Matrix features_;
  std::vector<int> labels_;
  std::size_t num_classes_ = 0;
  int graph_label_ = -1;
};

/// Table-1 style structural summary. Edge count follows the directed
/// convention (two entries per undirected edge).
struct DomainStats {
  std::size_t num_nodes = 0;
  std::size_t num_edges = 0;
  double avg_node_degree = 0.0;
  double avg_shortest_path_length = 0.0;
  double avg_clustering_coefficient = 0.0;
};

/// Read a bundle directory (meta.json, edges.tsv, features.tsv, labels.tsv).
/// Throws LoadError with file and line context.
GraphBundle load_bundle(const std::filesystem::path& dir);

/// Write the canonical bundle layout; edges are emitted once per undirected
/// pair, sorted, and floats in shortest round-trip form.
void save_bundle(const GraphBundle& g, const std::filesystem::path& dir);

/// Exact degree and clustering; shortest-path length estimated by BFS from
/// `spl_sample_size` sources drawn without replacement (all nodes when the
/// sample size reaches num_nodes), averaging finite non-zero distances.
DomainStats compute_stats(const GraphBundle& g, std::size_t spl_sample_size, std::uint64_t seed);

/// Mean local clustering coefficient; nodes of degree < 2 contribute 0.
double average_clustering(const GraphBundle& g);

/// BFS hop distances from `sources` up to `max_hops`; unreached nodes get -1.
std::vector<int> hop_distances(const GraphBundle& g, std::span<const NodeId> sources, int max_hops);

/// Induced subgraph on `nodes` (distinct), renumbered in the given order.
/// Features and labels follow their nodes.
GraphBundle induced_subgraph(const GraphBundle& g, std::span<const NodeId> nodes);

/// Induced subgraph on all nodes within `radius` hops of `center`. Node 0 of
/// the result is the center, the rest follow in BFS order (ties by index);
/// the result's graph label is the center's label.
GraphBundle ego_network(const GraphBundle& g, NodeId center, int radius);

/// Node order ego_network uses, without materializing the subgraph.
std::vector<NodeId> ego_nodes(const GraphBundle& g, NodeId center, int radius);

/// Snowball sample of at most `max_nodes` nodes: BFS from random seeds until
/// the budget is filled, then the induced subgraph. Node order is ascending
/// original index. Returns a copy when max_nodes >= num_nodes.
GraphBundle subsample(const GraphBundle& g, std::size_t max_nodes, std::uint64_t seed);

/// Disjoint union; node ids of part k are offset by the sizes of parts < k.
/// Feature widths must agree. Labels and class count follow the parts.
GraphBundle disjoint_union(std::span<const GraphBundle> parts);

}  // namespace samgpt
