#include "samgpt/graphstore.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "samgpt/error.hpp"
#include "samgpt/rng.hpp"
#include "samgpt/textio.hpp"

namespace samgpt {

namespace fs = std::filesystem;

GraphBundle GraphBundle::from_edges(std::string domain_name, std::size_t num_nodes,
                                    std::span<const Edge> edges, Matrix features,
                                    std::vector<int> labels, std::size_t num_classes) {
  if (static_cast<std::size_t>(features.rows()) != num_nodes)
    throw ShapeError("feature rows (" + std::to_string(features.rows()) + ") != num_nodes (" +
                     std::to_string(num_nodes) + ")");
  if (labels.size() != num_nodes)
    throw ShapeError("label count (" + std::to_string(labels.size()) + ") != num_nodes (" +
                     std::to_string(num_nodes) + ")");
  for (std::size_t v = 0; v < num_nodes; ++v)
    if (labels[v] < 0 || static_cast<std::size_t>(labels[v]) >= num_classes)
      throw ShapeError("label " + std::to_string(labels[v]) + " of node " + std::to_string(v) +
                       " outside [0, " + std::to_string(num_classes) + ")");

  std::vector<Edge> directed;
  directed.reserve(edges.size() * 2);
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= num_nodes ||
        static_cast<std::size_t>(v) >= num_nodes)
      throw ShapeError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                       ") references a node outside [0, " + std::to_string(num_nodes) + ")");
    if (u == v) continue;
    directed.emplace_back(u, v);
    directed.emplace_back(v, u);
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

  GraphBundle g;
  g.domain_name_ = std::move(domain_name);
  g.num_classes_ = num_classes;
  g.features_ = std::move(features);
  g.labels_ = std::move(labels);
  g.offsets_.assign(num_nodes + 1, 0);
  g.neighbors_.reserve(directed.size());
  for (auto [u, v] : directed) {
    ++g.offsets_[u + 1];
    g.neighbors_.push_back(v);
  }
  for (std::size_t v = 0; v < num_nodes; ++v) g.offsets_[v + 1] += g.offsets_[v];
  return g;
}

std::vector<Edge> GraphBundle::undirected_edges() const {
  std::vector<Edge> out;
  out.reserve(num_undirected_edges());
  for (std::size_t u = 0; u < num_nodes(); ++u)
    for (NodeId v : neighbors(static_cast<NodeId>(u)))
      if (static_cast<NodeId>(u) < v) out.emplace_back(static_cast<NodeId>(u), v);
  return out;
}

void GraphBundle::set_features(Matrix features) {
  if (static_cast<std::size_t>(features.rows()) != num_nodes())
    throw ShapeError("set_features: row count mismatch");
  features_ = std::move(features);
}

// ---------------------------------------------------------------------------
// Bundle IO

namespace {

struct Meta {
  std::string domain_name;
  std::size_t num_nodes = 0;
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
};

Meta read_meta(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.string() + ": missing file");
  nlohmann::json j;
  try {
    in >> j;
    Meta m;
    m.domain_name = j.at("domain_name").get<std::string>();
    m.num_nodes = j.at("num_nodes").get<std::size_t>();
    m.feature_dim = j.at("feature_dim").get<std::size_t>();
    m.num_classes = j.at("num_classes").get<std::size_t>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

}  // namespace

GraphBundle load_bundle(const fs::path& dir) {
  const Meta meta = read_meta(dir / "meta.json");

  std::vector<Edge> edges;
  {
    const fs::path path = dir / "edges.tsv";
    LineReader reader(path);
    std::vector<std::string_view> fields;
    while (auto line = reader.next()) {
      split_fields(*line, '\t', fields);
      if (fields.empty()) continue;
      if (fields.size() != 2) reader.fail("expected 2 fields, got " + std::to_string(fields.size()));
      long long u = reader.parse_int(fields[0]);
      long long v = reader.parse_int(fields[1]);
      if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= meta.num_nodes ||
          static_cast<std::size_t>(v) >= meta.num_nodes)
        reader.fail("node index out of range [0, " + std::to_string(meta.num_nodes) + ")");
      edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    }
  }

  Matrix features(meta.num_nodes, meta.feature_dim);
  {
    const fs::path path = dir / "features.tsv";
    LineReader reader(path);
    std::vector<std::string_view> fields;
    std::size_t row = 0;
    while (auto line = reader.next()) {
      split_fields(*line, '\t', fields);
      if (fields.empty()) continue;
      if (row >= meta.num_nodes) reader.fail("more feature rows than num_nodes");
      if (fields.size() != meta.feature_dim)
        reader.fail("expected " + std::to_string(meta.feature_dim) + " columns, got " +
                    std::to_string(fields.size()));
      for (std::size_t c = 0; c < fields.size(); ++c)
        features(static_cast<Index>(row), static_cast<Index>(c)) = reader.parse_double(fields[c]);
      ++row;
    }
    if (row != meta.num_nodes)
      throw LoadError(path.string() + ": " + std::to_string(row) + " rows, meta says " +
                      std::to_string(meta.num_nodes));
  }

  std::vector<int> labels;
  {
    const fs::path path = dir / "labels.tsv";
    LineReader reader(path);
    std::vector<std::string_view> fields;
    while (auto line = reader.next()) {
      split_fields(*line, '\t', fields);
      if (fields.empty()) continue;
      if (fields.size() != 1) reader.fail("expected one label per line");
      long long y = reader.parse_int(fields[0]);
      if (y < 0 || static_cast<std::size_t>(y) >= meta.num_classes)
        reader.fail("label out of range [0, " + std::to_string(meta.num_classes) + ")");
      if (labels.size() >= meta.num_nodes) reader.fail("more labels than num_nodes");
      labels.push_back(static_cast<int>(y));
    }
    if (labels.size() != meta.num_nodes)
      throw LoadError(path.string() + ": " + std::to_string(labels.size()) +
                      " labels, meta says " + std::to_string(meta.num_nodes));
  }

  return GraphBundle::from_edges(meta.domain_name, meta.num_nodes, edges, std::move(features),
                                 std::move(labels), meta.num_classes);
}

void save_bundle(const GraphBundle& g, const fs::path& dir) {
  fs::create_directories(dir);
  {
    nlohmann::ordered_json j;
    j["domain_name"] = g.domain_name();
    j["num_nodes"] = g.num_nodes();
    j["feature_dim"] = g.feature_dim();
    j["num_classes"] = g.num_classes();
    std::ofstream out(dir / "meta.json");
    out << j.dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "edges.tsv");
    for (auto [u, v] : g.undirected_edges()) out << u << '\t' << v << '\n';
  }
  {
    std::ofstream out(dir / "features.tsv");
    std::string line;
    for (Index r = 0; r < g.features().rows(); ++r) {
      line.clear();
      for (Index c = 0; c < g.features().cols(); ++c) {
        if (c) line.push_back('\t');
        append_double(line, g.features()(r, c));
      }
      line.push_back('\n');
      out << line;
    }
  }
  {
    std::ofstream out(dir / "labels.tsv");
    for (int y : g.labels()) out << y << '\n';
  }
  if (!fs::exists(dir / "labels.tsv")) throw LoadError(dir.string() + ": write failed");
}

// ---------------------------------------------------------------------------
// Structure

std::vector<int> hop_distances(const GraphBundle& g, std::span<const NodeId> sources, int max_hops) {
  std::vector<int> dist(g.num_nodes(), -1);
  std::vector<NodeId> frontier;
  for (NodeId s : sources) {
    if (dist[s] < 0) {
      dist[s] = 0;
      frontier.push_back(s);
    }
  }
  std::vector<NodeId> next;
  for (int hop = 1; hop <= max_hops && !frontier.empty(); ++hop) {
    next.clear();
    for (NodeId u : frontier)
      for (NodeId v : g.neighbors(u))
        if (dist[v] < 0) {
          dist[v] = hop;
          next.push_back(v);
        }
    frontier.swap(next);
  }
  return dist;
}

double average_clustering(const GraphBundle& g) {
  const std::size_t n = g.num_nodes();
  if (n == 0) return 0.0;
  std::vector<char> mark(n, 0);
  double total = 0.0;
  for (std::size_t u = 0; u < n; ++u) {
    auto nu = g.neighbors(static_cast<NodeId>(u));
    const std::size_t k = nu.size();
    if (k < 2) continue;
    for (NodeId v : nu) mark[v] = 1;
    std::size_t links = 0;
    for (NodeId v : nu)
      for (NodeId w : g.neighbors(v))
        if (mark[w]) ++links;
    for (NodeId v : nu) mark[v] = 0;
    // every triangle edge among neighbors was seen from both ends
    total += static_cast<double>(links) / static_cast<double>(k * (k - 1));
  }
  return total / static_cast<double>(n);
}

DomainStats compute_stats(const GraphBundle& g, std::size_t spl_sample_size, std::uint64_t seed) {
  const std::size_t n = g.num_nodes();
  if (n == 0) throw std::invalid_argument("compute_stats: empty graph");
  if (spl_sample_size == 0) throw std::invalid_argument("compute_stats: spl_sample_size must be >= 1");

  DomainStats s;
  s.num_nodes = n;
  s.num_edges = g.num_directed_edges();
  s.avg_node_degree = static_cast<double>(s.num_edges) / static_cast<double>(n);
  s.avg_clustering_coefficient = average_clustering(g);

  std::vector<std::size_t> sources;
  if (spl_sample_size >= n) {
    sources.resize(n);
    for (std::size_t i = 0; i < n; ++i) sources[i] = i;
  } else {
    Rng rng(seed);
    sources = rng.sample_without_replacement(n, spl_sample_size);
  }

  double sum = 0.0;
  std::uint64_t count = 0;
  std::vector<int> dist(n);
  std::deque<NodeId> queue;
  for (std::size_t src : sources) {
    std::fill(dist.begin(), dist.end(), -1);
    dist[src] = 0;
    queue.assign(1, static_cast<NodeId>(src));
    while (!queue.empty()) {
      NodeId u = queue.front();
      queue.pop_front();
      for (NodeId v : g.neighbors(u))
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          sum += dist[v];
          ++count;
          queue.push_back(v);
        }
    }
  }
  s.avg_shortest_path_length = count ? sum / static_cast<double>(count) : 0.0;
  return s;
}

GraphBundle induced_subgraph(const GraphBundle& g, std::span<const NodeId> nodes) {
  std::unordered_map<NodeId, NodeId> index;
  index.reserve(nodes.size() * 2);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!index.emplace(nodes[i], static_cast<NodeId>(i)).second)
      throw std::invalid_argument("induced_subgraph: duplicate node " + std::to_string(nodes[i]));
  }
  std::vector<Edge> edges;
  Matrix feats(static_cast<Index>(nodes.size()), g.features().cols());
  std::vector<int> labels(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const NodeId u = nodes[i];
    feats.row(static_cast<Index>(i)) = g.features().row(u);
    labels[i] = g.label(u);
    for (NodeId v : g.neighbors(u)) {
      auto it = index.find(v);
      if (it != index.end() && static_cast<NodeId>(i) < it->second)
        edges.emplace_back(static_cast<NodeId>(i), it->second);
    }
  }
  return GraphBundle::from_edges(g.domain_name(), nodes.size(), edges, std::move(feats),
                                 std::move(labels), g.num_classes());
}

std::vector<NodeId> ego_nodes(const GraphBundle& g, NodeId center, int radius) {
  if (center < 0 || static_cast<std::size_t>(center) >= g.num_nodes())
    throw std::out_of_range("ego_network: center " + std::to_string(center) + " out of range");
  if (radius < 1) throw std::invalid_argument("ego_network: radius must be >= 1");
  std::vector<NodeId> order{center};
  std::unordered_map<NodeId, int> seen{{center, 0}};
  std::size_t begin = 0;
  for (int hop = 1; hop <= radius; ++hop) {
    const std::size_t end = order.size();
    std::vector<NodeId> layer;
    for (std::size_t i = begin; i < end; ++i)
      for (NodeId v : g.neighbors(order[i]))
        if (seen.emplace(v, hop).second) layer.push_back(v);
    std::sort(layer.begin(), layer.end());
    order.insert(order.end(), layer.begin(), layer.end());
    begin = end;
    if (layer.empty()) break;
  }
  return order;
}

GraphBundle ego_network(const GraphBundle& g, NodeId center, int radius) {
  auto nodes = ego_nodes(g, center, radius);
  GraphBundle ego = induced_subgraph(g, nodes);
  ego.set_graph_label(g.label(center));
  return ego;
}

GraphBundle subsample(const GraphBundle& g, std::size_t max_nodes, std::uint64_t seed) {
  const std::size_t n = g.num_nodes();
  if (max_nodes >= n) return g;
  Rng rng(seed);
  std::vector<char> taken(n, 0);
  std::vector<NodeId> picked;
  picked.reserve(max_nodes);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t next_seed = 0;
  std::deque<NodeId> queue;
  while (picked.size() < max_nodes) {
    if (queue.empty()) {
      while (taken[order[next_seed]]) ++next_seed;
      NodeId s = static_cast<NodeId>(order[next_seed]);
      taken[s] = 1;
      picked.push_back(s);
      queue.push_back(s);
      continue;
    }
    NodeId u = queue.front();
    queue.pop_front();
    for (NodeId v : g.neighbors(u)) {
      if (picked.size() >= max_nodes) break;
      if (!taken[v]) {
        taken[v] = 1;
        picked.push_back(v);
        queue.push_back(v);
      }
    }
  }
  std::sort(picked.begin(), picked.end());
  return induced_subgraph(g, picked);
}

GraphBundle disjoint_union(std::span<const GraphBundle> parts) {
  if (parts.empty()) throw std::invalid_argument("disjoint_union: no parts");
  std::size_t total = 0;
  std::size_t classes = 0;
  const Index width = parts.front().features().cols();
  for (const auto& p : parts) {
    if (p.features().cols() != width) throw ShapeError("disjoint_union: feature width mismatch");
    total += p.num_nodes();
    classes = std::max(classes, p.num_classes());
  }
  Matrix feats(static_cast<Index>(total), width);
  std::vector<int> labels;
  labels.reserve(total);
  std::vector<Edge> edges;
  NodeId offset = 0;
  for (const auto& p : parts) {
    feats.middleRows(offset, static_cast<Index>(p.num_nodes())) = p.features();
    labels.insert(labels.end(), p.labels().begin(), p.labels().end());
    for (auto [u, v] : p.undirected_edges()) edges.emplace_back(u + offset, v + offset);
    offset += static_cast<NodeId>(p.num_nodes());
  }
  return GraphBundle::from_edges(parts.front().domain_name(), total, edges, std::move(feats),
                                 std::move(labels), classes);
}

}  // namespace samgpt
