#include "samgpt/pretrain.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "samgpt/error.hpp"
#include "samgpt/optim.hpp"

namespace samgpt {

void PretrainConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("pretrain: tau must be > 0");
  if (!(edge_drop_ratio >= 0.0 && edge_drop_ratio < 1.0))
    throw std::invalid_argument("pretrain: edge_drop_ratio must be in [0, 1)");
  if (subgraphs_per_domain < 1) throw std::invalid_argument("pretrain: subgraphs_per_domain must be >= 1");
  if (subgraph_radius < 1) throw std::invalid_argument("pretrain: subgraph_radius must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("pretrain: learning_rate must be > 0");
  if (!std::isfinite(alpha)) throw std::invalid_argument("pretrain: alpha must be finite");
  if (encoder.num_layers < 1) throw std::invalid_argument("pretrain: num_layers must be >= 1");
}

nlohmann::ordered_json PretrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["alpha"] = alpha;
  j["tau"] = tau;
  j["edge_drop"] = edge_drop_ratio;
  j["batch_per_domain"] = subgraphs_per_domain;
  j["radius"] = subgraph_radius;
  j["steps"] = steps;
  j["lr"] = learning_rate;
  j["seed"] = seed;
  j["structure_tokens"] = train_structure_tokens;
  j["dal_dim"] = encoder.input_dim;
  j["hidden"] = encoder.hidden_dim;
  j["layers"] = encoder.num_layers;
  return j;
}

PretrainConfig PretrainConfig::from_json(const nlohmann::json& j, PretrainConfig c) {
  c.alpha = j.value("alpha", c.alpha);
  c.tau = j.value("tau", c.tau);
  c.edge_drop_ratio = j.value("edge_drop", c.edge_drop_ratio);
  c.subgraphs_per_domain = j.value("batch_per_domain", c.subgraphs_per_domain);
  c.subgraph_radius = j.value("radius", c.subgraph_radius);
  c.steps = j.value("steps", c.steps);
  c.learning_rate = j.value("lr", c.learning_rate);
  c.seed = j.value("seed", c.seed);
  c.train_structure_tokens = j.value("structure_tokens", c.train_structure_tokens);
  c.encoder.input_dim = j.value("dal_dim", c.encoder.input_dim);
  c.encoder.hidden_dim = j.value("hidden", c.encoder.hidden_dim);
  c.encoder.num_layers = j.value("layers", c.encoder.num_layers);
  return c;
}

// ---------------------------------------------------------------------------
// Sampling and augmentation

std::vector<NodeId> sample_centers(std::span<const NodeId> candidates, std::size_t count, Rng& rng) {
  if (candidates.empty()) throw std::invalid_argument("sample_centers: no candidate nodes");
  if (count < 1) throw std::invalid_argument("sample_centers: count must be >= 1");
  std::vector<NodeId> out;
  out.reserve(count);
  if (count <= candidates.size()) {
    for (std::size_t i : rng.sample_without_replacement(candidates.size(), count)) out.push_back(candidates[i]);
  } else {
    for (std::size_t i = 0; i < count; ++i) out.push_back(candidates[rng.below(candidates.size())]);
  }
  return out;
}

std::vector<GraphBundle> sample_subgraphs(const GraphBundle& g, std::size_t count, int radius, Rng& rng) {
  if (g.num_nodes() == 0) throw std::invalid_argument("sample_subgraphs: empty graph");
  std::vector<NodeId> all(g.num_nodes());
  for (std::size_t v = 0; v < all.size(); ++v) all[v] = static_cast<NodeId>(v);
  std::vector<GraphBundle> out;
  for (NodeId c : sample_centers(all, count, rng)) out.push_back(ego_network(g, c, radius));
  return out;
}

GraphBundle augment_edge_drop(const GraphBundle& g, double ratio, Rng& rng) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw std::invalid_argument("augment_edge_drop: ratio must be in [0, 1)");
  auto edges = g.undirected_edges();
  const auto drop = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(edges.size())));
  if (drop == 0) return g;
  std::vector<char> dropped(edges.size(), 0);
  for (std::size_t i : rng.sample_without_replacement(edges.size(), drop)) dropped[i] = 1;
  std::vector<Edge> kept;
  kept.reserve(edges.size() - drop);
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (!dropped[i]) kept.push_back(edges[i]);
  GraphBundle out = GraphBundle::from_edges(g.domain_name(), g.num_nodes(), kept, g.features(), g.labels(),
                                            g.num_classes());
  out.set_graph_label(g.graph_label());
  return out;
}

std::vector<NodeId> informative_centers(const GraphBundle& g, int radius) {
  std::vector<NodeId> sources;
  for (std::size_t v = 0; v < g.num_nodes(); ++v)
    if (!g.features().row(static_cast<Index>(v)).isZero(0.0)) sources.push_back(static_cast<NodeId>(v));
  const auto dist = hop_distances(g, sources, radius);
  std::vector<NodeId> out;
  for (std::size_t v = 0; v < g.num_nodes(); ++v)
    if (dist[v] >= 0) out.push_back(static_cast<NodeId>(v));
  return out;
}

// ---------------------------------------------------------------------------
// Loss

ContrastiveBatch ContrastiveBatch::graphcl(std::size_t num_anchors) {
  ContrastiveBatch b;
  for (std::size_t k = 0; k < num_anchors; ++k) {
    const auto base = static_cast<Index>(3 * k);
    b.anchors.push_back(base);
    b.positives.push_back({base + 1, base + 2});
    std::vector<Index> neg;
    for (std::size_t j = 0; j < num_anchors; ++j) {
      if (j == k) continue;
      neg.push_back(static_cast<Index>(3 * j + 1));
      neg.push_back(static_cast<Index>(3 * j + 2));
    }
    b.negatives.push_back(std::move(neg));
  }
  return b;
}

std::size_t ContrastiveBatch::rows() const {
  Index hi = -1;
  for (Index a : anchors) hi = std::max(hi, a);
  for (const auto& p : positives)
    for (Index r : p) hi = std::max(hi, r);
  for (const auto& n : negatives)
    for (Index r : n) hi = std::max(hi, r);
  return static_cast<std::size_t>(hi + 1);
}

void ContrastiveBatch::validate() const {
  if (anchors.empty()) throw std::invalid_argument("contrastive batch: no anchors");
  if (positives.size() != anchors.size() || negatives.size() != anchors.size())
    throw std::invalid_argument("contrastive batch: positive/negative lists do not match anchors");
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    if (positives[k].empty()) throw std::invalid_argument("contrastive batch: anchor with no positive");
    if (negatives[k].empty()) throw std::invalid_argument("contrastive batch: anchor with no negative");
    for (Index r : negatives[k])
      if (r == anchors[k]) throw std::invalid_argument("contrastive batch: anchor is its own negative");
  }
}

Var contrastive_loss(const Var& embeddings, const ContrastiveBatch& batch, double tau) {
  batch.validate();
  if (!(tau > 0.0)) throw std::invalid_argument("contrastive_loss: tau must be > 0");
  if (static_cast<Index>(batch.rows()) > embeddings.rows())
    throw ShapeError("contrastive_loss: batch references rows beyond the embedding matrix");
  const auto n_anchor = static_cast<Index>(batch.anchors.size());
  const Index n = embeddings.rows();
  auto pos = std::make_shared<Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>>(n_anchor, n);
  auto neg = std::make_shared<Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>>(n_anchor, n);
  pos->setConstant(false);
  neg->setConstant(false);
  for (Index k = 0; k < n_anchor; ++k) {
    for (Index r : batch.positives[static_cast<std::size_t>(k)]) (*pos)(k, r) = true;
    for (Index r : batch.negatives[static_cast<std::size_t>(k)]) (*neg)(k, r) = true;
  }
  Var z = normalize_rows(embeddings);
  Var anchors = select_rows(z, batch.anchors);
  Var sims = scalar_mul(matmul(anchors, transpose(z)), 1.0 / tau);
  return sum(masked_logsumexp(sims, neg) - masked_logsumexp(sims, pos));
}

// ---------------------------------------------------------------------------
// Model

Var embed_fused(Tape& tape, Checkpoint& model, std::span<const GraphBundle> graphs, std::size_t domain) {
  if (domain >= model.num_domains())
    throw ShapeError("embed_fused: unknown domain index " + std::to_string(domain));
  if (graphs.empty()) throw ShapeError("embed_fused: no graphs");
  const GraphBundle batch = graphs.size() == 1 ? graphs.front() : disjoint_union(graphs);
  if (static_cast<Index>(batch.feature_dim()) != model.encoder.config().input_dim)
    throw ShapeError("embed_fused: features not aligned to encoder input width");
  const auto plan = PropagationPlan::full(batch, model.encoder.num_layers());
  auto weights = model.encoder.bind(tape);
  Var x = tape.constant(batch.features());
  Var h_fal = encode_feature_path(plan, apply_fal(x, domain, model.features), weights);
  auto tokens = model.structure.bind(tape, domain);
  Var h_sal = encode(plan, x, weights, tokens);
  Var h = fuse(h_fal, h_sal, model.alpha);

  auto groups = std::make_shared<std::vector<std::vector<Index>>>();
  Index offset = 0;
  for (const auto& g : graphs) {
    std::vector<Index> rows(g.num_nodes());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = offset + static_cast<Index>(i);
    offset += static_cast<Index>(g.num_nodes());
    groups->push_back(std::move(rows));
  }
  return group_mean(h, groups);
}

std::vector<std::size_t> anchor_domains(std::size_t num_domains, std::size_t per_domain) {
  std::vector<std::size_t> out;
  out.reserve(num_domains * per_domain);
  for (std::size_t d = 0; d < num_domains; ++d) out.insert(out.end(), per_domain, d);
  return out;
}

Checkpoint init_model(const std::vector<std::string>& roster, const PretrainConfig& config) {
  Checkpoint c;
  c.roster = roster;
  c.alpha = config.alpha;
  c.tau = config.tau;
  c.structure_tokens_trained = config.train_structure_tokens;
  c.pretrain_config = config.to_json();
  c.encoder = EncoderState::init(config.encoder, derive_seed(config.seed, {0xe1u}));
  c.structure = StructureTokens::ones(roster.size(), c.encoder, config.train_structure_tokens);
  c.features = FeatureTokens::ones(roster.size(), config.encoder.input_dim, true);
  return c;
}

PretrainResult pretrain_run(std::span<const GraphBundle> domains, const PretrainConfig& config,
                            const std::function<void(std::size_t, double)>& on_step) {
  config.validate();
  if (domains.empty()) throw std::invalid_argument("pretrain: no source domains");
  std::vector<std::string> roster;
  std::vector<std::vector<NodeId>> candidates;
  for (const auto& g : domains) {
    if (static_cast<Index>(g.feature_dim()) != config.encoder.input_dim)
      throw ShapeError("pretrain: domain '" + g.domain_name() + "' has feature width " +
                       std::to_string(g.feature_dim()) + ", expected aligned width " +
                       std::to_string(config.encoder.input_dim));
    roster.push_back(g.domain_name());
    candidates.push_back(informative_centers(g, config.subgraph_radius));
    if (candidates.back().empty())
      throw std::invalid_argument("pretrain: domain '" + g.domain_name() + "' has no non-zero features");
  }

  PretrainResult result{init_model(roster, config), {}};
  Checkpoint& model = result.checkpoint;

  std::vector<Tensor*> params;
  for (auto& w : model.encoder.weights()) params.push_back(&w);
  for (auto& per_layer : model.structure.tokens)
    for (auto& t : per_layer)
      if (t.requires_grad()) params.push_back(&t);
  for (auto& f : model.features.tokens) params.push_back(&f);
  Adam adam(params, AdamConfig{config.learning_rate});

  const std::size_t per_domain = config.subgraphs_per_domain;
  const ContrastiveBatch layout = ContrastiveBatch::graphcl(domains.size() * per_domain);

  for (std::size_t step = 0; step < config.steps; ++step) {
    Tape tape;
    std::vector<Var> blocks;
    for (std::size_t d = 0; d < domains.size(); ++d) {
      Rng center_rng(derive_seed(config.seed, {1, step, d}));
      const auto centers = sample_centers(candidates[d], per_domain, center_rng);
      std::vector<GraphBundle> graphs;
      graphs.reserve(3 * per_domain);
      for (std::size_t k = 0; k < centers.size(); ++k) {
        GraphBundle o = ego_network(domains[d], centers[k], config.subgraph_radius);
        Rng aug_a(derive_seed(config.seed, {2, step, d, k, 0}));
        Rng aug_b(derive_seed(config.seed, {2, step, d, k, 1}));
        GraphBundle a = augment_edge_drop(o, config.edge_drop_ratio, aug_a);
        GraphBundle b = augment_edge_drop(o, config.edge_drop_ratio, aug_b);
        graphs.push_back(std::move(o));
        graphs.push_back(std::move(a));
        graphs.push_back(std::move(b));
      }
      blocks.push_back(embed_fused(tape, model, graphs, d));
    }
    Var embeddings = concat_rows(blocks);
    Var loss = scalar_mul(contrastive_loss(embeddings, layout, config.tau),
                          1.0 / static_cast<double>(layout.anchors.size()));
    const double value = loss.value()(0, 0);
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << "pretrain: non-finite loss " << value << " at step " << step + 1;
      throw NumericError(msg.str());
    }
    adam.zero_grad();
    tape.backward(loss);
    adam.step();
    result.losses.push_back(value);
    if (on_step) on_step(step + 1, value);
  }
  return result;
}

}  // namespace samgpt
