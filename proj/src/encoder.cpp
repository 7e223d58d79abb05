#include "samgpt/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "samgpt/error.hpp"
#include "samgpt/rng.hpp"

namespace samgpt {

EncoderState EncoderState::init(const EncoderConfig& config, std::uint64_t seed) {
  if (config.num_layers < 1) throw ShapeError("encoder: num_layers must be >= 1");
  if (config.input_dim < 1 || config.hidden_dim < 1) throw ShapeError("encoder: widths must be >= 1");
  EncoderState s;
  s.config_ = config;
  for (int l = 0; l < config.num_layers; ++l) {
    const Index in = s.in_dim(l);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Rng rng(derive_seed(seed, {0x57u, static_cast<std::uint64_t>(l)}));
    Matrix w(in, config.hidden_dim);
    for (Index r = 0; r < w.rows(); ++r)
      for (Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
    s.weights_.emplace_back(std::move(w), true);
  }
  return s;
}

EncoderState EncoderState::from_weights(const EncoderConfig& config, std::vector<Tensor> weights) {
  if (static_cast<int>(weights.size()) != config.num_layers)
    throw ShapeError("encoder: expected " + std::to_string(config.num_layers) + " weight matrices");
  EncoderState s;
  s.config_ = config;
  for (int l = 0; l < config.num_layers; ++l) {
    const auto& w = weights[static_cast<std::size_t>(l)];
    if (w.rows() != s.in_dim(l) || w.cols() != config.hidden_dim)
      throw ShapeError("encoder: layer " + std::to_string(l) + " weight has wrong shape");
  }
  s.weights_ = std::move(weights);
  return s;
}

void EncoderState::freeze() {
  for (auto& w : weights_) w.set_requires_grad(false);
}

void EncoderState::unfreeze() {
  for (auto& w : weights_) w.set_requires_grad(true);
}

bool EncoderState::frozen() const {
  return std::none_of(weights_.begin(), weights_.end(), [](const Tensor& w) { return w.requires_grad(); });
}

std::vector<Var> EncoderState::bind(Tape& tape) {
  std::vector<Var> out;
  for (auto& w : weights_) out.push_back(tape.watch(w));
  return out;
}

std::vector<Var> EncoderState::bind(Tape& tape) const {
  std::vector<Var> out;
  for (const auto& w : weights_) out.push_back(tape.watch(w));
  return out;
}

StructureTokens StructureTokens::ones(std::size_t num_domains, const EncoderState& encoder, bool trainable) {
  StructureTokens t;
  t.tokens.resize(num_domains);
  for (auto& per_layer : t.tokens)
    for (int l = 0; l < encoder.num_layers(); ++l) per_layer.push_back(Tensor::ones(1, encoder.in_dim(l), trainable));
  return t;
}

Matrix StructureTokens::stacked(int layer) const {
  const auto l = static_cast<std::size_t>(layer);
  Matrix out(static_cast<Index>(tokens.size()), tokens.front()[l].cols());
  for (std::size_t i = 0; i < tokens.size(); ++i) out.row(static_cast<Index>(i)) = tokens[i][l].value();
  return out;
}

std::vector<Var> StructureTokens::bind(Tape& tape, std::size_t domain) {
  if (domain >= tokens.size()) throw ShapeError("structure tokens: unknown domain index " + std::to_string(domain));
  std::vector<Var> out;
  for (auto& t : tokens[domain]) out.push_back(tape.watch(t));
  return out;
}

// ---------------------------------------------------------------------------
// Propagation

namespace {

using Triplet = Eigen::Triplet<double>;

std::shared_ptr<const SparseMatrix> make_sparse(Index rows, Index cols, std::vector<Triplet>& entries) {
  auto m = std::make_shared<SparseMatrix>(rows, cols);
  m->setFromTriplets(entries.begin(), entries.end());
  m->makeCompressed();
  return m;
}

double inv_sqrt_deg(const GraphBundle& g, NodeId v) { return 1.0 / std::sqrt(static_cast<double>(g.degree(v) + 1)); }

}  // namespace

PropagationPlan PropagationPlan::full(const GraphBundle& g, int num_layers) {
  if (num_layers < 1) throw ShapeError("propagation plan: num_layers must be >= 1");
  const auto n = static_cast<Index>(g.num_nodes());
  std::vector<Triplet> off, self;
  off.reserve(g.num_directed_edges());
  self.reserve(g.num_nodes());
  for (NodeId v = 0; v < static_cast<NodeId>(n); ++v) {
    const double dv = inv_sqrt_deg(g, v);
    for (NodeId u : g.neighbors(v)) off.emplace_back(v, u, dv * inv_sqrt_deg(g, u));
    self.emplace_back(v, v, dv * dv);
  }
  Layer layer{make_sparse(n, n, off), make_sparse(n, n, self)};
  PropagationPlan plan;
  plan.layers_.assign(static_cast<std::size_t>(num_layers), layer);
  plan.input_nodes_.resize(g.num_nodes());
  for (NodeId v = 0; v < static_cast<NodeId>(n); ++v) plan.input_nodes_[v] = v;
  plan.output_nodes_ = plan.input_nodes_;
  return plan;
}

PropagationPlan PropagationPlan::restricted(const GraphBundle& g, int num_layers, std::span<const NodeId> targets) {
  if (num_layers < 1) throw ShapeError("propagation plan: num_layers must be >= 1");
  for (NodeId t : targets)
    if (t < 0 || static_cast<std::size_t>(t) >= g.num_nodes())
      throw std::out_of_range("propagation plan: target node out of range");
  const std::vector<int> dist = hop_distances(g, targets, num_layers);

  // node sets per layer boundary: sets[k] feeds layer k; sets[L] are the targets
  std::vector<std::vector<NodeId>> sets(static_cast<std::size_t>(num_layers) + 1);
  for (int k = 0; k < num_layers; ++k) {
    const int reach = num_layers - k;
    for (NodeId v = 0; v < static_cast<NodeId>(g.num_nodes()); ++v)
      if (dist[v] >= 0 && dist[v] <= reach) sets[k].push_back(v);
  }
  sets[static_cast<std::size_t>(num_layers)].assign(targets.begin(), targets.end());

  PropagationPlan plan;
  for (int k = 0; k < num_layers; ++k) {
    const auto& in = sets[static_cast<std::size_t>(k)];
    const auto& out = sets[static_cast<std::size_t>(k) + 1];
    std::unordered_map<NodeId, Index> col;
    col.reserve(in.size() * 2);
    for (std::size_t i = 0; i < in.size(); ++i) col.emplace(in[i], static_cast<Index>(i));
    std::vector<Triplet> off, self;
    for (std::size_t r = 0; r < out.size(); ++r) {
      const NodeId v = out[r];
      const double dv = inv_sqrt_deg(g, v);
      for (NodeId u : g.neighbors(v)) off.emplace_back(static_cast<Index>(r), col.at(u), dv * inv_sqrt_deg(g, u));
      self.emplace_back(static_cast<Index>(r), col.at(v), dv * dv);
    }
    const auto rows = static_cast<Index>(out.size());
    const auto cols = static_cast<Index>(in.size());
    plan.layers_.push_back({make_sparse(rows, cols, off), make_sparse(rows, cols, self)});
  }
  plan.input_nodes_ = sets.front();
  plan.output_nodes_ = sets.back();
  return plan;
}

Matrix PropagationPlan::gather_inputs(const Matrix& features) const {
  Matrix out(static_cast<Index>(input_nodes_.size()), features.cols());
  for (std::size_t i = 0; i < input_nodes_.size(); ++i) out.row(static_cast<Index>(i)) = features.row(input_nodes_[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Encoder

Var encode(const PropagationPlan& plan, const Var& inputs, std::span<const Var> weights,
           std::span<const Var> modulators) {
  const int L = plan.num_layers();
  if (static_cast<int>(weights.size()) != L)
    throw ShapeError("encode: plan has " + std::to_string(L) + " layers, got " + std::to_string(weights.size()) +
                     " weight matrices");
  if (!modulators.empty() && static_cast<int>(modulators.size()) != L)
    throw ShapeError("encode: expected " + std::to_string(L) + " modulators, got " +
                     std::to_string(modulators.size()));
  Var h = inputs;
  for (int l = 0; l < L; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const Var& w = weights[li];
    if (h.cols() != w.rows())
      throw ShapeError("encode: layer " + std::to_string(l) + " input width " + std::to_string(h.cols()) +
                       " != weight rows " + std::to_string(w.rows()));
    Var messages = h;
    if (!modulators.empty()) {
      const Var& m = modulators[li];
      if (m.rows() != 1 || m.cols() != h.cols())
        throw ShapeError("encode: layer " + std::to_string(l) + " modulator width " + std::to_string(m.cols()) +
                         " != layer input width " + std::to_string(h.cols()));
      messages = mul(h, m);
    }
    const auto& layer = plan.layer(l);
    Var z = spmm(layer.neighbor, messages) + spmm(layer.self, h);
    h = matmul(z, w);
    if (l + 1 < L) h = relu(h);
  }
  return h;
}

Var fuse(const Var& primary, const Var& secondary, double coeff) {
  if (primary.rows() != secondary.rows() || primary.cols() != secondary.cols())
    throw ShapeError("fuse: shapes differ");
  return primary + scalar_mul(secondary, coeff);
}

}  // namespace samgpt
