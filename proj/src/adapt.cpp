#include "samgpt/adapt.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "samgpt/error.hpp"
#include "samgpt/optim.hpp"

namespace samgpt {

TaskKind parse_task_kind(const std::string& s) {
  if (s == "node") return TaskKind::node;
  if (s == "graph") return TaskKind::graph;
  throw std::invalid_argument("unknown task kind '" + s + "' (expected node or graph)");
}

std::string to_string(TaskKind kind) { return kind == TaskKind::node ? "node" : "graph"; }

PromptState PromptState::init(const Checkpoint& ckpt, const AdaptOptions& options) {
  const auto k = ckpt.num_domains();
  if (k == 0) throw ShapeError("adapt: checkpoint has an empty roster");
  PromptState p;
  for (int l = 0; l < ckpt.encoder.num_layers(); ++l)
    p.holistic.push_back(Tensor::ones(1, ckpt.encoder.in_dim(l), options.holistic));
  p.coefficients = Tensor(Matrix::Constant(ckpt.encoder.num_layers(), static_cast<Index>(k), 1.0 / static_cast<double>(k)),
                          options.specific);
  p.features = FeatureAdapter::init(k, ckpt.features.dim());
  p.alpha = ckpt.alpha;
  p.beta = options.beta;
  return p;
}

std::vector<Tensor*> PromptState::trainable(const AdaptOptions& options) {
  std::vector<Tensor*> out;
  if (options.holistic)
    for (auto& h : holistic) out.push_back(&h);
  if (options.specific) out.push_back(&coefficients);
  out.push_back(&features.mixture);
  out.push_back(&features.offset);
  return out;
}

Var specific_prompt(const Var& coefficients, const StructureTokens& tokens, int layer) {
  if (static_cast<std::size_t>(coefficients.cols()) != tokens.num_domains())
    throw ShapeError("specific_prompt: " + std::to_string(coefficients.cols()) + " coefficients per layer for " +
                     std::to_string(tokens.num_domains()) + " source domains");
  if (layer < 0 || layer >= coefficients.rows())
    throw ShapeError("specific_prompt: layer " + std::to_string(layer) + " out of range");
  Tape& tape = coefficients.tape();
  return matmul(select_rows(coefficients, {layer}), tape.constant(tokens.stacked(layer)));
}

// ---------------------------------------------------------------------------
// Inputs

EmbedInput EmbedInput::nodes(const GraphBundle& g, int num_layers, std::span<const NodeId> nodes) {
  if (nodes.empty()) throw std::invalid_argument("embed: no nodes");
  EmbedInput in{PropagationPlan::restricted(g, num_layers, nodes), {}, nullptr};
  in.inputs = in.plan.gather_inputs(g.features());
  return in;
}

EmbedInput EmbedInput::graphs(std::span<const GraphBundle> graphs, int num_layers) {
  if (graphs.empty()) throw std::invalid_argument("embed: no graphs");
  const GraphBundle u = disjoint_union(graphs);
  EmbedInput in{PropagationPlan::full(u, num_layers), u.features(), nullptr};
  auto groups = std::make_shared<std::vector<std::vector<Index>>>();
  Index offset = 0;
  for (const auto& g : graphs) {
    if (g.num_nodes() == 0) throw std::invalid_argument("embed: empty graph instance");
    std::vector<Index> rows(g.num_nodes());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = offset + static_cast<Index>(i);
    offset += static_cast<Index>(g.num_nodes());
    groups->push_back(std::move(rows));
  }
  in.groups = std::move(groups);
  return in;
}

std::size_t EmbedInput::instances() const { return groups ? groups->size() : plan.output_nodes().size(); }

// ---------------------------------------------------------------------------
// Embedding

AdaptedPaths embed_adapted_paths(Tape& tape, const Checkpoint& ckpt, PromptState& prompts,
                                 const EmbedInput& input, const AdaptOptions& options) {
  const int L = ckpt.encoder.num_layers();
  if (input.inputs.cols() != ckpt.encoder.config().input_dim)
    throw ShapeError("adapt: target features have width " + std::to_string(input.inputs.cols()) +
                     ", encoder expects " + std::to_string(ckpt.encoder.config().input_dim));
  if (static_cast<int>(prompts.holistic.size()) != L)
    throw ShapeError("adapt: holistic prompt count differs from encoder depth");

  const auto weights = ckpt.encoder.bind(tape);
  Var x = tape.constant(input.inputs);

  AdaptedPaths p;
  p.fad = encode_feature_path(input.plan, apply_fad(x, prompts.features, ckpt.features.stacked()), weights);

  std::vector<Var> hol;
  for (auto& h : prompts.holistic) hol.push_back(tape.watch(h));
  p.hol = encode(input.plan, x, weights, hol);
  p.sad = p.hol;

  if (options.specific) {
    Var lambda = tape.watch(prompts.coefficients);
    std::vector<Var> spe;
    for (int l = 0; l < L; ++l) spe.push_back(specific_prompt(lambda, ckpt.structure, l));
    p.spe = encode(input.plan, x, weights, spe);
    p.sad = fuse(p.hol, *p.spe, prompts.beta);
  }
  p.ad = fuse(p.fad, p.sad, prompts.alpha);
  p.out = input.groups ? group_mean(p.ad, input.groups) : p.ad;
  return p;
}

Var embed_adapted(Tape& tape, const Checkpoint& ckpt, PromptState& prompts, const EmbedInput& input,
                  const AdaptOptions& options) {
  return embed_adapted_paths(tape, ckpt, prompts, input, options).out;
}

Matrix embed_eval(const Checkpoint& ckpt, const PromptState& prompts, const EmbedInput& input,
                  const AdaptOptions& options) {
  PromptState frozen = prompts;
  for (auto& h : frozen.holistic) h.set_requires_grad(false);
  frozen.coefficients.set_requires_grad(false);
  frozen.features.mixture.set_requires_grad(false);
  frozen.features.offset.set_requires_grad(false);
  Tape tape;
  return embed_adapted(tape, ckpt, frozen, input, options).value();
}

// ---------------------------------------------------------------------------
// Prototypes, loss, prediction

namespace {

std::shared_ptr<std::vector<std::vector<Index>>> class_groups(std::span<const int> labels, std::size_t num_classes) {
  auto groups = std::make_shared<std::vector<std::vector<Index>>>(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw std::invalid_argument("label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) + ")");
    (*groups)[static_cast<std::size_t>(y)].push_back(static_cast<Index>(i));
  }
  for (std::size_t c = 0; c < num_classes; ++c)
    if ((*groups)[c].empty())
      throw std::invalid_argument("build_prototypes: class " + std::to_string(c) + " has no support instance");
  return groups;
}

}  // namespace

Var build_prototypes(const Var& embeddings, std::span<const int> labels, std::size_t num_classes) {
  if (static_cast<Index>(labels.size()) != embeddings.rows())
    throw ShapeError("build_prototypes: label count differs from embedding rows");
  return group_mean(embeddings, class_groups(labels, num_classes));
}

Matrix build_prototypes(const Matrix& embeddings, std::span<const int> labels, std::size_t num_classes) {
  if (static_cast<Index>(labels.size()) != embeddings.rows())
    throw ShapeError("build_prototypes: label count differs from embedding rows");
  const auto groups = class_groups(labels, num_classes);
  Matrix out(static_cast<Index>(num_classes), embeddings.cols());
  for (std::size_t c = 0; c < num_classes; ++c) {
    out.row(static_cast<Index>(c)).setZero();
    for (Index r : (*groups)[c]) out.row(static_cast<Index>(c)) += embeddings.row(r);
    out.row(static_cast<Index>(c)) /= static_cast<double>((*groups)[c].size());
  }
  return out;
}

Var downstream_loss(const Var& embeddings, std::span<const int> labels, const Var& prototypes, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("downstream_loss: tau must be > 0");
  if (static_cast<Index>(labels.size()) != embeddings.rows())
    throw ShapeError("downstream_loss: label count differs from embedding rows");
  if (embeddings.cols() != prototypes.cols()) throw ShapeError("downstream_loss: embedding/prototype widths differ");
  const Index n = embeddings.rows();
  const Index c = prototypes.rows();
  using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
  auto all = std::make_shared<Mask>(Mask::Constant(n, c, true));
  auto own = std::make_shared<Mask>(Mask::Constant(n, c, false));
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= c) throw std::invalid_argument("downstream_loss: label without prototype");
    (*own)(i, y) = true;
  }
  Var sims = scalar_mul(matmul(normalize_rows(embeddings), transpose(normalize_rows(prototypes))), 1.0 / tau);
  return sum(masked_logsumexp(sims, all) - masked_logsumexp(sims, own));
}

std::vector<int> predict(const Matrix& queries, const Matrix& prototypes) {
  if (prototypes.rows() < 1) throw std::invalid_argument("predict: no prototypes");
  if (queries.cols() != prototypes.cols()) throw ShapeError("predict: query/prototype widths differ");
  Eigen::VectorXd pnorm = prototypes.rowwise().norm();
  std::vector<int> out(static_cast<std::size_t>(queries.rows()));
  for (Index i = 0; i < queries.rows(); ++i) {
    const double qn = queries.row(i).norm();
    int best = 0;
    double best_sim = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < prototypes.rows(); ++c) {
      const double denom = qn * pnorm(c);
      const double sim = denom > 0.0 ? queries.row(i).dot(prototypes.row(c)) / denom : 0.0;
      if (sim > best_sim) {
        best_sim = sim;
        best = static_cast<int>(c);
      }
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tuning

TuneResult prompt_tune(const Checkpoint& ckpt, const EmbedInput& support, std::span<const int> labels,
                       std::size_t num_classes, const AdaptOptions& options) {
  if (support.instances() != labels.size()) throw ShapeError("prompt_tune: label count differs from support size");
  TuneResult result{PromptState::init(ckpt, options), {}, {}};
  Adam adam(result.prompts.trainable(options), AdamConfig{options.tune_lr});
  for (std::size_t step = 0; step < options.tune_steps; ++step) {
    Tape tape;
    Var h = embed_adapted(tape, ckpt, result.prompts, support, options);
    Var loss = downstream_loss(h, labels, build_prototypes(h, labels, num_classes), ckpt.tau);
    const double value = loss.value()(0, 0);
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << "prompt tuning: non-finite loss " << value << " at step " << step + 1;
      throw NumericError(msg.str());
    }
    adam.zero_grad();
    tape.backward(loss);
    adam.step();
    result.losses.push_back(value);
  }
  result.prototypes = build_prototypes(embed_eval(ckpt, result.prompts, support, options), labels, num_classes);
  return result;
}

}  // namespace samgpt
