#include <doctest.h>

#include <numeric>

#include "samgpt/error.hpp"
#include "samgpt/pretrain.hpp"
#include "samgpt/serialize.hpp"
#include "samgpt/synth.hpp"
#include "support.hpp"

using namespace samgpt;
using testing::random_matrix;

namespace {

GraphBundle aligned_synth(const std::string& name, std::uint64_t seed, Index dim, double homophily) {
  SynthConfig cfg;
  cfg.name = name;
  cfg.num_nodes = 80;
  cfg.feature_dim = 30;
  cfg.homophily = homophily;
  cfg.seed = seed;
  auto g = make_synthetic(cfg);
  g.set_features(fit_dal(g.features(), dim).features);
  return g;
}

PretrainConfig tiny_config() {
  PretrainConfig c;
  c.encoder = {8, 16, 2};
  c.subgraphs_per_domain = 4;
  c.steps = 50;
  c.learning_rate = 1e-2;
  c.seed = 3;
  return c;
}

Matrix fused_oracle(const GraphBundle& g, const Checkpoint& c, std::size_t domain) {
  std::vector<Matrix> w, mods;
  for (const auto& t : c.encoder.weights()) w.push_back(t.value());
  for (const auto& t : c.structure.tokens[domain]) mods.push_back(t.value());
  Matrix xf = g.features();
  for (Index r = 0; r < xf.rows(); ++r)
    for (Index k = 0; k < xf.cols(); ++k) xf(r, k) *= c.features.tokens[domain].value()(0, k);
  const auto adj = testing::dense_adjacency(g);
  Matrix h = testing::dense_encode(adj, xf, w) + c.alpha * testing::dense_encode(adj, g.features(), w, mods);
  Matrix out = Matrix::Zero(1, h.cols());
  for (Index r = 0; r < h.rows(); ++r) out += h.row(r);
  return out / static_cast<double>(h.rows());
}

std::vector<std::string> tensor_digests(const Checkpoint& c) {
  std::vector<std::string> out;
  for (const auto& [name, m] : c.named_tensors()) out.push_back(name + ":" + sha256_hex(tensor_bytes(*m)));
  return out;
}

}  // namespace

TEST_CASE("contrastive loss closed forms") {
  Tape t;
  ContrastiveBatch b{{0}, {{1}}, {{2}}};
  Matrix eq(3, 2);
  eq << 1, 0, 0.6, 0.8, 0.6, -0.8;
  CHECK(std::abs(contrastive_loss(t.constant(eq), b, 0.5).value()(0, 0)) < 1e-15);
  Matrix cf(3, 2);
  cf << 1, 0, 2, 0, 0, 3;
  CHECK(contrastive_loss(t.constant(cf), b, 1.0).value()(0, 0) == doctest::Approx(-1.0).epsilon(1e-14));

  CHECK_THROWS_AS(contrastive_loss(t.constant(cf), ContrastiveBatch{{0}, {{}}, {{2}}}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(contrastive_loss(t.constant(cf), ContrastiveBatch{{0}, {{1}}, {{}}}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(contrastive_loss(t.constant(cf), ContrastiveBatch{{0}, {{1}}, {{0}}}, 1.0), std::invalid_argument);

  auto g = ContrastiveBatch::graphcl(3);
  CHECK(g.rows() == 9);
  CHECK(g.positives[1] == std::vector<Index>{4, 5});
  CHECK(g.negatives[1] == std::vector<Index>{1, 2, 7, 8});
}

TEST_CASE("contrastive loss: oracle, scale invariance, gradient") {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    auto batch = ContrastiveBatch::graphcl(3);
    Matrix h = random_matrix(rng, 9, 5);
    const double tau = rng.uniform(0.2, 1.0);
    Tape t;
    const double got = contrastive_loss(t.constant(h), batch, tau).value()(0, 0);
    CHECK(std::abs(got - testing::contrastive_oracle(h, batch, tau)) < 1e-9);
    CHECK(std::abs(contrastive_loss(t.constant(3.7 * h), batch, tau).value()(0, 0) - got) < 1e-12);
  }
  Tensor h(random_matrix(rng, 9, 4), true);
  auto batch = ContrastiveBatch::graphcl(3);
  {
    Tape t;
    t.backward(contrastive_loss(t.watch(h), batch, 0.5));
  }
  CHECK(testing::fd_max_rel_error(h.value(), h.grad(), [&] {
          Tape t;
          return contrastive_loss(t.watch(std::as_const(h)), batch, 0.5).value()(0, 0);
        }) < 1e-4);
}

TEST_CASE("center sampling") {
  std::vector<Edge> e{{0, 1}, {1, 2}, {0, 2}};
  auto tri = GraphBundle::from_edges("tri", 3, e, Matrix::Identity(3, 3), {0, 1, 0}, 2);
  Rng r0(5);
  auto one = sample_subgraphs(tri, 1, 1, r0);
  REQUIRE(one.size() == 1);
  CHECK(one[0].num_nodes() == 3);
  CHECK(one[0].num_undirected_edges() == 3);

  std::vector<NodeId> nodes(10);
  std::iota(nodes.begin(), nodes.end(), 0);
  Rng a(9), b(9);
  CHECK(sample_centers(nodes, 6, a) == sample_centers(nodes, 6, b));
  Rng c(10);
  auto distinct = sample_centers(nodes, 10, c);
  std::sort(distinct.begin(), distinct.end());
  CHECK(distinct == nodes);
  CHECK(sample_centers(nodes, 25, c).size() == 25);

  // uniformity: 10,000 single draws, each count within 3σ of 1000
  Rng u(11);
  std::vector<int> counts(10, 0);
  for (int i = 0; i < 10000; ++i) ++counts[static_cast<std::size_t>(sample_centers(nodes, 1, u)[0])];
  const double sigma = std::sqrt(10000 * 0.1 * 0.9);
  double chi2 = 0;
  for (int k : counts) {
    CHECK(std::abs(k - 1000.0) <= 3 * sigma);
    chi2 += (k - 1000.0) * (k - 1000.0) / 1000.0;
  }
  // 9 degrees of freedom; 27.88 is the 0.999 quantile
  CHECK(chi2 < 27.88);
}

TEST_CASE("edge dropping") {
  std::vector<Edge> e;
  for (NodeId i = 0; i < 10; ++i) e.emplace_back(i, (i + 1) % 10);
  auto ring = GraphBundle::from_edges("ring", 10, e, Matrix::Ones(10, 2), std::vector<int>(10, 0), 1);
  Rng rng(1);
  CHECK(augment_edge_drop(ring, 0.0, rng) == ring);
  auto a = augment_edge_drop(ring, 0.2, rng);
  auto b = augment_edge_drop(ring, 0.2, rng);
  CHECK(a.num_undirected_edges() == 8);
  CHECK(a.num_nodes() == 10);
  CHECK(a.features() == ring.features());
  CHECK(a.undirected_edges() != b.undirected_edges());
  for (const auto& edge : a.undirected_edges())
    CHECK(std::find(ring.undirected_edges().begin(), ring.undirected_edges().end(), edge) !=
          ring.undirected_edges().end());
  CHECK_THROWS_AS(augment_edge_drop(ring, 1.0, rng), std::invalid_argument);
  auto labeled = ring;
  labeled.set_graph_label(1);
  CHECK(augment_edge_drop(labeled, 0.5, rng).graph_label() == 1);
}

TEST_CASE("embed_fused") {
  Rng rng(2);
  auto g = testing::random_graph(rng, 4, 0.6, 3, 2, "d0");
  EncoderConfig cfg{3, 5, 2};

  PretrainConfig pc;
  pc.encoder = cfg;
  pc.seed = 7;
  auto plain = init_model({"d0", "d1"}, pc);
  std::vector<GraphBundle> one{g};
  Matrix gcn;
  {
    Tape t;
    auto plan = PropagationPlan::full(g, 2);
    gcn = readout(encode(plan, t.constant(g.features()), plain.encoder.bind(t))).value();
    CHECK(embed_fused(t, plain, one, 1).value() == 2.0 * gcn);
    plain.alpha = 0.0;
    CHECK(embed_fused(t, plain, one, 1).value() == gcn);
  }

  for (int trial = 0; trial < 5; ++trial) {
    auto h = testing::random_graph(rng, 4, 0.5, 3, 2, "d0");
    auto ck = testing::random_checkpoint(rng, {"d0", "d1"}, cfg, rng.uniform(0.0, 2.0));
    Tape t;
    std::vector<GraphBundle> gs{h};
    CHECK((embed_fused(t, ck, gs, 1).value() - fused_oracle(h, ck, 1)).cwiseAbs().maxCoeff() < 1e-10);
  }

  // a batch of graphs equals one row per graph
  auto ck = testing::random_checkpoint(rng, {"d0", "d1"}, cfg);
  std::vector<GraphBundle> many{testing::random_graph(rng, 4, 0.5, 3), testing::random_graph(rng, 6, 0.3, 3)};
  Tape t;
  Matrix rows = embed_fused(t, ck, many, 0).value();
  for (std::size_t i = 0; i < many.size(); ++i)
    CHECK((rows.row(static_cast<Index>(i)) - fused_oracle(many[i], ck, 0)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(embed_fused(t, ck, many, 2), ShapeError);
}

TEST_CASE("round-robin anchors") {
  auto d = anchor_domains(3, 4);
  CHECK(d.size() == 12);
  for (std::size_t k = 0; k < 3; ++k) CHECK(std::count(d.begin(), d.end(), k) == 4);
  CHECK(d.front() == 0);
  CHECK(d.back() == 2);
}

TEST_CASE("informative centers skip featureless regions") {
  std::vector<Edge> e{{0, 1}, {1, 2}, {2, 3}, {3, 4}};
  Matrix x = Matrix::Zero(5, 2);
  x(0, 0) = 1;
  auto g = GraphBundle::from_edges("p", 5, e, x, std::vector<int>(5, 0), 1);
  CHECK(informative_centers(g, 2) == std::vector<NodeId>{0, 1, 2});
}

TEST_CASE("pretrain_run") {
  std::vector<GraphBundle> domains{aligned_synth("a", 1, 8, 0.9), aligned_synth("b", 2, 8, 0.6)};
  auto cfg = tiny_config();

  SUBCASE("zero steps returns the initialization") {
    cfg.steps = 0;
    auto r = pretrain_run(domains, cfg);
    CHECK(r.losses.empty());
    CHECK(tensor_digests(r.checkpoint) == tensor_digests(init_model({"a", "b"}, cfg)));
    CHECK(r.checkpoint.roster == std::vector<std::string>{"a", "b"});
  }
  SUBCASE("deterministic and the loss decreases") {
    std::vector<std::size_t> seen;
    auto r1 = pretrain_run(domains, cfg, [&](std::size_t step, double) { seen.push_back(step); });
    auto r2 = pretrain_run(domains, cfg);
    CHECK(seen.size() == 50);
    CHECK(seen.back() == 50);
    CHECK(r1.losses == r2.losses);
    CHECK(checkpoint_hash(r1.checkpoint) == checkpoint_hash(r2.checkpoint));
    const double first = std::accumulate(r1.losses.begin(), r1.losses.begin() + 5, 0.0) / 5;
    const double last = std::accumulate(r1.losses.end() - 5, r1.losses.end(), 0.0) / 5;
    CHECK(last < first);
    // tokens moved away from the all-ones start
    CHECK_FALSE(r1.checkpoint.structure.tokens[0][0].value().isOnes(0.0));
  }
  SUBCASE("token-free mode keeps structure tokens at exactly one") {
    cfg.train_structure_tokens = false;
    cfg.steps = 10;
    auto r = pretrain_run(domains, cfg);
    CHECK_FALSE(r.checkpoint.structure_tokens_trained);
    for (const auto& per_layer : r.checkpoint.structure.tokens)
      for (const auto& t : per_layer) CHECK(t.value().isOnes(0.0));
    CHECK_FALSE(r.checkpoint.features.tokens[0].value().isOnes(0.0));
  }
  SUBCASE("invalid inputs") {
    cfg.tau = 0;
    CHECK_THROWS_AS(pretrain_run(domains, cfg), std::invalid_argument);
    cfg = tiny_config();
    cfg.encoder.input_dim = 9;
    CHECK_THROWS_AS(pretrain_run(domains, cfg), ShapeError);
    CHECK_THROWS_AS(pretrain_run({}, tiny_config()), std::invalid_argument);
  }
}

TEST_CASE("config json round trip") {
  auto c = tiny_config();
  c.alpha = 0.25;
  c.train_structure_tokens = false;
  auto back = PretrainConfig::from_json(nlohmann::json::parse(c.to_json().dump()), PretrainConfig{});
  CHECK(back.to_json() == c.to_json());
  auto partial = PretrainConfig::from_json(nlohmann::json{{"steps", 7}}, c);
  CHECK(partial.steps == 7);
  CHECK(partial.alpha == 0.25);
}
