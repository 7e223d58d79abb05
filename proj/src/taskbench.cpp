#include "samgpt/taskbench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>

#include "samgpt/error.hpp"
#include "samgpt/serialize.hpp"
#include "samgpt/textio.hpp"

#ifndef SAMGPT_VERSION
#define SAMGPT_VERSION "unknown"
#endif

namespace samgpt {

std::string format_double(double v) {
  std::string s;
  append_double(s, v);
  return s;
}

// ---------------------------------------------------------------------------
// Episodes

std::string TaskEpisode::fingerprint() const {
  std::string text = to_string(kind);
  auto put = [&text](char tag, const auto& ids) {
    text += tag;
    for (auto id : ids) {
      text += std::to_string(id);
      text += ',';
    }
  };
  put('S', support);
  put('s', support_labels);
  put('Q', query);
  put('q', query_labels);
  return sha256_hex(text);
}

std::vector<std::size_t> proportional_quota(std::span<const std::size_t> weights, std::size_t total) {
  const std::size_t sum = std::accumulate(weights.begin(), weights.end(), std::size_t{0});
  std::vector<std::size_t> out(weights.size(), 0);
  if (sum == 0 || total == 0) return out;
  if (total > sum) throw std::invalid_argument("proportional_quota: total exceeds the sum of weights");
  std::vector<std::size_t> remainder(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    // exact integer arithmetic: quota = floor(w * total / sum), remainder in units of 1/sum
    const auto prod = static_cast<unsigned __int128>(weights[i]) * total;
    out[i] = static_cast<std::size_t>(prod / sum);
    remainder[i] = static_cast<std::size_t>(prod % sum);
    assigned += out[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&remainder](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++out[order[k]];
  return out;
}

std::vector<TaskEpisode> make_episodes(const GraphBundle& g, TaskKind kind, std::size_t shots,
                                       std::size_t episodes, std::size_t seeds, std::uint64_t base_seed,
                                       std::size_t query_cap) {
  if (shots < 1) throw std::invalid_argument("make_episodes: shots must be >= 1");
  if (query_cap < 1) throw std::invalid_argument("make_episodes: query cap must be >= 1");
  const std::size_t num_classes = g.num_classes();
  if (num_classes < 2) throw EpisodeError("make_episodes: need at least 2 classes, got " + std::to_string(num_classes));

  std::vector<std::vector<NodeId>> by_class(num_classes);
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    const int y = g.label(static_cast<NodeId>(v));
    if (y >= 0) by_class[static_cast<std::size_t>(y)].push_back(static_cast<NodeId>(v));
  }
  for (std::size_t c = 0; c < num_classes; ++c)
    if (by_class[c].size() < shots + 1)
      throw EpisodeError("class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                         " labeled nodes, needs at least " + std::to_string(shots + 1) + " for a " +
                         std::to_string(shots) + "-shot episode");

  std::vector<TaskEpisode> out;
  out.reserve(episodes * seeds);
  for (std::size_t s = 0; s < seeds; ++s) {
    for (std::size_t e = 0; e < episodes; ++e) {
      Rng rng(derive_seed(base_seed, {0xe9u, s, e}));
      TaskEpisode ep;
      ep.kind = kind;
      ep.index = e;
      ep.seed = s;
      ep.num_classes = num_classes;

      std::vector<std::vector<NodeId>> rest(num_classes);
      for (std::size_t c = 0; c < num_classes; ++c) {
        const auto& pool = by_class[c];
        std::vector<char> taken(pool.size(), 0);
        for (std::size_t i : rng.sample_without_replacement(pool.size(), shots)) {
          taken[i] = 1;
          ep.support.push_back(pool[i]);
          ep.support_labels.push_back(static_cast<int>(c));
        }
        for (std::size_t i = 0; i < pool.size(); ++i)
          if (!taken[i]) rest[c].push_back(pool[i]);
      }

      std::vector<std::size_t> sizes(num_classes);
      for (std::size_t c = 0; c < num_classes; ++c) sizes[c] = rest[c].size();
      const std::size_t available = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
      const auto quota = proportional_quota(sizes, std::min(query_cap, available));

      std::vector<std::pair<NodeId, int>> queries;
      for (std::size_t c = 0; c < num_classes; ++c)
        for (std::size_t i : rng.sample_without_replacement(rest[c].size(), quota[c]))
          queries.emplace_back(rest[c][i], static_cast<int>(c));
      std::sort(queries.begin(), queries.end());
      for (const auto& [v, y] : queries) {
        ep.query.push_back(v);
        ep.query_labels.push_back(y);
      }
      out.push_back(std::move(ep));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

EmbedInput instances_input(const Checkpoint& ckpt, const GraphBundle& target, TaskKind kind,
                           std::span<const NodeId> nodes, int ego_radius) {
  const int L = ckpt.encoder.num_layers();
  if (kind == TaskKind::node) return EmbedInput::nodes(target, L, nodes);
  std::vector<GraphBundle> graphs;
  graphs.reserve(nodes.size());
  for (NodeId v : nodes) graphs.push_back(ego_network(target, v, ego_radius));
  return EmbedInput::graphs(graphs, L);
}

}  // namespace

EpisodeOutcome run_episode(const Checkpoint& ckpt, const GraphBundle& target, const TaskEpisode& episode,
                           const AdaptOptions& options, int ego_radius) {
  const auto support = instances_input(ckpt, target, episode.kind, episode.support, ego_radius);
  const TuneResult tuned = prompt_tune(ckpt, support, episode.support_labels, episode.num_classes, options);
  const auto queries = instances_input(ckpt, target, episode.kind, episode.query, ego_radius);
  const auto predicted = predict(embed_eval(ckpt, tuned.prompts, queries, options), tuned.prototypes);
  EpisodeOutcome out;
  out.total = predicted.size();
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == episode.query_labels[i]) ++out.correct;
  return out;
}

Variant parse_variant(const std::string& s) {
  if (s == "v1") return Variant::v1;
  if (s == "v2") return Variant::v2;
  if (s == "v3") return Variant::v3;
  if (s == "v4") return Variant::v4;
  if (s == "full") return Variant::full;
  throw std::invalid_argument("unknown variant '" + s + "' (expected full, v1, v2, v3 or v4)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::v1: return "v1";
    case Variant::v2: return "v2";
    case Variant::v3: return "v3";
    case Variant::v4: return "v4";
    case Variant::full: return "full";
  }
  return "full";
}

AdaptOptions apply_variant(Variant v, AdaptOptions options) {
  options.holistic = v == Variant::v4 || v == Variant::full;
  options.specific = v == Variant::v2 || v == Variant::full;
  return options;
}

bool variant_trains_tokens(Variant v) { return v != Variant::v1; }

std::size_t worker_count() {
  if (const char* env = std::getenv("SAMGPT_THREADS"); env && *env) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1) throw std::invalid_argument("SAMGPT_THREADS must be a positive integer");
    return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& body) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::vector<std::exception_ptr> errors(n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
          for (std::size_t i = next++; i < n && !failed; i = next++) {
            try {
              body(i);
            } catch (...) {
              errors[i] = std::current_exception();
              failed = true;
            }
          }
        });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void check_cross_domain(const Checkpoint& ckpt, const std::string& target_domain) {
  for (const auto& name : ckpt.roster)
    if (name == target_domain)
      throw RosterError("cross-domain violation: target domain '" + target_domain + "' is in the source roster");
}

std::vector<double> run_episodes(const Checkpoint& ckpt, const GraphBundle& target,
                                 const std::vector<TaskEpisode>& episodes, const AdaptOptions& options,
                                 int ego_radius, std::size_t workers) {
  check_cross_domain(ckpt, target.domain_name());
  std::vector<double> acc(episodes.size());
  parallel_for(episodes.size(), workers, [&](std::size_t i) {
    acc[i] = run_episode(ckpt, target, episodes[i], options, ego_radius).accuracy();
  });
  return acc;
}

// ---------------------------------------------------------------------------
// Results

double ResultRow::mean() const {
  if (accuracies.empty()) return 0.0;
  return std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / static_cast<double>(accuracies.size());
}

double ResultRow::stddev() const {
  if (accuracies.empty()) return 0.0;
  const double m = mean();
  double ss = 0.0;
  for (double a : accuracies) ss += (a - m) * (a - m);
  return std::sqrt(ss / static_cast<double>(accuracies.size()));
}

std::string ResultTable::results_tsv(const std::vector<TaskEpisode>& episodes) const {
  std::string out = "config\tepisode\tseed\taccuracy\n";
  for (const auto& row : rows) {
    if (row.accuracies.size() != episodes.size())
      throw std::logic_error("results: row '" + row.config + "' does not match the episode list");
    for (std::size_t i = 0; i < episodes.size(); ++i) {
      out += row.config + '\t' + std::to_string(episodes[i].index) + '\t' + std::to_string(episodes[i].seed) + '\t';
      append_double(out, row.accuracies[i]);
      out += '\n';
    }
  }
  return out;
}

std::string ResultTable::summary_tsv() const {
  std::string out = "config\tmean\tstd\tn\n";
  char buf[64];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "\t%.2f\t%.2f\t%zu\n", 100.0 * row.mean(), 100.0 * row.stddev(),
                  row.accuracies.size());
    out += row.config + buf;
  }
  return out;
}

ResultTable ablation_matrix(const std::vector<Variant>& variants,
                            const std::function<const Checkpoint&(bool trains_tokens)>& checkpoint_for,
                            const GraphBundle& target, const std::vector<TaskEpisode>& episodes,
                            const AdaptOptions& options, int ego_radius, std::size_t workers) {
  ResultTable table;
  for (Variant v : variants) {
    const Checkpoint& ckpt = checkpoint_for(variant_trains_tokens(v));
    table.rows.push_back(
        {to_string(v), run_episodes(ckpt, target, episodes, apply_variant(v, options), ego_radius, workers)});
  }
  return table;
}

ResultTable sensitivity_sweep(const std::string& parameter, const std::vector<double>& grid,
                              const std::function<const Checkpoint&(double alpha)>& checkpoint_for,
                              double alpha, const GraphBundle& target, const std::vector<TaskEpisode>& episodes,
                              const AdaptOptions& options, int ego_radius, std::size_t workers) {
  if (grid.empty()) throw std::invalid_argument("sensitivity sweep: empty grid");
  if (parameter != "alpha" && parameter != "beta")
    throw std::invalid_argument("sensitivity sweep: parameter must be alpha or beta");
  ResultTable table;
  for (double value : grid) {
    AdaptOptions o = options;
    if (parameter == "beta") o.beta = value;
    const Checkpoint& ckpt = checkpoint_for(parameter == "alpha" ? value : alpha);
    table.rows.push_back({parameter + "=" + format_double(value),
                          run_episodes(ckpt, target, episodes, o, ego_radius, workers)});
  }
  return table;
}

// ---------------------------------------------------------------------------
// Plans

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

BenchmarkPlan BenchmarkPlan::from_json(const nlohmann::json& j, const std::filesystem::path& base) {
  static const std::set<std::string> known{"sources", "target", "task", "shots", "episodes", "seeds", "variants",
                                           "alpha_grid", "beta_grid", "pretrain", "adapt", "model", "query_cap",
                                           "max_source_nodes", "seed", "out", "cache", "checkpoint", "threads"};
  if (!j.is_object()) throw std::invalid_argument("plan: expected a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw std::invalid_argument("plan: unknown key '" + key + "'");

  BenchmarkPlan p;
  for (const auto& s : j.value("sources", std::vector<std::string>{})) p.sources.push_back(resolve(base, s));
  if (j.contains("target")) p.target = resolve(base, j.at("target").get<std::string>());
  p.task = parse_task_kind(j.value("task", std::string("node")));
  p.shots = j.value("shots", p.shots);
  p.episodes = j.value("episodes", p.episodes);
  p.seeds = j.value("seeds", p.seeds);
  if (j.contains("variants")) {
    p.variants.clear();
    for (const auto& v : j.at("variants")) p.variants.push_back(parse_variant(v.get<std::string>()));
  }
  p.alpha_grid = j.value("alpha_grid", p.alpha_grid);
  p.beta_grid = j.value("beta_grid", p.beta_grid);
  p.query_cap = j.value("query_cap", p.query_cap);
  p.max_source_nodes = j.value("max_source_nodes", p.max_source_nodes);
  p.seed = j.value("seed", p.seed);
  p.threads = j.value("threads", p.threads);
  if (j.contains("out")) p.out = resolve(base, j.at("out").get<std::string>());
  if (j.contains("cache")) p.cache = resolve(base, j.at("cache").get<std::string>());
  if (j.contains("checkpoint")) p.checkpoint = resolve(base, j.at("checkpoint").get<std::string>());

  PretrainConfig pre;
  pre.seed = p.seed;
  if (j.contains("pretrain")) pre = PretrainConfig::from_json(j.at("pretrain"), pre);
  if (j.contains("model")) {
    const auto& m = j.at("model");
    pre.encoder.input_dim = m.value("dal_dim", pre.encoder.input_dim);
    pre.encoder.hidden_dim = m.value("hidden", pre.encoder.hidden_dim);
    pre.encoder.num_layers = m.value("layers", pre.encoder.num_layers);
  }
  p.pretrain = pre;
  if (j.contains("adapt")) {
    const auto& a = j.at("adapt");
    p.adapt.beta = a.value("beta", p.adapt.beta);
    p.adapt.tune_steps = a.value("tune_steps", p.adapt.tune_steps);
    p.adapt.tune_lr = a.value("tune_lr", p.adapt.tune_lr);
    p.ego_radius = a.value("ego_radius", p.ego_radius);
  }
  return p;
}

nlohmann::ordered_json BenchmarkPlan::to_json() const {
  nlohmann::ordered_json j;
  j["sources"] = nlohmann::ordered_json::array();
  for (const auto& s : sources) j["sources"].push_back(s.string());
  j["target"] = target.string();
  j["task"] = to_string(task);
  j["shots"] = shots;
  j["episodes"] = episodes;
  j["seeds"] = seeds;
  j["variants"] = nlohmann::ordered_json::array();
  for (Variant v : variants) j["variants"].push_back(to_string(v));
  j["alpha_grid"] = alpha_grid;
  j["beta_grid"] = beta_grid;
  j["pretrain"] = pretrain.to_json();
  j["adapt"] = {{"beta", adapt.beta}, {"tune_steps", adapt.tune_steps}, {"tune_lr", adapt.tune_lr},
                {"ego_radius", ego_radius}};
  j["query_cap"] = query_cap;
  j["max_source_nodes"] = max_source_nodes;
  j["seed"] = seed;
  j["out"] = out.string();
  j["cache"] = cache.string();
  j["checkpoint"] = checkpoint.string();
  j["threads"] = threads;
  return j;
}

void BenchmarkPlan::validate() const {
  if (sources.empty() && checkpoint.empty()) throw std::invalid_argument("plan: no source domains");
  if (target.empty()) throw std::invalid_argument("plan: no target domain");
  if (shots < 1 || episodes < 1 || seeds < 1) throw std::invalid_argument("plan: shots, episodes and seeds must be >= 1");
  if (variants.empty()) throw std::invalid_argument("plan: no variants");
  if (ego_radius < 1) throw std::invalid_argument("plan: ego_radius must be >= 1");
  if (!(adapt.tune_lr > 0.0)) throw std::invalid_argument("plan: tune_lr must be > 0");
  if (!checkpoint.empty() && !alpha_grid.empty())
    throw std::invalid_argument("plan: an alpha grid needs pre-training; drop 'checkpoint'");
  pretrain.validate();
}

void align_bundle(GraphBundle& g, DimAligner& aligner, const std::filesystem::path& cache) {
  g.set_features(cache.empty() ? aligner.align(g.domain_name(), g.features())
                               : aligner.align_cached(g.domain_name(), g.features(), cache));
}

std::vector<GraphBundle> load_sources(const std::vector<std::filesystem::path>& paths, DimAligner& aligner,
                                      std::size_t max_nodes, std::uint64_t seed, const std::filesystem::path& cache) {
  std::vector<GraphBundle> out;
  std::set<std::string> names;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    GraphBundle g = load_bundle(paths[i]);
    if (!names.insert(g.domain_name()).second)
      throw RosterError("source domain '" + g.domain_name() + "' appears twice in the roster");
    if (max_nodes && g.num_nodes() > max_nodes) g = subsample(g, max_nodes, derive_seed(seed, {0x5bu, i}));
    align_bundle(g, aligner, cache);
    out.push_back(std::move(g));
  }
  return out;
}

BenchmarkRun run_benchmark(const BenchmarkPlan& plan, const std::function<void(const std::string&)>& log) {
  plan.validate();
  auto say = [&log](const std::string& s) {
    if (log) log(s);
  };
  const std::size_t workers = plan.threads ? plan.threads : worker_count();
  DimAligner aligner(plan.pretrain.encoder.input_dim);
  GraphBundle target = load_bundle(plan.target);
  std::vector<GraphBundle> sources = load_sources(plan.sources, aligner, plan.max_source_nodes, plan.seed, plan.cache);
  for (const auto& g : sources)
    if (g.domain_name() == target.domain_name())
      throw RosterError("cross-domain violation: target domain '" + target.domain_name() +
                        "' is in the source roster");
  align_bundle(target, aligner, plan.cache);
  say("aligned " + std::to_string(sources.size()) + " source domains and target '" + target.domain_name() + "'");

  // checkpoints keyed by (structure tokens trained, alpha)
  std::map<std::pair<bool, double>, Checkpoint> checkpoints;
  std::optional<Checkpoint> given;
  if (!plan.checkpoint.empty()) given = load_checkpoint(plan.checkpoint);
  auto checkpoint_for = [&](bool tokens, double alpha) -> const Checkpoint& {
    if (given) {
      if (given->structure_tokens_trained != tokens)
        throw RosterError(std::string("plan: checkpoint ") +
                          (tokens ? "lacks trained structure tokens" : "has trained structure tokens") +
                          " but a requested variant needs the opposite");
      return *given;
    }
    const auto key = std::make_pair(tokens, alpha);
    if (auto it = checkpoints.find(key); it != checkpoints.end()) return it->second;
    PretrainConfig cfg = plan.pretrain;
    cfg.alpha = alpha;
    cfg.train_structure_tokens = tokens;
    say("pre-training (structure tokens " + std::string(tokens ? "on" : "off") + ", alpha " + format_double(alpha) +
        ", " + std::to_string(cfg.steps) + " steps)");
    auto result = pretrain_run(sources, cfg);
    result.checkpoint.freeze();
    return checkpoints.emplace(key, std::move(result.checkpoint)).first->second;
  };

  BenchmarkRun run;
  run.episodes = make_episodes(target, plan.task, plan.shots, plan.episodes, plan.seeds, plan.seed, plan.query_cap);
  say("generated " + std::to_string(run.episodes.size()) + " episodes");

  const std::vector<double> alphas = plan.alpha_grid.empty() ? std::vector<double>{plan.pretrain.alpha} : plan.alpha_grid;
  const std::vector<double> betas = plan.beta_grid.empty() ? std::vector<double>{plan.adapt.beta} : plan.beta_grid;
  for (Variant v : plan.variants) {
    for (double alpha : alphas) {
      const Checkpoint& ckpt = checkpoint_for(variant_trains_tokens(v), alpha);
      check_cross_domain(ckpt, target.domain_name());
      for (double beta : betas) {
        std::string name = to_string(v);
        if (!plan.alpha_grid.empty()) name += "/alpha=" + format_double(alpha);
        if (!plan.beta_grid.empty()) name += "/beta=" + format_double(beta);
        AdaptOptions options = apply_variant(v, plan.adapt);
        options.beta = beta;
        say("evaluating " + name);
        run.table.rows.push_back({name, run_episodes(ckpt, target, run.episodes, options, plan.ego_radius, workers)});
      }
    }
  }

  auto& r = run.report;
  r["version"] = SAMGPT_VERSION;
  r["plan"] = plan.to_json();
  r["target"] = target.domain_name();
  r["roster"] = nlohmann::ordered_json::array();
  for (const auto& g : sources) r["roster"].push_back(g.domain_name());
  if (given) r["roster"] = given->roster;
  r["task"] = to_string(plan.task);
  r["shots"] = plan.shots;
  r["alpha"] = alphas;
  r["beta"] = betas;
  r["tau"] = given ? given->tau : plan.pretrain.tau;
  r["dal_dim"] = plan.pretrain.encoder.input_dim;
  r["layers"] = plan.pretrain.encoder.num_layers;
  r["widths"] = nlohmann::ordered_json::array();
  for (int l = 0; l <= plan.pretrain.encoder.num_layers; ++l)
    r["widths"].push_back(l == 0 ? plan.pretrain.encoder.input_dim : plan.pretrain.encoder.hidden_dim);
  r["variants"] = nlohmann::ordered_json::array();
  for (Variant v : plan.variants) r["variants"].push_back(to_string(v));
  r["variant_semantics"] = {
      {"v1", "pre-trained without structure tokens; holistic and specific prompts off"},
      {"v2", "structure tokens pre-trained; specific prompts only (token provenance is ambiguous, tokens trained)"},
      {"v3", "structure tokens pre-trained; holistic and specific prompts off"},
      {"v4", "structure tokens pre-trained; holistic prompts only"},
      {"full", "structure tokens pre-trained; holistic and specific prompts"}};
  r["seed"] = plan.seed;
  r["feature_alignment"] = "domain feature tokens (in-repo)";
  r["query_cap"] = plan.query_cap;
  r["outcomes_per_config"] = run.episodes.size();
  r["dal_rank"] = aligner.ranks();
  r["checkpoints"] = nlohmann::ordered_json::array();
  if (given) {
    r["checkpoints"].push_back({{"path", plan.checkpoint.string()},
                                {"structure_tokens", given->structure_tokens_trained},
                                {"alpha", given->alpha},
                                {"sha256", checkpoint_hash(*given)}});
  }
  for (const auto& [key, ckpt] : checkpoints)
    r["checkpoints"].push_back(
        {{"structure_tokens", key.first}, {"alpha", key.second}, {"sha256", checkpoint_hash(ckpt)}});
  std::string fingerprints;
  for (const auto& ep : run.episodes) fingerprints += ep.fingerprint();
  r["episodes_sha256"] = sha256_hex(fingerprints);
  r["summary"] = nlohmann::ordered_json::array();
  for (const auto& row : run.table.rows)
    r["summary"].push_back({{"config", row.config}, {"mean", row.mean()}, {"std", row.stddev()}});
  return run;
}

void write_benchmark(const BenchmarkRun& run, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  auto write = [&out](const std::string& name, const std::string& text) {
    std::ofstream f(out / name, std::ios::binary);
    if (!f) throw LoadError("cannot write " + (out / name).string());
    f << text;
    if (!f) throw LoadError("write failed: " + (out / name).string());
  };
  write("results.tsv", run.table.results_tsv(run.episodes));
  write("summary.tsv", run.table.summary_tsv());
  write("report.json", run.report.dump(2) + "\n");
}

}  // namespace samgpt
