#include "samgpt/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "samgpt/error.hpp"
#include "samgpt/synth.hpp"
#include "samgpt/taskbench.hpp"
#include "samgpt/textio.hpp"

namespace fs = std::filesystem;

namespace samgpt {
namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out << text;
}

// flags > config file > defaults: copy a flag's value only when it was given
template <class T, class U>
void flag(const CLI::Option* opt, T& field, const U& value) {
  if (opt->count() > 0) field = static_cast<T>(value);
}

// ---------------------------------------------------------------------------
// convert

struct ConvertArgs {
  std::string edges, features, labels, out, name;
  std::size_t num_classes = 0;
  char delimiter = ',';
};

void run_convert(const ConvertArgs& a, std::ostream& out) {
  std::vector<std::string_view> fields;

  Matrix x;
  {
    LineReader reader(a.features);
    std::vector<std::vector<double>> rows;
    while (auto line = reader.next()) {
      split_fields(*line, a.delimiter, fields);
      if (!rows.empty() && fields.size() != rows.front().size())
        reader.fail("ragged row: " + std::to_string(fields.size()) + " columns, expected " +
                    std::to_string(rows.front().size()));
      std::vector<double> row;
      row.reserve(fields.size());
      for (auto f : fields) row.push_back(reader.parse_double(f));
      rows.push_back(std::move(row));
    }
    if (rows.empty()) throw LoadError(a.features + ": no feature rows");
    x.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < rows[r].size(); ++c) x(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  }
  const auto n = static_cast<std::size_t>(x.rows());

  std::vector<std::string> raw_labels;
  {
    LineReader reader(a.labels);
    while (auto line = reader.next()) {
      split_fields(*line, ' ', fields);
      if (fields.size() != 1) reader.fail("expected one label per line");
      raw_labels.emplace_back(fields[0]);
    }
    if (raw_labels.size() != n)
      throw LoadError(a.labels + ": " + std::to_string(raw_labels.size()) + " labels for " + std::to_string(n) +
                      " feature rows");
  }
  std::vector<int> labels(n);
  bool numeric = true;
  for (const auto& s : raw_labels)
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) numeric = false;
  if (numeric) {
    for (std::size_t i = 0; i < n; ++i) labels[i] = std::stoi(raw_labels[i]);
  } else {
    // class names map to ids in sorted order
    std::map<std::string, int> ids;
    for (const auto& s : raw_labels) ids.emplace(s, 0);
    int next = 0;
    for (auto& [name, id] : ids) {
      id = next++;
      out << "label\t" << id << '\t' << name << '\n';
    }
    for (std::size_t i = 0; i < n; ++i) labels[i] = ids.at(raw_labels[i]);
  }
  std::size_t classes = a.num_classes;
  for (int y : labels) classes = std::max(classes, static_cast<std::size_t>(y) + 1);

  std::vector<Edge> edges;
  {
    LineReader reader(a.edges);
    while (auto line = reader.next()) {
      split_fields(*line, line->find(',') != std::string_view::npos ? ',' : ' ', fields);
      if (fields.size() != 2) reader.fail("expected 2 fields per edge, got " + std::to_string(fields.size()));
      const long long u = reader.parse_int(fields[0]);
      const long long v = reader.parse_int(fields[1]);
      if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n)
        reader.fail("node index out of range [0, " + std::to_string(n) + ")");
      edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    }
  }
  const std::string name = a.name.empty() ? fs::path(a.out).filename().string() : a.name;
  const GraphBundle g = GraphBundle::from_edges(name, n, edges, std::move(x), std::move(labels), classes);
  save_bundle(g, a.out);
  out << "bundle\t" << a.out << "\nnodes\t" << g.num_nodes() << "\nedges\t" << g.num_undirected_edges()
      << "\nfeature_dim\t" << g.feature_dim() << "\nnum_classes\t" << g.num_classes() << '\n';
}

// ---------------------------------------------------------------------------
// pretrain

struct PretrainArgs {
  std::vector<std::string> sources;
  std::string out, config, cache;
  std::size_t max_source_nodes = 0;
  PretrainConfig cfg;
  bool no_tokens = false;
};

void run_pretrain(PretrainArgs a, const std::map<std::string, CLI::Option*>& opts, std::ostream& out,
                  std::ostream& err) {
  PretrainConfig cfg;
  std::vector<std::string> sources;
  std::string dest, cache;
  std::size_t max_nodes = 0;
  if (!a.config.empty()) {
    const auto j = read_json(a.config);
    cfg = PretrainConfig::from_json(j, cfg);
    sources = j.value("sources", sources);
    dest = j.value("out", dest);
    cache = j.value("cache", cache);
    max_nodes = j.value("max_source_nodes", max_nodes);
  }
  flag(opts.at("source"), sources, a.sources);
  flag(opts.at("out"), dest, a.out);
  flag(opts.at("cache"), cache, a.cache);
  flag(opts.at("max-source-nodes"), max_nodes, a.max_source_nodes);
  flag(opts.at("steps"), cfg.steps, a.cfg.steps);
  flag(opts.at("lr"), cfg.learning_rate, a.cfg.learning_rate);
  flag(opts.at("alpha"), cfg.alpha, a.cfg.alpha);
  flag(opts.at("tau"), cfg.tau, a.cfg.tau);
  flag(opts.at("batch"), cfg.subgraphs_per_domain, a.cfg.subgraphs_per_domain);
  flag(opts.at("edge-drop"), cfg.edge_drop_ratio, a.cfg.edge_drop_ratio);
  flag(opts.at("radius"), cfg.subgraph_radius, a.cfg.subgraph_radius);
  flag(opts.at("dal-dim"), cfg.encoder.input_dim, a.cfg.encoder.input_dim);
  flag(opts.at("hidden"), cfg.encoder.hidden_dim, a.cfg.encoder.hidden_dim);
  flag(opts.at("layers"), cfg.encoder.num_layers, a.cfg.encoder.num_layers);
  flag(opts.at("seed"), cfg.seed, a.cfg.seed);
  if (a.no_tokens) cfg.train_structure_tokens = false;
  if (sources.empty()) throw std::invalid_argument("pretrain: no source bundles (--sources)");
  if (dest.empty()) throw std::invalid_argument("pretrain: no output directory (--out)");
  cfg.validate();

  std::vector<fs::path> paths(sources.begin(), sources.end());
  DimAligner aligner(cfg.encoder.input_dim);
  const auto domains = load_sources(paths, aligner, max_nodes, cfg.seed, cache);
  std::string log = "step\tloss\n";
  auto result = pretrain_run(domains, cfg, [&](std::size_t step, double loss) {
    log += std::to_string(step) + '\t';
    append_double(log, loss);
    log += '\n';
    if (step % 10 == 0 || step == cfg.steps) err << "step " << step << " loss " << loss << '\n';
  });
  save_checkpoint(result.checkpoint, dest);
  write_text(fs::path(dest) / "pretrain_log.tsv", log);
  out << "checkpoint\t" << dest << "\nsha256\t" << checkpoint_hash(result.checkpoint) << '\n';
  for (const auto& [name, rank] : aligner.ranks()) out << "dal_rank\t" << name << '\t' << rank << '\n';
}

// ---------------------------------------------------------------------------
// adapt

struct AdaptArgs {
  std::string ckpt, target, config, out, cache, task = "node", variant = "full";
  std::size_t shots = 1, episodes = 100, seeds = 5, query_cap = 200, threads = 0;
  std::uint64_t seed = 0;
  int ego_radius = 2;
  AdaptOptions options;
};

void run_adapt(const AdaptArgs& a, const std::map<std::string, CLI::Option*>& opts, std::ostream& out) {
  AdaptArgs r;  // resolved
  if (!a.config.empty()) {
    const auto j = read_json(a.config);
    r.task = j.value("task", r.task);
    r.variant = j.value("variant", r.variant);
    r.shots = j.value("shots", r.shots);
    r.episodes = j.value("episodes", r.episodes);
    r.seeds = j.value("seeds", r.seeds);
    r.query_cap = j.value("query_cap", r.query_cap);
    r.seed = j.value("seed", r.seed);
    r.ego_radius = j.value("ego_radius", r.ego_radius);
    r.options.beta = j.value("beta", r.options.beta);
    r.options.tune_steps = j.value("tune_steps", r.options.tune_steps);
    r.options.tune_lr = j.value("tune_lr", r.options.tune_lr);
  }
  r.ckpt = a.ckpt;
  r.target = a.target;
  r.out = a.out;
  r.cache = a.cache;
  r.threads = a.threads;
  flag(opts.at("task"), r.task, a.task);
  flag(opts.at("variant"), r.variant, a.variant);
  flag(opts.at("shots"), r.shots, a.shots);
  flag(opts.at("episodes"), r.episodes, a.episodes);
  flag(opts.at("seeds"), r.seeds, a.seeds);
  flag(opts.at("query-cap"), r.query_cap, a.query_cap);
  flag(opts.at("seed"), r.seed, a.seed);
  flag(opts.at("ego-radius"), r.ego_radius, a.ego_radius);
  flag(opts.at("beta"), r.options.beta, a.options.beta);
  flag(opts.at("tune-steps"), r.options.tune_steps, a.options.tune_steps);
  flag(opts.at("tune-lr"), r.options.tune_lr, a.options.tune_lr);

  const TaskKind kind = parse_task_kind(r.task);
  const Variant variant = parse_variant(r.variant);
  const Checkpoint ckpt = load_checkpoint(r.ckpt);
  GraphBundle target = load_bundle(r.target);
  check_cross_domain(ckpt, target.domain_name());
  if (variant_trains_tokens(variant) != ckpt.structure_tokens_trained)
    throw std::invalid_argument("adapt: variant " + r.variant + (ckpt.structure_tokens_trained
                                                                     ? " needs a checkpoint pre-trained without structure tokens"
                                                                     : " needs a checkpoint with trained structure tokens"));
  DimAligner aligner(ckpt.encoder.config().input_dim);
  align_bundle(target, aligner, r.cache);
  const auto episodes = make_episodes(target, kind, r.shots, r.episodes, r.seeds, r.seed, r.query_cap);
  const AdaptOptions options = apply_variant(variant, r.options);
  BenchmarkRun run;
  run.episodes = episodes;
  run.table.rows.push_back({r.variant, run_episodes(ckpt, target, episodes, options, r.ego_radius,
                                                    r.threads ? r.threads : worker_count())});

  out << "episode\tseed\taccuracy\n";
  for (std::size_t i = 0; i < episodes.size(); ++i)
    out << episodes[i].index << '\t' << episodes[i].seed << '\t' << format_double(run.table.rows[0].accuracies[i])
        << '\n';
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f\t%.2f", 100.0 * run.table.rows[0].mean(), 100.0 * run.table.rows[0].stddev());
  out << "mean\tstd\n" << buf << '\n';

  if (!r.out.empty()) {
    auto& rep = run.report;
    rep["checkpoint"] = r.ckpt;
    rep["checkpoint_sha256"] = checkpoint_hash(ckpt);
    rep["target"] = target.domain_name();
    rep["roster"] = ckpt.roster;
    rep["task"] = r.task;
    rep["variant"] = r.variant;
    rep["shots"] = r.shots;
    rep["episodes"] = r.episodes;
    rep["seeds"] = r.seeds;
    rep["seed"] = r.seed;
    rep["alpha"] = ckpt.alpha;
    rep["beta"] = r.options.beta;
    rep["tau"] = ckpt.tau;
    rep["dal_dim"] = ckpt.encoder.config().input_dim;
    rep["layers"] = ckpt.encoder.num_layers();
    rep["widths"] = nlohmann::ordered_json::array();
    for (int l = 0; l < ckpt.encoder.num_layers(); ++l) rep["widths"].push_back(ckpt.encoder.in_dim(l));
    rep["widths"].push_back(ckpt.encoder.out_dim());
    rep["tune_steps"] = r.options.tune_steps;
    rep["tune_lr"] = r.options.tune_lr;
    rep["ego_radius"] = r.ego_radius;
    rep["query_cap"] = r.query_cap;
    rep["feature_alignment"] = "domain feature tokens (in-repo)";
    rep["dal_rank"] = aligner.ranks();
    write_benchmark(run, r.out);
  }
}

// ---------------------------------------------------------------------------
// bench / sweep

struct BenchArgs {
  std::string plan, out, param;
  std::size_t episodes = 0, seeds = 0, threads = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> variants;
  std::vector<double> grid;
};

BenchmarkPlan resolve_plan(const BenchArgs& a, const std::map<std::string, CLI::Option*>& opts) {
  const fs::path plan_path(a.plan);
  BenchmarkPlan plan = BenchmarkPlan::from_json(read_json(plan_path), plan_path.parent_path());
  if (opts.at("out")->count()) plan.out = a.out;
  flag(opts.at("episodes"), plan.episodes, a.episodes);
  flag(opts.at("seeds"), plan.seeds, a.seeds);
  flag(opts.at("threads"), plan.threads, a.threads);
  if (opts.at("seed")->count()) {
    plan.seed = a.seed;
    plan.pretrain.seed = a.seed;
  }
  if (opts.count("variant") && opts.at("variant")->count()) {
    plan.variants.clear();
    for (const auto& v : a.variants) plan.variants.push_back(parse_variant(v));
  }
  return plan;
}

void run_bench(const BenchmarkPlan& plan, std::ostream& out, std::ostream& err) {
  const auto run = run_benchmark(plan, [&err](const std::string& s) { err << s << '\n'; });
  write_benchmark(run, plan.out);
  out << run.table.summary_tsv();
}

// ---------------------------------------------------------------------------
// misc

void run_stats(const std::string& bundle, std::size_t samples, std::uint64_t seed, std::ostream& out) {
  const GraphBundle g = load_bundle(bundle);
  const DomainStats s = compute_stats(g, samples, seed);
  std::string line = g.domain_name() + '\t' + std::to_string(s.num_nodes) + '\t' + std::to_string(s.num_edges) + '\t';
  append_double(line, s.avg_node_degree);
  line += '\t';
  append_double(line, s.avg_shortest_path_length);
  line += '\t';
  append_double(line, s.avg_clustering_coefficient);
  out << "domain\tnodes\tedges\tavg_node_degree\tavg_shortest_path\tavg_clustering\n" << line << '\n';
}

void run_inspect(const std::string& dir, std::ostream& out) {
  auto manifest = read_json(fs::path(dir) / "manifest.json");
  const Checkpoint ckpt = load_checkpoint(dir);
  manifest["content_sha256"] = checkpoint_hash(ckpt);
  out << manifest.dump(2) << '\n';
}

int fail(std::ostream& err, const char* category, std::string message, int code) {
  for (char& ch : message)
    if (ch == '\n' || ch == '\r') ch = ' ';
  err << "samgpt: error[" << category << "]: " << message << '\n';
  return code;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-domain graph pre-training and prompt adaptation", "samgpt"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(
#ifdef SAMGPT_VERSION
                                        SAMGPT_VERSION
#else
                                        "unknown"
#endif
                                        ));

  // convert
  ConvertArgs conv;
  auto* c_convert = app.add_subcommand("convert", "Build a bundle from an edge list, feature CSV and labels");
  c_convert->add_option("--edges", conv.edges, "Edge list, one 'u v' or 'u,v' pair per line")->required();
  c_convert->add_option("--features", conv.features, "Feature rows in node order")->required();
  c_convert->add_option("--labels", conv.labels, "One label per line (integers or class names)")->required();
  c_convert->add_option("--out", conv.out, "Bundle directory")->required();
  c_convert->add_option("--name", conv.name, "Domain name (default: output directory name)");
  c_convert->add_option("--num-classes", conv.num_classes, "Class count when some classes are unlabeled");
  c_convert->add_option("--delimiter", conv.delimiter, "Feature column separator")->capture_default_str();

  // stats
  std::string stats_bundle;
  std::size_t stats_samples = 512;
  std::uint64_t stats_seed = 0;
  auto* c_stats = app.add_subcommand("stats", "Domain statistics of a bundle");
  c_stats->add_option("--bundle", stats_bundle)->required();
  c_stats->add_option("--spl-samples", stats_samples, "BFS sources for the shortest-path estimate")
      ->capture_default_str();
  c_stats->add_option("--seed", stats_seed)->capture_default_str();

  // subsample
  std::string sub_bundle, sub_out, sub_name;
  std::size_t sub_max = 3000;
  std::uint64_t sub_seed = 0;
  auto* c_sub = app.add_subcommand("subsample", "Snowball-sample a bundle down to a node budget");
  c_sub->add_option("--bundle", sub_bundle)->required();
  c_sub->add_option("--max-nodes", sub_max)->capture_default_str();
  c_sub->add_option("--seed", sub_seed)->capture_default_str();
  c_sub->add_option("--out", sub_out)->required();
  c_sub->add_option("--name", sub_name, "Domain name (default: keep)");

  // synth
  SynthConfig syn;
  std::string syn_out;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic planted-partition bundle");
  c_synth->add_option("--out", syn_out)->required();
  c_synth->add_option("--name", syn.name)->capture_default_str();
  c_synth->add_option("--nodes", syn.num_nodes)->capture_default_str();
  c_synth->add_option("--classes", syn.num_classes)->capture_default_str();
  c_synth->add_option("--feature-dim", syn.feature_dim)->capture_default_str();
  c_synth->add_option("--avg-degree", syn.avg_degree)->capture_default_str();
  c_synth->add_option("--homophily", syn.homophily)->capture_default_str();
  c_synth->add_option("--words", syn.words_per_node)->capture_default_str();
  c_synth->add_option("--seed", syn.seed)->capture_default_str();

  // pretrain
  PretrainArgs pre;
  std::map<std::string, CLI::Option*> pre_opts;
  auto* c_pre = app.add_subcommand("pretrain", "Contrastive multi-domain pre-training");
  pre_opts["source"] = c_pre->add_option("--sources,--source", pre.sources, "Source bundles, comma-separated or repeated (order = roster)")
                          ->delimiter(',');
  pre_opts["out"] = c_pre->add_option("--out", pre.out, "Checkpoint directory");
  c_pre->add_option("--config", pre.config, "JSON config (flags take precedence)");
  pre_opts["cache"] = c_pre->add_option("--cache", pre.cache, "Dimension-alignment cache directory");
  pre_opts["max-source-nodes"] = c_pre->add_option("--max-source-nodes", pre.max_source_nodes, "Snowball cap per source");
  pre_opts["steps"] = c_pre->add_option("--steps", pre.cfg.steps)->capture_default_str();
  pre_opts["lr"] = c_pre->add_option("--lr", pre.cfg.learning_rate)->capture_default_str();
  pre_opts["alpha"] = c_pre->add_option("--alpha", pre.cfg.alpha)->capture_default_str();
  pre_opts["tau"] = c_pre->add_option("--tau", pre.cfg.tau)->capture_default_str();
  pre_opts["batch"] = c_pre->add_option("--batch-per-domain,--batch", pre.cfg.subgraphs_per_domain, "Anchors per domain per step")
                          ->capture_default_str();
  pre_opts["edge-drop"] = c_pre->add_option("--edge-drop", pre.cfg.edge_drop_ratio)->capture_default_str();
  pre_opts["radius"] = c_pre->add_option("--radius", pre.cfg.subgraph_radius)->capture_default_str();
  pre_opts["dal-dim"] = c_pre->add_option("--dal-dim", pre.cfg.encoder.input_dim)->capture_default_str();
  pre_opts["hidden"] = c_pre->add_option("--hidden", pre.cfg.encoder.hidden_dim)->capture_default_str();
  pre_opts["layers"] = c_pre->add_option("--layers", pre.cfg.encoder.num_layers)->capture_default_str();
  pre_opts["seed"] = c_pre->add_option("--seed", pre.cfg.seed)->capture_default_str();
  c_pre->add_flag("--no-structure-tokens", pre.no_tokens, "Keep structure tokens at all-ones (variant 1)");

  // adapt
  AdaptArgs ad;
  std::map<std::string, CLI::Option*> ad_opts;
  auto* c_ad = app.add_subcommand("adapt", "Prompt-tune a checkpoint on few-shot target episodes");
  c_ad->add_option("--ckpt", ad.ckpt)->required();
  c_ad->add_option("--target", ad.target)->required();
  c_ad->add_option("--config", ad.config, "JSON config (flags take precedence)");
  c_ad->add_option("--out", ad.out, "Also write results.tsv, summary.tsv and report.json here");
  c_ad->add_option("--cache", ad.cache, "Dimension-alignment cache directory");
  c_ad->add_option("--threads", ad.threads, "Worker threads (default: SAMGPT_THREADS or all cores)");
  ad_opts["task"] = c_ad->add_option("--task", ad.task)->check(CLI::IsMember({"node", "graph"}))->capture_default_str();
  ad_opts["shots"] = c_ad->add_option("--shots", ad.shots)->capture_default_str();
  ad_opts["episodes"] = c_ad->add_option("--episodes", ad.episodes)->capture_default_str();
  ad_opts["seeds"] = c_ad->add_option("--seeds", ad.seeds)->capture_default_str();
  ad_opts["seed"] = c_ad->add_option("--seed", ad.seed, "Base seed for episode sampling")->capture_default_str();
  ad_opts["query-cap"] = c_ad->add_option("--query-cap", ad.query_cap)->capture_default_str();
  ad_opts["beta"] = c_ad->add_option("--beta", ad.options.beta)->capture_default_str();
  ad_opts["tune-steps"] = c_ad->add_option("--tune-steps", ad.options.tune_steps)->capture_default_str();
  ad_opts["tune-lr"] = c_ad->add_option("--tune-lr", ad.options.tune_lr)->capture_default_str();
  ad_opts["ego-radius"] = c_ad->add_option("--ego-radius", ad.ego_radius)->capture_default_str();
  ad_opts["variant"] = c_ad->add_option("--variant", ad.variant)
                           ->check(CLI::IsMember({"full", "v1", "v2", "v3", "v4"}))
                           ->capture_default_str();

  // bench
  BenchArgs bn;
  std::map<std::string, CLI::Option*> bn_opts;
  auto* c_bench = app.add_subcommand("bench", "Run a benchmark plan (variants x grids over shared episodes)");
  c_bench->add_option("--plan", bn.plan, "Plan JSON")->required();
  bn_opts["out"] = c_bench->add_option("--out", bn.out, "Output directory (overrides plan)");
  bn_opts["episodes"] = c_bench->add_option("--episodes", bn.episodes);
  bn_opts["seeds"] = c_bench->add_option("--seeds", bn.seeds);
  bn_opts["threads"] = c_bench->add_option("--threads", bn.threads);
  bn_opts["seed"] = c_bench->add_option("--seed", bn.seed);
  bn_opts["variant"] = c_bench->add_option("--variant", bn.variants, "Variant (repeatable)")
                           ->check(CLI::IsMember({"full", "v1", "v2", "v3", "v4"}));

  // sweep
  BenchArgs sw;
  std::map<std::string, CLI::Option*> sw_opts;
  auto* c_sweep = app.add_subcommand("sweep", "Sensitivity sweep over alpha or beta");
  c_sweep->add_option("--plan", sw.plan, "Plan JSON")->required();
  c_sweep->add_option("--param", sw.param)->required()->check(CLI::IsMember({"alpha", "beta"}));
  c_sweep->add_option("--grid", sw.grid, "Comma-separated values")->required()->delimiter(',');
  sw_opts["out"] = c_sweep->add_option("--out", sw.out);
  sw_opts["episodes"] = c_sweep->add_option("--episodes", sw.episodes);
  sw_opts["seeds"] = c_sweep->add_option("--seeds", sw.seeds);
  sw_opts["threads"] = c_sweep->add_option("--threads", sw.threads);
  sw_opts["seed"] = c_sweep->add_option("--seed", sw.seed);

  // inspect-ckpt
  std::string inspect_dir;
  auto* c_inspect = app.add_subcommand("inspect-ckpt", "Print a checkpoint manifest and content hash");
  c_inspect->add_option("--ckpt", inspect_dir)->required();

  std::vector<char*> argv;
  std::vector<std::string> storage(args.begin(), args.end());
  if (storage.empty()) storage.emplace_back("samgpt");
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    return fail(err, "usage", e.what(), kExitUsage);
  }

  try {
    if (*c_convert) {
      run_convert(conv, out);
    } else if (*c_stats) {
      run_stats(stats_bundle, stats_samples, stats_seed, out);
    } else if (*c_sub) {
      GraphBundle g = subsample(load_bundle(sub_bundle), sub_max, sub_seed);
      if (!sub_name.empty()) g.set_domain_name(sub_name);
      save_bundle(g, sub_out);
      out << "bundle\t" << sub_out << "\nnodes\t" << g.num_nodes() << "\nedges\t" << g.num_undirected_edges() << '\n';
    } else if (*c_synth) {
      const GraphBundle g = make_synthetic(syn);
      save_bundle(g, syn_out);
      out << "bundle\t" << syn_out << "\nnodes\t" << g.num_nodes() << "\nedges\t" << g.num_undirected_edges() << '\n';
    } else if (*c_pre) {
      run_pretrain(pre, pre_opts, out, err);
    } else if (*c_ad) {
      run_adapt(ad, ad_opts, out);
    } else if (*c_bench) {
      run_bench(resolve_plan(bn, bn_opts), out, err);
    } else if (*c_sweep) {
      BenchmarkPlan plan = resolve_plan(sw, sw_opts);
      plan.variants = {Variant::full};
      if (sw.param == "alpha") {
        plan.alpha_grid = sw.grid;
        plan.beta_grid.clear();
      } else {
        plan.beta_grid = sw.grid;
        plan.alpha_grid.clear();
      }
      run_bench(plan, out, err);
    } else if (*c_inspect) {
      run_inspect(inspect_dir, out);
    }
  } catch (const RosterError& e) {
    return fail(err, "roster", e.what(), kExitRoster);
  } catch (const LoadError& e) {
    return fail(err, "load", e.what(), kExitLoad);
  } catch (const fs::filesystem_error& e) {
    return fail(err, "load", e.what(), kExitLoad);
  } catch (const ShapeError& e) {
    return fail(err, "shape", e.what(), kExitShape);
  } catch (const NumericError& e) {
    return fail(err, "numeric", e.what(), kExitNumeric);
  } catch (const EpisodeError& e) {
    return fail(err, "episode", e.what(), kExitEpisode);
  } catch (const nlohmann::json::exception& e) {
    return fail(err, "usage", std::string("config: ") + e.what(), kExitUsage);
  } catch (const std::invalid_argument& e) {
    return fail(err, "usage", e.what(), kExitUsage);
  } catch (const std::out_of_range& e) {
    return fail(err, "usage", e.what(), kExitUsage);
  } catch (const std::exception& e) {
    return fail(err, "internal", e.what(), kExitInternal);
  }
  return kExitOk;
}

}  // namespace samgpt
