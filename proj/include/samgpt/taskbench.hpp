#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "samgpt/adapt.hpp"
#include "samgpt/pretrain.hpp"

namespace samgpt {

/// One m-shot task. Instances are target node ids; graph tasks wrap each
/// node in its ego-network (labeled by the center).
struct TaskEpisode {
  TaskKind kind = TaskKind::node;
  std::size_t index = 0;  ///< episode number within its seed
  std::size_t seed = 0;   ///< seed number
  std::size_t num_classes = 0;
  std::vector<NodeId> support;
  std::vector<int> support_labels;
  std::vector<NodeId> query;
  std::vector<int> query_labels;

  /// Hash of the support and query index sets, for paired-design checks.
  std::string fingerprint() const;
};

/// Outcome order: all episodes of seed 0, then seed 1, ... Episode (e, s) is
/// drawn from its own stream, so it does not depend on how many others exist.
/// Throws EpisodeError when a class has fewer than m + 1 nodes.
std::vector<TaskEpisode> make_episodes(const GraphBundle& g, TaskKind kind, std::size_t shots,
                                       std::size_t episodes, std::size_t seeds, std::uint64_t base_seed,
                                       std::size_t query_cap = 200);

/// Largest-remainder split of `total` proportional to `weights`; leftover
/// units go to the largest fractional parts, lower index first on ties.
std::vector<std::size_t> proportional_quota(std::span<const std::size_t> weights, std::size_t total);

struct EpisodeOutcome {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

/// Tune prompts on the support set, predict every query. `target` must
/// already be dimension aligned.
EpisodeOutcome run_episode(const Checkpoint& ckpt, const GraphBundle& target, const TaskEpisode& episode,
                           const AdaptOptions& options, int ego_radius);

enum class Variant { v1, v2, v3, v4, full };

Variant parse_variant(const std::string& s);
std::string to_string(Variant v);
/// Which prompts a variant tunes: v1 and v3 neither, v2 specific only,
/// v4 holistic only, full both.
AdaptOptions apply_variant(Variant v, AdaptOptions options);
/// v1 pre-trains without structure tokens; all other variants train them.
bool variant_trains_tokens(Variant v);

/// Worker count: SAMGPT_THREADS if set (>= 1), else hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [0, n) on up to `workers` threads. Rethrows the
/// exception of the lowest failing index.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& body);

/// Throws RosterError when the target domain is one of the checkpoint's sources.
void check_cross_domain(const Checkpoint& ckpt, const std::string& target_domain);

/// Accuracy per episode in episode order.
std::vector<double> run_episodes(const Checkpoint& ckpt, const GraphBundle& target,
                                 const std::vector<TaskEpisode>& episodes, const AdaptOptions& options,
                                 int ego_radius, std::size_t workers);

struct ResultRow {
  std::string config;
  std::vector<double> accuracies;  ///< raw outcomes, episode order

  double mean() const;
  /// Population standard deviation.
  double stddev() const;
};

struct ResultTable {
  std::vector<ResultRow> rows;

  /// `config\tepisode\tseed\taccuracy` per outcome.
  std::string results_tsv(const std::vector<TaskEpisode>& episodes) const;
  /// `config\tmean\tstd\tn` with mean and std in percent.
  std::string summary_tsv() const;
};

/// Everything a benchmark run needs, loaded from JSON.
struct BenchmarkPlan {
  std::vector<std::filesystem::path> sources;
  std::filesystem::path target;
  TaskKind task = TaskKind::node;
  std::size_t shots = 1;
  std::size_t episodes = 100;
  std::size_t seeds = 5;
  std::vector<Variant> variants{Variant::full};
  std::vector<double> alpha_grid;  ///< empty: pretrain.alpha only
  std::vector<double> beta_grid;   ///< empty: adapt.beta only
  PretrainConfig pretrain;
  AdaptOptions adapt;
  int ego_radius = 2;
  std::size_t query_cap = 200;
  std::size_t max_source_nodes = 0;  ///< 0 keeps every node
  std::uint64_t seed = 0;
  std::filesystem::path out = "bench_out";
  std::filesystem::path cache;  ///< DAL cache directory, empty disables
  std::filesystem::path checkpoint;  ///< use instead of pre-training when set
  std::size_t threads = 0;           ///< 0: worker_count()

  /// Relative paths resolve against `base`.
  static BenchmarkPlan from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
  nlohmann::ordered_json to_json() const;
  void validate() const;
};

struct BenchmarkRun {
  ResultTable table;
  std::vector<TaskEpisode> episodes;
  nlohmann::ordered_json report;
};

/// Load source bundles, snowball-subsample each to `max_nodes` (0 keeps all)
/// and dimension-align them with `aligner` (cached when `cache` is set).
std::vector<GraphBundle> load_sources(const std::vector<std::filesystem::path>& paths, DimAligner& aligner,
                                      std::size_t max_nodes, std::uint64_t seed,
                                      const std::filesystem::path& cache = {});

/// Aligns `g` in place.
void align_bundle(GraphBundle& g, DimAligner& aligner, const std::filesystem::path& cache = {});

/// Load, align, pre-train as needed, then evaluate every variant × grid point
/// on one shared episode list. `log` receives progress lines.
BenchmarkRun run_benchmark(const BenchmarkPlan& plan, const std::function<void(const std::string&)>& log = {});

/// Writes results.tsv, summary.tsv and report.json into plan.out.
void write_benchmark(const BenchmarkRun& run, const std::filesystem::path& out);

/// Evaluates `variants` with one checkpoint per token setting, sharing episodes.
ResultTable ablation_matrix(const std::vector<Variant>& variants,
                            const std::function<const Checkpoint&(bool trains_tokens)>& checkpoint_for,
                            const GraphBundle& target, const std::vector<TaskEpisode>& episodes,
                            const AdaptOptions& options, int ego_radius, std::size_t workers);

/// One row per value of `parameter` ("alpha" or "beta"). An alpha grid pulls
/// one checkpoint per value; a beta grid uses checkpoint_for(alpha).
ResultTable sensitivity_sweep(const std::string& parameter, const std::vector<double>& grid,
                              const std::function<const Checkpoint&(double alpha)>& checkpoint_for,
                              double alpha, const GraphBundle& target, const std::vector<TaskEpisode>& episodes,
                              const AdaptOptions& options, int ego_radius, std::size_t workers);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace samgpt
