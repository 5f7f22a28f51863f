#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wganplan/dataset.hpp"
#include "wganplan/planner.hpp"
#include "wganplan/wgan.hpp"

namespace wganplan {

/// Flat key=value configuration file with '#' comments. Flag overrides are
/// applied on top via set().
class KeyValueConfig {
  public:
    static KeyValueConfig from_file(const std::string& path);
    static KeyValueConfig from_text(const std::string& text, const std::string& name = "config");

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

  private:
    std::map<std::string, std::string> values_;
};

/// Everything the pipeline subcommands need, resolved from config + flags.
struct PipelineConfig {
    std::uint64_t seed = 1;

    // dataset generation
    std::string dataset_path = "out/dataset.txt";
    std::size_t scenes = 200;
    std::size_t pairs_per_scene = 3;
    SceneSpec scene_spec;
    BuildBudgets budgets;

    // training
    std::string checkpoint_path = "out/checkpoint.bin";
    TrainConfig train;
    std::size_t schedule_steps = kDefaultDiffusionSteps;
    double beta_start = kDefaultBetaStart;
    double beta_end = kDefaultBetaEnd;
    std::size_t inference_t = kDefaultDiffusionSteps / 4;

    // planning / benchmark
    PlannerConfig planner;
    BiasConfig bias;
    std::size_t bench_scenes = 300;
    std::vector<double> bench_budgets = {0.05, 0.1, 0.25};
    bool iteration_budgets = false;  // deterministic benchmark mode (budgets = sample counts)
    std::string bench_csv = "out/bench.csv";
    std::string bench_svg = "out/bench.svg";
    std::string bench_runs = "out/runs.txt";
    std::size_t bench_workers = 0;  // 0 = hardware/env

    static PipelineConfig resolve(const KeyValueConfig& kv);
};

struct BenchCell {
    std::string planner;
    double budget = 0.0;  // seconds, or sample count in iteration mode
    std::size_t n_runs = 0;
    std::size_t successes = 0;
    double success_rate = 0.0;
    double time_mean = 0.0;  // over successful runs
    double time_sd = 0.0;
    double len_mean = 0.0;  // over successful runs
    double len_sd = 0.0;
};

struct BenchReport {
    std::vector<BenchCell> cells;  // ordered by (planner, budget)
    bool iteration_budgets = false;
    std::string length_unit = "cspace";  // "rad" for arm scenes

    const BenchCell* find(const std::string& planner, double budget) const;
};

/// Held-out scene identifiers live in a disjoint id range from training
/// scene identifiers; both map to seeds through the same derivation.
constexpr std::uint64_t kHeldoutIdBase = 1ull << 32;
std::uint64_t scene_seed(std::uint64_t master_seed, std::uint64_t scene_id);

/// Generates the training dataset (parallel example builds, deterministic
/// per-example seeds, single ordered writer). Returns the example count.
std::size_t run_gen_data(const PipelineConfig& cfg, std::ostream& log);

/// Trains the WGAN-GP on the dataset and writes the checkpoint.
TrainHistory run_train(const PipelineConfig& cfg, std::ostream& log);

/// Desk-scale benchmark over held-out scenes for the three planners; writes
/// per-run records, CSV and SVG.
BenchReport run_benchmark(const PipelineConfig& cfg, std::ostream& log);

void emit_csv(const BenchReport& report, const std::string& path);
BenchReport parse_report_csv(const std::string& path);
void emit_svg(const BenchReport& report, const std::string& path);

/// Single-scene planning for the CLI; planner is "rrt", "rrt_star" or
/// "biased_rrt".
PlanResult run_plan(const PipelineConfig& cfg, std::uint64_t scene_id, const std::string& planner,
                    double budget_seconds, std::ostream& log);

/// Human-readable dataset summary.
void run_inspect(const std::string& dataset_path, std::ostream& out);

}  // namespace wganplan
