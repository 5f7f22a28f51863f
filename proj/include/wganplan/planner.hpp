#pragma once

#include <chrono>
#include <cstddef>
#include <span>
#include <vector>

#include "wganplan/diffusion.hpp"
#include "wganplan/encoding.hpp"
#include "wganplan/rng.hpp"
#include "wganplan/wgan.hpp"
#include "wganplan/workspace.hpp"

namespace wganplan {

/// Tree over C-space with parent links and cost-to-come. Coordinates are
/// stored flat for fast nearest-neighbor scans.
class SearchTree {
  public:
    explicit SearchTree(std::size_t dim) : dim_(dim) {}

    std::size_t size() const { return parent_.size(); }
    std::size_t dim() const { return dim_; }
    std::span<const double> vertex(std::size_t i) const {
        return {coords_.data() + i * dim_, dim_};
    }
    Config vertex_config(std::size_t i) const {
        auto v = vertex(i);
        return Config(v.begin(), v.end());
    }
    int parent(std::size_t i) const { return parent_[i]; }
    double cost(std::size_t i) const { return cost_[i]; }

    std::size_t add_vertex(std::span<const double> q, int parent_index, double cost);
    /// Reattaches vertex i to a new parent and propagates the cost change to
    /// its subtree.
    void reparent(std::size_t i, int new_parent, double new_cost);

    std::size_t nearest(std::span<const double> q) const;
    std::vector<std::size_t> near(std::span<const double> q, double radius) const;

  private:
    std::size_t dim_;
    std::vector<double> coords_;
    std::vector<int> parent_;
    std::vector<double> cost_;
    std::vector<std::vector<int>> children_;
};

struct PlannerConfig {
    double step_eta = 0.08;              // steer step in C-space units
    double goal_tolerance = 0.03;
    double goal_bias = 0.05;             // baseline planners only
    std::size_t max_samples = 200000;    // loop bound l
    double time_budget = 0.0;            // seconds; 0 disables the clock
    double collision_resolution = 0.004; // C-space spacing of edge checks
    double rewire_gamma = 2.0;           // rrt* radius scale
};

struct BiasConfig {
    std::vector<double> sigma = {0.0, 0.02, 0.05, 0.1, 0.2, 0.4};
    std::size_t samples_per_level = 50;  // m: iterations spent at each sigma
    std::size_t free_probe_budget = 16;  // r: gaussian candidates per draw
    std::size_t inference_t = 25;        // diffusion timestep for Algorithm 1
};

struct SamplerCounters {
    std::size_t biased_draws = 0;           // q_rand taken from an exemplar gaussian
    std::size_t uniform_draws = 0;          // q_rand taken from the uniform sampler
    std::size_t probe_attempts = 0;         // gaussian candidates tested against C_free
    std::size_t draws_after_exhaust = 0;    // draws once the sigma schedule ended
    std::size_t uniform_after_exhaust = 0;  // uniform draws among those (must be all)
    std::size_t level_reached = 0;          // final sigma level (k+1 = exhausted)
};

struct PlanResult {
    bool success = false;
    std::vector<Config> path;      // q_init ... q_goal when successful
    double path_length = 0.0;      // scaled C-space units
    double wall_time = 0.0;        // seconds spent planning
    double time_to_success = 0.0;  // when the first solution appeared
    std::size_t iterations = 0;
    std::size_t tree_size = 0;
    SamplerCounters counters;
};

/// Anytime-state snapshot of an rrt_star run at a given wall-clock mark.
struct Snapshot {
    double at_time = 0.0;
    bool success = false;
    double path_length = 0.0;
    std::vector<Config> path;
};

PlanResult rrt(const Scene& scene, const Config& q_init, const Config& q_goal,
               const PlannerConfig& cfg, Rng& rng);

/// RRT with shrinking-radius rewiring; anytime until budget or sample bound.
/// When snapshot_times is non-empty, records the best solution available at
/// each mark (ascending times) into *snapshots.
PlanResult rrt_star(const Scene& scene, const Config& q_init, const Config& q_goal,
                    const PlannerConfig& cfg, Rng& rng,
                    std::span<const double> snapshot_times = {},
                    std::vector<Snapshot>* snapshots = nullptr);

/// Exemplar-biased RRT: escalating gaussian perturbation around the supplied
/// exemplars, bounded free-space probing, and uniform fallback once the
/// schedule is exhausted or a neighborhood proves infeasible.
PlanResult biased_rrt(const Scene& scene, const Config& q_init, const Config& q_goal,
                      std::span<const Config> exemplars, const PlannerConfig& cfg,
                      const BiasConfig& bias, Rng& rng);

/// Full pipeline variant: diffuses the image, queries the generator for
/// exemplars (inside the planning clock), then runs the biased search.
PlanResult biased_rrt(const Scene& scene, const Config& q_init, const Config& q_goal,
                      const WorkspaceImage& image, const GeneratorModel& gen,
                      const NoiseSchedule& schedule, const PlannerConfig& cfg,
                      const BiasConfig& bias, Rng& rng);

/// Root-to-vertex chain and its Euclidean length.
std::pair<std::vector<Config>, double> extract_path(const SearchTree& tree,
                                                    std::size_t goal_vertex);

/// Gaussian perturbation of an exemplar, clamped to the unit cube. When
/// raw_out is non-null it receives the unclamped draw.
Config perturb_exemplar(const Config& center, double sigma, Rng& rng, Config* raw_out = nullptr);

/// Independent post-hoc validity check: path starts at q_init, ends within
/// goal_tolerance of q_goal, and every edge passes a dense point-sampled
/// collision sweep at the given spacing.
bool recheck_path(const Scene& scene, const std::vector<Config>& path, const Config& q_init,
                  const Config& q_goal, double goal_tolerance, double resolution);

}  // namespace wganplan
