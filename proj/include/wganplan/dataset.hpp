#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wganplan/affinity.hpp"
#include "wganplan/encoding.hpp"
#include "wganplan/planner.hpp"
#include "wganplan/rng.hpp"
#include "wganplan/workspace.hpp"

namespace wganplan {

/// Randomized-scene recipe. Bounds are always the unit square. Scenes are a
/// narrow-passage family: vertical walls with randomly placed gaps (kept
/// passable by construction) plus disc clutter in the strips between walls.
/// wall count 0 turns the recipe into plain random clutter.
struct SceneSpec {
    std::size_t min_walls = 8;
    std::size_t max_walls = 11;
    double wall_thickness_min = 0.03;
    double wall_thickness_max = 0.05;
    double gap_min = 0.025;  // passage height range per wall
    double gap_max = 0.04;
    std::size_t min_obstacles = 2;  // disc clutter between the walls
    std::size_t max_obstacles = 5;
    double min_size = 0.03;  // clutter disc radius range
    double max_size = 0.05;
    bool arm_robot = false;
    std::vector<double> arm_links = {0.18, 0.15, 0.12};  // used when arm_robot
};

struct BuildBudgets {
    std::size_t demo_max_samples = 30000;  // rrt* iteration budget per demonstration
    double densify_spacing = 0.02;         // C-space spacing of raw waypoints
    double min_separation = 0.6;           // required start-goal distance
    std::size_t endpoint_tries = 400;      // free start/goal sampling attempts
    // clustering preference = median similarity * this scale; the canonical
    // median (scale 1) merges narrow-passage waypoints into clusters far
    // coarser than the passages themselves
    double ap_preference_scale = 0.02;
};

struct TrainingExample {
    Scene scene;
    Config start;
    Config goal;
    WorkspaceImage y0;
    PathMatrix target;
    std::vector<Config> raw_waypoints;
    double demo_length = 0.0;
};

/// Deterministic-in-seed scene with at least one free configuration
/// (bounded resampling; throws when the retry budget runs out).
Scene generate_scene(std::uint64_t seed, const SceneSpec& spec);

/// Near-shortest demonstration: rrt* path densified to <= spacing. Returns
/// nullopt when planning fails within the budget.
std::optional<std::vector<Config>> collect_demo(const Scene& scene, const Config& start,
                                                const Config& goal, const BuildBudgets& budgets,
                                                Rng& rng);

/// Clustering configuration for one demonstration: scaled-median preference.
APConfig demo_cluster_config(const std::vector<Config>& waypoints, const BuildBudgets& budgets);

struct BuildOutcome {
    std::optional<TrainingExample> example;
    std::string skip_reason;  // set when example is empty
};

/// Samples endpoints, collects a demo, clusters it into exemplars, and
/// assembles the paired (y0, target) training data.
BuildOutcome build_example(const Scene& scene, Rng& rng, const BuildBudgets& budgets);

void save_dataset(const std::string& path, const std::vector<TrainingExample>& examples);
std::vector<TrainingExample> load_dataset(const std::string& path);

std::string serialize_example(const TrainingExample& ex);
TrainingExample parse_example(TokenReader& reader);

}  // namespace wganplan
