#include "wganplan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace wganplan {

namespace {

using Clock = std::chrono::steady_clock;

double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double elapsed_seconds(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct BudgetGuard {
    Clock::time_point start;
    double budget;  // 0 disables
    bool exceeded() const { return budget > 0.0 && elapsed_seconds(start) >= budget; }
};

void validate_endpoints(const Scene& scene, const Config& q_init, const Config& q_goal) {
    if (static_cast<int>(q_init.size()) != scene.dim() ||
        static_cast<int>(q_goal.size()) != scene.dim())
        throw std::invalid_argument("planner: configuration dimension mismatch");
    if (!is_free(scene, q_init)) throw std::invalid_argument("planner: q_init is in collision");
    if (!is_free(scene, q_goal)) throw std::invalid_argument("planner: q_goal is in collision");
}

Config steer(std::span<const double> from, const Config& toward, double eta) {
    double d = distance(from, std::span<const double>(toward.data(), toward.size()));
    Config q(from.begin(), from.end());
    if (d <= 1e-15) return q;
    double f = std::min(1.0, eta / d);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += f * (toward[i] - q[i]);
    return q;
}

Config sample_uniform_free(const Scene& scene, Rng& rng, const BudgetGuard& guard) {
    Config q(static_cast<std::size_t>(scene.dim()));
    for (int tries = 0;; ++tries) {
        for (double& v : q) v = rng.uniform();
        if (is_free(scene, q)) return q;
        if (tries % 256 == 255 && guard.exceeded()) return q;  // budget expired mid-draw
    }
}

/// Shared goal-connection rule: q_new close enough and visible from the goal.
bool try_connect_goal(const Scene& scene, std::span<const double> q_new, const Config& q_goal,
                      const PlannerConfig& cfg) {
    double d = distance(q_new, std::span<const double>(q_goal.data(), q_goal.size()));
    if (d > std::max(cfg.goal_tolerance, cfg.step_eta)) return false;
    Config qn(q_new.begin(), q_new.end());
    return segment_free(scene, qn, q_goal, cfg.collision_resolution);
}

}  // namespace

std::size_t SearchTree::add_vertex(std::span<const double> q, int parent_index, double cost) {
    coords_.insert(coords_.end(), q.begin(), q.end());
    parent_.push_back(parent_index);
    cost_.push_back(cost);
    children_.emplace_back();
    std::size_t idx = parent_.size() - 1;
    if (parent_index >= 0) children_[static_cast<std::size_t>(parent_index)].push_back(
        static_cast<int>(idx));
    return idx;
}

void SearchTree::reparent(std::size_t i, int new_parent, double new_cost) {
    int old_parent = parent_[i];
    if (old_parent >= 0) {
        auto& siblings = children_[static_cast<std::size_t>(old_parent)];
        siblings.erase(std::find(siblings.begin(), siblings.end(), static_cast<int>(i)));
    }
    parent_[i] = new_parent;
    if (new_parent >= 0) children_[static_cast<std::size_t>(new_parent)].push_back(static_cast<int>(i));
    double delta = new_cost - cost_[i];
    // propagate the cost change through the subtree
    std::vector<int> stack{static_cast<int>(i)};
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        cost_[static_cast<std::size_t>(v)] += delta;
        for (int c : children_[static_cast<std::size_t>(v)]) stack.push_back(c);
    }
}

std::size_t SearchTree::nearest(std::span<const double> q) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
        const double* v = coords_.data() + i * dim_;
        double s = 0.0;
        for (std::size_t k = 0; k < dim_; ++k) {
            double d = v[k] - q[k];
            s += d * d;
        }
        if (s < best_d) {
            best_d = s;
            best = i;
        }
    }
    return best;
}

std::vector<std::size_t> SearchTree::near(std::span<const double> q, double radius) const {
    std::vector<std::size_t> out;
    const double r2 = radius * radius;
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
        const double* v = coords_.data() + i * dim_;
        double s = 0.0;
        for (std::size_t k = 0; k < dim_; ++k) {
            double d = v[k] - q[k];
            s += d * d;
        }
        if (s <= r2) out.push_back(i);
    }
    return out;
}

std::pair<std::vector<Config>, double> extract_path(const SearchTree& tree,
                                                    std::size_t goal_vertex) {
    if (goal_vertex >= tree.size())
        throw std::invalid_argument("extract_path: vertex not in tree");
    std::vector<Config> chain;
    double length = 0.0;
    int v = static_cast<int>(goal_vertex);
    while (v >= 0) {
        chain.push_back(tree.vertex_config(static_cast<std::size_t>(v)));
        int p = tree.parent(static_cast<std::size_t>(v));
        if (p >= 0)
            length += distance(tree.vertex(static_cast<std::size_t>(v)),
                               tree.vertex(static_cast<std::size_t>(p)));
        v = p;
    }
    std::reverse(chain.begin(), chain.end());
    return {std::move(chain), length};
}

Config perturb_exemplar(const Config& center, double sigma, Rng& rng, Config* raw_out) {
    Config q(center.size());
    if (raw_out) raw_out->resize(center.size());
    for (std::size_t i = 0; i < center.size(); ++i) {
        double raw = center[i] + sigma * rng.normal();
        if (raw_out) (*raw_out)[i] = raw;
        q[i] = std::clamp(raw, 0.0, 1.0);
    }
    return q;
}

PlanResult rrt(const Scene& scene, const Config& q_init, const Config& q_goal,
               const PlannerConfig& cfg, Rng& rng) {
    validate_endpoints(scene, q_init, q_goal);
    const Clock::time_point start = Clock::now();
    const BudgetGuard guard{start, cfg.time_budget};

    SearchTree tree(q_init.size());
    tree.add_vertex({q_init.data(), q_init.size()}, -1, 0.0);

    PlanResult result;
    for (std::size_t h = 1; h <= cfg.max_samples; ++h) {
        result.iterations = h;
        if (guard.exceeded()) break;
        Config q_rand = rng.uniform() < cfg.goal_bias ? q_goal
                                                      : sample_uniform_free(scene, rng, guard);
        std::size_t nearest = tree.nearest({q_rand.data(), q_rand.size()});
        Config q_new = steer(tree.vertex(nearest), q_rand, cfg.step_eta);
        Config q_near = tree.vertex_config(nearest);
        double edge = distance({q_near.data(), q_near.size()}, {q_new.data(), q_new.size()});
        if (edge < 1e-9) continue;  // sample already covered by this vertex
        if (!segment_free(scene, q_near, q_new, cfg.collision_resolution)) continue;
        std::size_t idx = tree.add_vertex({q_new.data(), q_new.size()},
                                          static_cast<int>(nearest), tree.cost(nearest) + edge);
        if (try_connect_goal(scene, tree.vertex(idx), q_goal, cfg)) {
            double tail = distance(tree.vertex(idx),
                                   std::span<const double>(q_goal.data(), q_goal.size()));
            std::size_t goal_idx = tree.add_vertex({q_goal.data(), q_goal.size()},
                                                   static_cast<int>(idx), tree.cost(idx) + tail);
            auto [path, length] = extract_path(tree, goal_idx);
            result.success = true;
            result.path = std::move(path);
            result.path_length = length;
            result.time_to_success = elapsed_seconds(start);
            break;
        }
    }
    result.wall_time = elapsed_seconds(start);
    result.tree_size = tree.size();
    return result;
}

PlanResult rrt_star(const Scene& scene, const Config& q_init, const Config& q_goal,
                    const PlannerConfig& cfg, Rng& rng, std::span<const double> snapshot_times,
                    std::vector<Snapshot>* snapshots) {
    validate_endpoints(scene, q_init, q_goal);
    const Clock::time_point start = Clock::now();
    const BudgetGuard guard{start, cfg.time_budget};
    const double dim = static_cast<double>(q_init.size());

    SearchTree tree(q_init.size());
    tree.add_vertex({q_init.data(), q_init.size()}, -1, 0.0);

    // vertices that have a verified collision-free hop to the goal
    std::vector<std::size_t> goal_connected;
    double first_solution_time = -1.0;

    auto best_goal = [&]() -> std::pair<int, double> {
        int best_v = -1;
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t v : goal_connected) {
            double c = tree.cost(v) + distance(tree.vertex(v),
                                               std::span<const double>(q_goal.data(), q_goal.size()));
            if (c < best_cost) {
                best_cost = c;
                best_v = static_cast<int>(v);
            }
        }
        return {best_v, best_cost};
    };

    auto record_snapshot = [&](double mark) {
        auto [v, cost] = best_goal();
        Snapshot snap;
        snap.at_time = mark;
        if (v >= 0) {
            auto [path, length] = extract_path(tree, static_cast<std::size_t>(v));
            path.push_back(q_goal);
            snap.success = true;
            snap.path_length = cost;
            snap.path = std::move(path);
        }
        snapshots->push_back(std::move(snap));
    };

    std::size_t next_snapshot = 0;
    PlanResult result;
    for (std::size_t h = 1; h <= cfg.max_samples; ++h) {
        result.iterations = h;
        if (snapshots) {
            while (next_snapshot < snapshot_times.size() &&
                   elapsed_seconds(start) >= snapshot_times[next_snapshot]) {
                record_snapshot(snapshot_times[next_snapshot]);
                ++next_snapshot;
            }
        }
        if (guard.exceeded()) break;

        Config q_rand = rng.uniform() < cfg.goal_bias ? q_goal
                                                      : sample_uniform_free(scene, rng, guard);
        std::size_t nearest_idx = tree.nearest({q_rand.data(), q_rand.size()});
        Config q_new = steer(tree.vertex(nearest_idx), q_rand, cfg.step_eta);
        Config q_near_cfg = tree.vertex_config(nearest_idx);
        if (distance({q_near_cfg.data(), q_near_cfg.size()}, {q_new.data(), q_new.size()}) < 1e-9)
            continue;  // sample already covered by this vertex
        if (!segment_free(scene, q_near_cfg, q_new, cfg.collision_resolution)) continue;

        const std::size_t n = tree.size();
        double radius = std::min(
            cfg.step_eta * 3.0,
            cfg.rewire_gamma *
                std::pow(std::log(static_cast<double>(n + 1)) / static_cast<double>(n + 1),
                         1.0 / dim));
        std::vector<std::size_t> near = tree.near({q_new.data(), q_new.size()}, radius);

        // choose the lowest-cost visible parent
        std::size_t parent = nearest_idx;
        double best_cost = tree.cost(nearest_idx) +
                           distance(tree.vertex(nearest_idx), {q_new.data(), q_new.size()});
        for (std::size_t v : near) {
            double c = tree.cost(v) + distance(tree.vertex(v), {q_new.data(), q_new.size()});
            if (c < best_cost &&
                segment_free(scene, tree.vertex_config(v), q_new, cfg.collision_resolution)) {
                best_cost = c;
                parent = v;
            }
        }
        std::size_t idx =
            tree.add_vertex({q_new.data(), q_new.size()}, static_cast<int>(parent), best_cost);

        // rewire neighbors through the new vertex
        for (std::size_t v : near) {
            double through = best_cost + distance(tree.vertex(v), {q_new.data(), q_new.size()});
            if (through + 1e-12 < tree.cost(v) &&
                segment_free(scene, q_new, tree.vertex_config(v), cfg.collision_resolution)) {
                tree.reparent(v, static_cast<int>(idx), through);
            }
        }

        if (try_connect_goal(scene, tree.vertex(idx), q_goal, cfg)) {
            goal_connected.push_back(idx);
            if (first_solution_time < 0.0) first_solution_time = elapsed_seconds(start);
        }
    }

    if (snapshots) {
        while (next_snapshot < snapshot_times.size()) {
            record_snapshot(snapshot_times[next_snapshot]);
            ++next_snapshot;
        }
    }

    auto [v, cost] = best_goal();
    if (v >= 0) {
        auto [path, length] = extract_path(tree, static_cast<std::size_t>(v));
        path.push_back(q_goal);
        result.success = true;
        result.path = std::move(path);
        result.path_length = cost;
        result.time_to_success = first_solution_time;
    }
    result.wall_time = elapsed_seconds(start);
    result.tree_size = tree.size();
    return result;
}

namespace {

PlanResult biased_rrt_core(const Scene& scene, const Config& q_init, const Config& q_goal,
                           std::span<const Config> exemplars, const PlannerConfig& cfg,
                           const BiasConfig& bias, Rng& rng, Clock::time_point start) {
    validate_endpoints(scene, q_init, q_goal);
    if (bias.sigma.empty() || bias.samples_per_level == 0)
        throw std::invalid_argument("biased_rrt: need at least one sigma level and m >= 1");
    for (std::size_t i = 1; i < bias.sigma.size(); ++i)
        if (!(bias.sigma[i] > bias.sigma[i - 1]))
            throw std::invalid_argument("biased_rrt: sigma levels must increase strictly");

    const BudgetGuard guard{start, cfg.time_budget};
    const std::size_t k = bias.sigma.size() - 1;

    SearchTree tree(q_init.size());
    tree.add_vertex({q_init.data(), q_init.size()}, -1, 0.0);

    PlanResult result;
    std::size_t level = exemplars.empty() ? k + 1 : 0;  // no exemplars: uniform from the start

    for (std::size_t h = 1; h <= cfg.max_samples; ++h) {
        result.iterations = h;
        if (guard.exceeded()) break;
        if (h % bias.samples_per_level == 0) ++level;

        Config q_rand;
        bool from_bias = false;
        if (level <= k) {
            for (std::size_t probe = 0; probe < bias.free_probe_budget; ++probe) {
                ++result.counters.probe_attempts;
                const Config& centre = exemplars[rng.uniform_index(exemplars.size())];
                Config cand = perturb_exemplar(centre, bias.sigma[level], rng);
                if (is_free(scene, cand)) {
                    q_rand = std::move(cand);
                    from_bias = true;
                    break;
                }
            }
        }
        if (level > k) ++result.counters.draws_after_exhaust;
        if (from_bias) {
            ++result.counters.biased_draws;
        } else {
            q_rand = sample_uniform_free(scene, rng, guard);
            ++result.counters.uniform_draws;
            if (level > k) ++result.counters.uniform_after_exhaust;
        }

        std::size_t nearest = tree.nearest({q_rand.data(), q_rand.size()});
        Config q_new = steer(tree.vertex(nearest), q_rand, cfg.step_eta);
        Config q_near_cfg = tree.vertex_config(nearest);
        double edge = distance({q_near_cfg.data(), q_near_cfg.size()}, {q_new.data(), q_new.size()});
        if (edge < 1e-9) continue;  // sample already covered by this vertex
        if (!segment_free(scene, q_near_cfg, q_new, cfg.collision_resolution)) continue;
        std::size_t idx = tree.add_vertex({q_new.data(), q_new.size()}, static_cast<int>(nearest),
                                          tree.cost(nearest) + edge);
        if (try_connect_goal(scene, tree.vertex(idx), q_goal, cfg)) {
            double tail = distance(tree.vertex(idx),
                                   std::span<const double>(q_goal.data(), q_goal.size()));
            std::size_t goal_idx = tree.add_vertex({q_goal.data(), q_goal.size()},
                                                   static_cast<int>(idx), tree.cost(idx) + tail);
            auto [path, length] = extract_path(tree, goal_idx);
            result.success = true;
            result.path = std::move(path);
            result.path_length = length;
            result.time_to_success = elapsed_seconds(start);
            break;
        }
    }
    result.counters.level_reached = std::min(level, k + 1);
    result.wall_time = elapsed_seconds(start);
    result.tree_size = tree.size();
    return result;
}

}  // namespace

PlanResult biased_rrt(const Scene& scene, const Config& q_init, const Config& q_goal,
                      std::span<const Config> exemplars, const PlannerConfig& cfg,
                      const BiasConfig& bias, Rng& rng) {
    return biased_rrt_core(scene, q_init, q_goal, exemplars, cfg, bias, rng, Clock::now());
}

PlanResult biased_rrt(const Scene& scene, const Config& q_init, const Config& q_goal,
                      const WorkspaceImage& image, const GeneratorModel& gen,
                      const NoiseSchedule& schedule, const PlannerConfig& cfg,
                      const BiasConfig& bias, Rng& rng) {
    if (static_cast<int>(gen.d) != scene.dim())
        throw std::invalid_argument("biased_rrt: generator dimension does not match the robot");
    // the generator query runs inside the planning clock
    Clock::time_point start = Clock::now();
    Tensor noise = gaussian_like(image.tensor, rng);
    std::vector<Config> exemplars =
        generate_exemplars(gen, image, bias.inference_t, schedule, noise);
    return biased_rrt_core(scene, q_init, q_goal, exemplars, cfg, bias, rng, start);
}

bool recheck_path(const Scene& scene, const std::vector<Config>& path, const Config& q_init,
                  const Config& q_goal, double goal_tolerance, double resolution) {
    if (path.empty()) return false;
    if (path.front() != q_init) return false;
    double end_dist = 0.0;
    for (std::size_t i = 0; i < q_goal.size(); ++i) {
        double d = path.back()[i] - q_goal[i];
        end_dist += d * d;
    }
    if (std::sqrt(end_dist) > goal_tolerance) return false;

    // deliberately simple dense sweep, independent of segment_free
    for (std::size_t e = 0; e + 1 < path.size(); ++e) {
        const Config& a = path[e];
        const Config& b = path[e + 1];
        double dist = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            double d = b[i] - a[i];
            dist += d * d;
        }
        dist = std::sqrt(dist);
        auto steps = static_cast<std::size_t>(std::ceil(dist / resolution)) + 1;
        Config q(a.size());
        for (std::size_t s = 0; s <= steps; ++s) {
            double t = static_cast<double>(s) / static_cast<double>(steps);
            for (std::size_t i = 0; i < q.size(); ++i) q[i] = a[i] + t * (b[i] - a[i]);
            if (!is_free(scene, q)) return false;
        }
    }
    return true;
}

}  // namespace wganplan
