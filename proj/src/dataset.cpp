#include "wganplan/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wganplan {

namespace {

double config_distance(const Config& a, const Config& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

Config random_config(std::size_t d, Rng& rng) {
    Config q(d);
    for (double& v : q) v = rng.uniform();
    return q;
}

std::vector<Config> densify(const std::vector<Config>& path, double spacing) {
    std::vector<Config> out;
    if (path.empty()) return out;
    out.push_back(path.front());
    for (std::size_t e = 0; e + 1 < path.size(); ++e) {
        const Config& a = path[e];
        const Config& b = path[e + 1];
        double dist = config_distance(a, b);
        auto steps = static_cast<std::size_t>(std::ceil(dist / spacing));
        for (std::size_t s = 1; s <= steps; ++s) {
            double t = static_cast<double>(s) / static_cast<double>(steps);
            Config q(a.size());
            for (std::size_t i = 0; i < q.size(); ++i) q[i] = a[i] + t * (b[i] - a[i]);
            out.push_back(std::move(q));
        }
    }
    return out;
}

void append_config(std::string& out, const Config& q) {
    for (double v : q) {
        out.push_back(' ');
        out += format_double(v);
    }
}

Config read_config(TokenReader& r, std::size_t d, std::string_view field) {
    Config q(d);
    for (double& v : q) v = r.next_double(field);
    return q;
}

constexpr std::string_view kDatasetHeader = "wganplan-dataset 1";

}  // namespace

Scene generate_scene(std::uint64_t seed, const SceneSpec& spec) {
    if (spec.min_obstacles > spec.max_obstacles || spec.min_size > spec.max_size ||
        spec.min_size <= 0.0 || spec.min_walls > spec.max_walls ||
        spec.gap_min > spec.gap_max || spec.gap_min <= 0.0)
        throw std::invalid_argument("generate_scene: invalid spec ranges");

    Rng rng(seed);
    for (int attempt = 0; attempt < 32; ++attempt) {
        std::vector<Obstacle> obstacles;

        // vertical walls with one or two gaps each; the gaps keep every wall
        // passable, so difficulty comes from threading narrow corridors
        std::size_t walls =
            spec.min_walls + rng.uniform_index(spec.max_walls - spec.min_walls + 1);
        std::vector<std::pair<double, double>> wall_spans;  // x ranges, for clutter placement
        if (walls > 0) {
            const double lane_lo = 0.14, lane_hi = 0.86;
            const double slot = (lane_hi - lane_lo) / static_cast<double>(walls);
            for (std::size_t w = 0; w < walls; ++w) {
                double cx = lane_lo + (static_cast<double>(w) + 0.5) * slot +
                            rng.uniform(-0.15, 0.15) * slot;
                // cap thickness so neighbouring walls can never merge and
                // seal the workspace
                double t_hi = std::min(spec.wall_thickness_max, 0.45 * slot);
                double t_lo = std::min(spec.wall_thickness_min, t_hi);
                double thickness = rng.uniform(t_lo, t_hi);
                double x0 = cx - thickness / 2.0;
                double x1 = cx + thickness / 2.0;
                wall_spans.push_back({x0, x1});

                std::size_t gaps = rng.uniform() < 0.3 ? 2 : 1;
                std::vector<std::pair<double, double>> gap_spans;
                for (std::size_t gi = 0; gi < gaps; ++gi) {
                    double h = rng.uniform(spec.gap_min, spec.gap_max);
                    for (int tries = 0; tries < 16; ++tries) {
                        double y0 = rng.uniform(0.06, 0.94 - h);
                        bool overlaps = false;
                        for (auto [a, b] : gap_spans)
                            if (y0 < b + 0.08 && y0 + h > a - 0.08) overlaps = true;
                        if (!overlaps) {
                            gap_spans.push_back({y0, y0 + h});
                            break;
                        }
                    }
                }
                std::sort(gap_spans.begin(), gap_spans.end());
                double y_cursor = 0.0;
                for (auto [a, b] : gap_spans) {
                    if (a - y_cursor > 1e-6) obstacles.push_back(Obstacle::rect({x0, y_cursor}, {x1, a}));
                    y_cursor = b;
                }
                if (1.0 - y_cursor > 1e-6)
                    obstacles.push_back(Obstacle::rect({x0, y_cursor}, {x1, 1.0}));
            }
        }

        // disc clutter in the strips between walls, kept clear of the wall
        // columns so it cannot seal a gap
        std::size_t clutter = spec.min_obstacles +
                              rng.uniform_index(spec.max_obstacles - spec.min_obstacles + 1);
        std::size_t placed = 0;
        for (int tries = 0; placed < clutter && tries < 512; ++tries) {
            double r = rng.uniform(spec.min_size, spec.max_size);
            Vec2 c{rng.uniform(), rng.uniform()};
            bool near_wall = false;
            for (auto [x0, x1] : wall_spans)
                if (c.x + r > x0 - 0.015 && c.x - r < x1 + 0.015) near_wall = true;
            if (near_wall) continue;
            obstacles.push_back(Obstacle::disc(c, r));
            ++placed;
        }

        RobotModel robot = spec.arm_robot
                               ? RobotModel::planar_arm({0.5, 0.5}, spec.arm_links)
                               : RobotModel::point_robot();
        Scene scene({{0.0, 0.0}, {1.0, 1.0}}, std::move(obstacles), std::move(robot));

        bool has_free = false;
        for (int probe = 0; probe < 256 && !has_free; ++probe)
            has_free = is_free(scene, random_config(static_cast<std::size_t>(scene.dim()), rng));
        if (has_free) return scene;
    }
    throw std::runtime_error("generate_scene: retry bound exceeded without a free configuration");
}

APConfig demo_cluster_config(const std::vector<Config>& waypoints, const BuildBudgets& budgets) {
    APConfig cfg;
    if (waypoints.size() < 2 || budgets.ap_preference_scale == 1.0) return cfg;
    std::vector<double> offdiag;
    offdiag.reserve(waypoints.size() * (waypoints.size() - 1));
    for (std::size_t i = 0; i < waypoints.size(); ++i) {
        for (std::size_t k = 0; k < waypoints.size(); ++k) {
            if (i == k) continue;
            double d2 = 0.0;
            for (std::size_t j = 0; j < waypoints[i].size(); ++j) {
                double d = waypoints[i][j] - waypoints[k][j];
                d2 += d * d;
            }
            offdiag.push_back(-d2);
        }
    }
    auto mid = offdiag.begin() + static_cast<std::ptrdiff_t>(offdiag.size() / 2);
    std::nth_element(offdiag.begin(), mid, offdiag.end());
    cfg.median_preference = false;
    cfg.preference = *mid * budgets.ap_preference_scale;
    return cfg;
}

std::optional<std::vector<Config>> collect_demo(const Scene& scene, const Config& start,
                                                const Config& goal, const BuildBudgets& budgets,
                                                Rng& rng) {
    PlannerConfig cfg;
    cfg.max_samples = budgets.demo_max_samples;
    cfg.time_budget = 0.0;  // iteration-bounded so datasets stay byte-reproducible
    PlanResult res = rrt_star(scene, start, goal, cfg, rng);
    if (!res.success) return std::nullopt;
    return densify(res.path, budgets.densify_spacing);
}

BuildOutcome build_example(const Scene& scene, Rng& rng, const BuildBudgets& budgets) {
    BuildOutcome outcome;
    const auto d = static_cast<std::size_t>(scene.dim());

    Config start, goal;
    bool found = false;
    for (std::size_t t = 0; t < budgets.endpoint_tries; ++t) {
        start = random_config(d, rng);
        goal = random_config(d, rng);
        if (config_distance(start, goal) < budgets.min_separation) continue;
        if (is_free(scene, start) && is_free(scene, goal)) {
            found = true;
            break;
        }
    }
    if (!found) {
        outcome.skip_reason = "no free start/goal pair with the required separation";
        return outcome;
    }

    auto demo = collect_demo(scene, start, goal, budgets, rng);
    if (!demo) {
        outcome.skip_reason = "demonstration planning failed within budget";
        return outcome;
    }

    ClusterResult clusters = affinity_propagate(*demo, demo_cluster_config(*demo, budgets));
    std::vector<std::size_t> order(demo->size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<Config> exemplars = order_exemplars(clusters, order);

    TrainingExample ex;
    ex.scene = scene;
    ex.start = start;
    ex.goal = goal;
    ex.raw_waypoints = std::move(*demo);
    ex.target = encode_path(exemplars);
    ex.y0 = make_workspace_image(scene, start, goal);
    double len = 0.0;
    for (std::size_t e = 0; e + 1 < ex.raw_waypoints.size(); ++e)
        len += config_distance(ex.raw_waypoints[e], ex.raw_waypoints[e + 1]);
    ex.demo_length = len;
    outcome.example = std::move(ex);
    return outcome;
}

std::string serialize_example(const TrainingExample& ex) {
    std::string out = "example ";
    out += serialize_scene(ex.scene, /*single_line=*/true);
    out += " start";
    append_config(out, ex.start);
    out += " goal";
    append_config(out, ex.goal);
    out += " y0";
    for (double v : ex.y0.tensor.data) {
        out.push_back(' ');
        out += format_double(v);
    }
    out += " target " + std::to_string(ex.target.dim()) + " " + std::to_string(ex.target.rows()) +
           " " + std::to_string(ex.target.cols()) + " " + std::to_string(ex.target.used_slots);
    for (double v : ex.target.values.data) {
        out.push_back(' ');
        out += format_double(v);
    }
    out += " raw " + std::to_string(ex.raw_waypoints.size());
    for (const Config& q : ex.raw_waypoints) append_config(out, q);
    out += " demo_length " + format_double(ex.demo_length);
    return out;
}

TrainingExample parse_example(TokenReader& r) {
    r.expect("example", "example header");
    TrainingExample ex;
    ex.scene = parse_scene(r);
    const auto d = static_cast<std::size_t>(ex.scene.dim());

    r.expect("start", "start marker");
    ex.start = read_config(r, d, "start");
    r.expect("goal", "goal marker");
    ex.goal = read_config(r, d, "goal");

    r.expect("y0", "y0 marker");
    ex.y0.tensor = Tensor({5, kImageSize, kImageSize});
    for (double& v : ex.y0.tensor.data) v = r.next_double("y0 value");

    r.expect("target", "target marker");
    auto td = static_cast<std::size_t>(r.next_int("target.d"));
    auto rows = static_cast<std::size_t>(r.next_int("target.rows"));
    auto cols = static_cast<std::size_t>(r.next_int("target.cols"));
    auto used = static_cast<std::size_t>(r.next_int("target.used_slots"));
    if (td != d) r.fail("target.d", "dimension does not match the scene robot");
    if (used > rows * cols) r.fail("target.used_slots", "exceeds slot count");
    ex.target.values = Tensor({td, rows, cols});
    ex.target.used_slots = used;
    for (double& v : ex.target.values.data) v = r.next_double("target value");

    r.expect("raw", "raw marker");
    auto nraw = static_cast<std::size_t>(r.next_int("raw count"));
    ex.raw_waypoints.resize(nraw);
    for (Config& q : ex.raw_waypoints) q = read_config(r, d, "raw waypoint");

    r.expect("demo_length", "demo_length marker");
    ex.demo_length = r.next_double("demo_length");
    return ex;
}

void save_dataset(const std::string& path, const std::vector<TrainingExample>& examples) {
    std::ofstream out(path, std::ios::binary);  // binary: byte-identical across platforms
    if (!out) throw std::runtime_error("cannot open dataset for writing: " + path);
    out << kDatasetHeader << "\n";
    for (const TrainingExample& ex : examples) out << serialize_example(ex) << "\n";
    if (!out) throw std::runtime_error("failed writing dataset: " + path);
}

std::vector<TrainingExample> load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::string text = buffer.str();

    TokenReader r(text, path);
    r.expect("wganplan-dataset", "dataset magic");
    long long version = r.next_int("dataset version");
    if (version != 1) r.fail("dataset version", "unsupported version");

    std::vector<TrainingExample> examples;
    while (!r.at_end()) examples.push_back(parse_example(r));
    return examples;
}

}  // namespace wganplan
