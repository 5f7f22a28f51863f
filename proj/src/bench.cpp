#include "wganplan/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "wganplan/textio.hpp"

namespace wganplan {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::string trim(std::string_view sv) {
    std::size_t a = 0, b = sv.size();
    while (a < b && std::isspace(static_cast<unsigned char>(sv[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(sv[b - 1]))) --b;
    return std::string(sv.substr(a, b - a));
}

std::size_t resolve_worker_count(std::size_t configured) {
    if (const char* env = std::getenv("WGANPLAN_WORKERS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<std::size_t>(v);
    }
    if (configured != 0) return configured;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

/// Runs fn(i) for i in [0, n) on a small pool; exceptions propagate.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    if (n == 0) return;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto body = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    std::size_t nthreads = std::min(workers, n);
    if (nthreads <= 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        for (std::size_t i = 0; i < nthreads; ++i) pool.emplace_back(body);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

KeyValueConfig KeyValueConfig::from_text(const std::string& text, const std::string& name) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line.substr(0, line.find('#')));
        if (stripped.empty()) continue;
        auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ParseError(name + ":" + std::to_string(line_no) +
                             ": expected key=value, got '" + stripped + "'");
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw ParseError(name + ":" + std::to_string(line_no) + ": empty key");
        cfg.values_[key] = value;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str(), path);
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    TokenReader r(it->second, "config." + key);
    return r.next_double(key);
}

std::size_t KeyValueConfig::get_size(const std::string& key, std::size_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    TokenReader r(it->second, "config." + key);
    long long v = r.next_int(key);
    if (v < 0) throw ParseError("config." + key + ": must be non-negative");
    return static_cast<std::size_t>(v);
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    TokenReader r(it->second, "config." + key);
    long long v = r.next_int(key);
    return static_cast<std::uint64_t>(v);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ParseError("config." + key + ": expected a boolean, got '" + v + "'");
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key,
                                                    const std::vector<double>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::string item;
    std::istringstream ss(it->second);
    while (std::getline(ss, item, ',')) {
        TokenReader r(item, "config." + key);
        out.push_back(r.next_double(key));
    }
    if (out.empty()) throw ParseError("config." + key + ": empty list");
    return out;
}

PipelineConfig PipelineConfig::resolve(const KeyValueConfig& kv) {
    PipelineConfig c;
    c.seed = kv.get_u64("seed", c.seed);

    c.dataset_path = kv.get_string("dataset.path", c.dataset_path);
    c.scenes = kv.get_size("dataset.scenes", c.scenes);
    c.pairs_per_scene = kv.get_size("dataset.pairs_per_scene", c.pairs_per_scene);
    c.scene_spec.min_walls = kv.get_size("dataset.min_walls", c.scene_spec.min_walls);
    c.scene_spec.max_walls = kv.get_size("dataset.max_walls", c.scene_spec.max_walls);
    c.scene_spec.wall_thickness_min =
        kv.get_double("dataset.wall_thickness_min", c.scene_spec.wall_thickness_min);
    c.scene_spec.wall_thickness_max =
        kv.get_double("dataset.wall_thickness_max", c.scene_spec.wall_thickness_max);
    c.scene_spec.gap_min = kv.get_double("dataset.gap_min", c.scene_spec.gap_min);
    c.scene_spec.gap_max = kv.get_double("dataset.gap_max", c.scene_spec.gap_max);
    c.scene_spec.min_obstacles = kv.get_size("dataset.min_obstacles", c.scene_spec.min_obstacles);
    c.scene_spec.max_obstacles = kv.get_size("dataset.max_obstacles", c.scene_spec.max_obstacles);
    c.scene_spec.min_size = kv.get_double("dataset.min_size", c.scene_spec.min_size);
    c.scene_spec.max_size = kv.get_double("dataset.max_size", c.scene_spec.max_size);
    c.scene_spec.arm_robot = kv.get_bool("dataset.arm_robot", c.scene_spec.arm_robot);
    c.budgets.demo_max_samples = kv.get_size("dataset.demo_max_samples", c.budgets.demo_max_samples);
    c.budgets.densify_spacing = kv.get_double("dataset.densify_spacing", c.budgets.densify_spacing);
    c.budgets.min_separation = kv.get_double("dataset.min_separation", c.budgets.min_separation);
    c.budgets.ap_preference_scale =
        kv.get_double("dataset.ap_preference_scale", c.budgets.ap_preference_scale);

    c.checkpoint_path = kv.get_string("train.checkpoint", c.checkpoint_path);
    c.train.lr = kv.get_double("train.lr", c.train.lr);
    c.train.batch = kv.get_size("train.batch", c.train.batch);
    c.train.lambda_gp = kv.get_double("train.lambda_gp", c.train.lambda_gp);
    c.train.n_critic = kv.get_size("train.n_critic", c.train.n_critic);
    c.train.epochs = kv.get_size("train.epochs", c.train.epochs);
    c.train.workers = kv.get_size("train.workers", c.train.workers);

    c.schedule_steps = kv.get_size("diffusion.steps", c.schedule_steps);
    c.beta_start = kv.get_double("diffusion.beta_start", c.beta_start);
    c.beta_end = kv.get_double("diffusion.beta_end", c.beta_end);
    c.inference_t = kv.get_size("diffusion.inference_t", std::max<std::size_t>(1, c.schedule_steps / 4));

    c.planner.step_eta = kv.get_double("planner.step_eta", c.planner.step_eta);
    c.planner.goal_tolerance = kv.get_double("planner.goal_tolerance", c.planner.goal_tolerance);
    c.planner.goal_bias = kv.get_double("planner.goal_bias", c.planner.goal_bias);
    c.planner.max_samples = kv.get_size("planner.max_samples", c.planner.max_samples);
    c.planner.collision_resolution =
        kv.get_double("planner.collision_resolution", c.planner.collision_resolution);
    c.planner.rewire_gamma = kv.get_double("planner.rewire_gamma", c.planner.rewire_gamma);

    // pipeline defaults for the sigma schedule are tuned to the narrow-passage
    // scene family; the library BiasConfig keeps the generic defaults
    c.bias.sigma = kv.get_double_list("bias.sigma", {0.0, 0.01, 0.02, 0.05, 0.1, 0.2});
    c.bias.samples_per_level = kv.get_size("bias.m", 3000);
    c.bias.free_probe_budget = kv.get_size("bias.probe_budget", c.bias.free_probe_budget);
    c.bias.inference_t = c.inference_t;

    c.bench_scenes = kv.get_size("bench.scenes", c.bench_scenes);
    c.bench_budgets = kv.get_double_list("bench.budgets", c.bench_budgets);
    std::string mode = kv.get_string("bench.budget_mode", "time");
    if (mode == "time")
        c.iteration_budgets = false;
    else if (mode == "iterations")
        c.iteration_budgets = true;
    else
        throw ParseError("config.bench.budget_mode: expected 'time' or 'iterations'");
    c.bench_csv = kv.get_string("bench.csv", c.bench_csv);
    c.bench_svg = kv.get_string("bench.svg", c.bench_svg);
    c.bench_runs = kv.get_string("bench.runs", c.bench_runs);
    c.bench_workers = kv.get_size("bench.workers", c.bench_workers);
    return c;
}

std::uint64_t scene_seed(std::uint64_t master_seed, std::uint64_t scene_id) {
    return Rng(master_seed).derive("scene", scene_id);
}

std::size_t run_gen_data(const PipelineConfig& cfg, std::ostream& log) {
    static_assert(kHeldoutIdBase > (1ull << 24), "training ids must stay below the held-out range");
    if (cfg.scenes >= kHeldoutIdBase)
        throw std::invalid_argument("run_gen_data: scene count collides with the held-out id range");

    const std::size_t tasks = cfg.scenes * cfg.pairs_per_scene;
    std::vector<BuildOutcome> outcomes(tasks);
    std::size_t workers = resolve_worker_count(cfg.train.workers);

    parallel_for(tasks, workers, [&](std::size_t task) {
        std::uint64_t scene_id = task / cfg.pairs_per_scene;
        std::uint64_t pair = task % cfg.pairs_per_scene;
        Scene scene = generate_scene(scene_seed(cfg.seed, scene_id), cfg.scene_spec);
        Rng rng(Rng(cfg.seed).derive("example", scene_id * 4096 + pair));
        outcomes[task] = build_example(scene, rng, cfg.budgets);
    });

    std::vector<TrainingExample> examples;
    examples.reserve(tasks);
    std::size_t skipped = 0;
    for (std::size_t task = 0; task < tasks; ++task) {
        if (outcomes[task].example) {
            examples.push_back(std::move(*outcomes[task].example));
        } else {
            ++skipped;
            log << "skip scene " << task / cfg.pairs_per_scene << " pair "
                << task % cfg.pairs_per_scene << ": " << outcomes[task].skip_reason << "\n";
        }
    }
    save_dataset(cfg.dataset_path, examples);
    log << "dataset: " << examples.size() << " examples (" << skipped << " skipped) -> "
        << cfg.dataset_path << "\n";
    return examples.size();
}

TrainHistory run_train(const PipelineConfig& cfg, std::ostream& log) {
    std::vector<TrainingExample> dataset = load_dataset(cfg.dataset_path);
    if (dataset.empty()) throw std::runtime_error("run_train: dataset is empty");
    const std::size_t d = static_cast<std::size_t>(dataset.front().scene.dim());

    std::vector<WganSample> samples;
    samples.reserve(dataset.size());
    for (const TrainingExample& ex : dataset) samples.push_back({ex.y0.tensor, ex.target.values});

    NoiseSchedule schedule = make_schedule(cfg.schedule_steps, cfg.beta_start, cfg.beta_end);
    GeneratorModel gen = make_generator(d, Rng(cfg.seed).derive("gen-init", 0));
    CriticModel critic = make_critic(d, Rng(cfg.seed).derive("critic-init", 0));

    log << "training on " << samples.size() << " examples (d=" << d << ", batch="
        << cfg.train.batch << ", epochs=" << cfg.train.epochs << ")\n";
    TrainHistory history =
        train(samples, gen, critic, cfg.train, schedule, Rng(cfg.seed).derive("train", 0));
    if (!history.generator_loss.empty())
        log << "final losses: critic " << history.critic_loss.back() << ", generator "
            << history.generator_loss.back() << "\n";

    Checkpoint ckpt;
    ckpt.generator = std::move(gen);
    ckpt.critic = std::move(critic);
    ckpt.schedule_steps = cfg.schedule_steps;
    ckpt.beta_start = cfg.beta_start;
    ckpt.beta_end = cfg.beta_end;
    ckpt.inference_t = cfg.inference_t;
    save_checkpoint_file(cfg.checkpoint_path, ckpt);
    log << "checkpoint -> " << cfg.checkpoint_path << "\n";
    return history;
}

namespace {

struct RunOutcome {
    bool success = false;
    double time_used = 0.0;  // reported planning time when successful
    double wall_time = 0.0;
    double length = 0.0;
    SamplerCounters counters;
    std::vector<Config> path;
};

struct SceneTask {
    std::uint64_t scene_id = 0;
    bool usable = false;
    // outcome[planner][budget]
    std::vector<std::vector<RunOutcome>> outcome;
};

const char* kPlannerNames[3] = {"rrt", "rrt_star", "biased_rrt"};

bool sample_endpoints(const Scene& scene, double min_separation, Rng& rng, Config& start,
                      Config& goal) {
    const auto d = static_cast<std::size_t>(scene.dim());
    for (int tries = 0; tries < 400; ++tries) {
        Config s(d), g(d);
        for (double& v : s) v = rng.uniform();
        for (double& v : g) v = rng.uniform();
        double dist = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            double dd = s[i] - g[i];
            dist += dd * dd;
        }
        if (std::sqrt(dist) < min_separation) continue;
        if (is_free(scene, s) && is_free(scene, g)) {
            start = std::move(s);
            goal = std::move(g);
            return true;
        }
    }
    return false;
}

}  // namespace

BenchReport run_benchmark(const PipelineConfig& cfg, std::ostream& log) {
    Checkpoint ckpt = load_checkpoint_file(cfg.checkpoint_path);
    // configuration errors must surface before any run
    {
        Scene probe = generate_scene(scene_seed(cfg.seed, kHeldoutIdBase), cfg.scene_spec);
        if (static_cast<int>(ckpt.generator.d) != probe.dim())
            throw std::runtime_error(
                "run_benchmark: checkpoint dimension does not match the benchmark robot");
    }
    NoiseSchedule schedule = make_schedule(ckpt.schedule_steps, ckpt.beta_start, ckpt.beta_end);
    BiasConfig bias = cfg.bias;
    bias.inference_t = ckpt.inference_t;

    std::vector<double> budgets = cfg.bench_budgets;
    std::sort(budgets.begin(), budgets.end());
    const double max_budget = budgets.back();

    std::vector<SceneTask> tasks(cfg.bench_scenes);
    std::size_t workers = resolve_worker_count(cfg.bench_workers);

    parallel_for(cfg.bench_scenes, workers, [&](std::size_t j) {
        SceneTask& task = tasks[j];
        task.scene_id = kHeldoutIdBase + j;
        Scene scene = generate_scene(scene_seed(cfg.seed, task.scene_id), cfg.scene_spec);
        Rng endpoint_rng(Rng(cfg.seed).derive("bench-endpoints", task.scene_id));
        Config start, goal;
        if (!sample_endpoints(scene, cfg.budgets.min_separation, endpoint_rng, start, goal))
            return;  // unusable scene; skipped uniformly for all planners
        task.usable = true;
        task.outcome.assign(3, std::vector<RunOutcome>(budgets.size()));
        WorkspaceImage image = make_workspace_image(scene, start, goal);

        for (int p = 0; p < 3; ++p) {
            Rng rng(Rng(cfg.seed).derive("bench-run", task.scene_id * 8 + static_cast<std::uint64_t>(p)));
            if (!cfg.iteration_budgets) {
                PlannerConfig pc = cfg.planner;
                pc.time_budget = max_budget;
                if (p == 1) {  // rrt_star: anytime, snapshot at each budget mark
                    std::vector<Snapshot> snaps;
                    rrt_star(scene, start, goal, pc, rng, budgets, &snaps);
                    for (std::size_t b = 0; b < budgets.size(); ++b) {
                        RunOutcome& out = task.outcome[p][b];
                        out.success = snaps[b].success;
                        out.time_used = budgets[b];
                        out.wall_time = budgets[b];
                        out.length = snaps[b].path_length;
                        out.path = snaps[b].path;
                    }
                } else {
                    PlanResult res =
                        p == 0 ? rrt(scene, start, goal, pc, rng)
                               : biased_rrt(scene, start, goal, image, ckpt.generator, schedule,
                                            pc, bias, rng);
                    for (std::size_t b = 0; b < budgets.size(); ++b) {
                        RunOutcome& out = task.outcome[p][b];
                        bool ok = res.success && res.time_to_success <= budgets[b];
                        out.success = ok;
                        out.time_used = ok ? res.time_to_success : budgets[b];
                        out.wall_time = res.wall_time;
                        out.length = ok ? res.path_length : 0.0;
                        out.counters = res.counters;
                        if (ok) out.path = res.path;
                    }
                }
            } else {
                // deterministic mode: budgets are sample counts, one run per budget
                for (std::size_t b = 0; b < budgets.size(); ++b) {
                    PlannerConfig pc = cfg.planner;
                    pc.time_budget = 0.0;
                    pc.max_samples = static_cast<std::size_t>(budgets[b]);
                    Rng run_rng(Rng(cfg.seed).derive("bench-run",
                                                     task.scene_id * 8 + static_cast<std::uint64_t>(p)));
                    PlanResult res;
                    if (p == 0)
                        res = rrt(scene, start, goal, pc, run_rng);
                    else if (p == 1)
                        res = rrt_star(scene, start, goal, pc, run_rng);
                    else
                        res = biased_rrt(scene, start, goal, image, ckpt.generator, schedule, pc,
                                         bias, run_rng);
                    RunOutcome& out = task.outcome[p][b];
                    out.success = res.success;
                    out.time_used = res.wall_time;
                    out.wall_time = res.wall_time;
                    out.length = res.success ? res.path_length : 0.0;
                    out.counters = res.counters;
                    if (res.success) out.path = res.path;
                }
            }
        }
    });

    // per-run records, merged deterministically in (scene, planner, budget) order
    const bool arm = cfg.scene_spec.arm_robot;
    const double unit = arm ? kTwoPi : 1.0;
    {
        std::ofstream runs(cfg.bench_runs, std::ios::binary);
        if (!runs) throw std::runtime_error("cannot open run-record file: " + cfg.bench_runs);
        for (const SceneTask& task : tasks) {
            if (!task.usable) continue;
            for (int p = 0; p < 3; ++p) {
                for (std::size_t b = 0; b < budgets.size(); ++b) {
                    const RunOutcome& out = task.outcome[p][b];
                    runs << "run " << task.scene_id << " " << kPlannerNames[p] << " "
                         << Rng(cfg.seed).derive("bench-run", task.scene_id * 8 +
                                                                  static_cast<std::uint64_t>(p))
                         << " " << format_double(budgets[b]) << " " << (out.success ? 1 : 0) << " "
                         << format_double(out.wall_time) << " " << format_double(out.time_used)
                         << " " << format_double(out.length * unit) << " "
                         << out.counters.biased_draws << " " << out.counters.uniform_draws << " "
                         << out.counters.probe_attempts << " " << out.counters.draws_after_exhaust
                         << " " << out.counters.uniform_after_exhaust << " "
                         << out.counters.level_reached << " waypoints " << out.path.size();
                    for (const Config& q : out.path)
                        for (double v : q) runs << " " << format_double(v);
                    runs << "\n";
                }
            }
        }
    }

    BenchReport report;
    report.iteration_budgets = cfg.iteration_budgets;
    report.length_unit = arm ? "rad" : "cspace";
    for (int p = 0; p < 3; ++p) {
        for (std::size_t b = 0; b < budgets.size(); ++b) {
            BenchCell cell;
            cell.planner = kPlannerNames[p];
            cell.budget = budgets[b];
            std::vector<double> times, lengths;
            for (const SceneTask& task : tasks) {
                if (!task.usable) continue;
                const RunOutcome& out = task.outcome[p][b];
                ++cell.n_runs;
                if (out.success) {
                    ++cell.successes;
                    times.push_back(out.time_used);
                    lengths.push_back(out.length * unit);
                }
            }
            if (cell.n_runs > 0)
                cell.success_rate =
                    static_cast<double>(cell.successes) / static_cast<double>(cell.n_runs);
            auto mean_sd = [](const std::vector<double>& v) -> std::pair<double, double> {
                if (v.empty()) return {0.0, 0.0};
                double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
                double s2 = 0.0;
                for (double x : v) s2 += (x - m) * (x - m);
                double sd = v.size() > 1 ? std::sqrt(s2 / static_cast<double>(v.size() - 1)) : 0.0;
                return {m, sd};
            };
            std::tie(cell.time_mean, cell.time_sd) = mean_sd(times);
            std::tie(cell.len_mean, cell.len_sd) = mean_sd(lengths);
            report.cells.push_back(std::move(cell));
        }
    }

    emit_csv(report, cfg.bench_csv);
    emit_svg(report, cfg.bench_svg);

    log << "benchmark over " << cfg.bench_scenes << " held-out scenes ("
        << (cfg.iteration_budgets ? "sample budgets" : "wall-clock budgets") << ")\n";
    log << std::left << std::setw(12) << "planner" << std::setw(10) << "budget" << std::setw(8)
        << "n" << std::setw(10) << "success" << std::setw(20) << "time mean+-sd" << std::setw(20)
        << "length mean+-sd" << "\n";
    for (const BenchCell& c : report.cells) {
        std::ostringstream t, l;
        t << std::fixed << std::setprecision(3) << c.time_mean << " +- " << c.time_sd;
        l << std::fixed << std::setprecision(3) << c.len_mean << " +- " << c.len_sd;
        log << std::left << std::setw(12) << c.planner << std::setw(10) << c.budget << std::setw(8)
            << c.n_runs << std::setw(10) << std::fixed << std::setprecision(3) << c.success_rate
            << std::setw(20) << t.str() << std::setw(20) << l.str() << "\n";
    }
    log << "time/length statistics cover successful runs only\n";
    return report;
}

const BenchCell* BenchReport::find(const std::string& planner, double budget) const {
    for (const BenchCell& c : cells)
        if (c.planner == planner && std::abs(c.budget - budget) < 1e-12) return &c;
    return nullptr;
}

void emit_csv(const BenchReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open CSV for writing: " + path);
    out << "planner,budget_s,n,success_rate,time_mean,time_sd,len_mean,len_sd\n";
    for (const BenchCell& c : report.cells) {
        out << c.planner << "," << format_double(c.budget) << "," << c.n_runs << ","
            << format_double(c.success_rate) << "," << format_double(c.time_mean) << ","
            << format_double(c.time_sd) << "," << format_double(c.len_mean) << ","
            << format_double(c.len_sd) << "\n";
    }
    if (!out) throw std::runtime_error("failed writing CSV: " + path);
}

BenchReport parse_report_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open CSV: " + path);
    std::string line;
    if (!std::getline(in, line) ||
        trim(line) != "planner,budget_s,n,success_rate,time_mean,time_sd,len_mean,len_sd")
        throw ParseError(path + ":1: unexpected CSV header");
    BenchReport report;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 8)
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected 8 fields");
        BenchCell c;
        c.planner = fields[0];
        auto parse_field = [&](const std::string& text, const char* name) {
            TokenReader r(text, path + ":" + std::to_string(line_no));
            return r.next_double(name);
        };
        c.budget = parse_field(fields[1], "budget_s");
        c.n_runs = static_cast<std::size_t>(parse_field(fields[2], "n"));
        c.success_rate = parse_field(fields[3], "success_rate");
        c.successes = static_cast<std::size_t>(std::llround(c.success_rate * static_cast<double>(c.n_runs)));
        c.time_mean = parse_field(fields[4], "time_mean");
        c.time_sd = parse_field(fields[5], "time_sd");
        c.len_mean = parse_field(fields[6], "len_mean");
        c.len_sd = parse_field(fields[7], "len_sd");
        report.cells.push_back(std::move(c));
    }
    return report;
}

void emit_svg(const BenchReport& report, const std::string& path) {
    std::vector<double> budgets;
    std::vector<std::string> planners;
    for (const BenchCell& c : report.cells) {
        if (std::find(budgets.begin(), budgets.end(), c.budget) == budgets.end())
            budgets.push_back(c.budget);
        if (std::find(planners.begin(), planners.end(), c.planner) == planners.end())
            planners.push_back(c.planner);
    }
    std::sort(budgets.begin(), budgets.end());

    const double width = 720, height = 420;
    const double left = 70, right = 40, top = 50, bottom = 60;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    const char* colors[3] = {"#4878a8", "#b85c5c", "#6aa56a"};

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open SVG for writing: " + path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
        << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\""
        << " font-size=\"16\">Success rate by planning budget</text>\n";

    for (int tick = 0; tick <= 5; ++tick) {
        double frac = tick / 5.0;
        double y = top + plot_h * (1.0 - frac);
        out << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + plot_w
            << "\" y2=\"" << y << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        out << "<text x=\"" << left - 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << static_cast<int>(frac * 100) << "%</text>\n";
    }

    const std::size_t groups = budgets.size();
    const double group_w = plot_w / static_cast<double>(std::max<std::size_t>(groups, 1));
    const double bar_w = group_w / static_cast<double>(planners.size() + 1);
    for (std::size_t gi = 0; gi < groups; ++gi) {
        double gx = left + group_w * static_cast<double>(gi);
        for (std::size_t pi = 0; pi < planners.size(); ++pi) {
            const BenchCell* cell = report.find(planners[pi], budgets[gi]);
            double rate = cell ? cell->success_rate : 0.0;
            double bh = plot_h * rate;
            double x = gx + bar_w * (0.5 + static_cast<double>(pi));
            double y = top + plot_h - bh;
            out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w * 0.9
                << "\" height=\"" << bh << "\" fill=\"" << colors[pi % 3] << "\"/>\n";
            out << "<text x=\"" << x + bar_w * 0.45 << "\" y=\"" << y - 4
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
                << static_cast<int>(std::lround(rate * 100)) << "</text>\n";
        }
        std::ostringstream label;
        label << (report.iteration_budgets ? "n=" : "") << budgets[gi]
              << (report.iteration_budgets ? "" : " s");
        out << "<text x=\"" << gx + group_w / 2 << "\" y=\"" << top + plot_h + 20
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
            << label.str() << "</text>\n";
    }

    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
        << top + plot_h << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
        << "\" y2=\"" << top + plot_h << "\" stroke=\"black\" stroke-width=\"1\"/>\n";

    for (std::size_t pi = 0; pi < planners.size(); ++pi) {
        double lx = left + plot_w - 130;
        double ly = top + 10 + 18 * static_cast<double>(pi);
        out << "<rect x=\"" << lx << "\" y=\"" << ly - 9 << "\" width=\"12\" height=\"12\" fill=\""
            << colors[pi % 3] << "\"/>\n";
        out << "<text x=\"" << lx + 18 << "\" y=\"" << ly + 1
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << planners[pi] << "</text>\n";
    }
    out << "</svg>\n";
    if (!out) throw std::runtime_error("failed writing SVG: " + path);
}

PlanResult run_plan(const PipelineConfig& cfg, std::uint64_t scene_id, const std::string& planner,
                    double budget_seconds, std::ostream& log) {
    Scene scene = generate_scene(scene_seed(cfg.seed, scene_id), cfg.scene_spec);
    Rng endpoint_rng(Rng(cfg.seed).derive("bench-endpoints", scene_id));
    Config start, goal;
    if (!sample_endpoints(scene, cfg.budgets.min_separation, endpoint_rng, start, goal))
        throw std::runtime_error("run_plan: no free start/goal pair found in this scene");

    PlannerConfig pc = cfg.planner;
    pc.time_budget = budget_seconds;
    Rng rng(Rng(cfg.seed).derive("plan", scene_id));

    PlanResult res;
    if (planner == "rrt") {
        res = rrt(scene, start, goal, pc, rng);
    } else if (planner == "rrt_star") {
        res = rrt_star(scene, start, goal, pc, rng);
    } else if (planner == "biased_rrt") {
        Checkpoint ckpt = load_checkpoint_file(cfg.checkpoint_path);
        if (static_cast<int>(ckpt.generator.d) != scene.dim())
            throw std::runtime_error("run_plan: checkpoint dimension does not match the robot");
        NoiseSchedule schedule = make_schedule(ckpt.schedule_steps, ckpt.beta_start, ckpt.beta_end);
        BiasConfig bias = cfg.bias;
        bias.inference_t = ckpt.inference_t;
        WorkspaceImage image = make_workspace_image(scene, start, goal);
        res = biased_rrt(scene, start, goal, image, ckpt.generator, schedule, pc, bias, rng);
    } else {
        throw std::invalid_argument("run_plan: unknown planner '" + planner + "'");
    }

    log << "scene " << scene_id << " planner " << planner << ": "
        << (res.success ? "success" : "failure") << ", wall " << res.wall_time << " s, length "
        << res.path_length << ", tree " << res.tree_size << ", samples biased/uniform "
        << res.counters.biased_draws << "/" << res.counters.uniform_draws << "\n";
    return res;
}

void run_inspect(const std::string& dataset_path, std::ostream& out) {
    std::vector<TrainingExample> dataset = load_dataset(dataset_path);
    out << "dataset " << dataset_path << ": " << dataset.size() << " examples\n";
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const TrainingExample& ex = dataset[i];
        out << "  [" << i << "] robot="
            << (ex.scene.robot.kind == RobotModel::Kind::Point ? "point" : "arm")
            << " obstacles=" << ex.scene.obstacles.size() << " waypoints="
            << ex.raw_waypoints.size() << " exemplars=" << ex.target.used_slots
            << " demo_length=" << ex.demo_length << "\n";
    }
}

}  // namespace wganplan
