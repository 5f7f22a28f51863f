#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "wganplan/bench.hpp"

using namespace wganplan;

namespace {

struct TempDir {
    std::filesystem::path dir;
    explicit TempDir(const std::string& name) {
        dir = std::filesystem::temp_directory_path() / name;
        std::filesystem::create_directories(dir);
    }
    ~TempDir() { std::filesystem::remove_all(dir); }
    std::string path(const std::string& file) const { return (dir / file).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// minimal well-formedness scan: tags balance and nest properly
bool xml_well_formed(const std::string& text) {
    std::vector<std::string> stack;
    std::size_t pos = 0;
    while ((pos = text.find('<', pos)) != std::string::npos) {
        std::size_t end = text.find('>', pos);
        if (end == std::string::npos) return false;
        std::string tag = text.substr(pos + 1, end - pos - 1);
        pos = end + 1;
        if (tag.empty()) return false;
        if (tag[0] == '?' || tag[0] == '!') continue;  // declaration / comment
        bool closing = tag[0] == '/';
        bool self_closing = tag.back() == '/';
        std::string name = tag.substr(closing ? 1 : 0);
        name = name.substr(0, name.find_first_of(" \t\n/"));
        if (closing) {
            if (stack.empty() || stack.back() != name) return false;
            stack.pop_back();
        } else if (!self_closing) {
            stack.push_back(name);
        }
    }
    return stack.empty();
}

BenchReport sample_report() {
    BenchReport report;
    const char* planners[3] = {"rrt", "rrt_star", "biased_rrt"};
    double budgets[3] = {0.05, 0.1, 0.25};
    double rate = 0.30;
    for (const char* p : planners) {
        for (double b : budgets) {
            BenchCell cell;
            cell.planner = p;
            cell.budget = b;
            cell.n_runs = 100;
            cell.successes = static_cast<std::size_t>(rate * 100);
            cell.success_rate = rate;
            cell.time_mean = b * 0.7123456789;
            cell.time_sd = b * 0.111;
            cell.len_mean = 1.23456789 + b;
            cell.len_sd = 0.3456789;
            report.cells.push_back(cell);
            rate += 0.07;
        }
    }
    return report;
}

}  // namespace

TEST_CASE("KeyValueConfig parses keys, comments and overrides") {
    KeyValueConfig kv = KeyValueConfig::from_text(
        "# comment\n"
        "seed = 42\n"
        "train.lr=3e-4   # trailing comment\n"
        "bias.sigma=0,0.1,0.2\n"
        "\n");
    CHECK(kv.get_u64("seed", 0) == 42);
    CHECK(kv.get_double("train.lr", 0) == doctest::Approx(3e-4));
    CHECK(kv.get_double_list("bias.sigma", {}) == std::vector<double>{0.0, 0.1, 0.2});
    CHECK(kv.get_size("missing", 7) == 7);

    kv.set("train.lr", "1e-2");
    CHECK(kv.get_double("train.lr", 0) == doctest::Approx(1e-2));

    CHECK_THROWS_AS(KeyValueConfig::from_text("not a pair\n"), ParseError);
    CHECK_THROWS_AS(KeyValueConfig::from_text("=value\n"), ParseError);
}

TEST_CASE("PipelineConfig resolves defaults and validates modes") {
    KeyValueConfig kv = KeyValueConfig::from_text("bench.budget_mode=iterations\n");
    PipelineConfig cfg = PipelineConfig::resolve(kv);
    CHECK(cfg.iteration_budgets);
    CHECK(cfg.scenes == 200);
    CHECK(cfg.train.lr == doctest::Approx(4e-5));
    CHECK(cfg.train.lambda_gp == doctest::Approx(10.0));
    CHECK(cfg.train.n_critic == 5);
    CHECK(cfg.bias.sigma.front() == 0.0);

    KeyValueConfig bad = KeyValueConfig::from_text("bench.budget_mode=sideways\n");
    CHECK_THROWS_AS(PipelineConfig::resolve(bad), ParseError);
}

TEST_CASE("training and held-out scene ids occupy disjoint seed ranges") {
    CHECK(PipelineConfig{}.scenes < kHeldoutIdBase);
    // identical master seed, distinct id ranges, distinct seeds
    CHECK(scene_seed(1, 0) != scene_seed(1, kHeldoutIdBase));
    CHECK(scene_seed(1, 199) != scene_seed(1, kHeldoutIdBase + 199));
    // deterministic
    CHECK(scene_seed(7, 3) == scene_seed(7, 3));
}

TEST_CASE("CSV: empty report emits only the header") {
    TempDir tmp("wganplan_csv_empty");
    BenchReport report;
    emit_csv(report, tmp.path("empty.csv"));
    CHECK(slurp(tmp.path("empty.csv")) ==
          "planner,budget_s,n,success_rate,time_mean,time_sd,len_mean,len_sd\n");
    CHECK(parse_report_csv(tmp.path("empty.csv")).cells.empty());
}

TEST_CASE("CSV round trip reproduces the report numerically") {
    TempDir tmp("wganplan_csv_roundtrip");
    BenchReport report = sample_report();
    emit_csv(report, tmp.path("report.csv"));
    BenchReport back = parse_report_csv(tmp.path("report.csv"));
    REQUIRE(back.cells.size() == report.cells.size());
    for (std::size_t i = 0; i < report.cells.size(); ++i) {
        CHECK(back.cells[i].planner == report.cells[i].planner);
        CHECK(back.cells[i].budget == doctest::Approx(report.cells[i].budget).epsilon(1e-9));
        CHECK(back.cells[i].n_runs == report.cells[i].n_runs);
        CHECK(back.cells[i].success_rate ==
              doctest::Approx(report.cells[i].success_rate).epsilon(1e-9));
        CHECK(back.cells[i].time_mean == doctest::Approx(report.cells[i].time_mean).epsilon(1e-9));
        CHECK(back.cells[i].len_mean == doctest::Approx(report.cells[i].len_mean).epsilon(1e-9));
        CHECK(back.cells[i].len_sd == doctest::Approx(report.cells[i].len_sd).epsilon(1e-9));
    }

    CHECK_THROWS_AS(parse_report_csv(tmp.path("missing.csv")), std::runtime_error);
}

TEST_CASE("SVG output is well-formed and self-contained") {
    TempDir tmp("wganplan_svg");
    emit_svg(sample_report(), tmp.path("report.svg"));
    std::string svg = slurp(tmp.path("report.svg"));
    CHECK(xml_well_formed(svg));
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("rrt_star") != std::string::npos);
    // no external asset references
    CHECK(svg.find("href") == std::string::npos);
    CHECK(svg.find("url(") == std::string::npos);
}

TEST_CASE("run_benchmark with zero scenes yields an empty-run report") {
    TempDir tmp("wganplan_bench_empty");
    // untrained checkpoint for the biased planner
    Checkpoint ckpt;
    ckpt.generator = make_generator(2, 1);
    ckpt.critic = make_critic(2, 2);
    save_checkpoint_file(tmp.path("ckpt.bin"), ckpt);

    PipelineConfig cfg;
    cfg.checkpoint_path = tmp.path("ckpt.bin");
    cfg.bench_scenes = 0;
    cfg.bench_csv = tmp.path("bench.csv");
    cfg.bench_svg = tmp.path("bench.svg");
    cfg.bench_runs = tmp.path("runs.txt");
    std::ostringstream log;
    BenchReport report = run_benchmark(cfg, log);
    for (const BenchCell& c : report.cells) CHECK(c.n_runs == 0);
    CHECK(std::filesystem::exists(tmp.path("bench.csv")));
}

TEST_CASE("run_benchmark smoke: iteration mode produces deterministic outputs") {
    TempDir tmp("wganplan_bench_smoke");
    Checkpoint ckpt;
    ckpt.generator = make_generator(2, 11);
    ckpt.critic = make_critic(2, 12);
    save_checkpoint_file(tmp.path("ckpt.bin"), ckpt);

    PipelineConfig cfg;
    cfg.seed = 5;
    cfg.checkpoint_path = tmp.path("ckpt.bin");
    cfg.bench_scenes = 6;
    cfg.iteration_budgets = true;
    cfg.bench_budgets = {200, 800};
    cfg.bench_workers = 2;
    cfg.bench_csv = tmp.path("bench.csv");
    cfg.bench_svg = tmp.path("bench.svg");
    cfg.bench_runs = tmp.path("runs.txt");

    std::ostringstream log;
    BenchReport a = run_benchmark(cfg, log);
    std::string csv_a = slurp(tmp.path("bench.csv"));
    BenchReport b = run_benchmark(cfg, log);
    std::string csv_b = slurp(tmp.path("bench.csv"));

    // success/length columns are deterministic; wall-time columns are not.
    // compare CSVs with the two time fields masked out
    auto mask_times = [](const std::string& csv) {
        std::istringstream in(csv);
        std::ostringstream out;
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            if (first) {
                out << line << "\n";
                first = false;
                continue;
            }
            std::vector<std::string> f;
            std::stringstream ss(line);
            std::string item;
            while (std::getline(ss, item, ',')) f.push_back(item);
            REQUIRE(f.size() == 8);
            out << f[0] << "," << f[1] << "," << f[2] << "," << f[3] << ",*,*," << f[6] << ","
                << f[7] << "\n";
        }
        return out.str();
    };
    CHECK(mask_times(csv_a) == mask_times(csv_b));

    // monotone success within each planner (same seed, nested sample budgets)
    for (const char* planner : {"rrt", "rrt_star", "biased_rrt"}) {
        const BenchCell* small = a.find(planner, 200);
        const BenchCell* large = a.find(planner, 800);
        REQUIRE(small != nullptr);
        REQUIRE(large != nullptr);
        CHECK(small->successes <= large->successes);
    }

    // run records carry provenance counters and waypoints
    std::string runs = slurp(tmp.path("runs.txt"));
    CHECK(runs.find("run ") != std::string::npos);
    CHECK(runs.find("waypoints") != std::string::npos);
}

TEST_CASE("run_benchmark rejects dimension-mismatched checkpoints before running") {
    TempDir tmp("wganplan_bench_mismatch");
    Checkpoint ckpt;
    ckpt.generator = make_generator(3, 21);  // arm-dimensional generator
    ckpt.critic = make_critic(3, 22);
    save_checkpoint_file(tmp.path("ckpt.bin"), ckpt);

    PipelineConfig cfg;
    cfg.checkpoint_path = tmp.path("ckpt.bin");
    cfg.bench_scenes = 2;
    cfg.bench_csv = tmp.path("bench.csv");
    cfg.bench_svg = tmp.path("bench.svg");
    cfg.bench_runs = tmp.path("runs.txt");
    std::ostringstream log;
    CHECK_THROWS_WITH_AS(run_benchmark(cfg, log), doctest::Contains("dimension"),
                         std::runtime_error);
}

TEST_CASE("gen-data pipeline is byte-reproducible") {
    TempDir tmp("wganplan_gendata_repro");
    PipelineConfig cfg;
    cfg.seed = 7;
    cfg.scenes = 3;
    cfg.pairs_per_scene = 1;
    cfg.budgets.demo_max_samples = 2500;
    cfg.dataset_path = tmp.path("a.txt");
    std::ostringstream log;
    run_gen_data(cfg, log);
    cfg.dataset_path = tmp.path("b.txt");
    run_gen_data(cfg, log);
    CHECK(slurp(tmp.path("a.txt")) == slurp(tmp.path("b.txt")));
    CHECK(slurp(tmp.path("a.txt")).size() > 100);
}

TEST_CASE("run_inspect summarizes a dataset") {
    TempDir tmp("wganplan_inspect");
    PipelineConfig cfg;
    cfg.seed = 9;
    cfg.scenes = 2;
    cfg.pairs_per_scene = 1;
    cfg.budgets.demo_max_samples = 2500;
    cfg.dataset_path = tmp.path("data.txt");
    std::ostringstream log;
    run_gen_data(cfg, log);

    std::ostringstream out;
    run_inspect(cfg.dataset_path, out);
    CHECK(out.str().find("examples") != std::string::npos);
    CHECK(out.str().find("demo_length") != std::string::npos);
}
