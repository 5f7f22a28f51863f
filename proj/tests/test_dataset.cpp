#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "wganplan/dataset.hpp"

using namespace wganplan;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) {
        path = (std::filesystem::temp_directory_path() / name).string();
    }
    ~TempFile() { std::remove(path.c_str()); }
};

BuildBudgets quick_budgets() {
    BuildBudgets b;
    b.demo_max_samples = 4000;
    return b;
}

}  // namespace

TEST_CASE("generate_scene: zero obstacle range gives an empty scene") {
    SceneSpec spec;
    spec.min_walls = 0;
    spec.max_walls = 0;
    spec.min_obstacles = 0;
    spec.max_obstacles = 0;
    Scene scene = generate_scene(1, spec);
    CHECK(scene.obstacles.empty());
}

TEST_CASE("generate_scene is deterministic in the seed") {
    SceneSpec spec;
    Scene a = generate_scene(1234, spec);
    Scene b = generate_scene(1234, spec);
    CHECK(serialize_scene(a) == serialize_scene(b));
    Scene c = generate_scene(1235, spec);
    CHECK(serialize_scene(a) != serialize_scene(c));
}

TEST_CASE("generate_scene: obstacle counts cover the configured range uniformly") {
    SceneSpec spec;
    spec.min_walls = 0;
    spec.max_walls = 0;
    spec.min_obstacles = 6;
    spec.max_obstacles = 12;
    const int bins = 7;
    std::vector<int> counts(bins, 0);
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
        Scene s = generate_scene(50000 + static_cast<std::uint64_t>(i), spec);
        REQUIRE(s.obstacles.size() >= 6);
        REQUIRE(s.obstacles.size() <= 12);
        counts[static_cast<int>(s.obstacles.size()) - 6] += 1;
    }
    double expected = static_cast<double>(n) / bins;
    double chi2 = 0.0;
    for (int b = 0; b < bins; ++b)
        chi2 += (counts[b] - expected) * (counts[b] - expected) / expected;
    // chi-square critical value for df=6 at p=0.01
    CHECK(chi2 < 16.812);
}

TEST_CASE("collect_demo: visible pairs give near-straight demonstrations") {
    Scene scene({{0.0, 0.0}, {1.0, 1.0}}, {}, RobotModel::point_robot());
    Config start{0.1, 0.1}, goal{0.9, 0.8};
    BuildBudgets budgets;
    budgets.demo_max_samples = 12000;
    Rng rng(5);
    auto demo = collect_demo(scene, start, goal, budgets, rng);
    REQUIRE(demo.has_value());
    CHECK(demo->front() == start);

    double len = 0.0;
    double max_spacing = 0.0;
    for (std::size_t i = 0; i + 1 < demo->size(); ++i) {
        double d = std::hypot((*demo)[i + 1][0] - (*demo)[i][0], (*demo)[i + 1][1] - (*demo)[i][1]);
        len += d;
        max_spacing = std::max(max_spacing, d);
    }
    double direct = std::hypot(0.8, 0.7);
    CHECK(len <= direct * 1.05);
    CHECK(max_spacing <= budgets.densify_spacing + 1e-12);
}

TEST_CASE("collect_demo: unreachable goals report failure") {
    std::vector<Obstacle> obs = {
        Obstacle::rect({0.5, 0.5}, {0.95, 0.55}), Obstacle::rect({0.5, 0.9}, {0.95, 0.95}),
        Obstacle::rect({0.5, 0.5}, {0.55, 0.95}), Obstacle::rect({0.9, 0.5}, {0.95, 0.95})};
    Scene scene({{0.0, 0.0}, {1.0, 1.0}}, obs, RobotModel::point_robot());
    Config goal{0.725, 0.725};
    REQUIRE(is_free(scene, goal));
    BuildBudgets budgets;
    budgets.demo_max_samples = 1200;
    Rng rng(6);
    CHECK_FALSE(collect_demo(scene, {0.1, 0.1}, goal, budgets, rng).has_value());
}

TEST_CASE("build_example: empty scenes always succeed with ordered exemplars") {
    Scene scene({{0.0, 0.0}, {1.0, 1.0}}, {}, RobotModel::point_robot());
    Rng rng(7);
    BuildOutcome outcome = build_example(scene, rng, quick_budgets());
    REQUIRE(outcome.example.has_value());
    const TrainingExample& ex = *outcome.example;
    CHECK(ex.target.used_slots >= 1);
    CHECK(ex.target.used_slots <= 64);
    CHECK(ex.raw_waypoints.size() >= 2);
    CHECK(ex.demo_length > 0.0);

    // the condition channel carries start and goal
    CHECK(ex.y0.tensor.data[4 * 1024 + 0] == ex.start[0]);
    CHECK(ex.y0.tensor.data[4 * 1024 + 3] == ex.goal[1]);
}

TEST_CASE("build_example: decoded exemplars stay in free space") {
    Rng rng(8);
    SceneSpec spec;
    spec.min_obstacles = 4;
    spec.max_obstacles = 7;
    int built = 0;
    for (std::uint64_t s = 0; s < 6 && built < 3; ++s) {
        Scene scene = generate_scene(7000 + s, spec);
        BuildOutcome outcome = build_example(scene, rng, quick_budgets());
        if (!outcome.example) continue;
        ++built;
        auto exemplars = decode_matrix(outcome.example->target);
        for (const Config& q : exemplars) {
            CHECK(q[0] >= 0.0);
            CHECK(q[0] <= 1.0);
            CHECK(is_free(scene, q));
        }
    }
    CHECK(built >= 3);
}

TEST_CASE("build_example is deterministic in its rng") {
    Scene scene = generate_scene(31337, SceneSpec{});
    Rng rng_a(99);
    Rng rng_b(99);
    BuildOutcome a = build_example(scene, rng_a, quick_budgets());
    BuildOutcome b = build_example(scene, rng_b, quick_budgets());
    REQUIRE(a.example.has_value());
    REQUIRE(b.example.has_value());
    CHECK(serialize_example(*a.example) == serialize_example(*b.example));
}

TEST_CASE("dataset save/load: empty dataset") {
    TempFile tmp("wganplan_empty_dataset.txt");
    save_dataset(tmp.path, {});
    std::ifstream in(tmp.path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "wganplan-dataset 1");
    CHECK(load_dataset(tmp.path).empty());
}

TEST_CASE("dataset save/load round trips") {
    std::vector<TrainingExample> examples;
    Rng rng(10);
    for (std::uint64_t s = 0; s < 10; ++s) {
        Scene scene = generate_scene(100 + s, SceneSpec{});
        BuildOutcome out = build_example(scene, rng, quick_budgets());
        if (out.example) examples.push_back(std::move(*out.example));
    }
    REQUIRE(examples.size() >= 6);

    TempFile tmp("wganplan_roundtrip_dataset.txt");
    save_dataset(tmp.path, examples);
    auto loaded = load_dataset(tmp.path);
    REQUIRE(loaded.size() == examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        CHECK(serialize_example(loaded[i]) == serialize_example(examples[i]));
        CHECK(loaded[i].start == examples[i].start);
        CHECK(loaded[i].goal == examples[i].goal);
        CHECK(loaded[i].y0.tensor.data == examples[i].y0.tensor.data);
        CHECK(loaded[i].target.values.data == examples[i].target.values.data);
        CHECK(loaded[i].target.used_slots == examples[i].target.used_slots);
        CHECK(loaded[i].raw_waypoints == examples[i].raw_waypoints);
        CHECK(loaded[i].demo_length == examples[i].demo_length);
    }

    // saving the loaded copy reproduces the file byte-for-byte
    TempFile tmp2("wganplan_roundtrip_dataset2.txt");
    save_dataset(tmp2.path, loaded);
    std::ifstream a(tmp.path, std::ios::binary), b(tmp2.path, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
}

TEST_CASE("dataset loader reports truncation with position") {
    TempFile tmp("wganplan_truncated_dataset.txt");
    {
        Rng rng(11);
        Scene scene = generate_scene(200, SceneSpec{});
        BuildOutcome out = build_example(scene, rng, quick_budgets());
        REQUIRE(out.example.has_value());
        save_dataset(tmp.path, {*out.example});
        // chop the file mid-record
        std::ifstream in(tmp.path, std::ios::binary);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        std::ofstream outf(tmp.path, std::ios::binary | std::ios::trunc);
        outf << text.substr(0, text.size() / 2);
    }
    CHECK_THROWS_AS(load_dataset(tmp.path), ParseError);
    try {
        load_dataset(tmp.path);
    } catch (const ParseError& e) {
        std::string msg = e.what();
        CHECK(msg.find("field") != std::string::npos);
        CHECK(msg.find(tmp.path) != std::string::npos);
    }
}

TEST_CASE("dataset loader rejects malformed headers naming the field") {
    TempFile tmp("wganplan_badheader_dataset.txt");
    std::ofstream(tmp.path) << "not-a-dataset 1\n";
    CHECK_THROWS_WITH_AS(load_dataset(tmp.path), doctest::Contains("dataset magic"), ParseError);
}
