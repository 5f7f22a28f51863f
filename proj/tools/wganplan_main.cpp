#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wganplan/bench.hpp"

namespace {

using wganplan::KeyValueConfig;
using wganplan::PipelineConfig;

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "key=value configuration file");
    cmd->add_option("--seed", args.seed, "master seed controlling all randomness")
        ->each([&](const std::string&) { args.seed_set = true; });
    cmd->add_option("--set", args.overrides, "override a config key, e.g. --set train.epochs=10");
}

PipelineConfig resolve_config(const CommonArgs& args) {
    KeyValueConfig kv = args.config_path.empty() ? KeyValueConfig{}
                                                 : KeyValueConfig::from_file(args.config_path);
    for (const std::string& item : args.overrides) {
        auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("--set expects key=value, got '" + item + "'");
        kv.set(item.substr(0, eq), item.substr(eq + 1));
    }
    if (args.seed_set) kv.set("seed", std::to_string(args.seed));
    PipelineConfig cfg = PipelineConfig::resolve(kv);
    for (const std::string& path :
         {cfg.dataset_path, cfg.checkpoint_path, cfg.bench_csv, cfg.bench_svg, cfg.bench_runs}) {
        std::filesystem::path parent = std::filesystem::path(path).parent_path();
        if (!parent.empty()) std::filesystem::create_directories(parent);
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learned-sampling motion planning: dataset generation, WGAN-GP training, "
                 "planning and benchmarking"};
    app.require_subcommand(1);

    CommonArgs gen_args, train_args, plan_args, bench_args, inspect_args;

    CLI::App* gen = app.add_subcommand("gen-data", "generate the demonstration dataset");
    add_common(gen, gen_args);

    CLI::App* train = app.add_subcommand("train", "train the generator/critic pair");
    add_common(train, train_args);

    CLI::App* plan = app.add_subcommand("plan", "plan a single scene");
    add_common(plan, plan_args);
    std::uint64_t scene_id = 0;
    std::string planner = "biased_rrt";
    double budget = 0.25;
    plan->add_option("--scene-id", scene_id, "scene identifier (seeds the generator)");
    plan->add_option("--planner", planner, "rrt | rrt_star | biased_rrt");
    plan->add_option("--budget", budget, "planning budget in seconds");

    CLI::App* bench = app.add_subcommand("bench", "run the held-out benchmark");
    add_common(bench, bench_args);

    CLI::App* inspect = app.add_subcommand("inspect", "summarize a dataset file");
    add_common(inspect, inspect_args);
    std::string inspect_path;
    inspect->add_option("--dataset", inspect_path, "dataset file (defaults to dataset.path)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            run_gen_data(resolve_config(gen_args), std::cout);
        } else if (train->parsed()) {
            run_train(resolve_config(train_args), std::cout);
        } else if (plan->parsed()) {
            run_plan(resolve_config(plan_args), scene_id, planner, budget, std::cout);
        } else if (bench->parsed()) {
            run_benchmark(resolve_config(bench_args), std::cout);
        } else if (inspect->parsed()) {
            PipelineConfig cfg = resolve_config(inspect_args);
            wganplan::run_inspect(inspect_path.empty() ? cfg.dataset_path : inspect_path,
                                  std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
