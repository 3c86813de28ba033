#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gfarena/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"gfarena: grant-free uplink simulator and TinyQMIX trainer"};
    app.require_subcommand(1);

    gfarena::cli::CliOptions opt;
    std::uint64_t seed = 0;
    unsigned workers = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "JSON config file")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--set", opt.sets,
                        "override a config field, e.g. --set train.batch=128");
        sub->add_option("--out", opt.out_dir, "output directory");
        sub->add_option("--seed", seed, "run a single seed instead of the config list");
        sub->add_option("--workers", workers, "worker pool size (0 = auto)");
    };

    auto* gen = app.add_subcommand("gen-traces", "generate and persist traffic traces");
    add_common(gen);
    auto* train = app.add_subcommand("train", "train a tinyqmix or idqn checkpoint");
    add_common(train);
    auto* eval = app.add_subcommand("eval", "evaluate policies on persisted traces");
    add_common(eval);
    auto* flops = app.add_subcommand("flops", "emit the per-policy FLOPs table");
    add_common(flops);

    CLI11_PARSE(app, argc, argv);

    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--seed")) opt.seed = seed;
    if (sub->count("--workers")) opt.workers = workers;

    try {
        if (sub == gen) return gfarena::cli::cmd_gen_traces(opt);
        if (sub == train) return gfarena::cli::cmd_train(opt);
        if (sub == eval) return gfarena::cli::cmd_eval(opt);
        if (sub == flops) return gfarena::cli::cmd_flops(opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
