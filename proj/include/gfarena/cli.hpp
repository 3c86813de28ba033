#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gfarena/config.hpp"

namespace gfarena::cli {

struct CliOptions {
    std::filesystem::path config_path;
    std::vector<std::string> sets;  // dotted.key=value overrides
    std::filesystem::path out_dir = "out";
    std::optional<std::uint64_t> seed;      // collapses the seed lists to one
    std::optional<unsigned> workers;        // overrides config / env
};

// Each command writes a run manifest (manifest_<command>.json) into the
// output directory before the heavy work starts, then its artifacts. Exit
// status is 0 iff every requested cell succeeded.
int cmd_gen_traces(const CliOptions& opt);
int cmd_train(const CliOptions& opt);
int cmd_eval(const CliOptions& opt);
int cmd_flops(const CliOptions& opt);

// Worker-count resolution: --workers flag, else GFARENA_WORKERS, else the
// config value (0 = auto).
unsigned resolve_workers(const CliOptions& opt, const AppConfig& cfg);

std::string trace_filename(double delta_t_s, std::uint64_t seed);
std::string checkpoint_filename(const std::string& policy, std::uint32_t n_prime,
                                std::uint32_t m, std::uint64_t seed);

std::string hash_file_hex(const std::filesystem::path& path);

}  // namespace gfarena::cli
