#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "gfarena/common.hpp"
#include "gfarena/mac.hpp"

namespace gfarena::cli {

struct ClusterConfig {
    std::uint32_t n_prime = 12;
    std::uint32_t m = 2;
    std::uint32_t agent_hidden = 8;
    std::uint32_t mixer_hidden = 64;
};

// The whole run configuration, loaded from one JSON document. Dotted-path
// --set overrides are applied to the JSON before extraction; `raw` keeps the
// resolved document for the run manifest.
struct AppConfig {
    nlohmann::json raw;

    mac::MacConfig mac_base;  // n_prime and m are taken from the cluster in use

    double lambda_high = 0.1;
    double lambda_low = 0.00833;
    double p_high = 0.2;
    std::vector<double> delta_t_s;  // INFINITY encodes "inf"
    double trace_len_s = 300.0;
    std::uint32_t trace_devices = 12;
    std::vector<std::uint64_t> trace_seeds;

    std::vector<ClusterConfig> clusters;

    double obs_alpha = 0.001;
    bool shared_stats = true;

    std::string train_policy = "tinyqmix";
    std::uint32_t train_cluster = 0;
    double train_delta_t_s = 10.0;
    std::uint32_t episodes = 150;
    double episode_s = 20.0;
    std::uint32_t optimization_interval = 32;
    std::uint32_t batch = 256;
    double learning_rate = 3e-4;
    std::uint32_t replay_capacity = 10000;
    double gamma = 0.0;
    double epsilon_start = 0.9;
    double epsilon_end = 0.05;
    std::uint32_t target_sync_interval = 200;
    std::string optimizer = "adam";
    bool shared_agent = true;
    std::vector<std::uint64_t> train_seeds;

    std::vector<std::string> eval_policies;
    std::vector<std::uint32_t> eval_clusters;
    double window_s = 5.0;
    std::uint32_t wf_overhead_slots = 6;
    std::string trace_dir = "out/traces";
    std::string checkpoint_dir = "out/checkpoints";
    std::vector<std::uint64_t> eval_seeds;

    unsigned workers = 0;  // 0 = auto
};

// Parses `key=value` and applies it at the dotted path inside the document;
// the value is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

AppConfig config_from_json(nlohmann::json doc);
AppConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides);

// "inf" <-> infinite delta T helpers.
std::uint64_t delta_t_to_slots(double delta_t_s, double slot_duration_ms);
std::string dt_label(double delta_t_s);

std::uint64_t to_slots(double seconds, double slot_duration_ms);

}  // namespace gfarena::cli
