#include "gfarena/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include "gfarena/eval.hpp"
#include "gfarena/policies.hpp"
#include "gfarena/qmix.hpp"
#include "gfarena/traffic.hpp"

namespace gfarena::cli {

using nlohmann::json;

namespace fs = std::filesystem;

std::string hash_file_hex(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot hash missing file: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(bytes)));
    return buf;
}

std::string trace_filename(double delta_t_s, std::uint64_t seed) {
    return "trace_dt" + dt_label(delta_t_s) + "_seed" + std::to_string(seed) + ".tqtr";
}

std::string checkpoint_filename(const std::string& policy, std::uint32_t n_prime,
                                std::uint32_t m, std::uint64_t seed) {
    return policy + "_np" + std::to_string(n_prime) + "_m" + std::to_string(m) + "_seed" +
           std::to_string(seed) + ".json";
}

unsigned resolve_workers(const CliOptions& opt, const AppConfig& cfg) {
    if (opt.workers) return *opt.workers;
    if (const char* env = std::getenv("GFARENA_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return cfg.workers;
}

namespace {

AppConfig load_with_seed(const CliOptions& opt, const char* seed_list_path) {
    auto sets = opt.sets;
    if (opt.seed)
        sets.push_back(std::string(seed_list_path) + "=[" + std::to_string(*opt.seed) + "]");
    return load_config(opt.config_path, sets);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const CliOptions& opt, const AppConfig& cfg,
                    const std::map<std::string, std::string>& artifact_hashes) {
    json j;
    j["command"] = command;
    j["config_path"] = opt.config_path.string();
    j["seed"] = opt.seed ? json(*opt.seed) : json(nullptr);
    j["out_dir"] = out_dir.string();
    j["resolved"] = cfg.raw;
    j["artifact_hashes"] = artifact_hashes;
    write_text(out_dir / ("manifest_" + command + ".json"), j.dump(2) + "\n");
}

std::string scenario_name(const ClusterConfig& c, double delta_t_s) {
    return "np" + std::to_string(c.n_prime) + "_m" + std::to_string(c.m) + "_dt" +
           dt_label(delta_t_s);
}

}  // namespace

int cmd_gen_traces(const CliOptions& opt) {
    const AppConfig cfg = load_with_seed(opt, "traffic.seeds");
    fs::create_directories(opt.out_dir);
    write_manifest(opt.out_dir, "gen-traces", opt, cfg, {});

    std::map<std::string, std::string> hashes;
    for (double dt : cfg.delta_t_s) {
        for (std::uint64_t seed : cfg.trace_seeds) {
            traffic::TrafficConfig tc;
            tc.n_devices = cfg.trace_devices;
            tc.lambda_high = cfg.lambda_high;
            tc.lambda_low = cfg.lambda_low;
            tc.p_high = cfg.p_high;
            tc.delta_t_slots = delta_t_to_slots(dt, cfg.mac_base.slot_duration_ms);
            tc.total_slots = to_slots(cfg.trace_len_s, cfg.mac_base.slot_duration_ms);
            tc.slot_duration_ms = cfg.mac_base.slot_duration_ms;
            tc.seed = seed;

            const auto trace = traffic::generate_trace(tc);
            const std::string name = trace_filename(dt, seed);
            const fs::path path = opt.out_dir / name;
            traffic::store_trace(trace, path);
            hashes[name] = hash_file_hex(path);
            std::cout << "wrote " << path.string() << " (" << trace.total_slots << " slots, "
                      << trace.schedule.segments.size() << " segments)\n";
        }
    }
    write_manifest(opt.out_dir, "gen-traces", opt, cfg, hashes);
    return 0;
}

int cmd_train(const CliOptions& opt) {
    const AppConfig cfg = load_with_seed(opt, "train.seeds");
    fs::create_directories(opt.out_dir);
    write_manifest(opt.out_dir, "train", opt, cfg, {});

    const ClusterConfig cluster = cfg.clusters.at(cfg.train_cluster);

    qmix::Scenario sc;
    sc.mac = cfg.mac_base;
    sc.mac.n_prime = cluster.n_prime;
    sc.mac.m = cluster.m;
    sc.lambda_high = cfg.lambda_high;
    sc.lambda_low = cfg.lambda_low;
    sc.p_high = cfg.p_high;
    sc.delta_t_slots = delta_t_to_slots(cfg.train_delta_t_s, cfg.mac_base.slot_duration_ms);
    sc.obs_alpha = cfg.obs_alpha;

    qmix::TrainConfig tc;
    tc.gamma = cfg.gamma;
    tc.epsilon_start = cfg.epsilon_start;
    tc.epsilon_end = cfg.epsilon_end;
    tc.episodes = cfg.episodes;
    tc.episode_slots = to_slots(cfg.episode_s, cfg.mac_base.slot_duration_ms);
    tc.optimization_interval = cfg.optimization_interval;
    tc.batch = cfg.batch;
    tc.learning_rate = cfg.learning_rate;
    tc.target_sync_interval = cfg.target_sync_interval;
    tc.replay_capacity = cfg.replay_capacity;
    tc.agent_hidden = cluster.agent_hidden;
    tc.mixer_hidden = cluster.mixer_hidden;
    tc.optimizer = cfg.optimizer == "sgd" ? nn::OptAlgo::sgd : nn::OptAlgo::adam;
    tc.shared_agent = cfg.shared_agent;
    tc.shared_stats = cfg.shared_stats;

    const qmix::Algo algo =
        cfg.train_policy == "tinyqmix" ? qmix::Algo::tinyqmix : qmix::Algo::idqn;

    std::map<std::string, std::string> hashes;
    int status = 0;
    for (std::uint64_t seed : cfg.train_seeds) {
        tc.seed = seed;
        std::vector<qmix::TrainLogRow> log;
        const std::string stem = cfg.train_policy + "_np" + std::to_string(cluster.n_prime) +
                                 "_m" + std::to_string(cluster.m) + "_seed" +
                                 std::to_string(seed);
        bool diverged = false;
        std::string divergence_msg;
        qmix::Checkpoint cp;
        try {
            cp = qmix::train_algorithm(algo, sc, tc, &log);
        } catch (const qmix::TrainingDiverged& e) {
            diverged = true;
            divergence_msg = e.what();
        }

        std::string csv = "episode,mean_reward,loss,epsilon\n";
        for (const auto& row : log)
            csv += std::to_string(row.episode) + "," + fmt_g6(row.mean_reward) + "," +
                   fmt_g6(row.loss) + "," + fmt_g6(row.epsilon) + "\n";
        write_text(opt.out_dir / ("train_log_" + stem + ".csv"), csv);

        if (diverged) {
            write_text(opt.out_dir / (stem + ".failed"), divergence_msg + "\n");
            std::cerr << "training seed " << seed << " diverged: " << divergence_msg << "\n";
            status = 1;
            continue;
        }
        const std::string name =
            checkpoint_filename(cfg.train_policy, cluster.n_prime, cluster.m, seed);
        const fs::path path = opt.out_dir / name;
        qmix::save_checkpoint(cp, path);
        hashes[name] = hash_file_hex(path);
        double final_reward = log.empty() ? 0.0 : log.back().mean_reward;
        std::cout << "trained " << name << " (" << cfg.episodes
                  << " episodes, final mean reward " << fmt_g6(final_reward) << ")\n";
    }
    write_manifest(opt.out_dir, "train", opt, cfg, hashes);
    return status;
}

int cmd_eval(const CliOptions& opt) {
    const AppConfig cfg = load_with_seed(opt, "eval.seeds");
    fs::create_directories(opt.out_dir);

    std::vector<eval::GridCellSpec> cells;
    for (std::uint32_t ci : cfg.eval_clusters) {
        const ClusterConfig& cluster = cfg.clusters[ci];
        for (double dt : cfg.delta_t_s) {
            for (const std::string& ptag : cfg.eval_policies) {
                for (std::uint64_t seed : cfg.eval_seeds) {
                    eval::GridCellSpec cell;
                    cell.scenario = scenario_name(cluster, dt);
                    cell.kind = policy::kind_from_string(ptag);
                    cell.seed = seed;
                    cell.mac = cfg.mac_base;
                    cell.mac.n_prime = cluster.n_prime;
                    cell.mac.m = cluster.m;
                    cell.obs_alpha = cfg.obs_alpha;
                    cell.window_s = cfg.window_s;
                    cell.wf_overhead_slots = cfg.wf_overhead_slots;
                    cell.agent_hidden = cluster.agent_hidden;
                    cell.delta_t_s = dt;
                    cell.trace_path = fs::path(cfg.trace_dir) / trace_filename(dt, seed);
                    if (cell.kind == policy::Kind::tinyqmix || cell.kind == policy::Kind::idqn)
                        cell.checkpoint_path =
                            fs::path(cfg.checkpoint_dir) /
                            checkpoint_filename(ptag, cluster.n_prime, cluster.m, seed);
                    cells.push_back(std::move(cell));
                }
            }
        }
    }

    // input artifact hashes, for reproducibility
    std::map<std::string, std::string> hashes;
    for (const auto& cell : cells) {
        if (fs::exists(cell.trace_path))
            hashes[cell.trace_path.filename().string()] = hash_file_hex(cell.trace_path);
        if (cell.checkpoint_path && fs::exists(*cell.checkpoint_path))
            hashes[cell.checkpoint_path->filename().string()] =
                hash_file_hex(*cell.checkpoint_path);
    }
    write_manifest(opt.out_dir, "eval", opt, cfg, hashes);

    const auto results = eval::run_grid(cells, resolve_workers(opt, cfg));

    int status = 0;
    std::vector<eval::SummaryRow> rows;
    for (const auto& res : results) {
        if (!res.ok) {
            std::cerr << "cell " << res.spec.scenario << " " << policy::to_string(res.spec.kind)
                      << " seed " << res.spec.seed << " failed: " << res.error << "\n";
            status = 1;
            continue;
        }
        rows.push_back(eval::summarize(res.spec, res.metrics));
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return std::tie(a.scenario, a.policy, a.seed) < std::tie(b.scenario, b.policy, b.seed);
    });
    std::string summary = std::string(eval::kSummaryHeader) + "\n";
    for (const auto& r : rows) summary += eval::to_csv_line(r) + "\n";
    write_text(opt.out_dir / "summary.csv", summary);

    // per-(scenario, seed) delay time series, one row per policy per bucket
    std::map<std::pair<std::string, std::uint64_t>, std::vector<const eval::GridCellResult*>>
        groups;
    for (const auto& res : results)
        if (res.ok) groups[{res.spec.scenario, res.spec.seed}].push_back(&res);
    for (auto& [key, group] : groups) {
        std::sort(group.begin(), group.end(), [](const auto* a, const auto* b) {
            return policy::to_string(a->spec.kind) < policy::to_string(b->spec.kind);
        });
        std::string csv = "time_s,policy,moving_avg_delay_ms\n";
        for (const auto* res : group)
            for (const auto& pt : res->metrics.moving_avg)
                csv += fmt_g6(pt.time_s) + "," + policy::to_string(res->spec.kind) + "," +
                       fmt_g6(pt.value_ms) + "\n";
        write_text(opt.out_dir / ("timeseries_" + key.first + "_seed" +
                                  std::to_string(key.second) + ".csv"),
                   csv);
    }

    std::cout << "wrote " << (opt.out_dir / "summary.csv").string() << " (" << rows.size()
              << " rows, " << (results.size() - rows.size()) << " failed cells)\n";
    return status;
}

int cmd_flops(const CliOptions& opt) {
    const AppConfig cfg = load_config(opt.config_path, opt.sets);
    fs::create_directories(opt.out_dir);
    write_manifest(opt.out_dir, "flops", opt, cfg, {});

    struct Row {
        std::string policy;
        std::uint32_t n_prime, m;
        double flops;
    };
    std::vector<Row> rows;
    for (const std::string& ptag : cfg.eval_policies) {
        for (std::uint32_t ci : cfg.eval_clusters) {
            const ClusterConfig& cluster = cfg.clusters[ci];
            eval::ClusterSpec cs;
            cs.n_prime = cluster.n_prime;
            cs.m = cluster.m;
            cs.tau_slots = cfg.mac_base.tau_slots;
            cs.slot_duration_ms = cfg.mac_base.slot_duration_ms;
            cs.agent_hidden = cluster.agent_hidden;
            rows.push_back(Row{ptag, cluster.n_prime, cluster.m,
                               eval::flops_per_second(policy::kind_from_string(ptag), cs)});
        }
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return std::tie(a.policy, a.n_prime) < std::tie(b.policy, b.n_prime);
    });

    std::string csv = std::string("# convention: ") + eval::kFlopsConvention + "\n";
    csv += "policy,n_prime,m,flops_per_s\n";
    for (const auto& r : rows)
        csv += r.policy + "," + std::to_string(r.n_prime) + "," + std::to_string(r.m) + "," +
               fmt_g6(r.flops) + "\n";
    write_text(opt.out_dir / "flops.csv", csv);
    std::cout << "wrote " << (opt.out_dir / "flops.csv").string() << "\n";
    return 0;
}

}  // namespace gfarena::cli
