#include "gfarena/config.hpp"

#include <cmath>
#include <fstream>

#include "gfarena/policies.hpp"
#include "gfarena/traffic.hpp"

namespace gfarena::cli {

using nlohmann::json;

namespace {

const json* find_path(const json& doc, const std::string& dotted) {
    const json* cur = &doc;
    std::size_t begin = 0;
    while (begin <= dotted.size()) {
        const std::size_t dot = dotted.find('.', begin);
        const std::string key = dotted.substr(begin, dot == std::string::npos ? dot : dot - begin);
        if (!cur->is_object() || !cur->contains(key)) return nullptr;
        cur = &(*cur)[key];
        if (dot == std::string::npos) return cur;
        begin = dot + 1;
    }
    return nullptr;
}

template <typename T>
T field(const json& doc, const std::string& path, T def) {
    const json* j = find_path(doc, path);
    if (!j) return def;
    try {
        return j->get<T>();
    } catch (const json::exception&) {
        throw ConfigError(path, "has the wrong type");
    }
}

double dt_from_json(const json& j, const std::string& path) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "infinite") return INFINITY;
        throw ConfigError(path, "must be a number of seconds or \"inf\"");
    }
    if (j.is_number()) {
        const double v = j.get<double>();
        if (!(v > 0.0)) throw ConfigError(path, "must be positive");
        return v;
    }
    throw ConfigError(path, "must be a number of seconds or \"inf\"");
}

std::vector<double> dt_list(const json& doc, const std::string& path,
                            std::vector<double> def) {
    const json* j = find_path(doc, path);
    if (!j) return def;
    if (!j->is_array()) throw ConfigError(path, "must be an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < j->size(); ++i)
        out.push_back(dt_from_json((*j)[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

}  // namespace

void apply_override(json& doc, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("--set", "expected <dotted.key>=<value>, got: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::exception&) {
        parsed = value;  // plain string
    }

    json* cur = &doc;
    std::size_t begin = 0;
    for (;;) {
        const std::size_t dot = path.find('.', begin);
        const std::string key = path.substr(begin, dot == std::string::npos ? dot : dot - begin);
        if (key.empty()) throw ConfigError("--set", "empty key segment in: " + path);
        if (dot == std::string::npos) {
            (*cur)[key] = parsed;
            return;
        }
        if (!cur->contains(key) || !(*cur)[key].is_object()) (*cur)[key] = json::object();
        cur = &(*cur)[key];
        begin = dot + 1;
    }
}

AppConfig config_from_json(json doc) {
    AppConfig c;

    c.mac_base.tau_slots = field<std::uint32_t>(doc, "mac.tau_slots", 50);
    c.mac_base.cw_max = field<std::uint32_t>(doc, "mac.cw_max", 16);
    c.mac_base.l_buffer = field<std::uint32_t>(doc, "mac.l_buffer", 16);
    c.mac_base.l_retry = field<std::uint32_t>(doc, "mac.l_retry", 16);
    c.mac_base.slot_duration_ms = field<double>(doc, "mac.slot_duration_ms", 0.5);

    c.lambda_high = field<double>(doc, "traffic.lambda_high", 0.1);
    c.lambda_low = field<double>(doc, "traffic.lambda_low", 0.00833);
    c.p_high = field<double>(doc, "traffic.p_high", 0.2);
    c.delta_t_s = dt_list(doc, "traffic.delta_t_s", {10.0, 60.0, INFINITY});
    c.trace_len_s = field<double>(doc, "traffic.trace_len_s", 300.0);
    c.trace_devices = field<std::uint32_t>(doc, "traffic.n_devices", 12);
    c.trace_seeds = field<std::vector<std::uint64_t>>(doc, "traffic.seeds", {1, 2, 3});

    const json* jc = find_path(doc, "clusters");
    if (jc) {
        if (!jc->is_array() || jc->empty())
            throw ConfigError("clusters", "must be a non-empty array");
        for (std::size_t i = 0; i < jc->size(); ++i) {
            const json& e = (*jc)[i];
            const std::string p = "clusters[" + std::to_string(i) + "]";
            ClusterConfig cc;
            cc.n_prime = field<std::uint32_t>(e, "n_prime", 12);
            cc.m = field<std::uint32_t>(e, "m", 2);
            cc.agent_hidden = field<std::uint32_t>(e, "agent_hidden", 8);
            cc.mixer_hidden = field<std::uint32_t>(e, "mixer_hidden", 64);
            if (cc.n_prime <= cc.m) throw ConfigError(p + ".n_prime", "must exceed m");
            c.clusters.push_back(cc);
        }
    } else {
        c.clusters.push_back(ClusterConfig{});
    }

    c.obs_alpha = field<double>(doc, "obs.alpha", 0.001);
    c.shared_stats = field<bool>(doc, "obs.shared_stats", true);
    if (!(c.obs_alpha > 0.0 && c.obs_alpha < 1.0))
        throw ConfigError("obs.alpha", "must lie in (0, 1)");

    c.train_policy = field<std::string>(doc, "train.policy", "tinyqmix");
    if (c.train_policy != "tinyqmix" && c.train_policy != "idqn")
        throw ConfigError("train.policy", "must be tinyqmix or idqn");
    c.train_cluster = field<std::uint32_t>(doc, "train.cluster", 0);
    if (c.train_cluster >= c.clusters.size())
        throw ConfigError("train.cluster", "index beyond the clusters array");
    const json* jdt = find_path(doc, "train.delta_t_s");
    c.train_delta_t_s = jdt ? dt_from_json(*jdt, "train.delta_t_s") : 10.0;
    c.episodes = field<std::uint32_t>(doc, "train.episodes", 150);
    c.episode_s = field<double>(doc, "train.episode_s", 20.0);
    c.optimization_interval = field<std::uint32_t>(doc, "train.optimization_interval", 32);
    c.batch = field<std::uint32_t>(doc, "train.batch", 256);
    c.learning_rate = field<double>(doc, "train.learning_rate", 3e-4);
    c.replay_capacity = field<std::uint32_t>(doc, "train.replay_capacity", 10000);
    c.gamma = field<double>(doc, "train.gamma", 0.0);
    c.epsilon_start = field<double>(doc, "train.epsilon_start", 0.9);
    c.epsilon_end = field<double>(doc, "train.epsilon_end", 0.05);
    c.target_sync_interval = field<std::uint32_t>(doc, "train.target_sync_interval", 200);
    c.optimizer = field<std::string>(doc, "train.optimizer", "adam");
    if (c.optimizer != "adam" && c.optimizer != "sgd")
        throw ConfigError("train.optimizer", "must be adam or sgd");
    c.shared_agent = field<bool>(doc, "train.shared_agent", true);
    c.train_seeds = field<std::vector<std::uint64_t>>(doc, "train.seeds", {1, 2, 3});

    c.eval_policies = field<std::vector<std::string>>(
        doc, "eval.policies", {"random", "rr", "wf", "wflb", "tinyqmix"});
    for (const auto& p : c.eval_policies) policy::kind_from_string(p);  // validates
    c.eval_clusters = field<std::vector<std::uint32_t>>(doc, "eval.clusters", {0});
    for (auto idx : c.eval_clusters)
        if (idx >= c.clusters.size())
            throw ConfigError("eval.clusters", "index beyond the clusters array");
    c.window_s = field<double>(doc, "eval.window_s", 5.0);
    if (!(c.window_s > 0.0)) throw ConfigError("eval.window_s", "must be positive");
    c.wf_overhead_slots = field<std::uint32_t>(doc, "eval.wf_overhead_slots", 6);
    if (c.wf_overhead_slots >= c.mac_base.tau_slots)
        throw ConfigError("eval.wf_overhead_slots", "must be below mac.tau_slots");
    c.trace_dir = field<std::string>(doc, "eval.trace_dir", "out/traces");
    c.checkpoint_dir = field<std::string>(doc, "eval.checkpoint_dir", "out/checkpoints");
    c.eval_seeds = field<std::vector<std::uint64_t>>(doc, "eval.seeds", {1, 2, 3});

    c.workers = field<unsigned>(doc, "workers", 0);

    // cross-field sanity on the pieces the commands will assemble
    if (!(c.trace_len_s > 0.0)) throw ConfigError("traffic.trace_len_s", "must be positive");
    if (!(c.episode_s > 0.0)) throw ConfigError("train.episode_s", "must be positive");
    for (auto cluster : c.clusters)
        if (c.trace_devices < cluster.n_prime)
            throw ConfigError("traffic.n_devices",
                              "must cover the largest cluster's n_prime");
    traffic::TrafficConfig probe;
    probe.n_devices = c.trace_devices;
    probe.lambda_high = c.lambda_high;
    probe.lambda_low = c.lambda_low;
    probe.p_high = c.p_high;
    probe.total_slots = 1;
    probe.slot_duration_ms = c.mac_base.slot_duration_ms;
    probe.validate();

    c.raw = std::move(doc);
    return c;
}

AppConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config", "cannot open: " + path.string());
    json doc;
    try {
        doc = json::parse(f);
    } catch (const json::exception& e) {
        throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    for (const auto& o : overrides) apply_override(doc, o);
    return config_from_json(std::move(doc));
}

std::uint64_t to_slots(double seconds, double slot_duration_ms) {
    return static_cast<std::uint64_t>(std::llround(seconds * 1000.0 / slot_duration_ms));
}

std::uint64_t delta_t_to_slots(double delta_t_s, double slot_duration_ms) {
    if (std::isinf(delta_t_s)) return traffic::kNoRedraw;
    return to_slots(delta_t_s, slot_duration_ms);
}

std::string dt_label(double delta_t_s) {
    if (std::isinf(delta_t_s)) return "inf";
    return fmt_g6(delta_t_s) + "s";
}

}  // namespace gfarena::cli
