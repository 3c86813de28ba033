#include "gfarena/qmix.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace gfarena::qmix {

using nlohmann::json;

// ---------------------------------------------------------------------------
// networks

AgentBank AgentBank::init(std::uint32_t n_agents, std::size_t obs_width, std::size_t hidden,
                          std::size_t n_actions, bool shared, Rng& rng) {
    AgentBank bank;
    bank.shared = shared;
    bank.n_agents = n_agents;
    const std::size_t count = shared ? 1 : n_agents;
    const std::vector<std::size_t> dims{obs_width, hidden, n_actions};
    const std::vector<nn::Activation> acts{nn::Activation::relu, nn::Activation::identity};
    for (std::size_t i = 0; i < count; ++i)
        bank.nets.push_back(nn::ValueNet::mlp(dims, acts, rng));
    return bank;
}

MixerNet MixerNet::init(std::size_t n_agents, std::size_t hidden, std::size_t g_width,
                        Rng& rng) {
    MixerNet mix;
    mix.n_agents = n_agents;
    mix.hidden = hidden;
    mix.g_width = g_width;
    mix.head_w1 = nn::DenseLayer::init(g_width, n_agents * hidden, nn::Activation::identity, rng);
    mix.head_b1 = nn::DenseLayer::init(g_width, hidden, nn::Activation::identity, rng);
    mix.head_w2 = nn::DenseLayer::init(g_width, hidden, nn::Activation::identity, rng);
    mix.head_b2 = nn::DenseLayer::init(g_width, 1, nn::Activation::identity, rng);
    return mix;
}

namespace {

const nn::DenseLayer* mixer_heads(const MixerNet& m, std::size_t i) {
    switch (i) {
        case 0: return &m.head_w1;
        case 1: return &m.head_b1;
        case 2: return &m.head_w2;
        default: return &m.head_b2;
    }
}

nn::DenseLayer* mixer_heads(MixerNet& m, std::size_t i) {
    return const_cast<nn::DenseLayer*>(mixer_heads(static_cast<const MixerNet&>(m), i));
}

void affine_forward(const nn::DenseLayer& l, std::span<const double> x,
                    std::vector<double>& out) {
    out.resize(l.out);
    for (std::size_t o = 0; o < l.out; ++o) {
        const double* wrow = l.w.data() + o * l.in;
        double acc = l.b[o];
        for (std::size_t i = 0; i < l.in; ++i) acc += wrow[i] * x[i];
        out[o] = acc;
    }
}

// Accumulates d/dA and d/dc of an affine head given d/dy; input gradient is
// not needed anywhere (the global observation is not a parameter).
void affine_backward(const nn::DenseLayer& l, std::span<const double> x,
                     std::span<const double> dy, std::vector<double>& dw,
                     std::vector<double>& db) {
    for (std::size_t o = 0; o < l.out; ++o) {
        const double d = dy[o];
        if (d == 0.0) continue;
        db[o] += d;
        double* dwrow = dw.data() + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) dwrow[i] += d * x[i];
    }
}

double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

std::size_t MixerNet::param_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto* h = mixer_heads(*this, i);
        n += h->w.size() + h->b.size();
    }
    return n;
}

void MixerNet::get_params(std::span<double> out) const {
    std::size_t k = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto* h = mixer_heads(*this, i);
        for (double v : h->w) out[k++] = v;
        for (double v : h->b) out[k++] = v;
    }
}

void MixerNet::set_params(std::span<const double> in) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        auto* h = mixer_heads(*this, i);
        for (double& v : h->w) v = in[k++];
        for (double& v : h->b) v = in[k++];
    }
}

std::vector<double> MixerNet::get_params() const {
    std::vector<double> out(param_count());
    get_params(out);
    return out;
}

MixerGrads MixerGrads::zeros_like(const MixerNet& mix) {
    MixerGrads g;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto* h = mixer_heads(mix, i);
        g.heads.dw.emplace_back(h->w.size(), 0.0);
        g.heads.db.emplace_back(h->b.size(), 0.0);
    }
    return g;
}

double mixer_forward(const MixerNet& mix, std::span<const double> q, std::span<const double> g,
                     MixerCache* cache) {
    if (q.size() != mix.n_agents) throw std::invalid_argument("mixer_forward: q width mismatch");
    if (g.size() != mix.g_width)
        throw std::invalid_argument("mixer_forward: global observation width mismatch");

    MixerCache local;
    MixerCache& c = cache ? *cache : local;
    c.g.assign(g.begin(), g.end());
    c.q.assign(q.begin(), q.end());
    affine_forward(mix.head_w1, g, c.w1_raw);
    affine_forward(mix.head_b1, g, c.b1);
    affine_forward(mix.head_w2, g, c.w2_raw);
    std::vector<double> b2v;
    affine_forward(mix.head_b2, g, b2v);
    c.b2 = b2v[0];

    c.pre_h.resize(mix.hidden);
    c.h.resize(mix.hidden);
    for (std::size_t hidx = 0; hidx < mix.hidden; ++hidx) {
        double acc = c.b1[hidx];
        const double* row = c.w1_raw.data() + hidx * mix.n_agents;
        for (std::size_t i = 0; i < mix.n_agents; ++i) acc += std::abs(row[i]) * q[i];
        c.pre_h[hidx] = acc;
        c.h[hidx] = nn::activate(nn::Activation::elu, acc);
    }
    double q_tot = c.b2;
    for (std::size_t hidx = 0; hidx < mix.hidden; ++hidx)
        q_tot += std::abs(c.w2_raw[hidx]) * c.h[hidx];
    return q_tot;
}

std::vector<double> mixer_backward(const MixerNet& mix, const MixerCache& cache, double dq_tot,
                                   MixerGrads& grads) {
    const std::size_t H = mix.hidden;
    const std::size_t N = mix.n_agents;

    std::vector<double> dw2_raw(H);
    std::vector<double> dpre(H);
    for (std::size_t h = 0; h < H; ++h) {
        dw2_raw[h] = sign0(cache.w2_raw[h]) * dq_tot * cache.h[h];
        const double dh = dq_tot * std::abs(cache.w2_raw[h]);
        dpre[h] = dh * nn::activate_grad(nn::Activation::elu, cache.pre_h[h]);
    }

    std::vector<double> dw1_raw(H * N);
    std::vector<double> dq(N, 0.0);
    for (std::size_t h = 0; h < H; ++h) {
        const double* row = cache.w1_raw.data() + h * N;
        double* drow = dw1_raw.data() + h * N;
        for (std::size_t i = 0; i < N; ++i) {
            drow[i] = sign0(row[i]) * dpre[h] * cache.q[i];
            dq[i] += dpre[h] * std::abs(row[i]);
        }
    }

    const std::vector<double> db2{dq_tot};
    affine_backward(mix.head_w1, cache.g, dw1_raw, grads.heads.dw[0], grads.heads.db[0]);
    affine_backward(mix.head_b1, cache.g, dpre, grads.heads.dw[1], grads.heads.db[1]);
    affine_backward(mix.head_w2, cache.g, dw2_raw, grads.heads.dw[2], grads.heads.db[2]);
    affine_backward(mix.head_b2, cache.g, db2, grads.heads.dw[3], grads.heads.db[3]);
    return dq;
}

// ---------------------------------------------------------------------------
// action selection

std::uint32_t argmax_lowest(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return static_cast<std::uint32_t>(best);
}

JointDecision greedy_joint_action(const AgentBank& agents,
                                  const std::vector<std::vector<double>>& per_agent_obs) {
    if (per_agent_obs.size() != agents.n_agents)
        throw std::invalid_argument("greedy_joint_action: observation count mismatch");
    JointDecision d;
    d.actions.resize(agents.n_agents);
    d.q.resize(agents.n_agents);
    for (std::size_t i = 0; i < agents.n_agents; ++i) {
        d.q[i] = nn::forward(agents.net(i), per_agent_obs[i]);
        d.actions[i] = argmax_lowest(d.q[i]);
    }
    return d;
}

void epsilon_greedy(std::vector<std::uint32_t>& actions, double epsilon, std::uint32_t m,
                    Rng& rng) {
    if (epsilon < 0.0 || epsilon > 1.0)
        throw std::invalid_argument("epsilon_greedy: epsilon out of range");
    for (auto& a : actions)
        if (canonical(rng) < epsilon) a = static_cast<std::uint32_t>(uniform_in(rng, 0, m - 1));
}

// ---------------------------------------------------------------------------
// losses

namespace {

std::span<const double> agent_slice(const std::vector<double>& joint, std::size_t agent,
                                    std::size_t width) {
    return std::span<const double>(joint.data() + agent * width, width);
}

}  // namespace

double qmix_loss(std::span<const nn::Transition* const> batch, const AgentBank& agents,
                 const MixerNet& mixer, const AgentBank& target_agents,
                 const MixerNet& target_mixer, double gamma,
                 std::vector<nn::GradientSet>& agent_grads, MixerGrads& mixer_grads) {
    if (batch.empty()) throw std::invalid_argument("qmix_loss: empty batch");
    const std::size_t n = agents.n_agents;

    double loss = 0.0;
    const double inv_b = 1.0 / double(batch.size());
    std::vector<nn::ForwardCache> caches(n);
    std::vector<double> qsel(n), qnext(n);
    MixerCache mix_cache;
    std::vector<double> dout;

    for (const nn::Transition* t : batch) {
        const std::size_t width = t->z.size() / n;

        for (std::size_t i = 0; i < n; ++i) {
            const auto out = nn::forward(agents.net(i), agent_slice(t->z, i, width), &caches[i]);
            qsel[i] = out[t->actions[i]];
        }
        const double q_hat = mixer_forward(mixer, qsel, t->z, &mix_cache);

        double target = t->reward[0];
        if (gamma != 0.0) {
            for (std::size_t i = 0; i < n; ++i) {
                const auto out =
                    nn::forward(target_agents.net(i), agent_slice(t->z_next, i, width));
                qnext[i] = out[argmax_lowest(out)];
            }
            target += gamma * mixer_forward(target_mixer, qnext, t->z_next);
        }

        const double err = q_hat - target;
        loss += err * err * inv_b;
        const double dq_hat = 2.0 * err * inv_b;

        const auto dq = mixer_backward(mixer, mix_cache, dq_hat, mixer_grads);
        const std::size_t m_actions = agents.net(0).output_width();
        for (std::size_t i = 0; i < n; ++i) {
            dout.assign(m_actions, 0.0);
            dout[t->actions[i]] = dq[i];
            nn::backward(agents.net(i), caches[i], dout,
                         agent_grads[agents.shared ? 0 : i]);
        }
    }
    return loss;
}

double idqn_loss(std::span<const nn::Transition* const> batch, const AgentBank& agents,
                 const AgentBank& target_agents, double gamma,
                 std::vector<nn::GradientSet>& agent_grads) {
    if (batch.empty()) throw std::invalid_argument("idqn_loss: empty batch");
    const std::size_t n = agents.n_agents;

    double loss = 0.0;
    const double inv = 1.0 / double(batch.size() * n);
    nn::ForwardCache cache;
    std::vector<double> dout;

    for (const nn::Transition* t : batch) {
        const std::size_t width = t->z.size() / n;
        for (std::size_t i = 0; i < n; ++i) {
            const auto out = nn::forward(agents.net(i), agent_slice(t->z, i, width), &cache);
            const double q = out[t->actions[i]];

            double target = t->reward[i];
            if (gamma != 0.0) {
                // double-DQN: online argmax, target value
                const auto online_next =
                    nn::forward(agents.net(i), agent_slice(t->z_next, i, width));
                const auto a_star = argmax_lowest(online_next);
                const auto target_next =
                    nn::forward(target_agents.net(i), agent_slice(t->z_next, i, width));
                target += gamma * target_next[a_star];
            }

            const double err = q - target;
            loss += err * err * inv;
            dout.assign(out.size(), 0.0);
            dout[t->actions[i]] = 2.0 * err * inv;
            nn::backward(agents.net(i), cache, dout, agent_grads[agents.shared ? 0 : i]);
        }
    }
    return loss;
}

// ---------------------------------------------------------------------------
// training

void Scenario::validate() const {
    mac.validate();
    traffic::TrafficConfig t;
    t.n_devices = mac.n_prime;
    t.lambda_high = lambda_high;
    t.lambda_low = lambda_low;
    t.p_high = p_high;
    t.delta_t_slots = delta_t_slots;
    t.total_slots = 1;
    t.slot_duration_ms = mac.slot_duration_ms;
    t.validate();
    if (!(obs_alpha > 0.0 && obs_alpha < 1.0))
        throw ConfigError("scenario.obs_alpha", "must lie in (0, 1)");
}

void TrainConfig::validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("train.gamma", "must lie in [0, 1)");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0))
        throw ConfigError("train.epsilon_start", "must be a probability");
    if (!(epsilon_end >= 0.0 && epsilon_end <= 1.0))
        throw ConfigError("train.epsilon_end", "must be a probability");
    if (epsilon_end > epsilon_start)
        throw ConfigError("train.epsilon_end", "must not exceed epsilon_start");
    if (episode_slots < 1) throw ConfigError("train.episode_slots", "must be at least 1");
    if (optimization_interval < 1)
        throw ConfigError("train.optimization_interval", "must be at least 1");
    if (batch < 1) throw ConfigError("train.batch", "must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate", "must be positive");
    if (target_sync_interval < 1)
        throw ConfigError("train.target_sync_interval", "must be at least 1");
    if (replay_capacity < 1) throw ConfigError("train.replay_capacity", "must be at least 1");
    if (agent_hidden < 1) throw ConfigError("train.agent_hidden", "must be at least 1");
    if (mixer_hidden < 1) throw ConfigError("train.mixer_hidden", "must be at least 1");
}

double epsilon_for_episode(const TrainConfig& cfg, std::uint32_t episode) {
    if (cfg.episodes <= 1) return cfg.epsilon_start;
    const double f = double(episode) / double(cfg.episodes - 1);
    return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * f;
}

std::string to_string(Algo a) { return a == Algo::tinyqmix ? "tinyqmix" : "idqn"; }

Checkpoint train(const Scenario& scenario, const TrainConfig& cfg,
                 std::vector<TrainLogRow>* log) {
    return train_algorithm(Algo::tinyqmix, scenario, cfg, log);
}

Checkpoint train_algorithm(Algo algo, const Scenario& sc, const TrainConfig& cfg,
                           std::vector<TrainLogRow>* log) {
    sc.validate();
    cfg.validate();

    const std::uint32_t n = sc.mac.n_prime;
    const std::uint32_t m = sc.mac.m;
    const std::size_t width = m + 2;

    Rng rng_init(mix_seed(cfg.seed, 0));
    Rng rng_env(mix_seed(cfg.seed, 1));
    Rng rng_expl(mix_seed(cfg.seed, 2));
    Rng rng_replay(mix_seed(cfg.seed, 3));

    AgentBank agents =
        AgentBank::init(n, width, cfg.agent_hidden, m, cfg.shared_agent, rng_init);
    MixerNet mixer;
    if (algo == Algo::tinyqmix)
        mixer = MixerNet::init(n, cfg.mixer_hidden, std::size_t(n) * width, rng_init);
    AgentBank target_agents = agents;
    MixerNet target_mixer = mixer;

    nn::ReplayMemory replay(cfg.replay_capacity);
    std::vector<obs::RunningStats> stats;
    const std::size_t n_stats = cfg.shared_stats ? 1 : n;
    for (std::size_t i = 0; i < n_stats; ++i) stats.emplace_back(width);
    auto stat_of = [&](std::size_t i) -> obs::RunningStats& {
        return stats[cfg.shared_stats ? 0 : i];
    };

    std::vector<nn::OptimizerState> agent_opt(agents.nets.size());
    for (auto& o : agent_opt) {
        o.algo = cfg.optimizer;
        o.lr = cfg.learning_rate;
    }
    nn::OptimizerState mixer_opt;
    mixer_opt.algo = cfg.optimizer;
    mixer_opt.lr = cfg.learning_rate;

    const obs::ObsConfig ocfg{sc.obs_alpha, m, cfg.shared_stats};
    const std::uint64_t decisions_per_episode = cfg.episode_slots / sc.mac.tau_slots;

    std::uint64_t decisions = 0;
    std::uint64_t optimizations = 0;
    double final_epsilon = cfg.epsilon_start;

    std::vector<double> flat_params, flat_grads;
    auto optimize_once = [&](double& loss_out) {
        const auto batch = replay.sample_minibatch(cfg.batch, rng_replay);
        std::vector<nn::GradientSet> agent_grads;
        agent_grads.reserve(agents.nets.size());
        for (const auto& net : agents.nets)
            agent_grads.push_back(nn::GradientSet::zeros_like(net));

        double loss;
        MixerGrads mixer_grads;
        if (algo == Algo::tinyqmix) {
            mixer_grads = MixerGrads::zeros_like(mixer);
            loss = qmix_loss(batch, agents, mixer, target_agents, target_mixer, cfg.gamma,
                             agent_grads, mixer_grads);
        } else {
            loss = idqn_loss(batch, agents, target_agents, cfg.gamma, agent_grads);
        }
        if (!std::isfinite(loss))
            throw TrainingDiverged("training loss became non-finite at optimization " +
                                   std::to_string(optimizations));

        try {
            for (std::size_t j = 0; j < agents.nets.size(); ++j) {
                flat_params.resize(agents.nets[j].param_count());
                flat_grads.resize(flat_params.size());
                agents.nets[j].get_params(flat_params);
                agent_grads[j].flatten(flat_grads);
                nn::optimizer_step(flat_params, flat_grads, agent_opt[j]);
                agents.nets[j].set_params(flat_params);
            }
            if (algo == Algo::tinyqmix) {
                flat_params.resize(mixer.param_count());
                flat_grads.resize(flat_params.size());
                mixer.get_params(flat_params);
                mixer_grads.flatten(flat_grads);
                nn::optimizer_step(flat_params, flat_grads, mixer_opt);
                mixer.set_params(flat_params);
            }
        } catch (const std::runtime_error& e) {
            // non-finite gradients are a divergence, same as a non-finite loss
            throw TrainingDiverged(std::string(e.what()) + " at optimization " +
                                   std::to_string(optimizations));
        }

        ++optimizations;
        if (optimizations % cfg.target_sync_interval == 0) {
            target_agents = agents;
            target_mixer = mixer;
        }
        loss_out = loss;
    };

    for (std::uint32_t e = 0; e < cfg.episodes; ++e) {
        const double eps = epsilon_for_episode(cfg, e);
        final_epsilon = eps;

        std::vector<mac::DeviceState> devices(n);
        obs::ObservationBank bank(ocfg, n);
        std::vector<double> rates(n, sc.lambda_low);
        auto arrivals_fn = [&](std::uint64_t slot, std::span<std::uint8_t> out) {
            if (slot == 0 ||
                (sc.delta_t_slots != traffic::kNoRedraw && slot % sc.delta_t_slots == 0)) {
                for (auto& r : rates)
                    r = canonical(rng_env) < sc.p_high ? sc.lambda_high : sc.lambda_low;
            }
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] = static_cast<std::uint8_t>(
                    std::min<std::uint32_t>(traffic::sample_arrivals(rates[i], rng_env), 255));
        };
        mac::SlotObserver observer = [&](std::uint64_t, const mac::SlotOutcome& o,
                                         std::span<const std::uint8_t> arr) {
            bank.on_slot(o, arr);
        };

        double reward_sum = 0.0;
        double loss_sum = 0.0;
        std::uint64_t loss_count = 0;

        std::vector<double> pending_z;
        std::vector<std::uint32_t> pending_actions;
        std::vector<double> pending_reward;
        bool has_pending = false;

        auto observe_all = [&](std::vector<std::vector<double>>& norms,
                               std::vector<double>& zcat) {
            norms.resize(n);
            zcat.clear();
            zcat.reserve(std::size_t(n) * width);
            for (std::size_t i = 0; i < n; ++i) {
                const auto raw = bank.local(i).flatten();
                stat_of(i).update(raw);
                norms[i] = stat_of(i).normalize(raw);
                zcat.insert(zcat.end(), norms[i].begin(), norms[i].end());
            }
        };

        std::vector<std::vector<double>> norms;
        std::vector<double> zcat;
        for (std::uint64_t d = 0; d < decisions_per_episode; ++d) {
            observe_all(norms, zcat);
            if (has_pending)
                replay.push(nn::Transition{pending_z, pending_actions, pending_reward, zcat});

            JointDecision dec = greedy_joint_action(agents, norms);
            epsilon_greedy(dec.actions, eps, m, rng_expl);
            mac::set_resources(devices, dec.actions, m);
            for (std::size_t i = 0; i < n; ++i) bank.set_prev_action(i, dec.actions[i]);

            const auto istats = mac::run_interval(devices, sc.mac, arrivals_fn,
                                                  d * sc.mac.tau_slots, rng_env,
                                                  /*reserved=*/0, nullptr, &observer);
            const double r = mac::interval_reward(istats);
            reward_sum += r;

            pending_z = zcat;
            pending_actions = dec.actions;
            if (algo == Algo::tinyqmix) {
                pending_reward = {r};
            } else {
                pending_reward.resize(n);
                for (std::uint32_t i = 0; i < n; ++i)
                    pending_reward[i] = mac::device_reward(istats, i);
            }
            has_pending = true;

            ++decisions;
            if (decisions % cfg.optimization_interval == 0 && replay.size() > 0) {
                double loss = 0.0;
                optimize_once(loss);
                loss_sum += loss;
                ++loss_count;
            }
        }

        if (has_pending) {
            observe_all(norms, zcat);
            replay.push(nn::Transition{pending_z, pending_actions, pending_reward, zcat});
        }

        if (log)
            log->push_back(TrainLogRow{
                e, decisions_per_episode ? reward_sum / double(decisions_per_episode) : 0.0,
                loss_count ? loss_sum / double(loss_count) : 0.0, eps});
    }

    obs::RunningStats pooled = stats[0];
    for (std::size_t i = 1; i < stats.size(); ++i) pooled.merge(stats[i]);
    pooled.freeze();

    Checkpoint cp;
    cp.n_prime = n;
    cp.m = m;
    cp.tau_slots = sc.mac.tau_slots;
    cp.norm_count = pooled.count();
    cp.norm_means = pooled.mean();
    cp.norm_variances = pooled.variance();
    cp.agents = std::move(agents);
    if (algo == Algo::tinyqmix) cp.mixer = std::move(mixer);
    cp.algorithm = to_string(algo);
    cp.episodes_completed = cfg.episodes;
    cp.final_epsilon = final_epsilon;
    cp.seed = cfg.seed;
    cp.gamma = cfg.gamma;
    return cp;
}

// ---------------------------------------------------------------------------
// checkpoint serialization

namespace {

json layer_to_json(const nn::DenseLayer& l) {
    return json{{"in", l.in}, {"out", l.out}, {"act", nn::to_string(l.act)},
                {"w", l.w}, {"b", l.b}};
}

nn::DenseLayer layer_from_json(const json& j) {
    nn::DenseLayer l;
    l.in = j.at("in").get<std::size_t>();
    l.out = j.at("out").get<std::size_t>();
    l.act = nn::activation_from_string(j.at("act").get<std::string>());
    l.w = j.at("w").get<std::vector<double>>();
    l.b = j.at("b").get<std::vector<double>>();
    if (l.w.size() != l.in * l.out || l.b.size() != l.out)
        throw CheckpointError("checkpoint: layer tensor sizes do not match dims");
    return l;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& cp) {
    json agent;
    agent["shared"] = cp.agents.shared;
    agent["n_agents"] = cp.agents.n_agents;
    json nets = json::array();
    for (const auto& net : cp.agents.nets) {
        json layers = json::array();
        for (const auto& l : net.layers) layers.push_back(layer_to_json(l));
        nets.push_back(json{{"layers", layers}});
    }
    agent["nets"] = nets;

    json mixer;
    if (cp.mixer) {
        mixer = json{{"n_agents", cp.mixer->n_agents},
                     {"hidden", cp.mixer->hidden},
                     {"g_width", cp.mixer->g_width},
                     {"heads",
                      json{{"w1", layer_to_json(cp.mixer->head_w1)},
                           {"b1", layer_to_json(cp.mixer->head_b1)},
                           {"w2", layer_to_json(cp.mixer->head_w2)},
                           {"b2", layer_to_json(cp.mixer->head_b2)}}}};
    }

    json j{{"format_version", cp.format_version},
           {"scenario", json{{"n_prime", cp.n_prime}, {"m", cp.m}, {"tau_slots", cp.tau_slots}}},
           {"normalization", json{{"count", cp.norm_count},
                                  {"means", cp.norm_means},
                                  {"variances", cp.norm_variances}}},
           {"agent", agent},
           {"mixer", mixer},
           {"training_meta", json{{"algorithm", cp.algorithm},
                                  {"episodes", cp.episodes_completed},
                                  {"final_epsilon", cp.final_epsilon},
                                  {"seed", cp.seed},
                                  {"gamma", cp.gamma}}}};
    return j.dump();
}

Checkpoint decode_checkpoint(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("checkpoint: invalid JSON: ") + e.what());
    }
    try {
        Checkpoint cp;
        cp.format_version = j.at("format_version").get<int>();
        if (cp.format_version != 1)
            throw CheckpointError("checkpoint: unsupported format version " +
                                  std::to_string(cp.format_version));
        const auto& sc = j.at("scenario");
        cp.n_prime = sc.at("n_prime").get<std::uint32_t>();
        cp.m = sc.at("m").get<std::uint32_t>();
        cp.tau_slots = sc.at("tau_slots").get<std::uint32_t>();
        const auto& norm = j.at("normalization");
        cp.norm_count = norm.at("count").get<std::uint64_t>();
        cp.norm_means = norm.at("means").get<std::vector<double>>();
        cp.norm_variances = norm.at("variances").get<std::vector<double>>();
        if (cp.norm_means.size() != cp.norm_variances.size())
            throw CheckpointError("checkpoint: normalization vectors disagree in length");

        const auto& agent = j.at("agent");
        cp.agents.shared = agent.at("shared").get<bool>();
        cp.agents.n_agents = agent.at("n_agents").get<std::uint32_t>();
        for (const auto& jn : agent.at("nets")) {
            nn::ValueNet net;
            for (const auto& jl : jn.at("layers")) net.layers.push_back(layer_from_json(jl));
            cp.agents.nets.push_back(std::move(net));
        }
        if (cp.agents.nets.empty())
            throw CheckpointError("checkpoint: no agent networks");
        if (!cp.agents.shared && cp.agents.nets.size() != cp.agents.n_agents)
            throw CheckpointError("checkpoint: per-agent networks count mismatch");

        const auto& jm = j.at("mixer");
        if (!jm.is_null()) {
            MixerNet mix;
            mix.n_agents = jm.at("n_agents").get<std::size_t>();
            mix.hidden = jm.at("hidden").get<std::size_t>();
            mix.g_width = jm.at("g_width").get<std::size_t>();
            const auto& heads = jm.at("heads");
            mix.head_w1 = layer_from_json(heads.at("w1"));
            mix.head_b1 = layer_from_json(heads.at("b1"));
            mix.head_w2 = layer_from_json(heads.at("w2"));
            mix.head_b2 = layer_from_json(heads.at("b2"));
            cp.mixer = std::move(mix);
        }

        const auto& meta = j.at("training_meta");
        cp.algorithm = meta.at("algorithm").get<std::string>();
        cp.episodes_completed = meta.at("episodes").get<std::uint32_t>();
        cp.final_epsilon = meta.at("final_epsilon").get<double>();
        cp.seed = meta.at("seed").get<std::uint64_t>();
        cp.gamma = meta.at("gamma").get<double>();
        return cp;
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("checkpoint: schema violation: ") + e.what());
    }
}

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("checkpoint: cannot open for writing: " + path.string());
    const auto text = encode_checkpoint(cp);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw CheckpointError("checkpoint: write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("checkpoint: cannot open for reading: " + path.string());
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_checkpoint(text);
}

}  // namespace gfarena::qmix
