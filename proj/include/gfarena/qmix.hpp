#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gfarena/common.hpp"
#include "gfarena/mac.hpp"
#include "gfarena/nn.hpp"
#include "gfarena/obs.hpp"
#include "gfarena/traffic.hpp"

namespace gfarena::qmix {

// The per-agent utility networks. With parameter sharing (the default) all
// agents evaluate one network; nets.size() == n_agents otherwise.
struct AgentBank {
    std::vector<nn::ValueNet> nets;
    bool shared = true;
    std::uint32_t n_agents = 0;

    static AgentBank init(std::uint32_t n_agents, std::size_t obs_width, std::size_t hidden,
                          std::size_t n_actions, bool shared, Rng& rng);

    const nn::ValueNet& net(std::size_t agent) const { return shared ? nets[0] : nets[agent]; }
    nn::ValueNet& net(std::size_t agent) { return shared ? nets[0] : nets[agent]; }
};

// Monotonic mixer: a hypernetwork of four affine heads maps the global
// observation to the mixer's parameters; the mixer itself is a one-hidden-
// layer network from the agents' q-vector to a scalar. Absolute value is
// applied to the weight heads (not the bias heads), which makes q_tot
// non-decreasing in every q_i.
struct MixerNet {
    std::size_t n_agents = 0;
    std::size_t hidden = 0;
    std::size_t g_width = 0;
    nn::DenseLayer head_w1;  // g -> n_agents*hidden, |.| -> W1[h][i]
    nn::DenseLayer head_b1;  // g -> hidden
    nn::DenseLayer head_w2;  // g -> hidden, |.| -> W2[h]
    nn::DenseLayer head_b2;  // g -> 1

    static MixerNet init(std::size_t n_agents, std::size_t hidden, std::size_t g_width,
                         Rng& rng);

    std::size_t param_count() const;
    void get_params(std::span<double> out) const;
    void set_params(std::span<const double> in);
    std::vector<double> get_params() const;
};

struct MixerCache {
    std::vector<double> g, q;
    std::vector<double> w1_raw, b1, w2_raw;
    double b2 = 0.0;
    std::vector<double> pre_h, h;
};

double mixer_forward(const MixerNet& mix, std::span<const double> q, std::span<const double> g,
                     MixerCache* cache = nullptr);

struct MixerGrads {
    nn::GradientSet heads;  // order: w1, b1, w2, b2

    static MixerGrads zeros_like(const MixerNet& mix);
    std::size_t param_count() const { return heads.param_count(); }
    void flatten(std::span<double> out) const { heads.flatten(out); }
};

// Accumulates hypernetwork gradients and returns d(q_tot)/dq. sign(0) = 0
// through the absolute values.
std::vector<double> mixer_backward(const MixerNet& mix, const MixerCache& cache, double dq_tot,
                                   MixerGrads& grads);

struct JointDecision {
    std::vector<std::uint32_t> actions;
    std::vector<std::vector<double>> q;  // per agent, all actions
};

// Per-agent argmax over normalized observations; ties break to the lowest
// resource index. Monotonicity makes this the argmax of q_tot as well.
JointDecision greedy_joint_action(const AgentBank& agents,
                                  const std::vector<std::vector<double>>& per_agent_obs);

std::uint32_t argmax_lowest(std::span<const double> v);

// With probability epsilon, independently per agent, replaces the action
// with a uniform resource.
void epsilon_greedy(std::vector<std::uint32_t>& actions, double epsilon, std::uint32_t m,
                    Rng& rng);

// TD(0) loss of Algorithm-style centralized training: estimate
// q_tot(z, u), target r + gamma * max_u' q_tot(z', u') from the target
// networks. gamma == 0 short-circuits to the batch rewards exactly.
// Gradients accumulate into agent_grads (one set per stored net) and
// mixer_grads; returns the mean squared error.
double qmix_loss(std::span<const nn::Transition* const> batch, const AgentBank& agents,
                 const MixerNet& mixer, const AgentBank& target_agents,
                 const MixerNet& target_mixer, double gamma,
                 std::vector<nn::GradientSet>& agent_grads, MixerGrads& mixer_grads);

// Independent double-DQN loss over per-agent transitions (reward vector has
// one entry per agent): y_i = r_i + gamma * Q_target(z'_i, argmax_a
// Q_online(z'_i, a)). No mixer, no coupling between agents.
double idqn_loss(std::span<const nn::Transition* const> batch, const AgentBank& agents,
                 const AgentBank& target_agents, double gamma,
                 std::vector<nn::GradientSet>& agent_grads);

// Traffic+MAC environment a policy is trained against. Arrival rates are
// redrawn every delta_t_slots during an episode.
struct Scenario {
    mac::MacConfig mac;
    double lambda_high = 0.1;
    double lambda_low = 0.00833;
    double p_high = 0.2;
    std::uint64_t delta_t_slots = traffic::kNoRedraw;
    double obs_alpha = 0.001;

    void validate() const;
};

struct TrainConfig {
    double gamma = 0.0;
    double epsilon_start = 0.9;
    double epsilon_end = 0.05;
    std::uint32_t episodes = 150;
    std::uint64_t episode_slots = 40000;
    std::uint32_t optimization_interval = 32;  // decision steps per optimizer step
    std::uint32_t batch = 1024;
    double learning_rate = 1e-4;
    std::uint32_t target_sync_interval = 200;  // optimizer steps per hard copy
    std::uint64_t seed = 1;
    std::uint32_t replay_capacity = 10000;
    std::uint32_t agent_hidden = 8;
    std::uint32_t mixer_hidden = 64;
    nn::OptAlgo optimizer = nn::OptAlgo::adam;
    bool shared_agent = true;
    bool shared_stats = true;

    void validate() const;
};

double epsilon_for_episode(const TrainConfig& cfg, std::uint32_t episode);

enum class Algo : std::uint8_t { tinyqmix, idqn };
std::string to_string(Algo a);

// Everything evaluation needs besides a trace: frozen normalization, the
// agent parameters, the mixer (training artifact, absent for idqn), and
// enough metadata to reject mismatched scenarios.
struct Checkpoint {
    int format_version = 1;
    std::uint32_t n_prime = 0;
    std::uint32_t m = 0;
    std::uint32_t tau_slots = 0;
    std::uint64_t norm_count = 0;
    std::vector<double> norm_means;
    std::vector<double> norm_variances;
    AgentBank agents;
    std::optional<MixerNet> mixer;
    std::string algorithm;
    std::uint32_t episodes_completed = 0;
    double final_epsilon = 0.0;
    std::uint64_t seed = 0;
    double gamma = 0.0;

    obs::RunningStats frozen_stats() const {
        return obs::RunningStats::frozen_from(norm_count, norm_means, norm_variances);
    }
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainLogRow {
    std::uint32_t episode = 0;
    double mean_reward = 0.0;
    double loss = 0.0;
    double epsilon = 0.0;
};

// Offline centralized training: episodes of simulated traffic, epsilon-
// greedy decisions each scheduling interval, transitions at decision
// granularity, an optimizer step every optimization_interval decisions,
// periodic hard target sync. Running normalization statistics accumulate
// during training and are frozen into the returned checkpoint. Throws
// TrainingDiverged when the loss stops being finite.
Checkpoint train(const Scenario& scenario, const TrainConfig& cfg,
                 std::vector<TrainLogRow>* log = nullptr);

// Same loop trained as independent double-DQN agents with individual
// rewards; declared here so both trainers share one implementation, surfaced
// through the policy zoo as well.
Checkpoint train_algorithm(Algo algo, const Scenario& scenario, const TrainConfig& cfg,
                           std::vector<TrainLogRow>* log = nullptr);

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// JSON bytes of a checkpoint (what save_checkpoint writes); exposed for
// hashing and round-trip tests.
std::string encode_checkpoint(const Checkpoint& cp);
Checkpoint decode_checkpoint(const std::string& text);

}  // namespace gfarena::qmix
