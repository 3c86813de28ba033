#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gfarena/common.hpp"
#include "gfarena/mac.hpp"
#include "gfarena/obs.hpp"
#include "gfarena/qmix.hpp"
#include "gfarena/traffic.hpp"

namespace gfarena::policy {

enum class Kind : std::uint8_t { random, rr, wf, wflb, idqn, tinyqmix };

std::string to_string(Kind k);
Kind kind_from_string(const std::string& s);

// What a policy hands the runner at a scheduling-interval boundary: either
// per-device resource choices for the whole interval, or (round robin only)
// a switch to per-slot grants. reserved_head_slots models downlink signaling
// overhead at the start of the interval.
struct Decision {
    bool per_slot_grants = false;
    std::vector<std::uint32_t> choices;
    std::uint32_t reserved_head_slots = 0;
};

struct PolicyContext {
    std::uint64_t interval_index = 0;
    std::uint64_t start_slot = 0;
    std::uint32_t n_prime = 0;
    std::uint32_t m = 0;
    const obs::ObservationBank* observations = nullptr;  // device-local estimates
    const traffic::RateSchedule* schedule = nullptr;     // oracle rates (wflb only)
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual Kind kind() const = 0;
    virtual Decision decide(const PolicyContext& ctx) = 0;
    // Per-slot grants; only meaningful when decide() selected grant mode.
    virtual void fill_grants(std::uint64_t slot, mac::SlotGrants& out) const;
};

// Device i may transmit on resource r at slot t iff (t*m + r) mod n_prime
// == i; returns the granted resource or -1. The (slot, resource) grid is
// walked sequentially, so grants are exclusive and collision-free.
std::int32_t round_robin_grant(std::uint64_t slot, std::uint32_t device, std::uint32_t n_prime,
                               std::uint32_t m);

std::vector<std::uint32_t> random_select(std::uint32_t n_prime, std::uint32_t m, Rng& rng);

// Longest-processing-time greedy: devices in descending rate order, each
// onto the currently least-loaded resource. Ties break to the lower device /
// resource index.
std::vector<std::uint32_t> waterfill_assign(std::span<const double> rates, std::uint32_t m);

// Greedy argmax of the checkpointed agent net on the device's own
// observation, normalized with the checkpoint's frozen statistics. Ties
// break to the lowest resource index.
std::uint32_t value_net_select(const qmix::Checkpoint& cp, const obs::LocalObservation& o);
inline std::uint32_t tinyqmix_select(const qmix::Checkpoint& cp, const obs::LocalObservation& o) {
    return value_net_select(cp, o);
}
inline std::uint32_t idqn_select(const qmix::Checkpoint& cp, const obs::LocalObservation& o) {
    return value_net_select(cp, o);
}

// Independent double-DQN baseline trained with individual rewards.
qmix::Checkpoint idqn_train(const qmix::Scenario& scenario, const qmix::TrainConfig& cfg,
                            std::vector<qmix::TrainLogRow>* log = nullptr);

class RandomPolicy : public Policy {
public:
    explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}
    Kind kind() const override { return Kind::random; }
    Decision decide(const PolicyContext& ctx) override;

private:
    Rng rng_;
};

class RoundRobinPolicy : public Policy {
public:
    RoundRobinPolicy(std::uint32_t n_prime, std::uint32_t m) : n_prime_(n_prime), m_(m) {}
    Kind kind() const override { return Kind::rr; }
    Decision decide(const PolicyContext& ctx) override;
    void fill_grants(std::uint64_t slot, mac::SlotGrants& out) const override;

private:
    std::uint32_t n_prime_, m_;
};

// Centralized water filling on the devices' incremental rate estimates, with
// the first overhead_slots of every interval reserved for downlink
// signaling.
class WaterFillingPolicy : public Policy {
public:
    explicit WaterFillingPolicy(std::uint32_t overhead_slots) : overhead_(overhead_slots) {}
    Kind kind() const override { return Kind::wf; }
    Decision decide(const PolicyContext& ctx) override;

private:
    std::uint32_t overhead_;
};

// Idealized water filling: true scheduled rates, no signaling overhead. The
// empirical lower bound.
class WaterFillingLowerBoundPolicy : public Policy {
public:
    Kind kind() const override { return Kind::wflb; }
    Decision decide(const PolicyContext& ctx) override;
};

// Decentralized execution of a trained checkpoint (tinyqmix or idqn): each
// device runs its own argmax, no mixer, no communication.
class ValueNetPolicy : public Policy {
public:
    ValueNetPolicy(Kind kind, qmix::Checkpoint cp);
    Kind kind() const override { return kind_; }
    Decision decide(const PolicyContext& ctx) override;
    const qmix::Checkpoint& checkpoint() const { return cp_; }

private:
    Kind kind_;
    qmix::Checkpoint cp_;
    obs::RunningStats stats_;
};

struct PolicyArgs {
    std::uint32_t n_prime = 0;
    std::uint32_t m = 0;
    std::uint64_t seed = 0;
    std::uint32_t wf_overhead_slots = 6;
    const qmix::Checkpoint* checkpoint = nullptr;  // learned policies only
};

// Throws CheckpointError when a learned policy's checkpoint is missing or
// does not match (n_prime, m).
std::unique_ptr<Policy> make_policy(Kind kind, const PolicyArgs& args);

}  // namespace gfarena::policy
