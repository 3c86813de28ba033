#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "gfarena/common.hpp"

namespace gfarena::mac {

struct MacConfig {
    std::uint32_t n_prime = 12;   // devices per cluster
    std::uint32_t m = 2;          // resource units per cluster
    std::uint32_t tau_slots = 50; // scheduling interval
    std::uint32_t cw_max = 16;
    std::uint32_t l_buffer = 16;
    std::uint32_t l_retry = 16;
    double slot_duration_ms = 0.5;

    double overloading() const { return double(n_prime) / double(m); }
    void validate() const;
};

struct Packet {
    std::uint64_t arrival_slot = 0;
    std::uint32_t retries = 0;
};

struct DeviceState {
    std::deque<Packet> buffer;  // FIFO, capacity l_buffer
    std::uint32_t cw = 1;
    std::uint32_t backoff_remaining = 0;
    std::uint32_t resource = 0;
};

enum class SlotStatus : std::uint8_t { idle, backing_off, transmitted_success, transmitted_collision };

struct SlotOutcome {
    std::vector<SlotStatus> status;     // per device
    std::vector<std::int32_t> tx_resource;  // per device, -1 when not transmitting
    std::vector<std::uint32_t> transmitters;  // per resource
    std::uint32_t dropped_buffer = 0;
    std::uint32_t dropped_retry = 0;
};

struct IntervalStats {
    std::vector<std::uint64_t> attempts;       // per device
    std::vector<std::uint64_t> successes;      // per device
    std::vector<std::uint64_t> res_attempts;   // per resource
    std::vector<std::uint64_t> res_successes;  // per resource
    std::vector<std::uint64_t> delays_slots;   // delivered-packet delays
    std::uint64_t drops_buffer_overflow = 0;
    std::uint64_t drops_retry_exhausted = 0;
    std::uint64_t collision_events = 0;  // transmissions that collided

    void reset(std::uint32_t n_devices, std::uint32_t n_resources);
};

// Appends up to k packets FIFO; overflow beyond l_buffer is tail-dropped.
// Returns the number dropped.
std::uint32_t enqueue_arrivals(DeviceState& dev, std::uint32_t k, std::uint64_t slot,
                               std::uint32_t l_buffer);

// Applies per-device resource choices at a scheduling-interval boundary.
// Backoff counters and buffers are untouched.
void set_resources(std::vector<DeviceState>& devices, std::span<const std::uint32_t> choices,
                   std::uint32_t m);

// Per-slot transmission permissions for grant-scheduled policies (round
// robin). resource[i] == -1 means device i holds this slot.
struct SlotGrants {
    std::vector<std::int32_t> resource;
};

// Advances one timeslot:
//   1. arrivals are enqueued (tail-drop on overflow), in all slots;
//   2. if uplink_blocked, nothing else happens: no transmissions, backoff
//      counters hold;
//   3. otherwise each device with a nonempty buffer transmits its head packet
//      when its backoff counter is zero (contention mode: on its interval
//      resource; grant mode: on its granted resource, backoff ignored);
//      devices with a pending backoff decrement it instead;
//   4. a resource with exactly one transmitter delivers: delay recorded as
//      slot - arrival_slot + 1, cw reset to 1; with two or more, every
//      transmitter collides: cw doubles (capped at cw_max), retries
//      increment, a backoff is drawn uniformly from [1, cw]; a packet whose
//      retries would exceed l_retry is dropped instead, cw reset, backoff
//      cleared.
// Colliding devices consume one rng draw each, in device-index order; the
// draw happens before the retry-exhaustion check.
SlotOutcome step_slot(std::vector<DeviceState>& devices, const MacConfig& cfg,
                      std::span<const std::uint8_t> arrivals, std::uint64_t slot, Rng& rng,
                      bool uplink_blocked = false, const SlotGrants* grants = nullptr,
                      IntervalStats* stats = nullptr);

using ArrivalsFn = std::function<void(std::uint64_t slot, std::span<std::uint8_t> out)>;
using GrantsFn = std::function<void(std::uint64_t slot, SlotGrants& out)>;
using SlotObserver =
    std::function<void(std::uint64_t slot, const SlotOutcome&, std::span<const std::uint8_t>)>;

// Runs tau_slots consecutive step_slot applications starting at start_slot.
// The first reserved_downlink_slots of the interval block all uplink
// transmissions (arrivals still enqueue). grants, when set, switches every
// slot to grant mode. observer, when set, sees every slot outcome.
IntervalStats run_interval(std::vector<DeviceState>& devices, const MacConfig& cfg,
                           const ArrivalsFn& arrivals, std::uint64_t start_slot, Rng& rng,
                           std::uint32_t reserved_downlink_slots = 0,
                           const GrantsFn* grants = nullptr,
                           const SlotObserver* observer = nullptr);

// Mean over devices of successes/attempts, excluding devices that never
// attempted; 1.0 when nobody attempted.
double interval_reward(const IntervalStats& stats);

// Per-device reward with the same convention (1.0 when the device never
// attempted); used by the independent-learner baseline.
double device_reward(const IntervalStats& stats, std::uint32_t device);

}  // namespace gfarena::mac
