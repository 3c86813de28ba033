#include "gfarena/mac.hpp"

#include <algorithm>
#include <stdexcept>

namespace gfarena::mac {

void MacConfig::validate() const {
    if (m < 1) throw ConfigError("mac.m", "must be at least 1");
    if (n_prime <= m)
        throw ConfigError("mac.n_prime", "must exceed m (overloading factor > 1)");
    if (tau_slots < 1) throw ConfigError("mac.tau_slots", "must be at least 1");
    if (cw_max < 1) throw ConfigError("mac.cw_max", "must be at least 1");
    if (l_buffer < 1) throw ConfigError("mac.l_buffer", "must be at least 1");
    if (l_retry < 1) throw ConfigError("mac.l_retry", "must be at least 1");
    if (!(slot_duration_ms > 0.0))
        throw ConfigError("mac.slot_duration_ms", "must be positive");
}

void IntervalStats::reset(std::uint32_t n_devices, std::uint32_t n_resources) {
    attempts.assign(n_devices, 0);
    successes.assign(n_devices, 0);
    res_attempts.assign(n_resources, 0);
    res_successes.assign(n_resources, 0);
    delays_slots.clear();
    drops_buffer_overflow = 0;
    drops_retry_exhausted = 0;
    collision_events = 0;
}

std::uint32_t enqueue_arrivals(DeviceState& dev, std::uint32_t k, std::uint64_t slot,
                               std::uint32_t l_buffer) {
    std::uint32_t dropped = 0;
    for (std::uint32_t i = 0; i < k; ++i) {
        if (dev.buffer.size() < l_buffer)
            dev.buffer.push_back(Packet{slot, 0});
        else
            ++dropped;
    }
    return dropped;
}

void set_resources(std::vector<DeviceState>& devices, std::span<const std::uint32_t> choices,
                   std::uint32_t m) {
    if (choices.size() != devices.size())
        throw std::invalid_argument("set_resources: one choice per device required");
    for (std::uint32_t c : choices)
        if (c >= m) throw std::invalid_argument("set_resources: resource index out of range");
    for (std::size_t i = 0; i < devices.size(); ++i) devices[i].resource = choices[i];
}

SlotOutcome step_slot(std::vector<DeviceState>& devices, const MacConfig& cfg,
                      std::span<const std::uint8_t> arrivals, std::uint64_t slot, Rng& rng,
                      bool uplink_blocked, const SlotGrants* grants, IntervalStats* stats) {
    const std::size_t n = devices.size();
    SlotOutcome out;
    out.status.assign(n, SlotStatus::idle);
    out.tx_resource.assign(n, -1);
    out.transmitters.assign(cfg.m, 0);

    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t dropped = enqueue_arrivals(devices[i], arrivals[i], slot, cfg.l_buffer);
        out.dropped_buffer += dropped;
    }

    if (uplink_blocked) {
        for (std::size_t i = 0; i < n; ++i)
            if (devices[i].backoff_remaining > 0) out.status[i] = SlotStatus::backing_off;
        if (stats) {
            stats->drops_buffer_overflow += out.dropped_buffer;
        }
        return out;
    }

    for (std::size_t i = 0; i < n; ++i) {
        DeviceState& dev = devices[i];
        if (dev.buffer.empty()) continue;
        if (grants) {
            std::int32_t r = grants->resource[i];
            if (r >= 0) {
                out.tx_resource[i] = r;
                ++out.transmitters[static_cast<std::uint32_t>(r)];
            }
        } else if (dev.backoff_remaining > 0) {
            out.status[i] = SlotStatus::backing_off;
            --dev.backoff_remaining;
        } else {
            out.tx_resource[i] = static_cast<std::int32_t>(dev.resource);
            ++out.transmitters[dev.resource];
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (out.tx_resource[i] < 0) continue;
        DeviceState& dev = devices[i];
        const auto r = static_cast<std::uint32_t>(out.tx_resource[i]);
        if (stats) {
            ++stats->attempts[i];
            ++stats->res_attempts[r];
        }
        if (out.transmitters[r] == 1) {
            out.status[i] = SlotStatus::transmitted_success;
            const Packet pkt = dev.buffer.front();
            dev.buffer.pop_front();
            dev.cw = 1;
            if (stats) {
                ++stats->successes[i];
                ++stats->res_successes[r];
                stats->delays_slots.push_back(slot - pkt.arrival_slot + 1);
            }
        } else {
            out.status[i] = SlotStatus::transmitted_collision;
            dev.cw = std::min(dev.cw * 2, cfg.cw_max);
            Packet& head = dev.buffer.front();
            ++head.retries;
            const auto backoff =
                static_cast<std::uint32_t>(uniform_in(rng, 1, dev.cw));
            if (head.retries > cfg.l_retry) {
                dev.buffer.pop_front();
                dev.cw = 1;
                dev.backoff_remaining = 0;
                ++out.dropped_retry;
            } else {
                dev.backoff_remaining = backoff;
            }
            if (stats) ++stats->collision_events;
        }
    }

    if (stats) {
        stats->drops_buffer_overflow += out.dropped_buffer;
        stats->drops_retry_exhausted += out.dropped_retry;
    }
    return out;
}

IntervalStats run_interval(std::vector<DeviceState>& devices, const MacConfig& cfg,
                           const ArrivalsFn& arrivals, std::uint64_t start_slot, Rng& rng,
                           std::uint32_t reserved_downlink_slots, const GrantsFn* grants,
                           const SlotObserver* observer) {
    if (reserved_downlink_slots >= cfg.tau_slots)
        throw std::invalid_argument("run_interval: reserved slots must be below tau");

    IntervalStats stats;
    stats.reset(static_cast<std::uint32_t>(devices.size()), cfg.m);

    std::vector<std::uint8_t> row(devices.size());
    SlotGrants slot_grants;
    for (std::uint32_t k = 0; k < cfg.tau_slots; ++k) {
        const std::uint64_t slot = start_slot + k;
        arrivals(slot, row);
        const bool blocked = k < reserved_downlink_slots;
        const SlotGrants* g = nullptr;
        if (grants && !blocked) {
            (*grants)(slot, slot_grants);
            g = &slot_grants;
        }
        SlotOutcome outcome = step_slot(devices, cfg, row, slot, rng, blocked, g, &stats);
        if (observer) (*observer)(slot, outcome, row);
    }
    return stats;
}

double interval_reward(const IntervalStats& stats) {
    double sum = 0.0;
    std::size_t active = 0;
    for (std::size_t i = 0; i < stats.attempts.size(); ++i) {
        if (stats.attempts[i] == 0) continue;
        sum += double(stats.successes[i]) / double(stats.attempts[i]);
        ++active;
    }
    return active == 0 ? 1.0 : sum / double(active);
}

double device_reward(const IntervalStats& stats, std::uint32_t device) {
    if (stats.attempts[device] == 0) return 1.0;
    return double(stats.successes[device]) / double(stats.attempts[device]);
}

}  // namespace gfarena::mac
