#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "gfarena/common.hpp"

namespace gfarena::traffic {

// delta_t_slots value meaning "rates never change after slot 0".
inline constexpr std::uint64_t kNoRedraw = std::numeric_limits<std::uint64_t>::max();

struct TrafficConfig {
    std::uint32_t n_devices = 0;
    double lambda_high = 0.1;      // packets per slot
    double lambda_low = 0.00833;   // packets per slot
    double p_high = 0.2;           // probability a device is high-active
    std::uint64_t delta_t_slots = kNoRedraw;
    std::uint64_t total_slots = 0;
    double slot_duration_ms = 0.5;
    std::uint64_t seed = 0;

    // Throws ConfigError naming the offending field.
    void validate() const;
};

struct RateSegment {
    std::uint64_t start_slot = 0;
    std::vector<double> rates;  // one per device

    bool operator==(const RateSegment&) const = default;
};

struct RateSchedule {
    std::vector<RateSegment> segments;  // ordered by start_slot, first at 0

    const std::vector<double>& rates_at(std::uint64_t slot) const;

    bool operator==(const RateSchedule&) const = default;
};

struct TraceFile {
    std::uint32_t n_devices = 0;
    std::uint64_t total_slots = 0;
    double slot_duration_ms = 0.5;
    RateSchedule schedule;
    std::vector<std::uint8_t> arrivals;  // slot-major [total_slots x n_devices]

    // Arrival counts that exceeded the u8 range during generation and were
    // clamped to 255. Not part of the on-disk format; stays 0 at these rates.
    std::uint64_t clamped = 0;

    std::uint8_t at(std::uint64_t slot, std::uint32_t device) const {
        return arrivals[slot * n_devices + device];
    }

    bool operator==(const TraceFile& o) const {
        return n_devices == o.n_devices && total_slots == o.total_slots &&
               slot_duration_ms == o.slot_duration_ms && schedule == o.schedule &&
               arrivals == o.arrivals;
    }
};

// Assigns each device lambda_high with probability p_high, else lambda_low.
std::vector<double> draw_device_rates(const TrafficConfig& cfg, Rng& rng);

// Exact Poisson sample via Knuth's multiplication method; fast at the small
// per-slot rates used here. Consumes at least one rng draw per call.
std::uint32_t sample_arrivals(double rate, Rng& rng);

TraceFile generate_trace(const TrafficConfig& cfg);

enum class TraceIoErrc { bad_magic, bad_version, truncated, io };

class TraceIoError : public std::runtime_error {
public:
    TraceIoError(TraceIoErrc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    TraceIoErrc code() const { return code_; }

private:
    TraceIoErrc code_;
};

// Binary format, little-endian:
//   magic "TQTR", version u16, n_devices u32, total_slots u64,
//   slot_duration_ms f64, segment_count u32,
//   per segment { start_slot u64, n_devices x rate f64 },
//   arrivals u8, slot-major.
void store_trace(const TraceFile& trace, const std::filesystem::path& path);
TraceFile load_trace(const std::filesystem::path& path);

// In-memory encode/decode backing store/load; exposed for hashing and tests.
std::vector<std::uint8_t> encode_trace(const TraceFile& trace);
TraceFile decode_trace(std::span<const std::uint8_t> bytes);

}  // namespace gfarena::traffic
