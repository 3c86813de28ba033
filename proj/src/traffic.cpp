#include "gfarena/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace gfarena {

std::string fmt_g6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace gfarena

namespace gfarena::traffic {

void TrafficConfig::validate() const {
    if (n_devices == 0)
        throw ConfigError("traffic.n_devices", "must be positive");
    if (!(lambda_low > 0.0))
        throw ConfigError("traffic.lambda_low", "must be positive");
    if (!(lambda_low <= lambda_high))
        throw ConfigError("traffic.lambda_low", "must not exceed lambda_high");
    if (!(lambda_high < 1.0))
        throw ConfigError("traffic.lambda_high", "must be below 1 packet/slot");
    if (!(p_high >= 0.0 && p_high <= 1.0))
        throw ConfigError("traffic.p_high", "must be a probability");
    if (delta_t_slots == 0)
        throw ConfigError("traffic.delta_t_slots", "must be positive or infinite");
    if (total_slots == 0)
        throw ConfigError("traffic.total_slots", "must be positive");
    if (!(slot_duration_ms > 0.0))
        throw ConfigError("traffic.slot_duration_ms", "must be positive");
}

const std::vector<double>& RateSchedule::rates_at(std::uint64_t slot) const {
    // Segments are few; linear scan from the back.
    for (auto it = segments.rbegin(); it != segments.rend(); ++it) {
        if (it->start_slot <= slot) return it->rates;
    }
    throw std::logic_error("RateSchedule::rates_at: no segment covers slot");
}

std::vector<double> draw_device_rates(const TrafficConfig& cfg, Rng& rng) {
    std::vector<double> rates(cfg.n_devices);
    for (auto& r : rates)
        r = canonical(rng) < cfg.p_high ? cfg.lambda_high : cfg.lambda_low;
    return rates;
}

std::uint32_t sample_arrivals(double rate, Rng& rng) {
    const double threshold = std::exp(-rate);
    std::uint32_t k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= canonical(rng);
    } while (p > threshold);
    return k - 1;
}

TraceFile generate_trace(const TrafficConfig& cfg) {
    cfg.validate();

    TraceFile trace;
    trace.n_devices = cfg.n_devices;
    trace.total_slots = cfg.total_slots;
    trace.slot_duration_ms = cfg.slot_duration_ms;
    trace.arrivals.resize(cfg.total_slots * cfg.n_devices);

    Rng rng(cfg.seed);
    std::vector<double> rates;
    for (std::uint64_t slot = 0; slot < cfg.total_slots; ++slot) {
        const bool redraw =
            slot == 0 || (cfg.delta_t_slots != kNoRedraw && slot % cfg.delta_t_slots == 0);
        if (redraw) {
            rates = draw_device_rates(cfg, rng);
            trace.schedule.segments.push_back({slot, rates});
        }
        std::uint8_t* row = trace.arrivals.data() + slot * cfg.n_devices;
        for (std::uint32_t d = 0; d < cfg.n_devices; ++d) {
            std::uint32_t k = sample_arrivals(rates[d], rng);
            if (k > 255) {
                k = 255;
                ++trace.clamped;
            }
            row[d] = static_cast<std::uint8_t>(k);
        }
    }
    return trace;
}

namespace {

constexpr char kMagic[4] = {'T', 'Q', 'T', 'R'};
constexpr std::uint16_t kVersion = 1;

class Writer {
public:
    explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

    template <typename T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        std::uint8_t raw[sizeof(T)];
        std::memcpy(raw, &v, sizeof(T));
        // Host is little-endian on every supported target; memcpy order is the
        // wire order.
        out_.insert(out_.end(), raw, raw + sizeof(T));
    }

private:
    std::vector<std::uint8_t>& out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    template <typename T>
    T get() {
        static_assert(std::is_trivially_copyable_v<T>);
        if (pos_ + sizeof(T) > in_.size())
            throw TraceIoError(TraceIoErrc::truncated, "trace file truncated");
        T v;
        std::memcpy(&v, in_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::span<const std::uint8_t> rest() const { return in_.subspan(pos_); }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_trace(const TraceFile& trace) {
    std::vector<std::uint8_t> out;
    out.reserve(32 + trace.arrivals.size());
    Writer w(out);
    out.insert(out.end(), kMagic, kMagic + 4);
    w.put<std::uint16_t>(kVersion);
    w.put<std::uint32_t>(trace.n_devices);
    w.put<std::uint64_t>(trace.total_slots);
    w.put<double>(trace.slot_duration_ms);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(trace.schedule.segments.size()));
    for (const auto& seg : trace.schedule.segments) {
        w.put<std::uint64_t>(seg.start_slot);
        for (double r : seg.rates) w.put<double>(r);
    }
    out.insert(out.end(), trace.arrivals.begin(), trace.arrivals.end());
    return out;
}

TraceFile decode_trace(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4)
        throw TraceIoError(TraceIoErrc::truncated, "trace file truncated before magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw TraceIoError(TraceIoErrc::bad_magic, "bad magic: not a trace file");

    Reader r(bytes.subspan(4));
    const auto version = r.get<std::uint16_t>();
    if (version != kVersion)
        throw TraceIoError(TraceIoErrc::bad_version,
                           "unsupported trace format version " + std::to_string(version));

    TraceFile trace;
    trace.n_devices = r.get<std::uint32_t>();
    trace.total_slots = r.get<std::uint64_t>();
    trace.slot_duration_ms = r.get<double>();
    const auto segment_count = r.get<std::uint32_t>();
    for (std::uint32_t s = 0; s < segment_count; ++s) {
        RateSegment seg;
        seg.start_slot = r.get<std::uint64_t>();
        seg.rates.resize(trace.n_devices);
        for (auto& rate : seg.rates) rate = r.get<double>();
        trace.schedule.segments.push_back(std::move(seg));
    }

    auto payload = r.rest();
    const std::uint64_t expected = trace.total_slots * trace.n_devices;
    if (payload.size() != expected)
        throw TraceIoError(TraceIoErrc::truncated,
                           "truncated file: header promises " + std::to_string(expected) +
                               " arrival bytes, found " + std::to_string(payload.size()));
    trace.arrivals.assign(payload.begin(), payload.end());
    return trace;
}

void store_trace(const TraceFile& trace, const std::filesystem::path& path) {
    const auto bytes = encode_trace(trace);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw TraceIoError(TraceIoErrc::io, "cannot open for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f)
        throw TraceIoError(TraceIoErrc::io, "write failed: " + path.string());
}

TraceFile load_trace(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw TraceIoError(TraceIoErrc::io, "cannot open for reading: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return decode_trace(bytes);
}

}  // namespace gfarena::traffic
