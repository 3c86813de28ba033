#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace gfarena {

// All randomness in the project flows through mt19937_64 so that a run is
// fully determined by its seed. Distribution helpers are hand-rolled: the
// standard library's distribution sequences are implementation-defined.
using Rng = std::mt19937_64;

// Uniform double in [0, 1) with 53 random bits.
inline double canonical(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [lo, hi], inclusive. Modulo reduction; the ranges used
// here (contention windows, resource indices) are tiny relative to 2^64.
inline std::uint64_t uniform_in(Rng& rng, std::uint64_t lo, std::uint64_t hi) {
    return lo + rng() % (hi - lo + 1);
}

// splitmix64 finalizer, used to derive independent sub-stream seeds from
// (seed, salt) pairs.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Floats in CSV exports carry 6 significant digits.
std::string fmt_g6(double v);

// FNV-1a over raw bytes; used for artifact hashes in run manifests.
std::uint64_t fnv1a(std::span<const std::uint8_t> bytes);

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field_path, const std::string& what)
        : std::runtime_error(field_path + ": " + what), field_(std::move(field_path)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

}  // namespace gfarena
