#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gfarena/mac.hpp"
#include "gfarena/policies.hpp"
#include "gfarena/traffic.hpp"

namespace gfarena::eval {

struct MovingAvgPoint {
    double time_s = 0.0;
    double value_ms = 0.0;
    bool carried = false;  // bucket had no deliveries; previous value held
};

struct Delivery {
    double time_ms = 0.0;
    double delay_ms = 0.0;
};

struct RunMetrics {
    std::vector<double> delays_ms;  // delivered packets only
    double mean_delay_ms = 0.0;
    double p50_ms = 0.0, p95_ms = 0.0, p99_ms = 0.0;
    std::vector<double> interval_success_rate;
    std::vector<std::uint64_t> interval_collisions;
    std::uint64_t drops_buffer_overflow = 0;
    std::uint64_t drops_retry_exhausted = 0;
    std::vector<MovingAvgPoint> moving_avg;
    // conservation accounting over the simulated horizon
    std::uint64_t generated = 0;
    std::uint64_t delivered = 0;
    std::uint64_t remaining_buffered = 0;
    std::uint64_t attempts = 0;
    std::uint64_t successes = 0;

    double drop_frac() const {
        return generated == 0
                   ? 0.0
                   : double(drops_buffer_overflow + drops_retry_exhausted) / double(generated);
    }
    // fraction of transmission attempts that ended in a collision
    double collision_rate() const {
        return attempts == 0 ? 0.0 : double(attempts - successes) / double(attempts);
    }
};

struct EvalRequest {
    mac::MacConfig mac;
    double obs_alpha = 0.001;
    double window_s = 5.0;
    std::uint64_t seed = 0;
};

// Replays the first n_prime trace columns through the MAC simulator under
// the given policy. Evaluation performs no learning updates. Throws
// ConfigError when the trace does not cover the cluster or disagrees on the
// slot duration.
RunMetrics run_policy_on_trace(policy::Policy& pol, const traffic::TraceFile& trace,
                               const EvalRequest& req);

// Mean delay of deliveries inside each trailing window of length window_ms;
// one point per bucket. Empty buckets carry the previous value forward,
// flagged. deliveries must be time-ordered.
std::vector<MovingAvgPoint> moving_average(std::span<const Delivery> deliveries,
                                           double window_ms, double horizon_ms);

// Nearest-rank percentile (p in [0,100]) of the delay ledger.
double percentile(std::span<const double> sorted_values, double p);

struct ClusterSpec {
    std::uint32_t n_prime = 12;
    std::uint32_t m = 2;
    std::uint32_t tau_slots = 50;
    double slot_duration_ms = 0.5;
    std::uint32_t agent_hidden = 8;
};

// Device-side FLOPs budget. Convention (also stamped into the flops CSV):
// multiply+add = 2, bias = 1, relu/elu = 2 per unit; learned policies add
// 4 FLOPs per observation feature (m + 2) per decision for the incremental
// estimator refresh; random costs 1 FLOP per decision, round robin 1 per
// slot (grant arithmetic), wf 4 per decision (its rate estimate), wflb 0.
double flops_per_second(policy::Kind kind, const ClusterSpec& spec);

inline constexpr const char* kFlopsConvention =
    "mul+add=2 bias=1 act=2; obs refresh 4/feature/decision; random=1/decision; rr=1/slot; "
    "wf=4/decision; wflb=0";

struct GridCellSpec {
    std::string scenario;  // e.g. np12_m2_dt10s
    policy::Kind kind = policy::Kind::random;
    std::uint64_t seed = 0;
    mac::MacConfig mac;
    double obs_alpha = 0.001;
    double window_s = 5.0;
    std::uint32_t wf_overhead_slots = 6;
    std::uint32_t agent_hidden = 8;
    double delta_t_s = 0.0;  // INFINITY for static traffic
    std::filesystem::path trace_path;
    std::optional<std::filesystem::path> checkpoint_path;
};

struct GridCellResult {
    GridCellSpec spec;
    bool ok = false;
    std::string error;
    RunMetrics metrics;
};

// Runs every cell, fanning out over a bounded worker pool; failures (missing
// trace or checkpoint, mismatched configs) are reported per cell and the
// grid continues. Result order matches the input order.
std::vector<GridCellResult> run_grid(const std::vector<GridCellSpec>& cells, unsigned workers);

struct SummaryRow {
    std::string scenario;
    std::string policy;
    std::uint64_t seed = 0;
    std::uint32_t n_prime = 0, m = 0;
    double delta_t_s = 0.0;
    double mean_delay_ms = 0.0, p50_ms = 0.0, p95_ms = 0.0, p99_ms = 0.0;
    double drop_frac = 0.0, collision_rate = 0.0, flops_per_s = 0.0;
};

SummaryRow summarize(const GridCellSpec& spec, const RunMetrics& metrics);

inline constexpr const char* kSummaryHeader =
    "scenario,policy,seed,n_prime,m,delta_t_s,mean_delay_ms,p50_ms,p95_ms,p99_ms,drop_frac,"
    "collision_rate,flops_per_s";

std::string to_csv_line(const SummaryRow& row);

}  // namespace gfarena::eval
