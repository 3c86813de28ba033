#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gfarena/common.hpp"
#include "gfarena/mac.hpp"

namespace gfarena::obs {

struct ObsConfig {
    double alpha = 0.001;  // incremental-estimator step size
    std::uint32_t m = 2;
    bool shared_stats = true;  // one normalization record fed by all devices

    void validate() const;
};

// The feature vector an agent conditions on, flattened in the order
// [lambda_bar, prev_action, success_rates...] — m + 2 elements.
struct LocalObservation {
    double lambda_bar = 0.0;
    double prev_action = 0.0;
    std::vector<double> success_rates;  // per resource, start at 1.0

    static LocalObservation initial(std::uint32_t m) {
        LocalObservation o;
        o.success_rates.assign(m, 1.0);
        return o;
    }

    std::size_t width() const { return success_rates.size() + 2; }
    void flatten(std::span<double> out) const;
    std::vector<double> flatten() const;
};

// One incremental estimator step: old + alpha * (x - old).
double update_rate_estimate(double lambda_bar, double x, double alpha);

// Updates only the entry of the resource the device transmitted on.
void update_success_estimate(LocalObservation& o, std::uint32_t resource, double outcome,
                             double alpha);

// Streaming per-feature mean/variance (Welford's one-pass recurrence).
// Freezing fixes the statistics; frozen stats reject further updates and are
// what checkpoints carry into the testing and deployment phases.
class RunningStats {
public:
    explicit RunningStats(std::size_t n_features);
    static RunningStats frozen_from(std::uint64_t count, std::vector<double> means,
                                    std::vector<double> variances);

    void update(std::span<const double> x);
    // Chan-style parallel combine; used to pool per-device records into the
    // single normalization block a checkpoint carries.
    void merge(const RunningStats& other);
    void freeze();

    bool frozen() const { return frozen_; }
    std::uint64_t count() const { return count_; }
    std::size_t n_features() const { return mean_.size(); }
    const std::vector<double>& mean() const { return mean_; }
    // Sample variance, m2/(count-1); zeros when count < 2.
    std::vector<double> variance() const;

    // (x - mean) / sqrt(variance + 1e-8); pass-through while count < 2.
    void normalize(std::span<const double> x, std::span<double> out) const;
    std::vector<double> normalize(std::span<const double> x) const;

private:
    std::uint64_t count_ = 0;
    std::vector<double> mean_;
    std::vector<double> m2_;
    bool frozen_ = false;
    std::vector<double> frozen_var_;  // valid when frozen_
};

inline constexpr double kNormEps = 1e-8;

// Per-device observation state for one cluster, fed slot by slot from
// simulator outcomes.
class ObservationBank {
public:
    ObservationBank(ObsConfig cfg, std::uint32_t n_devices);

    void reset();
    // lambda_bar updates every slot from the arrival count; the success entry
    // of the transmitted resource updates on transmission outcomes.
    void on_slot(const mac::SlotOutcome& outcome, std::span<const std::uint8_t> arrivals);
    void set_prev_action(std::size_t device, std::uint32_t action);

    std::uint32_t n_devices() const { return static_cast<std::uint32_t>(obs_.size()); }
    const LocalObservation& local(std::size_t device) const { return obs_[device]; }
    const ObsConfig& config() const { return cfg_; }

private:
    ObsConfig cfg_;
    std::vector<LocalObservation> obs_;
};

}  // namespace gfarena::obs
