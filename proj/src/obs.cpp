#include "gfarena/obs.hpp"

#include <cmath>
#include <stdexcept>

namespace gfarena::obs {

void ObsConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ConfigError("obs.alpha", "must lie in (0, 1)");
    if (m < 1) throw ConfigError("obs.m", "must be at least 1");
}

void LocalObservation::flatten(std::span<double> out) const {
    out[0] = lambda_bar;
    out[1] = prev_action;
    for (std::size_t r = 0; r < success_rates.size(); ++r) out[2 + r] = success_rates[r];
}

std::vector<double> LocalObservation::flatten() const {
    std::vector<double> out(width());
    flatten(out);
    return out;
}

double update_rate_estimate(double lambda_bar, double x, double alpha) {
    return lambda_bar + alpha * (x - lambda_bar);
}

void update_success_estimate(LocalObservation& o, std::uint32_t resource, double outcome,
                             double alpha) {
    double& sr = o.success_rates[resource];
    sr = sr + alpha * (outcome - sr);
}

RunningStats::RunningStats(std::size_t n_features)
    : mean_(n_features, 0.0), m2_(n_features, 0.0) {}

RunningStats RunningStats::frozen_from(std::uint64_t count, std::vector<double> means,
                                       std::vector<double> variances) {
    if (means.size() != variances.size())
        throw std::invalid_argument("RunningStats: means/variances size mismatch");
    RunningStats s(means.size());
    s.count_ = count;
    s.mean_ = std::move(means);
    s.frozen_var_ = std::move(variances);
    s.frozen_ = true;
    return s;
}

void RunningStats::update(std::span<const double> x) {
    if (frozen_) throw std::logic_error("RunningStats: update after freeze");
    if (x.size() != mean_.size())
        throw std::invalid_argument("RunningStats: feature width mismatch");
    ++count_;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double delta = x[i] - mean_[i];
        mean_[i] += delta / double(count_);
        m2_[i] += delta * (x[i] - mean_[i]);
    }
}

void RunningStats::merge(const RunningStats& other) {
    if (frozen_) throw std::logic_error("RunningStats: merge after freeze");
    if (other.mean_.size() != mean_.size())
        throw std::invalid_argument("RunningStats: feature width mismatch");
    if (other.count_ == 0) return;
    if (count_ == 0) {
        count_ = other.count_;
        mean_ = other.mean_;
        m2_ = other.m2_;
        return;
    }
    const double na = double(count_), nb = double(other.count_);
    const double n = na + nb;
    for (std::size_t i = 0; i < mean_.size(); ++i) {
        const double delta = other.mean_[i] - mean_[i];
        mean_[i] += delta * nb / n;
        m2_[i] += other.m2_[i] + delta * delta * na * nb / n;
    }
    count_ += other.count_;
}

void RunningStats::freeze() {
    if (frozen_) return;
    frozen_var_ = variance();
    frozen_ = true;
}

std::vector<double> RunningStats::variance() const {
    if (frozen_) return frozen_var_;
    std::vector<double> v(mean_.size(), 0.0);
    if (count_ >= 2)
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = m2_[i] / double(count_ - 1);
    return v;
}

void RunningStats::normalize(std::span<const double> x, std::span<double> out) const {
    if (x.size() != mean_.size())
        throw std::invalid_argument("RunningStats: feature width mismatch");
    if (count_ < 2) {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i];
        return;
    }
    if (frozen_) {
        for (std::size_t i = 0; i < x.size(); ++i)
            out[i] = (x[i] - mean_[i]) / std::sqrt(frozen_var_[i] + kNormEps);
    } else {
        const double denom = double(count_ - 1);
        for (std::size_t i = 0; i < x.size(); ++i)
            out[i] = (x[i] - mean_[i]) / std::sqrt(m2_[i] / denom + kNormEps);
    }
}

std::vector<double> RunningStats::normalize(std::span<const double> x) const {
    std::vector<double> out(x.size());
    normalize(x, out);
    return out;
}

ObservationBank::ObservationBank(ObsConfig cfg, std::uint32_t n_devices) : cfg_(cfg) {
    cfg_.validate();
    obs_.assign(n_devices, LocalObservation::initial(cfg_.m));
}

void ObservationBank::reset() {
    for (auto& o : obs_) o = LocalObservation::initial(cfg_.m);
}

void ObservationBank::on_slot(const mac::SlotOutcome& outcome,
                              std::span<const std::uint8_t> arrivals) {
    for (std::size_t i = 0; i < obs_.size(); ++i) {
        LocalObservation& o = obs_[i];
        o.lambda_bar = update_rate_estimate(o.lambda_bar, double(arrivals[i]), cfg_.alpha);
        if (outcome.tx_resource[i] >= 0) {
            const double ok =
                outcome.status[i] == mac::SlotStatus::transmitted_success ? 1.0 : 0.0;
            update_success_estimate(o, static_cast<std::uint32_t>(outcome.tx_resource[i]), ok,
                                    cfg_.alpha);
        }
    }
}

void ObservationBank::set_prev_action(std::size_t device, std::uint32_t action) {
    obs_[device].prev_action = double(action);
}

}  // namespace gfarena::obs
