#include "gfarena/policies.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace gfarena::policy {

std::string to_string(Kind k) {
    switch (k) {
        case Kind::random: return "random";
        case Kind::rr: return "rr";
        case Kind::wf: return "wf";
        case Kind::wflb: return "wflb";
        case Kind::idqn: return "idqn";
        case Kind::tinyqmix: return "tinyqmix";
    }
    throw std::logic_error("unknown policy kind");
}

Kind kind_from_string(const std::string& s) {
    if (s == "random") return Kind::random;
    if (s == "rr") return Kind::rr;
    if (s == "wf") return Kind::wf;
    if (s == "wflb") return Kind::wflb;
    if (s == "idqn") return Kind::idqn;
    if (s == "tinyqmix") return Kind::tinyqmix;
    throw std::invalid_argument("unknown policy tag: " + s);
}

void Policy::fill_grants(std::uint64_t, mac::SlotGrants&) const {
    throw std::logic_error("fill_grants called on an interval-choice policy");
}

std::int32_t round_robin_grant(std::uint64_t slot, std::uint32_t device, std::uint32_t n_prime,
                               std::uint32_t m) {
    for (std::uint32_t r = 0; r < m; ++r)
        if ((slot * m + r) % n_prime == device) return static_cast<std::int32_t>(r);
    return -1;
}

std::vector<std::uint32_t> random_select(std::uint32_t n_prime, std::uint32_t m, Rng& rng) {
    if (m < 1) throw std::invalid_argument("random_select: m must be at least 1");
    std::vector<std::uint32_t> choices(n_prime);
    for (auto& c : choices) c = static_cast<std::uint32_t>(uniform_in(rng, 0, m - 1));
    return choices;
}

std::vector<std::uint32_t> waterfill_assign(std::span<const double> rates, std::uint32_t m) {
    if (m < 1) throw std::invalid_argument("waterfill_assign: m must be at least 1");
    std::vector<std::size_t> order(rates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rates[a] > rates[b]; });

    std::vector<double> load(m, 0.0);
    std::vector<std::uint32_t> assignment(rates.size(), 0);
    for (std::size_t dev : order) {
        std::uint32_t best = 0;
        for (std::uint32_t r = 1; r < m; ++r)
            if (load[r] < load[best]) best = r;
        assignment[dev] = best;
        load[best] += rates[dev];
    }
    return assignment;
}

std::uint32_t value_net_select(const qmix::Checkpoint& cp, const obs::LocalObservation& o) {
    const auto stats = cp.frozen_stats();
    const auto norm = stats.normalize(o.flatten());
    const auto q = nn::forward(cp.agents.net(0), norm);
    return qmix::argmax_lowest(q);
}

qmix::Checkpoint idqn_train(const qmix::Scenario& scenario, const qmix::TrainConfig& cfg,
                            std::vector<qmix::TrainLogRow>* log) {
    return qmix::train_algorithm(qmix::Algo::idqn, scenario, cfg, log);
}

Decision RandomPolicy::decide(const PolicyContext& ctx) {
    Decision d;
    d.choices = random_select(ctx.n_prime, ctx.m, rng_);
    return d;
}

Decision RoundRobinPolicy::decide(const PolicyContext&) {
    Decision d;
    d.per_slot_grants = true;
    return d;
}

void RoundRobinPolicy::fill_grants(std::uint64_t slot, mac::SlotGrants& out) const {
    out.resource.assign(n_prime_, -1);
    for (std::uint32_t r = 0; r < m_; ++r) {
        const auto dev = static_cast<std::uint32_t>((slot * m_ + r) % n_prime_);
        out.resource[dev] = static_cast<std::int32_t>(r);
    }
}

Decision WaterFillingPolicy::decide(const PolicyContext& ctx) {
    if (!ctx.observations)
        throw std::invalid_argument("wf policy requires device rate estimates");
    std::vector<double> rates(ctx.n_prime);
    for (std::uint32_t i = 0; i < ctx.n_prime; ++i)
        rates[i] = ctx.observations->local(i).lambda_bar;
    Decision d;
    d.choices = waterfill_assign(rates, ctx.m);
    d.reserved_head_slots = overhead_;
    return d;
}

Decision WaterFillingLowerBoundPolicy::decide(const PolicyContext& ctx) {
    if (!ctx.schedule)
        throw std::invalid_argument("wflb policy requires the trace rate schedule");
    const auto& all_rates = ctx.schedule->rates_at(ctx.start_slot);
    if (all_rates.size() < ctx.n_prime)
        throw std::invalid_argument("wflb: schedule narrower than the cluster");
    Decision d;
    d.choices =
        waterfill_assign(std::span<const double>(all_rates.data(), ctx.n_prime), ctx.m);
    return d;
}

ValueNetPolicy::ValueNetPolicy(Kind kind, qmix::Checkpoint cp)
    : kind_(kind), cp_(std::move(cp)), stats_(cp_.frozen_stats()) {
    if (kind_ != Kind::tinyqmix && kind_ != Kind::idqn)
        throw std::invalid_argument("ValueNetPolicy: not a learned policy kind");
}

Decision ValueNetPolicy::decide(const PolicyContext& ctx) {
    if (!ctx.observations)
        throw std::invalid_argument("learned policy requires local observations");
    if (cp_.n_prime != ctx.n_prime || cp_.m != ctx.m)
        throw qmix::CheckpointError(
            "checkpoint scenario (n_prime=" + std::to_string(cp_.n_prime) +
            ", m=" + std::to_string(cp_.m) + ") does not match the run (n_prime=" +
            std::to_string(ctx.n_prime) + ", m=" + std::to_string(ctx.m) + ")");
    Decision d;
    d.choices.resize(ctx.n_prime);
    std::vector<double> norm;
    for (std::uint32_t i = 0; i < ctx.n_prime; ++i) {
        const auto raw = ctx.observations->local(i).flatten();
        norm.resize(raw.size());
        stats_.normalize(raw, norm);
        const auto q = nn::forward(cp_.agents.net(i), norm);
        d.choices[i] = qmix::argmax_lowest(q);
    }
    return d;
}

std::unique_ptr<Policy> make_policy(Kind kind, const PolicyArgs& args) {
    switch (kind) {
        case Kind::random:
            return std::make_unique<RandomPolicy>(args.seed);
        case Kind::rr:
            return std::make_unique<RoundRobinPolicy>(args.n_prime, args.m);
        case Kind::wf:
            return std::make_unique<WaterFillingPolicy>(args.wf_overhead_slots);
        case Kind::wflb:
            return std::make_unique<WaterFillingLowerBoundPolicy>();
        case Kind::idqn:
        case Kind::tinyqmix: {
            if (!args.checkpoint)
                throw qmix::CheckpointError("learned policy requires a checkpoint");
            if (args.checkpoint->n_prime != args.n_prime || args.checkpoint->m != args.m)
                throw qmix::CheckpointError(
                    "checkpoint scenario does not match the requested cluster");
            if (!args.checkpoint->algorithm.empty() &&
                args.checkpoint->algorithm != to_string(kind))
                throw qmix::CheckpointError("checkpoint was trained by " +
                                            args.checkpoint->algorithm + ", not " +
                                            to_string(kind));
            return std::make_unique<ValueNetPolicy>(kind, *args.checkpoint);
        }
    }
    throw std::logic_error("unknown policy kind");
}

}  // namespace gfarena::policy
