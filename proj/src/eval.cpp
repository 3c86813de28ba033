#include "gfarena/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <thread>

#include "gfarena/obs.hpp"
#include "gfarena/qmix.hpp"

namespace gfarena::eval {

RunMetrics run_policy_on_trace(policy::Policy& pol, const traffic::TraceFile& trace,
                               const EvalRequest& req) {
    const mac::MacConfig& cfg = req.mac;
    cfg.validate();
    if (trace.n_devices < cfg.n_prime)
        throw ConfigError("eval.trace",
                          "trace has " + std::to_string(trace.n_devices) +
                              " devices, cluster needs " + std::to_string(cfg.n_prime));
    if (trace.slot_duration_ms != cfg.slot_duration_ms)
        throw ConfigError("eval.trace", "trace slot duration disagrees with the MAC config");

    const std::uint32_t n = cfg.n_prime;
    const double slot_ms = cfg.slot_duration_ms;
    const std::uint64_t n_intervals = trace.total_slots / cfg.tau_slots;

    std::vector<mac::DeviceState> devices(n);
    obs::ObservationBank bank(obs::ObsConfig{req.obs_alpha, cfg.m, true}, n);
    Rng rng(mix_seed(req.seed, 17));

    RunMetrics out;
    std::vector<Delivery> deliveries;

    mac::ArrivalsFn arrivals = [&](std::uint64_t slot, std::span<std::uint8_t> row) {
        const std::uint8_t* src = trace.arrivals.data() + slot * trace.n_devices;
        for (std::uint32_t i = 0; i < n; ++i) row[i] = src[i];
    };
    mac::SlotObserver observer = [&](std::uint64_t, const mac::SlotOutcome& o,
                                     std::span<const std::uint8_t> arr) {
        bank.on_slot(o, arr);
    };
    mac::GrantsFn grants = [&](std::uint64_t slot, mac::SlotGrants& g) {
        pol.fill_grants(slot, g);
    };

    for (std::uint64_t t = 0; t < n_intervals; ++t) {
        const std::uint64_t start = t * cfg.tau_slots;
        policy::PolicyContext ctx;
        ctx.interval_index = t;
        ctx.start_slot = start;
        ctx.n_prime = n;
        ctx.m = cfg.m;
        ctx.observations = &bank;
        ctx.schedule = &trace.schedule;

        const policy::Decision dec = pol.decide(ctx);
        if (!dec.per_slot_grants) {
            mac::set_resources(devices, dec.choices, cfg.m);
            for (std::uint32_t i = 0; i < n; ++i) bank.set_prev_action(i, dec.choices[i]);
        }

        const auto istats =
            mac::run_interval(devices, cfg, arrivals, start, rng, dec.reserved_head_slots,
                              dec.per_slot_grants ? &grants : nullptr, &observer);

        const double end_ms = double(start + cfg.tau_slots) * slot_ms;
        for (std::uint64_t d : istats.delays_slots) {
            const double delay_ms = double(d) * slot_ms;
            out.delays_ms.push_back(delay_ms);
            deliveries.push_back(Delivery{end_ms, delay_ms});
        }
        out.interval_success_rate.push_back(mac::interval_reward(istats));
        out.interval_collisions.push_back(istats.collision_events);
        out.drops_buffer_overflow += istats.drops_buffer_overflow;
        out.drops_retry_exhausted += istats.drops_retry_exhausted;
        for (std::uint32_t i = 0; i < n; ++i) {
            out.attempts += istats.attempts[i];
            out.successes += istats.successes[i];
        }
    }

    for (std::uint64_t slot = 0; slot < n_intervals * cfg.tau_slots; ++slot) {
        const std::uint8_t* src = trace.arrivals.data() + slot * trace.n_devices;
        for (std::uint32_t i = 0; i < n; ++i) out.generated += src[i];
    }
    for (const auto& dev : devices) out.remaining_buffered += dev.buffer.size();
    out.delivered = out.delays_ms.size();

    double sum = 0.0;
    for (double d : out.delays_ms) sum += d;
    out.mean_delay_ms = out.delays_ms.empty() ? 0.0 : sum / double(out.delays_ms.size());

    std::vector<double> sorted = out.delays_ms;
    std::sort(sorted.begin(), sorted.end());
    out.p50_ms = percentile(sorted, 50.0);
    out.p95_ms = percentile(sorted, 95.0);
    out.p99_ms = percentile(sorted, 99.0);

    const double horizon_ms = double(n_intervals * cfg.tau_slots) * slot_ms;
    out.moving_avg = moving_average(deliveries, req.window_s * 1000.0, horizon_ms);
    return out;
}

std::vector<MovingAvgPoint> moving_average(std::span<const Delivery> deliveries,
                                           double window_ms, double horizon_ms) {
    if (!(window_ms > 0.0)) throw std::invalid_argument("moving_average: window must be positive");
    std::vector<MovingAvgPoint> out;
    std::size_t i = 0;
    double prev = 0.0;
    for (std::uint64_t k = 0; (double(k) + 1.0) * window_ms <= horizon_ms + 1e-9; ++k) {
        const double end = (double(k) + 1.0) * window_ms;
        double sum = 0.0;
        std::uint64_t count = 0;
        while (i < deliveries.size() && deliveries[i].time_ms <= end + 1e-9) {
            sum += deliveries[i].delay_ms;
            ++count;
            ++i;
        }
        MovingAvgPoint p;
        p.time_s = end / 1000.0;
        if (count > 0) {
            p.value_ms = sum / double(count);
            prev = p.value_ms;
        } else {
            p.value_ms = prev;
            p.carried = true;
        }
        out.push_back(p);
    }
    return out;
}

double percentile(std::span<const double> sorted_values, double p) {
    if (sorted_values.empty()) return 0.0;
    const double n = double(sorted_values.size());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
    if (rank < 1) rank = 1;
    if (rank > sorted_values.size()) rank = sorted_values.size();
    return sorted_values[rank - 1];
}

double flops_per_second(policy::Kind kind, const ClusterSpec& spec) {
    const double decisions_per_s = 1000.0 / (double(spec.tau_slots) * spec.slot_duration_ms);
    const double slots_per_s = 1000.0 / spec.slot_duration_ms;
    const std::size_t w = spec.m + 2;
    switch (kind) {
        case policy::Kind::random:
            return decisions_per_s;
        case policy::Kind::rr:
            return slots_per_s;
        case policy::Kind::wf:
            return 4.0 * decisions_per_s;
        case policy::Kind::wflb:
            return 0.0;
        case policy::Kind::idqn:
        case policy::Kind::tinyqmix: {
            const std::uint64_t inference =
                nn::flops_of_layer(w, spec.agent_hidden, nn::Activation::relu) +
                nn::flops_of_layer(spec.agent_hidden, spec.m, nn::Activation::identity);
            const std::uint64_t obs_refresh = 4ull * w;
            return decisions_per_s * double(inference + obs_refresh);
        }
    }
    throw std::logic_error("unknown policy kind");
}

namespace {

// Traces are shared across grid cells; cache them per path.
class TraceCache {
public:
    std::shared_ptr<const traffic::TraceFile> get(const std::filesystem::path& path) {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cache_.find(path.string());
        if (it != cache_.end()) return it->second;
        auto trace = std::make_shared<const traffic::TraceFile>(traffic::load_trace(path));
        cache_.emplace(path.string(), trace);
        return trace;
    }

private:
    std::mutex mu_;
    std::map<std::string, std::shared_ptr<const traffic::TraceFile>> cache_;
};

GridCellResult run_cell(const GridCellSpec& spec, TraceCache& traces) {
    GridCellResult res;
    res.spec = spec;
    try {
        auto trace = traces.get(spec.trace_path);

        qmix::Checkpoint cp;
        policy::PolicyArgs args;
        args.n_prime = spec.mac.n_prime;
        args.m = spec.mac.m;
        args.seed = mix_seed(spec.seed, 23);
        args.wf_overhead_slots = spec.wf_overhead_slots;
        if (spec.kind == policy::Kind::tinyqmix || spec.kind == policy::Kind::idqn) {
            if (!spec.checkpoint_path)
                throw qmix::CheckpointError("no checkpoint path for learned policy");
            cp = qmix::load_checkpoint(*spec.checkpoint_path);
            args.checkpoint = &cp;
        }
        auto pol = policy::make_policy(spec.kind, args);

        EvalRequest req;
        req.mac = spec.mac;
        req.obs_alpha = spec.obs_alpha;
        req.window_s = spec.window_s;
        req.seed = spec.seed;
        res.metrics = run_policy_on_trace(*pol, *trace, req);
        res.ok = true;
    } catch (const std::exception& e) {
        res.ok = false;
        res.error = e.what();
    }
    return res;
}

}  // namespace

std::vector<GridCellResult> run_grid(const std::vector<GridCellSpec>& cells, unsigned workers) {
    std::vector<GridCellResult> results(cells.size());
    if (cells.empty()) return results;

    if (workers == 0) workers = std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    workers = std::min<unsigned>(workers, static_cast<unsigned>(cells.size()));

    TraceCache traces;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            results[i] = run_cell(cells[i], traces);
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return results;
}

SummaryRow summarize(const GridCellSpec& spec, const RunMetrics& metrics) {
    SummaryRow row;
    row.scenario = spec.scenario;
    row.policy = policy::to_string(spec.kind);
    row.seed = spec.seed;
    row.n_prime = spec.mac.n_prime;
    row.m = spec.mac.m;
    row.delta_t_s = spec.delta_t_s;
    row.mean_delay_ms = metrics.mean_delay_ms;
    row.p50_ms = metrics.p50_ms;
    row.p95_ms = metrics.p95_ms;
    row.p99_ms = metrics.p99_ms;
    row.drop_frac = metrics.drop_frac();
    row.collision_rate = metrics.collision_rate();
    ClusterSpec cs;
    cs.n_prime = spec.mac.n_prime;
    cs.m = spec.mac.m;
    cs.tau_slots = spec.mac.tau_slots;
    cs.slot_duration_ms = spec.mac.slot_duration_ms;
    cs.agent_hidden = spec.agent_hidden;
    row.flops_per_s = flops_per_second(spec.kind, cs);
    return row;
}

std::string to_csv_line(const SummaryRow& r) {
    std::string line = r.scenario + "," + r.policy + "," + std::to_string(r.seed) + "," +
                       std::to_string(r.n_prime) + "," + std::to_string(r.m) + "," +
                       fmt_g6(r.delta_t_s) + "," + fmt_g6(r.mean_delay_ms) + "," +
                       fmt_g6(r.p50_ms) + "," + fmt_g6(r.p95_ms) + "," + fmt_g6(r.p99_ms) + "," +
                       fmt_g6(r.drop_frac) + "," + fmt_g6(r.collision_rate) + "," +
                       fmt_g6(r.flops_per_s);
    return line;
}

}  // namespace gfarena::eval
