#include "gfarena/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace gfarena::nn {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::elu: return "elu";
        case Activation::identity: return "identity";
    }
    throw std::logic_error("unknown activation");
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "elu") return Activation::elu;
    if (s == "identity") return Activation::identity;
    throw std::invalid_argument("unknown activation: " + s);
}

double activate(Activation a, double x) {
    switch (a) {
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::elu: return x > 0.0 ? x : std::expm1(x);
        case Activation::identity: return x;
    }
    return x;
}

double activate_grad(Activation a, double pre) {
    switch (a) {
        case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::elu: return pre > 0.0 ? 1.0 : std::exp(pre);
        case Activation::identity: return 1.0;
    }
    return 1.0;
}

DenseLayer DenseLayer::init(std::size_t in, std::size_t out, Activation act, Rng& rng) {
    DenseLayer l;
    l.in = in;
    l.out = out;
    l.act = act;
    l.w.resize(in * out);
    l.b.resize(out);
    const double bound = 1.0 / std::sqrt(double(in));
    for (auto& v : l.w) v = (2.0 * canonical(rng) - 1.0) * bound;
    for (auto& v : l.b) v = (2.0 * canonical(rng) - 1.0) * bound;
    return l;
}

ValueNet ValueNet::mlp(const std::vector<std::size_t>& dims,
                       const std::vector<Activation>& acts, Rng& rng) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1)
        throw std::invalid_argument("ValueNet::mlp: dims/activations mismatch");
    ValueNet net;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
        net.layers.push_back(DenseLayer::init(dims[i], dims[i + 1], acts[i], rng));
    return net;
}

std::size_t ValueNet::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
}

void ValueNet::get_params(std::span<double> out) const {
    std::size_t k = 0;
    for (const auto& l : layers) {
        for (double v : l.w) out[k++] = v;
        for (double v : l.b) out[k++] = v;
    }
}

void ValueNet::set_params(std::span<const double> in) {
    std::size_t k = 0;
    for (auto& l : layers) {
        for (double& v : l.w) v = in[k++];
        for (double& v : l.b) v = in[k++];
    }
}

std::vector<double> ValueNet::get_params() const {
    std::vector<double> out(param_count());
    get_params(out);
    return out;
}

std::vector<double> forward(const ValueNet& net, std::span<const double> x,
                            ForwardCache* cache) {
    if (x.size() != net.input_width())
        throw std::invalid_argument("forward: input width mismatch");
    if (cache) {
        cache->input.assign(x.begin(), x.end());
        cache->pre.assign(net.layers.size(), {});
        cache->post.assign(net.layers.size(), {});
    }
    std::vector<double> cur(x.begin(), x.end());
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const DenseLayer& l = net.layers[li];
        std::vector<double> pre(l.out);
        for (std::size_t o = 0; o < l.out; ++o) {
            const double* wrow = l.w.data() + o * l.in;
            double acc = l.b[o];
            for (std::size_t i = 0; i < l.in; ++i) acc += wrow[i] * cur[i];
            pre[o] = acc;
        }
        std::vector<double> post(l.out);
        for (std::size_t o = 0; o < l.out; ++o) post[o] = activate(l.act, pre[o]);
        if (cache) {
            cache->pre[li] = pre;
            cache->post[li] = post;
        }
        cur = std::move(post);
    }
    return cur;
}

GradientSet GradientSet::zeros_like(const ValueNet& net) {
    GradientSet g;
    for (const auto& l : net.layers) {
        g.dw.emplace_back(l.w.size(), 0.0);
        g.db.emplace_back(l.b.size(), 0.0);
    }
    return g;
}

std::size_t GradientSet::param_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < dw.size(); ++i) n += dw[i].size() + db[i].size();
    return n;
}

void GradientSet::flatten(std::span<double> out) const {
    std::size_t k = 0;
    for (std::size_t i = 0; i < dw.size(); ++i) {
        for (double v : dw[i]) out[k++] = v;
        for (double v : db[i]) out[k++] = v;
    }
}

void GradientSet::scale(double s) {
    for (auto& v : dw)
        for (double& x : v) x *= s;
    for (auto& v : db)
        for (double& x : v) x *= s;
}

std::vector<double> backward(const ValueNet& net, const ForwardCache& cache,
                             std::span<const double> dout, GradientSet& grads) {
    if (cache.pre.size() != net.layers.size())
        throw std::invalid_argument("backward: cache does not match network");
    if (dout.size() != net.output_width())
        throw std::invalid_argument("backward: output gradient width mismatch");

    std::vector<double> delta(dout.begin(), dout.end());
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const DenseLayer& l = net.layers[li];
        const std::vector<double>& pre = cache.pre[li];
        const std::vector<double>& below =
            li == 0 ? cache.input : cache.post[li - 1];

        // through the activation
        for (std::size_t o = 0; o < l.out; ++o) delta[o] *= activate_grad(l.act, pre[o]);

        std::vector<double>& dw = grads.dw[li];
        std::vector<double>& db = grads.db[li];
        std::vector<double> dprev(l.in, 0.0);
        for (std::size_t o = 0; o < l.out; ++o) {
            const double d = delta[o];
            db[o] += d;
            double* dwrow = dw.data() + o * l.in;
            const double* wrow = l.w.data() + o * l.in;
            for (std::size_t i = 0; i < l.in; ++i) {
                dwrow[i] += d * below[i];
                dprev[i] += d * wrow[i];
            }
        }
        delta = std::move(dprev);
    }
    return delta;
}

void optimizer_step(std::span<double> params, std::span<const double> grads,
                    OptimizerState& state) {
    if (params.size() != grads.size())
        throw std::invalid_argument("optimizer_step: shape mismatch");
    for (double g : grads)
        if (!std::isfinite(g))
            throw std::runtime_error("optimizer_step: non-finite gradient, aborting update");

    ++state.step_count;
    if (state.algo == OptAlgo::sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= state.lr * grads[i];
        return;
    }

    if (state.m1.empty()) {
        state.m1.assign(params.size(), 0.0);
        state.m2.assign(params.size(), 0.0);
    }
    if (state.m1.size() != params.size())
        throw std::invalid_argument("optimizer_step: parameter count changed mid-run");

    const double bc1 = 1.0 - std::pow(state.beta1, double(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, double(state.step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m1[i] = state.beta1 * state.m1[i] + (1.0 - state.beta1) * grads[i];
        state.m2[i] = state.beta2 * state.m2[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double mhat = state.m1[i] / bc1;
        const double vhat = state.m2[i] / bc2;
        params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayMemory: capacity must be positive");
    items_.reserve(capacity);
}

void ReplayMemory::push(Transition t) {
    if (items_.size() < capacity_) {
        items_.push_back(std::move(t));
    } else {
        items_[cursor_] = std::move(t);
        cursor_ = (cursor_ + 1) % capacity_;
    }
}

const Transition& ReplayMemory::oldest(std::size_t k) const {
    if (k >= items_.size()) throw std::out_of_range("ReplayMemory::oldest");
    if (items_.size() < capacity_) return items_[k];
    return items_[(cursor_ + k) % capacity_];
}

const Transition& ReplayMemory::sample(Rng& rng) const {
    if (items_.empty()) throw std::runtime_error("ReplayMemory: sampling from empty memory");
    return items_[uniform_in(rng, 0, items_.size() - 1)];
}

std::vector<const Transition*> ReplayMemory::sample_minibatch(std::size_t batch,
                                                              Rng& rng) const {
    if (items_.empty()) throw std::runtime_error("ReplayMemory: sampling from empty memory");
    std::vector<const Transition*> out(batch);
    for (auto& p : out) p = &sample(rng);
    return out;
}

std::uint64_t flops_of_layer(std::size_t in, std::size_t out, Activation act) {
    const std::uint64_t mac = 2ull * in * out;
    const std::uint64_t bias = out;
    const std::uint64_t act_cost = act == Activation::identity ? 0 : 2ull * out;
    return mac + bias + act_cost;
}

std::uint64_t flops_of(const ValueNet& net) {
    std::uint64_t total = 0;
    for (const auto& l : net.layers) total += flops_of_layer(l.in, l.out, l.act);
    return total;
}

}  // namespace gfarena::nn
