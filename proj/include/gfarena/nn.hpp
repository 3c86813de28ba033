#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gfarena/common.hpp"

namespace gfarena::nn {

enum class Activation : std::uint8_t { relu, elu, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

double activate(Activation a, double x);
double activate_grad(Activation a, double pre);

// One affine layer, weights row-major [out x in]. All arithmetic is double
// precision so finite-difference checks stay tight.
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    Activation act = Activation::identity;
    std::vector<double> w;  // out * in
    std::vector<double> b;  // out

    static DenseLayer init(std::size_t in, std::size_t out, Activation act, Rng& rng);
};

struct ValueNet {
    std::vector<DenseLayer> layers;

    // dims = {input, hidden..., output}; acts has dims.size()-1 entries.
    static ValueNet mlp(const std::vector<std::size_t>& dims,
                        const std::vector<Activation>& acts, Rng& rng);

    std::size_t input_width() const { return layers.front().in; }
    std::size_t output_width() const { return layers.back().out; }
    std::size_t param_count() const;
    void get_params(std::span<double> out) const;
    void set_params(std::span<const double> in);
    std::vector<double> get_params() const;
};

struct ForwardCache {
    std::vector<double> input;
    std::vector<std::vector<double>> pre;   // per layer, before activation
    std::vector<std::vector<double>> post;  // per layer, after activation
};

// Affine + activation composition; fills cache (when given) with everything
// backward needs.
std::vector<double> forward(const ValueNet& net, std::span<const double> x,
                            ForwardCache* cache = nullptr);

struct GradientSet {
    std::vector<std::vector<double>> dw;
    std::vector<std::vector<double>> db;

    static GradientSet zeros_like(const ValueNet& net);
    std::size_t param_count() const;
    void flatten(std::span<double> out) const;
    void scale(double s);
};

// Reverse-mode gradients of sum(outputs * dout) w.r.t. parameters and input.
// Accumulates into grads (so batches sum naturally); returns d/d(input).
std::vector<double> backward(const ValueNet& net, const ForwardCache& cache,
                             std::span<const double> dout, GradientSet& grads);

enum class OptAlgo : std::uint8_t { sgd, adam };

struct OptimizerState {
    OptAlgo algo = OptAlgo::adam;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step_count = 0;
    std::vector<double> m1;  // adam first moment, lazily sized
    std::vector<double> m2;  // adam second moment
};

// One update over a flat parameter vector. Throws on non-finite gradients.
void optimizer_step(std::span<double> params, std::span<const double> grads,
                    OptimizerState& state);

// One decision-step experience: joint observation (n_agents x obs_width,
// concatenated), joint action, reward(s), next joint observation. reward has
// one entry for a joint reward or n_agents entries for individual rewards.
struct Transition {
    std::vector<double> z;
    std::vector<std::uint32_t> actions;
    std::vector<double> reward;
    std::vector<double> z_next;
};

// Fixed-capacity FIFO ring of transitions; sampling is uniform with
// replacement.
class ReplayMemory {
public:
    explicit ReplayMemory(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }

    // k-th oldest transition, 0 = oldest surviving.
    const Transition& oldest(std::size_t k) const;
    const Transition& sample(Rng& rng) const;
    std::vector<const Transition*> sample_minibatch(std::size_t batch, Rng& rng) const;

private:
    std::size_t capacity_;
    std::vector<Transition> items_;
    std::size_t cursor_ = 0;  // next write position once full
};

// Inference cost convention: multiply+add = 2 FLOPs, bias add = 1, relu/elu
// = 2 per unit, identity free. A 4->8 relu layer costs 88.
std::uint64_t flops_of_layer(std::size_t in, std::size_t out, Activation act);
std::uint64_t flops_of(const ValueNet& net);

}  // namespace gfarena::nn
