#pragma once

// Finite-difference gradient oracle for the network backward pass, plus a
// generator of random small layer stacks. Test-only code: nothing here may
// call backward() to produce its expected values.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "ecf/network.hpp"
#include "ecf/rng.hpp"
#include "ecf/tensor.hpp"

namespace testsupport {

struct GradCheckCase {
    ecf::NetworkSpec spec;
    ecf::NetworkParams params;
    ecf::Tensor4 input;
    std::vector<double> targets;
    std::uint64_t dropout_seed = 0;
};

/// Random stack that always ends in FullyConnected + Regression and includes
/// the layer kind selected by force_kind (0=conv, 1=pool, 2=relu, 3=norm,
/// 4=dropout; anything else forces nothing extra).
inline ecf::NetworkSpec random_small_spec(ecf::Rng& rng, int force_kind) {
    using namespace ecf;
    NetworkSpec spec;
    std::size_t length = 6 + rng.next_below(5);
    std::size_t height = rng.next_below(4) == 0 ? 2 : 1;
    std::size_t depth = 1 + rng.next_below(3);
    spec.input_shape = {length, height, depth, 1};

    std::size_t feature_layers = 2 + rng.next_below(3);
    std::vector<int> kinds;
    for (std::size_t i = 0; i < feature_layers; ++i) {
        kinds.push_back(static_cast<int>(rng.next_below(5)));
    }
    if (force_kind >= 0 && force_kind < 5 &&
        std::find(kinds.begin(), kinds.end(), force_kind) == kinds.end()) {
        kinds[rng.next_below(kinds.size())] = force_kind;
    }

    std::size_t cur_len = length;
    int counter = 0;
    for (int kind : kinds) {
        std::string tag = std::to_string(++counter);
        switch (kind) {
            case 0: { // conv
                std::size_t f = 1 + rng.next_below(std::min<std::size_t>(3, cur_len));
                std::size_t p = rng.next_below(2);
                std::size_t span = cur_len - f + 2 * p;
                std::size_t s = (span % 2 == 0 && rng.next_below(2) == 0 && span > 0) ? 2 : 1;
                std::size_t n = 2 + rng.next_below(3);
                spec.layers.push_back(LayerSpec::convolution("conv" + tag, {f, n, p, s}));
                cur_len = span / s + 1;
                break;
            }
            case 1: // pool
                if (cur_len >= 2) {
                    spec.layers.push_back(LayerSpec::max_pool("pool" + tag, 2));
                    cur_len /= 2;
                } else {
                    spec.layers.push_back(LayerSpec::relu("relu" + tag));
                }
                break;
            case 2:
                spec.layers.push_back(LayerSpec::relu("relu" + tag));
                break;
            case 3: {
                NormSpec norm;
                norm.window = rng.next_below(2) == 0 ? 3 : 5;
                spec.layers.push_back(LayerSpec::cross_channel_norm("norm" + tag, norm));
                break;
            }
            default:
                spec.layers.push_back(
                    LayerSpec::dropout("drop" + tag, 0.6 + 0.3 * rng.uniform01()));
                break;
        }
    }
    spec.layers.push_back(LayerSpec::fully_connected("fc", 1 + rng.next_below(2)));
    spec.layers.push_back(LayerSpec::regression("regression"));
    return spec;
}

inline GradCheckCase random_case(ecf::Rng& rng, int force_kind) {
    using namespace ecf;
    GradCheckCase c;
    c.spec = random_small_spec(rng, force_kind);
    c.params = init_network(c.spec, rng.next_u64());
    // probe at a generic point: zero biases put padded conv positions exactly
    // on the ReLU kink, where a two-sided difference measures half the
    // one-sided slope
    for (auto& layer : c.params.layers) {
        for (double& b : layer.biases) b = rng.uniform(-0.5, 0.5);
    }
    Shape4 in_shape = c.spec.input_shape;
    in_shape.batch = 1 + rng.next_below(3);
    c.input = Tensor4(in_shape);
    for (double& v : c.input.data()) v = rng.uniform(-2.0, 2.0);
    std::size_t out = layer_output_shapes(c.spec).back().features() * in_shape.batch;
    c.targets.resize(out);
    for (double& v : c.targets) v = rng.uniform(-2.0, 2.0);
    c.dropout_seed = rng.next_u64();
    return c;
}

inline double loss_at(const GradCheckCase& c, const ecf::NetworkParams& params) {
    auto fwd = ecf::forward(c.spec, params, c.input, ecf::RunMode::Train, c.dropout_seed);
    return ecf::mse_loss(fwd.output, c.targets);
}

/// Max relative error between analytic gradients and central finite
/// differences. The denominator floor absorbs finite-difference roundoff on
/// near-zero gradients without loosening the check on real ones.
inline double max_gradient_relative_error(const GradCheckCase& c, double h = 1e-5) {
    auto fwd = ecf::forward(c.spec, c.params, c.input, ecf::RunMode::Train, c.dropout_seed);
    ecf::Tensor4 dl = ecf::mse_loss_gradient(fwd.output, c.targets);
    ecf::NetworkParams analytic = ecf::backward(c.spec, c.params, fwd.cache, dl);

    double worst = 0.0;
    ecf::NetworkParams probe = c.params;
    auto check_array = [&](std::vector<double>& values, const std::vector<double>& grads) {
        for (std::size_t k = 0; k < values.size(); ++k) {
            double saved = values[k];
            values[k] = saved + h;
            double up = loss_at(c, probe);
            values[k] = saved - h;
            double down = loss_at(c, probe);
            values[k] = saved;
            double fd = (up - down) / (2.0 * h);
            double denom = std::max({std::abs(fd), std::abs(grads[k]), 1e-2});
            worst = std::max(worst, std::abs(fd - grads[k]) / denom);
        }
    };
    for (std::size_t i = 0; i < probe.layers.size(); ++i) {
        check_array(probe.layers[i].weights, analytic.layers[i].weights);
        check_array(probe.layers[i].biases, analytic.layers[i].biases);
    }
    return worst;
}

} // namespace testsupport
