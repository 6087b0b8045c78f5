#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecf/error.hpp"
#include "ecf/rng.hpp"
#include "ecf/tensor.hpp"

namespace ecf {

enum class LayerKind { Conv, MaxPool, ReLU, CrossChannelNorm, Dropout, FullyConnected, Regression };

inline const char* to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv: return "conv";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::ReLU: return "relu";
        case LayerKind::CrossChannelNorm: return "norm";
        case LayerKind::Dropout: return "dropout";
        case LayerKind::FullyConnected: return "fc";
        case LayerKind::Regression: return "regression";
    }
    return "unknown";
}

/// Filter geometry of a Conv layer; the input size is taken from the chain.
struct FilterSpec {
    std::size_t filter_size = 1;  // F
    std::size_t filter_count = 1; // N
    std::size_t padding = 0;      // P
    std::size_t stride = 1;       // S
};

/// Cross-channel local response normalization constants,
/// b_c = a_c / (k + alpha * sum_{|c'-c| <= window/2} a_{c'}^2)^beta.
struct NormSpec {
    std::size_t window = 5;
    double k = 2.0;
    double alpha = 1e-4;
    double beta = 0.75;
};

struct LayerSpec {
    LayerKind kind = LayerKind::ReLU;
    std::string name;

    FilterSpec conv;                 // Conv
    std::size_t pool_stride = 2;     // MaxPool (window equals stride)
    std::size_t output_size = 1;     // FullyConnected
    double keep_probability = 0.5;   // Dropout
    NormSpec norm;                   // CrossChannelNorm

    static LayerSpec convolution(std::string name, FilterSpec f) {
        LayerSpec s;
        s.kind = LayerKind::Conv;
        s.name = std::move(name);
        s.conv = f;
        return s;
    }
    static LayerSpec max_pool(std::string name, std::size_t stride) {
        LayerSpec s;
        s.kind = LayerKind::MaxPool;
        s.name = std::move(name);
        s.pool_stride = stride;
        return s;
    }
    static LayerSpec relu(std::string name) {
        LayerSpec s;
        s.kind = LayerKind::ReLU;
        s.name = std::move(name);
        return s;
    }
    static LayerSpec cross_channel_norm(std::string name, NormSpec n = {}) {
        LayerSpec s;
        s.kind = LayerKind::CrossChannelNorm;
        s.name = std::move(name);
        s.norm = n;
        return s;
    }
    static LayerSpec dropout(std::string name, double keep_probability) {
        LayerSpec s;
        s.kind = LayerKind::Dropout;
        s.name = std::move(name);
        s.keep_probability = keep_probability;
        return s;
    }
    static LayerSpec fully_connected(std::string name, std::size_t output_size) {
        LayerSpec s;
        s.kind = LayerKind::FullyConnected;
        s.name = std::move(name);
        s.output_size = output_size;
        return s;
    }
    static LayerSpec regression(std::string name) {
        LayerSpec s;
        s.kind = LayerKind::Regression;
        s.name = std::move(name);
        return s;
    }
};

/// Ordered layer stack over a batch-free input shape.
struct NetworkSpec {
    Shape4 input_shape; // batch field is ignored; any batch size may be fed
    std::vector<LayerSpec> layers;
};

namespace detail {

inline Shape4 layer_output_shape(const LayerSpec& layer, const Shape4& in) {
    switch (layer.kind) {
        case LayerKind::Conv: {
            ConvGeometry g{in.length, layer.conv.filter_size, layer.conv.padding,
                           layer.conv.stride, layer.conv.filter_count};
            auto [out_len, channels] = conv_output_shape(g);
            return {out_len, in.height, channels, in.batch};
        }
        case LayerKind::MaxPool: {
            auto [out_len, channels] = pool_output_shape(in.length, layer.pool_stride, in.depth);
            return {out_len, in.height, channels, in.batch};
        }
        case LayerKind::ReLU:
        case LayerKind::CrossChannelNorm:
        case LayerKind::Dropout:
        case LayerKind::Regression:
            return in;
        case LayerKind::FullyConnected:
            return {layer.output_size, 1, 1, in.batch};
    }
    raise(ErrorCode::InvalidSpec, "unknown layer kind");
}

} // namespace detail

/// Batch-free output shape of every layer, in order. Throws InvalidSpec if
/// the chain is inconsistent anywhere.
inline std::vector<Shape4> layer_output_shapes(const NetworkSpec& spec) {
    std::vector<Shape4> shapes;
    shapes.reserve(spec.layers.size());
    Shape4 current = spec.input_shape;
    current.batch = 1;
    current.validate();
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& layer = spec.layers[i];
        if (layer.kind == LayerKind::Regression && i + 1 != spec.layers.size()) {
            raise(ErrorCode::InvalidSpec, "regression layer must be the final layer");
        }
        if (layer.kind == LayerKind::Dropout &&
            (layer.keep_probability <= 0.0 || layer.keep_probability > 1.0)) {
            raise(ErrorCode::InvalidSpec, "dropout keep probability must be in (0, 1]");
        }
        if (layer.kind == LayerKind::FullyConnected && layer.output_size == 0) {
            raise(ErrorCode::InvalidSpec, "fully-connected output size must be >= 1");
        }
        try {
            current = detail::layer_output_shape(layer, current);
        } catch (const Error& e) {
            raise(ErrorCode::InvalidSpec, "layer " + std::to_string(i) + " (" +
                                              to_string(layer.kind) + "): " + e.what());
        }
        shapes.push_back(current);
    }
    return shapes;
}

inline void validate_network(const NetworkSpec& spec) {
    if (spec.layers.empty()) raise(ErrorCode::InvalidSpec, "network has no layers");
    layer_output_shapes(spec);
}

/// Learned arrays of one layer; empty for parameter-free layers.
struct LayerParams {
    std::vector<double> weights;
    std::vector<double> biases;
};

/// Weights for every layer of a NetworkSpec, index-aligned with spec.layers.
/// Conv weights are [filter][in_channel][tap]; FC weights are [output][input].
struct NetworkParams {
    std::vector<LayerParams> layers;

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weights.size() + l.biases.size();
        return n;
    }
};

/// Glorot-uniform initialization: weights ~ U(+-sqrt(6/(fan_in+fan_out))),
/// biases zero. Deterministic in (spec, seed).
inline NetworkParams init_network(const NetworkSpec& spec, std::uint64_t seed) {
    validate_network(spec);
    auto shapes = layer_output_shapes(spec);
    Rng rng(seed);
    NetworkParams params;
    params.layers.resize(spec.layers.size());
    Shape4 in = spec.input_shape;
    in.batch = 1;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& layer = spec.layers[i];
        LayerParams& p = params.layers[i];
        if (layer.kind == LayerKind::Conv) {
            std::size_t fan_in = in.depth * layer.conv.filter_size;
            std::size_t fan_out = layer.conv.filter_count * layer.conv.filter_size;
            double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            p.weights.resize(layer.conv.filter_count * in.depth * layer.conv.filter_size);
            for (double& w : p.weights) w = rng.uniform(-limit, limit);
            p.biases.assign(layer.conv.filter_count, 0.0);
        } else if (layer.kind == LayerKind::FullyConnected) {
            std::size_t fan_in = in.features();
            std::size_t fan_out = layer.output_size;
            double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            p.weights.resize(layer.output_size * fan_in);
            for (double& w : p.weights) w = rng.uniform(-limit, limit);
            p.biases.assign(layer.output_size, 0.0);
        }
        in = shapes[i];
    }
    return params;
}

enum class RunMode { Train, Infer };

/// Everything backward needs from a forward pass.
struct ForwardCache {
    RunMode mode = RunMode::Infer;
    Tensor4 input;                                      // network input
    std::vector<Tensor4> outputs;                       // per-layer activations
    std::vector<std::vector<std::size_t>> pool_argmax;  // MaxPool layers only
    std::vector<std::vector<double>> dropout_mask;      // Dropout layers, Train mode only
    std::vector<std::vector<double>> norm_denom;        // CrossChannelNorm layers only
};

struct ForwardResult {
    Tensor4 output;
    ForwardCache cache;
};

namespace detail {

inline void check_params_shape(const NetworkSpec& spec, const NetworkParams& params) {
    if (params.layers.size() != spec.layers.size()) {
        raise(ErrorCode::InvalidSpec, "params hold " + std::to_string(params.layers.size()) +
                                          " layers, spec has " +
                                          std::to_string(spec.layers.size()));
    }
}

inline Tensor4 conv_forward(const Tensor4& x, const FilterSpec& f,
                            const LayerParams& p, const Shape4& out_shape) {
    const Shape4& s = x.shape();
    Tensor4 y(out_shape);
    const std::size_t F = f.filter_size;
    const std::size_t P = f.padding;
    const std::size_t S = f.stride;
    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t n = 0; n < f.filter_count; ++n) {
            for (std::size_t h = 0; h < s.height; ++h) {
                for (std::size_t o = 0; o < out_shape.length; ++o) {
                    double acc = p.biases[n];
                    for (std::size_t d = 0; d < s.depth; ++d) {
                        for (std::size_t t = 0; t < F; ++t) {
                            std::ptrdiff_t l =
                                static_cast<std::ptrdiff_t>(o * S + t) - static_cast<std::ptrdiff_t>(P);
                            if (l < 0 || l >= static_cast<std::ptrdiff_t>(s.length)) continue;
                            acc += x.at(static_cast<std::size_t>(l), h, d, b) *
                                   p.weights[(n * s.depth + d) * F + t];
                        }
                    }
                    y.at(o, h, n, b) = acc;
                }
            }
        }
    }
    return y;
}

inline void conv_backward(const Tensor4& x, const Tensor4& dy, const FilterSpec& f,
                          const LayerParams& p, LayerParams& grad, Tensor4& dx) {
    const Shape4& s = x.shape();
    const Shape4& os = dy.shape();
    const std::size_t F = f.filter_size;
    const std::size_t P = f.padding;
    const std::size_t S = f.stride;
    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t n = 0; n < f.filter_count; ++n) {
            for (std::size_t h = 0; h < s.height; ++h) {
                for (std::size_t o = 0; o < os.length; ++o) {
                    double g = dy.at(o, h, n, b);
                    grad.biases[n] += g;
                    for (std::size_t d = 0; d < s.depth; ++d) {
                        for (std::size_t t = 0; t < F; ++t) {
                            std::ptrdiff_t l =
                                static_cast<std::ptrdiff_t>(o * S + t) - static_cast<std::ptrdiff_t>(P);
                            if (l < 0 || l >= static_cast<std::ptrdiff_t>(s.length)) continue;
                            auto lu = static_cast<std::size_t>(l);
                            grad.weights[(n * s.depth + d) * F + t] += g * x.at(lu, h, d, b);
                            dx.at(lu, h, d, b) += g * p.weights[(n * s.depth + d) * F + t];
                        }
                    }
                }
            }
        }
    }
}

inline void lrn_window(std::size_t c, std::size_t depth, std::size_t window,
                       std::size_t& lo, std::size_t& hi) {
    std::size_t half = window / 2;
    lo = (c >= half) ? c - half : 0;
    hi = (c + half < depth) ? c + half : depth - 1;
}

} // namespace detail

/// Runs the network on a batch. Train mode draws fresh dropout masks from
/// dropout_seed; Infer mode treats dropout as the identity and is fully
/// deterministic.
inline ForwardResult forward(const NetworkSpec& spec, const NetworkParams& params,
                             const Tensor4& input, RunMode mode,
                             std::uint64_t dropout_seed = 0) {
    validate_network(spec);
    detail::check_params_shape(spec, params);
    {
        const Shape4& in = input.shape();
        if (in.length != spec.input_shape.length || in.height != spec.input_shape.height ||
            in.depth != spec.input_shape.depth) {
            raise(ErrorCode::ShapeMismatch, "input shape " + in.to_string() +
                                                " does not match network input " +
                                                spec.input_shape.to_string());
        }
    }

    ForwardCache cache;
    cache.mode = mode;
    cache.input = input;
    cache.outputs.reserve(spec.layers.size());
    cache.pool_argmax.resize(spec.layers.size());
    cache.dropout_mask.resize(spec.layers.size());
    cache.norm_denom.resize(spec.layers.size());

    Rng dropout_rng(dropout_seed);
    const Tensor4* x = &input;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& layer = spec.layers[i];
        const Shape4& s = x->shape();
        Tensor4 y;
        switch (layer.kind) {
            case LayerKind::Conv: {
                ConvGeometry g{s.length, layer.conv.filter_size, layer.conv.padding,
                               layer.conv.stride, layer.conv.filter_count};
                auto [out_len, channels] = conv_output_shape(g);
                y = detail::conv_forward(*x, layer.conv, params.layers[i],
                                         {out_len, s.height, channels, s.batch});
                break;
            }
            case LayerKind::MaxPool: {
                auto [out_len, channels] = pool_output_shape(s.length, layer.pool_stride, s.depth);
                y = Tensor4({out_len, s.height, channels, s.batch});
                auto& argmax = cache.pool_argmax[i];
                argmax.resize(y.size());
                for (std::size_t b = 0; b < s.batch; ++b)
                    for (std::size_t d = 0; d < s.depth; ++d)
                        for (std::size_t h = 0; h < s.height; ++h)
                            for (std::size_t o = 0; o < out_len; ++o) {
                                std::size_t best = x->index(o * layer.pool_stride, h, d, b);
                                double best_v = (*x)[best];
                                for (std::size_t t = 1; t < layer.pool_stride; ++t) {
                                    std::size_t idx = x->index(o * layer.pool_stride + t, h, d, b);
                                    if ((*x)[idx] > best_v) {
                                        best_v = (*x)[idx];
                                        best = idx;
                                    }
                                }
                                std::size_t oi = y.index(o, h, d, b);
                                y[oi] = best_v;
                                argmax[oi] = best;
                            }
                break;
            }
            case LayerKind::ReLU: {
                y = *x;
                for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
                break;
            }
            case LayerKind::CrossChannelNorm: {
                y = Tensor4(s);
                auto& denoms = cache.norm_denom[i];
                denoms.resize(x->size());
                const NormSpec& ns = layer.norm;
                for (std::size_t b = 0; b < s.batch; ++b)
                    for (std::size_t h = 0; h < s.height; ++h)
                        for (std::size_t l = 0; l < s.length; ++l)
                            for (std::size_t c = 0; c < s.depth; ++c) {
                                std::size_t lo, hi;
                                detail::lrn_window(c, s.depth, ns.window, lo, hi);
                                double sum_sq = 0.0;
                                for (std::size_t cc = lo; cc <= hi; ++cc) {
                                    double a = x->at(l, h, cc, b);
                                    sum_sq += a * a;
                                }
                                double denom = ns.k + ns.alpha * sum_sq;
                                std::size_t idx = x->index(l, h, c, b);
                                denoms[idx] = denom;
                                y[idx] = (*x)[idx] * std::pow(denom, -ns.beta);
                            }
                break;
            }
            case LayerKind::Dropout: {
                y = *x;
                if (mode == RunMode::Train) {
                    auto& mask = cache.dropout_mask[i];
                    mask.resize(y.size());
                    double keep = layer.keep_probability;
                    for (std::size_t e = 0; e < y.size(); ++e) {
                        mask[e] = dropout_rng.uniform01() < keep ? 1.0 / keep : 0.0;
                        y[e] *= mask[e];
                    }
                }
                break;
            }
            case LayerKind::FullyConnected: {
                std::size_t in_features = s.features();
                const LayerParams& p = params.layers[i];
                y = Tensor4({layer.output_size, 1, 1, s.batch});
                for (std::size_t b = 0; b < s.batch; ++b) {
                    const double* xb = x->data().data() + b * in_features;
                    for (std::size_t o = 0; o < layer.output_size; ++o) {
                        double acc = p.biases[o];
                        const double* wo = p.weights.data() + o * in_features;
                        for (std::size_t k = 0; k < in_features; ++k) acc += wo[k] * xb[k];
                        y.at(o, 0, 0, b) = acc;
                    }
                }
                break;
            }
            case LayerKind::Regression: {
                y = *x;
                break;
            }
        }
        cache.outputs.push_back(std::move(y));
        x = &cache.outputs.back();
    }
    return {cache.outputs.back(), std::move(cache)};
}

/// Gradients of the loss w.r.t. every learned parameter, given the gradient
/// of the loss w.r.t. the network output. Structure mirrors NetworkParams.
inline NetworkParams backward(const NetworkSpec& spec, const NetworkParams& params,
                              const ForwardCache& cache, const Tensor4& d_loss) {
    validate_network(spec);
    detail::check_params_shape(spec, params);
    if (cache.outputs.size() != spec.layers.size()) {
        raise(ErrorCode::StaleCache, "cache holds " + std::to_string(cache.outputs.size()) +
                                         " layer outputs, spec has " +
                                         std::to_string(spec.layers.size()));
    }
    if (!(d_loss.shape() == cache.outputs.back().shape())) {
        raise(ErrorCode::StaleCache, "loss gradient shape " + d_loss.shape().to_string() +
                                         " does not match network output " +
                                         cache.outputs.back().shape().to_string());
    }

    NetworkParams grads;
    grads.layers.resize(spec.layers.size());
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        grads.layers[i].weights.assign(params.layers[i].weights.size(), 0.0);
        grads.layers[i].biases.assign(params.layers[i].biases.size(), 0.0);
    }

    Tensor4 dy = d_loss;
    for (std::size_t ri = spec.layers.size(); ri-- > 0;) {
        const LayerSpec& layer = spec.layers[ri];
        const Tensor4& x = (ri == 0) ? cache.input : cache.outputs[ri - 1];
        if (!(dy.shape() == cache.outputs[ri].shape())) {
            raise(ErrorCode::StaleCache, "activation shapes disagree at layer " + std::to_string(ri));
        }
        Tensor4 dx(x.shape());
        switch (layer.kind) {
            case LayerKind::Conv:
                detail::conv_backward(x, dy, layer.conv, params.layers[ri], grads.layers[ri], dx);
                break;
            case LayerKind::MaxPool: {
                const auto& argmax = cache.pool_argmax[ri];
                if (argmax.size() != dy.size()) {
                    raise(ErrorCode::StaleCache, "pool cache missing at layer " + std::to_string(ri));
                }
                for (std::size_t e = 0; e < dy.size(); ++e) dx[argmax[e]] += dy[e];
                break;
            }
            case LayerKind::ReLU:
                for (std::size_t e = 0; e < dy.size(); ++e) dx[e] = x[e] > 0.0 ? dy[e] : 0.0;
                break;
            case LayerKind::CrossChannelNorm: {
                const auto& denoms = cache.norm_denom[ri];
                if (denoms.size() != dy.size()) {
                    raise(ErrorCode::StaleCache, "norm cache missing at layer " + std::to_string(ri));
                }
                const NormSpec& ns = layer.norm;
                const Shape4& s = x.shape();
                // dX_c = dY_c * d_c^-beta
                //        - 2*alpha*beta * a_c * sum_{j in window(c)} dY_j * a_j * d_j^(-beta-1)
                std::vector<double> t(s.depth);
                for (std::size_t b = 0; b < s.batch; ++b)
                    for (std::size_t h = 0; h < s.height; ++h)
                        for (std::size_t l = 0; l < s.length; ++l) {
                            for (std::size_t c = 0; c < s.depth; ++c) {
                                std::size_t idx = x.index(l, h, c, b);
                                t[c] = dy[idx] * x[idx] * std::pow(denoms[idx], -ns.beta - 1.0);
                            }
                            for (std::size_t c = 0; c < s.depth; ++c) {
                                std::size_t lo, hi;
                                detail::lrn_window(c, s.depth, ns.window, lo, hi);
                                double acc = 0.0;
                                for (std::size_t j = lo; j <= hi; ++j) acc += t[j];
                                std::size_t idx = x.index(l, h, c, b);
                                dx[idx] = dy[idx] * std::pow(denoms[idx], -ns.beta) -
                                          2.0 * ns.alpha * ns.beta * x[idx] * acc;
                            }
                        }
                break;
            }
            case LayerKind::Dropout: {
                const auto& mask = cache.dropout_mask[ri];
                if (mask.empty()) {
                    dx = dy; // Infer-mode cache: identity
                } else {
                    for (std::size_t e = 0; e < dy.size(); ++e) dx[e] = dy[e] * mask[e];
                }
                break;
            }
            case LayerKind::FullyConnected: {
                const Shape4& s = x.shape();
                std::size_t in_features = s.features();
                const LayerParams& p = params.layers[ri];
                LayerParams& g = grads.layers[ri];
                for (std::size_t b = 0; b < s.batch; ++b) {
                    const double* xb = x.data().data() + b * in_features;
                    double* dxb = dx.data().data() + b * in_features;
                    for (std::size_t o = 0; o < layer.output_size; ++o) {
                        double go = dy.at(o, 0, 0, b);
                        g.biases[o] += go;
                        double* gw = g.weights.data() + o * in_features;
                        const double* wo = p.weights.data() + o * in_features;
                        for (std::size_t k = 0; k < in_features; ++k) {
                            gw[k] += go * xb[k];
                            dxb[k] += go * wo[k];
                        }
                    }
                }
                break;
            }
            case LayerKind::Regression:
                dx = dy;
                break;
        }
        dy = std::move(dx);
    }
    return grads;
}

/// Mean-squared-error loss over every output element.
inline double mse_loss(const Tensor4& prediction, std::span<const double> targets) {
    if (targets.size() != prediction.size()) {
        raise(ErrorCode::ShapeMismatch, "prediction has " + std::to_string(prediction.size()) +
                                            " elements, targets " + std::to_string(targets.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        double e = prediction[i] - targets[i];
        acc += e * e;
    }
    return acc / static_cast<double>(targets.size());
}

/// Gradient of mse_loss w.r.t. the prediction tensor.
inline Tensor4 mse_loss_gradient(const Tensor4& prediction, std::span<const double> targets) {
    if (targets.size() != prediction.size()) {
        raise(ErrorCode::ShapeMismatch, "prediction has " + std::to_string(prediction.size()) +
                                            " elements, targets " + std::to_string(targets.size()));
    }
    Tensor4 g(prediction.shape());
    double scale = 2.0 / static_cast<double>(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        g[i] = scale * (prediction[i] - targets[i]);
    }
    return g;
}

struct TrainConfig {
    std::size_t max_epochs = 500;
    double target_mse = 0.0;
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 10;
    std::uint64_t seed = 0;

    void validate() const {
        if (max_epochs == 0) raise(ErrorCode::InvalidSpec, "max_epochs must be >= 1");
        if (target_mse < 0.0) raise(ErrorCode::InvalidSpec, "target_mse must be >= 0");
        if (learning_rate <= 0.0) raise(ErrorCode::InvalidSpec, "learning_rate must be > 0");
        if (momentum < 0.0 || momentum >= 1.0) raise(ErrorCode::InvalidSpec, "momentum must be in [0, 1)");
        if (batch_size == 0) raise(ErrorCode::InvalidSpec, "batch_size must be >= 1");
    }
};

enum class StopReason { TargetMseReached, MaxEpochsReached };

inline const char* to_string(StopReason r) {
    return r == StopReason::TargetMseReached ? "target-mse-reached" : "max-epochs-reached";
}

struct TrainReport {
    std::size_t epochs_run = 0;
    std::vector<double> mse_per_epoch; // full-set MSE after each epoch's updates
    StopReason stop_reason = StopReason::MaxEpochsReached;
};

/// Mini-batch gradient descent with momentum. Stops as soon as the end-of-epoch
/// MSE over the whole training set is <= target_mse, or after max_epochs,
/// whichever comes first. Deterministic in (spec, params, data, config).
inline std::pair<NetworkParams, TrainReport> train_network(const NetworkSpec& spec,
                                                           NetworkParams params,
                                                           const Tensor4& inputs,
                                                           std::span<const double> targets,
                                                           const TrainConfig& config) {
    validate_network(spec);
    config.validate();
    const std::size_t n = inputs.shape().batch;
    if (n == 0 || targets.empty()) raise(ErrorCode::EmptyDataset, "training set is empty");
    auto shapes = layer_output_shapes(spec);
    std::size_t out_per_sample = shapes.back().features();
    if (targets.size() != n * out_per_sample) {
        raise(ErrorCode::ShapeMismatch, "expected " + std::to_string(n * out_per_sample) +
                                            " target values, got " + std::to_string(targets.size()));
    }

    Rng rng(config.seed);
    NetworkParams velocity;
    velocity.layers.resize(params.layers.size());
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        velocity.layers[i].weights.assign(params.layers[i].weights.size(), 0.0);
        velocity.layers[i].biases.assign(params.layers[i].biases.size(), 0.0);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t sample_stride = inputs.shape().features();

    TrainReport report;
    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        shuffle(order, rng);
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            std::size_t count = std::min(config.batch_size, n - start);
            Shape4 bshape = inputs.shape();
            bshape.batch = count;
            Tensor4 bx(bshape);
            std::vector<double> by(count * out_per_sample);
            for (std::size_t k = 0; k < count; ++k) {
                std::size_t src = order[start + k];
                std::copy_n(inputs.data().begin() + src * sample_stride, sample_stride,
                            bx.data().begin() + k * sample_stride);
                std::copy_n(targets.begin() + src * out_per_sample, out_per_sample,
                            by.begin() + k * out_per_sample);
            }
            auto fwd = forward(spec, params, bx, RunMode::Train, rng.next_u64());
            Tensor4 dl = mse_loss_gradient(fwd.output, by);
            NetworkParams grads = backward(spec, params, fwd.cache, dl);
            for (std::size_t i = 0; i < params.layers.size(); ++i) {
                auto step = [&](std::vector<double>& p, std::vector<double>& v,
                                const std::vector<double>& g) {
                    for (std::size_t k = 0; k < p.size(); ++k) {
                        v[k] = config.momentum * v[k] - config.learning_rate * g[k];
                        p[k] += v[k];
                    }
                };
                step(params.layers[i].weights, velocity.layers[i].weights, grads.layers[i].weights);
                step(params.layers[i].biases, velocity.layers[i].biases, grads.layers[i].biases);
            }
        }
        double epoch_mse =
            mse_loss(forward(spec, params, inputs, RunMode::Infer).output, targets);
        if (!std::isfinite(epoch_mse)) {
            raise(ErrorCode::NonFinite, "training diverged at epoch " + std::to_string(epoch + 1));
        }
        report.mse_per_epoch.push_back(epoch_mse);
        report.epochs_run = epoch + 1;
        if (epoch_mse <= config.target_mse) {
            report.stop_reason = StopReason::TargetMseReached;
            return {std::move(params), std::move(report)};
        }
    }
    report.stop_reason = StopReason::MaxEpochsReached;
    return {std::move(params), std::move(report)};
}

/// Flattened activation of one layer on a batch, run in Infer mode (dropout
/// is the identity). Rows follow the batch order.
inline Matrix extract_features(const NetworkSpec& spec, const NetworkParams& params,
                               const Tensor4& input, std::size_t layer_index) {
    if (layer_index >= spec.layers.size()) {
        raise(ErrorCode::LayerOutOfRange, "layer index " + std::to_string(layer_index) +
                                              " out of range, network has " +
                                              std::to_string(spec.layers.size()) + " layers");
    }
    auto fwd = forward(spec, params, input, RunMode::Infer);
    return flatten(fwd.cache.outputs[layer_index]);
}

} // namespace ecf
