#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ecf/dataio.hpp"
#include "ecf/error.hpp"
#include "ecf/metrics.hpp"
#include "ecf/network.hpp"
#include "ecf/svr.hpp"
#include "ecf/tensor.hpp"

namespace ecf {

enum class PipelineKind { RcnnOnly, SvrOnly, RcnnSvr };

inline const char* to_string(PipelineKind kind) {
    switch (kind) {
        case PipelineKind::RcnnOnly: return "rcnn";
        case PipelineKind::SvrOnly: return "svr";
        case PipelineKind::RcnnSvr: return "rcnn-svr";
    }
    return "unknown";
}

inline PipelineKind parse_pipeline_kind(const std::string& text) {
    if (text == "rcnn") return PipelineKind::RcnnOnly;
    if (text == "svr") return PipelineKind::SvrOnly;
    if (text == "rcnn-svr") return PipelineKind::RcnnSvr;
    raise(ErrorCode::ParseError, "unknown pipeline kind '" + text + "'");
}

/// The eight-layer regressive network: two convolution stages over the factor
/// axis, ReLU and cross-channel normalization after the first, a fully
/// connected layer on the flattened maps, and an identity regression output.
inline NetworkSpec build_rcnn_spec(std::size_t input_length = 8) {
    if (input_length < 4) {
        raise(ErrorCode::InputTooShort,
              "input length " + std::to_string(input_length) + " < 4; two pooling stages need >= 4");
    }
    NetworkSpec spec;
    spec.input_shape = {input_length, 1, 1, 1};
    spec.layers = {
        LayerSpec::convolution("conv1", {1, 25, 0, 1}),
        LayerSpec::relu("relu1"),
        LayerSpec::cross_channel_norm("norm1"),
        LayerSpec::max_pool("maxpool1", 2),
        LayerSpec::convolution("conv2", {1, 25, 0, 1}),
        LayerSpec::max_pool("maxpool2", 2),
        LayerSpec::fully_connected("fc1", 1),
        LayerSpec::regression("regression"),
    };
    validate_network(spec);
    return spec;
}

/// The extended feature-extraction network: three convolution/pool stages
/// (20, 25 and 50 filters) plus dropout, with a temporary fully-connected and
/// regression head used only while training. Features are taken from the
/// dropout layer by default; the head is never part of extraction.
inline NetworkSpec build_rcnn_svr_spec(std::size_t input_length = 8) {
    if (input_length < 8) {
        raise(ErrorCode::InputTooShort,
              "input length " + std::to_string(input_length) + " < 8; three pooling stages need >= 8");
    }
    NetworkSpec spec;
    spec.input_shape = {input_length, 1, 1, 1};
    spec.layers = {
        LayerSpec::convolution("conv1", {1, 20, 0, 1}),
        LayerSpec::relu("relu1"),
        LayerSpec::cross_channel_norm("norm1"),
        LayerSpec::max_pool("maxpool1", 2),
        LayerSpec::convolution("conv2", {1, 25, 0, 1}),
        LayerSpec::max_pool("maxpool2", 2),
        LayerSpec::convolution("conv3", {1, 50, 0, 1}),
        LayerSpec::max_pool("maxpool3", 2),
        LayerSpec::dropout("dropout1", 0.5),
        LayerSpec::fully_connected("fc1", 1),
        LayerSpec::regression("regression"),
    };
    validate_network(spec);
    return spec;
}

/// Index of the dropout layer, the default extraction point.
inline std::size_t default_extraction_layer(const NetworkSpec& spec) {
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        if (spec.layers[i].kind == LayerKind::Dropout) return i;
    }
    raise(ErrorCode::InvalidExtractionLayer, "network has no dropout layer");
}

/// Index of the first head layer (the fully-connected layer); extraction is
/// legal strictly before it.
inline std::size_t head_start_index(const NetworkSpec& spec) {
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        if (spec.layers[i].kind == LayerKind::FullyConnected) return i;
    }
    return spec.layers.size();
}

/// A trained model of any of the three kinds, plus the training-set scaler
/// every prediction must pass through.
struct FittedPipeline {
    PipelineKind kind = PipelineKind::SvrOnly;
    std::optional<NetworkSpec> network_spec;
    std::optional<NetworkParams> network_params;
    std::optional<SvrModel> svr;
    std::optional<std::size_t> extraction_layer;
    StandardizationStats scaler;
    TrainReport train_report; // empty for SvrOnly

    void validate() const {
        bool has_net = network_spec.has_value() && network_params.has_value();
        switch (kind) {
            case PipelineKind::RcnnOnly:
                if (!has_net || svr.has_value() || extraction_layer.has_value()) {
                    raise(ErrorCode::InvalidSpec, "rcnn pipeline must hold a network only");
                }
                break;
            case PipelineKind::SvrOnly:
                if (has_net || !svr.has_value() || extraction_layer.has_value()) {
                    raise(ErrorCode::InvalidSpec, "svr pipeline must hold an SVR model only");
                }
                break;
            case PipelineKind::RcnnSvr:
                if (!has_net || !svr.has_value() || !extraction_layer.has_value()) {
                    raise(ErrorCode::InvalidSpec,
                          "rcnn-svr pipeline needs network, SVR and extraction layer");
                }
                break;
        }
    }
};

/// Factor matrix as network input: one sample per batch slot, factor axis as
/// length, height and depth 1.
inline Tensor4 factors_to_tensor(const Matrix& factors) {
    Tensor4 t({factors.cols, 1, 1, factors.rows});
    t.data() = factors.values;
    return t;
}

/// Trains the requested pipeline on the given training rows. Standardization
/// stats are computed here, from these rows only.
inline FittedPipeline fit_pipeline(PipelineKind kind, const Dataset& train,
                                   const TrainConfig& train_config, const SvrHyperparams& svr_hp,
                                   std::optional<std::size_t> extraction_layer = std::nullopt) {
    train.validate();
    if (!train.has_targets()) raise(ErrorCode::EmptyDataset, "training data has no targets");
    if (extraction_layer.has_value() && kind != PipelineKind::RcnnSvr) {
        raise(ErrorCode::InvalidExtractionLayer,
              "extraction layer is only meaningful for the rcnn-svr pipeline");
    }

    FittedPipeline p;
    p.kind = kind;
    auto [stats, std_train] = standardize(train);
    p.scaler = stats;
    Tensor4 inputs = factors_to_tensor(std_train.factors);

    switch (kind) {
        case PipelineKind::RcnnOnly: {
            NetworkSpec spec = build_rcnn_spec(train.factors.cols);
            NetworkParams params = init_network(spec, train_config.seed);
            auto [trained, report] = train_network(spec, std::move(params), inputs,
                                                   std_train.targets, train_config);
            p.network_spec = std::move(spec);
            p.network_params = std::move(trained);
            p.train_report = std::move(report);
            break;
        }
        case PipelineKind::SvrOnly: {
            p.svr = fit_svr(std_train.factors, std_train.targets, svr_hp);
            break;
        }
        case PipelineKind::RcnnSvr: {
            NetworkSpec spec = build_rcnn_svr_spec(train.factors.cols);
            std::size_t layer = extraction_layer.value_or(default_extraction_layer(spec));
            if (layer >= head_start_index(spec)) {
                raise(ErrorCode::InvalidExtractionLayer,
                      "layer " + std::to_string(layer) + " is part of the removed head; extraction "
                      "must use a layer before index " + std::to_string(head_start_index(spec)));
            }
            NetworkParams params = init_network(spec, train_config.seed);
            auto [trained, report] = train_network(spec, std::move(params), inputs,
                                                   std_train.targets, train_config);
            Matrix features = extract_features(spec, trained, inputs, layer);
            p.svr = fit_svr(features, std_train.targets, svr_hp);
            p.network_spec = std::move(spec);
            p.network_params = std::move(trained);
            p.extraction_layer = layer;
            p.train_report = std::move(report);
            break;
        }
    }
    p.validate();
    return p;
}

/// Predictions in original target units for raw factor rows.
inline std::vector<double> predict_pipeline(const FittedPipeline& p, const Matrix& factors) {
    p.validate();
    if (factors.cols != p.scaler.factor_mean.size()) {
        raise(ErrorCode::DimensionMismatch, "pipeline was trained on " +
                                                std::to_string(p.scaler.factor_mean.size()) +
                                                " factors, got " + std::to_string(factors.cols));
    }
    Matrix std_factors = standardize_factors(p.scaler, factors);
    std::vector<double> standardized;
    switch (p.kind) {
        case PipelineKind::RcnnOnly: {
            Tensor4 out = forward(*p.network_spec, *p.network_params,
                                  factors_to_tensor(std_factors), RunMode::Infer)
                              .output;
            standardized = out.data();
            break;
        }
        case PipelineKind::SvrOnly: {
            standardized = predict_svr(*p.svr, std_factors);
            break;
        }
        case PipelineKind::RcnnSvr: {
            Matrix features = extract_features(*p.network_spec, *p.network_params,
                                               factors_to_tensor(std_factors), *p.extraction_layer);
            standardized = predict_svr(*p.svr, features);
            break;
        }
    }
    return destandardize_targets(p.scaler, standardized);
}

struct LayerSweepEntry {
    std::size_t layer_index = 0;
    std::string layer_name;
    double test_mse = 0.0;
};

/// Trains the extended network once, then refits the SVR on features from
/// each layer ahead of the head and reports held-out MSE (original units) per
/// extraction point. Entries differ in nothing but the extraction layer.
inline std::vector<LayerSweepEntry> layer_sweep(const Dataset& data, const SplitSpec& split_spec,
                                                const TrainConfig& train_config,
                                                const SvrHyperparams& svr_hp) {
    auto [train_set, test_set] = split(data, split_spec);
    auto [stats, std_train] = standardize(train_set);
    Tensor4 inputs = factors_to_tensor(std_train.factors);

    NetworkSpec spec = build_rcnn_svr_spec(train_set.factors.cols);
    NetworkParams params = init_network(spec, train_config.seed);
    auto [trained, report] = train_network(spec, std::move(params), inputs, std_train.targets,
                                           train_config);
    (void)report;

    Matrix test_factors = standardize_factors(stats, test_set.factors);
    Tensor4 test_inputs = factors_to_tensor(test_factors);

    std::vector<LayerSweepEntry> entries;
    std::size_t head = head_start_index(spec);
    for (std::size_t layer = 0; layer < head; ++layer) {
        Matrix train_features = extract_features(spec, trained, inputs, layer);
        SvrModel model = fit_svr(train_features, std_train.targets, svr_hp);
        Matrix test_features = extract_features(spec, trained, test_inputs, layer);
        std::vector<double> predictions =
            destandardize_targets(stats, predict_svr(model, test_features));
        entries.push_back({layer, spec.layers[layer].name, mse(test_set.targets, predictions)});
    }
    return entries;
}

} // namespace ecf
