#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ecf/error.hpp"
#include "ecf/pipeline.hpp"

namespace ecf {

inline constexpr const char* kModelMagic = "ECFMODEL";
inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline LayerKind layer_kind_from_string(const std::string& s) {
    if (s == "conv") return LayerKind::Conv;
    if (s == "maxpool") return LayerKind::MaxPool;
    if (s == "relu") return LayerKind::ReLU;
    if (s == "norm") return LayerKind::CrossChannelNorm;
    if (s == "dropout") return LayerKind::Dropout;
    if (s == "fc") return LayerKind::FullyConnected;
    if (s == "regression") return LayerKind::Regression;
    raise(ErrorCode::CorruptFile, "unknown layer kind '" + s + "'");
}

inline nlohmann::json layer_to_json(const LayerSpec& layer) {
    nlohmann::json j;
    j["kind"] = to_string(layer.kind);
    j["name"] = layer.name;
    switch (layer.kind) {
        case LayerKind::Conv:
            j["filter_size"] = layer.conv.filter_size;
            j["filter_count"] = layer.conv.filter_count;
            j["padding"] = layer.conv.padding;
            j["stride"] = layer.conv.stride;
            break;
        case LayerKind::MaxPool:
            j["pool_stride"] = layer.pool_stride;
            break;
        case LayerKind::CrossChannelNorm:
            j["window"] = layer.norm.window;
            j["k"] = layer.norm.k;
            j["alpha"] = layer.norm.alpha;
            j["beta"] = layer.norm.beta;
            break;
        case LayerKind::Dropout:
            j["keep_probability"] = layer.keep_probability;
            break;
        case LayerKind::FullyConnected:
            j["output_size"] = layer.output_size;
            break;
        case LayerKind::ReLU:
        case LayerKind::Regression:
            break;
    }
    return j;
}

inline LayerSpec layer_from_json(const nlohmann::json& j) {
    LayerSpec layer;
    layer.kind = layer_kind_from_string(j.at("kind").get<std::string>());
    layer.name = j.at("name").get<std::string>();
    switch (layer.kind) {
        case LayerKind::Conv:
            layer.conv.filter_size = j.at("filter_size").get<std::size_t>();
            layer.conv.filter_count = j.at("filter_count").get<std::size_t>();
            layer.conv.padding = j.at("padding").get<std::size_t>();
            layer.conv.stride = j.at("stride").get<std::size_t>();
            break;
        case LayerKind::MaxPool:
            layer.pool_stride = j.at("pool_stride").get<std::size_t>();
            break;
        case LayerKind::CrossChannelNorm:
            layer.norm.window = j.at("window").get<std::size_t>();
            layer.norm.k = j.at("k").get<double>();
            layer.norm.alpha = j.at("alpha").get<double>();
            layer.norm.beta = j.at("beta").get<double>();
            break;
        case LayerKind::Dropout:
            layer.keep_probability = j.at("keep_probability").get<double>();
            break;
        case LayerKind::FullyConnected:
            layer.output_size = j.at("output_size").get<std::size_t>();
            break;
        case LayerKind::ReLU:
        case LayerKind::Regression:
            break;
    }
    return layer;
}

} // namespace detail

/// Writes the pipeline as a three-line text file: a magic/version line, one
/// self-describing JSON payload line (full-precision floats) and a trailing
/// checksum of the payload.
inline void save_model(const FittedPipeline& p, const std::string& path) {
    p.validate();
    nlohmann::json j;
    j["kind"] = to_string(p.kind);
    j["scaler"] = {{"factor_mean", p.scaler.factor_mean},
                   {"factor_sd", p.scaler.factor_sd},
                   {"target_mean", p.scaler.target_mean},
                   {"target_sd", p.scaler.target_sd}};
    if (p.network_spec.has_value()) {
        nlohmann::json net;
        net["input_shape"] = {p.network_spec->input_shape.length, p.network_spec->input_shape.height,
                              p.network_spec->input_shape.depth};
        net["layers"] = nlohmann::json::array();
        for (const auto& layer : p.network_spec->layers) {
            net["layers"].push_back(detail::layer_to_json(layer));
        }
        net["params"] = nlohmann::json::array();
        for (const auto& lp : p.network_params->layers) {
            net["params"].push_back({{"weights", lp.weights}, {"biases", lp.biases}});
        }
        j["network"] = std::move(net);
    } else {
        j["network"] = nullptr;
    }
    if (p.svr.has_value()) {
        j["svr"] = {{"weights", p.svr->weights},
                    {"bias", p.svr->bias},
                    {"dual_coefficients", p.svr->dual_coefficients},
                    {"converged", p.svr->converged},
                    {"sweeps_used", p.svr->sweeps_used}};
    } else {
        j["svr"] = nullptr;
    }
    if (p.extraction_layer.has_value()) {
        j["extraction_layer"] = *p.extraction_layer;
    } else {
        j["extraction_layer"] = nullptr;
    }

    std::string payload = j.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::ParseError, "cannot write '" + path + "'");
    out << kModelMagic << ' ' << kModelFormatVersion << '\n'
        << payload << '\n'
        << "checksum " << detail::hex64(detail::fnv1a64(payload)) << '\n';
}

inline FittedPipeline load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::CorruptFile, "cannot open '" + path + "'");
    std::string magic_line, payload, checksum_line;
    if (!std::getline(in, magic_line) || !std::getline(in, payload) ||
        !std::getline(in, checksum_line)) {
        raise(ErrorCode::CorruptFile, path + ": truncated model file");
    }

    std::string magic;
    int version = -1;
    {
        std::istringstream header(magic_line);
        header >> magic >> version;
        if (magic != kModelMagic) raise(ErrorCode::CorruptFile, path + ": not a model file");
        if (version != kModelFormatVersion) {
            raise(ErrorCode::VersionMismatch, path + ": file format version " +
                                                  std::to_string(version) +
                                                  ", this build reads version " +
                                                  std::to_string(kModelFormatVersion));
        }
    }
    {
        std::istringstream footer(checksum_line);
        std::string word, hex;
        footer >> word >> hex;
        if (word != "checksum" || hex != detail::hex64(detail::fnv1a64(payload))) {
            raise(ErrorCode::CorruptFile, path + ": checksum mismatch");
        }
    }

    nlohmann::json j = nlohmann::json::parse(payload, nullptr, false);
    if (j.is_discarded()) raise(ErrorCode::CorruptFile, path + ": payload is not valid JSON");

    try {
        FittedPipeline p;
        p.kind = parse_pipeline_kind(j.at("kind").get<std::string>());
        const auto& scaler = j.at("scaler");
        p.scaler.factor_mean = scaler.at("factor_mean").get<std::vector<double>>();
        p.scaler.factor_sd = scaler.at("factor_sd").get<std::vector<double>>();
        p.scaler.target_mean = scaler.at("target_mean").get<double>();
        p.scaler.target_sd = scaler.at("target_sd").get<double>();
        if (!j.at("network").is_null()) {
            const auto& net = j.at("network");
            NetworkSpec spec;
            spec.input_shape = {net.at("input_shape").at(0).get<std::size_t>(),
                                net.at("input_shape").at(1).get<std::size_t>(),
                                net.at("input_shape").at(2).get<std::size_t>(), 1};
            for (const auto& layer : net.at("layers")) {
                spec.layers.push_back(detail::layer_from_json(layer));
            }
            NetworkParams params;
            for (const auto& lp : net.at("params")) {
                params.layers.push_back({lp.at("weights").get<std::vector<double>>(),
                                         lp.at("biases").get<std::vector<double>>()});
            }
            validate_network(spec);
            if (params.layers.size() != spec.layers.size()) {
                raise(ErrorCode::CorruptFile, path + ": parameter count does not match layers");
            }
            p.network_spec = std::move(spec);
            p.network_params = std::move(params);
        }
        if (!j.at("svr").is_null()) {
            const auto& svr = j.at("svr");
            SvrModel model;
            model.weights = svr.at("weights").get<std::vector<double>>();
            model.bias = svr.at("bias").get<double>();
            model.dual_coefficients = svr.at("dual_coefficients").get<std::vector<double>>();
            model.converged = svr.at("converged").get<bool>();
            model.sweeps_used = svr.at("sweeps_used").get<std::size_t>();
            p.svr = std::move(model);
        }
        if (!j.at("extraction_layer").is_null()) {
            p.extraction_layer = j.at("extraction_layer").get<std::size_t>();
        }
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::CorruptFile, path + ": malformed payload (" + e.what() + ")");
    }
}

} // namespace ecf
