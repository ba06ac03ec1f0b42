#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tnm/common.hpp"
#include "tnm/dataset.hpp"
#include "tnm/tensor.hpp"

namespace tnm {

/// Node counts per level, input layer first. Each hidden node contracts
/// three adjacent nodes of the level below (stride 1), so every level
/// shrinks by two: 7 -> 5 -> 3 -> 1.
inline constexpr std::array<int, 4> kLayerNodeCounts{7, 5, 3, 1};
inline constexpr int kNumWeightLayers = 3;
inline constexpr int kArity = 3;

/// Fixed tree geometry; only the feature dimension d and bond dimension D vary.
struct Topology {
    int d = 3;
    int D = 8;

    /// Tensor shape (m,n,o,p) at weight layer 0..2:
    /// (D,d,d,d), (D,D,D,D), (d,D,D,D).
    std::array<int, 4> tensor_dims(int layer) const {
        switch (layer) {
            case 0: return {D, d, d, d};
            case 1: return {D, D, D, D};
            case 2: return {d, D, D, D};
        }
        throw Error("Topology::tensor_dims: layer out of range");
    }

    /// Number of tree nodes at weight layer 0..2 (5, 3, 1).
    static int nodes(int layer) { return kLayerNodeCounts[layer + 1]; }

    bool operator==(const Topology&) const = default;
};

/// Within-layer weight sharing: Homogeneous stores one tensor per layer,
/// Inhomogeneous one per node.
enum class ParamMode { Homogeneous, Inhomogeneous };

inline std::string to_string(ParamMode mode) {
    return mode == ParamMode::Homogeneous ? "homogeneous" : "inhomogeneous";
}

inline ParamMode param_mode_from_string(const std::string& s) {
    if (s == "homogeneous") return ParamMode::Homogeneous;
    if (s == "inhomogeneous") return ParamMode::Inhomogeneous;
    throw ConfigError("unknown parametrization mode '" + s + "'");
}

/// The tree tensor network model. Weights are stored per layer; in
/// Homogeneous mode each hidden layer holds a single shared tensor.
/// The scaler that standardized the training data travels with the
/// model so a saved file is self-contained for raw-unit forecasting.
struct TnmModel {
    Topology topology;
    ParamMode mode = ParamMode::Inhomogeneous;
    std::uint64_t seed = 0;
    std::vector<std::vector<WeightTensor4>> weights;  // [layer][stored tensor]
    Scaler scaler;

    int stored_count(int layer) const {
        return mode == ParamMode::Homogeneous ? 1 : Topology::nodes(layer);
    }
    /// Tensor applied at (layer, node), resolving weight tying.
    const WeightTensor4& weight(int layer, int node) const {
        return weights[layer][mode == ParamMode::Homogeneous ? 0 : node];
    }

    bool operator==(const TnmModel&) const = default;
};

/// Weights drawn i.i.d. uniform on [-s, s] with s = fan_in^{-1/2},
/// fan_in = product of the three contracted dimensions. Deterministic
/// given the seed.
inline TnmModel build_model(int d, int D, ParamMode mode, std::uint64_t seed) {
    if (d < 1 || D < 1) throw ConfigError("build_model: d and D must be >= 1");
    TnmModel model;
    model.topology = Topology{d, D};
    model.mode = mode;
    model.seed = seed;

    std::mt19937_64 rng(seed);
    model.weights.resize(kNumWeightLayers);
    for (int layer = 0; layer < kNumWeightLayers; ++layer) {
        const auto dims = model.topology.tensor_dims(layer);
        const double fan_in = static_cast<double>(dims[1]) * dims[2] * dims[3];
        const double bound = 1.0 / std::sqrt(fan_in);
        const int count = model.stored_count(layer);
        model.weights[layer].reserve(count);
        for (int t = 0; t < count; ++t) {
            WeightTensor4 w(dims[0], dims[1], dims[2], dims[3]);
            for (double& v : w.values) v = uniform_symmetric(rng, bound);
            model.weights[layer].push_back(std::move(w));
        }
    }
    return model;
}

/// Number of stored (learnable) parameters.
inline std::size_t param_count(const TnmModel& model) {
    std::size_t total = 0;
    for (const auto& layer : model.weights)
        for (const WeightTensor4& w : layer) total += w.size();
    return total;
}

/// Intermediates of one tree node, kept for the backward pass.
struct ContractionCache {
    std::array<FeatureVector, 3> inputs;
    FeatureVector pre_activation;
    FeatureVector post_activation;  // equals pre_activation at the output node
};

struct ForwardCache {
    std::array<std::vector<ContractionCache>, kNumWeightLayers> layers;
};

namespace detail {

inline FeatureVector forward_impl(const TnmModel& model,
                                  std::span<const FeatureVector> window,
                                  ForwardCache* cache) {
    if (static_cast<int>(window.size()) != kLayerNodeCounts[0])
        throw ShapeError("forward: window must contain " +
                         std::to_string(kLayerNodeCounts[0]) + " vectors, got " +
                         std::to_string(window.size()));
    for (const FeatureVector& v : window) {
        if (static_cast<int>(v.size()) != model.topology.d)
            throw ShapeError("forward: window vector has length " +
                             std::to_string(v.size()) + ", model expects d = " +
                             std::to_string(model.topology.d));
    }

    std::vector<FeatureVector> current(window.begin(), window.end());
    for (int layer = 0; layer < kNumWeightLayers; ++layer) {
        const int n_nodes = Topology::nodes(layer);
        const bool is_output = layer == kNumWeightLayers - 1;
        std::vector<FeatureVector> next(n_nodes);
        if (cache) cache->layers[layer].resize(n_nodes);
        for (int j = 0; j < n_nodes; ++j) {
            FeatureVector pre = contract3(model.weight(layer, j), current[j],
                                          current[j + 1], current[j + 2]);
            FeatureVector post = is_output ? pre : activation(pre);
            if (cache) {
                ContractionCache& cc = cache->layers[layer][j];
                cc.inputs = {current[j], current[j + 1], current[j + 2]};
                cc.pre_activation = pre;
                cc.post_activation = post;
            }
            next[j] = std::move(post);
        }
        current = std::move(next);
    }
    return std::move(current[0]);
}

}  // namespace detail

struct ForwardResult {
    FeatureVector prediction;
    ForwardCache cache;
};

/// Full forward pass: layers 1-2 contract + tanh, output layer contracts
/// with no activation. Returns the prediction and every node's intermediates.
inline ForwardResult forward(const TnmModel& model, std::span<const FeatureVector> window) {
    ForwardResult r;
    r.prediction = detail::forward_impl(model, window, &r.cache);
    return r;
}

/// Forward pass without cache, for evaluation loops.
inline FeatureVector predict(const TnmModel& model, std::span<const FeatureVector> window) {
    return detail::forward_impl(model, window, nullptr);
}

/// Weight gradients, mirroring the stored weight structure exactly
/// (Homogeneous: per-node gradients of a layer summed into one tensor).
struct ModelGradients {
    std::vector<std::vector<WeightTensor4>> layers;
};

inline ModelGradients zero_gradients(const TnmModel& model) {
    ModelGradients g;
    g.layers.resize(model.weights.size());
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        g.layers[l].reserve(model.weights[l].size());
        for (const WeightTensor4& w : model.weights[l])
            g.layers[l].emplace_back(w.dims[0], w.dims[1], w.dims[2], w.dims[3]);
    }
    return g;
}

namespace detail {

inline void check_cache(const TnmModel& model, const ForwardCache& cache) {
    for (int layer = 0; layer < kNumWeightLayers; ++layer) {
        if (static_cast<int>(cache.layers[layer].size()) != Topology::nodes(layer))
            throw Error("backward: cache does not match model topology");
        for (const ContractionCache& cc : cache.layers[layer]) {
            const WeightTensor4& w = model.weights[layer][0];
            if (static_cast<int>(cc.post_activation.size()) != w.m_dim() ||
                static_cast<int>(cc.inputs[0].size()) != w.n_dim())
                throw Error("backward: cache does not match model shapes");
        }
    }
}

}  // namespace detail

/// Reverse traversal of the tree. Hidden nodes multiply the upstream
/// gradient by the activation derivative; gradients flowing into a shared
/// node from overlapping parents are summed, and in Homogeneous mode the
/// per-node weight gradients of a layer accumulate into the shared tensor.
inline void accumulate_backward(const TnmModel& model, const ForwardCache& cache,
                                const FeatureVector& grad_prediction,
                                ModelGradients& into) {
    detail::check_cache(model, cache);
    if (static_cast<int>(grad_prediction.size()) != model.topology.d)
        throw ShapeError("backward: grad_prediction has length " +
                         std::to_string(grad_prediction.size()) + ", expected d = " +
                         std::to_string(model.topology.d));

    // Upstream gradients w.r.t. each node's post-activation output.
    std::array<std::vector<FeatureVector>, kNumWeightLayers> node_grads;
    for (int layer = 0; layer < kNumWeightLayers; ++layer) {
        node_grads[layer].assign(Topology::nodes(layer),
                                 FeatureVector(model.weights[layer][0].m_dim(), 0.0));
    }
    node_grads[kNumWeightLayers - 1][0] = grad_prediction;

    for (int layer = kNumWeightLayers - 1; layer >= 0; --layer) {
        const bool is_output = layer == kNumWeightLayers - 1;
        const bool propagate = layer > 0;
        for (int j = 0; j < Topology::nodes(layer); ++j) {
            const ContractionCache& cc = cache.layers[layer][j];
            FeatureVector upstream = node_grads[layer][j];
            if (!is_output) {
                const FeatureVector deriv = activation_derivative(cc.post_activation);
                for (std::size_t i = 0; i < upstream.size(); ++i) upstream[i] *= deriv[i];
            }
            WeightTensor4& gw =
                into.layers[layer][model.mode == ParamMode::Homogeneous ? 0 : j];
            FeatureVector* g0 = propagate ? &node_grads[layer - 1][j] : nullptr;
            FeatureVector* g1 = propagate ? &node_grads[layer - 1][j + 1] : nullptr;
            FeatureVector* g2 = propagate ? &node_grads[layer - 1][j + 2] : nullptr;
            detail::contract3_backward_acc(model.weight(layer, j), cc.inputs[0],
                                           cc.inputs[1], cc.inputs[2], upstream, &gw,
                                           g0, g1, g2);
        }
    }
}

inline ModelGradients backward(const TnmModel& model, const ForwardCache& cache,
                               const FeatureVector& grad_prediction) {
    ModelGradients g = zero_gradients(model);
    accumulate_backward(model, cache, grad_prediction, g);
    return g;
}

// Conversions between phase-space states and model feature vectors.

inline FeatureVector to_feature(const State3& s) { return {s.x, s.y, s.z}; }

inline State3 to_state(const FeatureVector& v) {
    if (v.size() != 3)
        throw ShapeError("to_state: expected length 3, got " + std::to_string(v.size()));
    return {v[0], v[1], v[2]};
}

inline std::array<FeatureVector, kWindowLength> to_features(const WindowPair& p) {
    std::array<FeatureVector, kWindowLength> out;
    for (int j = 0; j < kWindowLength; ++j) out[j] = to_feature(p.window[j]);
    return out;
}

// Model persistence: a single JSON document, format_version 1. Weight
// values are written with 17 significant digits so the round trip is
// bit-exact.

inline constexpr int kModelFormatVersion = 1;

inline std::string serialize(const TnmModel& model) {
    for (const auto& layer : model.weights)
        for (const WeightTensor4& w : layer)
            for (double v : w.values)
                if (!is_finite(v)) throw Error("serialize: non-finite weight value");

    std::ostringstream os;
    os << "{\n";
    os << "  \"format_version\": " << kModelFormatVersion << ",\n";
    os << "  \"kind\": \"tnm\",\n";
    os << "  \"d\": " << model.topology.d << ",\n";
    os << "  \"D\": " << model.topology.D << ",\n";
    os << "  \"mode\": \"" << to_string(model.mode) << "\",\n";
    os << "  \"seed\": " << model.seed << ",\n";
    auto triple = [&os](const std::array<double, 3>& v) {
        os << '[' << format_double(v[0]) << ", " << format_double(v[1]) << ", "
           << format_double(v[2]) << ']';
    };
    os << "  \"scaler\": {\"mean\": ";
    triple(model.scaler.mean);
    os << ", \"std\": ";
    triple(model.scaler.std);
    os << "},\n";
    os << "  \"layers\": [\n";
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        os << "    [\n";
        for (std::size_t t = 0; t < model.weights[l].size(); ++t) {
            const WeightTensor4& w = model.weights[l][t];
            os << "      {\"dims\": [" << w.dims[0] << ", " << w.dims[1] << ", "
               << w.dims[2] << ", " << w.dims[3] << "], \"values\": [";
            for (std::size_t i = 0; i < w.values.size(); ++i) {
                if (i) os << ", ";
                os << format_double(w.values[i]);
            }
            os << "]}" << (t + 1 < model.weights[l].size() ? "," : "") << '\n';
        }
        os << "    ]" << (l + 1 < model.weights.size() ? "," : "") << '\n';
    }
    os << "  ]\n}\n";
    return os.str();
}

namespace detail {
inline TnmModel deserialize_checked(const nlohmann::json& j);
}  // namespace detail

inline TnmModel deserialize(const std::string& document) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(document);
    } catch (const nlohmann::json::exception& e) {
        throw SerializationError(std::string("model document is not valid JSON: ") + e.what());
    }
    try {
        return detail::deserialize_checked(j);
    } catch (const nlohmann::json::exception& e) {
        throw SerializationError(std::string("model document is malformed: ") + e.what());
    }
}

inline TnmModel detail::deserialize_checked(const nlohmann::json& j) {
    if (!j.is_object()) throw SerializationError("model document must be a JSON object");

    for (const auto& [key, _] : j.items()) {
        static const std::array<std::string, 8> allowed{
            "format_version", "kind", "d", "D", "mode", "seed", "scaler", "layers"};
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw SerializationError("model document has unknown key '" + key + "'");
    }
    for (const char* key : {"format_version", "kind", "d", "D", "mode", "seed",
                            "scaler", "layers"}) {
        if (!j.contains(key))
            throw SerializationError(std::string("model document missing key '") + key + "'");
    }

    if (!j["format_version"].is_number_integer() ||
        j["format_version"].get<int>() != kModelFormatVersion)
        throw SerializationError("unsupported model format_version (expected " +
                                 std::to_string(kModelFormatVersion) + ")");
    if (j["kind"].get<std::string>() != "tnm")
        throw SerializationError("model document kind must be 'tnm'");

    TnmModel model;
    model.topology.d = j["d"].get<int>();
    model.topology.D = j["D"].get<int>();
    if (model.topology.d < 1 || model.topology.D < 1)
        throw SerializationError("model dimensions must be positive");
    model.mode = param_mode_from_string(j["mode"].get<std::string>());
    model.seed = j["seed"].get<std::uint64_t>();

    const auto& sc = j["scaler"];
    if (!sc.is_object() || !sc.contains("mean") || !sc.contains("std") ||
        sc["mean"].size() != 3 || sc["std"].size() != 3)
        throw SerializationError("model scaler must hold 3-vectors 'mean' and 'std'");
    for (int i = 0; i < 3; ++i) {
        model.scaler.mean[i] = sc["mean"][i].get<double>();
        model.scaler.std[i] = sc["std"][i].get<double>();
        if (!is_finite(model.scaler.mean[i]) || !is_finite(model.scaler.std[i]) ||
            model.scaler.std[i] <= 0.0)
            throw SerializationError("model scaler values must be finite with std > 0");
    }

    const auto& layers = j["layers"];
    if (!layers.is_array() || layers.size() != kNumWeightLayers)
        throw SerializationError("model must hold exactly " +
                                 std::to_string(kNumWeightLayers) + " weight layers");
    model.weights.resize(kNumWeightLayers);
    for (int l = 0; l < kNumWeightLayers; ++l) {
        const auto& layer = layers[l];
        const int expected_count = model.stored_count(l);
        if (!layer.is_array() || static_cast<int>(layer.size()) != expected_count)
            throw SerializationError("layer " + std::to_string(l + 1) + " must hold " +
                                     std::to_string(expected_count) + " tensors");
        const auto expected_dims = model.topology.tensor_dims(l);
        for (const auto& tj : layer) {
            if (!tj.is_object() || !tj.contains("dims") || !tj.contains("values"))
                throw SerializationError("weight tensor entries need 'dims' and 'values'");
            const auto& dims = tj["dims"];
            if (dims.size() != 4)
                throw SerializationError("weight tensor dims must have 4 entries");
            WeightTensor4 w;
            std::size_t product = 1;
            for (int i = 0; i < 4; ++i) {
                w.dims[i] = dims[i].get<int>();
                if (w.dims[i] < 1)
                    throw SerializationError("weight tensor dims must be positive");
                if (w.dims[i] != expected_dims[i])
                    throw SerializationError(
                        "weight tensor shape does not match topology at layer " +
                        std::to_string(l + 1));
                product *= static_cast<std::size_t>(w.dims[i]);
            }
            const auto& values = tj["values"];
            if (!values.is_array() || values.size() != product)
                throw SerializationError(
                    "weight tensor value count does not match dims product");
            w.values.reserve(product);
            for (const auto& v : values) {
                const double x = v.get<double>();
                if (!is_finite(x))
                    throw SerializationError("weight tensor holds a non-finite value");
                w.values.push_back(x);
            }
            model.weights[l].push_back(std::move(w));
        }
    }
    return model;
}

inline void save_model(const TnmModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("save_model: cannot open " + path);
    out << serialize(model);
    if (!out) throw Error("save_model: write failed for " + path);
}

inline TnmModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("load_model: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize(buf.str());
}

}  // namespace tnm
