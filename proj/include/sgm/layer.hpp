#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sgm/error.hpp"
#include "sgm/partition.hpp"
#include "sgm/rng.hpp"
#include "sgm/tensor.hpp"

#include <json.hpp>

// The structured graph layer: one masked temporal aggregation per subgraph,
// each with its own per-frame channel transform, fused by summation or by
// channel concatenation plus a linear projection.
//
// Two ways of producing edge weights:
//   Transductive: one learnable T x T adjacency per subgraph, shared by all
//   samples. Entries outside the subgraph mask never reach the output and
//   keep exactly-zero gradients.
//   Inductive: additive attention over frame features recomputed per sample;
//   scores are masked-softmax-normalized within each subgraph.
//
// Parameters are immutable during forward; updates need exclusive access.

namespace sgm {

enum class Paradigm { Transductive, Inductive };
enum class FusionMode { Sum, ConcatConv };

inline std::string paradigm_name(Paradigm p) {
    return p == Paradigm::Transductive ? "transductive" : "inductive";
}

inline Paradigm parse_paradigm(const std::string& s) {
    if (s == "transductive") return Paradigm::Transductive;
    if (s == "inductive") return Paradigm::Inductive;
    throw ParamError("parse_paradigm: unknown paradigm '" + s + "'");
}

inline std::string fusion_name(FusionMode f) { return f == FusionMode::Sum ? "sum" : "concat"; }

inline FusionMode parse_fusion(const std::string& s) {
    if (s == "sum") return FusionMode::Sum;
    if (s == "concat" || s == "concat-conv") return FusionMode::ConcatConv;
    throw ParamError("parse_fusion: unknown fusion mode '" + s + "'");
}

constexpr double kAttentionLeakySlope = 0.2;

struct SgmLayer {
    EdgeMaskSet masks;
    Paradigm paradigm = Paradigm::Transductive;
    FusionMode fusion = FusionMode::Sum;
    int c_in = 0;
    int c_out = 0;

    std::vector<Tensor> adjacency;       // transductive: raw T x T weights per subgraph
    std::vector<Tensor> attention;       // inductive: score vector over 2*c_out features
    std::vector<Tensor> channel_weights; // c_in x c_out per subgraph
    Tensor concat_proj;                  // (n*c_out) x c_out, ConcatConv only

    int num_subgraphs() const { return masks.count(); }

    // Stable name -> tensor listing; iteration order defines serialization
    // and optimizer order.
    std::vector<std::pair<std::string, Tensor>> parameters() const {
        std::vector<std::pair<std::string, Tensor>> out;
        for (std::size_t k = 0; k < channel_weights.size(); ++k) {
            if (paradigm == Paradigm::Transductive)
                out.emplace_back("adjacency." + std::to_string(k), adjacency[k]);
            else
                out.emplace_back("attention." + std::to_string(k), attention[k]);
            out.emplace_back("channel_weights." + std::to_string(k), channel_weights[k]);
        }
        if (fusion == FusionMode::ConcatConv) out.emplace_back("concat_proj", concat_proj);
        return out;
    }
};

// Adjacency rows start as a uniform average over each subgraph's in-neighbor
// set (empty rows stay zero); channel transforms use a symmetric uniform
// fan-in/fan-out range; attention vectors start small and uniform.
inline SgmLayer init_layer(const EdgeMaskSet& masks, int c_in, int c_out, Paradigm paradigm,
                           FusionMode fusion, std::uint64_t seed) {
    if (c_in < 1 || c_out < 1)
        throw ParamError("init_layer: channel counts must be >= 1, got " + std::to_string(c_in) +
                         " and " + std::to_string(c_out));
    SgmLayer layer;
    layer.masks = masks;
    layer.paradigm = paradigm;
    layer.fusion = fusion;
    layer.c_in = c_in;
    layer.c_out = c_out;

    Rng rng(seed);
    const int t = masks.T;
    const int n = masks.count();

    if (paradigm == Paradigm::Transductive) {
        for (int k = 0; k < n; ++k) {
            Tensor a = Tensor::zeros({t, t}, true);
            for (int i = 0; i < t; ++i) {
                const int deg = masks.masks[k].row_count(i);
                if (deg == 0) continue;
                const double w = 1.0 / deg;
                for (int j = 0; j < t; ++j)
                    if (masks.masks[k].at(i, j)) a.data()[static_cast<std::size_t>(i) * t + j] = w;
            }
            layer.adjacency.push_back(a);
        }
    }

    const double wb = std::sqrt(6.0 / (c_in + c_out));
    for (int k = 0; k < n; ++k)
        layer.channel_weights.push_back(Tensor::uniform({c_in, c_out}, -wb, wb, rng, true));

    if (paradigm == Paradigm::Inductive)
        for (int k = 0; k < n; ++k)
            layer.attention.push_back(Tensor::uniform({2 * c_out}, -0.1, 0.1, rng, true));

    if (fusion == FusionMode::ConcatConv) {
        const double pb = std::sqrt(6.0 / (n * c_out + c_out));
        layer.concat_proj = Tensor::uniform({n * c_out, c_out}, -pb, pb, rng, true);
    }
    return layer;
}

inline void check_subgraph_index(const SgmLayer& layer, int k) {
    if (k < 0 || k >= layer.num_subgraphs())
        throw IndexError("subgraph index " + std::to_string(k) + " outside [0, " +
                         std::to_string(layer.num_subgraphs()) + ")");
}

// Raw learnable weights gated by the subgraph mask.
inline Tensor transductive_adjacency(const SgmLayer& layer, int k) {
    if (layer.paradigm != Paradigm::Transductive)
        throw ParadigmError("transductive_adjacency: layer is inductive");
    check_subgraph_index(layer, k);
    return apply_mask(layer.adjacency[k], layer.masks.masks[k].cells);
}

// Additive attention: score(i, j) = leaky_relu(a . [W x_i || W x_j]),
// normalized by masked softmax within the subgraph's rows.
inline Tensor inductive_adjacency(const SgmLayer& layer, const Tensor& x, int k) {
    if (layer.paradigm != Paradigm::Inductive)
        throw ParadigmError("inductive_adjacency: layer is transductive");
    check_subgraph_index(layer, k);
    if (x.dim() != 2 || x.extent(0) != layer.masks.T || x.extent(1) != layer.c_in)
        throw ShapeError("inductive_adjacency: input " + shape_str(x.shape()) + ", expected [" +
                         std::to_string(layer.masks.T) + "x" + std::to_string(layer.c_in) + "]");
    const Tensor h = matmul(x, layer.channel_weights[k]);
    const Tensor a_self = slice_vec(layer.attention[k], 0, layer.c_out);
    const Tensor a_neigh = slice_vec(layer.attention[k], layer.c_out, layer.c_out);
    const Tensor scores = leaky_relu(outer_sum(matvec(h, a_self), matvec(h, a_neigh)),
                                     kAttentionLeakySlope);
    return masked_softmax_rows(scores, layer.masks.masks[k].cells);
}

// y = relu(A_k (x W_k)) for one subgraph.
inline Tensor subgraph_reason(const SgmLayer& layer, const Tensor& x, int k) {
    check_subgraph_index(layer, k);
    if (x.dim() != 2 || x.extent(0) != layer.masks.T)
        throw ShapeError("subgraph_reason: input " + shape_str(x.shape()) + " does not have " +
                         std::to_string(layer.masks.T) + " frames");
    if (x.extent(1) != layer.c_in)
        throw ShapeError("subgraph_reason: input " + shape_str(x.shape()) + " does not match c_in = " +
                         std::to_string(layer.c_in));
    const Tensor adj = layer.paradigm == Paradigm::Transductive ? transductive_adjacency(layer, k)
                                                                : inductive_adjacency(layer, x, k);
    return relu(matmul(adj, matmul(x, layer.channel_weights[k])));
}

// Single-sample forward: fuses all subgraph results at each time step.
inline Tensor forward_frames(const SgmLayer& layer, const Tensor& x) {
    const int n = layer.num_subgraphs();
    std::vector<Tensor> branches;
    branches.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) branches.push_back(subgraph_reason(layer, x, k));
    if (layer.fusion == FusionMode::Sum) {
        Tensor out = branches[0];
        for (int k = 1; k < n; ++k) out = add(out, branches[k]);
        return out;
    }
    return matmul(concat_last_dim(branches), layer.concat_proj);
}

// Batched forward over [B x T x c_in]; sample b's output depends only on
// x[b] and the layer parameters.
inline Tensor forward(const SgmLayer& layer, const Tensor& batch) {
    if (batch.dim() != 3)
        throw ShapeError("forward: expected [B x T x C] input, got " + shape_str(batch.shape()));
    if (batch.extent(2) != layer.c_in)
        throw ShapeError("forward: channel extent " + std::to_string(batch.extent(2)) +
                         " does not match c_in = " + std::to_string(layer.c_in));
    const int b = batch.extent(0);
    if (b < 1) throw ShapeError("forward: empty batch");
    std::vector<Tensor> outs;
    outs.reserve(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) outs.push_back(forward_frames(layer, slice_first(batch, i)));
    return stack_first(outs);
}

// --------------------------------------------------------------------------
// Inspection and serialization
// --------------------------------------------------------------------------

// Masked adjacency matrices of a transductive layer as a JSON document.
// Masked-out cells serialize as exact 0.0.
inline nlohmann::ordered_json export_adjacency(const SgmLayer& layer, const std::string& layer_id) {
    if (layer.paradigm != Paradigm::Transductive)
        throw ParadigmError("export_adjacency: layer is inductive; per-sample matrices are not dumped");
    nlohmann::ordered_json doc;
    doc["layer"] = layer_id;
    doc["frames"] = layer.masks.T;
    doc["scheme"] = layer.masks.scheme.name();
    doc["subgraphs"] = nlohmann::ordered_json::array();
    const int t = layer.masks.T;
    for (int k = 0; k < layer.num_subgraphs(); ++k) {
        nlohmann::ordered_json sub;
        sub["name"] = layer.masks.names[k];
        auto rows = nlohmann::ordered_json::array();
        for (int i = 0; i < t; ++i) {
            auto row = nlohmann::ordered_json::array();
            for (int j = 0; j < t; ++j)
                row.push_back(layer.masks.masks[k].at(i, j)
                                  ? layer.adjacency[k].data()[static_cast<std::size_t>(i) * t + j]
                                  : 0.0);
            rows.push_back(row);
        }
        sub["adjacency"] = rows;
        doc["subgraphs"].push_back(sub);
    }
    return doc;
}

inline nlohmann::ordered_json tensor_to_json(const Tensor& t) {
    nlohmann::ordered_json j;
    j["shape"] = t.shape();
    j["data"] = t.data();
    return j;
}

inline Tensor tensor_from_json(const nlohmann::ordered_json& j, bool requires_grad) {
    Shape shape = j.at("shape").get<Shape>();
    std::vector<double> data = j.at("data").get<std::vector<double>>();
    return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

inline nlohmann::ordered_json layer_to_json(const SgmLayer& layer) {
    nlohmann::ordered_json doc;
    doc["scheme"] = layer.masks.scheme.name();
    doc["frames"] = layer.masks.T;
    doc["tau"] = layer.masks.tau;
    doc["paradigm"] = paradigm_name(layer.paradigm);
    doc["fusion"] = fusion_name(layer.fusion);
    doc["c_in"] = layer.c_in;
    doc["c_out"] = layer.c_out;
    doc["params"] = nlohmann::ordered_json::object();
    for (const auto& [name, tensor] : layer.parameters()) doc["params"][name] = tensor_to_json(tensor);
    return doc;
}

inline SgmLayer layer_from_json(const nlohmann::ordered_json& doc) {
    const int t = doc.at("frames").get<int>();
    const TemporalThreshold tau{doc.at("tau").get<int>()};
    const PartitionScheme scheme = parse_scheme(doc.at("scheme").get<std::string>());
    SgmLayer layer;
    layer.masks = build_masks(t, tau, scheme);
    layer.paradigm = parse_paradigm(doc.at("paradigm").get<std::string>());
    layer.fusion = parse_fusion(doc.at("fusion").get<std::string>());
    layer.c_in = doc.at("c_in").get<int>();
    layer.c_out = doc.at("c_out").get<int>();
    const auto& params = doc.at("params");
    const int n = layer.num_subgraphs();
    for (int k = 0; k < n; ++k) {
        if (layer.paradigm == Paradigm::Transductive)
            layer.adjacency.push_back(
                tensor_from_json(params.at("adjacency." + std::to_string(k)), true));
        else
            layer.attention.push_back(
                tensor_from_json(params.at("attention." + std::to_string(k)), true));
        layer.channel_weights.push_back(
            tensor_from_json(params.at("channel_weights." + std::to_string(k)), true));
    }
    if (layer.fusion == FusionMode::ConcatConv)
        layer.concat_proj = tensor_from_json(params.at("concat_proj"), true);
    return layer;
}

} // namespace sgm
