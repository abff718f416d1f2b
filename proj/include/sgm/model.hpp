#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sgm/error.hpp"
#include "sgm/layer.hpp"
#include "sgm/partition.hpp"
#include "sgm/rng.hpp"
#include "sgm/tensor.hpp"

#include <json.hpp>

// A small classifier for synthetic clip tasks: per-frame linear encoder with
// ReLU, a stack of residual graph blocks, temporal mean pooling, linear head.
// With num_blocks = 0 the model never mixes information across frames, which
// makes it a useful frame-order-blind baseline.

namespace sgm {

struct SgnMiniConfig {
    int frames = 8;
    int in_channels = 8;
    int hidden = 16;
    int classes = 2;
    int num_blocks = 1;
    PartitionScheme scheme = PartitionScheme::directional();
    TemporalThreshold tau{1};
    Paradigm paradigm = Paradigm::Transductive;
    FusionMode fusion = FusionMode::Sum;
    std::uint64_t seed = 1;

    void validate() const {
        if (frames < 2) throw ParamError("model config: frames must be >= 2");
        if (in_channels < 1) throw ParamError("model config: in_channels must be >= 1");
        if (hidden < 1) throw ParamError("model config: hidden must be >= 1");
        if (classes < 2) throw ParamError("model config: classes must be >= 2");
        if (num_blocks < 0) throw ParamError("model config: num_blocks must be >= 0");
        check_tau(frames, tau);
    }
};

struct SgnMini {
    SgnMiniConfig config;
    Tensor enc_w, enc_b;
    std::vector<SgmLayer> blocks;
    Tensor head_w, head_b;

    std::vector<std::pair<std::string, Tensor>> parameters() const {
        std::vector<std::pair<std::string, Tensor>> out;
        out.emplace_back("enc_w", enc_w);
        out.emplace_back("enc_b", enc_b);
        for (std::size_t b = 0; b < blocks.size(); ++b)
            for (const auto& [name, tensor] : blocks[b].parameters())
                out.emplace_back("block." + std::to_string(b) + "." + name, tensor);
        out.emplace_back("head_w", head_w);
        out.emplace_back("head_b", head_b);
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& [name, tensor] : parameters()) n += tensor.numel();
        return n;
    }
};

// Count computed from the configuration alone, without instantiating
// tensors. Kept in lockstep with build_model by a test.
inline std::size_t expected_parameter_count(const SgnMiniConfig& cfg) {
    const std::size_t t = static_cast<std::size_t>(cfg.frames);
    const std::size_t h = static_cast<std::size_t>(cfg.hidden);
    const std::size_t n = static_cast<std::size_t>(cfg.scheme.mask_count());
    std::size_t per_sub = h * h; // channel transform
    per_sub += cfg.paradigm == Paradigm::Transductive ? t * t : 2 * h;
    std::size_t per_block = n * per_sub;
    if (cfg.fusion == FusionMode::ConcatConv) per_block += n * h * h;
    return static_cast<std::size_t>(cfg.in_channels) * h + h // encoder
           + static_cast<std::size_t>(cfg.num_blocks) * per_block
           + h * static_cast<std::size_t>(cfg.classes) + static_cast<std::size_t>(cfg.classes);
}

inline SgnMini build_model(const SgnMiniConfig& cfg) {
    cfg.validate();
    SgnMini m;
    m.config = cfg;
    Rng rng(cfg.seed);
    const double eb = std::sqrt(6.0 / (cfg.in_channels + cfg.hidden));
    m.enc_w = Tensor::uniform({cfg.in_channels, cfg.hidden}, -eb, eb, rng, true);
    m.enc_b = Tensor::zeros({cfg.hidden}, true);
    const EdgeMaskSet masks = build_masks(cfg.frames, cfg.tau, cfg.scheme);
    for (int b = 0; b < cfg.num_blocks; ++b)
        m.blocks.push_back(init_layer(masks, cfg.hidden, cfg.hidden, cfg.paradigm, cfg.fusion,
                                      mix_seed(cfg.seed, 0x626c6f636bULL + static_cast<std::uint64_t>(b))));
    const double hb = std::sqrt(6.0 / (cfg.hidden + cfg.classes));
    m.head_w = Tensor::uniform({cfg.hidden, cfg.classes}, -hb, hb, rng, true);
    m.head_b = Tensor::zeros({cfg.classes}, true);
    return m;
}

// Logits for one clip [T x F].
inline Tensor forward_clip(const SgnMini& m, const Tensor& clip) {
    if (clip.dim() != 2 || clip.extent(0) != m.config.frames || clip.extent(1) != m.config.in_channels)
        throw ShapeError("forward_clip: input " + shape_str(clip.shape()) + ", expected [" +
                         std::to_string(m.config.frames) + "x" +
                         std::to_string(m.config.in_channels) + "]");
    Tensor h = relu(linear(clip, m.enc_w, m.enc_b));
    for (const SgmLayer& block : m.blocks) h = add(h, forward_frames(block, h));
    const Tensor pooled = mean_over_axis(h, 0);
    return add(vecmat(pooled, m.head_w), m.head_b);
}

// Logits for a batch [B x T x F] -> [B x classes].
inline Tensor forward_batch(const SgnMini& m, const Tensor& batch) {
    if (batch.dim() != 3)
        throw ShapeError("forward_batch: expected [B x T x F], got " + shape_str(batch.shape()));
    const int b = batch.extent(0);
    if (b < 1) throw ShapeError("forward_batch: empty batch");
    std::vector<Tensor> rows;
    rows.reserve(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) rows.push_back(forward_clip(m, slice_first(batch, i)));
    return stack_first(rows);
}

inline nlohmann::ordered_json model_to_json(const SgnMini& m) {
    nlohmann::ordered_json doc;
    doc["format"] = "sgm-checkpoint-v1";
    nlohmann::ordered_json cfg;
    cfg["frames"] = m.config.frames;
    cfg["in_channels"] = m.config.in_channels;
    cfg["hidden"] = m.config.hidden;
    cfg["classes"] = m.config.classes;
    cfg["num_blocks"] = m.config.num_blocks;
    cfg["scheme"] = m.config.scheme.name();
    cfg["tau"] = m.config.tau.frames;
    cfg["paradigm"] = paradigm_name(m.config.paradigm);
    cfg["fusion"] = fusion_name(m.config.fusion);
    cfg["seed"] = m.config.seed;
    doc["config"] = cfg;
    doc["enc_w"] = tensor_to_json(m.enc_w);
    doc["enc_b"] = tensor_to_json(m.enc_b);
    doc["blocks"] = nlohmann::ordered_json::array();
    for (const SgmLayer& block : m.blocks) doc["blocks"].push_back(layer_to_json(block));
    doc["head_w"] = tensor_to_json(m.head_w);
    doc["head_b"] = tensor_to_json(m.head_b);
    return doc;
}

inline SgnMini model_from_json(const nlohmann::ordered_json& doc) {
    if (doc.value("format", "") != "sgm-checkpoint-v1")
        throw IoError("checkpoint: unknown or missing format tag");
    const auto& cfg = doc.at("config");
    SgnMiniConfig c;
    c.frames = cfg.at("frames").get<int>();
    c.in_channels = cfg.at("in_channels").get<int>();
    c.hidden = cfg.at("hidden").get<int>();
    c.classes = cfg.at("classes").get<int>();
    c.num_blocks = cfg.at("num_blocks").get<int>();
    c.scheme = parse_scheme(cfg.at("scheme").get<std::string>());
    c.tau = TemporalThreshold{cfg.at("tau").get<int>()};
    c.paradigm = parse_paradigm(cfg.at("paradigm").get<std::string>());
    c.fusion = parse_fusion(cfg.at("fusion").get<std::string>());
    c.seed = cfg.at("seed").get<std::uint64_t>();
    c.validate();
    SgnMini m;
    m.config = c;
    m.enc_w = tensor_from_json(doc.at("enc_w"), true);
    m.enc_b = tensor_from_json(doc.at("enc_b"), true);
    for (const auto& bj : doc.at("blocks")) m.blocks.push_back(layer_from_json(bj));
    if (static_cast<int>(m.blocks.size()) != c.num_blocks)
        throw IoError("checkpoint: block count does not match config");
    m.head_w = tensor_from_json(doc.at("head_w"), true);
    m.head_b = tensor_from_json(doc.at("head_b"), true);
    return m;
}

} // namespace sgm
