#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "sgm/model.hpp"
#include "sgm/synthdata.hpp"

using namespace sgm;

namespace {

SgnMiniConfig small_config() {
    SgnMiniConfig c;
    c.frames = 6;
    c.in_channels = 5;
    c.hidden = 7;
    c.classes = 3;
    c.num_blocks = 2;
    c.scheme = PartitionScheme::directional();
    c.tau = TemporalThreshold{1};
    c.seed = 13;
    return c;
}

} // namespace

TEST_CASE("model build is seed-deterministic", "[model]") {
    const SgnMini a = build_model(small_config());
    const SgnMini b = build_model(small_config());
    SgnMiniConfig other = small_config();
    other.seed = 14;
    const SgnMini c = build_model(other);

    const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
    REQUIRE(pa.size() == pb.size());
    bool any_differs = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].first == pb[i].first);
        CHECK(pa[i].second.data() == pb[i].second.data());
        if (pa[i].second.data() != pc[i].second.data()) any_differs = true;
    }
    CHECK(any_differs);
}

TEST_CASE("closed-form parameter count matches the built model", "[model]") {
    for (Paradigm paradigm : {Paradigm::Transductive, Paradigm::Inductive})
        for (FusionMode fusion : {FusionMode::Sum, FusionMode::ConcatConv})
            for (const PartitionScheme& scheme :
                 {PartitionScheme::full(), PartitionScheme::local_global(),
                  PartitionScheme::directional(), PartitionScheme::full_replicated(4)})
                for (int blocks : {0, 1, 3}) {
                    SgnMiniConfig c = small_config();
                    c.paradigm = paradigm;
                    c.fusion = fusion;
                    c.scheme = scheme;
                    c.num_blocks = blocks;
                    const SgnMini m = build_model(c);
                    INFO(scheme.name() << " " << paradigm_name(paradigm) << " "
                                       << fusion_name(fusion) << " blocks=" << blocks);
                    CHECK(m.parameter_count() == expected_parameter_count(c));
                }
}

TEST_CASE("replicating the full graph grows capacity, not structure", "[model]") {
    SgnMiniConfig full = small_config();
    full.scheme = PartitionScheme::full();
    SgnMiniConfig rep = small_config();
    rep.scheme = PartitionScheme::full_replicated(4);
    CHECK(expected_parameter_count(rep) > expected_parameter_count(full));
}

TEST_CASE("batched logits equal per-clip logits", "[model]") {
    const SgnMini m = build_model(small_config());
    Rng rng(3);
    const Tensor batch = Tensor::uniform({4, 6, 5}, -1.0, 1.0, rng);
    const Tensor logits = forward_batch(m, batch);
    REQUIRE(logits.shape() == Shape{4, 3});
    for (int b = 0; b < 4; ++b) {
        const Tensor one = forward_clip(m, slice_first(batch, b));
        for (int k = 0; k < 3; ++k) CHECK(logits.at(b, k) == one.at(k));
    }

    CHECK_THROWS_AS(forward_clip(m, Tensor::zeros({6, 4})), ShapeError);
    CHECK_THROWS_AS(forward_clip(m, Tensor::zeros({5, 5})), ShapeError);
    CHECK_THROWS_AS(forward_batch(m, Tensor::zeros({6, 5})), ShapeError);
}

TEST_CASE("a model without graph blocks ignores frame order", "[model]") {
    SgnMiniConfig c = small_config();
    c.num_blocks = 0;
    const SgnMini m = build_model(c);

    Rng rng(7);
    const Tensor clip = Tensor::uniform({6, 5}, -1.0, 1.0, rng);
    std::vector<double> reversed(clip.numel());
    for (int f = 0; f < 6; ++f)
        for (int ch = 0; ch < 5; ++ch)
            reversed[static_cast<std::size_t>(5 - f) * 5 + ch] = clip.at(f, ch);

    const Tensor a = forward_clip(m, clip);
    const Tensor b = forward_clip(m, Tensor::from_data({6, 5}, reversed));
    for (int k = 0; k < 3; ++k) CHECK(a.at(k) == Catch::Approx(b.at(k)).margin(1e-12));
}

TEST_CASE("graph blocks make the model order-sensitive", "[model]") {
    const SgnMini m = build_model(small_config());
    Rng rng(8);
    const Tensor clip = Tensor::uniform({6, 5}, -1.0, 1.0, rng);
    std::vector<double> reversed(clip.numel());
    for (int f = 0; f < 6; ++f)
        for (int ch = 0; ch < 5; ++ch)
            reversed[static_cast<std::size_t>(5 - f) * 5 + ch] = clip.at(f, ch);

    const Tensor a = forward_clip(m, clip);
    const Tensor b = forward_clip(m, Tensor::from_data({6, 5}, reversed));
    double diff = 0.0;
    for (int k = 0; k < 3; ++k) diff = std::max(diff, std::abs(a.at(k) - b.at(k)));
    CHECK(diff > 1e-6);
}

TEST_CASE("checkpoint roundtrip preserves parameters and behavior", "[model]") {
    SgnMiniConfig c = small_config();
    c.paradigm = Paradigm::Inductive;
    c.fusion = FusionMode::ConcatConv;
    const SgnMini m = build_model(c);
    const SgnMini copy = model_from_json(model_to_json(m));

    const auto pa = m.parameters(), pb = copy.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].first == pb[i].first);
        CHECK(pa[i].second.data() == pb[i].second.data());
    }

    Rng rng(9);
    const Tensor clip = Tensor::uniform({6, 5}, -1.0, 1.0, rng);
    CHECK(forward_clip(m, clip).data() == forward_clip(copy, clip).data());

    nlohmann::ordered_json bad = model_to_json(m);
    bad["format"] = "something-else";
    CHECK_THROWS_AS(model_from_json(bad), IoError);
}

TEST_CASE("model config validation", "[model]") {
    SgnMiniConfig c = small_config();
    c.frames = 1;
    CHECK_THROWS_AS(c.validate(), ParamError);
    c = small_config();
    c.classes = 1;
    CHECK_THROWS_AS(c.validate(), ParamError);
    c = small_config();
    c.num_blocks = -1;
    CHECK_THROWS_AS(c.validate(), ParamError);
    c = small_config();
    c.tau = TemporalThreshold{6};
    CHECK_THROWS_AS(c.validate(), ParamError);
    CHECK_NOTHROW(small_config().validate());
}
