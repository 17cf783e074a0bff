// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include "fairlora/backbone.hpp"
#include "fairlora/errors.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace fairlora;
using fairlora::testing::tiny_backbone;
using fairlora::testing::tiny_backbone_config;

namespace {

/// Adapter stack with non-zero B on every attachment point.
LoraAdapterStack trained_like_stack(const Backbone& bb, std::uint64_t seed, double b_scale = 0.3) {
    RngStream rng(seed, "stack");
    LoraAdapterStack s = init_adapter_stack(bb.adapter_shapes(), 2, 8.0, 0.3, rng);
    for (const auto& id : bb.attachment_points()) {
        for (double& v : s.mutable_at(id).b.data()) {
            v = b_scale * rng.normal();
        }
    }
    return s;
}

ClassifierHead random_head(const Backbone& bb, std::uint64_t seed) {
    RngStream rng(seed, "head");
    return ClassifierHead::init(bb.feature_dim(), Party::SolutionDeveloper, rng, 0.5);
}

Tensor inputs(const Backbone& bb, std::uint64_t seed, std::size_t n = 9) {
    RngStream rng(seed, "x");
    return oracle::random_tensor(n, bb.config.input_dim, rng);
}

} // namespace

class BothArchitectures : public ::testing::TestWithParam<Architecture> {};

TEST_P(BothArchitectures, SameConfigGivesBitIdenticalWeights) {
    const Backbone a = build_backbone(tiny_backbone_config(GetParam()));
    const Backbone b = build_backbone(tiny_backbone_config(GetParam()));
    EXPECT_EQ(a.weights, b.weights);
    EXPECT_EQ(a.hash(), b.hash());
    BackboneConfig other = tiny_backbone_config(GetParam());
    other.seed += 1;
    EXPECT_NE(build_backbone(other).hash(), a.hash());
}

TEST_P(BothArchitectures, AllWeightsFrozenAndF32Representable) {
    const Backbone bb = build_backbone(tiny_backbone_config(GetParam()));
    for (const auto& [id, e] : bb.weights.entries()) {
        EXPECT_TRUE(e.frozen) << id;
        for (double v : e.value.data()) {
            ASSERT_EQ(v, static_cast<double>(static_cast<float>(v))) << id;
        }
    }
}

TEST_P(BothArchitectures, ZeroInputGivesFiniteOutputs) {
    const auto bb = tiny_backbone(GetParam());
    const Tensor logits = forward_logits(*bb, {}, random_head(*bb, 1), Tensor(4, bb->config.input_dim));
    EXPECT_TRUE(logits.all_finite());
    EXPECT_EQ(logits.shape(), (Shape{4, 2}));
}

TEST_P(BothArchitectures, FreshStacksAreTransparent) {
    const auto bb = tiny_backbone(GetParam());
    RngStream rng(5, "fresh");
    const LoraAdapterStack fresh = init_adapter_stack(bb->adapter_shapes(), 4, 8.0, 0.02, rng);
    const ClassifierHead head = random_head(*bb, 2);
    const Tensor x = inputs(*bb, 3);
    const AdapterUse use[] = {{&fresh, 1, 1.0}, {&fresh, -1, 0.5}};
    EXPECT_EQ(forward_logits(*bb, use, head, x), forward_logits(*bb, {}, head, x));
}

TEST_P(BothArchitectures, AdapterPathMatchesMergedWeights) {
    const auto bb = tiny_backbone(GetParam());
    const ClassifierHead head = random_head(*bb, 4);
    const Tensor x = inputs(*bb, 5, 16);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const LoraAdapterStack s1 = trained_like_stack(*bb, seed);
        const LoraAdapterStack s2 = trained_like_stack(*bb, seed + 100);
        const AdapterUse use[] = {{&s1, 1, 1.0}, {&s2, -1, 0.7}};
        const Backbone merged_bb = merged(*bb, use);
        const double diff = dense::max_abs_diff(forward_logits(*bb, use, head, x),
                                                forward_logits(merged_bb, {}, head, x));
        EXPECT_LT(diff, 1e-10) << "seed " << seed;
    }
}

TEST_P(BothArchitectures, AttachmentPoints) {
    const auto bb = tiny_backbone(GetParam());
    const auto pts = bb->attachment_points();
    if (GetParam() == Architecture::MiniAttention) {
        EXPECT_EQ(pts, (std::vector<std::string>{"blk0.q", "blk0.v", "blk1.q", "blk1.v"}));
    } else {
        EXPECT_EQ(pts, (std::vector<std::string>{"fc0", "fc1"}));
    }
    for (const auto& [id, shape] : bb->adapter_shapes()) {
        EXPECT_EQ(bb->weights.at(id).shape(), shape);
    }
}

TEST_P(BothArchitectures, CheckpointRoundTrip) {
    const auto bb = tiny_backbone(GetParam());
    const io::Bytes bytes = encode_checkpoint(*bb);
    const Backbone back = decode_checkpoint(bytes);
    EXPECT_EQ(back.weights, bb->weights);
    EXPECT_EQ(back.config, bb->config);
    EXPECT_EQ(back.hash(), bb->hash());
    io::Bytes bad = bytes;
    bad.resize(bad.size() - 3);
    EXPECT_THROW(decode_checkpoint(bad), FormatError);
    bad = bytes;
    bad[1] = 'X';
    EXPECT_THROW(decode_checkpoint(bad), FormatError);
}

TEST_P(BothArchitectures, GradientsReachOnlyAdaptersAndHead) {
    const auto bb = tiny_backbone(GetParam());
    const LoraAdapterStack s = trained_like_stack(*bb, 9);
    const ClassifierHead head = random_head(*bb, 1);
    ad::Graph g;
    ModelBinding model;
    model.weights = bind_weights(g, bb->weights, false);
    const StackVars sv = bind_stack(g, s, true);
    model.adapters.push_back({&sv, 1.0});
    const HeadVars hv = bind_head(g, head, true);
    RngStream rng(1, "drop");
    const ad::Var rep = representation(g, bb->config, model, g.constant(inputs(*bb, 2)), false, rng);
    const int labels[] = {0, 1, 0, 1, 1, 0, 0, 1, 1};
    g.backward(ad::cross_entropy_logits(g, head_logits(g, hv, rep), labels));
    for (const auto& [id, v] : model.weights) {
        EXPECT_FALSE(g.requires_grad(v)) << id;
    }
    double adapter_grad = 0.0;
    for (const auto& [id, f] : sv.factors) {
        adapter_grad += dense::frobenius_sq(g.grad(f.a)) + dense::frobenius_sq(g.grad(f.b));
    }
    EXPECT_GT(adapter_grad, 0.0);
    EXPECT_GT(dense::frobenius_sq(g.grad(hv.weight)), 0.0);
}

INSTANTIATE_TEST_SUITE_P(Backbone, BothArchitectures,
                         ::testing::Values(Architecture::Mlp, Architecture::MiniAttention),
                         [](const auto& info) { return std::string(to_string(info.param)) == "mlp" ? "Mlp" : "Attention"; });

TEST(Backbone, DefaultAttentionExposesFourAttachmentPoints) {
    BackboneConfig c;
    c.pretrain_steps = 0;
    EXPECT_EQ(build_backbone(c).attachment_points().size(), 4u);
}

TEST(Backbone, ConfigValidation) {
    BackboneConfig c = tiny_backbone_config();
    c.depth = 0;
    EXPECT_THROW(build_backbone(c), ConfigError);
    EXPECT_THROW(parse_architecture("cnn"), ConfigError);
}

TEST(Backbone, ForwardRejectsUnfitStacks) {
    const auto bb = tiny_backbone();
    LoraAdapterStack wrong(2, 8.0);
    RngStream rng(1, "x");
    wrong.insert({"fc0", oracle::random_tensor(3, 2, rng), Tensor(2, 3)});
    const AdapterUse use[] = {{&wrong, 1, 1.0}};
    EXPECT_THROW(forward_logits(*bb, use, random_head(*bb, 1), inputs(*bb, 1)), CompositionError);
}

TEST(Backbone, HeadShapeAndOwner) {
    EXPECT_THROW(ClassifierHead(Tensor(4, 3), Tensor(1, 2), Party::SolutionDeveloper), ShapeError);
    const ClassifierHead h(Tensor(4, 2), Tensor(1, 2), Party::ComplianceOfficer);
    EXPECT_STREQ(party_tag(h.owner()), "CO");
}

TEST(Backbone, DropoutOnlyInTrainMode) {
    const auto bb = tiny_backbone(Architecture::MiniAttention);
    const LoraAdapterStack s = trained_like_stack(*bb, 3);
    const ClassifierHead head = random_head(*bb, 1);
    const Tensor x = inputs(*bb, 4);
    const AdapterUse use[] = {{&s, 1, 1.0}};
    auto run = [&](bool train, std::uint64_t seed) {
        ad::Graph g;
        RngStream rng(seed, "drop");
        return g.value(forward(g, *bb, use, head, x, train, rng, 0.5));
    };
    EXPECT_EQ(run(false, 1), run(false, 2));
    EXPECT_EQ(run(true, 1), run(true, 1));
    EXPECT_NE(run(true, 1), run(true, 2));
    EXPECT_EQ(run(false, 1), forward_logits(*bb, use, head, x));
}
