// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include <cmath>

#include "fairlora/errors.hpp"
#include "fairlora/lora.hpp"
#include "support/oracles.hpp"

using namespace fairlora;

namespace {

LayerShapes two_layers() { return {{"blk0.q", Shape{6, 5}}, {"blk0.v", Shape{6, 4}}}; }

/// Stack with non-zero B so deltas are non-trivial.
LoraAdapterStack random_stack(std::uint64_t seed, std::size_t rank = 2) {
    RngStream rng(seed, "stack");
    LoraAdapterStack s = init_adapter_stack(two_layers(), rank, 8.0, 0.5, rng);
    for (const auto& [id, _] : two_layers()) {
        for (double& v : s.mutable_at(id).b.data()) {
            v = rng.normal();
        }
    }
    return s;
}

WeightMap random_base(std::uint64_t seed) {
    RngStream rng(seed, "base");
    WeightMap w;
    for (const auto& [id, shape] : two_layers()) {
        w.set(id, oracle::random_tensor(shape.rows, shape.cols, rng));
    }
    w.set("blk0.k", oracle::random_tensor(6, 5, rng));
    return w;
}

} // namespace

TEST(Lora, FreshInitHasZeroBAndGaussianA) {
    RngStream rng(1, "init");
    const LoraAdapterStack s = init_adapter_stack({{"w", Shape{400, 50}}}, 4, 8.0, 0.02, rng);
    const LoraAdapter& a = s.at("w");
    EXPECT_EQ(dense::frobenius_sq(a.b), 0.0);
    const double var = dense::frobenius_sq(a.a) / static_cast<double>(a.a.size());
    EXPECT_NEAR(std::sqrt(var), 0.02, 0.001);
    EXPECT_EQ(s.scale(), 2.0);
}

TEST(Lora, FreshInitComposeIsBitIdentical) {
    RngStream rng(2, "init");
    const LoraAdapterStack s = init_adapter_stack(two_layers(), 2, 8.0, 0.02, rng);
    const WeightMap base = random_base(3);
    EXPECT_EQ(compose(base, s, +1, 1.0), base);
    EXPECT_EQ(compose(base, s, -1, 0.7), base);
}

TEST(Lora, InitRejectsBadRank) {
    RngStream rng(2, "init");
    EXPECT_THROW(init_adapter_stack(two_layers(), 0, 8.0, 0.02, rng), ConfigError);
    EXPECT_THROW(init_adapter_stack(two_layers(), 5, 8.0, 0.02, rng), ConfigError);
    EXPECT_THROW(init_adapter_stack(two_layers(), 2, 8.0, 0.0, rng), ConfigError);
}

TEST(Lora, DeltaIsScaledProduct) {
    const LoraAdapterStack s = random_stack(4);
    const LoraAdapter& a = s.at("blk0.q");
    Tensor expect(6, 5);
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            for (std::size_t r = 0; r < 2; ++r) {
                expect(i, j) += 4.0 * a.a(i, r) * a.b(r, j);
            }
        }
    }
    EXPECT_LT(dense::max_abs_diff(s.delta("blk0.q"), expect), 1e-13);
}

TEST(Lora, ComposeThenNegateRestoresBase) {
    const WeightMap base = random_base(5);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const LoraAdapterStack s = random_stack(seed);
        const WeightMap round = compose(compose(base, s, +1, 0.8), s, -1, 0.8);
        for (const auto& [id, e] : base.entries()) {
            EXPECT_LT(dense::max_abs_diff(round.at(id), e.value), 1e-12) << id;
        }
        EXPECT_EQ(round.at("blk0.k"), base.at("blk0.k"));
    }
}

TEST(Lora, NegationFlipsTheDelta) {
    const WeightMap base = random_base(6);
    const LoraAdapterStack s = random_stack(7);
    const WeightMap plus = compose(base, s, +1, 1.0);
    const WeightMap minus = compose(base, s, -1, 1.0);
    for (const auto& [id, _] : two_layers()) {
        Tensor d1 = plus.at(id), d2 = minus.at(id);
        dense::axpy(-1.0, base.at(id), d1);
        dense::axpy(-1.0, base.at(id), d2);
        dense::axpy(1.0, d1, d2);
        EXPECT_LT(std::sqrt(dense::frobenius_sq(d2)), 1e-12);
    }
}

TEST(Lora, ComposeRejectsMissingLayerOrShape) {
    WeightMap base;
    base.set("blk0.q", Tensor(6, 5));
    EXPECT_THROW(compose(base, random_stack(1), +1, 1.0), CompositionError);
    base.set("blk0.v", Tensor(6, 3));
    EXPECT_THROW(compose(base, random_stack(1), +1, 1.0), CompositionError);
}

TEST(Lora, BundleRoundTripIsExactAtF32) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const LoraAdapterStack s = random_stack(seed, 1 + seed % 3);
        const io::Bytes bytes = encode_bundle(s);
        EXPECT_EQ(bytes.size(), bundle_size(s));
        const LoraAdapterStack back = decode_bundle(bytes);
        EXPECT_TRUE(back.same_factors(round_to_f32(s)));
        EXPECT_EQ(encode_bundle(back), bytes);
    }
}

TEST(Lora, BundleSizeFormula) {
    const LoraAdapterStack s = random_stack(1, 2);
    // 20 + (4 + 6 + 8 + 4*2*(6+5)) + (4 + 6 + 8 + 4*2*(6+4))
    EXPECT_EQ(bundle_size(s), 20u + 106u + 98u);
}

TEST(Lora, BundleDecodeRejectsCorruption) {
    const io::Bytes good = encode_bundle(random_stack(2));
    io::Bytes bad = good;
    bad[0] = 'X';
    EXPECT_THROW(decode_bundle(bad), FormatError);
    bad = good;
    bad[4] = 9;
    EXPECT_THROW(decode_bundle(bad), FormatError);
    bad = good;
    bad.pop_back();
    EXPECT_THROW(decode_bundle(bad), FormatError);
    bad = good;
    bad.push_back(0);
    try {
        decode_bundle(bad);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), good.size());
    }
    EXPECT_THROW(decode_bundle(io::Bytes{}), FormatError);
}

TEST(Lora, RNormZeroAtOrthonormalFactors) {
    ad::Graph g;
    LoraAdapterStack s(2, 4.0);
    Tensor a(3, 2), b(2, 3);
    a(0, 0) = a(1, 1) = 1.0;
    b(0, 1) = b(1, 2) = 1.0;
    s.insert({"w", a, b});
    EXPECT_EQ(g.value(r_norm(g, bind_stack(g, s, true))).item(), 0.0);
}

TEST(Lora, ROrthExamples) {
    ad::Graph g;
    LoraAdapterStack zero(4, 8.0);
    zero.insert({"w", Tensor(5, 4), Tensor(4, 6)});
    const StackVars z = bind_stack(g, zero, true);
    EXPECT_EQ(g.value(r_orth(g, z, z, OrthTarget::Identity)).item(), 8.0);
    EXPECT_EQ(g.value(r_orth(g, z, z, OrthTarget::Zero)).item(), 0.0);

    LoraAdapterStack ortho(2, 8.0);
    Tensor a(3, 2), b(2, 3);
    a(0, 0) = a(2, 1) = 1.0;
    b(0, 0) = b(1, 1) = 1.0;
    ortho.insert({"w", a, b});
    const StackVars o = bind_stack(g, ortho, true);
    EXPECT_EQ(g.value(r_orth(g, o, o, OrthTarget::Identity)).item(), 0.0);
}

TEST(Lora, ROrthLeavesSensitiveGradientZero) {
    const LoraAdapterStack t = random_stack(8), s = random_stack(9);
    ad::Graph g;
    const StackVars tv = bind_stack(g, t, true), sv = bind_stack(g, s, true);
    g.backward(r_orth(g, tv, sv, OrthTarget::Identity));
    for (const auto& [id, f] : sv.factors) {
        EXPECT_EQ(dense::frobenius_sq(g.grad(f.a)), 0.0) << id;
        EXPECT_EQ(dense::frobenius_sq(g.grad(f.b)), 0.0) << id;
    }
    double task_grad = 0.0;
    for (const auto& [id, f] : tv.factors) {
        task_grad += dense::frobenius_sq(g.grad(f.a));
    }
    EXPECT_GT(task_grad, 0.0);
}

TEST(Lora, ROrthRejectsLayerMismatch) {
    LoraAdapterStack other(2, 8.0);
    RngStream rng(1, "x");
    other.insert({"blk0.q", oracle::random_tensor(6, 2, rng), oracle::random_tensor(2, 5, rng)});
    ad::Graph g;
    EXPECT_THROW(r_orth(g, bind_stack(g, random_stack(1), true), bind_stack(g, other, false)), CompositionError);
}

TEST(Lora, StackRejectsDuplicatesAndRankMismatch) {
    LoraAdapterStack s(2, 8.0);
    s.insert({"w", Tensor(3, 2), Tensor(2, 3)});
    EXPECT_THROW(s.insert({"w", Tensor(3, 2), Tensor(2, 3)}), CompositionError);
    EXPECT_THROW(s.insert({"u", Tensor(3, 3), Tensor(3, 3)}), CompositionError);
}

TEST(Lora, DigestIgnoresMetadataButNotValues) {
    LoraAdapterStack a = random_stack(3);
    LoraAdapterStack b = a;
    b.set_strategy("orth");
    EXPECT_TRUE(a.same_factors(b));
    EXPECT_EQ(a.digest(), b.digest());
    double& v = b.mutable_at("blk0.q").a(0, 0);
    v = std::nextafter(v, 10.0);
    EXPECT_NE(a.digest(), b.digest());
}
