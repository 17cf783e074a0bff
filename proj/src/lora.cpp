// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "fairlora/lora.hpp"

#include <algorithm>
#include <cstring>

#include "fairlora/errors.hpp"
#include "fairlora/hash.hpp"

namespace fairlora {

LoraAdapterStack::LoraAdapterStack(std::size_t rank, double alpha, std::uint64_t seed, std::string strategy)
    : rank_(rank), alpha_(alpha), seed_(seed), strategy_(std::move(strategy)) {
    if (rank == 0) {
        throw ConfigError("adapter rank must be at least 1");
    }
}

void LoraAdapterStack::insert(LoraAdapter adapter) {
    if (adapter.a.cols() != rank_ || adapter.b.rows() != rank_) {
        throw CompositionError("adapter '" + adapter.layer_id + "' has factors " + to_string(adapter.a.shape()) +
                               ", " + to_string(adapter.b.shape()) + " but the stack rank is " +
                               std::to_string(rank_));
    }
    if (adapters_.contains(adapter.layer_id)) {
        throw CompositionError("duplicate adapter for layer '" + adapter.layer_id + "'");
    }
    std::string id = adapter.layer_id;
    adapters_.emplace(std::move(id), std::move(adapter));
}

const LoraAdapter& LoraAdapterStack::at(const std::string& id) const {
    auto it = adapters_.find(id);
    if (it == adapters_.end()) {
        throw CompositionError("stack has no adapter for layer '" + id + "'");
    }
    return it->second;
}

LoraAdapter& LoraAdapterStack::mutable_at(const std::string& id) {
    auto it = adapters_.find(id);
    if (it == adapters_.end()) {
        throw CompositionError("stack has no adapter for layer '" + id + "'");
    }
    return it->second;
}

Tensor LoraAdapterStack::delta(const std::string& id) const {
    const LoraAdapter& ad = at(id);
    Tensor d = dense::matmul(ad.a, ad.b);
    const double s = scale();
    for (double& v : d.data()) {
        v *= s;
    }
    return d;
}

std::string LoraAdapterStack::digest() const {
    Digest d;
    d.update(std::to_string(rank_));
    d.update(std::string_view(reinterpret_cast<const char*>(&alpha_), sizeof alpha_));
    for (const auto& [id, ad] : adapters_) {
        d.update(id);
        d.update(ad.a);
        d.update(ad.b);
    }
    return d.hex();
}

bool LoraAdapterStack::same_factors(const LoraAdapterStack& other) const {
    return rank_ == other.rank_ && alpha_ == other.alpha_ && adapters_ == other.adapters_;
}

LoraAdapterStack init_adapter_stack(const LayerShapes& layer_shapes, std::size_t rank, double alpha, double sigma,
                                    RngStream& rng) {
    if (rank == 0) {
        throw ConfigError("adapter rank must be at least 1");
    }
    if (!(sigma > 0.0)) {
        throw ConfigError("adapter init sigma must be positive");
    }
    for (const auto& [id, shape] : layer_shapes) {
        if (rank > std::min(shape.rows, shape.cols)) {
            throw ConfigError("rank " + std::to_string(rank) + " exceeds min(d, k) for layer '" + id + "' " +
                              to_string(shape));
        }
    }
    LoraAdapterStack stack(rank, alpha);
    for (const auto& [id, shape] : layer_shapes) {
        LoraAdapter ad{id, Tensor(shape.rows, rank), Tensor(rank, shape.cols)};
        for (double& v : ad.a.data()) {
            v = sigma * rng.normal();
        }
        stack.insert(std::move(ad));
    }
    return stack;
}

WeightMap compose(const WeightMap& base, const LoraAdapterStack& stack, int sign, double coeff) {
    if (sign != 1 && sign != -1) {
        throw CompositionError("compose sign must be +1 or -1");
    }
    WeightMap out = base;
    for (const auto& [id, ad] : stack.adapters()) {
        if (!base.contains(id)) {
            throw CompositionError("adapter targets unknown layer '" + id + "'");
        }
        Tensor& w = out.mutable_at(id);
        if (w.rows() != ad.in_dim() || w.cols() != ad.out_dim()) {
            throw CompositionError("adapter for '" + id + "' produces " +
                                   to_string(Shape{ad.in_dim(), ad.out_dim()}) + " but the layer is " +
                                   to_string(w.shape()));
        }
        Tensor b = ad.b;
        if (sign < 0) {
            for (double& v : b.data()) {
                v = -v;
            }
        }
        const Tensor product = dense::matmul(ad.a, b);
        const double factor = coeff * stack.scale();
        dense::axpy(factor, product, w);
    }
    return out;
}

StackVars bind_stack(ad::Graph& g, const LoraAdapterStack& stack, bool trainable) {
    StackVars vars;
    vars.scale = stack.scale();
    for (const auto& [id, ad] : stack.adapters()) {
        StackVars::Factors f;
        f.a = trainable ? g.parameter(ad.a) : g.constant(ad.a);
        f.b = trainable ? g.parameter(ad.b) : g.constant(ad.b);
        vars.factors.emplace(id, f);
    }
    return vars;
}

void read_back(const ad::Graph& g, const StackVars& vars, LoraAdapterStack& stack) {
    for (const auto& [id, f] : vars.factors) {
        LoraAdapter& ad = stack.mutable_at(id);
        ad.a = g.value(f.a);
        ad.b = g.value(f.b);
    }
}

ad::Var r_norm(ad::Graph& g, const StackVars& stack) {
    if (stack.factors.empty()) {
        throw CompositionError("r_norm of an empty stack");
    }
    ad::Var total;
    for (const auto& [id, f] : stack.factors) {
        ad::Var gram_a = ad::matmul(g, ad::transpose(g, f.a), f.a);
        ad::Var gram_b = ad::matmul(g, f.b, ad::transpose(g, f.b));
        ad::Var term = ad::add(g, ad::frobenius_penalty(g, gram_a, true), ad::frobenius_penalty(g, gram_b, true));
        total = total.valid() ? ad::add(g, total, term) : term;
    }
    return total;
}

ad::Var r_orth(ad::Graph& g, const StackVars& task, const StackVars& sensitive, OrthTarget target) {
    if (task.factors.empty()) {
        throw CompositionError("r_orth of an empty stack");
    }
    if (task.factors.size() != sensitive.factors.size()) {
        throw CompositionError("r_orth: task and sensitive stacks cover different layers");
    }
    const bool identity = target == OrthTarget::Identity;
    ad::Var total;
    for (const auto& [id, tf] : task.factors) {
        auto it = sensitive.factors.find(id);
        if (it == sensitive.factors.end()) {
            throw CompositionError("r_orth: sensitive stack has no adapter for '" + id + "'");
        }
        // Detach the sensitive factors so the penalty only ever moves the task stack.
        ad::Var sa = g.constant(g.value(it->second.a));
        ad::Var sb = g.constant(g.value(it->second.b));
        if (g.value(sa).shape() != g.value(tf.a).shape() || g.value(sb).shape() != g.value(tf.b).shape()) {
            throw CompositionError("r_orth: factor shapes differ for layer '" + id + "'");
        }
        ad::Var cross_a = ad::matmul(g, ad::transpose(g, tf.a), sa);
        ad::Var cross_b = ad::matmul(g, tf.b, ad::transpose(g, sb));
        ad::Var term =
            ad::add(g, ad::frobenius_penalty(g, cross_a, identity), ad::frobenius_penalty(g, cross_b, identity));
        total = total.valid() ? ad::add(g, total, term) : term;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Bundle codec

io::Bytes encode_bundle(const LoraAdapterStack& stack) {
    io::ByteWriter w;
    w.raw(std::string_view(kBundleMagic, 4));
    w.u32(kBundleVersion);
    w.u32(static_cast<std::uint32_t>(stack.rank()));
    w.f32(static_cast<float>(stack.alpha()));
    w.u32(static_cast<std::uint32_t>(stack.size()));
    for (const auto& [id, ad] : stack.adapters()) {
        w.string(id);
        w.u32(static_cast<std::uint32_t>(ad.in_dim()));
        w.u32(static_cast<std::uint32_t>(ad.out_dim()));
        for (double v : ad.a.data()) {
            w.f32(static_cast<float>(v));
        }
        for (double v : ad.b.data()) {
            w.f32(static_cast<float>(v));
        }
    }
    return w.take();
}

LoraAdapterStack decode_bundle(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    const std::string magic = r.raw(4, "magic");
    if (std::memcmp(magic.data(), kBundleMagic, 4) != 0) {
        throw FormatError("bad bundle magic", 0);
    }
    const std::size_t version_at = r.offset();
    const std::uint32_t version = r.u32("version");
    if (version != kBundleVersion) {
        throw FormatError("unsupported bundle version " + std::to_string(version), version_at);
    }
    const std::size_t rank_at = r.offset();
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0) {
        throw FormatError("bundle rank is zero", rank_at);
    }
    const float alpha = r.f32("alpha");
    const std::uint32_t count = r.u32("layer count");
    LoraAdapterStack stack(rank, static_cast<double>(alpha));
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::size_t layer_at = r.offset();
        std::string id = r.string("layer id");
        const std::uint32_t d = r.u32("d");
        const std::uint32_t k = r.u32("k");
        if (d == 0 || k == 0 || rank > std::min(d, k)) {
            throw FormatError("invalid dimensions for layer '" + id + "'", layer_at);
        }
        const std::size_t need = 4ull * rank * (static_cast<std::size_t>(d) + k);
        if (r.remaining() < need) {
            throw FormatError("truncated factors for layer '" + id + "'", r.offset());
        }
        LoraAdapter ad{id, Tensor(d, rank), Tensor(rank, k)};
        for (double& v : ad.a.data()) {
            v = static_cast<double>(r.f32("A"));
        }
        for (double& v : ad.b.data()) {
            v = static_cast<double>(r.f32("B"));
        }
        if (stack.contains(id)) {
            throw FormatError("duplicate layer '" + id + "'", layer_at);
        }
        stack.insert(std::move(ad));
    }
    r.expect_end();
    return stack;
}

void save_bundle(const LoraAdapterStack& stack, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_bundle(stack));
}

LoraAdapterStack load_bundle(const std::filesystem::path& path) { return decode_bundle(io::read_file(path)); }

std::size_t bundle_size(const LoraAdapterStack& stack) {
    std::size_t n = 20;
    for (const auto& [id, ad] : stack.adapters()) {
        n += 4 + id.size() + 8 + 4 * stack.rank() * (ad.in_dim() + ad.out_dim());
    }
    return n;
}

LoraAdapterStack round_to_f32(const LoraAdapterStack& stack) {
    LoraAdapterStack out = stack;
    for (const auto& [id, ad] : stack.adapters()) {
        LoraAdapter& o = out.mutable_at(id);
        for (double& v : o.a.data()) {
            v = static_cast<double>(static_cast<float>(v));
        }
        for (double& v : o.b.data()) {
            v = static_cast<double>(static_cast<float>(v));
        }
    }
    return out;
}

} // namespace fairlora
