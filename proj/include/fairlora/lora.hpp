// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>

#include "fairlora/autodiff.hpp"
#include "fairlora/binary_io.hpp"
#include "fairlora/rng.hpp"
#include "fairlora/tensor.hpp"
#include "fairlora/weights.hpp"

namespace fairlora {

/// Low-rank update for one weight matrix W[d x k]: delta = (alpha / r) * A * B
/// with A[d x r] and B[r x k].
struct LoraAdapter {
    std::string layer_id;
    Tensor a;
    Tensor b;

    std::size_t rank() const noexcept { return a.cols(); }
    std::size_t in_dim() const noexcept { return a.rows(); }
    std::size_t out_dim() const noexcept { return b.cols(); }

    bool operator==(const LoraAdapter&) const = default;
};

/// Adapters for a set of layers sharing one rank and alpha.
class LoraAdapterStack {
public:
    LoraAdapterStack() = default;
    LoraAdapterStack(std::size_t rank, double alpha, std::uint64_t seed = 0, std::string strategy = {});

    std::size_t rank() const noexcept { return rank_; }
    double alpha() const noexcept { return alpha_; }
    double scale() const noexcept { return alpha_ / static_cast<double>(rank_); }
    std::uint64_t seed() const noexcept { return seed_; }
    const std::string& strategy() const noexcept { return strategy_; }
    void set_strategy(std::string tag) { strategy_ = std::move(tag); }

    /// Adds an adapter. Throws CompositionError on duplicate layer ids or a rank mismatch.
    void insert(LoraAdapter adapter);
    bool contains(const std::string& id) const { return adapters_.contains(id); }
    const LoraAdapter& at(const std::string& id) const;
    LoraAdapter& mutable_at(const std::string& id);
    const std::map<std::string, LoraAdapter>& adapters() const noexcept { return adapters_; }
    bool empty() const noexcept { return adapters_.empty(); }
    std::size_t size() const noexcept { return adapters_.size(); }

    /// Dense (alpha / r) * A * B for one layer.
    Tensor delta(const std::string& id) const;

    /// SHA-256 over layer ids and exact f64 factor values.
    std::string digest() const;

    /// Factor values only; metadata (seed, strategy tag) is ignored.
    bool same_factors(const LoraAdapterStack& other) const;

private:
    std::size_t rank_ = 0;
    double alpha_ = 0.0;
    std::uint64_t seed_ = 0;
    std::string strategy_;
    std::map<std::string, LoraAdapter> adapters_;
};

using LayerShapes = std::map<std::string, Shape>;

/// A ~ N(0, sigma^2) i.i.d., B = 0, so every delta starts at exactly zero.
/// Throws ConfigError if rank is 0, sigma <= 0 or rank > min(d, k) for some layer.
LoraAdapterStack init_adapter_stack(const LayerShapes& layer_shapes, std::size_t rank, double alpha, double sigma,
                                    RngStream& rng);

/// base with W += sign * coeff * (alpha / r) * A * B for every adapted layer.
/// sign = -1 negates the B factor before the product.
/// Throws CompositionError for a missing layer id or a shape mismatch.
WeightMap compose(const WeightMap& base, const LoraAdapterStack& stack, int sign, double coeff);

/// Graph variables bound to a stack's factors.
struct StackVars {
    struct Factors {
        ad::Var a;
        ad::Var b;
    };
    std::map<std::string, Factors> factors;
    double scale = 1.0;
};

StackVars bind_stack(ad::Graph& g, const LoraAdapterStack& stack, bool trainable);
/// Copies the current factor values (and their gradients) back into `stack`.
void read_back(const ad::Graph& g, const StackVars& vars, LoraAdapterStack& stack);

enum class OrthTarget { Identity, Zero };

/// sum_i ||A_i^T A_i - I||_F^2 + ||B_i B_i^T - I||_F^2 (both Grams are r x r).
ad::Var r_norm(ad::Graph& g, const StackVars& stack);

/// sum_i ||A_t^T A_s - T||_F^2 + ||B_t B_s^T - T||_F^2 with T = I or 0.
/// The sensitive factors enter as constants: no gradient ever reaches them.
/// Throws CompositionError when the two stacks cover different layers or ranks.
ad::Var r_orth(ad::Graph& g, const StackVars& task, const StackVars& sensitive,
               OrthTarget target = OrthTarget::Identity);

// ---------------------------------------------------------------------------
// .flra bundle: the only artifact that crosses the party boundary.
//
//   "FLRA" | u32 version=1 | u32 rank | f32 alpha | u32 layer_count
//   per layer: u32 id_len | id bytes | u32 d | u32 k | A f32[d*r] | B f32[r*k]
//
// All integers and floats little-endian, matrices row-major.

inline constexpr char kBundleMagic[4] = {'F', 'L', 'R', 'A'};
inline constexpr std::uint32_t kBundleVersion = 1;

io::Bytes encode_bundle(const LoraAdapterStack& stack);
/// Throws FormatError (with offset) on bad magic, version, truncation or trailing bytes.
LoraAdapterStack decode_bundle(std::span<const std::uint8_t> bytes);

void save_bundle(const LoraAdapterStack& stack, const std::filesystem::path& path);
LoraAdapterStack load_bundle(const std::filesystem::path& path);

/// Expected encoded size: 20 header bytes + per layer (4 + |id| + 8 + 4*r*(d+k)).
std::size_t bundle_size(const LoraAdapterStack& stack);

/// Rounds every factor to the nearest f32, i.e. the value a peer sees after a bundle round trip.
LoraAdapterStack round_to_f32(const LoraAdapterStack& stack);

} // namespace fairlora
