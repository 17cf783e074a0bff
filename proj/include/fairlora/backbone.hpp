// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fairlora/autodiff.hpp"
#include "fairlora/binary_io.hpp"
#include "fairlora/lora.hpp"
#include "fairlora/rng.hpp"
#include "fairlora/weights.hpp"

namespace fairlora {

enum class Architecture : std::uint32_t { Mlp = 0, MiniAttention = 1 };

const char* to_string(Architecture a) noexcept;
Architecture parse_architecture(const std::string& s);

struct BackboneConfig {
    Architecture architecture = Architecture::MiniAttention;
    std::size_t depth = 2;
    std::size_t width = 32;
    /// Attention only: the input row is projected to `tokens` tokens of `token_dim` features.
    std::size_t tokens = 4;
    std::size_t token_dim = 8;
    std::size_t input_dim = 16;
    std::uint64_t seed = 7;
    std::size_t pretrain_steps = 300;
    std::size_t pretrain_batch = 64;
    double pretrain_lr = 3e-3;

    /// Throws ConfigError.
    void validate() const;
    bool operator==(const BackboneConfig&) const = default;
};

/// Frozen pretrained weights plus the config needed to run them.
struct Backbone {
    BackboneConfig config;
    WeightMap weights;

    /// Layer ids that accept adapters: blk{i}.q / blk{i}.v, or fc{i} for the MLP.
    std::vector<std::string> attachment_points() const;
    LayerShapes adapter_shapes() const;
    /// Width of the representation fed to a classifier head.
    std::size_t feature_dim() const noexcept { return config.width; }
    /// SHA-256 of the checkpoint encoding.
    std::string hash() const;
};

/// Deterministic weights from cfg.seed, pretrained on a synthetic pretext task,
/// rounded to f32 and marked frozen.
Backbone build_backbone(const BackboneConfig& cfg);

enum class Party : std::uint8_t { SolutionDeveloper, ComplianceOfficer };
const char* party_tag(Party p) noexcept; // "SD" / "CO"

/// Linear classification head on the backbone representation. Never serialized into a bundle.
class ClassifierHead {
public:
    ClassifierHead(Tensor weight, Tensor bias, Party owner);
    static ClassifierHead init(std::size_t feature_dim, Party owner, RngStream& rng, double sigma = 0.02);

    Party owner() const noexcept { return owner_; }
    const Tensor& weight() const noexcept { return weight_; }
    const Tensor& bias() const noexcept { return bias_; }
    Tensor& mutable_weight() noexcept { return weight_; }
    Tensor& mutable_bias() noexcept { return bias_; }

    bool operator==(const ClassifierHead&) const = default;

private:
    Tensor weight_;
    Tensor bias_;
    Party owner_;
};

/// One adapter stack applied in a forward pass: W_eff = W + sign * coeff * delta.
struct AdapterUse {
    const LoraAdapterStack* stack = nullptr;
    int sign = 1;
    double coeff = 1.0;
};

/// Low-level binding of a model to graph variables, used by trainers.
struct ModelBinding {
    std::map<std::string, ad::Var> weights;
    struct Adapter {
        const StackVars* vars;
        double coeff; // sign * coeff
    };
    std::vector<Adapter> adapters;
    double dropout = 0.0;
};

std::map<std::string, ad::Var> bind_weights(ad::Graph& g, const WeightMap& weights, bool trainable);

/// Representation [n x width] for input x [n x input_dim]. Adapter outputs pass through
/// dropout when train is set.
ad::Var representation(ad::Graph& g, const BackboneConfig& cfg, const ModelBinding& model, ad::Var x, bool train,
                       RngStream& dropout_rng);

struct HeadVars {
    ad::Var weight;
    ad::Var bias;
};
HeadVars bind_head(ad::Graph& g, const ClassifierHead& head, bool trainable);
ad::Var head_logits(ad::Graph& g, const HeadVars& head, ad::Var features);

/// Logits [n x 2] of (backbone + stacks, head). Every stack is applied as a low-rank
/// path next to the frozen weight; dropout (probability `dropout`) acts only in train mode.
/// Throws CompositionError when a stack does not fit the backbone.
ad::Var forward(ad::Graph& g, const Backbone& base, std::span<const AdapterUse> stacks, const ClassifierHead& head,
                const Tensor& x, bool train_mode, RngStream& rng, double dropout = 0.1);

/// Convenience: eval-mode logits as a plain tensor.
Tensor forward_logits(const Backbone& base, std::span<const AdapterUse> stacks, const ClassifierHead& head,
                      const Tensor& x);
/// Eval-mode representation with stacks applied.
Tensor forward_features(const Backbone& base, std::span<const AdapterUse> stacks, const Tensor& x);

/// Same backbone with `stacks` merged into its weights.
Backbone merged(const Backbone& base, std::span<const AdapterUse> stacks);

// ---------------------------------------------------------------------------
// .fbkb checkpoint: same conventions as .flra.
//
//   "FBKB" | u32 version=1 | u32 arch | u32 depth | u32 width | u32 tokens | u32 token_dim
//   | u32 input_dim | u64 seed | u32 pretrain_steps | u32 pretrain_batch | f64 pretrain_lr | u32 tensor_count
//   per tensor: u32 id_len | id | u32 rows | u32 cols | f32[rows*cols]

io::Bytes encode_checkpoint(const Backbone& backbone);
Backbone decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Backbone& backbone, const std::filesystem::path& path);
Backbone load_checkpoint(const std::filesystem::path& path);

} // namespace fairlora
