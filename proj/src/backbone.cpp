// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "fairlora/backbone.hpp"

#include <cmath>
#include <cstring>
#include <optional>

#include "fairlora/errors.hpp"
#include "fairlora/hash.hpp"
#include "fairlora/optim.hpp"

namespace fairlora {

const char* to_string(Architecture a) noexcept {
    return a == Architecture::Mlp ? "mlp" : "mini-attention";
}

Architecture parse_architecture(const std::string& s) {
    if (s == "mlp") {
        return Architecture::Mlp;
    }
    if (s == "mini-attention") {
        return Architecture::MiniAttention;
    }
    throw ConfigError("unknown architecture '" + s + "' (expected mlp or mini-attention)");
}

void BackboneConfig::validate() const {
    if (depth < 1) {
        throw ConfigError("backbone depth must be at least 1");
    }
    if (width < 1 || input_dim < 1) {
        throw ConfigError("backbone width and input_dim must be positive");
    }
    if (architecture == Architecture::MiniAttention && (tokens < 1 || token_dim < 1)) {
        throw ConfigError("mini-attention needs at least one token of positive width");
    }
    if (pretrain_steps > 0 && (pretrain_batch < 1 || !(pretrain_lr > 0.0))) {
        throw ConfigError("pretraining needs a positive batch size and learning rate");
    }
}

const char* party_tag(Party p) noexcept { return p == Party::SolutionDeveloper ? "SD" : "CO"; }

namespace {

std::string blk(std::size_t i, const char* name) { return "blk" + std::to_string(i) + "." + name; }
std::string fc(std::size_t i) { return "fc" + std::to_string(i); }

Tensor gaussian(std::size_t r, std::size_t c, double sigma, RngStream& rng) {
    Tensor t(r, c);
    for (double& v : t.data()) {
        v = sigma * rng.normal();
    }
    return t;
}

WeightMap initial_weights(const BackboneConfig& cfg, RngStream& rng) {
    WeightMap w;
    const std::size_t h = cfg.width;
    auto fan_in = [](std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); };
    if (cfg.architecture == Architecture::Mlp) {
        std::size_t in = cfg.input_dim;
        for (std::size_t i = 0; i < cfg.depth; ++i) {
            w.set(fc(i), gaussian(in, h, fan_in(in), rng));
            w.set(fc(i) + ".bias", Tensor(1, h));
            in = h;
        }
        return w;
    }
    const std::size_t td = cfg.token_dim, t = cfg.tokens;
    w.set("embed.proj", gaussian(cfg.input_dim, t * td, fan_in(cfg.input_dim), rng));
    w.set("embed.tok", gaussian(td, h, fan_in(td), rng));
    w.set("embed.pos", gaussian(t, h, 0.1, rng));
    for (std::size_t i = 0; i < cfg.depth; ++i) {
        w.set(blk(i, "ln1.g"), Tensor(1, h, 1.0));
        w.set(blk(i, "ln1.b"), Tensor(1, h));
        for (const char* name : {"q", "k", "v", "o"}) {
            w.set(blk(i, name), gaussian(h, h, fan_in(h), rng));
        }
        w.set(blk(i, "ln2.g"), Tensor(1, h, 1.0));
        w.set(blk(i, "ln2.b"), Tensor(1, h));
        w.set(blk(i, "mlp1"), gaussian(h, 2 * h, fan_in(h), rng));
        w.set(blk(i, "mlp1.bias"), Tensor(1, 2 * h));
        w.set(blk(i, "mlp2"), gaussian(2 * h, h, fan_in(2 * h), rng));
        w.set(blk(i, "mlp2.bias"), Tensor(1, h));
    }
    w.set("final.ln.g", Tensor(1, h, 1.0));
    w.set("final.ln.b", Tensor(1, h));
    return w;
}

ad::Var linear(ad::Graph& g, const ModelBinding& model, const std::string& id, ad::Var x, bool train,
               RngStream& rng) {
    auto it = model.weights.find(id);
    if (it == model.weights.end()) {
        throw CompositionError("model binding lacks weight '" + id + "'");
    }
    ad::Var out = ad::matmul(g, x, it->second);
    for (const auto& use : model.adapters) {
        auto f = use.vars->factors.find(id);
        if (f == use.vars->factors.end()) {
            continue;
        }
        ad::Var low = ad::matmul(g, ad::matmul(g, x, f->second.a), f->second.b);
        low = ad::scale(g, low, use.coeff * use.vars->scale);
        low = ad::dropout(g, low, model.dropout, train, rng);
        out = ad::add(g, out, low);
    }
    return out;
}

ad::Var weight(const ModelBinding& model, const std::string& id) {
    auto it = model.weights.find(id);
    if (it == model.weights.end()) {
        throw CompositionError("model binding lacks weight '" + id + "'");
    }
    return it->second;
}

void check_stack_fits(const Backbone& base, const LoraAdapterStack& stack) {
    for (const auto& [id, ad] : stack.adapters()) {
        if (!base.weights.contains(id)) {
            throw CompositionError("adapter targets unknown layer '" + id + "'");
        }
        const Tensor& w = base.weights.at(id);
        if (w.rows() != ad.in_dim() || w.cols() != ad.out_dim()) {
            throw CompositionError("adapter for '" + id + "' does not match layer shape " + to_string(w.shape()));
        }
    }
}

} // namespace

std::vector<std::string> Backbone::attachment_points() const {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < config.depth; ++i) {
        if (config.architecture == Architecture::Mlp) {
            ids.push_back(fc(i));
        } else {
            ids.push_back(blk(i, "q"));
            ids.push_back(blk(i, "v"));
        }
    }
    return ids;
}

LayerShapes Backbone::adapter_shapes() const {
    LayerShapes shapes;
    for (const auto& id : attachment_points()) {
        shapes[id] = weights.at(id).shape();
    }
    return shapes;
}

std::string Backbone::hash() const { return sha256_hex(encode_checkpoint(*this)); }

std::map<std::string, ad::Var> bind_weights(ad::Graph& g, const WeightMap& weights, bool trainable) {
    std::map<std::string, ad::Var> vars;
    for (const auto& [id, entry] : weights.entries()) {
        vars.emplace(id, trainable ? g.parameter(entry.value) : g.constant(entry.value));
    }
    return vars;
}

ad::Var representation(ad::Graph& g, const BackboneConfig& cfg, const ModelBinding& model, ad::Var x, bool train,
                       RngStream& dropout_rng) {
    const std::size_t n = g.value(x).rows();
    if (g.value(x).cols() != cfg.input_dim) {
        throw ShapeError("backbone expects " + std::to_string(cfg.input_dim) + " input features, got " +
                         std::to_string(g.value(x).cols()));
    }
    if (cfg.architecture == Architecture::Mlp) {
        ad::Var h = x;
        for (std::size_t i = 0; i < cfg.depth; ++i) {
            h = linear(g, model, fc(i), h, train, dropout_rng);
            h = ad::relu(g, ad::add_bias(g, h, weight(model, fc(i) + ".bias")));
        }
        return h;
    }

    const std::size_t t = cfg.tokens, w = cfg.width;
    ad::Var e = ad::matmul(g, x, weight(model, "embed.proj"));
    e = ad::reshape(g, e, Shape{n * t, cfg.token_dim});
    e = ad::matmul(g, e, weight(model, "embed.tok"));
    e = ad::reshape(g, e, Shape{n, t * w});
    ad::Var pos = ad::reshape(g, weight(model, "embed.pos"), Shape{1, t * w});
    ad::Var h = ad::reshape(g, ad::add_bias(g, e, pos), Shape{n * t, w});

    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(w));
    for (std::size_t i = 0; i < cfg.depth; ++i) {
        ad::Var a = ad::layer_norm_rows(g, h, weight(model, blk(i, "ln1.g")), weight(model, blk(i, "ln1.b")));
        ad::Var q = linear(g, model, blk(i, "q"), a, train, dropout_rng);
        ad::Var k = linear(g, model, blk(i, "k"), a, train, dropout_rng);
        ad::Var v = linear(g, model, blk(i, "v"), a, train, dropout_rng);
        ad::Var p = ad::softmax_rows(g, ad::attention_scores(g, q, k, t, attn_scale));
        ad::Var o = ad::attention_mix(g, p, v, t);
        h = ad::add(g, h, linear(g, model, blk(i, "o"), o, train, dropout_rng));

        ad::Var m = ad::layer_norm_rows(g, h, weight(model, blk(i, "ln2.g")), weight(model, blk(i, "ln2.b")));
        ad::Var f = ad::relu(g, ad::add_bias(g, ad::matmul(g, m, weight(model, blk(i, "mlp1"))),
                                             weight(model, blk(i, "mlp1.bias"))));
        f = ad::add_bias(g, ad::matmul(g, f, weight(model, blk(i, "mlp2"))), weight(model, blk(i, "mlp2.bias")));
        h = ad::add(g, h, f);
    }
    h = ad::layer_norm_rows(g, h, weight(model, "final.ln.g"), weight(model, "final.ln.b"));
    return ad::token_mean(g, h, t);
}

HeadVars bind_head(ad::Graph& g, const ClassifierHead& head, bool trainable) {
    if (trainable) {
        return {g.parameter(head.weight()), g.parameter(head.bias())};
    }
    return {g.constant(head.weight()), g.constant(head.bias())};
}

ad::Var head_logits(ad::Graph& g, const HeadVars& head, ad::Var features) {
    return ad::add_bias(g, ad::matmul(g, features, head.weight), head.bias);
}

ClassifierHead::ClassifierHead(Tensor weight, Tensor bias, Party owner)
    : weight_(std::move(weight)), bias_(std::move(bias)), owner_(owner) {
    if (weight_.cols() != 2 || bias_.shape() != Shape{1, 2}) {
        throw ShapeError("classifier head must be [h x 2] with a [1 x 2] bias");
    }
}

ClassifierHead ClassifierHead::init(std::size_t feature_dim, Party owner, RngStream& rng, double sigma) {
    return ClassifierHead(gaussian(feature_dim, 2, sigma, rng), Tensor(1, 2), owner);
}

ad::Var forward(ad::Graph& g, const Backbone& base, std::span<const AdapterUse> stacks, const ClassifierHead& head,
                const Tensor& x, bool train_mode, RngStream& rng, double dropout) {
    ModelBinding model;
    model.weights = bind_weights(g, base.weights, false);
    model.dropout = dropout;
    std::vector<StackVars> vars;
    vars.reserve(stacks.size());
    for (const auto& use : stacks) {
        if (use.stack == nullptr) {
            throw CompositionError("null adapter stack");
        }
        if (use.sign != 1 && use.sign != -1) {
            throw CompositionError("adapter sign must be +1 or -1");
        }
        check_stack_fits(base, *use.stack);
        vars.push_back(bind_stack(g, *use.stack, false));
    }
    for (std::size_t i = 0; i < stacks.size(); ++i) {
        model.adapters.push_back({&vars[i], stacks[i].sign * stacks[i].coeff});
    }
    ad::Var rep = representation(g, base.config, model, g.constant(x), train_mode, rng);
    if (g.value(rep).cols() != head.weight().rows()) {
        throw ShapeError("head expects " + std::to_string(head.weight().rows()) + " features");
    }
    return head_logits(g, bind_head(g, head, false), rep);
}

Tensor forward_logits(const Backbone& base, std::span<const AdapterUse> stacks, const ClassifierHead& head,
                      const Tensor& x) {
    ad::Graph g;
    RngStream unused(0, "eval");
    return g.value(forward(g, base, stacks, head, x, false, unused));
}

Tensor forward_features(const Backbone& base, std::span<const AdapterUse> stacks, const Tensor& x) {
    ad::Graph g;
    RngStream unused(0, "eval");
    ModelBinding model;
    model.weights = bind_weights(g, base.weights, false);
    std::vector<StackVars> vars;
    vars.reserve(stacks.size());
    for (const auto& use : stacks) {
        check_stack_fits(base, *use.stack);
        vars.push_back(bind_stack(g, *use.stack, false));
    }
    for (std::size_t i = 0; i < stacks.size(); ++i) {
        model.adapters.push_back({&vars[i], stacks[i].sign * stacks[i].coeff});
    }
    return g.value(representation(g, base.config, model, g.constant(x), false, unused));
}

Backbone merged(const Backbone& base, std::span<const AdapterUse> stacks) {
    Backbone out = base;
    for (const auto& use : stacks) {
        out.weights = compose(out.weights, *use.stack, use.sign, use.coeff);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Construction and pretraining

namespace {

// Pretext: binary labels from a fixed random two-layer teacher over standard normal inputs.
void pretrain(Backbone& bb, RngStream& rng) {
    const BackboneConfig& cfg = bb.config;
    const std::size_t f = cfg.input_dim;
    // Several random tanh teachers, one throwaway head each; a single teacher
    // collapses the features onto one direction.
    constexpr std::size_t kTeachers = 8;
    constexpr std::size_t kTeacherUnits = 8;
    std::vector<Tensor> teacher_in, teacher_out;
    std::vector<ClassifierHead> heads;
    RngStream head_rng = rng.child("pretext-head");
    for (std::size_t t = 0; t < kTeachers; ++t) {
        teacher_in.push_back(gaussian(f, kTeacherUnits, 1.0 / std::sqrt(static_cast<double>(f)), rng));
        teacher_out.push_back(gaussian(kTeacherUnits, 1, 1.0, rng));
        heads.push_back(ClassifierHead::init(cfg.width, Party::SolutionDeveloper, head_rng, 0.1));
    }
    RngStream data_rng = rng.child("pretext-data");
    RngStream unused(0, "no-dropout");

    AdamWConfig opt;
    opt.weight_decay = 0.0;
    AdamWState state;
    for (std::size_t step = 0; step < cfg.pretrain_steps; ++step) {
        Tensor x = gaussian(cfg.pretrain_batch, f, 1.0, data_rng);
        std::vector<std::vector<int>> labels(kTeachers, std::vector<int>(cfg.pretrain_batch));
        for (std::size_t t = 0; t < kTeachers; ++t) {
            const Tensor hidden = dense::matmul(x, teacher_in[t]);
            for (std::size_t i = 0; i < cfg.pretrain_batch; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < kTeacherUnits; ++j) {
                    s += teacher_out[t][j] * std::tanh(hidden(i, j));
                }
                labels[t][i] = s > 0.0 ? 1 : 0;
            }
        }

        ad::Graph g;
        ModelBinding model;
        model.weights = bind_weights(g, bb.weights, true);
        ad::Var rep = representation(g, cfg, model, g.constant(std::move(x)), false, unused);
        std::vector<HeadVars> hvs;
        std::optional<ad::Var> loss;
        for (std::size_t t = 0; t < kTeachers; ++t) {
            hvs.push_back(bind_head(g, heads[t], true));
            ad::Var l = ad::cross_entropy_logits(g, head_logits(g, hvs.back(), rep), labels[t]);
            loss = loss ? ad::add(g, *loss, l) : l;
        }
        g.backward(ad::scale(g, *loss, 1.0 / kTeachers));

        std::vector<Tensor*> params;
        std::vector<const Tensor*> grads;
        for (const auto& [id, var] : model.weights) {
            params.push_back(&bb.weights.mutable_at(id));
            grads.push_back(&g.grad(var));
        }
        for (std::size_t t = 0; t < kTeachers; ++t) {
            params.push_back(&heads[t].mutable_weight());
            grads.push_back(&g.grad(hvs[t].weight));
            params.push_back(&heads[t].mutable_bias());
            grads.push_back(&g.grad(hvs[t].bias));
        }
        adamw_step(params, grads, state, opt, cosine_lr(step, cfg.pretrain_steps, cfg.pretrain_lr));
    }
}

} // namespace

Backbone build_backbone(const BackboneConfig& cfg) {
    cfg.validate();
    RngStream rng(cfg.seed, "backbone");
    Backbone bb{cfg, {}};
    RngStream init_rng = rng.child("init");
    bb.weights = initial_weights(cfg, init_rng);
    if (cfg.pretrain_steps > 0) {
        RngStream pre_rng = rng.child("pretrain");
        pretrain(bb, pre_rng);
    }
    WeightMap frozen;
    for (const auto& [id, entry] : bb.weights.entries()) {
        Tensor t = entry.value;
        for (double& v : t.data()) {
            v = static_cast<double>(static_cast<float>(v));
        }
        frozen.set(id, std::move(t), true);
    }
    bb.weights = std::move(frozen);
    return bb;
}

// ---------------------------------------------------------------------------
// Checkpoint codec

namespace {
constexpr char kCheckpointMagic[4] = {'F', 'B', 'K', 'B'};
constexpr std::uint32_t kCheckpointVersion = 1;
} // namespace

io::Bytes encode_checkpoint(const Backbone& backbone) {
    const BackboneConfig& c = backbone.config;
    io::ByteWriter w;
    w.raw(std::string_view(kCheckpointMagic, 4));
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(c.architecture));
    w.u32(static_cast<std::uint32_t>(c.depth));
    w.u32(static_cast<std::uint32_t>(c.width));
    w.u32(static_cast<std::uint32_t>(c.tokens));
    w.u32(static_cast<std::uint32_t>(c.token_dim));
    w.u32(static_cast<std::uint32_t>(c.input_dim));
    w.u64(c.seed);
    w.u32(static_cast<std::uint32_t>(c.pretrain_steps));
    w.u32(static_cast<std::uint32_t>(c.pretrain_batch));
    w.f64(c.pretrain_lr);
    w.u32(static_cast<std::uint32_t>(backbone.weights.size()));
    for (const auto& [id, entry] : backbone.weights.entries()) {
        w.string(id);
        w.u32(static_cast<std::uint32_t>(entry.value.rows()));
        w.u32(static_cast<std::uint32_t>(entry.value.cols()));
        for (double v : entry.value.data()) {
            w.f32(static_cast<float>(v));
        }
    }
    return w.take();
}

Backbone decode_checkpoint(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    const std::string magic = r.raw(4, "magic");
    if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0) {
        throw FormatError("bad checkpoint magic", 0);
    }
    const std::size_t version_at = r.offset();
    if (r.u32("version") != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version", version_at);
    }
    Backbone bb;
    BackboneConfig& c = bb.config;
    const std::size_t arch_at = r.offset();
    const std::uint32_t arch = r.u32("architecture");
    if (arch > 1) {
        throw FormatError("unknown architecture code " + std::to_string(arch), arch_at);
    }
    c.architecture = static_cast<Architecture>(arch);
    c.depth = r.u32("depth");
    c.width = r.u32("width");
    c.tokens = r.u32("tokens");
    c.token_dim = r.u32("token_dim");
    c.input_dim = r.u32("input_dim");
    c.seed = r.u64("seed");
    c.pretrain_steps = r.u32("pretrain_steps");
    c.pretrain_batch = r.u32("pretrain_batch");
    c.pretrain_lr = r.f64("pretrain_lr");
    const std::uint32_t count = r.u32("tensor count");
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string id = r.string("tensor id");
        const std::uint32_t rows = r.u32("rows");
        const std::uint32_t cols = r.u32("cols");
        const std::size_t n = static_cast<std::size_t>(rows) * cols;
        if (r.remaining() < 4 * n) {
            throw FormatError("truncated tensor '" + id + "'", r.offset());
        }
        Tensor t(rows, cols);
        for (double& v : t.data()) {
            v = static_cast<double>(r.f32("value"));
        }
        bb.weights.set(id, std::move(t), true);
    }
    r.expect_end();
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("invalid checkpoint config: ") + e.what(), 0);
    }
    return bb;
}

void save_checkpoint(const Backbone& backbone, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_checkpoint(backbone));
}

Backbone load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

} // namespace fairlora
