// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "fairlora/train.hpp"

#include <cmath>
#include <set>

#include "fairlora/errors.hpp"
#include "fairlora/hash.hpp"

namespace fairlora {

const char* to_string(Strategy s) noexcept {
    switch (s) {
    case Strategy::Erm: return "erm";
    case Strategy::Unl: return "unl";
    case Strategy::Adv: return "adv";
    case Strategy::Orth: return "orth";
    }
    return "?";
}

Strategy parse_strategy(const std::string& s) {
    if (s == "erm") return Strategy::Erm;
    if (s == "unl") return Strategy::Unl;
    if (s == "adv") return Strategy::Adv;
    if (s == "orth") return Strategy::Orth;
    throw ConfigError("unknown strategy '" + s + "' (expected erm, unl, adv or orth)");
}

void TrainConfig::validate() const {
    if (!(lr > 0.0) || !(weight_decay >= 0.0)) {
        throw ConfigError("lr must be positive and weight_decay non-negative");
    }
    if (batch_size == 0 || rank == 0) {
        throw ConfigError("batch_size and rank must be at least 1");
    }
    if (!(alpha > 0.0) || !(init_sigma > 0.0)) {
        throw ConfigError("alpha and init_sigma must be positive");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw ConfigError("dropout must lie in [0, 1)");
    }
    if (!(lambda_norm >= 0.0) || !(lambda_sen >= 0.0) || !(lambda_orth >= 0.0)) {
        throw ConfigError("lambda_norm, lambda_sen and lambda_orth must be non-negative");
    }
    if (!(grl_scale >= 0.0)) {
        throw ConfigError("grl_scale must be non-negative");
    }
    if (!(divergence_factor > 1.0)) {
        throw ConfigError("divergence_factor must exceed 1");
    }
}

std::size_t TrainConfig::steps_for(std::size_t n) const {
    if (steps_per_epoch > 0) {
        return steps_per_epoch;
    }
    return (n + batch_size - 1) / batch_size;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"lr", c.lr},
                       {"weight_decay", c.weight_decay},
                       {"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"steps_per_epoch", c.steps_per_epoch},
                       {"rank", c.rank},
                       {"alpha", c.alpha},
                       {"dropout", c.dropout},
                       {"init_sigma", c.init_sigma},
                       {"lambda_norm", c.lambda_norm},
                       {"lambda_sen", c.lambda_sen},
                       {"lambda_orth", c.lambda_orth},
                       {"orth_target", c.orth_target == OrthTarget::Identity ? "identity" : "zero"},
                       {"grl_scale", c.grl_scale},
                       {"adv_rounds", c.adv_rounds},
                       {"epochs_sen", c.epochs_sen},
                       {"epochs_task", c.epochs_task},
                       {"divergence_factor", c.divergence_factor},
                       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    if (!j.is_object()) {
        throw ConfigError("train config must be a JSON object");
    }
    static const std::set<std::string> known{
        "lr",        "weight_decay", "epochs",      "batch_size",  "steps_per_epoch", "rank",       "alpha",
        "dropout",   "init_sigma",   "lambda_norm", "lambda_sen",  "lambda_orth",     "orth_target", "grl_scale",
        "adv_rounds", "epochs_sen",  "epochs_task", "divergence_factor", "seed"};
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) {
            throw ConfigError("unknown train config key '" + key + "'");
        }
    }
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) {
                j.at(key).get_to(field);
            }
        };
        get("lr", c.lr);
        get("weight_decay", c.weight_decay);
        get("epochs", c.epochs);
        get("batch_size", c.batch_size);
        get("steps_per_epoch", c.steps_per_epoch);
        get("rank", c.rank);
        get("alpha", c.alpha);
        get("dropout", c.dropout);
        get("init_sigma", c.init_sigma);
        get("lambda_norm", c.lambda_norm);
        get("lambda_sen", c.lambda_sen);
        get("lambda_orth", c.lambda_orth);
        get("grl_scale", c.grl_scale);
        get("adv_rounds", c.adv_rounds);
        get("epochs_sen", c.epochs_sen);
        get("epochs_task", c.epochs_task);
        get("divergence_factor", c.divergence_factor);
        get("seed", c.seed);
        if (j.contains("orth_target")) {
            const std::string t = j.at("orth_target").get<std::string>();
            if (t == "identity") {
                c.orth_target = OrthTarget::Identity;
            } else if (t == "zero") {
                c.orth_target = OrthTarget::Zero;
            } else {
                throw ConfigError("orth_target must be identity or zero");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad train config: ") + e.what());
    }
}

RoleStreams role_streams(std::uint64_t seed, std::string_view role) {
    const RngStream root = RngStream(seed, "train").child(role);
    return {root.child("init"), root.child("head"), root.child("dropout"), root.child("sampling")};
}

namespace {

struct ClassIndex {
    std::vector<std::size_t> rows[2];
};

ClassIndex index_classes(std::span<const int> labels) {
    ClassIndex ci;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) {
            throw DomainError("label at row " + std::to_string(i) + " is not 0 or 1");
        }
        ci.rows[labels[i]].push_back(i);
    }
    if (ci.rows[0].empty() || ci.rows[1].empty()) {
        throw ConfigError("class-balanced sampling needs both classes present");
    }
    return ci;
}

std::vector<std::size_t> draw_balanced(const ClassIndex& ci, std::size_t batch, RngStream& rng) {
    std::vector<std::size_t> idx(batch);
    for (auto& i : idx) {
        const auto& pool = ci.rows[rng.next_u64() >> 63];
        i = pool[rng.below(pool.size())];
    }
    return idx;
}

} // namespace

BalancedSampler::BalancedSampler(std::span<const int> labels, RngStream rng) : rng_(rng) {
    ClassIndex ci = index_classes(labels);
    by_class_[0] = std::move(ci.rows[0]);
    by_class_[1] = std::move(ci.rows[1]);
}

std::vector<std::size_t> BalancedSampler::next(std::size_t batch_size) {
    std::vector<std::size_t> idx(batch_size);
    for (auto& i : idx) {
        const auto& pool = by_class_[rng_.next_u64() >> 63];
        i = pool[rng_.below(pool.size())];
    }
    return idx;
}

std::vector<std::vector<std::size_t>> balanced_batches(std::span<const int> labels, std::size_t batch_size,
                                                       std::size_t count, RngStream rng) {
    BalancedSampler s(labels, rng);
    std::vector<std::vector<std::size_t>> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(s.next(batch_size));
    }
    return out;
}

PartyState init_party_state(const Backbone& base, const TrainConfig& cfg, std::string_view role, Party owner) {
    cfg.validate();
    RoleStreams streams = role_streams(cfg.seed, role);
    LoraAdapterStack stack = init_adapter_stack(base.adapter_shapes(), cfg.rank, cfg.alpha, cfg.init_sigma,
                                                streams.init);
    ClassifierHead head = ClassifierHead::init(base.feature_dim(), owner, streams.head);
    return PartyState{std::move(stack), std::move(head), {}, 0, {}, 0.0, std::move(streams)};
}

namespace {

// One adapter slot of the trained model: either the trainable stack (nullptr) or a frozen one.
struct Slot {
    const LoraAdapterStack* frozen = nullptr;
    double coeff = 1.0;
};

struct Objective {
    const WeightMap* weights = nullptr;
    const BackboneConfig* arch = nullptr;
    std::vector<Slot> slots{Slot{}};
    const LoraAdapterStack* orth_ref = nullptr;
    std::optional<double> grl;
    std::string context;
};

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> idx) {
    Tensor out(idx.size(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        std::copy_n(x.data().data() + idx[i] * x.cols(), x.cols(), &out(i, 0));
    }
    return out;
}

void fit(const Objective& obj, PartyState& ps, const Tensor& x, std::span<const int> labels, const TrainConfig& cfg,
         std::size_t epochs, std::size_t total_epochs) {
    if (epochs == 0) {
        return;
    }
    if (x.rows() != labels.size()) {
        throw ShapeError("dataset has " + std::to_string(x.rows()) + " rows but " + std::to_string(labels.size()) +
                         " labels");
    }
    const ClassIndex classes = index_classes(labels);
    const std::size_t steps = cfg.steps_for(labels.size());
    AdamWConfig opt_cfg;
    opt_cfg.weight_decay = cfg.weight_decay;

    for (std::size_t e = 0; e < epochs; ++e) {
        const std::size_t epoch = ps.epochs_done;
        const double lr = cosine_lr(epoch, total_epochs, cfg.lr);
        double total = 0.0;
        for (std::size_t s = 0; s < steps; ++s) {
            const auto idx = draw_balanced(classes, cfg.batch_size, ps.streams.sampling);
            std::vector<int> yb(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                yb[i] = labels[idx[i]];
            }

            ad::Graph g;
            ModelBinding model;
            model.weights = bind_weights(g, *obj.weights, false);
            model.dropout = cfg.dropout;
            std::vector<StackVars> vars;
            vars.reserve(obj.slots.size());
            std::size_t trainable = 0;
            for (std::size_t i = 0; i < obj.slots.size(); ++i) {
                if (obj.slots[i].frozen == nullptr) {
                    trainable = i;
                    vars.push_back(bind_stack(g, ps.stack, true));
                } else {
                    vars.push_back(bind_stack(g, *obj.slots[i].frozen, false));
                }
            }
            for (std::size_t i = 0; i < obj.slots.size(); ++i) {
                model.adapters.push_back({&vars[i], obj.slots[i].coeff});
            }
            const HeadVars hv = bind_head(g, ps.head, true);

            ad::Var rep = representation(g, *obj.arch, model, g.constant(gather_rows(x, idx)), true,
                                         ps.streams.dropout);
            if (obj.grl) {
                rep = ad::gradient_reversal(g, rep, *obj.grl);
            }
            ad::Var loss = ad::cross_entropy_logits(g, head_logits(g, hv, rep), yb);
            loss = ad::add(g, loss, ad::scale(g, r_norm(g, vars[trainable]), cfg.lambda_norm));
            if (obj.orth_ref != nullptr) {
                const StackVars ref = bind_stack(g, *obj.orth_ref, false);
                loss = ad::add(g, loss,
                               ad::scale(g, r_orth(g, vars[trainable], ref, cfg.orth_target), cfg.lambda_orth));
            }

            const double value = g.value(loss).item();
            if (ps.opt.step == 0) {
                ps.initial_loss = value;
            }
            if (!std::isfinite(value) || value > cfg.divergence_factor * std::max(ps.initial_loss, 1e-12)) {
                throw TrainingError(obj.context + ": loss diverged at epoch " + std::to_string(epoch) + ", step " +
                                    std::to_string(s) + " (loss " + std::to_string(value) + ")");
            }
            total += value;
            g.backward(loss);

            std::vector<Tensor*> params;
            std::vector<const Tensor*> grads;
            for (const auto& [id, f] : vars[trainable].factors) {
                LoraAdapter& ad = ps.stack.mutable_at(id);
                params.push_back(&ad.a);
                grads.push_back(&g.grad(f.a));
                params.push_back(&ad.b);
                grads.push_back(&g.grad(f.b));
            }
            params.push_back(&ps.head.mutable_weight());
            grads.push_back(&g.grad(hv.weight));
            params.push_back(&ps.head.mutable_bias());
            grads.push_back(&g.grad(hv.bias));
            adamw_step(params, grads, ps.opt, opt_cfg, lr);
        }
        ps.loss_trace.push_back(total / static_cast<double>(steps));
        ++ps.epochs_done;
    }
}

TrainedArtifacts finish(Strategy s, PartyState&& ps) {
    TrainedArtifacts art;
    art.strategy = s;
    ps.stack.set_strategy(to_string(s));
    art.task_stack = std::move(ps.stack);
    art.task_head = std::move(ps.head);
    art.loss_trace = std::move(ps.loss_trace);
    art.initial_loss = ps.initial_loss;
    return art;
}

LoraAdapterStack via_bundle(const LoraAdapterStack& stack) { return decode_bundle(encode_bundle(stack)); }

} // namespace

TrainedArtifacts train_erm(const Backbone& base, const TaskDataset& d_task, const TrainConfig& cfg) {
    PartyState sd = init_party_state(base, cfg, "sd.task", Party::SolutionDeveloper);
    Objective obj{&base.weights, &base.config, {Slot{}}, nullptr, std::nullopt, "erm"};
    fit(obj, sd, d_task.x, d_task.labels, cfg, cfg.epochs, cfg.epochs);
    return finish(Strategy::Erm, std::move(sd));
}

TrainedArtifacts train_sensitive_erm(const Backbone& base, const SensitiveDataset& d_sen, const TrainConfig& cfg) {
    PartyState co = init_party_state(base, cfg, "co.sen", Party::ComplianceOfficer);
    Objective obj{&base.weights, &base.config, {Slot{}}, nullptr, std::nullopt, "sensitive erm"};
    fit(obj, co, d_sen.x, d_sen.labels, cfg, cfg.epochs, cfg.epochs);
    TrainedArtifacts art;
    art.strategy = Strategy::Erm;
    co.stack.set_strategy("sen");
    art.sensitive_stack = std::move(co.stack);
    art.sensitive_head = std::move(co.head);
    art.loss_trace = std::move(co.loss_trace);
    art.initial_loss = co.initial_loss;
    art.task_stack = LoraAdapterStack(cfg.rank, cfg.alpha);
    art.task_head = ClassifierHead(Tensor(base.feature_dim(), 2), Tensor(1, 2), Party::SolutionDeveloper);
    return art;
}

TrainedArtifacts train_unl(const Backbone& base, const LoraAdapterStack& sensitive, const TaskDataset& d_task,
                           const TrainConfig& cfg) {
    cfg.validate();
    const WeightMap debiased = compose(base.weights, sensitive, -1, cfg.lambda_sen);
    PartyState sd = init_party_state(base, cfg, "sd.task", Party::SolutionDeveloper);
    Objective obj{&debiased, &base.config, {Slot{}}, nullptr, std::nullopt, "unl"};
    fit(obj, sd, d_task.x, d_task.labels, cfg, cfg.epochs, cfg.epochs);
    TrainedArtifacts art = finish(Strategy::Unl, std::move(sd));
    art.sensitive_stack = sensitive;
    art.sensitive_coeff = cfg.lambda_sen;
    return art;
}

TrainedArtifacts train_orth(const Backbone& base, const LoraAdapterStack& sensitive, const TaskDataset& d_task,
                            const TrainConfig& cfg) {
    PartyState sd = init_party_state(base, cfg, "sd.task", Party::SolutionDeveloper);
    if (sensitive.rank() != sd.stack.rank()) {
        throw CompositionError("orth: sensitive stack rank " + std::to_string(sensitive.rank()) +
                               " differs from task rank " + std::to_string(sd.stack.rank()));
    }
    Objective obj{&base.weights, &base.config, {Slot{}}, &sensitive, std::nullopt, "orth"};
    fit(obj, sd, d_task.x, d_task.labels, cfg, cfg.epochs, cfg.epochs);
    TrainedArtifacts art = finish(Strategy::Orth, std::move(sd));
    art.sensitive_stack = sensitive;
    return art;
}

void adv_sensitive_phase(const Backbone& base, const LoraAdapterStack& task, PartyState& co,
                         const SensitiveDataset& d_sen, const TrainConfig& cfg, std::size_t round) {
    Objective obj{&base.weights,
                  &base.config,
                  {Slot{}, Slot{&task, 1.0}},
                  nullptr,
                  cfg.grl_scale,
                  "adv round " + std::to_string(round) + " sensitive phase"};
    fit(obj, co, d_sen.x, d_sen.labels, cfg, cfg.epochs_sen, cfg.adv_rounds * cfg.epochs_sen);
}

void adv_task_phase(const Backbone& base, const LoraAdapterStack& sensitive, PartyState& sd,
                    const TaskDataset& d_task, const TrainConfig& cfg, std::size_t round) {
    Objective obj{&base.weights,
                  &base.config,
                  {Slot{&sensitive, 1.0}, Slot{}},
                  nullptr,
                  std::nullopt,
                  "adv round " + std::to_string(round) + " task phase"};
    fit(obj, sd, d_task.x, d_task.labels, cfg, cfg.epochs_task, cfg.adv_rounds * cfg.epochs_task);
}

TrainedArtifacts train_adv(const Backbone& base, const TaskDataset& d_task, const SensitiveDataset& d_sen,
                           const TrainConfig& cfg) {
    PartyState sd = init_party_state(base, cfg, "sd.task", Party::SolutionDeveloper);
    PartyState co = init_party_state(base, cfg, "co.adv", Party::ComplianceOfficer);
    LoraAdapterStack sen_at_sd = via_bundle(co.stack);
    for (std::size_t k = 0; k < cfg.adv_rounds; ++k) {
        const LoraAdapterStack task_at_co = via_bundle(sd.stack);
        adv_sensitive_phase(base, task_at_co, co, d_sen, cfg, k);
        sen_at_sd = via_bundle(co.stack);
        adv_task_phase(base, sen_at_sd, sd, d_task, cfg, k);
    }
    TrainedArtifacts art = finish(Strategy::Adv, std::move(sd));
    sen_at_sd.set_strategy("adv.sen");
    art.sensitive_stack = std::move(sen_at_sd);
    art.sensitive_head = std::move(co.head);
    art.sensitive_coeff = 1.0;
    return art;
}

EvalModel evaluation_model(const Backbone& base, const TrainedArtifacts& art) {
    EvalModel m{base, {}};
    switch (art.strategy) {
    case Strategy::Unl:
        if (!art.sensitive_stack) {
            throw CompositionError("unl artifacts lack the sensitive stack");
        }
        m.base.weights = compose(base.weights, *art.sensitive_stack, -1, art.sensitive_coeff);
        break;
    case Strategy::Adv:
        if (!art.sensitive_stack) {
            throw CompositionError("adv artifacts lack the sensitive stack");
        }
        m.stacks.push_back({&*art.sensitive_stack, 1, art.sensitive_coeff});
        break;
    default: break;
    }
    m.stacks.push_back({&art.task_stack, 1, 1.0});
    return m;
}

std::vector<double> predict_scores(const Backbone& base, const TrainedArtifacts& art, const Tensor& x) {
    const EvalModel m = evaluation_model(base, art);
    const Tensor logits = forward_logits(m.base, m.stacks, art.task_head, x);
    std::vector<double> p(logits.rows());
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = 1.0 / (1.0 + std::exp(logits(i, 0) - logits(i, 1)));
    }
    return p;
}

double task_loss(const Backbone& base, std::span<const AdapterUse> stacks, const ClassifierHead& head,
                 const Tensor& x, std::span<const int> labels) {
    ad::Graph g;
    RngStream unused(0, "eval");
    ad::Var logits = forward(g, base, stacks, head, x, false, unused);
    return g.value(ad::cross_entropy_logits(g, logits, labels)).item();
}

std::string head_digest(const ClassifierHead& head) {
    Digest d;
    d.update(party_tag(head.owner()));
    d.update(head.weight());
    d.update(head.bias());
    return d.hex();
}

nlohmann::json training_manifest(const Backbone& base, const TrainedArtifacts& art, const TrainConfig& cfg) {
    nlohmann::json j;
    j["strategy"] = to_string(art.strategy);
    j["config"] = cfg;
    j["backbone_sha256"] = base.hash();
    j["loss_trace"] = art.loss_trace;
    j["initial_loss"] = art.initial_loss;
    nlohmann::json a;
    a["task_stack"] = art.task_stack.digest();
    a["task_bundle_sha256"] = sha256_hex(encode_bundle(art.task_stack));
    a["task_head"] = head_digest(art.task_head);
    if (art.sensitive_stack) {
        a["sensitive_stack"] = art.sensitive_stack->digest();
    }
    if (art.sensitive_head) {
        a["sensitive_head"] = head_digest(*art.sensitive_head);
    }
    j["artifacts"] = a;
    return j;
}

} // namespace fairlora
