// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "fairlora/experiment.hpp"

#include <fstream>
#include <memory>
#include <set>

#include "fairlora/binary_io.hpp"
#include "fairlora/errors.hpp"

namespace fairlora {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const char* what) {
    if (!j.is_object()) {
        throw ConfigError(std::string(what) + " must be a JSON object");
    }
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) {
            throw ConfigError(std::string("unknown ") + what + " key '" + key + "'");
        }
    }
}

template <typename T>
void get(const json& j, const char* key, T& field) {
    if (j.contains(key)) {
        try {
            j.at(key).get_to(field);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
        }
    }
}

} // namespace

void to_json(json& j, const GenSpec& s) {
    j = json{{"n", s.n},
             {"features", s.features},
             {"beta", s.beta},
             {"eta", s.eta},
             {"p_group", s.p_group},
             {"pos_rate", s.pos_rate},
             {"task_noise", s.task_noise},
             {"group_amp", s.group_amp},
             {"test_n", s.test_n},
             {"seed", s.seed}};
}

void from_json(const json& j, GenSpec& s) {
    reject_unknown(j,
                   {"n", "features", "beta", "eta", "p_group", "pos_rate", "task_noise", "group_amp", "test_n",
                    "seed"},
                   "data");
    get(j, "n", s.n);
    get(j, "features", s.features);
    get(j, "beta", s.beta);
    get(j, "eta", s.eta);
    get(j, "p_group", s.p_group);
    get(j, "pos_rate", s.pos_rate);
    get(j, "task_noise", s.task_noise);
    get(j, "group_amp", s.group_amp);
    get(j, "test_n", s.test_n);
    get(j, "seed", s.seed);
}

void to_json(json& j, const BackboneConfig& c) {
    j = json{{"architecture", to_string(c.architecture)},
             {"depth", c.depth},
             {"width", c.width},
             {"tokens", c.tokens},
             {"token_dim", c.token_dim},
             {"input_dim", c.input_dim},
             {"seed", c.seed},
             {"pretrain_steps", c.pretrain_steps},
             {"pretrain_batch", c.pretrain_batch},
             {"pretrain_lr", c.pretrain_lr}};
}

void from_json(const json& j, BackboneConfig& c) {
    reject_unknown(j,
                   {"architecture", "depth", "width", "tokens", "token_dim", "input_dim", "seed", "pretrain_steps",
                    "pretrain_batch", "pretrain_lr"},
                   "backbone");
    if (j.contains("architecture")) {
        c.architecture = parse_architecture(j.at("architecture").get<std::string>());
    }
    get(j, "depth", c.depth);
    get(j, "width", c.width);
    get(j, "tokens", c.tokens);
    get(j, "token_dim", c.token_dim);
    get(j, "input_dim", c.input_dim);
    get(j, "seed", c.seed);
    get(j, "pretrain_steps", c.pretrain_steps);
    get(j, "pretrain_batch", c.pretrain_batch);
    get(j, "pretrain_lr", c.pretrain_lr);
}

TrainConfig desk_train_config() {
    TrainConfig c;
    c.lr = 3e-3;
    c.epochs = 15;
    c.lambda_norm = 1e-3;
    c.lambda_sen = 1.0;
    c.lambda_orth = 1.0;
    c.orth_target = OrthTarget::Zero;
    c.epochs_sen = 5;
    c.epochs_task = 5;
    return c;
}

void ExperimentSpec::validate() const {
    if (strategies.empty()) {
        throw ConfigError("experiment needs at least one strategy");
    }
    if (seeds.empty()) {
        throw ConfigError("experiment needs at least one seed");
    }
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw ConfigError("threshold must lie in [0, 1]");
    }
    if (backbone.input_dim != data.features) {
        throw ConfigError("backbone input_dim (" + std::to_string(backbone.input_dim) +
                          ") must equal the feature count (" + std::to_string(data.features) + ")");
    }
    data.validate();
    train.validate();
    backbone.validate();
}

void to_json(json& j, const ExperimentSpec& s) {
    std::vector<std::string> names;
    for (Strategy st : s.strategies) {
        names.emplace_back(to_string(st));
    }
    j = json{{"strategies", names}, {"data", s.data},           {"train", s.train},
             {"backbone", s.backbone}, {"seeds", s.seeds},     {"threshold", s.threshold},
             {"write_runs", s.write_runs}};
}

void from_json(const json& j, ExperimentSpec& s) {
    reject_unknown(j, {"strategies", "data", "train", "backbone", "seeds", "threshold", "write_runs"}, "spec");
    if (j.contains("strategies")) {
        s.strategies.clear();
        for (const auto& name : j.at("strategies")) {
            s.strategies.push_back(parse_strategy(name.get<std::string>()));
        }
    }
    if (j.contains("data")) {
        from_json(j.at("data"), s.data);
    }
    if (j.contains("train")) {
        from_json(j.at("train"), s.train);
    }
    if (j.contains("backbone")) {
        from_json(j.at("backbone"), s.backbone);
    }
    get(j, "seeds", s.seeds);
    get(j, "threshold", s.threshold);
    get(j, "write_runs", s.write_runs);
}

ExperimentSpec load_experiment_spec(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open spec " + path.string());
    }
    ExperimentSpec s;
    try {
        from_json(json::parse(in), s);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("spec is not valid JSON: ") + e.what());
    }
    s.validate();
    return s;
}

std::vector<RunRecord> ExperimentResult::records() const {
    std::vector<RunRecord> out;
    out.reserve(runs.size());
    for (const auto& r : runs) {
        out.push_back(r.record);
    }
    return out;
}

EvalFrame test_frame(const Backbone& base, const TrainedArtifacts& art, const DatasetSplits& data) {
    EvalFrame f;
    f.scores = predict_scores(base, art, data.sd_test.x);
    f.labels = data.sd_test.labels;
    f.groups = data.sidecar.test_groups;
    return f;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const std::optional<fs::path>& out) {
    spec.validate();
    std::shared_ptr<const Backbone> base;
    try {
        base = std::make_shared<const Backbone>(build_backbone(spec.backbone));
    } catch (const Error& e) {
        throw StageError("backbone", e.what());
    }
    ExperimentResult result;
    result.backbone_sha256 = base->hash();
    if (out) {
        fs::create_directories(*out);
        save_checkpoint(*base, *out / "backbone.fbkb");
    }

    for (std::uint64_t seed : spec.seeds) {
        GenSpec gen = spec.data;
        gen.seed = seed;
        TrainConfig cfg = spec.train;
        cfg.seed = seed;

        DatasetSplits data;
        try {
            data = generate(gen);
        } catch (const Error& e) {
            throw StageError("data", e.what());
        }
        SdContext sd(base, data.sd_train);
        CoContext co(base, data.co_train);

        for (Strategy s : spec.strategies) {
            const std::string tag = std::string(to_string(s)) + "_seed" + std::to_string(seed);
            ProtocolResult pr;
            try {
                pr = run_protocol(s, sd, co, cfg);
            } catch (const Error& e) {
                throw StageError("train " + tag, e.what());
            }

            const Tensor* datasets[] = {&data.sd_train.x, &data.sd_val.x, &data.sd_test.x, &data.co_train.x};
            std::vector<const ClassifierHead*> heads{&pr.sd.task_head};
            if (pr.co_head) {
                heads.push_back(&*pr.co_head);
            }
            RunOutcome run;
            run.audit = audit_transcript(pr.transcript, datasets, heads);
            if (!run.audit.pass()) {
                throw StageError("audit " + tag, run.audit.to_text());
            }

            try {
                run.record = RunRecord{to_string(s), seed, evaluate(test_frame(*base, pr.sd, data), spec.threshold)};
            } catch (const Error& e) {
                throw StageError("eval " + tag, e.what());
            }
            run.task_stack_digest = pr.sd.task_stack.digest();
            run.loss_trace = pr.sd.loss_trace;

            if (out && spec.write_runs) {
                const fs::path dir = *out / "runs" / tag;
                fs::create_directories(dir);
                pr.transcript.save(dir / "transcript.json");
                io::write_text_atomic(dir / "manifest.json", training_manifest(*base, pr.sd, cfg).dump(2) + "\n");
                io::write_text_atomic(dir / "audit.txt", run.audit.to_text());
                save_head(pr.sd.task_head, dir / "sd" / "task_head.json");
                if (pr.co_head) {
                    save_head(*pr.co_head, dir / "co" / "sensitive_head.json");
                }
                save_bundle(pr.sd.task_stack, dir / "sd" / "task_stack.flra");
            }
            result.runs.push_back(std::move(run));
        }
    }

    if (out) {
        const auto records = result.records();
        io::write_text_atomic(*out / "report.csv", render_csv(records));
        io::write_text_atomic(*out / "report.md", render_markdown(records));
        io::write_text_atomic(*out / "spec.json", json(spec).dump(2) + "\n");
    }
    return result;
}

} // namespace fairlora
