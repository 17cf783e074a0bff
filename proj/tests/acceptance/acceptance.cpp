// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion, exit code 1 if any fails.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "fairlora/experiment.hpp"
#include "fairlora/hash.hpp"
#include "support/grad_suite.hpp"
#include "support/metric_oracle_suite.hpp"

namespace fs = std::filesystem;
using namespace fairlora;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;
};

std::string fmt(double v, int prec = 3) {
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------------------

Verdict gradients() {
    const auto t0 = Clock::now();
    const auto rows = oracle::run_grad_suite(20);
    const double secs = seconds_since(t0);
    Verdict v;
    double worst = 0.0;
    std::string worst_name;
    for (const auto& r : rows) {
        if (!(r.worst < 1e-4)) {
            v.pass = false;
            v.detail += r.name + " rel.err " + fmt(r.worst) + "; ";
        }
        if (r.worst > worst) {
            worst = r.worst;
            worst_name = r.name;
        }
    }
    if (secs >= 60.0) {
        v.pass = false;
    }
    v.detail += std::to_string(rows.size()) + " ops x 20 instances, worst " + fmt(worst) + " (" + worst_name +
                "), " + fmt(secs) + " s";
    return v;
}

double max_weight_diff(const WeightMap& a, const WeightMap& b) {
    double d = 0.0;
    for (const auto& [id, e] : a.entries()) {
        d = std::max(d, dense::max_abs_diff(e.value, b.at(id)));
    }
    return d;
}

Verdict lora_algebra() {
    Verdict v;
    double inversion = 0.0, merge = 0.0;
    bool transparent = true, roundtrip = true;
    for (Architecture arch : {Architecture::Mlp, Architecture::MiniAttention}) {
        BackboneConfig c;
        c.architecture = arch;
        c.pretrain_steps = 50;
        const Backbone bb = build_backbone(c);
        RngStream rng(11, "accept-lora");
        const ClassifierHead head = ClassifierHead::init(bb.feature_dim(), Party::SolutionDeveloper, rng, 0.5);
        const Tensor x = oracle::random_tensor(32, c.input_dim, rng);
        for (int k = 0; k < 10; ++k) {
            LoraAdapterStack fresh = init_adapter_stack(bb.adapter_shapes(), 4, 8.0, 0.02, rng);
            const AdapterUse fu[] = {{&fresh, 1, 1.0}};
            transparent &= forward_logits(bb, fu, head, x) == forward_logits(bb, {}, head, x);

            LoraAdapterStack s = fresh;
            for (const auto& id : bb.attachment_points()) {
                for (double& b : s.mutable_at(id).b.data()) b = 0.3 * rng.normal();
            }
            const WeightMap there = compose(bb.weights, s, +1, 0.7);
            inversion = std::max(inversion, max_weight_diff(compose(there, s, -1, 0.7), bb.weights));

            const LoraAdapterStack back = decode_bundle(encode_bundle(s));
            roundtrip &= back.same_factors(round_to_f32(s)) && encode_bundle(back) == encode_bundle(s);

            const AdapterUse use[] = {{&s, 1, 1.0}, {&fresh, -1, 0.5}};
            merge = std::max(merge, dense::max_abs_diff(forward_logits(bb, use, head, x),
                                                        forward_logits(merged(bb, use), {}, head, x)));
        }
    }
    v.pass = transparent && roundtrip && inversion <= 1e-12 && merge <= 1e-10;
    v.detail = std::string("fresh init ") + (transparent ? "bit-identical" : "CHANGES OUTPUT") +
               ", compose/negate inversion " + fmt(inversion) + ", bundle f32 round trip " +
               (roundtrip ? "exact" : "INEXACT") + ", adapter vs merged " + fmt(merge);
    return v;
}

Verdict metric_oracles() {
    const auto r = oracle::run_metric_suite(500, 200);
    Verdict v;
    v.pass = r.mismatches.empty() && r.worst_rate <= 1e-12 && r.worst_roc <= 1e-12 && r.worst_pr <= 1e-9;
    v.detail = std::to_string(r.frames) + " frames, " + std::to_string(r.comparisons) + " comparisons: rates " +
               fmt(r.worst_rate) + ", ROC " + fmt(r.worst_roc) + ", PR " + fmt(r.worst_pr) + ", " +
               std::to_string(r.mismatches.size()) + " definedness mismatch(es)";
    return v;
}

struct Small {
    std::shared_ptr<const Backbone> bb;
    DatasetSplits data;
    TrainConfig cfg;
};

Small small_world() {
    ExperimentSpec spec;
    spec.backbone.pretrain_steps = 100;
    Small s{std::make_shared<const Backbone>(build_backbone(spec.backbone)), {}, spec.train};
    spec.data.n = 1000;
    s.data = generate(spec.data);
    s.cfg.epochs = 3;
    s.cfg.adv_rounds = 2;
    s.cfg.epochs_sen = 1;
    s.cfg.epochs_task = 1;
    return s;
}

Verdict reductions(const Small& w) {
    TrainConfig c = w.cfg;
    c.lambda_sen = 0.0;
    c.lambda_orth = 0.0;
    const LoraAdapterStack sen = *train_sensitive_erm(*w.bb, w.data.co_train, c).sensitive_stack;
    const TrainedArtifacts erm = train_erm(*w.bb, w.data.sd_train, c);
    const TrainedArtifacts unl = train_unl(*w.bb, sen, w.data.sd_train, c);
    const TrainedArtifacts orth = train_orth(*w.bb, sen, w.data.sd_train, c);
    const auto pe = predict_scores(*w.bb, erm, w.data.sd_test.x);
    const bool unl_ok = unl.task_stack.digest() == erm.task_stack.digest() &&
                        head_digest(unl.task_head) == head_digest(erm.task_head) &&
                        predict_scores(*w.bb, unl, w.data.sd_test.x) == pe;
    const bool orth_ok = orth.task_stack.digest() == erm.task_stack.digest() &&
                         head_digest(orth.task_head) == head_digest(erm.task_head) &&
                         predict_scores(*w.bb, orth, w.data.sd_test.x) == pe;
    return {unl_ok && orth_ok, std::string("UNL(lambda_sen=0) ") + (unl_ok ? "==" : "!=") +
                                   " ERM, ORTH(lambda_orth=0) " + (orth_ok ? "==" : "!=") +
                                   " ERM (stack, head and test scores)"};
}

bool check(const AuditReport& r, char letter) {
    for (const auto& c : r.checks) {
        if (c.name.size() > 1 && c.name[1] == letter) return c.pass;
    }
    return false;
}

void plant(TranscriptEntry& e, std::span<const double> values) {
    std::vector<float> f(values.begin(), values.end());
    const std::size_t n = f.size() * sizeof(float);
    std::memcpy(e.payload.data() + e.payload.size() - n, f.data(), n);
    e.sha256 = sha256_hex(e.payload);
}

Verdict audits(const Small& w) {
    Verdict v;
    const Tensor* ds[] = {&w.data.sd_train.x, &w.data.sd_val.x, &w.data.sd_test.x, &w.data.co_train.x};
    std::ostringstream counts;
    std::optional<ProtocolResult> unl;
    for (Strategy s : {Strategy::Erm, Strategy::Unl, Strategy::Orth, Strategy::Adv}) {
        SdContext sd(w.bb, w.data.sd_train);
        CoContext co(w.bb, w.data.co_train);
        ProtocolResult r = run_protocol(s, sd, co, w.cfg);
        std::vector<const ClassifierHead*> heads{&r.sd.task_head};
        if (r.co_head) heads.push_back(&*r.co_head);
        const AuditReport rep = audit_transcript(r.transcript, ds, heads);
        const std::size_t n = r.transcript.count(MessageKind::AdapterBundle);
        counts << to_string(s) << "=" << n << " ";
        v.pass &= rep.pass() && n == expected_messages(s, w.cfg.adv_rounds);
        if (s == Strategy::Unl) unl = std::move(r);
    }
    const ClassifierHead* heads[] = {&unl->sd.task_head, &*unl->co_head};
    Transcript head_leak = unl->transcript, row_leak = unl->transcript, extra = unl->transcript;
    plant(head_leak.entries[0], unl->co_head->weight().data());
    plant(row_leak.entries[0], std::span<const double>(w.data.co_train.x.data().data() + 17 * w.data.co_train.x.cols(),
                                                      w.data.co_train.x.cols()));
    extra.entries.push_back(extra.entries[0]);
    const bool b_caught = !check(audit_transcript(head_leak, ds, heads), 'b');
    const bool c_caught = !check(audit_transcript(row_leak, ds, heads), 'c');
    const bool d_caught = !check(audit_transcript(extra, ds, heads), 'd');
    v.pass &= b_caught && c_caught && d_caught;
    v.detail = "bundles " + counts.str() + "(K=" + std::to_string(w.cfg.adv_rounds) + "), clean audits " +
               (v.pass ? "pass" : "see counts") + "; injected head bytes " + (b_caught ? "caught" : "MISSED") +
               ", dataset row " + (c_caught ? "caught" : "MISSED") + ", extra message " +
               (d_caught ? "caught" : "MISSED");
    return v;
}

// ---------------------------------------------------------------------------
// Grids

ExperimentSpec grid_spec(double beta) {
    ExperimentSpec spec;
    spec.data.beta = beta;
    spec.data.eta = 0.1;
    spec.data.n = 4000;
    spec.data.test_n = 4000;
    spec.seeds = {0, 1, 2};
    return spec;
}

using Table = std::map<std::string, std::map<std::uint64_t, FairnessReport>>;

Table by_strategy(const ExperimentResult& r) {
    Table t;
    for (const auto& run : r.runs) t[run.record.strategy].emplace(run.record.seed, run.record.report);
    return t;
}

double val(const std::optional<double>& v) { return v.value_or(std::nan("")); }

double seed_mean(const std::map<std::uint64_t, FairnessReport>& runs, auto&& pick) {
    double s = 0.0;
    for (const auto& [seed, rep] : runs) s += pick(rep);
    return s / static_cast<double>(runs.size());
}

Verdict orth_reduces_bias(const Table& t) {
    auto dp = [](const FairnessReport& r) { return val(r.at(Metric::Dp).difference); };
    auto dtpr = [](const FairnessReport& r) { return val(r.at(Metric::Tpr).difference); };
    auto acc = [](const FairnessReport& r) { return val(r.at(Metric::Acc).overall.v); };
    const auto& erm = t.at("erm");
    const auto& orth = t.at("orth");
    const double erm_dp = seed_mean(erm, dp), erm_tpr = seed_mean(erm, dtpr);
    const double orth_dp = seed_mean(orth, dp), orth_tpr = seed_mean(orth, dtpr);
    const double erm_acc = seed_mean(erm, acc), orth_acc = seed_mean(orth, acc);
    Verdict v;
    const bool violated = erm_dp > 0.1 || erm_tpr > 0.1;
    // Judge the metric ERM violates most.
    const bool use_dp = erm_dp >= erm_tpr;
    const double before = use_dp ? erm_dp : erm_tpr, after = use_dp ? orth_dp : orth_tpr;
    const double reduction = (before - after) / before;
    const double acc_drop = 100.0 * (erm_acc - orth_acc);
    v.pass = violated && reduction >= 0.30 && acc_drop <= 2.0;
    v.detail = "ERM DP " + fmt(erm_dp) + " dTPR " + fmt(erm_tpr) + " | ORTH DP " + fmt(orth_dp) + " dTPR " +
               fmt(orth_tpr) + " | " + (use_dp ? "DP" : "dTPR") + " reduced " + fmt(100.0 * reduction) +
               "% (need >= 30%), accuracy " + fmt(100.0 * erm_acc) + " -> " + fmt(100.0 * orth_acc) +
               " (drop " + fmt(acc_drop) + " points, limit 2)";
    return v;
}

Verdict adv_improves_dp_ratio(const Table& t) {
    const auto& erm = t.at("erm");
    const auto& adv = t.at("adv");
    std::size_t wins = 0;
    std::string per_seed;
    for (const auto& [seed, rep] : erm) {
        const double e = val(rep.at(Metric::Dp).ratio), a = val(adv.at(seed).at(Metric::Dp).ratio);
        wins += a > e;
        per_seed += "seed " + std::to_string(seed) + ": " + fmt(e) + " -> " + fmt(a) + "; ";
    }
    return {wins >= 2, "ADV beats ERM on the DP ratio in " + std::to_string(wins) + "/3 seeds (" + per_seed + ")"};
}

Verdict fair_data_stays_fair(const Table& t) {
    Verdict v;
    std::ostringstream os;
    constexpr Metric ratio_cols[] = {Metric::Acc, Metric::Ba, Metric::Ppv, Metric::Tpr,
                                     Metric::Fpr, Metric::F1, Metric::Dp};
    for (const auto& [name, runs] : t) {
        const double dp = seed_mean(runs, [](const FairnessReport& r) { return val(r.at(Metric::Dp).difference); });
        double min_ratio = 1.0;
        const char* min_name = "";
        for (Metric m : ratio_cols) {
            const double r = seed_mean(runs, [m](const FairnessReport& rep) { return val(rep.at(m).ratio); });
            if (!(r >= min_ratio)) {
                min_ratio = r;
                min_name = metric_name(m);
            }
        }
        const bool ok = dp < 0.05 && min_ratio > 0.9;
        v.pass &= ok;
        os << name << " DP " << fmt(dp) << " min ratio " << fmt(min_ratio) << " (" << min_name << ")"
           << (ok ? "" : " <- violates") << "; ";
    }
    v.detail = os.str();
    return v;
}

Verdict reproducible(const Small& w, const fs::path& work) {
    Verdict v;
    std::ostringstream os;
    for (Strategy s : {Strategy::Orth, Strategy::Adv}) {
        auto once = [&] {
            SdContext sd(w.bb, w.data.sd_train);
            CoContext co(w.bb, w.data.co_train);
            return run_protocol(s, sd, co, w.cfg);
        };
        const ProtocolResult a = once(), b = once();
        const ProtocolResult d = run_distributed(s, w.bb, w.data, w.cfg, work / (std::string("dist_") + to_string(s)));
        const bool same = a.sd.task_stack.digest() == b.sd.task_stack.digest() &&
                          sha256_hex(encode_bundle(a.sd.task_stack)) == sha256_hex(encode_bundle(b.sd.task_stack));
        const bool dist = d.sd.task_stack.digest() == a.sd.task_stack.digest() &&
                          head_digest(d.sd.task_head) == head_digest(a.sd.task_head);
        v.pass &= same && dist;
        os << to_string(s) << ": repeat " << (same ? "identical" : "DIFFERS") << ", two-process "
           << (dist ? "identical" : "DIFFERS") << " (" << a.sd.task_stack.digest().substr(0, 12) << "); ";
    }
    v.detail = os.str();
    return v;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fairlora acceptance suite"};
    std::string work_dir = (fs::temp_directory_path() / "fairlora_acceptance").string();
    app.add_option("--work-dir", work_dir, "scratch directory");
    CLI11_PARSE(app, argc, argv);
    const fs::path work(work_dir);
    fs::remove_all(work);
    fs::create_directories(work);

    std::map<int, Verdict> verdicts;
    auto record = [&](int id, const char* title, auto&& fn) {
        const auto t0 = Clock::now();
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        verdicts[id] = v;
        std::cout << (v.pass ? "PASS" : "FAIL") << " [" << id << "] " << title << ": " << v.detail << " ["
                  << fmt(seconds_since(t0)) << " s]" << std::endl;
    };

    record(1, "gradient checks", gradients);
    record(2, "LoRA algebra", lora_algebra);
    record(3, "metric oracles", metric_oracles);
    const Small w = small_world();
    record(4, "reduction identities", [&] { return reductions(w); });
    record(5, "protocol audit", [&] { return audits(w); });

    std::optional<Table> biased;
    double grid_secs = 0.0;
    std::string grid_error;
    try {
        const auto t0 = Clock::now();
        biased = by_strategy(run_experiment(grid_spec(0.8), work / "grid_beta08"));
        grid_secs = seconds_since(t0);
    } catch (const std::exception& e) {
        grid_error = e.what();
    }
    auto need_grid = [&](auto&& fn) {
        return [&, fn] { return biased ? fn(*biased) : Verdict{false, "grid failed: " + grid_error}; };
    };
    record(6, "ORTH reduces the violated fairness gap (beta=0.8)", need_grid(orth_reduces_bias));
    record(7, "ADV improves the DP ratio (beta=0.8)", need_grid(adv_improves_dp_ratio));
    record(8, "no bias without leakage (beta=0)",
           [&] { return fair_data_stays_fair(by_strategy(run_experiment(grid_spec(0.0), work / "grid_beta0"))); });
    record(9, "bit reproducibility", [&] { return reproducible(w, work); });
    record(10, "4x3 grid runtime", [&] {
        return biased ? Verdict{grid_secs < 600.0, fmt(grid_secs) + " s for 4 strategies x 3 seeds (limit 600 s)"}
                      : Verdict{false, "grid failed: " + grid_error};
    });

    std::size_t failed = 0;
    for (const auto& [id, v] : verdicts) failed += !v.pass;
    std::cout << (verdicts.size() - failed) << "/" << verdicts.size() << " criteria pass" << std::endl;
    return failed == 0 ? 0 : 1;
}
