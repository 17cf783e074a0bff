// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//
// fairlora: dataset generation, strategy runs, evaluation and transcript audits.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "fairlora/errors.hpp"
#include "fairlora/experiment.hpp"

namespace fs = std::filesystem;
using namespace fairlora;

namespace {

enum Exit : int {
    kOk = 0,
    kFailure = 1,
    kConfig = 2,
    kFormat = 3,
    kTraining = 4,
    kProtocol = 5,
    kAudit = 6,
};

ExperimentSpec load_spec(const std::string& path) {
    ExperimentSpec spec = path.empty() ? ExperimentSpec{} : load_experiment_spec(path);
    if (const char* env = std::getenv("FAIRLORA_SEED")) {
        try {
            spec.seeds = {std::stoull(env)};
        } catch (const std::exception&) {
            throw ConfigError(std::string("FAIRLORA_SEED is not an unsigned integer: ") + env);
        }
    }
    return spec;
}

EvalFrame read_scores(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open " + path);
    }
    std::string line;
    std::getline(in, line);
    if (line.rfind("score,label,group", 0) != 0) {
        throw FormatError("scores CSV header must be score,label,group", 0);
    }
    EvalFrame f;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::istringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c)) {
            throw FormatError("line " + std::to_string(line_no) + " needs three cells", 0);
        }
        try {
            f.scores.push_back(std::stod(a));
            f.labels.push_back(std::stoi(b));
            f.groups.push_back(std::stoi(c));
        } catch (const std::exception&) {
            throw FormatError("line " + std::to_string(line_no) + " is not numeric", 0);
        }
    }
    f.validate();
    return f;
}

int cmd_run(const std::string& spec_path, const std::string& out, const std::string& format,
            std::optional<double> threshold) {
    ExperimentSpec spec = load_spec(spec_path);
    if (threshold) {
        spec.threshold = *threshold;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentResult result = run_experiment(spec, out.empty() ? std::nullopt : std::optional<fs::path>(out));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto records = result.records();
    std::cout << render_report(records, parse_format(format));
    std::cerr << "completed " << records.size() << " run(s) in " << secs << " s\n";
    return kOk;
}

int cmd_gen_data(const std::string& spec_path, const std::string& out) {
    const ExperimentSpec spec = load_spec(spec_path);
    GenSpec gen = spec.data;
    gen.seed = spec.seeds.front();
    const DatasetSplits d = generate(gen);
    const fs::path dir(out);
    fs::create_directories(dir);
    save_csv(d.sd_train, dir / "sd_train.csv");
    save_csv(d.sd_val, dir / "sd_val.csv");
    save_csv(d.sd_test, dir / "sd_test.csv");
    save_csv(d.co_train, dir / "co_train.csv");
    std::ostringstream side;
    side << "split,row,group\n";
    for (std::size_t i = 0; i < d.sidecar.val_groups.size(); ++i) {
        side << "val," << i << ',' << d.sidecar.val_groups[i] << '\n';
    }
    for (std::size_t i = 0; i < d.sidecar.test_groups.size(); ++i) {
        side << "test," << i << ',' << d.sidecar.test_groups[i] << '\n';
    }
    io::write_text_atomic(dir / "eval_sidecar.csv", side.str());
    const BayesReference ref = bayes_reference(gen);
    std::cout << "wrote " << d.sd_train.size() << "/" << d.sd_val.size() << "/" << d.sd_test.size()
              << " SD rows and " << d.co_train.size() << " CO rows to " << dir.string() << "\n"
              << "Bayes accuracy " << ref.accuracy << " ± " << ref.accuracy_ci << ", DP gap " << ref.dp_diff
              << " ± " << ref.dp_ci << "\n";
    return kOk;
}

int cmd_eval(const std::string& scores, double threshold, const std::string& format) {
    const EvalFrame f = read_scores(scores);
    const RunRecord rec{"model", 0, evaluate(f, threshold)};
    std::cout << render_report(std::span(&rec, 1), parse_format(format));
    for (const auto& flag : rec.report.flags) {
        std::cerr << "note: " << flag << '\n';
    }
    return kOk;
}

int cmd_audit(const std::string& transcript_path, const std::string& spec_path, std::optional<std::uint64_t> seed) {
    const Transcript t = Transcript::load(transcript_path);
    const fs::path dir = fs::path(transcript_path).parent_path();
    std::vector<ClassifierHead> heads;
    for (const char* rel : {"sd/task_head.json", "co/sensitive_head.json"}) {
        if (fs::exists(dir / rel)) {
            heads.push_back(load_head(dir / rel));
        }
    }
    std::optional<DatasetSplits> data;
    if (!spec_path.empty()) {
        const ExperimentSpec spec = load_spec(spec_path);
        GenSpec gen = spec.data;
        gen.seed = seed.value_or(spec.seeds.front());
        data = generate(gen);
    }
    std::vector<const ClassifierHead*> head_ptrs;
    for (const auto& h : heads) {
        head_ptrs.push_back(&h);
    }
    std::vector<const Tensor*> datasets;
    if (data) {
        datasets = {&data->sd_train.x, &data->sd_val.x, &data->sd_test.x, &data->co_train.x};
    }
    const AuditReport rep = audit_transcript(t, datasets, head_ptrs);
    std::cout << rep.to_text();
    if (heads.empty()) {
        std::cout << "note: no head files next to the transcript; check (b) had nothing to search for\n";
    }
    if (!data) {
        std::cout << "note: no --spec given; check (c) had no dataset rows to search for\n";
    }
    return rep.pass() ? kOk : kAudit;
}

int cmd_party(const std::string& role, const std::string& spec_path, const std::string& strategy,
              const std::string& exchange, double timeout_s) {
    const ExperimentSpec spec = load_spec(spec_path);
    const Strategy s = parse_strategy(strategy);
    auto base = std::make_shared<const Backbone>(build_backbone(spec.backbone));
    GenSpec gen = spec.data;
    gen.seed = spec.seeds.front();
    TrainConfig cfg = spec.train;
    cfg.seed = gen.seed;
    const DatasetSplits data = generate(gen);
    ProtocolOptions opts;
    opts.timeout = std::chrono::milliseconds(static_cast<long>(timeout_s * 1000));
    auto ch = make_file_channel(exchange, base->hash(), opts);
    if (role == "co") {
        CoContext co(base, data.co_train);
        run_co_role(s, co, *ch, cfg);
        if (co.sensitive_head()) {
            save_head(*co.sensitive_head(), fs::path(exchange) / "co" / "sensitive_head.json");
        }
        std::cout << "CO finished " << strategy << "\n";
        return kOk;
    }
    if (role != "sd") {
        throw ConfigError("--role must be sd or co");
    }
    SdContext sd(base, data.sd_train);
    Transcript log;
    log.strategy = s;
    log.adv_rounds = s == Strategy::Adv ? cfg.adv_rounds : 0;
    log.backbone_sha256 = base->hash();
    try {
        const TrainedArtifacts art = run_sd_role(s, sd, *ch, cfg, log);
        log.complete = true;
        log.save(fs::path(exchange) / "transcript.json");
        save_head(art.task_head, fs::path(exchange) / "sd" / "task_head.json");
        std::cout << "SD finished " << strategy << ", task stack " << art.task_stack.digest() << "\n";
    } catch (const std::exception& e) {
        log.error = e.what();
        log.save(fs::path(exchange) / "transcript.json");
        throw;
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fairlora: fairness-aware LoRA fine-tuning at desk scale"};
    app.require_subcommand(1);

    std::string spec, out, format = "md", scores, transcript, role, strategy, exchange;
    double threshold = 0.5, timeout_s = 600.0;
    std::optional<double> run_threshold;
    std::optional<std::uint64_t> audit_seed;

    auto* run = app.add_subcommand("run", "run an experiment grid from a JSON spec");
    run->add_option("--spec", spec, "experiment spec (JSON)")->check(CLI::ExistingFile);
    run->add_option("--out", out, "output directory");
    run->add_option("--format", format, "stdout report format")->check(CLI::IsMember({"csv", "md"}));
    run->add_option("--threshold", run_threshold, "classifier threshold");

    auto* gen = app.add_subcommand("gen-data", "write the synthetic SD/CO splits as CSV");
    gen->add_option("--spec", spec, "experiment spec (JSON)")->check(CLI::ExistingFile);
    gen->add_option("--out", out, "output directory")->required();

    auto* ev = app.add_subcommand("eval", "fairness report for a score,label,group CSV");
    ev->add_option("--scores", scores, "scores CSV")->required()->check(CLI::ExistingFile);
    ev->add_option("--threshold", threshold, "classifier threshold")->check(CLI::Range(0.0, 1.0));
    ev->add_option("--format", format, "report format")->check(CLI::IsMember({"csv", "md"}));

    auto* au = app.add_subcommand("audit", "audit a protocol transcript");
    au->add_option("--transcript", transcript, "transcript.json")->required()->check(CLI::ExistingFile);
    au->add_option("--spec", spec, "spec used for the run, to regenerate the dataset rows");
    au->add_option("--seed", audit_seed, "seed of the run");

    auto* party = app.add_subcommand("party", "run one party over the file transport");
    party->add_option("--role", role, "sd or co")->required()->check(CLI::IsMember({"sd", "co"}));
    party->add_option("--spec", spec, "experiment spec (JSON)")->check(CLI::ExistingFile);
    party->add_option("--strategy", strategy, "erm, unl, adv or orth")->required();
    party->add_option("--exchange", exchange, "shared exchange directory")->required();
    party->add_option("--timeout", timeout_s, "seconds to wait for the counterpart");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfig;
    }

    try {
        if (*run) return cmd_run(spec, out, format, run_threshold);
        if (*gen) return cmd_gen_data(spec, out);
        if (*ev) return cmd_eval(scores, threshold, format);
        if (*au) return cmd_audit(transcript, spec, audit_seed);
        if (*party) return cmd_party(role, spec, strategy, exchange, timeout_s);
    } catch (const StageError& e) {
        std::cerr << "error in stage " << e.what() << '\n';
        const std::string& st = e.stage();
        if (st.rfind("audit", 0) == 0) return kAudit;
        if (st.rfind("train", 0) == 0) return kTraining;
        if (st == "data") return kFormat;
        return kFailure;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return kFormat;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << '\n';
        return kTraining;
    } catch (const ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << '\n';
        return kProtocol;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kFailure;
}
