// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairlora/backbone.hpp"
#include "fairlora/errors.hpp"
#include "fairlora/data.hpp"
#include "fairlora/metrics.hpp"
#include "fairlora/protocol.hpp"
#include "fairlora/train.hpp"

namespace fairlora {

void to_json(nlohmann::json& j, const GenSpec& s);
void from_json(const nlohmann::json& j, GenSpec& s);
void to_json(nlohmann::json& j, const BackboneConfig& c);
void from_json(const nlohmann::json& j, BackboneConfig& c);

/// Training settings used by the shipped experiment specs. TrainConfig keeps the
/// published hyperparameters as its defaults; this preset rescales what a 2.8k-row
/// dataset and a 32-wide backbone need.
TrainConfig desk_train_config();

struct ExperimentSpec {
    std::vector<Strategy> strategies{Strategy::Erm, Strategy::Unl, Strategy::Adv, Strategy::Orth};
    GenSpec data;
    TrainConfig train = desk_train_config();
    BackboneConfig backbone;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    double threshold = 0.5;
    /// Write per-run transcripts, manifests and audits under the output dir.
    bool write_runs = true;

    /// Throws ConfigError.
    void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentSpec& s);
/// Missing keys keep their defaults; unknown keys throw ConfigError.
void from_json(const nlohmann::json& j, ExperimentSpec& s);
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

struct RunOutcome {
    RunRecord record;
    std::string task_stack_digest;
    std::vector<double> loss_trace;
    AuditReport audit;
};

struct ExperimentResult {
    std::vector<RunOutcome> runs;
    std::string backbone_sha256;

    std::vector<RunRecord> records() const;
};

/// Thrown with the failing stage ("data", "train", "audit", "eval", ...).
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what) : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// For each seed: generate data, run every strategy through the in-process protocol,
/// audit the transcript and evaluate on the SD test split with the sidecar groups.
/// When `out` is set, writes report.csv, report.md and per-run artifacts there.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::optional<std::filesystem::path>& out);

/// Evaluation frame of a trained model on the SD test split.
EvalFrame test_frame(const Backbone& base, const TrainedArtifacts& art, const DatasetSplits& data);

} // namespace fairlora
