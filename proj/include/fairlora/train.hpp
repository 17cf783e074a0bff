// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairlora/backbone.hpp"
#include "fairlora/data.hpp"
#include "fairlora/lora.hpp"
#include "fairlora/optim.hpp"

namespace fairlora {

enum class Strategy : std::uint8_t { Erm, Unl, Adv, Orth };

const char* to_string(Strategy s) noexcept; // "erm", "unl", "adv", "orth"
Strategy parse_strategy(const std::string& s);

struct TrainConfig {
    double lr = 1e-4;
    double weight_decay = 5e-4;
    std::size_t epochs = 5;
    std::size_t batch_size = 64;
    /// 0 means ceil(n / batch_size).
    std::size_t steps_per_epoch = 0;
    std::size_t rank = 4;
    double alpha = 8.0;
    double dropout = 0.1;
    double init_sigma = 0.02;
    double lambda_norm = 0.0;
    double lambda_sen = 0.0;
    double lambda_orth = 0.0;
    OrthTarget orth_target = OrthTarget::Identity;
    double grl_scale = 1.0;
    std::size_t adv_rounds = 3;
    std::size_t epochs_sen = 2;  ///< per adversarial round, CO phase
    std::size_t epochs_task = 2; ///< per adversarial round, SD phase
    double divergence_factor = 1e3;
    std::uint64_t seed = 0;

    /// Throws ConfigError.
    void validate() const;
    std::size_t steps_for(std::size_t n) const;
    bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys throw ConfigError.
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Named random streams of one training role, e.g. "sd.task" or "co.sen".
struct RoleStreams {
    RngStream init;
    RngStream head;
    RngStream dropout;
    RngStream sampling;
};
RoleStreams role_streams(std::uint64_t seed, std::string_view role);

/// Class-balanced sampler: a class is drawn with probability 1/2, then a row
/// uniformly within it, with replacement.
class BalancedSampler {
public:
    /// Throws ConfigError when a class is absent.
    BalancedSampler(std::span<const int> labels, RngStream rng);
    std::vector<std::size_t> next(std::size_t batch_size);

private:
    std::vector<std::size_t> by_class_[2];
    RngStream rng_;
};

std::vector<std::vector<std::size_t>> balanced_batches(std::span<const int> labels, std::size_t batch_size,
                                                       std::size_t count, RngStream rng);

struct TrainedArtifacts {
    Strategy strategy = Strategy::Erm;
    LoraAdapterStack task_stack;
    std::optional<LoraAdapterStack> sensitive_stack;
    ClassifierHead task_head{Tensor(1, 2), Tensor(1, 2), Party::SolutionDeveloper};
    std::optional<ClassifierHead> sensitive_head;
    /// Coefficient of the sensitive stack in the evaluated model: -lambda_sen for UNL, +1 for ADV.
    double sensitive_coeff = 0.0;
    std::vector<double> loss_trace; ///< mean training loss per epoch
    double initial_loss = 0.0;      ///< loss of the very first step
};

/// One party's trainable state carried across steps and rounds.
struct PartyState {
    LoraAdapterStack stack;
    ClassifierHead head;
    AdamWState opt;
    std::size_t epochs_done = 0;
    std::vector<double> loss_trace;
    double initial_loss = 0.0;
    RoleStreams streams;
};

PartyState init_party_state(const Backbone& base, const TrainConfig& cfg, std::string_view role, Party owner);

/// Eq.-style objectives. All trainers leave `base` and any frozen stack untouched.
TrainedArtifacts train_erm(const Backbone& base, const TaskDataset& d_task, const TrainConfig& cfg);
TrainedArtifacts train_sensitive_erm(const Backbone& base, const SensitiveDataset& d_sen, const TrainConfig& cfg);
TrainedArtifacts train_unl(const Backbone& base, const LoraAdapterStack& sensitive, const TaskDataset& d_task,
                           const TrainConfig& cfg);
TrainedArtifacts train_orth(const Backbone& base, const LoraAdapterStack& sensitive, const TaskDataset& d_task,
                            const TrainConfig& cfg);
/// All rounds in one process. Stacks cross between the phases through an f32 bundle
/// round trip, exactly as they would between two parties.
TrainedArtifacts train_adv(const Backbone& base, const TaskDataset& d_task, const SensitiveDataset& d_sen,
                           const TrainConfig& cfg);

/// Adversarial phase run by CO: sensitive stack and head learn to predict g through a
/// gradient reversal in front of the head; `task` is frozen.
void adv_sensitive_phase(const Backbone& base, const LoraAdapterStack& task, PartyState& co,
                         const SensitiveDataset& d_sen, const TrainConfig& cfg, std::size_t round);
/// Adversarial phase run by SD: task stack and head on top of the frozen sensitive stack.
void adv_task_phase(const Backbone& base, const LoraAdapterStack& sensitive, PartyState& sd,
                    const TaskDataset& d_task, const TrainConfig& cfg, std::size_t round);

/// Backbone and adapter list of the model the strategy is evaluated with.
struct EvalModel {
    Backbone base;
    std::vector<AdapterUse> stacks;
};
EvalModel evaluation_model(const Backbone& base, const TrainedArtifacts& art);

/// P(class 1) for each row of x under the strategy's evaluation model.
std::vector<double> predict_scores(const Backbone& base, const TrainedArtifacts& art, const Tensor& x);

/// Mean cross-entropy plus regularizers of a task model, used by tests and the probe oracle.
double task_loss(const Backbone& base, std::span<const AdapterUse> stacks, const ClassifierHead& head,
                 const Tensor& x, std::span<const int> labels);

/// Config echo, per-epoch losses and artifact hashes.
nlohmann::json training_manifest(const Backbone& base, const TrainedArtifacts& art, const TrainConfig& cfg);

std::string head_digest(const ClassifierHead& head);

} // namespace fairlora
