// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fairlora/tensor.hpp"

namespace fairlora {

enum class LabelKind : std::uint8_t { Task, Sensitive };

const char* to_string(LabelKind k) noexcept;

/// Features plus exactly one label column. The kind is part of the type, so a
/// TaskDataset can never be passed where a SensitiveDataset is expected.
template <LabelKind K>
struct LabeledDataset {
    static constexpr LabelKind kind = K;

    Tensor x;
    std::vector<int> labels;
    /// Global row index in the generating process; used to prove party disjointness.
    std::vector<std::uint64_t> row_ids;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t features() const noexcept { return x.cols(); }
    LabeledDataset subset(std::span<const std::size_t> idx) const;
    bool operator==(const LabeledDataset&) const = default;
};

using TaskDataset = LabeledDataset<LabelKind::Task>;
using SensitiveDataset = LabeledDataset<LabelKind::Sensitive>;

/// Companion labels visible only to the evaluator.
struct EvalSidecar {
    std::vector<int> val_groups;
    std::vector<int> test_groups;
    bool operator==(const EvalSidecar&) const = default;
};

struct GenSpec {
    std::size_t n = 4000;  ///< rows per party
    std::size_t features = 16;
    double beta = 0.8;     ///< leakage of g into the label and the mixed channel
    double eta = 0.1;      ///< label flip probability
    double p_group = 0.5;  ///< P(g = 1)
    std::array<double, 2> pos_rate{0.35, 0.65}; ///< P(y = 1 | g) at beta = 1 before noise
    double task_noise = 0.5;
    double group_amp = 0.5;
    /// Rows in the SD test split. 0 means 15% of n.
    std::size_t test_n = 0;
    std::uint64_t seed = 0;

    /// Throws ConfigError.
    void validate() const;
    bool operator==(const GenSpec&) const = default;
};

struct DatasetSplits {
    TaskDataset sd_train;
    TaskDataset sd_val;
    TaskDataset sd_test;
    SensitiveDataset co_train;
    EvalSidecar sidecar;
};

/// Channel widths of the feature vector: task, group, mixed, noise.
struct ChannelLayout {
    std::size_t task, group, mixed, noise;
};
ChannelLayout channel_layout(std::size_t features);

/// SD rows take global ids [0, n_sd) and CO rows [n_sd, n_sd + n). Each row is a pure
/// function of (seed, row id).
DatasetSplits generate(const GenSpec& spec);

/// One raw sample of the generative process (exposed for tests and the Bayes reference).
struct Sample {
    std::vector<double> x;
    int y = 0;
    int g = 0;
};
Sample draw_sample(const GenSpec& spec, std::uint64_t row_id);

/// P(y = 1 | x) under the generative model.
double bayes_posterior(const GenSpec& spec, std::span<const double> x);

struct BayesReference {
    double accuracy = 0.0;
    double accuracy_ci = 0.0; ///< 95% half-width
    double dp_diff = 0.0;
    double dp_ci = 0.0;
    std::size_t n = 0;
};

/// Monte-Carlo accuracy and demographic-parity gap of the Bayes classifier.
BayesReference bayes_reference(const GenSpec& spec, std::size_t n = 100000);

/// CSV with header feature_0..feature_{f-1},label. A task file must not carry a
/// sensitive column and vice versa; any unexpected column is rejected.
TaskDataset load_task_csv(const std::filesystem::path& path);
SensitiveDataset load_sensitive_csv(const std::filesystem::path& path);

template <LabelKind K>
void save_csv(const LabeledDataset<K>& ds, const std::filesystem::path& path);

} // namespace fairlora
