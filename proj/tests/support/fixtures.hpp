// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//
// Small, fast configurations shared by the unit tests.

#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "fairlora/backbone.hpp"
#include "fairlora/data.hpp"
#include "fairlora/train.hpp"

namespace fairlora::testing {

inline BackboneConfig tiny_backbone_config(Architecture arch = Architecture::Mlp) {
    BackboneConfig c;
    c.architecture = arch;
    c.depth = 2;
    c.width = 12;
    c.tokens = 2;
    c.token_dim = 6;
    c.input_dim = 8;
    c.pretrain_steps = 20;
    c.pretrain_batch = 16;
    return c;
}

inline std::shared_ptr<const Backbone> tiny_backbone(Architecture arch = Architecture::Mlp) {
    return std::make_shared<const Backbone>(build_backbone(tiny_backbone_config(arch)));
}

inline GenSpec tiny_data_spec(std::uint64_t seed = 3) {
    GenSpec s;
    s.n = 200;
    s.features = 8;
    s.seed = seed;
    return s;
}

inline TrainConfig tiny_train_config(std::uint64_t seed = 3) {
    TrainConfig c;
    c.lr = 1e-2;
    c.epochs = 2;
    c.batch_size = 16;
    c.steps_per_epoch = 4;
    c.lambda_norm = 1e-3;
    c.lambda_sen = 1.0;
    c.lambda_orth = 0.5;
    c.adv_rounds = 2;
    c.epochs_sen = 1;
    c.epochs_task = 1;
    c.seed = seed;
    return c;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("fairlora_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace fairlora::testing
