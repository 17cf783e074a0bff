// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <map>
#include <string>

#include "fairlora/tensor.hpp"

namespace fairlora {

struct WeightEntry {
    Tensor value;
    bool frozen = true;

    bool operator==(const WeightEntry&) const = default;
};

/// Named weight matrices of a model. Ordered by name so iteration is deterministic.
class WeightMap {
public:
    void set(const std::string& id, Tensor value, bool frozen = true);
    bool contains(const std::string& id) const { return entries_.contains(id); }
    const Tensor& at(const std::string& id) const;
    Tensor& mutable_at(const std::string& id);
    bool frozen(const std::string& id) const;

    const std::map<std::string, WeightEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

    /// SHA-256 over names and exact f64 values.
    std::string digest() const;

    bool operator==(const WeightMap&) const = default;

private:
    std::map<std::string, WeightEntry> entries_;
};

} // namespace fairlora
