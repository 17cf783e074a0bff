// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "fairlora/weights.hpp"

#include "fairlora/errors.hpp"
#include "fairlora/hash.hpp"

namespace fairlora {

void WeightMap::set(const std::string& id, Tensor value, bool frozen) {
    entries_[id] = WeightEntry{std::move(value), frozen};
}

const Tensor& WeightMap::at(const std::string& id) const {
    auto it = entries_.find(id);
    if (it == entries_.end()) {
        throw CompositionError("no weight named '" + id + "'");
    }
    return it->second.value;
}

Tensor& WeightMap::mutable_at(const std::string& id) {
    auto it = entries_.find(id);
    if (it == entries_.end()) {
        throw CompositionError("no weight named '" + id + "'");
    }
    return it->second.value;
}

bool WeightMap::frozen(const std::string& id) const {
    auto it = entries_.find(id);
    if (it == entries_.end()) {
        throw CompositionError("no weight named '" + id + "'");
    }
    return it->second.frozen;
}

std::string WeightMap::digest() const {
    Digest d;
    for (const auto& [id, entry] : entries_) {
        d.update(id);
        d.update(entry.value);
    }
    return d.hex();
}

} // namespace fairlora
