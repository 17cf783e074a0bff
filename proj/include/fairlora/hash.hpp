// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "fairlora/tensor.hpp"

namespace fairlora {

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

/// Incremental SHA-256 over exact (f64) tensor contents, for artifact digests.
class Digest {
public:
    Digest();
    ~Digest();
    Digest(const Digest&) = delete;
    Digest& operator=(const Digest&) = delete;

    Digest& update(std::span<const std::uint8_t> bytes);
    Digest& update(std::string_view text);
    Digest& update(const Tensor& t);
    std::string hex();

private:
    void* ctx_;
};

} // namespace fairlora
