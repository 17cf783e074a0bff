// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "fairlora/rng.hpp"

#include <cmath>
#include <numbers>

namespace fairlora {
namespace {

// SplitMix64 finalizer: a bijective avalanche mix of one 64-bit word.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

} // namespace

std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

RngStream::RngStream(std::uint64_t seed, std::string_view name)
    : key_(mix64(mix64(seed + kGolden) ^ fnv1a64(name))) {}

std::uint64_t RngStream::next_u64() {
    // Two rounds so that adjacent counters under one key decorrelate fully.
    const std::uint64_t c = counter_++;
    return mix64(mix64(key_ ^ (c * kGolden)) + c);
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::below(std::uint64_t n) {
    if (n <= 1) {
        return 0;
    }
    const std::uint64_t limit = max() - (max() % n);
    std::uint64_t v = next_u64();
    while (v >= limit) {
        v = next_u64();
    }
    return v % n;
}

RngStream RngStream::child(std::string_view name) const {
    return RngStream(mix64(key_ ^ mix64(fnv1a64(name) + kGolden)));
}

} // namespace fairlora
