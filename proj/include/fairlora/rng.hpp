// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace fairlora {

/// Counter-based random stream.
///
/// Every draw is a pure function of (key, counter): output = mix(key, counter++).
/// A stream is identified by a seed and a name, so independent consumers (adapter
/// init, dropout, batch sampling, data generation) never share state and a run is
/// reproducible bit-for-bit from its seed. Streams are cheap values; copy one to
/// fork an identical sequence, or call `child()` for an independent sub-stream.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream() : RngStream(0, "default") {}
    RngStream(std::uint64_t seed, std::string_view name);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return next_u64(); }

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Standard normal via Box-Muller (one value per two uniforms).
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    /// Uniform integer on [0, n). Unbiased (rejection sampling).
    std::uint64_t below(std::uint64_t n);
    bool bernoulli(double p) { return uniform() < p; }

    /// Independent stream keyed by this stream's key and `name`.
    RngStream child(std::string_view name) const;

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    RngStream(std::uint64_t key) : key_(key) {}

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// 64-bit FNV-1a, used to key named streams.
std::uint64_t fnv1a64(std::string_view s) noexcept;

} // namespace fairlora
