// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fairlora::io {

using Bytes = std::vector<std::uint8_t>;

/// Little-endian writer for the .flra / .fbkb containers.
class ByteWriter {
public:
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v);
    void f64(double v);
    void raw(std::string_view s);
    /// u32 byte length followed by the UTF-8 bytes.
    void string(std::string_view s);

    const Bytes& bytes() const noexcept { return buf_; }
    Bytes take() noexcept { return std::move(buf_); }

private:
    Bytes buf_;
};

/// Bounds-checked little-endian reader. Every failure throws FormatError with the offset.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint32_t u32(std::string_view what);
    std::uint64_t u64(std::string_view what);
    float f32(std::string_view what);
    double f64(std::string_view what);
    std::string raw(std::size_t n, std::string_view what);
    std::string string(std::string_view what, std::size_t max_len = 4096);

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    /// Throws unless every byte has been consumed.
    void expect_end() const;

private:
    void need(std::size_t n, std::string_view what) const;

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

Bytes read_file(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

/// Little-endian f32 encoding of a sequence of doubles.
Bytes f32_bytes(std::span<const double> values);

} // namespace fairlora::io
