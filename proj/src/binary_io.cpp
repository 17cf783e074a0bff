// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "fairlora/binary_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "fairlora/errors.hpp"

namespace fairlora::io {

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

void ByteWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

void ByteWriter::string(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
}

void ByteReader::need(std::size_t n, std::string_view what) const {
    if (remaining() < n) {
        throw FormatError("truncated input while reading " + std::string(what), pos_);
    }
}

std::uint32_t ByteReader::u32(std::string_view what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::u64(std::string_view what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    }
    pos_ += 8;
    return v;
}

float ByteReader::f32(std::string_view what) { return std::bit_cast<float>(u32(what)); }

double ByteReader::f64(std::string_view what) { return std::bit_cast<double>(u64(what)); }

std::string ByteReader::raw(std::size_t n, std::string_view what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
}

std::string ByteReader::string(std::string_view what, std::size_t max_len) {
    const std::size_t at = pos_;
    const std::uint32_t len = u32(what);
    if (len > max_len) {
        throw FormatError(std::string(what) + " length " + std::to_string(len) + " exceeds limit", at);
    }
    return raw(len, what);
}

void ByteReader::expect_end() const {
    if (remaining() != 0) {
        throw FormatError(std::to_string(remaining()) + " trailing bytes", pos_);
    }
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string() + " for reading");
    }
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot open " + tmp.string() + " for writing");
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw Error("short write to " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Bytes f32_bytes(std::span<const double> values) {
    ByteWriter w;
    for (double v : values) {
        w.f32(static_cast<float>(v));
    }
    return w.take();
}

} // namespace fairlora::io
