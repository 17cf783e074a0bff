// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "fairlora/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>

#include "fairlora/errors.hpp"

namespace fairlora {
namespace {

std::string to_hex(const unsigned char* md, unsigned int len) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kDigits[md[i] >> 4]);
        out.push_back(kDigits[md[i] & 0xf]);
    }
    return out;
}

EVP_MD_CTX* ctx_of(void* p) { return static_cast<EVP_MD_CTX*>(p); }

} // namespace

Digest::Digest() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_of(ctx_), EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 init failed");
    }
}

Digest::~Digest() { EVP_MD_CTX_free(ctx_of(ctx_)); }

Digest& Digest::update(std::span<const std::uint8_t> bytes) {
    EVP_DigestUpdate(ctx_of(ctx_), bytes.data(), bytes.size());
    return *this;
}

Digest& Digest::update(std::string_view text) {
    EVP_DigestUpdate(ctx_of(ctx_), text.data(), text.size());
    return *this;
}

Digest& Digest::update(const Tensor& t) {
    std::array<std::uint8_t, 16> header{};
    const std::uint64_t dims[2] = {t.rows(), t.cols()};
    for (int d = 0; d < 2; ++d) {
        for (int i = 0; i < 8; ++i) {
            header[d * 8 + i] = static_cast<std::uint8_t>(dims[d] >> (8 * i));
        }
    }
    update(header);
    for (double v : t.data()) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        std::array<std::uint8_t, 8> b{};
        for (int i = 0; i < 8; ++i) {
            b[i] = static_cast<std::uint8_t>(bits >> (8 * i));
        }
        update(b);
    }
    return *this;
}

std::string Digest::hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_of(ctx_), md, &len);
    return to_hex(md, len);
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) { return Digest().update(bytes).hex(); }

std::string sha256_hex(std::string_view text) { return Digest().update(text).hex(); }

} // namespace fairlora
