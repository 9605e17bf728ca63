#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <string_view>

#include "qkdike/bytes.hpp"

namespace qkdike {

/// FIPS 180-4 SHA-256. Self-contained so mock primitives and their test
/// oracles do not depend on a system crypto library.
class Sha256 {
public:
    Sha256() { reset(); }

    void reset() {
        state_ = {0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
                  0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};
        buffer_len_ = 0;
        total_len_ = 0;
    }

    void update(ByteView data) {
        total_len_ += data.size();
        std::size_t off = 0;
        if (buffer_len_ > 0) {
            std::size_t take = std::min<std::size_t>(64 - buffer_len_, data.size());
            std::memcpy(buffer_.data() + buffer_len_, data.data(), take);
            buffer_len_ += take;
            off += take;
            if (buffer_len_ == 64) {
                compress(buffer_.data());
                buffer_len_ = 0;
            }
        }
        while (off + 64 <= data.size()) {
            compress(data.data() + off);
            off += 64;
        }
        if (off < data.size()) {
            buffer_len_ = data.size() - off;
            std::memcpy(buffer_.data(), data.data() + off, buffer_len_);
        }
    }

    std::array<std::uint8_t, 32> finish() {
        std::uint64_t bit_len = total_len_ * 8;
        std::uint8_t pad[72] = {0x80};
        std::size_t pad_len = (buffer_len_ < 56) ? (56 - buffer_len_) : (120 - buffer_len_);
        update(ByteView(pad, pad_len));
        std::uint8_t len_be[8];
        for (int i = 0; i < 8; ++i)
            len_be[i] = static_cast<std::uint8_t>(bit_len >> (56 - 8 * i));
        update(ByteView(len_be, 8));
        std::array<std::uint8_t, 32> out{};
        for (int i = 0; i < 8; ++i) {
            out[4 * i + 0] = static_cast<std::uint8_t>(state_[i] >> 24);
            out[4 * i + 1] = static_cast<std::uint8_t>(state_[i] >> 16);
            out[4 * i + 2] = static_cast<std::uint8_t>(state_[i] >> 8);
            out[4 * i + 3] = static_cast<std::uint8_t>(state_[i]);
        }
        return out;
    }

private:
    static std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

    void compress(const std::uint8_t* block) {
        static constexpr std::uint32_t k[64] = {
            0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1,
            0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3,
            0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
            0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
            0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
            0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
            0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
            0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
            0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
            0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
            0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};
        std::uint32_t w[64];
        for (int i = 0; i < 16; ++i)
            w[i] = (std::uint32_t(block[4 * i]) << 24) | (std::uint32_t(block[4 * i + 1]) << 16) |
                   (std::uint32_t(block[4 * i + 2]) << 8) | std::uint32_t(block[4 * i + 3]);
        for (int i = 16; i < 64; ++i) {
            std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
            std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16] + s0 + w[i - 7] + s1;
        }
        std::uint32_t a = state_[0], b = state_[1], c = state_[2], d = state_[3];
        std::uint32_t e = state_[4], f = state_[5], g = state_[6], h = state_[7];
        for (int i = 0; i < 64; ++i) {
            std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
            std::uint32_t ch = (e & f) ^ (~e & g);
            std::uint32_t t1 = h + s1 + ch + k[i] + w[i];
            std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
            std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
            std::uint32_t t2 = s0 + maj;
            h = g;
            g = f;
            f = e;
            e = d + t1;
            d = c;
            c = b;
            b = a;
            a = t1 + t2;
        }
        state_[0] += a;
        state_[1] += b;
        state_[2] += c;
        state_[3] += d;
        state_[4] += e;
        state_[5] += f;
        state_[6] += g;
        state_[7] += h;
    }

    std::array<std::uint32_t, 8> state_{};
    std::array<std::uint8_t, 64> buffer_{};
    std::size_t buffer_len_ = 0;
    std::uint64_t total_len_ = 0;
};

inline Bytes sha256(ByteView data) {
    Sha256 h;
    h.update(data);
    auto d = h.finish();
    return Bytes(d.begin(), d.end());
}

inline Bytes sha256(std::initializer_list<ByteView> parts) {
    Sha256 h;
    for (const auto& p : parts) h.update(p);
    auto d = h.finish();
    return Bytes(d.begin(), d.end());
}

/// Counter-mode expansion: out = SHA256(seed || be32(0)) || SHA256(seed || be32(1)) || ...
/// truncated to out_len.
inline Bytes expand_sha256(ByteView seed, std::size_t out_len) {
    Bytes out;
    out.reserve(out_len + 32);
    std::uint32_t counter = 0;
    while (out.size() < out_len) {
        Bytes block_input(seed.begin(), seed.end());
        put_be32(block_input, counter++);
        Bytes digest = sha256(block_input);
        out.insert(out.end(), digest.begin(), digest.end());
    }
    out.resize(out_len);
    return out;
}

/// Deterministic byte generator built on SHA-256; used wherever the simulator
/// needs reproducible "randomness" (seeds, key ids, key material).
class HashDrbg {
public:
    explicit HashDrbg(ByteView seed, std::string_view tag = "") {
        Bytes material(seed.begin(), seed.end());
        Bytes tagb = to_bytes(tag);
        material.insert(material.end(), tagb.begin(), tagb.end());
        key_ = sha256(material);
    }

    explicit HashDrbg(std::uint64_t seed, std::string_view tag = "")
        : HashDrbg(encode(seed), tag) {}

    Bytes bytes(std::size_t n) {
        Bytes out;
        out.reserve(n + 32);
        while (out.size() < n) {
            Bytes block(key_);
            put_be64(block, counter_++);
            Bytes digest = sha256(block);
            out.insert(out.end(), digest.begin(), digest.end());
        }
        out.resize(n);
        return out;
    }

    KeyId key_id() {
        Bytes b = bytes(16);
        KeyId id;
        std::memcpy(id.data(), b.data(), 16);
        return id;
    }

private:
    static Bytes encode(std::uint64_t v) {
        Bytes out;
        put_be64(out, v);
        return out;
    }

    Bytes key_;
    std::uint64_t counter_ = 0;
};

/// SplitMix64: cheap deterministic PRNG for network jitter/loss draws and
/// for deriving sub-seeds. Identical output on every platform.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0,1).
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

/// Stable sub-seed derivation for independent deterministic streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    Bytes input;
    put_be64(input, seed);
    Bytes tagb = to_bytes(tag);
    input.insert(input.end(), tagb.begin(), tagb.end());
    Bytes digest = sha256(input);
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out = (out << 8) | digest[static_cast<std::size_t>(i)];
    return out;
}

}  // namespace qkdike
