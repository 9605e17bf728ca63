#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qkdike/bytes.hpp"
#include "qkdike/error.hpp"
#include "qkdike/sha256.hpp"

namespace qkdike {

enum class AlgorithmFamily { classical, lattice, code_based, other };

inline std::string_view to_string(AlgorithmFamily f) {
    switch (f) {
        case AlgorithmFamily::classical: return "classical";
        case AlgorithmFamily::lattice: return "lattice";
        case AlgorithmFamily::code_based: return "code-based";
        case AlgorithmFamily::other: return "other";
    }
    return "other";
}

/// Named KEM parameter set: the byte sizes of a public key, a ciphertext and
/// the derived shared secret. The mock engine fixes shared secrets at 32 bytes.
struct KemAlgorithmSpec {
    std::string name;
    std::size_t public_key_len = 0;
    std::size_t ciphertext_len = 0;
    std::size_t shared_secret_len = 32;
    AlgorithmFamily family = AlgorithmFamily::other;
};

struct KemKeyPair {
    KemAlgorithmSpec spec;
    Bytes public_key;
    Bytes secret_seed;  // 32 bytes; the public key is a pure function of it
};

namespace detail {

inline std::string canonical_algo_name(std::string_view name) {
    std::string out;
    out.reserve(name.size());
    for (char c : name) {
        if (c == '-' || c == '_') continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

}  // namespace detail

/// Immutable catalog of KEM parameter sets, preserving registration order.
/// Lookups are case-insensitive and accept the ML-KEM aliases for the kyber
/// levels (kyber1 == ML-KEM-512, kyber3 == ML-KEM-768, kyber5 == ML-KEM-1024).
class AlgorithmRegistry {
public:
    explicit AlgorithmRegistry(std::vector<KemAlgorithmSpec> specs) : specs_(std::move(specs)) {
        for (const auto& s : specs_) {
            if (s.public_key_len == 0 || s.ciphertext_len == 0 || s.shared_secret_len == 0)
                raise(ErrorCode::config_error, "zero-length field in spec '" + s.name + "'");
            std::string key = detail::canonical_algo_name(s.name);
            if (find_canonical(key))
                raise(ErrorCode::config_error, "duplicate algorithm name '" + s.name + "'");
            names_.emplace_back(std::move(key), s.name);
        }
    }

    const KemAlgorithmSpec& lookup(std::string_view name) const {
        std::string key = detail::canonical_algo_name(name);
        if (auto alias = resolve_alias(key)) key = *alias;
        if (const auto* spec = find_canonical(key)) return *spec;
        raise(ErrorCode::unknown_algorithm, "no algorithm named '" + std::string(name) + "'");
    }

    bool contains(std::string_view name) const {
        std::string key = detail::canonical_algo_name(name);
        if (auto alias = resolve_alias(key)) key = *alias;
        return find_canonical(key) != nullptr;
    }

    const std::vector<KemAlgorithmSpec>& specs() const { return specs_; }

    /// name -> {public_key_len, ciphertext_len, shared_secret_len, family},
    /// the table consumed by the fragmentation analyzer's --algorithms input.
    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json table = nlohmann::ordered_json::object();
        for (const auto& s : specs_) {
            table[s.name] = {{"public_key_len", s.public_key_len},
                             {"ciphertext_len", s.ciphertext_len},
                             {"shared_secret_len", s.shared_secret_len},
                             {"family", std::string(to_string(s.family))}};
        }
        return table;
    }

    static AlgorithmRegistry from_json(const nlohmann::ordered_json& table) {
        if (!table.is_object())
            raise(ErrorCode::config_error, "algorithm table must be a JSON object");
        std::vector<KemAlgorithmSpec> specs;
        for (const auto& [name, entry] : table.items()) {
            KemAlgorithmSpec s;
            s.name = name;
            s.public_key_len = entry.at("public_key_len").get<std::size_t>();
            s.ciphertext_len = entry.at("ciphertext_len").get<std::size_t>();
            s.shared_secret_len = entry.value("shared_secret_len", std::size_t{32});
            std::string family = entry.value("family", std::string("other"));
            if (family == "classical") s.family = AlgorithmFamily::classical;
            else if (family == "lattice") s.family = AlgorithmFamily::lattice;
            else if (family == "code-based") s.family = AlgorithmFamily::code_based;
            else s.family = AlgorithmFamily::other;
            specs.push_back(std::move(s));
        }
        return AlgorithmRegistry(std::move(specs));
    }

private:
    const KemAlgorithmSpec* find_canonical(std::string_view key) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i].first == key) return &specs_[i];
        return nullptr;
    }

    static std::optional<std::string> resolve_alias(std::string_view canonical) {
        if (canonical == "mlkem512") return "kyber1";
        if (canonical == "mlkem768") return "kyber3";
        if (canonical == "mlkem1024") return "kyber5";
        return std::nullopt;
    }

    std::vector<KemAlgorithmSpec> specs_;
    std::vector<std::pair<std::string, std::string>> names_;
};

/// The 16 built-in KEM parameter sets, in report row order.
inline const AlgorithmRegistry& default_registry() {
    static const AlgorithmRegistry registry{{
        {"x25519", 32, 32, 32, AlgorithmFamily::classical},
        {"ecp256", 64, 64, 32, AlgorithmFamily::classical},
        {"bike1", 1541, 1573, 32, AlgorithmFamily::code_based},
        {"bike3", 3083, 3115, 32, AlgorithmFamily::code_based},
        {"frodoa1", 9616, 9720, 32, AlgorithmFamily::lattice},
        {"frodoa3", 15632, 15744, 32, AlgorithmFamily::lattice},
        {"frodoa5", 21520, 21632, 32, AlgorithmFamily::lattice},
        {"frodos1", 9616, 9720, 32, AlgorithmFamily::lattice},
        {"frodos3", 15632, 15744, 32, AlgorithmFamily::lattice},
        {"frodos5", 21520, 21632, 32, AlgorithmFamily::lattice},
        {"hqc1", 2249, 4433, 32, AlgorithmFamily::code_based},
        {"hqc3", 4522, 8978, 32, AlgorithmFamily::code_based},
        {"hqc5", 7245, 14421, 32, AlgorithmFamily::code_based},
        {"kyber1", 800, 768, 32, AlgorithmFamily::lattice},
        {"kyber3", 1184, 1088, 32, AlgorithmFamily::lattice},
        {"kyber5", 1568, 1568, 32, AlgorithmFamily::lattice},
    }};
    return registry;
}

/// Pluggable KEM primitive. The simulator ships a deterministic size-faithful
/// mock; a genuine KEM can be swapped in behind the same three calls.
class KemEngine {
public:
    virtual ~KemEngine() = default;

    virtual KemKeyPair keygen(const KemAlgorithmSpec& spec, ByteView seed) const = 0;
    virtual std::pair<Bytes, Bytes> encaps(const KemAlgorithmSpec& spec, ByteView public_key,
                                           ByteView randomness) const = 0;
    virtual Bytes decaps(const KemAlgorithmSpec& spec, const KemKeyPair& keypair,
                         ByteView ciphertext) const = 0;
};

/// Deterministic mock:
///   public_key    = expand(SHA256(seed || "pk"), public_key_len)
///   ciphertext    = expand(SHA256(randomness || "ct"), ciphertext_len)
///   shared_secret = SHA256(public_key || ciphertext)
/// Size-exact per spec, reproducible per seed, no cryptographic strength.
class MockKemEngine : public KemEngine {
public:
    KemKeyPair keygen(const KemAlgorithmSpec& spec, ByteView seed) const override {
        if (seed.size() != 32)
            raise(ErrorCode::length_mismatch, "keygen seed must be 32 bytes");
        Bytes label = concat(seed, to_bytes("pk"));
        KemKeyPair pair;
        pair.spec = spec;
        pair.secret_seed.assign(seed.begin(), seed.end());
        pair.public_key = expand_sha256(sha256(label), spec.public_key_len);
        return pair;
    }

    std::pair<Bytes, Bytes> encaps(const KemAlgorithmSpec& spec, ByteView public_key,
                                   ByteView randomness) const override {
        if (public_key.size() != spec.public_key_len)
            raise(ErrorCode::length_mismatch,
                  "public key is " + std::to_string(public_key.size()) + " bytes, spec '" +
                      spec.name + "' wants " + std::to_string(spec.public_key_len));
        if (randomness.size() != 32)
            raise(ErrorCode::length_mismatch, "encaps randomness must be 32 bytes");
        Bytes label = concat(randomness, to_bytes("ct"));
        Bytes ciphertext = expand_sha256(sha256(label), spec.ciphertext_len);
        Bytes shared = derive_secret(spec, public_key, ciphertext);
        return {std::move(ciphertext), std::move(shared)};
    }

    Bytes decaps(const KemAlgorithmSpec& spec, const KemKeyPair& keypair,
                 ByteView ciphertext) const override {
        if (ciphertext.size() != spec.ciphertext_len)
            raise(ErrorCode::length_mismatch,
                  "ciphertext is " + std::to_string(ciphertext.size()) + " bytes, spec '" +
                      spec.name + "' wants " + std::to_string(spec.ciphertext_len));
        KemKeyPair recomputed = keygen(spec, keypair.secret_seed);
        return derive_secret(spec, recomputed.public_key, ciphertext);
    }

private:
    // shared_secret = SHA256(pk || ct); the mock only supports secrets up to
    // one digest long (all registered specs use 32).
    static Bytes derive_secret(const KemAlgorithmSpec& spec, ByteView public_key,
                               ByteView ciphertext) {
        if (spec.shared_secret_len > 32)
            raise(ErrorCode::config_error,
                  "mock engine caps shared secrets at 32 bytes ('" + spec.name + "')");
        Bytes shared = sha256({public_key, ciphertext});
        shared.resize(spec.shared_secret_len);
        return shared;
    }
};

inline const KemEngine& mock_kem_engine() {
    static const MockKemEngine engine;
    return engine;
}

}  // namespace qkdike
