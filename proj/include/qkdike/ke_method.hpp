#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qkdike/algo_registry.hpp"
#include "qkdike/bytes.hpp"
#include "qkdike/error.hpp"
#include "qkdike/etsi_adapter.hpp"

namespace qkdike {

enum class Role { initiator, responder };

inline std::string_view to_string(Role r) {
    return r == Role::initiator ? "initiator" : "responder";
}

struct SecretPart {
    std::string source;
    std::size_t length = 0;
};

struct SharedSecret {
    Bytes bytes;
    std::vector<SecretPart> composition;
};

/// Abstract key-exchange method, mirroring the four-call plugin lifecycle:
/// create, then get_public_key/set_public_key (order depends on role), then
/// get_shared_secret, then destroy. An initiator produces its payload first;
/// a responder consumes the peer's payload first. Zero-length payloads are
/// legal values, not omissions.
class KeMethod {
public:
    KeMethod(std::string identifier, Role role, Timeline& timeline)
        : identifier_(std::move(identifier)), role_(role), timeline_(&timeline),
          t_create_(timeline.now) {}

    virtual ~KeMethod() = default;

    const std::string& identifier() const { return identifier_; }
    Role role() const { return role_; }
    double t_create() const { return t_create_; }
    double t_destroy() const { return t_destroy_; }

    Bytes get_public_key() {
        Phase expected = (role_ == Role::initiator) ? Phase::fresh : Phase::half;
        if (phase_ != expected)
            raise(ErrorCode::invalid_state,
                  identifier_ + ": get_public_key out of order for " +
                      std::string(to_string(role_)));
        Bytes payload = produce_payload();
        advance_phase();
        return payload;
    }

    void set_public_key(ByteView payload) {
        Phase expected = (role_ == Role::initiator) ? Phase::half : Phase::fresh;
        if (phase_ != expected)
            raise(ErrorCode::invalid_state,
                  identifier_ + ": set_public_key out of order for " +
                      std::string(to_string(role_)));
        consume_payload(payload);
        advance_phase();
    }

    SharedSecret get_shared_secret() {
        if (phase_ != Phase::complete)
            raise(ErrorCode::invalid_state,
                  identifier_ + ": shared secret requested before the exchange completed");
        return secret();
    }

    void destroy() { t_destroy_ = timeline_->now; }

protected:
    virtual Bytes produce_payload() = 0;
    virtual void consume_payload(ByteView payload) = 0;
    virtual SharedSecret secret() = 0;

    Timeline& timeline() { return *timeline_; }

private:
    enum class Phase { fresh, half, complete };

    void advance_phase() { phase_ = (phase_ == Phase::fresh) ? Phase::half : Phase::complete; }

    std::string identifier_;
    Role role_;
    Timeline* timeline_;
    double t_create_ = 0;
    double t_destroy_ = 0;
    Phase phase_ = Phase::fresh;
};

/// Plain KEM exchange. Initiator: keygen -> pk out, decaps on the returned
/// ciphertext. Responder: encaps on the received pk, ciphertext out.
class KemMethod : public KeMethod {
public:
    KemMethod(const KemAlgorithmSpec& spec, const KemEngine& engine, Role role,
              Timeline& timeline, HashDrbg& rng)
        : KeMethod(spec.name, role, timeline), spec_(spec), engine_(&engine), rng_(&rng) {}

protected:
    Bytes produce_payload() override {
        if (role() == Role::initiator) {
            keypair_ = engine_->keygen(spec_, rng_->bytes(32));
            return keypair_->public_key;
        }
        return ciphertext_;
    }

    void consume_payload(ByteView payload) override {
        if (role() == Role::initiator) {
            shared_ = engine_->decaps(spec_, *keypair_, payload);
        } else {
            auto [ciphertext, shared] = engine_->encaps(spec_, payload, rng_->bytes(32));
            ciphertext_ = std::move(ciphertext);
            shared_ = std::move(shared);
        }
    }

    SharedSecret secret() override {
        return {shared_, {{"kem:" + spec_.name, shared_.size()}}};
    }

private:
    KemAlgorithmSpec spec_;
    const KemEngine* engine_;
    HashDrbg* rng_;
    std::optional<KemKeyPair> keypair_;
    Bytes ciphertext_;
    Bytes shared_;
};

/// Pure QKD exchange: the KEY_EXCHANGE payload carries a key identifier (or
/// nothing), never key material. Which peer generates the identifier depends
/// on the configured flow.
class QkdMethod : public KeMethod {
public:
    QkdMethod(EtsiAdapter adapter, Role role, Timeline& timeline)
        : KeMethod("qkd", role, timeline), adapter_(std::move(adapter)) {}

protected:
    Bytes produce_payload() override {
        bool generates = (adapter_.config().flow == QkdFlow::client_initiated)
                             ? role() == Role::initiator
                             : role() == Role::responder;
        if (!generates) return {};
        handle_ = adapter_.acquire_new();
        return encode_handle(*handle_);
    }

    void consume_payload(ByteView payload) override {
        bool retrieves = (adapter_.config().flow == QkdFlow::client_initiated)
                             ? role() == Role::responder
                             : role() == Role::initiator;
        if (retrieves) {
            handle_ = adapter_.retrieve_by_id(decode_handle(adapter_.config(), payload));
            return;
        }
        if (!payload.empty())
            raise(ErrorCode::bad_length, "qkd: expected an empty payload, got " +
                                             std::to_string(payload.size()) + " bytes");
        if (handle_ && handle_->pending()) handle_ = adapter_.complete_pending(*handle_);
    }

    SharedSecret secret() override {
        if (!handle_ || handle_->pending())
            raise(ErrorCode::invalid_state, "qkd: no key material retrieved");
        return {*handle_->material, {{"qkd", handle_->material->size()}}};
    }

private:
    EtsiAdapter adapter_;
    std::optional<QkdKeyHandle> handle_;
};

/// Parallel hybrid: QKD identifier and KEM payload travel together in one
/// KEY_EXCHANGE payload, identifier first. The shared secret is always
/// kem_secret || qkd_key regardless of flow.
class QkdKemMethod : public KeMethod {
public:
    QkdKemMethod(const KemAlgorithmSpec& spec, const KemEngine& engine, EtsiAdapter adapter,
                 Role role, Timeline& timeline, HashDrbg& rng)
        : KeMethod("qkd_" + spec.name, role, timeline), spec_(spec), engine_(&engine),
          adapter_(std::move(adapter)), rng_(&rng) {}

protected:
    Bytes produce_payload() override {
        if (role() == Role::initiator) {
            Bytes payload;
            if (adapter_.config().flow == QkdFlow::client_initiated) {
                handle_ = adapter_.acquire_new();
                payload = encode_handle(*handle_);
            }
            keypair_ = engine_->keygen(spec_, rng_->bytes(32));
            payload.insert(payload.end(), keypair_->public_key.begin(),
                           keypair_->public_key.end());
            return payload;
        }
        Bytes payload;
        if (adapter_.config().flow == QkdFlow::server_initiated) {
            handle_ = adapter_.acquire_new();
            payload = encode_handle(*handle_);
        }
        payload.insert(payload.end(), ciphertext_.begin(), ciphertext_.end());
        return payload;
    }

    void consume_payload(ByteView payload) override {
        if (role() == Role::responder) {
            // client-initiated request: id || pk; server-initiated: pk only
            ByteView pk = payload;
            if (adapter_.config().flow == QkdFlow::client_initiated)
                pk = split_handle(payload, spec_.public_key_len, "public key");
            check_len(pk.size(), spec_.public_key_len, "public key");
            auto [ciphertext, shared] = engine_->encaps(spec_, pk, rng_->bytes(32));
            ciphertext_ = std::move(ciphertext);
            kem_shared_ = std::move(shared);
            return;
        }
        // initiator: client-initiated response: ct; server-initiated: id || ct
        ByteView ct = payload;
        if (adapter_.config().flow == QkdFlow::server_initiated)
            ct = split_handle(payload, spec_.ciphertext_len, "ciphertext");
        check_len(ct.size(), spec_.ciphertext_len, "ciphertext");
        kem_shared_ = engine_->decaps(spec_, *keypair_, ct);
        if (handle_ && handle_->pending()) handle_ = adapter_.complete_pending(*handle_);
    }

    SharedSecret secret() override {
        if (!handle_ || handle_->pending() || kem_shared_.empty())
            raise(ErrorCode::invalid_state, identifier() + ": hybrid exchange incomplete");
        SharedSecret out;
        out.bytes = concat(kem_shared_, *handle_->material);
        out.composition = {{"kem:" + spec_.name, kem_shared_.size()},
                           {"qkd", handle_->material->size()}};
        return out;
    }

private:
    /// Validates the combined layout, retrieves the QKD key named by the
    /// leading handle bytes, and returns the KEM part. Length checks come
    /// first so a malformed payload never triggers a KME call.
    ByteView split_handle(ByteView payload, std::size_t kem_len, std::string_view what) {
        std::size_t handle_len = encoded_handle_len(adapter_.config());
        if (payload.size() < handle_len)
            raise(ErrorCode::bad_length,
                  identifier() + ": payload shorter than the QKD handle");
        check_len(payload.size() - handle_len, kem_len, what);
        handle_ = adapter_.retrieve_by_id(
            decode_handle(adapter_.config(), payload.first(handle_len)));
        return payload.subspan(handle_len);
    }

    void check_len(std::size_t got, std::size_t want, std::string_view what) const {
        if (got != want)
            raise(ErrorCode::length_mismatch,
                  identifier() + ": " + std::string(what) + " is " + std::to_string(got) +
                      " bytes, expected " + std::to_string(want));
    }

    KemAlgorithmSpec spec_;
    const KemEngine* engine_;
    EtsiAdapter adapter_;
    HashDrbg* rng_;
    std::optional<KemKeyPair> keypair_;
    std::optional<QkdKeyHandle> handle_;
    Bytes ciphertext_;
    Bytes kem_shared_;
};

/// Everything a method needs from its endpoint: algorithm catalog, KEM
/// engine, the KME pair (for QKD methods), the endpoint's timeline and its
/// deterministic randomness stream.
struct MethodContext {
    const AlgorithmRegistry* registry = nullptr;
    const KemEngine* engine = nullptr;
    KmeSim* kme = nullptr;
    QkdBackendConfig qkd;
    Timeline* timeline = nullptr;
    HashDrbg* rng = nullptr;
};

inline bool is_qkd_identifier(std::string_view id) { return id == "qkd"; }

inline bool is_hybrid_identifier(std::string_view id) {
    return id.size() > 4 && id.substr(0, 4) == "qkd_";
}

/// Builds a method from its proposal-string identifier: "qkd", a KEM name,
/// or "qkd_<kem-name>" for the parallel hybrid.
inline std::unique_ptr<KeMethod> make_method(std::string_view id, Role role,
                                             MethodContext& ctx) {
    Side side = (role == Role::initiator) ? Side::A : Side::B;
    if (is_qkd_identifier(id)) {
        if (!ctx.kme) raise(ErrorCode::config_error, "qkd method needs a KME pair");
        QkdBackendConfig cfg = ctx.qkd;
        cfg.kme_side = side;
        return std::make_unique<QkdMethod>(EtsiAdapter(*ctx.kme, cfg, *ctx.timeline), role,
                                           *ctx.timeline);
    }
    if (is_hybrid_identifier(id)) {
        if (!ctx.kme) raise(ErrorCode::config_error, "hybrid method needs a KME pair");
        const KemAlgorithmSpec& spec = ctx.registry->lookup(id.substr(4));
        QkdBackendConfig cfg = ctx.qkd;
        cfg.kme_side = side;
        return std::make_unique<QkdKemMethod>(spec, *ctx.engine,
                                              EtsiAdapter(*ctx.kme, cfg, *ctx.timeline), role,
                                              *ctx.timeline, *ctx.rng);
    }
    const KemAlgorithmSpec& spec = ctx.registry->lookup(id);
    return std::make_unique<KemMethod>(spec, *ctx.engine, role, *ctx.timeline, *ctx.rng);
}

/// Checks that an identifier would resolve, without building anything.
inline bool method_identifier_valid(std::string_view id, const AlgorithmRegistry& registry) {
    if (is_qkd_identifier(id)) return true;
    if (is_hybrid_identifier(id)) return registry.contains(id.substr(4));
    return registry.contains(id);
}

}  // namespace qkdike
