#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>

#include "qkdike/bytes.hpp"
#include "qkdike/error.hpp"
#include "qkdike/kme_sim.hpp"

namespace qkdike {

enum class EtsiApi { etsi_004, etsi_014 };
enum class QkdFlow { client_initiated, server_initiated };

inline std::string_view to_string(EtsiApi api) {
    return api == EtsiApi::etsi_004 ? "004" : "014";
}

inline std::string_view to_string(QkdFlow flow) {
    return flow == QkdFlow::client_initiated ? "client" : "server";
}

struct QkdBackendConfig {
    EtsiApi api = EtsiApi::etsi_014;
    QkdFlow flow = QkdFlow::client_initiated;
    bool include_index = false;  // 004 only: carry the 4-byte starting index
    Side kme_side = Side::A;
};

/// A QKD key reference as it travels in a KEY_EXCHANGE payload: the 16-byte
/// identifier, an optional 32-bit starting index, and the key material once
/// it has been fetched (material stays unset while an ETSI 004 initiator
/// defers its GET_KEY to the end of the flow).
struct QkdKeyHandle {
    KeyId key_id{};
    std::optional<std::uint32_t> index;
    std::optional<Bytes> material;

    bool pending() const { return !material.has_value(); }
};

/// Wire form: 16 bytes of id, plus 4 big-endian index bytes when present.
inline Bytes encode_handle(const QkdKeyHandle& handle) {
    Bytes out(handle.key_id.begin(), handle.key_id.end());
    if (handle.index) put_be32(out, *handle.index);
    return out;
}

inline std::size_t encoded_handle_len(const QkdBackendConfig& config) {
    return config.include_index ? 20u : 16u;
}

inline QkdKeyHandle decode_handle(const QkdBackendConfig& config, ByteView wire) {
    if (wire.size() != encoded_handle_len(config))
        raise(ErrorCode::bad_length, "handle must be " +
                                         std::to_string(encoded_handle_len(config)) +
                                         " bytes, got " + std::to_string(wire.size()));
    QkdKeyHandle handle;
    std::copy(wire.begin(), wire.begin() + 16, handle.key_id.begin());
    if (wire.size() == 20) handle.index = get_be32(wire.subspan(16));
    return handle;
}

/// Unified client over both ETSI variants. One instance serves one handshake
/// endpoint; it decides when each ETSI call fires so the four flow/api timing
/// profiles stay testable in isolation.
///
/// The current flows use index 0 and a fresh KSID per handshake; explicit
/// indices remain available through retrieve_by_id for session reuse.
class EtsiAdapter {
public:
    EtsiAdapter(KmeSim& kme, QkdBackendConfig config, Timeline& timeline)
        : client_(kme, config.kme_side, timeline), config_(config) {
        if (config.include_index && config.api != EtsiApi::etsi_004)
            raise(ErrorCode::config_error, "include_index requires ETSI 004");
    }

    const QkdBackendConfig& config() const { return config_; }

    /// Fetches a fresh key (or opens a fresh stream) on the generating side.
    /// ETSI 014 always returns material immediately. ETSI 004 fetches the
    /// material right away only when the generator is the responder
    /// (server-initiated flow); a client-initiated initiator leaves it
    /// pending until the response leg arrives.
    QkdKeyHandle acquire_new() {
        QkdKeyHandle handle;
        if (config_.include_index) handle.index = 0;
        if (config_.api == EtsiApi::etsi_014) {
            auto keys = client_.get_key_014(1);
            handle.key_id = keys[0].key_id;
            handle.material = std::move(keys[0].material);
            return handle;
        }
        handle.key_id = client_.open_connect(std::nullopt);
        if (config_.flow == QkdFlow::server_initiated) {
            auto key = client_.get_key_004(handle.key_id, stream_index(handle));
            handle.material = std::move(key.material);
        }
        return handle;
    }

    /// Fetches the peer-generated key named by a received handle.
    QkdKeyHandle retrieve_by_id(QkdKeyHandle handle) {
        if (config_.api == EtsiApi::etsi_014) {
            auto keys = client_.get_key_with_ids_014({handle.key_id});
            handle.material = std::move(keys[0].material);
            return handle;
        }
        client_.open_connect(handle.key_id);
        auto key = client_.get_key_004(handle.key_id, stream_index(handle));
        handle.material = std::move(key.material);
        return handle;
    }

    /// Completes a deferred ETSI 004 fetch on the generator's own session.
    QkdKeyHandle complete_pending(QkdKeyHandle handle) {
        if (!handle.pending())
            raise(ErrorCode::invalid_state, "handle already carries material");
        if (config_.api != EtsiApi::etsi_004)
            raise(ErrorCode::invalid_state, "only ETSI 004 handles can be pending");
        auto key = client_.get_key_004(handle.key_id, stream_index(handle));
        handle.material = std::move(key.material);
        return handle;
    }

    void close_session(const QkdKeyHandle& handle) { client_.close(handle.key_id); }

private:
    std::uint32_t stream_index(const QkdKeyHandle& handle) const {
        return handle.index.value_or(0);
    }

    KmeClient client_;
    QkdBackendConfig config_;
};

}  // namespace qkdike
