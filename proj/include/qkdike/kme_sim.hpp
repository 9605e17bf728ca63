#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qkdike/bytes.hpp"
#include "qkdike/error.hpp"
#include "qkdike/sha256.hpp"

namespace qkdike {

enum class Side { A, B };

inline Side peer_of(Side s) { return s == Side::A ? Side::B : Side::A; }

inline std::string_view to_string(Side s) { return s == Side::A ? "A" : "B"; }

struct Qos {
    /// 0 means the session never expires.
    double ttl_ms = 0;
};

struct KmePairConfig {
    std::size_t key_size = 32;       // bytes per delivered key
    std::size_t pool_capacity = 1024;
    double response_latency_ms = 0;  // virtual cost of one API call
    double replenish_rate = 0;       // keys per virtual second, 0 = static pool
    std::size_t max_per_request = 128;
    std::uint64_t seed = 0;
    std::string sae_a = "alice";
    std::string sae_b = "bob";
};

struct KmeStatus {
    std::size_t stored_key_count = 0;
    std::size_t key_size = 0;
    std::size_t max_per_request = 0;
};

struct DeliveredKey {
    KeyId key_id{};
    Bytes material;
};

struct KmeCallRecord {
    std::string op;
    Side side;
    double at = 0;       // virtual completion time
    double latency = 0;  // always response_latency_ms
};

/// Paired Key Management Entity: two QKD nodes sharing one synchronized key
/// pool, exposing ETSI GS QKD 004 (stateful key streams) and ETSI GS QKD 014
/// (stateless id-based delivery) semantics.
///
/// Callers pass the virtual time of the call; charging response_latency_ms to
/// the caller's timeline is the caller's job (see KmeClient). The pair is one
/// logical actor: calls are serialized, mutation order equals call order.
class KmeSim {
public:
    explicit KmeSim(KmePairConfig config = {})
        : config_(config), rng_(config.seed, "kme-pair") {}

    const KmePairConfig& config() const { return config_; }
    double response_latency_ms() const { return config_.response_latency_ms; }

    // --- ETSI 004 ------------------------------------------------------

    KeyId open_connect(Side side, std::optional<KeyId> ksid, Qos qos = {}, double now = 0) {
        std::scoped_lock lock(mutex_);
        record_call("OPEN_CONNECT", side, now);
        if (ksid) {
            auto it = sessions_.find(*ksid);
            if (it == sessions_.end())
                raise(ErrorCode::unknown_ksid, "no session " + to_hex(*ksid) + " to join");
            it->second.open_on.insert(side);
            return *ksid;
        }
        if (available_keys(now) == 0)
            raise(ErrorCode::pool_exhausted, "no key material left for a new stream");
        Session session;
        session.ksid = rng_.key_id();
        session.stream_secret = rng_.bytes(32);
        session.creator = side;
        session.created_at = now;
        session.qos = qos;
        session.open_on.insert(side);
        sessions_.emplace(session.ksid, session);
        return session.ksid;
    }

    struct StreamKey {
        Bytes material;
        std::uint32_t index_used = 0;
    };

    StreamKey get_key_004(Side side, const KeyId& ksid, std::optional<std::uint32_t> index,
                          double now = 0) {
        std::scoped_lock lock(mutex_);
        record_call("GET_KEY", side, now);
        Session& session = find_session(side, ksid);
        if (session.qos.ttl_ms > 0 && now > session.created_at + session.qos.ttl_ms)
            raise(ErrorCode::session_expired, "stream " + to_hex(ksid) + " past its QoS TTL");
        std::uint32_t idx = index ? *index : session.cursor(side);
        if (!session.delivered_indices.count(idx)) {
            if (available_keys(now) == 0)
                raise(ErrorCode::pool_exhausted, "stream read needs a fresh key");
            session.delivered_indices.insert(idx);
            ++delivered_count_;
        }
        if (!index) session.cursor(side) = idx + 1;
        return {stream_material(session, idx), idx};
    }

    void close(Side side, const KeyId& ksid, double now = 0) {
        std::scoped_lock lock(mutex_);
        record_call("CLOSE", side, now);
        Session& session = find_session(side, ksid);
        session.open_on.erase(side);
        if (session.open_on.empty()) sessions_.erase(ksid);
    }

    // --- ETSI 014 ------------------------------------------------------

    std::vector<DeliveredKey> get_key_014(Side side, std::size_t count, std::size_t size = 0,
                                          double now = 0) {
        std::scoped_lock lock(mutex_);
        record_call("GET_KEY_014", side, now);
        if (size == 0) size = config_.key_size;
        if (available_keys(now) < count)
            raise(ErrorCode::pool_exhausted,
                  "requested " + std::to_string(count) + " keys, pool holds " +
                      std::to_string(available_keys(now)));
        std::vector<DeliveredKey> out;
        out.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            StoredKey key;
            key.key_id = rng_.key_id();
            key.material = rng_.bytes(size);
            key.origin = side;
            DeliveredKey delivered{key.key_id, key.material};
            delivered_014_.emplace(key.key_id, std::move(key));
            out.push_back(std::move(delivered));
            ++delivered_count_;
        }
        return out;
    }

    std::vector<DeliveredKey> get_key_with_ids_014(Side side, const std::vector<KeyId>& ids,
                                                   double now = 0) {
        std::scoped_lock lock(mutex_);
        record_call("GET_KEY_WITH_IDS", side, now);
        std::vector<DeliveredKey> out;
        out.reserve(ids.size());
        for (const KeyId& id : ids) {
            auto it = delivered_014_.find(id);
            if (it == delivered_014_.end() || it->second.origin != peer_of(side))
                raise(ErrorCode::key_not_found, "key id " + to_hex(id) + " was never delivered");
            if (it->second.consumed)
                raise(ErrorCode::already_consumed, "key id " + to_hex(id) + " already retrieved");
            it->second.consumed = true;
            out.push_back({id, it->second.material});
        }
        return out;
    }

    KmeStatus get_status(Side side, double now = 0) {
        std::scoped_lock lock(mutex_);
        record_call("GET_STATUS", side, now);
        return {available_keys(now), config_.key_size, config_.max_per_request};
    }

    // --- introspection ---------------------------------------------------

    const std::vector<KmeCallRecord>& call_log() const { return call_log_; }
    void clear_call_log() { call_log_.clear(); }

    std::string sae_name(Side side) const {
        return side == Side::A ? config_.sae_a : config_.sae_b;
    }

    std::optional<Side> side_for_peer_sae(std::string_view sae) const {
        if (sae == config_.sae_b) return Side::A;  // keys shared *with* B are A's view
        if (sae == config_.sae_a) return Side::B;
        return std::nullopt;
    }

private:
    struct Session {
        KeyId ksid{};
        Bytes stream_secret;
        Side creator = Side::A;
        double created_at = 0;
        Qos qos;
        std::set<Side> open_on;
        std::uint32_t cursor_a = 0;
        std::uint32_t cursor_b = 0;
        std::set<std::uint32_t> delivered_indices;

        std::uint32_t& cursor(Side s) { return s == Side::A ? cursor_a : cursor_b; }
    };

    struct StoredKey {
        KeyId key_id{};
        Bytes material;
        Side origin = Side::A;  // side that fetched it via get_key_014
        bool consumed = false;  // retrieved by the peer via get_key_with_ids
    };

    Session& find_session(Side side, const KeyId& ksid) {
        auto it = sessions_.find(ksid);
        if (it == sessions_.end() || !it->second.open_on.count(side))
            raise(ErrorCode::unknown_ksid, "no open session " + to_hex(ksid) + " on side " +
                                               std::string(to_string(side)));
        return it->second;
    }

    /// Stream position material: PRF(stream_secret, index). Both sides derive
    /// the identical bytes for the same (ksid, index) without per-index state.
    Bytes stream_material(const Session& session, std::uint32_t index) const {
        Bytes input(session.stream_secret);
        put_be32(input, index);
        return expand_sha256(sha256(input), config_.key_size);
    }

    /// Pool accounting: the pair starts synchronized at pool_capacity keys and
    /// (optionally) grows by replenish_rate keys per virtual second, capped at
    /// capacity. Deliveries of fresh keys (by id or by new stream index) each
    /// consume one.
    std::size_t available_keys(double now) const {
        double produced = static_cast<double>(config_.pool_capacity) +
                          std::floor(std::max(0.0, now) / 1000.0 * config_.replenish_rate);
        double stored = std::min(static_cast<double>(config_.pool_capacity),
                                 produced - static_cast<double>(delivered_count_));
        return stored <= 0 ? 0 : static_cast<std::size_t>(stored);
    }

    void record_call(std::string_view op, Side side, double now) {
        call_log_.push_back({std::string(op), side, now, config_.response_latency_ms});
    }

    KmePairConfig config_;
    HashDrbg rng_;
    std::map<KeyId, Session> sessions_;
    std::map<KeyId, StoredKey> delivered_014_;
    std::size_t delivered_count_ = 0;
    std::vector<KmeCallRecord> call_log_;
    std::mutex mutex_;
};

/// A side-bound view of the pair that charges response_latency_ms to a local
/// timeline before each call executes, so every KME API call costs exactly
/// that much virtual time from the caller's perspective.
struct Timeline {
    double now = 0;
    void advance(double ms) { now += ms; }
};

class KmeClient {
public:
    KmeClient(KmeSim& kme, Side side, Timeline& timeline)
        : kme_(&kme), side_(side), timeline_(&timeline) {}

    Side side() const { return side_; }
    KmeSim& kme() { return *kme_; }
    Timeline& timeline() { return *timeline_; }
    std::size_t key_size() const { return kme_->config().key_size; }

    KeyId open_connect(std::optional<KeyId> ksid, Qos qos = {}) {
        tick();
        return kme_->open_connect(side_, ksid, qos, timeline_->now);
    }

    KmeSim::StreamKey get_key_004(const KeyId& ksid, std::optional<std::uint32_t> index) {
        tick();
        return kme_->get_key_004(side_, ksid, index, timeline_->now);
    }

    void close(const KeyId& ksid) {
        tick();
        kme_->close(side_, ksid, timeline_->now);
    }

    std::vector<DeliveredKey> get_key_014(std::size_t count, std::size_t size = 0) {
        tick();
        return kme_->get_key_014(side_, count, size, timeline_->now);
    }

    std::vector<DeliveredKey> get_key_with_ids_014(const std::vector<KeyId>& ids) {
        tick();
        return kme_->get_key_with_ids_014(side_, ids, timeline_->now);
    }

    KmeStatus get_status() {
        tick();
        return kme_->get_status(side_, timeline_->now);
    }

private:
    void tick() { timeline_->advance(kme_->response_latency_ms()); }

    KmeSim* kme_;
    Side side_;
    Timeline* timeline_;
};

}  // namespace qkdike
