#pragma once

#include <atomic>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "qkdike/bytes.hpp"
#include "qkdike/error.hpp"
#include "qkdike/kme_sim.hpp"

namespace qkdike {

/// HTTP/JSON facade for the ETSI GS QKD 014 surface of the KME pair:
///
///   GET  /api/v1/keys/{sae}/status
///   POST /api/v1/keys/{sae}/enc_keys   body {"number": n, "size": bits}
///   POST /api/v1/keys/{sae}/dec_keys   body {"key_IDs": [{"key_ID": uuid}]}
///
/// {sae} names the peer the caller shares keys with, so requests against
/// /keys/bob/... act on side A and vice versa. Key ids travel as UUID
/// strings, key material as base64. The facade is a thin translation over
/// the in-process calls and plays no part in virtual-time benchmarks.
class KmeHttpFacade {
public:
    explicit KmeHttpFacade(KmeSim& kme) : kme_(&kme) {
        server_.Get(R"(/api/v1/keys/([^/]+)/status)",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        handle_status(req, res);
                    });
        server_.Post(R"(/api/v1/keys/([^/]+)/enc_keys)",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         handle_enc_keys(req, res);
                     });
        server_.Post(R"(/api/v1/keys/([^/]+)/dec_keys)",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         handle_dec_keys(req, res);
                     });
    }

    /// Binds to an ephemeral port and serves from a background thread.
    int start(const std::string& host = "127.0.0.1") {
        port_ = server_.bind_to_any_port(host);
        if (port_ <= 0) raise(ErrorCode::backend_unreachable, "cannot bind facade socket");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port_;
    }

    /// Binds to a fixed port and blocks; for the CLI server mode.
    bool serve(const std::string& host, int port) { return server_.listen(host, port); }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    ~KmeHttpFacade() { stop(); }

    int port() const { return port_; }

private:
    static void reply_json(httplib::Response& res, int status, const nlohmann::ordered_json& j) {
        res.status = status;
        res.set_content(j.dump(2) + "\n", "application/json");
    }

    static void reply_error(httplib::Response& res, int status, const std::string& message) {
        reply_json(res, status, {{"message", message}});
    }

    bool resolve_side(const httplib::Request& req, httplib::Response& res, Side& side) {
        auto resolved = kme_->side_for_peer_sae(req.matches[1].str());
        if (!resolved) {
            reply_error(res, 404, "unknown SAE '" + req.matches[1].str() + "'");
            return false;
        }
        side = *resolved;
        return true;
    }

    void handle_status(const httplib::Request& req, httplib::Response& res) {
        Side side;
        if (!resolve_side(req, res, side)) return;
        KmeStatus status = kme_->get_status(side);
        reply_json(res, 200,
                   {{"source_KME_ID", "KME_" + std::string(to_string(side))},
                    {"target_KME_ID", "KME_" + std::string(to_string(peer_of(side)))},
                    {"master_SAE_ID", kme_->sae_name(side)},
                    {"slave_SAE_ID", kme_->sae_name(peer_of(side))},
                    {"key_size", status.key_size * 8},
                    {"stored_key_count", status.stored_key_count},
                    {"max_key_per_request", status.max_per_request}});
    }

    void handle_enc_keys(const httplib::Request& req, httplib::Response& res) {
        Side side;
        if (!resolve_side(req, res, side)) return;
        std::size_t number = 1;
        std::size_t size_bits = kme_->config().key_size * 8;
        if (!req.body.empty()) {
            auto body = nlohmann::json::parse(req.body, nullptr, false);
            if (body.is_discarded()) return reply_error(res, 400, "invalid JSON body");
            number = body.value("number", std::size_t{1});
            size_bits = body.value("size", size_bits);
        }
        if (size_bits == 0 || size_bits % 8 != 0)
            return reply_error(res, 400, "size must be a positive multiple of 8 bits");
        try {
            auto keys = kme_->get_key_014(side, number, size_bits / 8);
            reply_json(res, 200, keys_to_json(keys));
        } catch (const Error& e) {
            reply_error(res, e.code() == ErrorCode::pool_exhausted ? 503 : 400, e.what());
        }
    }

    void handle_dec_keys(const httplib::Request& req, httplib::Response& res) {
        Side side;
        if (!resolve_side(req, res, side)) return;
        auto body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.contains("key_IDs"))
            return reply_error(res, 400, "body must carry key_IDs");
        std::vector<KeyId> ids;
        for (const auto& entry : body["key_IDs"]) {
            KeyId id;
            if (!entry.contains("key_ID") ||
                !uuid_to_key_id(entry["key_ID"].get<std::string>(), id))
                return reply_error(res, 400, "malformed key_ID");
            ids.push_back(id);
        }
        try {
            auto keys = kme_->get_key_with_ids_014(side, ids);
            reply_json(res, 200, keys_to_json(keys));
        } catch (const Error& e) {
            reply_error(res, 400, e.what());
        }
    }

    static nlohmann::ordered_json keys_to_json(const std::vector<DeliveredKey>& keys) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& k : keys)
            arr.push_back({{"key_ID", key_id_to_uuid(k.key_id)},
                           {"key", base64_encode(k.material)}});
        return {{"keys", arr}};
    }

    KmeSim* kme_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

}  // namespace qkdike
