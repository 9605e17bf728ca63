#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qkdike/algo_registry.hpp"
#include "qkdike/bytes.hpp"
#include "qkdike/error.hpp"
#include "qkdike/etsi_adapter.hpp"
#include "qkdike/ke_method.hpp"
#include "qkdike/kme_sim.hpp"
#include "qkdike/netsim.hpp"
#include "qkdike/proposal.hpp"
#include "qkdike/sha256.hpp"

namespace qkdike {

enum class ExchangeType : std::uint8_t {
    ike_sa_init = 34,
    ike_auth = 35,
    create_child_sa = 36,
    informational = 37,
    ike_intermediate = 43,
};

inline std::string_view to_string(ExchangeType t) {
    switch (t) {
        case ExchangeType::ike_sa_init: return "IKE_SA_INIT";
        case ExchangeType::ike_auth: return "IKE_AUTH";
        case ExchangeType::create_child_sa: return "CREATE_CHILD_SA";
        case ExchangeType::informational: return "INFORMATIONAL";
        case ExchangeType::ike_intermediate: return "IKE_INTERMEDIATE";
    }
    return "UNKNOWN";
}

enum class Direction { request, response };

inline std::string_view to_string(Direction d) {
    return d == Direction::request ? "request" : "response";
}

/// On-wire accounting constants observed per captured Ethernet frame:
/// frame_cap bytes per fragment at most, per_fragment_overhead bytes of
/// headers per fragment, plus a fixed per-message base overhead that differs
/// between initiator (request) and responder (response) messages.
struct FragmentationModel {
    int frame_cap = 1514;
    int per_fragment_overhead = 34;
    int base_overhead_initiator = 236;
    int base_overhead_responder = 269;

    int base_overhead(Direction d) const {
        return d == Direction::request ? base_overhead_initiator : base_overhead_responder;
    }

    void validate() const {
        if (frame_cap <= per_fragment_overhead + std::max(base_overhead_initiator,
                                                          base_overhead_responder))
            raise(ErrorCode::config_error, "frame cap too small for message overheads");
    }
};

struct WirePlan {
    int fragment_count = 0;
    std::vector<int> fragment_sizes;
    std::int64_t total_bytes = 0;

    int last_size() const { return fragment_sizes.empty() ? 0 : fragment_sizes.back(); }
};

/// Minimal fragment plan for a KE message: n is the smallest count for which
/// every fragment fits the frame cap, every fragment except the last is full,
/// and total = payload + per_fragment_overhead * n + base_overhead.
inline WirePlan plan_fragments(const FragmentationModel& model, std::int64_t crypto_payload_len,
                               Direction direction) {
    model.validate();
    if (crypto_payload_len < 0)
        raise(ErrorCode::config_error, "negative payload length");
    std::int64_t base = model.base_overhead(direction);
    std::int64_t usable = model.frame_cap - model.per_fragment_overhead;
    std::int64_t n = (crypto_payload_len + base + usable - 1) / usable;
    if (n < 1) n = 1;
    WirePlan plan;
    plan.fragment_count = static_cast<int>(n);
    plan.total_bytes = crypto_payload_len + model.per_fragment_overhead * n + base;
    plan.fragment_sizes.assign(static_cast<std::size_t>(n - 1), model.frame_cap);
    plan.fragment_sizes.push_back(
        static_cast<int>(plan.total_bytes - (n - 1) * model.frame_cap));
    return plan;
}

inline int avail_in_last(const FragmentationModel& model, const WirePlan& plan) {
    return model.frame_cap - plan.last_size();
}

/// Plan for a message whose total wire size is given directly (the IKE_AUTH
/// stub delimiter, which models no crypto payload of its own).
inline WirePlan plan_raw(const FragmentationModel& model, std::int64_t total_bytes) {
    WirePlan plan;
    plan.total_bytes = total_bytes;
    std::int64_t remaining = total_bytes;
    while (remaining > model.frame_cap) {
        plan.fragment_sizes.push_back(model.frame_cap);
        remaining -= model.frame_cap;
    }
    plan.fragment_sizes.push_back(static_cast<int>(remaining));
    plan.fragment_count = static_cast<int>(plan.fragment_sizes.size());
    return plan;
}

struct IkeMessageRecord {
    ExchangeType exchange_type = ExchangeType::ike_sa_init;
    std::uint32_t message_id = 0;
    Direction direction = Direction::request;
    std::size_t crypto_bytes = 0;
    WirePlan plan;
    double t_send = 0;               // first fragment of the first attempt
    std::optional<double> t_recv;    // completion of reassembly at the peer
    int transmissions = 0;           // attempts put on the wire (retransmits included)

    std::int64_t transmitted_bytes() const { return plan.total_bytes * transmissions; }
    std::int64_t transmitted_fragments() const {
        return std::int64_t{plan.fragment_count} * transmissions;
    }
};

struct MethodLifecycle {
    std::string identifier;
    double t_create = 0;
    double t_destroy = 0;
};

struct HandshakeTranscript {
    std::string proposal;
    std::vector<IkeMessageRecord> messages;  // in first-send order
    std::vector<MethodLifecycle> initiator_methods;
    std::vector<MethodLifecycle> responder_methods;
    std::vector<KmeCallRecord> kme_calls;
    Bytes initiator_secret;
    Bytes responder_secret;
    bool failed = false;
    std::string failure_reason;
    double completed_at = 0;
};

struct HandshakeConfig {
    QkdBackendConfig qkd;
    double kme_latency_ms = 0;
    std::size_t kme_pool = 1024;
    std::size_t kme_key_size = 32;
    FragmentationModel frag;
    int auth_stub_request_bytes = 303;
    int auth_stub_response_bytes = 303;
    double retransmit_timeout_ms = 3000;
    int retransmit_tries = 3;
    std::uint64_t seed = 0;
    const AlgorithmRegistry* registry = nullptr;  // default table when null
    const KemEngine* engine = nullptr;            // deterministic mock when null
    std::optional<std::uint64_t> kme_seed;
    // fault injection: corrupt the responder's first secret to exercise the
    // mismatch-detection path
    bool fault_flip_responder_secret = false;
};

/// Final key: SHA-256 over the concatenated per-method secrets in proposal
/// order. Stands in for the IKEv2 PRF+ chain, whose internals none of the
/// measured quantities depend on.
inline Bytes derive_final_secret(const std::vector<Bytes>& secrets) {
    if (secrets.empty()) raise(ErrorCode::invalid_state, "no secrets to combine");
    Sha256 h;
    for (const auto& s : secrets) h.update(s);
    auto digest = h.finish();
    return Bytes(digest.begin(), digest.end());
}

namespace detail {

/// Drives one simulated IKEv2 key establishment: method 1 over IKE_SA_INIT,
/// methods 2..N over IKE_INTERMEDIATE rounds, then the stub IKE_AUTH
/// delimiter. Endpoints run as callbacks on the shared event queue; KME
/// latency advances an endpoint's local timeline, network legs go through
/// the lossy channel.
class HandshakeSim {
public:
    HandshakeSim(const Proposal& proposal, const NetworkProfile& profile,
                 const HandshakeConfig& config)
        : proposal_(proposal), config_(config), channel_(profile),
          registry_(config.registry ? *config.registry : default_registry()),
          engine_(config.engine ? *config.engine : mock_kem_engine()),
          kme_({config.kme_key_size, config.kme_pool, config.kme_latency_ms, 0, 128,
                config.kme_seed ? *config.kme_seed : derive_seed(config.seed, "kme")}),
          initiator_(Role::initiator, derive_seed(config.seed, "rng-initiator"), *this),
          responder_(Role::responder, derive_seed(config.seed, "rng-responder"), *this) {
        config_.frag.validate();
        transcript_.proposal = proposal.label;
    }

    HandshakeTranscript run() {
        queue_.schedule(0, [this] { initiator_.start(); });
        queue_.run_until([this] { return finished_; });
        if (!finished_) fail("simulation stalled with no pending events");
        finalize();
        return std::move(transcript_);
    }

private:
    struct MessageKey {
        std::uint32_t id;
        Direction direction;
        bool operator<(const MessageKey& o) const {
            return id != o.id ? id < o.id : direction < o.direction;
        }
    };

    class Endpoint {
    public:
        Endpoint(Role role, std::uint64_t rng_seed, HandshakeSim& sim)
            : role_(role), rng_(rng_seed), sim_(&sim) {}

        void start() {
            // initiator entry point at virtual time zero
            timeline_.now = 0;
            prepare_round(0);
        }

        void on_message(std::uint32_t id, Direction dir, const Bytes& payload, double t) {
            if (failed_ || done_) return;
            timeline_.now = std::max(timeline_.now, t);
            if (role_ == Role::initiator)
                initiator_receive(id, dir, payload);
            else
                responder_receive(id, dir, payload);
        }

        void on_duplicate(std::uint32_t id, Direction dir, double t) {
            // IKEv2 retransmission behavior: a responder answers a duplicate
            // request by resending its cached response; an initiator ignores
            // duplicate responses.
            if (failed_ || role_ != Role::responder || dir != Direction::request) return;
            if (answered_.count(id)) sim_->resend(Role::responder, id, Direction::response, t);
        }

        void on_timer(std::uint32_t id, int attempt, double t) {
            if (failed_ || done_ || role_ != Role::initiator) return;
            if (!awaiting_ || awaiting_->id != id || awaiting_->attempt != attempt) return;
            if (attempt >= sim_->config_.retransmit_tries) {
                fail_endpoint("retransmission budget exhausted for message " +
                              std::to_string(id));
                return;
            }
            awaiting_->attempt = attempt + 1;
            sim_->resend(Role::initiator, id, Direction::request, t);
            sim_->arm_timer(*this, id, attempt + 1, t);
        }

        bool done() const { return done_; }
        bool failed() const { return failed_; }
        Role role() const { return role_; }
        Timeline& timeline() { return timeline_; }
        const Bytes& final_secret() const { return final_secret_; }
        const std::vector<MethodLifecycle>& lifecycles() const { return lifecycles_; }

    private:
        struct Awaiting {
            std::uint32_t id;
            int attempt;
        };

        void prepare_round(std::size_t round) {
            MethodContext ctx = sim_->context_for(*this);
            try {
                method_ = make_method(sim_->proposal_.methods[round], role_, ctx);
                Bytes payload = method_->get_public_key();
                auto exchange = (round == 0) ? ExchangeType::ike_sa_init
                                             : ExchangeType::ike_intermediate;
                send_request(static_cast<std::uint32_t>(round), exchange, std::move(payload));
            } catch (const Error& e) {
                fail_endpoint(e.what());
            }
        }

        void send_request(std::uint32_t id, ExchangeType exchange, Bytes payload) {
            sim_->send_message(Role::initiator, exchange, id, Direction::request,
                               std::move(payload), timeline_.now);
            awaiting_ = Awaiting{id, 1};
            sim_->arm_timer(*this, id, 1, timeline_.now);
        }

        void initiator_receive(std::uint32_t id, Direction dir, const Bytes& payload) {
            if (dir != Direction::response || !awaiting_ || awaiting_->id != id) return;
            awaiting_.reset();
            std::size_t rounds = sim_->proposal_.rounds();
            if (id < rounds) {
                try {
                    method_->set_public_key(payload);
                    secrets_.push_back(method_->get_shared_secret().bytes);
                    retire_method();
                } catch (const Error& e) {
                    fail_endpoint(e.what());
                    return;
                }
                if (id + 1 < rounds) {
                    prepare_round(id + 1);
                } else {
                    final_secret_ = derive_final_secret(secrets_);
                    send_request(static_cast<std::uint32_t>(rounds), ExchangeType::ike_auth,
                                 {});
                }
            } else {
                done_ = true;
                sim_->on_initiator_done(timeline_.now);
            }
        }

        void responder_receive(std::uint32_t id, Direction dir, const Bytes& payload) {
            if (dir != Direction::request || id != expected_) return;
            std::size_t rounds = sim_->proposal_.rounds();
            if (id < rounds) {
                MethodContext ctx = sim_->context_for(*this);
                try {
                    method_ = make_method(sim_->proposal_.methods[id], role_, ctx);
                    method_->set_public_key(payload);
                    Bytes response = method_->get_public_key();
                    secrets_.push_back(method_->get_shared_secret().bytes);
                    retire_method();
                    auto exchange = (id == 0) ? ExchangeType::ike_sa_init
                                              : ExchangeType::ike_intermediate;
                    sim_->send_message(Role::responder, exchange, id, Direction::response,
                                       std::move(response), timeline_.now);
                } catch (const Error& e) {
                    fail_endpoint(e.what());
                    return;
                }
                answered_.insert(id);
                ++expected_;
                if (expected_ == rounds) {
                    final_secret_ = derive_final_secret(secrets_);
                    if (sim_->config_.fault_flip_responder_secret)
                        final_secret_[0] ^= 0x01;
                }
            } else {
                // stub AUTH delimiter
                sim_->send_message(Role::responder, ExchangeType::ike_auth, id,
                                   Direction::response, {}, timeline_.now);
                answered_.insert(id);
                ++expected_;
                done_ = true;
            }
        }

        void retire_method() {
            method_->destroy();
            lifecycles_.push_back(
                {method_->identifier(), method_->t_create(), method_->t_destroy()});
            method_.reset();
        }

        void fail_endpoint(const std::string& reason) {
            failed_ = true;
            sim_->fail(std::string(to_string(role_)) + ": " + reason);
        }

        Role role_;
        HashDrbg rng_;
        HandshakeSim* sim_;
        Timeline timeline_;
        std::unique_ptr<KeMethod> method_;
        std::vector<Bytes> secrets_;
        std::vector<MethodLifecycle> lifecycles_;
        Bytes final_secret_;
        std::optional<Awaiting> awaiting_;  // initiator side
        std::uint32_t expected_ = 0;        // responder side
        std::set<std::uint32_t> answered_;
        bool done_ = false;
        bool failed_ = false;

        friend class HandshakeSim;
    };

    MethodContext context_for(Endpoint& endpoint) {
        MethodContext ctx;
        ctx.registry = &registry_;
        ctx.engine = &engine_;
        ctx.kme = &kme_;
        ctx.qkd = config_.qkd;
        ctx.timeline = &endpoint.timeline_;
        ctx.rng = &endpoint.rng_;
        return ctx;
    }

    void send_message(Role sender, ExchangeType exchange, std::uint32_t id, Direction dir,
                      Bytes payload, double send_time) {
        MessageKey key{id, dir};
        auto it = record_index_.find(key);
        if (it == record_index_.end()) {
            IkeMessageRecord record;
            record.exchange_type = exchange;
            record.message_id = id;
            record.direction = dir;
            record.crypto_bytes = payload.size();
            record.plan = (exchange == ExchangeType::ike_auth)
                              ? plan_raw(config_.frag, dir == Direction::request
                                                           ? config_.auth_stub_request_bytes
                                                           : config_.auth_stub_response_bytes)
                              : plan_fragments(config_.frag,
                                               static_cast<std::int64_t>(payload.size()), dir);
            record.t_send = send_time;
            transcript_.messages.push_back(record);
            it = record_index_.emplace(key, transcript_.messages.size() - 1).first;
            payloads_[key] = std::move(payload);
        }
        transmit(sender, key, send_time);
    }

    void resend(Role sender, std::uint32_t id, Direction dir, double send_time) {
        transmit(sender, MessageKey{id, dir}, send_time);
    }

    void transmit(Role sender, MessageKey key, double send_time) {
        IkeMessageRecord& record = transcript_.messages[record_index_.at(key)];
        int attempt = ++record.transmissions;
        Role receiver = (sender == Role::initiator) ? Role::responder : Role::initiator;
        int total = record.plan.fragment_count;
        for (int frag = 0; frag < total; ++frag) {
            auto arrival = channel_.transit(send_time);
            if (!arrival) continue;
            queue_.schedule(*arrival, [this, receiver, key, attempt, frag, total] {
                deliver_fragment(receiver, key, attempt, frag, total);
            });
        }
    }

    void deliver_fragment(Role receiver, MessageKey key, int attempt, int frag, int total) {
        auto& seen = reassembly_[ReassemblyKey{key, attempt}];
        seen.insert(frag);
        if (static_cast<int>(seen.size()) < total) return;
        IkeMessageRecord& record = transcript_.messages[record_index_.at(key)];
        double t = queue_.now();
        if (!record.t_recv) {
            record.t_recv = t;
            endpoint(receiver).on_message(key.id, key.direction, payloads_.at(key), t);
        } else {
            endpoint(receiver).on_duplicate(key.id, key.direction, t);
        }
    }

    void arm_timer(Endpoint& endpoint, std::uint32_t id, int attempt, double from) {
        if (endpoint.role() != Role::initiator) return;
        queue_.schedule(from + config_.retransmit_timeout_ms, [this, id, attempt] {
            initiator_.on_timer(id, attempt, queue_.now());
        });
    }

    Endpoint& endpoint(Role role) {
        return role == Role::initiator ? initiator_ : responder_;
    }

    void fail(const std::string& reason) {
        if (!transcript_.failed) {
            transcript_.failed = true;
            transcript_.failure_reason = reason;
        }
        // A responder-side failure leaves the initiator retransmitting into
        // the void; the run ends once the initiator's budget is exhausted.
        if (initiator_.failed_) {
            finished_ = true;
            completed_at_ = queue_.now();
        }
    }

    void on_initiator_done(double t) {
        finished_ = true;
        completed_at_ = t;
    }

    void finalize() {
        transcript_.initiator_methods = initiator_.lifecycles();
        transcript_.responder_methods = responder_.lifecycles();
        transcript_.kme_calls = kme_.call_log();
        transcript_.completed_at = completed_at_;
        if (!transcript_.failed) {
            transcript_.initiator_secret = initiator_.final_secret();
            transcript_.responder_secret = responder_.final_secret();
            if (transcript_.initiator_secret.empty() ||
                transcript_.initiator_secret != transcript_.responder_secret) {
                transcript_.failed = true;
                transcript_.failure_reason = "endpoint secret mismatch";
            }
        }
    }

    struct ReassemblyKey {
        MessageKey message;
        int attempt;
        bool operator<(const ReassemblyKey& o) const {
            if (message < o.message) return true;
            if (o.message < message) return false;
            return attempt < o.attempt;
        }
    };

    Proposal proposal_;
    HandshakeConfig config_;
    Channel channel_;
    const AlgorithmRegistry& registry_;
    const KemEngine& engine_;
    KmeSim kme_;
    EventQueue queue_;
    Endpoint initiator_;
    Endpoint responder_;
    HandshakeTranscript transcript_;
    std::map<MessageKey, std::size_t> record_index_;
    std::map<MessageKey, Bytes> payloads_;
    std::map<ReassemblyKey, std::set<int>> reassembly_;
    bool finished_ = false;
    double completed_at_ = 0;
};

}  // namespace detail

inline HandshakeTranscript run_handshake(const Proposal& proposal,
                                         const NetworkProfile& profile,
                                         const HandshakeConfig& config) {
    detail::HandshakeSim sim(proposal, profile, config);
    return sim.run();
}

inline nlohmann::ordered_json transcript_to_json(const HandshakeTranscript& t) {
    nlohmann::ordered_json j;
    j["proposal"] = t.proposal;
    j["failed"] = t.failed;
    if (t.failed) j["failure_reason"] = t.failure_reason;
    j["completed_at_ms"] = t.completed_at;
    auto messages = nlohmann::ordered_json::array();
    for (const auto& m : t.messages) {
        messages.push_back({{"exchange_type", static_cast<int>(m.exchange_type)},
                            {"exchange", std::string(to_string(m.exchange_type))},
                            {"message_id", m.message_id},
                            {"direction", std::string(to_string(m.direction))},
                            {"crypto_bytes", m.crypto_bytes},
                            {"total_bytes", m.plan.total_bytes},
                            {"fragments", m.plan.fragment_count},
                            {"transmissions", m.transmissions},
                            {"t_send", m.t_send},
                            {"t_recv", m.t_recv ? nlohmann::ordered_json(*m.t_recv)
                                                : nlohmann::ordered_json(nullptr)}});
    }
    j["messages"] = std::move(messages);
    auto methods = [](const std::vector<MethodLifecycle>& list) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& m : list)
            arr.push_back({{"identifier", m.identifier},
                           {"t_create", m.t_create},
                           {"t_destroy", m.t_destroy}});
        return arr;
    };
    j["initiator_methods"] = methods(t.initiator_methods);
    j["responder_methods"] = methods(t.responder_methods);
    return j;
}

}  // namespace qkdike
