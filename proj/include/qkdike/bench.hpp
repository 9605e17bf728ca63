#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qkdike/algo_registry.hpp"
#include "qkdike/error.hpp"
#include "qkdike/ike_engine.hpp"
#include "qkdike/netsim.hpp"
#include "qkdike/proposal.hpp"

namespace qkdike {

/// One handshake's timing decomposition, all from the initiator's viewpoint:
/// t_net spans the first IKE_SA_INIT fragment send to the receipt of the last
/// pre-AUTH response; t_plugin spans the first method creation to the last
/// method destruction; delta_overhead is their difference.
struct TimingSample {
    double t_net_ms = 0;
    double t_plugin_ms = 0;
    double delta_overhead_ms = 0;
};

struct StatSummary {
    double mean_net = 0;
    double sigma_net = 0;
    double mean_plugin = 0;
    double sigma_plugin = 0;
    double mean_overhead = 0;
    double sigma_overhead = 0;  // sqrt(sigma_plugin^2 + sigma_net^2)
};

inline double measure_t_net(const HandshakeTranscript& t) {
    if (t.failed)
        raise(ErrorCode::malformed_transcript, "failed transcript: " + t.failure_reason);
    const IkeMessageRecord* first_request = nullptr;
    const IkeMessageRecord* last_response = nullptr;
    for (const auto& m : t.messages) {
        if (m.exchange_type == ExchangeType::ike_sa_init && m.direction == Direction::request &&
            !first_request)
            first_request = &m;
        if (m.exchange_type != ExchangeType::ike_auth && m.direction == Direction::response)
            if (!last_response || m.message_id > last_response->message_id) last_response = &m;
    }
    if (!first_request || !last_response || !last_response->t_recv)
        raise(ErrorCode::malformed_transcript, "missing key-establishment messages");
    return *last_response->t_recv - first_request->t_send;
}

inline double measure_t_plugin(const HandshakeTranscript& t) {
    if (t.failed)
        raise(ErrorCode::malformed_transcript, "failed transcript: " + t.failure_reason);
    if (t.initiator_methods.empty())
        raise(ErrorCode::malformed_transcript, "no method lifecycles recorded");
    double first_create = t.initiator_methods.front().t_create;
    double last_destroy = t.initiator_methods.front().t_destroy;
    for (const auto& m : t.initiator_methods) {
        first_create = std::min(first_create, m.t_create);
        last_destroy = std::max(last_destroy, m.t_destroy);
    }
    return last_destroy - first_create;
}

inline TimingSample make_timing_sample(const HandshakeTranscript& t) {
    TimingSample s;
    s.t_net_ms = measure_t_net(t);
    s.t_plugin_ms = measure_t_plugin(t);
    s.delta_overhead_ms = s.t_plugin_ms - s.t_net_ms;
    return s;
}

/// Means and sample standard deviations of the measured quantities, with the
/// overhead uncertainty propagated as if the measurements were independent
/// (a conservative upper bound, since t_plugin contains t_net).
inline StatSummary summarize(std::span<const TimingSample> samples) {
    if (samples.size() < 2)
        raise(ErrorCode::insufficient_samples,
              "need at least 2 samples, got " + std::to_string(samples.size()));
    struct Welford {
        double mean = 0, m2 = 0;
        std::size_t n = 0;
        void add(double x) {
            ++n;
            double d = x - mean;
            mean += d / static_cast<double>(n);
            m2 += d * (x - mean);
        }
        double sigma() const { return std::sqrt(m2 / static_cast<double>(n - 1)); }
    } net, plugin, overhead;
    for (const auto& s : samples) {
        net.add(s.t_net_ms);
        plugin.add(s.t_plugin_ms);
        overhead.add(s.delta_overhead_ms);
    }
    StatSummary out;
    out.mean_net = net.mean;
    out.sigma_net = net.sigma();
    out.mean_plugin = plugin.mean;
    out.sigma_plugin = plugin.sigma();
    out.mean_overhead = overhead.mean;
    out.sigma_overhead = std::sqrt(out.sigma_plugin * out.sigma_plugin +
                                   out.sigma_net * out.sigma_net);
    return out;
}

/// Wire bytes per exchange type, aggregated over every transmission in every
/// transcript fed in (retransmissions included, matching what a capture on
/// the wire would total).
struct ByteReport {
    std::map<ExchangeType, std::int64_t> per_exchange = {
        {ExchangeType::ike_sa_init, 0},    {ExchangeType::ike_auth, 0},
        {ExchangeType::create_child_sa, 0}, {ExchangeType::informational, 0},
        {ExchangeType::ike_intermediate, 0}};
    std::int64_t total = 0;

    void add(const HandshakeTranscript& t) {
        for (const auto& m : t.messages) {
            per_exchange[m.exchange_type] += m.transmitted_bytes();
            total += m.transmitted_bytes();
        }
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json per = nlohmann::ordered_json::object();
        for (const auto& [exchange, bytes] : per_exchange)
            per[std::string(to_string(exchange))] = bytes;
        return {{"per_exchange", per}, {"total", total}};
    }
};

// ---------------------------------------------------------------------------
// Fragmentation table
// ---------------------------------------------------------------------------

struct FragRow {
    std::string name;
    int init_fragments = 0, init_last = 0, init_avail = 0;
    int resp_fragments = 0, resp_last = 0, resp_avail = 0;
    std::int64_t pk_bytes = 0, ct_bytes = 0;
    std::int64_t init_total = 0, resp_total = 0;
    int init_overhead = 0, resp_overhead = 0;
};

inline FragRow make_frag_row(const FragmentationModel& model, const std::string& name,
                             std::int64_t init_payload, std::int64_t resp_payload) {
    FragRow row;
    row.name = name;
    WirePlan init = plan_fragments(model, init_payload, Direction::request);
    WirePlan resp = plan_fragments(model, resp_payload, Direction::response);
    row.init_fragments = init.fragment_count;
    row.init_last = init.last_size();
    row.init_avail = avail_in_last(model, init);
    row.resp_fragments = resp.fragment_count;
    row.resp_last = resp.last_size();
    row.resp_avail = avail_in_last(model, resp);
    row.pk_bytes = init_payload;
    row.ct_bytes = resp_payload;
    row.init_total = init.total_bytes;
    row.resp_total = resp.total_bytes;
    row.init_overhead = static_cast<int>(init.total_bytes - init_payload);
    row.resp_overhead = static_cast<int>(resp.total_bytes - resp_payload);
    return row;
}

/// IKE_SA_INIT fragmentation per algorithm, one row per registry entry plus
/// the pure-QKD row. QKD payloads depend on the flow: the side that does not
/// generate the identifier sends an empty KEY_EXCHANGE payload.
inline std::vector<FragRow> fragmentation_report(const AlgorithmRegistry& registry,
                                                 const FragmentationModel& model,
                                                 QkdFlow flow) {
    std::vector<FragRow> rows;
    rows.reserve(registry.specs().size() + 1);
    for (const auto& spec : registry.specs())
        rows.push_back(make_frag_row(model, spec.name,
                                     static_cast<std::int64_t>(spec.public_key_len),
                                     static_cast<std::int64_t>(spec.ciphertext_len)));
    std::int64_t id_len = 16;
    if (flow == QkdFlow::server_initiated)
        rows.push_back(make_frag_row(model, "qkd", 0, id_len));
    else
        rows.push_back(make_frag_row(model, "qkd", id_len, 0));
    return rows;
}

inline std::string fragmentation_csv(const std::vector<FragRow>& rows) {
    std::string out =
        "algorithm,init_frags,init_last,init_avail,resp_frags,resp_last,resp_avail,"
        "pk_bytes,ct_bytes,init_total,resp_total,init_overhead,resp_overhead\n";
    for (const auto& r : rows) {
        out += r.name + "," + std::to_string(r.init_fragments) + "," +
               std::to_string(r.init_last) + "," + std::to_string(r.init_avail) + "," +
               std::to_string(r.resp_fragments) + "," + std::to_string(r.resp_last) + "," +
               std::to_string(r.resp_avail) + "," + std::to_string(r.pk_bytes) + "," +
               std::to_string(r.ct_bytes) + "," + std::to_string(r.init_total) + "," +
               std::to_string(r.resp_total) + "," + std::to_string(r.init_overhead) + "," +
               std::to_string(r.resp_overhead) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Campaign
// ---------------------------------------------------------------------------

struct CampaignQkdConfig {
    EtsiApi api = EtsiApi::etsi_014;
    QkdFlow flow = QkdFlow::client_initiated;
    bool include_index = false;
    double kme_latency_ms = 0;
    std::size_t pool = 1024;
};

struct CampaignConfig {
    std::vector<std::string> proposals;
    std::vector<NetworkProfile> profiles;
    int iterations = 0;
    std::uint64_t seed = 0;
    CampaignQkdConfig qkd;
    FragmentationModel frag;

    void validate(const AlgorithmRegistry& registry) const {
        if (iterations < 1)
            raise(ErrorCode::config_error, "iterations must be >= 1");
        if (proposals.empty())
            raise(ErrorCode::config_error, "no proposals configured");
        if (profiles.empty())
            raise(ErrorCode::config_error, "no network profiles configured");
        if (qkd.include_index && qkd.api != EtsiApi::etsi_004)
            raise(ErrorCode::config_error, "include_index requires ETSI 004");
        for (const auto& label : proposals) parse_proposal(label, registry);
        for (const auto& p : profiles) p.validate();
        frag.validate();
    }

    static CampaignConfig from_json(const nlohmann::json& j) {
        CampaignConfig cfg;
        try {
            for (const auto& p : j.at("proposals")) cfg.proposals.push_back(p.get<std::string>());
            for (const auto& p : j.at("profiles")) {
                NetworkProfile profile;
                profile.label = p.value("label", std::string("profile"));
                profile.one_way_delay_ms = p.value("delay_ms", 0.0);
                profile.jitter_ms = p.value("jitter_ms", 0.0);
                profile.loss_probability = p.value("loss", 0.0);
                cfg.profiles.push_back(std::move(profile));
            }
            cfg.iterations = j.at("iterations").get<int>();
            cfg.seed = j.value("seed", std::uint64_t{0});
            if (j.contains("qkd")) {
                const auto& q = j.at("qkd");
                std::string api = q.value("api", std::string("014"));
                if (api == "004") cfg.qkd.api = EtsiApi::etsi_004;
                else if (api == "014") cfg.qkd.api = EtsiApi::etsi_014;
                else raise(ErrorCode::config_error, "qkd.api must be \"004\" or \"014\"");
                std::string flow = q.value("flow", std::string("client"));
                if (flow == "client") cfg.qkd.flow = QkdFlow::client_initiated;
                else if (flow == "server") cfg.qkd.flow = QkdFlow::server_initiated;
                else raise(ErrorCode::config_error, "qkd.flow must be \"client\" or \"server\"");
                cfg.qkd.include_index = q.value("include_index", false);
                cfg.qkd.kme_latency_ms = q.value("kme_latency_ms", 0.0);
                cfg.qkd.pool = q.value("pool", std::size_t{1024});
            }
        } catch (const nlohmann::json::exception& e) {
            raise(ErrorCode::config_error, e.what());
        }
        return cfg;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["proposals"] = proposals;
        auto profs = nlohmann::ordered_json::array();
        for (const auto& p : profiles)
            profs.push_back({{"label", p.label},
                             {"delay_ms", p.one_way_delay_ms},
                             {"jitter_ms", p.jitter_ms},
                             {"loss", p.loss_probability}});
        j["profiles"] = std::move(profs);
        j["iterations"] = iterations;
        j["seed"] = seed;
        j["qkd"] = {{"api", std::string(to_string(qkd.api))},
                    {"flow", std::string(to_string(qkd.flow))},
                    {"include_index", qkd.include_index},
                    {"kme_latency_ms", qkd.kme_latency_ms},
                    {"pool", qkd.pool}};
        return j;
    }
};

struct IterationSample {
    std::string proposal;
    std::string profile;
    int iteration = 0;
    bool failed = false;
    std::optional<TimingSample> timing;
    std::int64_t total_bytes = 0;
    std::int64_t sa_init_bytes = 0;
    std::int64_t intermediate_bytes = 0;
    std::int64_t auth_bytes = 0;
    std::int64_t fragments_total = 0;
};

struct ProposalReport {
    std::string proposal;
    std::string profile;
    int iterations = 0;
    int failures = 0;
    std::optional<StatSummary> stats;  // set when >= 2 successful samples
    std::int64_t sa_init_bytes = 0;
    std::int64_t intermediate_bytes = 0;
    std::int64_t auth_bytes = 0;
    std::int64_t total_bytes = 0;
};

struct CampaignResult {
    CampaignConfig config;
    std::vector<IterationSample> samples;
    std::vector<ProposalReport> reports;
    ByteReport bytes;
};

namespace detail {

inline std::string format_ms(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline HandshakeConfig handshake_config_for(const CampaignConfig& cfg, std::uint64_t sim_seed) {
    HandshakeConfig hs;
    hs.qkd.api = cfg.qkd.api;
    hs.qkd.flow = cfg.qkd.flow;
    hs.qkd.include_index = cfg.qkd.include_index;
    hs.kme_latency_ms = cfg.qkd.kme_latency_ms;
    hs.kme_pool = cfg.qkd.pool;
    hs.frag = cfg.frag;
    hs.seed = sim_seed;
    return hs;
}

inline IterationSample sample_from_transcript(const HandshakeTranscript& t,
                                              const std::string& proposal,
                                              const std::string& profile, int iteration) {
    IterationSample s;
    s.proposal = proposal;
    s.profile = profile;
    s.iteration = iteration;
    s.failed = t.failed;
    if (!t.failed) s.timing = make_timing_sample(t);
    for (const auto& m : t.messages) {
        s.total_bytes += m.transmitted_bytes();
        s.fragments_total += m.transmitted_fragments();
        switch (m.exchange_type) {
            case ExchangeType::ike_sa_init: s.sa_init_bytes += m.transmitted_bytes(); break;
            case ExchangeType::ike_intermediate:
                s.intermediate_bytes += m.transmitted_bytes();
                break;
            case ExchangeType::ike_auth: s.auth_bytes += m.transmitted_bytes(); break;
            default: break;
        }
    }
    return s;
}

}  // namespace detail

/// Runs iterations x proposals x profiles, deriving the per-iteration seed as
/// campaign_seed XOR iteration index. Failed handshakes are counted and kept
/// out of the timing statistics.
inline CampaignResult run_campaign(const CampaignConfig& config) {
    const AlgorithmRegistry& registry = default_registry();
    config.validate(registry);
    CampaignResult result;
    result.config = config;
    for (const auto& label : config.proposals) {
        Proposal proposal = parse_proposal(label, registry);
        for (const auto& profile : config.profiles) {
            ProposalReport report;
            report.proposal = label;
            report.profile = profile.label;
            report.iterations = config.iterations;
            std::vector<TimingSample> ok_samples;
            for (int iter = 0; iter < config.iterations; ++iter) {
                std::uint64_t sim_seed = config.seed ^ static_cast<std::uint64_t>(iter);
                NetworkProfile seeded = profile;
                seeded.seed = derive_seed(sim_seed, "net:" + label + ":" + profile.label);
                HandshakeTranscript transcript = run_handshake(
                    proposal, seeded, detail::handshake_config_for(config, sim_seed));
                IterationSample sample = detail::sample_from_transcript(
                    transcript, label, profile.label, iter);
                if (sample.failed) {
                    ++report.failures;
                } else {
                    ok_samples.push_back(*sample.timing);
                }
                report.sa_init_bytes += sample.sa_init_bytes;
                report.intermediate_bytes += sample.intermediate_bytes;
                report.auth_bytes += sample.auth_bytes;
                report.total_bytes += sample.total_bytes;
                result.bytes.add(transcript);
                result.samples.push_back(std::move(sample));
            }
            if (ok_samples.size() >= 2) report.stats = summarize(ok_samples);
            result.reports.push_back(std::move(report));
        }
    }
    return result;
}

inline std::string campaign_csv(const CampaignResult& result) {
    std::string out =
        "proposal,profile,iteration,t_net_ms,t_plugin_ms,delta_overhead_ms,total_bytes,"
        "sa_init_bytes,intermediate_bytes,auth_bytes,fragments_total,failed\n";
    for (const auto& s : result.samples) {
        out += s.proposal + "," + s.profile + "," + std::to_string(s.iteration) + ",";
        if (s.timing) {
            out += detail::format_ms(s.timing->t_net_ms) + "," +
                   detail::format_ms(s.timing->t_plugin_ms) + "," +
                   detail::format_ms(s.timing->delta_overhead_ms) + ",";
        } else {
            out += ",,,";
        }
        out += std::to_string(s.total_bytes) + "," + std::to_string(s.sa_init_bytes) + "," +
               std::to_string(s.intermediate_bytes) + "," + std::to_string(s.auth_bytes) + "," +
               std::to_string(s.fragments_total) + "," + (s.failed ? "true" : "false") + "\n";
    }
    return out;
}

inline nlohmann::ordered_json campaign_summary_json(const CampaignResult& result) {
    nlohmann::ordered_json j;
    j["config"] = result.config.to_json();
    auto reports = nlohmann::ordered_json::array();
    for (const auto& r : result.reports) {
        nlohmann::ordered_json entry;
        entry["proposal"] = r.proposal;
        entry["profile"] = r.profile;
        entry["iterations"] = r.iterations;
        entry["failures"] = r.failures;
        if (r.stats) {
            entry["t_net"] = {{"mean", r.stats->mean_net}, {"sigma", r.stats->sigma_net}};
            entry["t_plugin"] = {{"mean", r.stats->mean_plugin},
                                 {"sigma", r.stats->sigma_plugin}};
            entry["delta_overhead"] = {{"mean", r.stats->mean_overhead},
                                       {"sigma", r.stats->sigma_overhead}};
        } else {
            entry["t_net"] = nullptr;
            entry["t_plugin"] = nullptr;
            entry["delta_overhead"] = nullptr;
        }
        entry["bytes"] = {{"sa_init", r.sa_init_bytes},
                          {"intermediate", r.intermediate_bytes},
                          {"auth", r.auth_bytes},
                          {"total", r.total_bytes}};
        reports.push_back(std::move(entry));
    }
    j["reports"] = std::move(reports);
    return j;
}

/// Writes samples.csv, summary.json, byte_report.json and fragmentation.csv
/// into out_dir (created if needed).
inline void write_campaign_outputs(const CampaignResult& result,
                                   const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    auto write = [&](const std::filesystem::path& name, const std::string& content) {
        std::ofstream f(out_dir / name, std::ios::binary);
        if (!f) raise(ErrorCode::config_error, "cannot write " + (out_dir / name).string());
        f << content;
    };
    write("samples.csv", campaign_csv(result));
    write("summary.json", campaign_summary_json(result).dump(2) + "\n");
    write("byte_report.json", result.bytes.to_json().dump(2) + "\n");
    write("fragmentation.csv",
          fragmentation_csv(fragmentation_report(default_registry(), result.config.frag,
                                                 result.config.qkd.flow)));
}

}  // namespace qkdike
