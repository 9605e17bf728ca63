// Command-line front end: fragmentation tables, benchmark campaigns, and a
// standalone ETSI 014 mock KME server.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qkdike/kme_http.hpp"
#include "qkdike/qkdike.hpp"

namespace {

std::vector<std::string> split_csv_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

qkdike::EtsiApi parse_api(const std::string& text) {
    if (text == "004") return qkdike::EtsiApi::etsi_004;
    if (text == "014") return qkdike::EtsiApi::etsi_014;
    qkdike::raise(qkdike::ErrorCode::config_error, "--etsi-api must be 004 or 014");
}

qkdike::QkdFlow parse_flow(const std::string& text) {
    if (text == "client") return qkdike::QkdFlow::client_initiated;
    if (text == "server") return qkdike::QkdFlow::server_initiated;
    qkdike::raise(qkdike::ErrorCode::config_error, "flow must be client or server");
}

int cmd_fragtable(int frame_cap, const std::string& flow, const std::string& algorithms_file) {
    qkdike::FragmentationModel model;
    model.frame_cap = frame_cap;
    std::vector<qkdike::FragRow> rows;
    if (!algorithms_file.empty()) {
        std::ifstream f(algorithms_file);
        if (!f)
            qkdike::raise(qkdike::ErrorCode::config_error,
                          "cannot read " + algorithms_file);
        auto table = nlohmann::ordered_json::parse(f, nullptr, false);
        if (table.is_discarded())
            qkdike::raise(qkdike::ErrorCode::config_error,
                          algorithms_file + " is not valid JSON");
        auto registry = qkdike::AlgorithmRegistry::from_json(table);
        rows = qkdike::fragmentation_report(registry, model, parse_flow(flow));
    } else {
        rows = qkdike::fragmentation_report(qkdike::default_registry(), model,
                                             parse_flow(flow));
    }
    std::cout << qkdike::fragmentation_csv(rows);
    return 0;
}

struct RunOverrides {
    std::string proposals;
    int iterations = -1;
    double delay_ms = -1, jitter_ms = -1, loss = -1;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string etsi_api, qkd_flow;
    double kme_latency_ms = -1;
    bool include_index = false;
    long long pool = -1;
};

int cmd_run(const std::string& config_file, const std::string& out_dir,
            const RunOverrides& ov) {
    qkdike::CampaignConfig config;
    if (!config_file.empty()) {
        std::ifstream f(config_file);
        if (!f)
            qkdike::raise(qkdike::ErrorCode::config_error, "cannot read " + config_file);
        nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
        if (j.is_discarded())
            qkdike::raise(qkdike::ErrorCode::config_error,
                          config_file + " is not valid JSON");
        config = qkdike::CampaignConfig::from_json(j);
    } else {
        config.iterations = 1;
        config.profiles.push_back({"cli", 0, 0, 0, 0});
    }

    if (!ov.proposals.empty()) config.proposals = split_csv_list(ov.proposals);
    if (ov.iterations >= 0) config.iterations = ov.iterations;
    if (ov.seed_set) config.seed = ov.seed;
    if (ov.delay_ms >= 0 || ov.jitter_ms >= 0 || ov.loss >= 0) {
        if (config.profiles.empty()) config.profiles.push_back({"cli", 0, 0, 0, 0});
        for (auto& p : config.profiles) {
            if (ov.delay_ms >= 0) p.one_way_delay_ms = ov.delay_ms;
            if (ov.jitter_ms >= 0) p.jitter_ms = ov.jitter_ms;
            if (ov.loss >= 0) p.loss_probability = ov.loss;
        }
    }
    if (!ov.etsi_api.empty()) config.qkd.api = parse_api(ov.etsi_api);
    if (!ov.qkd_flow.empty()) config.qkd.flow = parse_flow(ov.qkd_flow);
    if (ov.kme_latency_ms >= 0) config.qkd.kme_latency_ms = ov.kme_latency_ms;
    if (ov.include_index) config.qkd.include_index = true;
    if (ov.pool >= 0) config.qkd.pool = static_cast<std::size_t>(ov.pool);

    qkdike::CampaignResult result = qkdike::run_campaign(config);
    qkdike::write_campaign_outputs(result, out_dir);

    for (const auto& r : result.reports) {
        std::printf("%-28s %-12s iterations=%d failures=%d", r.proposal.c_str(),
                    r.profile.c_str(), r.iterations, r.failures);
        if (r.stats)
            std::printf("  t_net=%.3f±%.3f ms  t_plugin=%.3f±%.3f ms  overhead=%.3f±%.3f ms",
                        r.stats->mean_net, r.stats->sigma_net, r.stats->mean_plugin,
                        r.stats->sigma_plugin, r.stats->mean_overhead,
                        r.stats->sigma_overhead);
        std::printf("  bytes=%lld\n", static_cast<long long>(r.total_bytes));
    }
    std::printf("reports written to %s\n", out_dir.c_str());
    return 0;
}

int cmd_kme_serve(const std::string& host, int port, long long pool, int key_size,
                  const std::string& sae_a, const std::string& sae_b, std::uint64_t seed) {
    qkdike::KmePairConfig config;
    config.pool_capacity = static_cast<std::size_t>(pool);
    config.key_size = static_cast<std::size_t>(key_size);
    config.seed = seed;
    config.sae_a = sae_a;
    config.sae_b = sae_b;
    qkdike::KmeSim kme(config);
    qkdike::KmeHttpFacade facade(kme);
    std::printf("mock KME pair (%s <-> %s) listening on %s:%d\n", sae_a.c_str(), sae_b.c_str(),
                host.c_str(), port);
    if (!facade.serve(host, port)) {
        std::fprintf(stderr, "failed to listen on %s:%d\n", host.c_str(), port);
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"QKD-IKEv2 key establishment simulator and benchmark harness"};
    app.require_subcommand(1);

    auto* fragtable = app.add_subcommand(
        "fragtable", "Print the IKE_SA_INIT fragmentation table as CSV");
    int frame_cap = 1514;
    std::string frag_flow = "server";
    std::string algorithms_file;
    fragtable->add_option("--fragment-cap", frame_cap, "Frame cap in bytes")
        ->capture_default_str();
    fragtable->add_option("--flow", frag_flow, "QKD flow: client or server")
        ->check(CLI::IsMember({"client", "server"}))
        ->capture_default_str();
    fragtable->add_option("--algorithms", algorithms_file,
                          "JSON algorithm table overriding the built-in registry");

    auto* run = app.add_subcommand("run", "Run a benchmark campaign");
    std::string config_file, out_dir = "out";
    RunOverrides ov;
    run->add_option("--config", config_file, "Campaign config JSON");
    run->add_option("--out", out_dir, "Output directory")->capture_default_str();
    run->add_option("--proposals", ov.proposals, "Comma-separated proposal labels");
    run->add_option("--iterations", ov.iterations, "Iterations per proposal/profile");
    run->add_option("--delay-ms", ov.delay_ms, "One-way delay in ms");
    run->add_option("--jitter-ms", ov.jitter_ms, "Jitter in ms");
    run->add_option("--loss", ov.loss, "Fragment loss probability [0,1)");
    auto* seed_opt = run->add_option("--seed", ov.seed, "Campaign seed");
    run->add_option("--etsi-api", ov.etsi_api, "QKD API: 004 or 014")
        ->check(CLI::IsMember({"004", "014"}));
    run->add_option("--qkd-flow", ov.qkd_flow, "QKD flow: client or server")
        ->check(CLI::IsMember({"client", "server"}));
    run->add_option("--kme-latency-ms", ov.kme_latency_ms, "Virtual ms per KME API call");
    run->add_flag("--include-index", ov.include_index,
                  "Carry the 4-byte starting index (ETSI 004)");
    run->add_option("--pool", ov.pool, "KME pool capacity per handshake");

    auto* serve = app.add_subcommand("kme-serve", "Serve the ETSI 014 HTTP facade");
    std::string host = "127.0.0.1";
    int port = 8600;
    long long pool = 1024;
    int key_size = 32;
    std::string sae_a = "alice", sae_b = "bob";
    std::uint64_t kme_seed = 0;
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port)->capture_default_str();
    serve->add_option("--pool", pool, "Pool capacity")->capture_default_str();
    serve->add_option("--key-size", key_size, "Key size in bytes")->capture_default_str();
    serve->add_option("--sae-a", sae_a)->capture_default_str();
    serve->add_option("--sae-b", sae_b)->capture_default_str();
    serve->add_option("--seed", kme_seed, "KME determinism seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (fragtable->parsed()) return cmd_fragtable(frame_cap, frag_flow, algorithms_file);
        if (run->parsed()) {
            ov.seed_set = seed_opt->count() > 0;
            return cmd_run(config_file, out_dir, ov);
        }
        if (serve->parsed())
            return cmd_kme_serve(host, port, pool, key_size, sae_a, sae_b, kme_seed);
    } catch (const qkdike::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.code() == qkdike::ErrorCode::config_error ? 2 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
