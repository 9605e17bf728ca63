#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "qkdike/algo_registry.hpp"
#include "qkdike/error.hpp"
#include "qkdike/ke_method.hpp"

namespace qkdike {

/// An ordered list of key-exchange methods. The first runs in IKE_SA_INIT;
/// each additional one gets its own IKE_INTERMEDIATE round. Labels follow the
/// strongSwan naming used in proposal files: "kyber1", "qkd-ke1_kyber1",
/// "x25519-ke1_kyber1-ke2_qkd", ...
struct Proposal {
    std::string label;
    std::vector<std::string> methods;

    std::size_t rounds() const { return methods.size(); }
};

inline std::string build_proposal_label(const std::vector<std::string>& methods) {
    std::string label;
    for (std::size_t i = 0; i < methods.size(); ++i) {
        if (i == 0) {
            label = methods[0];
        } else {
            label += "-ke" + std::to_string(i) + "_" + methods[i];
        }
    }
    return label;
}

inline Proposal parse_proposal(std::string_view label, const AlgorithmRegistry& registry) {
    if (label.empty()) raise(ErrorCode::config_error, "empty proposal label");
    Proposal proposal;
    proposal.label = std::string(label);

    std::vector<std::string> tokens;
    std::size_t start = 0;
    while (start <= label.size()) {
        std::size_t dash = label.find('-', start);
        if (dash == std::string_view::npos) dash = label.size();
        tokens.emplace_back(label.substr(start, dash - start));
        start = dash + 1;
    }

    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::string method = tokens[i];
        if (i > 0) {
            // each extra exchange is tagged "ke<i>_<method>"
            std::string prefix = "ke" + std::to_string(i) + "_";
            if (method.size() <= prefix.size() || method.compare(0, prefix.size(), prefix) != 0)
                raise(ErrorCode::config_error,
                      "proposal '" + proposal.label + "': expected '" + prefix +
                          "<method>' at position " + std::to_string(i) + ", got '" + method +
                          "'");
            method = method.substr(prefix.size());
        }
        if (method.empty())
            raise(ErrorCode::config_error,
                  "proposal '" + proposal.label + "': empty method identifier");
        if (!method_identifier_valid(method, registry))
            raise(ErrorCode::unknown_algorithm,
                  "proposal '" + proposal.label + "': unknown method '" + method + "'");
        proposal.methods.push_back(std::move(method));
    }
    return proposal;
}

}  // namespace qkdike
