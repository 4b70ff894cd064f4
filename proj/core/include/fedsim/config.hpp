#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsim/orchestrator.hpp"

namespace fedsim {

/// A batch of (algorithm x seed) experiments sharing one base
/// configuration.
struct ExperimentSuite {
    FederationConfig base; // algorithm/seed/prox get filled per run
    std::vector<AlgorithmKind> algorithms;
    std::vector<std::uint64_t> seeds;
    std::vector<double> targets; // extra rounds-to-target accuracies
    AlgorithmKind speedup_baseline = AlgorithmKind::FedAvg;

    bool operator==(const ExperimentSuite&) const = default;
};

/// Strict `key = value` parser: unknown or duplicate keys, malformed
/// values, and violated constraints are all collected and reported in one
/// error. Every key has a default, so an empty file is a valid suite.
ExperimentSuite parse_config_text(const std::string& text);
ExperimentSuite parse_config(const std::string& path);

/// Canonical text form; parse_config_text(serialize_config(s)) == s.
std::string serialize_config(const ExperimentSuite& suite);

/// Per-run configuration: sets algorithm and seed, and zeroes prox_mu for
/// every algorithm except FedProx (the proximal term belongs to its local
/// objective only).
FederationConfig materialize_run(const ExperimentSuite& suite, AlgorithmKind algorithm,
                                 std::uint64_t seed);

std::string algorithm_token(AlgorithmKind a);
AlgorithmKind parse_algorithm(const std::string& token);

} // namespace fedsim
