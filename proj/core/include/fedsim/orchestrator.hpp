#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedsim/aggregation.hpp"
#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/sampling.hpp"

namespace fedsim {

enum class AlgorithmKind { FedAvg, FedProx, FedPdp, FedCA, FedCM_UCB, FedCM_TS };
enum class WeightMode { DataProportional, Uniform };

std::string algorithm_name(AlgorithmKind a);
bool algorithm_uses_filter(AlgorithmKind a);

struct FederationConfig {
    int num_clients = 20;
    double sampling_ratio = 0.4;
    int rounds = 50;
    AlgorithmKind algorithm = AlgorithmKind::FedAvg;
    ScoreKind score_fn = ScoreKind::ClassificationLoss;
    LocalHyper local;
    PartitionSpec partition;
    ModelSpec model;
    int val_per_class = 50;
    int train_per_class = 500;
    int test_per_class = 100;
    double separation = 3.0;
    std::uint64_t seed = 1;
    WeightMode client_weights_mode = WeightMode::DataProportional;

    // Testing hook: skip the subset search and treat the full sampled set
    // as the filter output. Makes filtered algorithms coincide with their
    // unfiltered counterparts.
    bool force_full_filter = false;

    bool operator==(const FederationConfig&) const = default;

    /// round(sampling_ratio * num_clients), at least 1.
    int sampled_per_round() const;
};

/// Throws with every violated constraint listed, one per line.
void validate(const FederationConfig& cfg);

struct RoundRecord {
    int round = 0;
    AlgorithmKind algorithm = AlgorithmKind::FedAvg;
    std::vector<int> sampled;            // multiset for with-replacement sampling
    std::vector<int> filtered;           // empty when the algorithm has no filter
    double val_score = 0.0;              // score of the participating set
    double sampled_set_score = 0.0;      // score of the full sampled set
    double test_accuracy = 0.0;
    std::int64_t subsets_evaluated = 0;
    double wall_ms = 0.0;                // measured; kept out of deterministic output
    std::string sampling_tag;            // strategy actually dispatched
    std::string averaging_tag;
};

/// Everything derived from the seed before round 0: data, shards, weights,
/// and the materialized validation/test splits.
struct Federation {
    Dataset train;
    Dataset test;
    std::vector<int> val_indices;
    std::vector<int> train_pool;
    std::vector<ClientShard> shards;
    ClientWeightMap weights;
    Eigen::MatrixXd val_features;
    std::vector<int> val_labels;
};

Federation build_federation(const FederationConfig& cfg);

/// Stream handed to `client_id` for its local update in `round`; keyed by
/// (seed, round, client) so fan-out order and thread count cannot matter.
/// Exposed so a single client's update can be replayed in isolation.
RngStream local_update_stream(std::uint64_t seed, int round, int client_id);

struct ExperimentState {
    ParamVector w;
    std::optional<UcbState> ucb;
    std::optional<TsState> ts;
    std::vector<int> prev_sampled;
    std::vector<int> prev_opt;
    int round = 0;
};

ExperimentState init_experiment_state(const FederationConfig& cfg, const Federation& fed);

/// One synchronous round: sample, locally update in parallel, filter (when
/// the algorithm has one), average, and measure. The state mutates only
/// after every step succeeded.
RoundRecord run_round(ExperimentState& state, const Federation& fed,
                      const FederationConfig& cfg, int threads = 1);

struct ExperimentResult {
    std::vector<RoundRecord> records;
    ParamVector final_params;
};

/// Called after each round with the record and, for bandit algorithms, a
/// JSON snapshot of the sampler state (null otherwise).
using RoundObserver = std::function<void(const RoundRecord&, const nlohmann::json&)>;

ExperimentResult run_experiment(const FederationConfig& cfg, int threads = 1,
                                const RoundObserver& observer = {});

/// Smallest round whose test accuracy reaches `target`, if any.
std::optional<int> rounds_to_target(const std::vector<RoundRecord>& records, double target);

ClientWeightMap client_weights(const std::vector<ClientShard>& shards, WeightMode mode);

/// Global-model accuracy on each client's shard; empty shards report
/// nullopt rather than zero.
std::vector<std::optional<double>> per_client_accuracy(const ParamVector& w,
                                                       const ModelSpec& spec, const Dataset& ds,
                                                       const std::vector<ClientShard>& shards);

/// Deterministic round log. Ids are '+'-joined; the wall_ms column is
/// pinned to 0 so replays of a seed are byte-identical (measured times are
/// reported through RoundRecord::wall_ms and the CLI metadata file).
void write_round_csv(std::ostream& os, const std::vector<RoundRecord>& records);

} // namespace fedsim
