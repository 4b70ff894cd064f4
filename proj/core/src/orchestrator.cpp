#include "fedsim/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "fedsim/parallel.hpp"

namespace fedsim {

namespace {

// Substream labels; every random decision in an experiment hangs off
// RngStream(seed).derive(label)[.derive(...)], so replays and thread
// counts cannot change what is drawn.
enum StreamLabel : std::uint64_t {
    kTrainData = 1,
    kTestData = 2,
    kValSplit = 3,
    kPartition = 4,
    kInitParams = 5,
    kUcbInit = 6,
    kSampling = 7,
    kLocalUpdate = 8,
    kTsDraw = 9,
};

std::vector<int> sorted_unique(std::vector<int> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

std::string join_ids(const std::vector<int>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i > 0) {
            out += '+';
        }
        out += std::to_string(ids[i]);
    }
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

std::string algorithm_name(AlgorithmKind a) {
    switch (a) {
        case AlgorithmKind::FedAvg: return "FedAvg";
        case AlgorithmKind::FedProx: return "FedProx";
        case AlgorithmKind::FedPdp: return "FedPdp";
        case AlgorithmKind::FedCA: return "FedCA";
        case AlgorithmKind::FedCM_UCB: return "FedCM-UCB";
        case AlgorithmKind::FedCM_TS: return "FedCM-TS";
    }
    throw std::logic_error("algorithm_name: unknown algorithm");
}

bool algorithm_uses_filter(AlgorithmKind a) {
    return a == AlgorithmKind::FedCA || a == AlgorithmKind::FedCM_UCB ||
           a == AlgorithmKind::FedCM_TS;
}

int FederationConfig::sampled_per_round() const {
    auto m = static_cast<int>(std::lround(sampling_ratio * num_clients));
    return std::max(1, m);
}

void validate(const FederationConfig& cfg) {
    std::vector<std::string> violations;
    auto require = [&](bool ok, const std::string& message) {
        if (!ok) {
            violations.push_back(message);
        }
    };

    require(cfg.num_clients >= 1, "num_clients must be >= 1");
    require(cfg.sampling_ratio > 0.0 && cfg.sampling_ratio <= 1.0,
            "sampling_ratio must lie in (0, 1]");
    require(std::lround(cfg.sampling_ratio * cfg.num_clients) >= 1,
            "round(sampling_ratio * num_clients) must be >= 1");
    require(cfg.rounds >= 0, "rounds must be >= 0");
    require(cfg.model.input_dim >= 1, "model input_dim must be >= 1");
    require(cfg.model.num_classes >= 2, "model num_classes must be >= 2");
    if (cfg.model.architecture == Architecture::Mlp1) {
        require(cfg.model.hidden_units >= 1, "mlp1 requires hidden_units >= 1");
    }
    require(cfg.local.eta > 0.0, "eta must be > 0");
    require(cfg.local.momentum >= 0.0 && cfg.local.momentum < 1.0, "momentum must lie in [0, 1)");
    require(cfg.local.weight_decay >= 0.0, "weight_decay must be >= 0");
    require(cfg.local.prox_mu >= 0.0, "prox_mu must be >= 0");
    require(cfg.local.batch_size >= 1, "batch_size must be >= 1");
    require(cfg.local.local_epochs >= 1, "local_epochs must be >= 1");
    require(cfg.partition.alpha > 0.0, "alpha must be > 0");
    require(cfg.partition.num_clients == cfg.num_clients,
            "partition num_clients must equal num_clients");
    if (cfg.partition.scheme == PartitionScheme::ClassHeterogeneity) {
        require(cfg.partition.examples_per_client >= 1,
                "class heterogeneity requires examples_per_client >= 1");
        const long long pool = static_cast<long long>(cfg.model.num_classes) *
                                   cfg.train_per_class -
                               static_cast<long long>(cfg.model.num_classes) * cfg.val_per_class;
        require(static_cast<long long>(cfg.num_clients) * cfg.partition.examples_per_client <= pool,
                "num_clients * examples_per_client exceeds the training pool");
    }
    require(cfg.val_per_class >= 1 && cfg.val_per_class < cfg.train_per_class,
            "val_per_class must lie in [1, train_per_class)");
    require(cfg.train_per_class >= 1, "train_per_class must be >= 1");
    require(cfg.test_per_class >= 1, "test_per_class must be >= 1");
    require(cfg.separation > 0.0, "separation must be > 0");

    if (cfg.algorithm == AlgorithmKind::FedProx) {
        require(cfg.local.prox_mu > 0.0, "FedProx requires prox_mu > 0");
    }
    if (cfg.algorithm == AlgorithmKind::FedAvg || cfg.algorithm == AlgorithmKind::FedPdp) {
        require(cfg.local.prox_mu == 0.0,
                algorithm_name(cfg.algorithm) + " requires prox_mu = 0");
    }
    if (algorithm_uses_filter(cfg.algorithm)) {
        require(cfg.sampled_per_round() <= kMaxFilterClients,
                "sampled clients per round exceed the exhaustive filter bound");
    }

    if (!violations.empty()) {
        std::string message = "invalid configuration:";
        for (const auto& v : violations) {
            message += "\n  - " + v;
        }
        throw std::invalid_argument(message);
    }
}

Federation build_federation(const FederationConfig& cfg) {
    RngStream master(cfg.seed);
    Federation fed;
    fed.train = synth_dataset(cfg.model.num_classes, cfg.model.input_dim, cfg.train_per_class,
                              cfg.separation, master.derive(kTrainData));
    fed.test = synth_dataset(cfg.model.num_classes, cfg.model.input_dim, cfg.test_per_class,
                             cfg.separation, master.derive(kTestData));

    ValSplit split = build_validation_set(fed.train, cfg.val_per_class, master.derive(kValSplit));
    fed.val_indices = std::move(split.val);
    fed.train_pool = std::move(split.train);

    if (cfg.partition.scheme == PartitionScheme::ClientHeterogeneity) {
        fed.shards = partition_client_heterogeneity(fed.train, fed.train_pool, cfg.partition,
                                                    master.derive(kPartition));
    } else {
        fed.shards = partition_class_heterogeneity(fed.train, fed.train_pool, cfg.partition,
                                                   master.derive(kPartition));
    }
    fed.weights = client_weights(fed.shards, cfg.client_weights_mode);
    fed.val_features = gather_rows(fed.train, fed.val_indices);
    fed.val_labels = gather_labels(fed.train, fed.val_indices);
    return fed;
}

RngStream local_update_stream(std::uint64_t seed, int round, int client_id) {
    return RngStream(seed)
        .derive(kLocalUpdate)
        .derive(static_cast<std::uint64_t>(round))
        .derive(static_cast<std::uint64_t>(client_id));
}

ExperimentState init_experiment_state(const FederationConfig& cfg, const Federation& fed) {
    (void)fed;
    ExperimentState state;
    RngStream init = RngStream(cfg.seed).derive(kInitParams);
    state.w.resize(parameter_count(cfg.model));
    for (auto& v : state.w) {
        v = -0.05 + 0.1 * init.next_double();
    }
    if (cfg.algorithm == AlgorithmKind::FedCM_UCB) {
        state.ucb = ucb_init(cfg.num_clients, RngStream(cfg.seed).derive(kUcbInit));
    } else if (cfg.algorithm == AlgorithmKind::FedCM_TS) {
        TsState ts;
        ts.alpha.assign(static_cast<std::size_t>(cfg.num_clients), 1.0);
        ts.beta.assign(static_cast<std::size_t>(cfg.num_clients), 1.0);
        state.ts = ts;
    }
    return state;
}

RoundRecord run_round(ExperimentState& state, const Federation& fed,
                      const FederationConfig& cfg, int threads) {
    const auto start = std::chrono::steady_clock::now();
    const int t = state.round;
    const int m = cfg.sampled_per_round();
    RngStream master(cfg.seed);

    RoundRecord rec;
    rec.round = t;
    rec.algorithm = cfg.algorithm;

    // Client sampling.
    SamplingOutcome outcome;
    std::optional<UcbState> next_ucb = state.ucb;
    std::optional<TsState> next_ts = state.ts;
    switch (cfg.algorithm) {
        case AlgorithmKind::FedAvg:
        case AlgorithmKind::FedPdp:
        case AlgorithmKind::FedCA:
            outcome = sample_uniform(cfg.num_clients, m,
                                     master.derive(kSampling).derive(static_cast<std::uint64_t>(t)));
            rec.sampling_tag = "uniform";
            break;
        case AlgorithmKind::FedProx:
            outcome = sample_weighted_replacement(
                fed.weights, m, master.derive(kSampling).derive(static_cast<std::uint64_t>(t)));
            rec.sampling_tag = "weighted_replacement";
            break;
        case AlgorithmKind::FedCM_UCB:
            outcome = ucb_update_and_select(*next_ucb, state.prev_sampled, state.prev_opt,
                                            static_cast<std::int64_t>(t) + 1, m);
            rec.sampling_tag = "bandit_ucb";
            break;
        case AlgorithmKind::FedCM_TS:
            outcome = ts_update_and_select(*next_ts, state.prev_sampled, state.prev_opt, m,
                                           master.derive(kTsDraw).derive(static_cast<std::uint64_t>(t)));
            rec.sampling_tag = "bandit_ts";
            break;
    }
    rec.sampled = outcome.sampled;

    // Local updates, fanned out per distinct client. A client whose shard
    // is empty has nothing to train on and reports the global model back.
    std::vector<int> participants = sorted_unique(outcome.sampled);
    std::vector<ParamVector> locals(participants.size());
    parallel_for(static_cast<int>(participants.size()), threads, [&](int i) {
        const int client = participants[static_cast<std::size_t>(i)];
        const ClientShard& shard = fed.shards[static_cast<std::size_t>(client)];
        if (shard.indices.empty()) {
            locals[static_cast<std::size_t>(i)] = state.w;
            return;
        }
        locals[static_cast<std::size_t>(i)] =
            local_update(state.w, cfg.model, fed.train, shard, cfg.local,
                         local_update_stream(cfg.seed, t, client));
    });

    ModelMap models;
    for (std::size_t i = 0; i < participants.size(); ++i) {
        models.emplace(participants[static_cast<std::size_t>(i)],
                       std::move(locals[static_cast<std::size_t>(i)]));
    }

    rec.sampled_set_score =
        score(fed.val_features, fed.val_labels, models, participants, cfg.model, cfg.score_fn);

    // Filtering and averaging.
    ParamVector next_w;
    switch (cfg.algorithm) {
        case AlgorithmKind::FedAvg:
            next_w = average_fedavg(state.w, models, fed.weights);
            rec.val_score = rec.sampled_set_score;
            rec.averaging_tag = "fedavg";
            break;
        case AlgorithmKind::FedProx: {
            std::vector<int> multiset = outcome.sampled;
            std::sort(multiset.begin(), multiset.end());
            next_w = average_mean(models, multiset);
            rec.val_score = rec.sampled_set_score;
            rec.averaging_tag = "mean";
            break;
        }
        case AlgorithmKind::FedPdp:
            next_w = average_pdp(models, participants, fed.weights, cfg.num_clients);
            rec.val_score = rec.sampled_set_score;
            rec.averaging_tag = "pdp";
            break;
        case AlgorithmKind::FedCA:
        case AlgorithmKind::FedCM_UCB:
        case AlgorithmKind::FedCM_TS: {
            FilterResult filter;
            if (cfg.force_full_filter) {
                filter.optimal_subset = participants;
                filter.score = rec.sampled_set_score;
                filter.subsets_evaluated = 0;
            } else {
                filter = combinatorial_filter(models, fed.val_features, fed.val_labels, cfg.model,
                                              cfg.score_fn);
            }
            next_w = average_ca(models, filter, fed.weights, cfg.num_clients);
            rec.filtered = filter.optimal_subset;
            rec.val_score = filter.score;
            rec.subsets_evaluated = filter.subsets_evaluated;
            rec.averaging_tag = "ca";
            break;
        }
    }

    rec.test_accuracy = accuracy(next_w, cfg.model, fed.test.features, fed.test.labels);

    // Commit the round.
    state.w = std::move(next_w);
    state.ucb = std::move(next_ucb);
    state.ts = std::move(next_ts);
    state.prev_sampled = participants;
    state.prev_opt = algorithm_uses_filter(cfg.algorithm) ? rec.filtered : std::vector<int>{};
    state.round = t + 1;

    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                      .count();
    return rec;
}

ExperimentResult run_experiment(const FederationConfig& cfg, int threads,
                                const RoundObserver& observer) {
    validate(cfg);
    Federation fed = build_federation(cfg);
    ExperimentState state = init_experiment_state(cfg, fed);

    ExperimentResult result;
    result.records.reserve(static_cast<std::size_t>(cfg.rounds));
    for (int t = 0; t < cfg.rounds; ++t) {
        RoundRecord rec = run_round(state, fed, cfg, threads);
        if (observer) {
            nlohmann::json sampler_state;
            if (state.ucb) {
                sampler_state = *state.ucb;
            } else if (state.ts) {
                sampler_state = *state.ts;
            }
            observer(rec, sampler_state);
        }
        result.records.push_back(std::move(rec));
    }
    result.final_params = std::move(state.w);
    return result;
}

std::optional<int> rounds_to_target(const std::vector<RoundRecord>& records, double target) {
    for (const auto& rec : records) {
        if (rec.test_accuracy >= target) {
            return rec.round;
        }
    }
    return std::nullopt;
}

ClientWeightMap client_weights(const std::vector<ClientShard>& shards, WeightMode mode) {
    if (shards.empty()) {
        throw std::invalid_argument("client_weights: no shards");
    }
    ClientWeightMap p(shards.size(), 0.0);
    if (mode == WeightMode::Uniform) {
        std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(shards.size()));
        return p;
    }
    double total = 0.0;
    for (const auto& shard : shards) {
        total += static_cast<double>(shard.indices.size());
    }
    if (total == 0.0) {
        throw std::invalid_argument("client_weights: every shard is empty");
    }
    for (std::size_t k = 0; k < shards.size(); ++k) {
        p[k] = static_cast<double>(shards[k].indices.size()) / total;
    }
    return p;
}

std::vector<std::optional<double>> per_client_accuracy(const ParamVector& w,
                                                       const ModelSpec& spec, const Dataset& ds,
                                                       const std::vector<ClientShard>& shards) {
    std::vector<std::optional<double>> out;
    out.reserve(shards.size());
    for (const auto& shard : shards) {
        if (shard.indices.empty()) {
            out.push_back(std::nullopt);
            continue;
        }
        Eigen::MatrixXd x = gather_rows(ds, shard.indices);
        std::vector<int> y = gather_labels(ds, shard.indices);
        out.push_back(accuracy(w, spec, x, y));
    }
    return out;
}

void write_round_csv(std::ostream& os, const std::vector<RoundRecord>& records) {
    os << "round,algorithm,sampled_ids,filtered_ids,val_score,test_acc,subsets_evaluated,wall_ms\n";
    for (const auto& rec : records) {
        os << rec.round << ',' << algorithm_name(rec.algorithm) << ',' << join_ids(rec.sampled)
           << ',' << join_ids(rec.filtered) << ',' << format_double(rec.val_score) << ','
           << format_double(rec.test_accuracy) << ',' << rec.subsets_evaluated << ",0\n";
    }
}

} // namespace fedsim
