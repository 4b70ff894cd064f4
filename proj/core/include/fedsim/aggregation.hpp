#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "fedsim/model.hpp"

namespace fedsim {

/// Client weights p indexed by client id over the whole federation.
/// Valid maps are nonnegative and sum to 1 within 1e-12.
using ClientWeightMap = std::vector<double>;

void validate_weights(const ClientWeightMap& p);

/// Subset quality on a validation set; both kinds are maximized.
///   DiracDelta:         top-1 accuracy of the averaged logits.
///   ClassificationLoss: mean log soft-probability of the true class
///                       (negated cross-entropy, so higher is better).
enum class ScoreKind { DiracDelta, ClassificationLoss };

struct FilterResult {
    std::vector<int> optimal_subset; // nonempty, ascending client ids
    double score = 0.0;
    std::int64_t subsets_evaluated = 0;
};

/// Local models for one round, keyed by client id.
using ModelMap = std::map<int, ParamVector>;

/// Unweighted mean of the member models' logits. Members are summed in
/// ascending client-id order so results are bit-reproducible.
Eigen::MatrixXd ensemble_logits(const ModelMap& models, const std::vector<int>& subset,
                                const ModelSpec& spec, const Eigen::MatrixXd& features);

/// Score of already-averaged logits; the shared kernel behind score() and
/// the combinatorial filter.
double score_from_logits(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                         ScoreKind kind);

double score(const Eigen::MatrixXd& val_features, const std::vector<int>& val_labels,
             const ModelMap& models, const std::vector<int>& subset, const ModelSpec& spec,
             ScoreKind kind);

/// Maximum subset size the exhaustive filter accepts.
inline constexpr int kMaxFilterClients = 20;

/// Evaluates every nonempty subset of the given models on the validation
/// set and returns the maximizer. Ties prefer larger subsets, then the
/// lexicographically smallest sorted id tuple. Refuses more than
/// kMaxFilterClients models rather than searching approximately.
FilterResult combinatorial_filter(const ModelMap& models, const Eigen::MatrixXd& val_features,
                                  const std::vector<int>& val_labels, const ModelSpec& spec,
                                  ScoreKind kind);

/// w' = sum_{k not sampled} p_k * w_global + sum_{k sampled} p_k * w_k.
/// Unsampled weight mass stays on the previous global model.
ParamVector average_fedavg(const ParamVector& w_global, const ModelMap& local,
                           const ClientWeightMap& p);

/// Unweighted mean over `ids`; duplicate ids count with multiplicity.
ParamVector average_mean(const ModelMap& local, const std::vector<int>& ids);

/// w' = sum_{k in ids} p_k * (total_clients / |ids|) * w_k, no further
/// renormalization.
ParamVector average_pdp(const ModelMap& local, const std::vector<int>& ids,
                        const ClientWeightMap& p, int total_clients);

/// average_pdp restricted to the filter's optimal subset.
ParamVector average_ca(const ModelMap& local, const FilterResult& filter,
                       const ClientWeightMap& p, int total_clients);

} // namespace fedsim
