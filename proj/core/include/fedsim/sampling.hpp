#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedsim/rng.hpp"

namespace fedsim {

/// Result of one client-sampling step. `sampled` has exactly m entries;
/// without-replacement strategies return distinct ascending ids, the
/// with-replacement strategy keeps draw order and multiplicity.
/// `scores_used` carries the per-client selection scores of the bandit
/// strategies (empty otherwise).
struct SamplingOutcome {
    std::vector<int> sampled;
    std::vector<double> scores_used;
};

/// Per-client UCB statistics: empirical mean reward and pull count.
struct UcbState {
    std::vector<double> mu_hat;
    std::vector<std::int64_t> pulls;

    bool operator==(const UcbState&) const = default;
};

/// Per-client Beta posterior for Thompson sampling.
struct TsState {
    std::vector<double> alpha;
    std::vector<double> beta;

    bool operator==(const TsState&) const = default;
};

void to_json(nlohmann::json& j, const UcbState& s);
void from_json(const nlohmann::json& j, UcbState& s);
void to_json(nlohmann::json& j, const TsState& s);
void from_json(const nlohmann::json& j, TsState& s);

/// m distinct clients uniformly without replacement (shuffle prefix).
SamplingOutcome sample_uniform(int num_clients, int m, RngStream rng);

/// m i.i.d. draws from Categorical(p); duplicates allowed and meaningful
/// (the paired mean averaging counts them with multiplicity).
SamplingOutcome sample_weighted_replacement(const std::vector<double>& p, int m, RngStream rng);

/// Every client starts with one pull and a coin-flip empirical mean
/// (0.0 or 1.0 with equal probability).
UcbState ucb_init(int num_clients, RngStream rng);

/// Indices of the m largest scores, ties to the smallest index; returned
/// ascending. Shared by both bandit strategies.
std::vector<int> select_top_m(const std::vector<double>& scores, int m);

/// Applies the reward r_k = 1[k in prev_opt] running-mean update to every
/// client in prev_sampled, then selects the m clients with the largest
/// mu_hat_k + sqrt(3 ln(t) / (2 pulls_k)). t is the 1-based round index;
/// pass an empty prev_sampled on the first round to skip the update.
SamplingOutcome ucb_update_and_select(UcbState& state, const std::vector<int>& prev_sampled,
                                      const std::vector<int>& prev_opt, std::int64_t t, int m);

/// Beta(alpha, beta) variate built from two gamma draws.
double beta_sample(double alpha, double beta, RngStream& rng);

/// Posterior update (alpha += r, beta += 1 - r) for clients in
/// prev_sampled, then a fresh Beta draw per client and top-m selection.
SamplingOutcome ts_update_and_select(TsState& state, const std::vector<int>& prev_sampled,
                                     const std::vector<int>& prev_opt, int m, RngStream rng);

} // namespace fedsim
