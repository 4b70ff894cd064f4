#include "fedsim/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace fedsim {

namespace {

void check_m(int m, int num_clients) {
    if (m < 1 || m > num_clients) {
        throw std::invalid_argument("sampling: m = " + std::to_string(m) +
                                    " outside [1, " + std::to_string(num_clients) + "]");
    }
}

void check_reward_sets(const std::vector<int>& prev_sampled, const std::vector<int>& prev_opt,
                       int num_clients) {
    std::unordered_set<int> sampled(prev_sampled.begin(), prev_sampled.end());
    for (int k : prev_opt) {
        if (sampled.find(k) == sampled.end()) {
            throw std::invalid_argument("sampling: reward set contains client " +
                                        std::to_string(k) + " that was not sampled last round");
        }
    }
    for (int k : prev_sampled) {
        if (k < 0 || k >= num_clients) {
            throw std::invalid_argument("sampling: sampled client " + std::to_string(k) +
                                        " outside the federation");
        }
    }
}

} // namespace

void to_json(nlohmann::json& j, const UcbState& s) {
    j = nlohmann::json{{"kind", "ucb"}, {"mu_hat", s.mu_hat}, {"pulls", s.pulls}};
}

void from_json(const nlohmann::json& j, UcbState& s) {
    j.at("mu_hat").get_to(s.mu_hat);
    j.at("pulls").get_to(s.pulls);
}

void to_json(nlohmann::json& j, const TsState& s) {
    j = nlohmann::json{{"kind", "ts"}, {"alpha", s.alpha}, {"beta", s.beta}};
}

void from_json(const nlohmann::json& j, TsState& s) {
    j.at("alpha").get_to(s.alpha);
    j.at("beta").get_to(s.beta);
}

SamplingOutcome sample_uniform(int num_clients, int m, RngStream rng) {
    check_m(m, num_clients);
    std::vector<int> ids(static_cast<std::size_t>(num_clients));
    std::iota(ids.begin(), ids.end(), 0);
    rng.shuffle(ids);
    SamplingOutcome out;
    out.sampled.assign(ids.begin(), ids.begin() + m);
    std::sort(out.sampled.begin(), out.sampled.end());
    return out;
}

SamplingOutcome sample_weighted_replacement(const std::vector<double>& p, int m, RngStream rng) {
    if (m < 1) {
        throw std::invalid_argument("sample_weighted_replacement: m must be >= 1");
    }
    if (p.empty()) {
        throw std::invalid_argument("sample_weighted_replacement: empty weight map");
    }
    SamplingOutcome out;
    out.sampled.reserve(static_cast<std::size_t>(m));
    for (int draw = 0; draw < m; ++draw) {
        double u = rng.next_double();
        double cum = 0.0;
        int chosen = static_cast<int>(p.size()) - 1;
        for (std::size_t k = 0; k < p.size(); ++k) {
            cum += p[k];
            if (u < cum) {
                chosen = static_cast<int>(k);
                break;
            }
        }
        out.sampled.push_back(chosen);
    }
    return out;
}

UcbState ucb_init(int num_clients, RngStream rng) {
    UcbState state;
    state.mu_hat.resize(static_cast<std::size_t>(num_clients));
    state.pulls.assign(static_cast<std::size_t>(num_clients), 1);
    for (auto& mu : state.mu_hat) {
        mu = rng.next_double() < 0.5 ? 0.0 : 1.0;
    }
    return state;
}

std::vector<int> select_top_m(const std::vector<double>& scores, int m) {
    check_m(m, static_cast<int>(scores.size()));
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)]) {
            return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
        }
        return a < b;
    });
    std::vector<int> chosen(order.begin(), order.begin() + m);
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

SamplingOutcome ucb_update_and_select(UcbState& state, const std::vector<int>& prev_sampled,
                                      const std::vector<int>& prev_opt, std::int64_t t, int m) {
    const auto n = static_cast<int>(state.mu_hat.size());
    check_m(m, n);
    if (t < 1) {
        throw std::invalid_argument("ucb_update_and_select: round index t must be >= 1");
    }
    check_reward_sets(prev_sampled, prev_opt, n);

    std::unordered_set<int> opt(prev_opt.begin(), prev_opt.end());
    for (int k : prev_sampled) {
        const double r = opt.count(k) ? 1.0 : 0.0;
        auto& mu = state.mu_hat[static_cast<std::size_t>(k)];
        auto& a = state.pulls[static_cast<std::size_t>(k)];
        mu = (static_cast<double>(a) * mu + r) / static_cast<double>(a + 1);
        a += 1;
    }

    SamplingOutcome out;
    out.scores_used.resize(static_cast<std::size_t>(n));
    const double log_t = std::log(static_cast<double>(t));
    for (int k = 0; k < n; ++k) {
        const auto a = static_cast<double>(state.pulls[static_cast<std::size_t>(k)]);
        out.scores_used[static_cast<std::size_t>(k)] =
            state.mu_hat[static_cast<std::size_t>(k)] + std::sqrt(3.0 * log_t / (2.0 * a));
    }
    out.sampled = select_top_m(out.scores_used, m);
    return out;
}

double beta_sample(double alpha, double beta, RngStream& rng) {
    if (!(alpha > 0.0) || !(beta > 0.0)) {
        throw std::invalid_argument("beta_sample: alpha and beta must be positive");
    }
    double x = rng.next_gamma(alpha);
    double y = rng.next_gamma(beta);
    double total = x + y;
    if (total <= 0.0) {
        return 0.5; // both gammas underflowed
    }
    return x / total;
}

SamplingOutcome ts_update_and_select(TsState& state, const std::vector<int>& prev_sampled,
                                     const std::vector<int>& prev_opt, int m, RngStream rng) {
    const auto n = static_cast<int>(state.alpha.size());
    check_m(m, n);
    check_reward_sets(prev_sampled, prev_opt, n);

    std::unordered_set<int> opt(prev_opt.begin(), prev_opt.end());
    for (int k : prev_sampled) {
        const double r = opt.count(k) ? 1.0 : 0.0;
        state.alpha[static_cast<std::size_t>(k)] += r;
        state.beta[static_cast<std::size_t>(k)] += 1.0 - r;
    }

    SamplingOutcome out;
    out.scores_used.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        out.scores_used[static_cast<std::size_t>(k)] =
            beta_sample(state.alpha[static_cast<std::size_t>(k)],
                        state.beta[static_cast<std::size_t>(k)], rng);
    }
    out.sampled = select_top_m(out.scores_used, m);
    return out;
}

} // namespace fedsim
