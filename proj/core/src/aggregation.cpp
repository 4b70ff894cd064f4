#include "fedsim/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fedsim {

namespace {

void check_subset(const ModelMap& models, const std::vector<int>& subset, const char* who) {
    if (subset.empty()) {
        throw std::invalid_argument(std::string(who) + ": subset must be nonempty");
    }
    for (int id : subset) {
        if (models.find(id) == models.end()) {
            throw std::invalid_argument(std::string(who) + ": client " + std::to_string(id) +
                                        " has no model in this round");
        }
    }
}

std::vector<int> sorted_unique(std::vector<int> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

std::vector<int> ids_from_mask(const std::vector<int>& sorted_ids, std::uint32_t mask) {
    std::vector<int> out;
    for (std::size_t i = 0; i < sorted_ids.size(); ++i) {
        if (mask & (1u << i)) {
            out.push_back(sorted_ids[i]);
        }
    }
    return out;
}

} // namespace

void validate_weights(const ClientWeightMap& p) {
    double total = 0.0;
    for (double w : p) {
        if (w < 0.0 || !std::isfinite(w)) {
            throw std::invalid_argument("client weights must be finite and nonnegative");
        }
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw std::invalid_argument("client weights must sum to 1 (got " + std::to_string(total) + ")");
    }
}

Eigen::MatrixXd ensemble_logits(const ModelMap& models, const std::vector<int>& subset,
                                const ModelSpec& spec, const Eigen::MatrixXd& features) {
    check_subset(models, subset, "ensemble_logits");
    std::vector<int> members = sorted_unique(subset);

    Eigen::MatrixXd sum = forward_logits(models.at(members.front()), spec, features);
    for (std::size_t i = 1; i < members.size(); ++i) {
        sum += forward_logits(models.at(members[i]), spec, features);
    }
    sum /= static_cast<double>(members.size());
    return sum;
}

double score_from_logits(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                         ScoreKind kind) {
    const Eigen::Index n = logits.rows();
    if (n == 0) {
        throw std::invalid_argument("score: empty validation set");
    }
    if (static_cast<Eigen::Index>(labels.size()) != n) {
        throw std::invalid_argument("score: logits/labels size mismatch");
    }
    const auto classes = static_cast<int>(logits.cols());

    double acc = 0.0;
    if (kind == ScoreKind::DiracDelta) {
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            for (int c = 1; c < classes; ++c) {
                if (logits(i, c) > logits(i, best)) {
                    best = c;
                }
            }
            if (best == labels[static_cast<std::size_t>(i)]) {
                acc += 1.0;
            }
        }
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            double mx = logits.row(i).maxCoeff();
            double lse = std::log((logits.row(i).array() - mx).exp().sum());
            acc += logits(i, labels[static_cast<std::size_t>(i)]) - mx - lse;
        }
    }
    return acc / static_cast<double>(n);
}

double score(const Eigen::MatrixXd& val_features, const std::vector<int>& val_labels,
             const ModelMap& models, const std::vector<int>& subset, const ModelSpec& spec,
             ScoreKind kind) {
    Eigen::MatrixXd logits = ensemble_logits(models, subset, spec, val_features);
    return score_from_logits(logits, val_labels, kind);
}

FilterResult combinatorial_filter(const ModelMap& models, const Eigen::MatrixXd& val_features,
                                  const std::vector<int>& val_labels, const ModelSpec& spec,
                                  ScoreKind kind) {
    const auto n = static_cast<int>(models.size());
    if (n < 1) {
        throw std::invalid_argument("combinatorial_filter: no models to filter");
    }
    if (n > kMaxFilterClients) {
        throw std::invalid_argument("combinatorial_filter: " + std::to_string(n) +
                                    " clients exceeds the exhaustive-enumeration bound of " +
                                    std::to_string(kMaxFilterClients));
    }

    std::vector<int> sorted_ids;
    sorted_ids.reserve(static_cast<std::size_t>(n));
    std::vector<Eigen::MatrixXd> member_logits;
    member_logits.reserve(static_cast<std::size_t>(n));
    for (const auto& [id, params] : models) {
        sorted_ids.push_back(id);
        member_logits.push_back(forward_logits(params, spec, val_features));
    }

    const std::uint32_t mask_end = 1u << n;
    double best_score = 0.0;
    int best_count = 0;
    std::uint32_t best_mask = 0;
    bool have_best = false;

    Eigen::MatrixXd ensemble(val_features.rows(), spec.num_classes);
    for (std::uint32_t mask = 1; mask < mask_end; ++mask) {
        int count = 0;
        bool first = true;
        // Members accumulate in ascending-id order, matching ensemble_logits.
        for (int i = 0; i < n; ++i) {
            if (!(mask & (1u << i))) {
                continue;
            }
            ++count;
            if (first) {
                ensemble = member_logits[static_cast<std::size_t>(i)];
                first = false;
            } else {
                ensemble += member_logits[static_cast<std::size_t>(i)];
            }
        }
        ensemble /= static_cast<double>(count);
        double s = score_from_logits(ensemble, val_labels, kind);

        bool better = false;
        if (!have_best || s > best_score) {
            better = true;
        } else if (s == best_score) {
            if (count > best_count) {
                better = true;
            } else if (count == best_count &&
                       ids_from_mask(sorted_ids, mask) < ids_from_mask(sorted_ids, best_mask)) {
                better = true;
            }
        }
        if (better) {
            have_best = true;
            best_score = s;
            best_count = count;
            best_mask = mask;
        }
    }

    FilterResult result;
    result.optimal_subset = ids_from_mask(sorted_ids, best_mask);
    result.score = best_score;
    result.subsets_evaluated = static_cast<std::int64_t>(mask_end) - 1;
    return result;
}

ParamVector average_fedavg(const ParamVector& w_global, const ModelMap& local,
                           const ClientWeightMap& p) {
    validate_weights(p);
    for (const auto& [id, params] : local) {
        if (id < 0 || static_cast<std::size_t>(id) >= p.size()) {
            throw std::invalid_argument("average_fedavg: sampled client " + std::to_string(id) +
                                        " outside the weight map");
        }
        if (params.size() != w_global.size()) {
            throw std::invalid_argument("average_fedavg: model length mismatch");
        }
    }

    double unsampled_mass = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (local.find(static_cast<int>(k)) == local.end()) {
            unsampled_mass += p[k];
        }
    }

    ParamVector out(w_global.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = unsampled_mass * w_global[i];
    }
    for (const auto& [id, params] : local) {
        const double pk = p[static_cast<std::size_t>(id)];
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] += pk * params[i];
        }
    }
    return out;
}

ParamVector average_mean(const ModelMap& local, const std::vector<int>& ids) {
    check_subset(local, ids, "average_mean");
    ParamVector out(local.at(ids.front()).size(), 0.0);
    for (int id : ids) {
        const ParamVector& w = local.at(id);
        if (w.size() != out.size()) {
            throw std::invalid_argument("average_mean: model length mismatch");
        }
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] += w[i];
        }
    }
    const auto count = static_cast<double>(ids.size());
    for (double& v : out) {
        v /= count;
    }
    return out;
}

ParamVector average_pdp(const ModelMap& local, const std::vector<int>& ids,
                        const ClientWeightMap& p, int total_clients) {
    check_subset(local, ids, "average_pdp");
    validate_weights(p);
    std::vector<int> members = sorted_unique(ids);
    const double scale = static_cast<double>(total_clients) / static_cast<double>(members.size());

    ParamVector out(local.at(members.front()).size(), 0.0);
    for (int id : members) {
        if (id < 0 || static_cast<std::size_t>(id) >= p.size()) {
            throw std::invalid_argument("average_pdp: client " + std::to_string(id) +
                                        " outside the weight map");
        }
        const ParamVector& w = local.at(id);
        if (w.size() != out.size()) {
            throw std::invalid_argument("average_pdp: model length mismatch");
        }
        const double coeff = p[static_cast<std::size_t>(id)] * scale;
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] += coeff * w[i];
        }
    }
    return out;
}

ParamVector average_ca(const ModelMap& local, const FilterResult& filter,
                       const ClientWeightMap& p, int total_clients) {
    check_subset(local, filter.optimal_subset, "average_ca");
    return average_pdp(local, filter.optimal_subset, p, total_clients);
}

} // namespace fedsim
