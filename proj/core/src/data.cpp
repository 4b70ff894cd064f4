#include "fedsim/data.hpp"

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fedsim {

namespace {

constexpr std::uint64_t kCenterKey = 0xB10BCE47E25ull; // fixed, seed-independent

// Unit direction for a class center; a pure function of (c, dim).
Eigen::VectorXd class_direction(int c, int dim) {
    RngStream rng = RngStream(kCenterKey).derive(static_cast<std::uint64_t>(c));
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) {
        v(i) = rng.next_normal();
    }
    double norm = v.norm();
    if (norm == 0.0) {
        v.setZero();
        v(0) = 1.0;
        return v;
    }
    return v / norm;
}

std::vector<double> dirichlet(int k, double alpha, RngStream& rng) {
    std::vector<double> x(static_cast<std::size_t>(k));
    double total = 0.0;
    for (auto& xi : x) {
        xi = rng.next_gamma(alpha);
        total += xi;
    }
    if (total <= 0.0) {
        // Underflow of every gamma draw; fall back to the simplex center.
        std::fill(x.begin(), x.end(), 1.0 / k);
        return x;
    }
    for (auto& xi : x) {
        xi /= total;
    }
    return x;
}

// Integer counts summing to n, proportional to `props` with the remainder
// going to the largest fractional parts (ties to the smaller index).
std::vector<int> largest_remainder_counts(const std::vector<double>& props, int n) {
    const int k = static_cast<int>(props.size());
    std::vector<int> counts(static_cast<std::size_t>(k));
    std::vector<std::pair<double, int>> fracs;
    fracs.reserve(static_cast<std::size_t>(k));
    long long assigned = 0;
    for (int i = 0; i < k; ++i) {
        double target = props[static_cast<std::size_t>(i)] * n;
        double base = std::floor(target);
        counts[static_cast<std::size_t>(i)] = static_cast<int>(base);
        assigned += static_cast<long long>(base);
        fracs.emplace_back(target - base, i);
    }
    auto remainder = static_cast<int>(n - assigned);
    std::sort(fracs.begin(), fracs.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int r = 0; r < remainder; ++r) {
        counts[static_cast<std::size_t>(fracs[static_cast<std::size_t>(r)].second)] += 1;
    }
    return counts;
}

std::vector<std::vector<int>> pool_by_class(const Dataset& ds, std::span<const int> pool) {
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(ds.num_classes));
    for (int idx : pool) {
        if (idx < 0 || idx >= ds.n()) {
            throw std::invalid_argument("partition: pool index " + std::to_string(idx) +
                                        " out of dataset range [0, " + std::to_string(ds.n()) + ")");
        }
        by_class[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(idx)])].push_back(idx);
    }
    return by_class;
}

void check_partition_spec(const PartitionSpec& spec, PartitionScheme expected) {
    if (spec.scheme != expected) {
        throw std::invalid_argument("partition: spec.scheme does not match the called partitioner");
    }
    if (!(spec.alpha > 0.0)) {
        throw std::invalid_argument("partition: alpha must be > 0");
    }
    if (spec.num_clients < 1) {
        throw std::invalid_argument("partition: num_clients must be >= 1");
    }
}

std::vector<int> all_indices(const Dataset& ds) {
    std::vector<int> idx(static_cast<std::size_t>(ds.n()));
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

} // namespace

Dataset synth_dataset(int num_classes, int dim, int per_class, double separation,
                      RngStream rng) {
    if (num_classes < 1 || per_class < 1) {
        throw std::invalid_argument("synth_dataset: num_classes and per_class must be positive");
    }
    if (dim < 1) {
        throw std::invalid_argument("synth_dataset: dim must be >= 1");
    }
    if (!(separation > 0.0)) {
        throw std::invalid_argument("synth_dataset: separation must be > 0");
    }

    Dataset ds;
    ds.num_classes = num_classes;
    const int n = num_classes * per_class;
    ds.features.resize(n, dim);
    ds.labels.resize(static_cast<std::size_t>(n));

    int row = 0;
    for (int c = 0; c < num_classes; ++c) {
        Eigen::VectorXd center = separation * class_direction(c, dim);
        for (int i = 0; i < per_class; ++i, ++row) {
            for (int d = 0; d < dim; ++d) {
                ds.features(row, d) = center(d) + rng.next_normal();
            }
            ds.labels[static_cast<std::size_t>(row)] = c;
        }
    }
    return ds;
}

std::vector<ClientShard> partition_client_heterogeneity(const Dataset& ds,
                                                        std::span<const int> pool,
                                                        const PartitionSpec& spec,
                                                        RngStream rng) {
    check_partition_spec(spec, PartitionScheme::ClientHeterogeneity);
    const int k = spec.num_clients;

    std::vector<ClientShard> shards(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        shards[static_cast<std::size_t>(i)].client_id = i;
    }

    auto by_class = pool_by_class(ds, pool);
    for (const auto& class_pool : by_class) {
        auto props = dirichlet(k, spec.alpha, rng);
        auto counts = largest_remainder_counts(props, static_cast<int>(class_pool.size()));
        std::size_t offset = 0;
        for (int client = 0; client < k; ++client) {
            auto take = static_cast<std::size_t>(counts[static_cast<std::size_t>(client)]);
            auto& dst = shards[static_cast<std::size_t>(client)].indices;
            dst.insert(dst.end(), class_pool.begin() + static_cast<std::ptrdiff_t>(offset),
                       class_pool.begin() + static_cast<std::ptrdiff_t>(offset + take));
            offset += take;
        }
    }
    return shards;
}

std::vector<ClientShard> partition_class_heterogeneity(const Dataset& ds,
                                                       std::span<const int> pool,
                                                       const PartitionSpec& spec,
                                                       RngStream rng) {
    check_partition_spec(spec, PartitionScheme::ClassHeterogeneity);
    if (spec.examples_per_client < 1) {
        throw std::invalid_argument("partition: examples_per_client must be >= 1 for class heterogeneity");
    }
    const int k = spec.num_clients;
    const long long wanted = static_cast<long long>(k) * spec.examples_per_client;
    if (wanted > static_cast<long long>(pool.size())) {
        throw std::invalid_argument("partition: num_clients * examples_per_client = " +
                                    std::to_string(wanted) + " exceeds pool size " +
                                    std::to_string(pool.size()));
    }

    auto by_class = pool_by_class(ds, pool);
    const int num_classes = ds.num_classes;
    std::vector<std::size_t> cursor(static_cast<std::size_t>(num_classes), 0);
    auto remaining = [&](int c) {
        return by_class[static_cast<std::size_t>(c)].size() - cursor[static_cast<std::size_t>(c)];
    };

    std::vector<ClientShard> shards(static_cast<std::size_t>(k));
    for (int client = 0; client < k; ++client) {
        auto& shard = shards[static_cast<std::size_t>(client)];
        shard.client_id = client;
        shard.indices.reserve(static_cast<std::size_t>(spec.examples_per_client));

        auto q = dirichlet(num_classes, spec.alpha, rng);
        for (int i = 0; i < spec.examples_per_client; ++i) {
            double u = rng.next_double();
            double cum = 0.0;
            int chosen = num_classes - 1;
            for (int c = 0; c < num_classes; ++c) {
                cum += q[static_cast<std::size_t>(c)];
                if (u < cum) {
                    chosen = c;
                    break;
                }
            }
            if (remaining(chosen) == 0) {
                // Redraw from q restricted to classes that still have stock.
                double mass = 0.0;
                for (int c = 0; c < num_classes; ++c) {
                    if (remaining(c) > 0) mass += q[static_cast<std::size_t>(c)];
                }
                chosen = -1;
                if (mass > 0.0) {
                    double v = rng.next_double() * mass;
                    double acc = 0.0;
                    for (int c = 0; c < num_classes; ++c) {
                        if (remaining(c) == 0) continue;
                        acc += q[static_cast<std::size_t>(c)];
                        chosen = c;
                        if (v < acc) break;
                    }
                } else {
                    for (int c = 0; c < num_classes; ++c) {
                        if (remaining(c) > 0) {
                            chosen = c;
                            break;
                        }
                    }
                }
                if (chosen < 0) {
                    throw std::logic_error("partition: ran out of examples despite capacity check");
                }
            }
            auto& cur = cursor[static_cast<std::size_t>(chosen)];
            shard.indices.push_back(by_class[static_cast<std::size_t>(chosen)][cur]);
            ++cur;
        }
    }
    return shards;
}

std::vector<ClientShard> partition_client_heterogeneity(const Dataset& ds,
                                                        const PartitionSpec& spec,
                                                        RngStream rng) {
    auto idx = all_indices(ds);
    return partition_client_heterogeneity(ds, idx, spec, rng);
}

std::vector<ClientShard> partition_class_heterogeneity(const Dataset& ds,
                                                       const PartitionSpec& spec,
                                                       RngStream rng) {
    auto idx = all_indices(ds);
    return partition_class_heterogeneity(ds, idx, spec, rng);
}

ValSplit build_validation_set(const Dataset& ds, int per_class, RngStream rng) {
    if (per_class < 0) {
        throw std::invalid_argument("build_validation_set: per_class must be >= 0");
    }
    auto idx = all_indices(ds);
    auto by_class = pool_by_class(ds, idx);

    std::vector<char> in_val(static_cast<std::size_t>(ds.n()), 0);
    ValSplit split;
    for (int c = 0; c < ds.num_classes; ++c) {
        auto& class_pool = by_class[static_cast<std::size_t>(c)];
        if (static_cast<int>(class_pool.size()) < per_class) {
            throw std::invalid_argument("build_validation_set: class " + std::to_string(c) +
                                        " has " + std::to_string(class_pool.size()) +
                                        " examples, need " + std::to_string(per_class));
        }
        rng.shuffle(class_pool);
        std::vector<int> chosen(class_pool.begin(), class_pool.begin() + per_class);
        std::sort(chosen.begin(), chosen.end());
        for (int i : chosen) {
            in_val[static_cast<std::size_t>(i)] = 1;
        }
        split.val.insert(split.val.end(), chosen.begin(), chosen.end());
    }
    for (int i = 0; i < ds.n(); ++i) {
        if (!in_val[static_cast<std::size_t>(i)]) {
            split.train.push_back(i);
        }
    }
    return split;
}

nlohmann::json partition_manifest(const std::vector<ClientShard>& shards,
                                  const PartitionSpec& spec, std::uint64_t seed) {
    nlohmann::json clients = nlohmann::json::object();
    nlohmann::json empty_clients = nlohmann::json::array();
    for (const auto& shard : shards) {
        clients[std::to_string(shard.client_id)] = shard.indices;
        if (shard.indices.empty()) {
            empty_clients.push_back(shard.client_id);
        }
    }
    nlohmann::json manifest{
        {"scheme", spec.scheme == PartitionScheme::ClientHeterogeneity ? "client" : "class"},
        {"alpha", spec.alpha},
        {"num_clients", spec.num_clients},
        {"seed", seed},
        {"clients", std::move(clients)},
        {"empty_clients", std::move(empty_clients)},
    };
    if (spec.scheme == PartitionScheme::ClassHeterogeneity) {
        manifest["examples_per_client"] = spec.examples_per_client;
    }
    return manifest;
}

Eigen::MatrixXd gather_rows(const Dataset& ds, std::span<const int> indices) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), ds.dim());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = ds.features.row(indices[i]);
    }
    return out;
}

std::vector<int> gather_labels(const Dataset& ds, std::span<const int> indices) {
    std::vector<int> out;
    out.reserve(indices.size());
    for (int i : indices) {
        out.push_back(ds.labels[static_cast<std::size_t>(i)]);
    }
    return out;
}

} // namespace fedsim
