#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "fedsim/data.hpp"

using namespace fedsim;

namespace {

std::vector<int> sorted_union(const std::vector<ClientShard>& shards) {
    std::vector<int> all;
    for (const auto& shard : shards) {
        all.insert(all.end(), shard.indices.begin(), shard.indices.end());
    }
    std::sort(all.begin(), all.end());
    return all;
}

std::vector<double> class_histogram(const Dataset& ds, const std::vector<int>& indices) {
    std::vector<double> h(static_cast<std::size_t>(ds.num_classes), 0.0);
    for (int i : indices) {
        h[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])] += 1.0;
    }
    double total = static_cast<double>(indices.size());
    if (total > 0) {
        for (auto& v : h) v /= total;
    }
    return h;
}

// Mean total-variation distance between per-client and pool-wide class
// distributions, over nonempty shards.
double mean_tv(const Dataset& ds, const std::vector<int>& pool,
               const std::vector<ClientShard>& shards) {
    auto global = class_histogram(ds, pool);
    double total = 0.0;
    int counted = 0;
    for (const auto& shard : shards) {
        if (shard.indices.empty()) continue;
        auto h = class_histogram(ds, shard.indices);
        double tv = 0.0;
        for (std::size_t c = 0; c < h.size(); ++c) {
            tv += std::abs(h[c] - global[c]);
        }
        total += 0.5 * tv;
        ++counted;
    }
    REQUIRE(counted > 0);
    return total / counted;
}

} // namespace

TEST_CASE("synth_dataset lays out classes in label order") {
    auto ds = synth_dataset(2, 4, 3, 1.0, RngStream(1));
    CHECK(ds.n() == 6);
    CHECK(ds.labels == std::vector<int>{0, 0, 0, 1, 1, 1});
}

TEST_CASE("synth_dataset is bitwise deterministic per seed") {
    auto a = synth_dataset(3, 5, 10, 2.0, RngStream(42));
    auto b = synth_dataset(3, 5, 10, 2.0, RngStream(42));
    CHECK(a.features == b.features);
    auto c = synth_dataset(3, 5, 10, 2.0, RngStream(43));
    CHECK(a.features != c.features);
}

TEST_CASE("well-separated blobs are linearly separable by a centroid probe") {
    auto train = synth_dataset(3, 8, 60, 10.0, RngStream(5));
    auto held = synth_dataset(3, 8, 60, 10.0, RngStream(6));

    // Nearest-centroid probe fit on `train`.
    std::vector<Eigen::VectorXd> centroids(3, Eigen::VectorXd::Zero(8));
    std::vector<int> counts(3, 0);
    for (int i = 0; i < train.n(); ++i) {
        centroids[static_cast<std::size_t>(train.labels[static_cast<std::size_t>(i)])] +=
            train.features.row(i).transpose();
        counts[static_cast<std::size_t>(train.labels[static_cast<std::size_t>(i)])] += 1;
    }
    for (int c = 0; c < 3; ++c) {
        centroids[static_cast<std::size_t>(c)] /= counts[static_cast<std::size_t>(c)];
    }

    int correct = 0;
    for (int i = 0; i < held.n(); ++i) {
        int best = 0;
        double best_dist = (held.features.row(i).transpose() - centroids[0]).squaredNorm();
        for (int c = 1; c < 3; ++c) {
            double d =
                (held.features.row(i).transpose() - centroids[static_cast<std::size_t>(c)]).squaredNorm();
            if (d < best_dist) {
                best_dist = d;
                best = c;
            }
        }
        correct += best == held.labels[static_cast<std::size_t>(i)];
    }
    CHECK(static_cast<double>(correct) / held.n() >= 0.99);
}

TEST_CASE("synth_dataset validates its arguments") {
    CHECK_THROWS(synth_dataset(2, 0, 3, 1.0, RngStream(1)));
    CHECK_THROWS(synth_dataset(0, 2, 3, 1.0, RngStream(1)));
    CHECK_THROWS(synth_dataset(2, 2, 3, 0.0, RngStream(1)));
}

TEST_CASE("client heterogeneity at huge alpha is an even split") {
    auto ds = synth_dataset(3, 2, 100, 1.0, RngStream(2));
    PartitionSpec spec{PartitionScheme::ClientHeterogeneity, 1e6, 4, 0};
    auto shards = partition_client_heterogeneity(ds, spec, RngStream(7));
    REQUIRE(shards.size() == 4);
    for (const auto& shard : shards) {
        auto h = class_histogram(ds, shard.indices);
        // 100 examples per class over 4 clients: 25 each, within rounding.
        double total = static_cast<double>(shard.indices.size());
        for (double frac : h) {
            CHECK(std::abs(frac * total - 25.0) <= 1.0);
        }
    }
}

TEST_CASE("client heterogeneity with one client takes everything") {
    auto ds = synth_dataset(2, 2, 10, 1.0, RngStream(3));
    PartitionSpec spec{PartitionScheme::ClientHeterogeneity, 0.5, 1, 0};
    auto shards = partition_client_heterogeneity(ds, spec, RngStream(8));
    REQUIRE(shards.size() == 1);
    CHECK(static_cast<int>(shards[0].indices.size()) == ds.n());
}

TEST_CASE("client heterogeneity at alpha 0.1 is heavily skewed") {
    auto ds = synth_dataset(5, 2, 200, 1.0, RngStream(4));
    PartitionSpec spec{PartitionScheme::ClientHeterogeneity, 0.1, 20, 0};
    int skewed_seeds = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto shards = partition_client_heterogeneity(ds, spec, RngStream(seed));
        std::size_t largest = 0;
        std::size_t smallest = ds.labels.size();
        for (const auto& shard : shards) {
            if (shard.indices.empty()) continue;
            largest = std::max(largest, shard.indices.size());
            smallest = std::min(smallest, shard.indices.size());
        }
        if (largest >= 3 * smallest) {
            ++skewed_seeds;
        }
    }
    CHECK(skewed_seeds >= 8);
}

TEST_CASE("class heterogeneity at huge alpha is near-uniform per client") {
    auto ds = synth_dataset(4, 2, 300, 1.0, RngStream(5));
    PartitionSpec spec{PartitionScheme::ClassHeterogeneity, 1e6, 2, 500};
    auto shards = partition_class_heterogeneity(ds, spec, RngStream(9));
    for (const auto& shard : shards) {
        REQUIRE(static_cast<int>(shard.indices.size()) == 500);
        std::vector<int> counts(4, 0);
        for (int i : shard.indices) {
            counts[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])] += 1;
        }
        int mx = *std::max_element(counts.begin(), counts.end());
        int mn = *std::min_element(counts.begin(), counts.end());
        CHECK(mx <= 2 * mn);
    }
}

TEST_CASE("class heterogeneity with a single class assigns only that class") {
    auto ds = synth_dataset(1, 2, 40, 1.0, RngStream(6));
    PartitionSpec spec{PartitionScheme::ClassHeterogeneity, 0.3, 4, 10};
    auto shards = partition_class_heterogeneity(ds, spec, RngStream(10));
    for (const auto& shard : shards) {
        for (int i : shard.indices) {
            CHECK(ds.labels[static_cast<std::size_t>(i)] == 0);
        }
    }
}

TEST_CASE("class heterogeneity at alpha 0.1 concentrates on a top class") {
    auto ds = synth_dataset(10, 2, 400, 1.0, RngStream(7));
    PartitionSpec spec{PartitionScheme::ClassHeterogeneity, 0.1, 10, 150};
    std::vector<double> medians;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto shards = partition_class_heterogeneity(ds, spec, RngStream(seed * 31 + 1));
        std::vector<double> top_share;
        for (const auto& shard : shards) {
            std::vector<int> counts(10, 0);
            for (int i : shard.indices) {
                counts[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])] += 1;
            }
            int top = *std::max_element(counts.begin(), counts.end());
            top_share.push_back(static_cast<double>(top) /
                                static_cast<double>(shard.indices.size()));
        }
        std::sort(top_share.begin(), top_share.end());
        medians.push_back(top_share[top_share.size() / 2]);
    }
    std::sort(medians.begin(), medians.end());
    CHECK(medians[medians.size() / 2] >= 0.5);
}

TEST_CASE("class heterogeneity rejects oversubscription before drawing") {
    auto ds = synth_dataset(2, 2, 10, 1.0, RngStream(8));
    PartitionSpec spec{PartitionScheme::ClassHeterogeneity, 1.0, 3, 8};
    CHECK_THROWS(partition_class_heterogeneity(ds, spec, RngStream(1)));
}

TEST_CASE("both partitioners conserve the pool exactly") {
    RngStream meta(11);
    for (int rep = 0; rep < 25; ++rep) {
        int classes = 2 + static_cast<int>(meta.next_below(4));
        int per_class = 30 + static_cast<int>(meta.next_below(40));
        int clients = 2 + static_cast<int>(meta.next_below(8));
        double alpha = 0.1 + meta.next_double() * 5.0;
        auto ds = synth_dataset(classes, 2, per_class, 1.0, RngStream(meta.next_u64()));

        // Use a strict subset pool to mimic a validation holdout.
        std::vector<int> pool;
        for (int i = 0; i < ds.n(); ++i) {
            if (i % 7 != 0) pool.push_back(i);
        }

        PartitionSpec client_spec{PartitionScheme::ClientHeterogeneity, alpha, clients, 0};
        auto client_shards =
            partition_client_heterogeneity(ds, pool, client_spec, RngStream(meta.next_u64()));
        CHECK(sorted_union(client_shards) == pool);

        // Size the class scheme so it consumes the pool exactly.
        int epc = static_cast<int>(pool.size()) / clients;
        std::vector<int> exact_pool(pool.begin(), pool.begin() + clients * epc);
        PartitionSpec class_spec{PartitionScheme::ClassHeterogeneity, alpha, clients, epc};
        auto class_shards =
            partition_class_heterogeneity(ds, exact_pool, class_spec, RngStream(meta.next_u64()));
        CHECK(sorted_union(class_shards) == exact_pool);
    }
}

TEST_CASE("partitioners are deterministic per seed") {
    auto ds = synth_dataset(4, 2, 50, 1.0, RngStream(12));
    PartitionSpec spec{PartitionScheme::ClientHeterogeneity, 0.4, 6, 0};
    auto a = partition_client_heterogeneity(ds, spec, RngStream(77));
    auto b = partition_client_heterogeneity(ds, spec, RngStream(77));
    CHECK(a == b);

    PartitionSpec cspec{PartitionScheme::ClassHeterogeneity, 0.4, 6, 20};
    auto c = partition_class_heterogeneity(ds, cspec, RngStream(78));
    auto d = partition_class_heterogeneity(ds, cspec, RngStream(78));
    CHECK(c == d);
}

TEST_CASE("mean TV distance from the global mix decreases in alpha") {
    auto ds = synth_dataset(10, 2, 300, 1.0, RngStream(13));
    std::vector<int> pool(static_cast<std::size_t>(ds.n()));
    std::iota(pool.begin(), pool.end(), 0);
    const std::vector<double> alphas = {0.1, 1.0, 5.0};

    for (auto scheme : {PartitionScheme::ClientHeterogeneity, PartitionScheme::ClassHeterogeneity}) {
        std::vector<double> avg_tv;
        for (double alpha : alphas) {
            double total = 0.0;
            for (std::uint64_t seed = 0; seed < 10; ++seed) {
                PartitionSpec spec{scheme, alpha, 20, 140};
                auto shards = scheme == PartitionScheme::ClientHeterogeneity
                                  ? partition_client_heterogeneity(ds, pool, spec, RngStream(seed))
                                  : partition_class_heterogeneity(ds, pool, spec, RngStream(seed));
                total += mean_tv(ds, pool, shards);
            }
            avg_tv.push_back(total / 10.0);
        }
        CHECK(avg_tv[0] > avg_tv[1]);
        CHECK(avg_tv[1] > avg_tv[2]);
    }
}

TEST_CASE("validation split extracts balanced classes") {
    auto ds = synth_dataset(3, 2, 5, 1.0, RngStream(14));

    auto full = build_validation_set(ds, 5, RngStream(1));
    CHECK(full.train.empty());
    CHECK(static_cast<int>(full.val.size()) == ds.n());

    auto tiny = build_validation_set(ds, 1, RngStream(2));
    CHECK(tiny.val.size() == 3);
    std::set<int> labels;
    for (int i : tiny.val) {
        labels.insert(ds.labels[static_cast<std::size_t>(i)]);
    }
    CHECK(labels == std::set<int>{0, 1, 2});
}

TEST_CASE("validation split is a disjoint cover") {
    RngStream meta(15);
    for (int rep = 0; rep < 10; ++rep) {
        int classes = 2 + static_cast<int>(meta.next_below(4));
        int per_class = 10 + static_cast<int>(meta.next_below(30));
        int take = 1 + static_cast<int>(meta.next_below(static_cast<std::uint64_t>(per_class)));
        auto ds = synth_dataset(classes, 2, per_class, 1.0, RngStream(meta.next_u64()));
        auto split = build_validation_set(ds, take, RngStream(meta.next_u64()));

        std::set<int> val(split.val.begin(), split.val.end());
        std::set<int> train(split.train.begin(), split.train.end());
        CHECK(val.size() == split.val.size());
        CHECK(static_cast<int>(val.size()) == classes * take);
        CHECK(val.size() + train.size() == static_cast<std::size_t>(ds.n()));
        for (int i : split.train) {
            CHECK(val.count(i) == 0);
        }
    }
}

TEST_CASE("validation split names the class that is too small") {
    auto ds = synth_dataset(3, 2, 4, 1.0, RngStream(16));
    try {
        build_validation_set(ds, 5, RngStream(1));
        FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("class 0") != std::string::npos);
    }
}

TEST_CASE("partition manifest records clients, spec, and empties") {
    auto ds = synth_dataset(2, 2, 30, 1.0, RngStream(17));
    PartitionSpec spec{PartitionScheme::ClientHeterogeneity, 0.05, 12, 0};
    auto shards = partition_client_heterogeneity(ds, spec, RngStream(3));
    auto manifest = partition_manifest(shards, spec, 12345);

    CHECK(manifest["scheme"] == "client");
    CHECK(manifest["alpha"] == 0.05);
    CHECK(manifest["num_clients"] == 12);
    CHECK(manifest["seed"] == 12345);
    CHECK(manifest["clients"].size() == 12);

    std::size_t listed = 0;
    for (const auto& shard : shards) {
        auto ids = manifest["clients"][std::to_string(shard.client_id)].get<std::vector<int>>();
        CHECK(ids == shard.indices);
        if (shard.indices.empty()) ++listed;
    }
    CHECK(manifest["empty_clients"].size() == listed);

    // Round-trips through text.
    auto reparsed = nlohmann::json::parse(manifest.dump());
    CHECK(reparsed == manifest);
}
