#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fedsim/rng.hpp"

using fedsim::RngStream;

TEST_CASE("same seed replays the same sequence") {
    RngStream a(42);
    RngStream b(42);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
}

TEST_CASE("different seeds and labels give different sequences") {
    RngStream a(1);
    RngStream b(2);
    int equal = 0;
    for (int i = 0; i < 64; ++i) {
        equal += a.next_u64() == b.next_u64();
    }
    CHECK(equal == 0);

    RngStream parent(7);
    RngStream c1 = parent.derive(1);
    RngStream c2 = parent.derive(2);
    CHECK(c1.next_u64() != c2.next_u64());

    // Derivation depends on the key, not on the parent's position.
    RngStream p2(7);
    p2.next_u64();
    p2.next_u64();
    RngStream c1_again = p2.derive(1);
    RngStream c1_ref = RngStream(7).derive(1);
    CHECK(c1_again.next_u64() == c1_ref.next_u64());

    // Chained derivation is order-sensitive.
    CHECK(RngStream(7).derive(1).derive(2).next_u64() !=
          RngStream(7).derive(2).derive(1).next_u64());
}

TEST_CASE("next_double lies strictly inside (0,1) and is roughly uniform") {
    RngStream rng(3);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double u = rng.next_double();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 0.005);
}

TEST_CASE("next_below respects the bound and covers small ranges") {
    RngStream rng(11);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 50000; ++i) {
        auto v = rng.next_below(5);
        REQUIRE(v < 5);
        counts[static_cast<std::size_t>(v)] += 1;
    }
    for (int c : counts) {
        CHECK(c > 9200); // expected 10000, 3-sigma band is ~±268
        CHECK(c < 10800);
    }
    CHECK_THROWS(rng.next_below(0));
}

TEST_CASE("shuffle permutes deterministically") {
    std::vector<int> v(20);
    std::iota(v.begin(), v.end(), 0);
    auto w = v;

    RngStream a(5);
    RngStream b(5);
    a.shuffle(v);
    b.shuffle(w);
    CHECK(v == w);

    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expect(20);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(sorted == expect);
}

TEST_CASE("normal variates have the right first two moments") {
    RngStream rng(9);
    const int n = 200000;
    double sum = 0.0;
    double sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        double z = rng.next_normal();
        sum += z;
        sumsq += z * z;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("gamma variates match their mean for small and large shapes") {
    for (double shape : {0.1, 0.7, 1.0, 2.5, 9.0}) {
        RngStream rng(static_cast<std::uint64_t>(shape * 1000) + 17);
        const int n = 200000;
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            double g = rng.next_gamma(shape);
            REQUIRE(g >= 0.0);
            sum += g;
        }
        // Var(Gamma(k,1)) = k, so the sample-mean 3-sigma band is 3*sqrt(k/n).
        CHECK(std::abs(sum / n - shape) < 3.5 * std::sqrt(shape / n));
    }
    RngStream rng(1);
    CHECK_THROWS(rng.next_gamma(0.0));
    CHECK_THROWS(rng.next_gamma(-1.0));
}
