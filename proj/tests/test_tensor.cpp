#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cfdm/rng.hpp"
#include "cfdm/tensor.hpp"

using namespace cfdm;

TEST_CASE("shape bookkeeping") {
    TensorF t({2, 1, 4, 4});
    CHECK(t.size() == 32);
    CHECK(t.rank() == 4);
    CHECK(t.array().abs().sum() == 0.0f);  // zero-initialized

    t.at4(1, 0, 3, 2) = 5.0f;
    CHECK(t[(1 * 1 * 4 + 3) * 4 + 2] == 5.0f);  // row-major layout

    CHECK_THROWS(TensorF::from_values({2, 2}, {1.0f, 2.0f, 3.0f}));
}

TEST_CASE("finite check") {
    TensorF t = TensorF::full({3}, 1.0f);
    CHECK(t.all_finite());
    t[1] = std::numeric_limits<float>::infinity();
    CHECK_FALSE(t.all_finite());
    t[1] = std::numeric_limits<float>::quiet_NaN();
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("stack and slice round-trip") {
    Rng rng(11);
    std::vector<TensorF> parts;
    for (int i = 0; i < 3; ++i) parts.push_back(TensorF::randn({2, 2}, rng));
    TensorF stacked = stack0(parts);
    CHECK(stacked.shape() == Shape{3, 2, 2});
    for (int i = 0; i < 3; ++i) {
        TensorF s = stacked.slice0(i, 1);
        CHECK((s.array() == parts[static_cast<std::size_t>(i)].array()).all());
    }
}

TEST_CASE("rng stream determinism and derivation") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.normal() == b.normal());
    }
    CHECK(c.next_u64() != Rng(42).next_u64());

    CHECK(derive_seed(1, "shard", 0) != derive_seed(1, "shard", 1));
    CHECK(derive_seed(1, "shard", 0) != derive_seed(1, "holdout", 0));
    CHECK(derive_seed(1, "shard", 2) == derive_seed(1, "shard", 2));
}

TEST_CASE("uniform_int covers range without bias artifacts") {
    Rng rng(7);
    int counts[5] = {0, 0, 0, 0, 0};
    for (int i = 0; i < 50000; ++i) {
        auto v = rng.uniform_int(1, 5);
        REQUIRE(v >= 1);
        REQUIRE(v <= 5);
        ++counts[v - 1];
    }
    for (int k = 0; k < 5; ++k) {
        CHECK(counts[k] > 9500);
        CHECK(counts[k] < 10500);
    }
}

TEST_CASE("normal moments") {
    Rng rng(123);
    const int n = 1000000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sum2 += z * z;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));  // 3 sigma
    CHECK(std::abs(var - 1.0) < 0.01);
}
