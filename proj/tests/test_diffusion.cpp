#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cfdm/diffusion.hpp"

using namespace cfdm;

TEST_CASE("forward diffusion degenerate cases") {
    auto sched = make_schedule(ScheduleKind::Cosine, 10);
    Rng rng(1);
    TensorF x0 = TensorF::randn({1, 1, 4, 4}, rng);
    TensorF zero({1, 1, 4, 4});

    for (int t : {1, 5, 10}) {
        TensorF no_noise = forward_diffuse(x0, t, zero, sched);
        const float a = static_cast<float>(sched.sqrt_alpha_bar(t));
        CHECK((no_noise.array() == a * x0.array()).all());

        TensorF eps = TensorF::randn({1, 1, 4, 4}, rng);
        TensorF no_signal = forward_diffuse(zero, t, eps, sched);
        const float b = static_cast<float>(sched.sqrt_one_minus_alpha_bar(t));
        CHECK((no_signal.array() == b * eps.array()).all());
    }
    CHECK_THROWS(forward_diffuse(x0, 0, zero, sched));
    CHECK_THROWS(forward_diffuse(x0, 11, zero, sched));
}

TEST_CASE("forward marginal Monte-Carlo oracle") {
    auto sched = make_schedule(ScheduleKind::Cosine, 10);
    Rng rng(99);
    TensorF x0 = TensorF::randn({1, 1, 4, 4}, rng);
    const int t = 10, n = 10000;

    TensorD sum({1, 1, 4, 4}), sum2({1, 1, 4, 4});
    for (int i = 0; i < n; ++i) {
        TensorF eps = TensorF::randn({1, 1, 4, 4}, rng);
        TensorF xt = forward_diffuse(x0, t, eps, sched);
        sum.array() += xt.array().cast<double>();
        sum2.array() += xt.array().cast<double>().square();
    }
    const double a = sched.sqrt_alpha_bar(t);
    const double want_var = 1.0 - sched.alpha_bar[t];
    const double sigma_mean = 3.0 * std::sqrt(want_var / n);  // 3-sigma band
    for (Index i = 0; i < 16; ++i) {
        const double mean = sum[i] / n;
        const double var = sum2[i] / n - mean * mean;
        CHECK(std::abs(mean - a * x0[i]) < sigma_mean);
        CHECK(std::abs(var - want_var) < 0.05 * want_var);
    }
}

TEST_CASE("single-step inversion recovers x0 at T=1") {
    auto sched = VarianceSchedule::from_betas(ScheduleKind::Linear, {0.3});
    Rng rng(5);
    TensorF x0 = TensorF::randn({2, 1, 4, 4}, rng);
    TensorF eps = TensorF::randn({2, 1, 4, 4}, rng);
    TensorF zero({2, 1, 4, 4});

    TensorF x1 = forward_diffuse(x0, 1, eps, sched);
    TensorF rec = reverse_step(x1, 1, eps, sched, zero);
    CHECK((rec.array() - x0.array()).abs().maxCoeff() < 1e-5f);
}

TEST_CASE("reverse step rejects noise at the final step") {
    auto sched = make_schedule(ScheduleKind::Cosine, 4);
    TensorF x({1, 1, 2, 2});
    TensorF z = TensorF::full({1, 1, 2, 2}, 1.0f);
    CHECK_THROWS(reverse_step(x, 1, x, sched, z));
    CHECK_NOTHROW(reverse_step(x, 2, x, sched, z));
}

TEST_CASE("reverse step is deterministic") {
    auto sched = make_schedule(ScheduleKind::Cosine, 8);
    Rng rng(3);
    TensorF x = TensorF::randn({1, 1, 4, 4}, rng);
    TensorF e = TensorF::randn({1, 1, 4, 4}, rng);
    TensorF z = TensorF::randn({1, 1, 4, 4}, rng);
    TensorF a = reverse_step(x, 5, e, sched, z);
    TensorF b = reverse_step(x, 5, e, sched, z);
    CHECK((a.array() == b.array()).all());
}

TEST_CASE("training pair sampler: uniform t and Gaussian eps") {
    auto sched = make_schedule(ScheduleKind::Cosine, 100);
    TensorF x0({1, 1, 2, 2});

    Rng rng(2025);
    const int n = 10000;
    std::vector<int> counts(101, 0);
    for (int i = 0; i < n; ++i) {
        auto s = sample_training_pair(x0, sched, rng);
        REQUIRE(s.t >= 1);
        REQUIRE(s.t <= 100);
        ++counts[static_cast<std::size_t>(s.t)];
    }
    // Each bin frequency within 3 sigma of 1/100.
    const double p = 0.01;
    const double band = 3.0 * std::sqrt(p * (1 - p) / n);
    for (int t = 1; t <= 100; ++t)
        CHECK(std::abs(counts[static_cast<std::size_t>(t)] / static_cast<double>(n) - p) < band);

    // Seeded determinism.
    Rng r1(77), r2(77);
    auto a = sample_training_pair(x0, sched, r1);
    auto b = sample_training_pair(x0, sched, r2);
    CHECK(a.t == b.t);
    CHECK((a.epsilon.array() == b.epsilon.array()).all());
    CHECK((a.x_t.array() == b.x_t.array()).all());
}
