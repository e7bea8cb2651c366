#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cfdm/schedule.hpp"

using namespace cfdm;

// Frozen from an independent evaluation of the closed form
// alpha_bar(t) = f(t)/f(0), f(t) = cos^2(((t/T + 0.008)/1.008) * pi/2),
// with betas clipped at 0.999 and alpha_bar rebuilt by telescoping.
static const double kCosineT4AlphaBar[4] = {
    0.84701216132690471,
    0.4938435904406378,
    0.14427210238573585,
    0.00014427210238573596,
};

TEST_CASE("cosine schedule matches frozen closed-form values at T=4") {
    auto s = make_schedule(ScheduleKind::Cosine, 4, 0.008);
    REQUIRE(s.T == 4);
    for (int t = 1; t <= 4; ++t)
        CHECK(s.alpha_bar[t] == doctest::Approx(kCosineT4AlphaBar[t - 1]).epsilon(1e-12));
    CHECK(s.beta[4] == doctest::Approx(0.999).epsilon(1e-15));  // clipped final step
}

TEST_CASE("cosine schedule invariants at the reference T=100") {
    auto s = make_schedule(ScheduleKind::Cosine, 100, 0.008);
    CHECK(s.alpha_bar[0] == 1.0);  // normalization f(0)/f(0)
    CHECK(s.alpha_bar[1] < 1.0);
    CHECK(s.alpha_bar[100] > 0.0);
    for (int t = 1; t <= 100; ++t) {
        CHECK(s.beta[t] > 0.0);
        CHECK(s.beta[t] < 1.0);
        CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);  // strictly decreasing
        // telescoping identity, exact in 64-bit by construction
        CHECK(s.alpha_bar[t] == s.alpha_bar[t - 1] * s.alpha[t]);
    }
}

TEST_CASE("signal-to-noise ratio strictly decreasing") {
    for (auto kind : {ScheduleKind::Cosine, ScheduleKind::Linear}) {
        auto s = make_schedule(kind, 50);
        double prev = std::numeric_limits<double>::infinity();
        for (int t = 1; t <= 50; ++t) {
            const double snr = s.alpha_bar[t] / (1.0 - s.alpha_bar[t]);
            CHECK(snr < prev);
            prev = snr;
        }
    }
}

TEST_CASE("linear fixture ramps beta from 1e-4 to 0.02") {
    auto s = make_schedule(ScheduleKind::Linear, 10);
    CHECK(s.beta[1] == doctest::Approx(1e-4));
    CHECK(s.beta[10] == doctest::Approx(0.02));
    for (int t = 2; t <= 10; ++t) CHECK(s.beta[t] > s.beta[t - 1]);
}

TEST_CASE("T below 2 rejected") {
    CHECK_THROWS_AS(make_schedule(ScheduleKind::Cosine, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(ScheduleKind::Cosine, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(ScheduleKind::Cosine, 10, -0.1), std::invalid_argument);
}

TEST_CASE("schedules parse by name") {
    CHECK(schedule_kind_from_string("cosine") == ScheduleKind::Cosine);
    CHECK(schedule_kind_from_string("linear") == ScheduleKind::Linear);
    CHECK_THROWS(schedule_kind_from_string("quadratic"));
}
