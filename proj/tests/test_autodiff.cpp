#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cfdm/autodiff.hpp"
#include "cfdm/net.hpp"
#include "helpers.hpp"

using namespace cfdm;
using cfdm::testing::gradcheck_max_rel_err;

namespace {
constexpr double kTol = 1e-3;

TensorD weights_like(const Shape& shape, Rng& rng) { return TensorD::randn(shape, rng); }
}  // namespace

TEST_CASE("gradcheck: conv2d 3x3") {
    Rng rng(101);
    std::vector<TensorD> inputs = {
        TensorD::randn({2, 3, 4, 4}, rng),
        TensorD::randn({4, 3, 3, 3}, rng),
        TensorD::randn({4}, rng),
    };
    TensorD r = weights_like({2, 4, 4, 4}, rng);
    auto build = [&](const std::vector<Var<double>>& v) {
        return weighted_sum(conv2d(v[0], v[1], v[2]), r);
    };
    CHECK(gradcheck_max_rel_err(inputs, build) < kTol);
}

TEST_CASE("gradcheck: conv2d 5x5 and 1x1 kernels") {
    Rng rng(102);
    {
        std::vector<TensorD> inputs = {
            TensorD::randn({1, 2, 6, 6}, rng),
            TensorD::randn({2, 2, 5, 5}, rng),
            TensorD::randn({2}, rng),
        };
        TensorD r = weights_like({1, 2, 6, 6}, rng);
        auto build = [&](const std::vector<Var<double>>& v) {
            return weighted_sum(conv2d(v[0], v[1], v[2]), r);
        };
        CHECK(gradcheck_max_rel_err(inputs, build) < kTol);
    }
    {
        std::vector<TensorD> inputs = {
            TensorD::randn({2, 2, 3, 3}, rng),
            TensorD::randn({3, 2, 1, 1}, rng),
            TensorD::randn({3}, rng),
        };
        TensorD r = weights_like({2, 3, 3, 3}, rng);
        auto build = [&](const std::vector<Var<double>>& v) {
            return weighted_sum(conv2d(v[0], v[1], v[2]), r);
        };
        CHECK(gradcheck_max_rel_err(inputs, build) < kTol);
    }
}

TEST_CASE("gradcheck: linear") {
    Rng rng(103);
    std::vector<TensorD> inputs = {
        TensorD::randn({3, 4}, rng),
        TensorD::randn({5, 4}, rng),
        TensorD::randn({5}, rng),
    };
    TensorD r = weights_like({3, 5}, rng);
    auto build = [&](const std::vector<Var<double>>& v) {
        return weighted_sum(linear(v[0], v[1], v[2]), r);
    };
    CHECK(gradcheck_max_rel_err(inputs, build) < kTol);
}

TEST_CASE("gradcheck: channel_norm") {
    Rng rng(104);
    std::vector<TensorD> inputs = {
        TensorD::randn({2, 3, 4, 4}, rng),
        TensorD::randn({3}, rng),
    };
    TensorD r = weights_like({2, 3, 4, 4}, rng);
    auto build = [&](const std::vector<Var<double>>& v) {
        return weighted_sum(channel_norm(v[0], v[1]), r);
    };
    CHECK(gradcheck_max_rel_err(inputs, build) < kTol);
}

TEST_CASE("gradcheck: silu") {
    Rng rng(105);
    std::vector<TensorD> inputs = {TensorD::randn({2, 3, 2, 2}, rng)};
    TensorD r = weights_like({2, 3, 2, 2}, rng);
    auto build = [&](const std::vector<Var<double>>& v) { return weighted_sum(silu(v[0]), r); };
    CHECK(gradcheck_max_rel_err(inputs, build) < kTol);
}

TEST_CASE("gradcheck: add and add_channels") {
    Rng rng(106);
    {
        std::vector<TensorD> inputs = {TensorD::randn({2, 2, 3, 3}, rng),
                                       TensorD::randn({2, 2, 3, 3}, rng)};
        TensorD r = weights_like({2, 2, 3, 3}, rng);
        auto build = [&](const std::vector<Var<double>>& v) {
            return weighted_sum(add(v[0], v[1]), r);
        };
        CHECK(gradcheck_max_rel_err(inputs, build) < kTol);
    }
    {
        std::vector<TensorD> inputs = {TensorD::randn({2, 3, 2, 2}, rng),
                                       TensorD::randn({2, 3}, rng)};
        TensorD r = weights_like({2, 3, 2, 2}, rng);
        auto build = [&](const std::vector<Var<double>>& v) {
            return weighted_sum(add_channels(v[0], v[1]), r);
        };
        CHECK(gradcheck_max_rel_err(inputs, build) < kTol);
    }
}

TEST_CASE("gradcheck: downsample2 and upsample2") {
    Rng rng(107);
    {
        std::vector<TensorD> inputs = {TensorD::randn({2, 2, 4, 4}, rng)};
        TensorD r = weights_like({2, 2, 2, 2}, rng);
        auto build = [&](const std::vector<Var<double>>& v) {
            return weighted_sum(downsample2(v[0]), r);
        };
        CHECK(gradcheck_max_rel_err(inputs, build) < kTol);
    }
    {
        std::vector<TensorD> inputs = {TensorD::randn({2, 2, 3, 3}, rng)};
        TensorD r = weights_like({2, 2, 6, 6}, rng);
        auto build = [&](const std::vector<Var<double>>& v) {
            return weighted_sum(upsample2(v[0]), r);
        };
        CHECK(gradcheck_max_rel_err(inputs, build) < kTol);
    }
}

TEST_CASE("gradcheck: concat_channels") {
    Rng rng(108);
    std::vector<TensorD> inputs = {TensorD::randn({2, 2, 4, 4}, rng),
                                   TensorD::randn({2, 3, 4, 4}, rng)};
    TensorD r = weights_like({2, 5, 4, 4}, rng);
    auto build = [&](const std::vector<Var<double>>& v) {
        return weighted_sum(concat_channels(v[0], v[1]), r);
    };
    CHECK(gradcheck_max_rel_err(inputs, build) < kTol);
}

TEST_CASE("gradcheck: mse_loss") {
    Rng rng(109);
    std::vector<TensorD> inputs = {TensorD::randn({2, 1, 3, 3}, rng),
                                   TensorD::randn({2, 1, 3, 3}, rng)};
    auto build = [&](const std::vector<Var<double>>& v) { return mse_loss(v[0], v[1]); };
    CHECK(gradcheck_max_rel_err(inputs, build) < kTol);
}

// Single 3x3 conv on a 2x2 one-channel image against an MSE target: the
// ten-parameter stand-in network, checked at the coarser step 1e-3.
TEST_CASE("gradcheck: toy conv-as-noise-predictor via mse") {
    Rng rng(110);
    std::vector<TensorD> inputs = {
        TensorD::randn({1, 1, 3, 3}, rng),  // kernel
        TensorD::randn({1}, rng),           // bias
    };
    TensorD x = TensorD::randn({1, 1, 2, 2}, rng);
    TensorD eps = TensorD::randn({1, 1, 2, 2}, rng);
    auto build = [&](const std::vector<Var<double>>& v) {
        auto xv = Var<double>::leaf(x, "x", false);
        auto target = Var<double>::leaf(eps, "eps", false);
        return mse_loss(conv2d(xv, v[0], v[1]), target);
    };
    CHECK(gradcheck_max_rel_err(inputs, build, 1e-3) < kTol);
}

// Composition check across the whole noise-prediction network.
TEST_CASE("gradcheck: full unet-lite composition") {
    NetConfig cfg;
    cfg.base_channels = 2;
    cfg.depth = 1;
    cfg.timestep_embed_dim = 4;
    cfg.image_channels = 1;
    cfg.image_size = 4;
    ModelParams<double> params = build_unet<double>(cfg, 17);
    // Zero-initialized output layer would hide gradient errors behind exact
    // zeros; give it small random values for the check.
    Rng rng(18);
    for (auto& [name, t] : params.entries)
        if (name == "out.w")
            for (Index i = 0; i < t.size(); ++i) t[i] = rng.normal() * 0.3;

    TensorD x = TensorD::randn({2, 1, 4, 4}, rng);
    TensorD eps = TensorD::randn({2, 1, 4, 4}, rng);
    const std::vector<int> t = {1, 3};

    std::vector<TensorD> inputs;
    for (const auto& [name, tensor] : params.entries) inputs.push_back(tensor);

    auto build = [&](const std::vector<Var<double>>& v) {
        netdetail::ParamVars<double> pv;
        for (std::size_t i = 0; i < v.size(); ++i)
            pv.by_name.emplace(params.entries[i].first, v[i]);
        auto xv = Var<double>::leaf(x, "x", false);
        auto target = Var<double>::leaf(eps, "eps", false);
        return mse_loss(netdetail::unet_apply(pv, cfg, xv, t), target);
    };
    CHECK(gradcheck_max_rel_err(inputs, build) < kTol);
}

TEST_CASE("backward accumulates through shared subgraphs") {
    // f(x) = sum(x * x) via two uses of the same node.
    TensorD xv = TensorD::from_values({2}, {3.0, -2.0});
    auto x = Var<double>::leaf(xv, "x", true);
    auto y = add(x, x);  // 2x
    TensorD r = TensorD::full({2}, 1.0);
    auto loss = weighted_sum(y, r);
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(2.0));
}

TEST_CASE("backward requires scalar root and skips constant subtrees") {
    auto a = Var<float>::leaf(TensorF::full({2}, 1.0f), "a", false);
    auto b = Var<float>::leaf(TensorF::full({2}, 2.0f), "b", true);
    auto s = add(a, b);
    CHECK_THROWS(backward(s));  // not scalar
    auto loss = weighted_sum(s, TensorF::full({2}, 1.0f));
    backward(loss);
    CHECK(a.grad().size() == 0);  // constant leaf untouched
    CHECK(b.grad()[0] == 1.0f);
}
