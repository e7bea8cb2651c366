#pragma once

#include <functional>
#include <vector>

#include "cfdm/autodiff.hpp"
#include "cfdm/tensor.hpp"

namespace cfdm::testing {

// Central finite-difference gradient check in double precision. The builder
// maps leaf variables to a scalar loss; the same builder serves the analytic
// pass (with gradients) and the perturbed forward evaluations.
template <typename Builder>
double gradcheck_max_rel_err(const std::vector<TensorD>& inputs, Builder build,
                             double h = 1e-5) {
    std::vector<Var<double>> leaves;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        leaves.push_back(Var<double>::leaf(inputs[i], "in" + std::to_string(i), true));
    Var<double> loss = build(leaves);
    backward(loss);

    auto eval = [&](const std::vector<TensorD>& vals) {
        std::vector<Var<double>> ls;
        for (std::size_t i = 0; i < vals.size(); ++i)
            ls.push_back(Var<double>::leaf(vals[i], "in" + std::to_string(i), false));
        return build(ls).value()[0];
    };

    double max_rel = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto& g = leaves[i].grad();
        for (Index j = 0; j < inputs[i].size(); ++j) {
            std::vector<TensorD> plus = inputs, minus = inputs;
            plus[i][j] += h;
            minus[i][j] -= h;
            const double fd = (eval(plus) - eval(minus)) / (2.0 * h);
            const double an = g.size() ? g[j] : 0.0;
            const double rel =
                std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-3});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

inline TensorD randn_d(Shape shape, Rng& rng) { return TensorD::randn(std::move(shape), rng); }

}  // namespace cfdm::testing
