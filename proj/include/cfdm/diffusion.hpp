#pragma once

#include "cfdm/rng.hpp"
#include "cfdm/schedule.hpp"
#include "cfdm/tensor.hpp"

namespace cfdm {

// Closed-form marginal of the forward process:
//   x_t = sqrt(alpha_bar[t]) * x0 + sqrt(1 - alpha_bar[t]) * epsilon.
// Training images live in [-1, 1]; the output is unclamped.
template <typename Scalar>
Tensor<Scalar> forward_diffuse(const Tensor<Scalar>& x0, int t, const Tensor<Scalar>& epsilon,
                               const VarianceSchedule& sched) {
    sched.check_timestep(t);
    require_same_shape(x0, epsilon, "forward_diffuse");
    const Scalar a = static_cast<Scalar>(sched.sqrt_alpha_bar(t));
    const Scalar b = static_cast<Scalar>(sched.sqrt_one_minus_alpha_bar(t));
    Tensor<Scalar> out(x0.shape());
    out.array() = a * x0.array() + b * epsilon.array();
    return out;
}

// One reverse (denoising) step:
//   x_{t-1} = (x_t - (beta_t / sqrt(1 - alpha_bar_t)) * eps_hat) / sqrt(alpha_t)
//             + sqrt(beta_t) * z,
// with z = 0 required at t = 1 (the final sample gets no fresh noise).
template <typename Scalar>
Tensor<Scalar> reverse_step(const Tensor<Scalar>& x_t, int t, const Tensor<Scalar>& eps_hat,
                            const VarianceSchedule& sched, const Tensor<Scalar>& z) {
    sched.check_timestep(t);
    require_same_shape(x_t, eps_hat, "reverse_step");
    require_same_shape(x_t, z, "reverse_step noise");
    if (t == 1 && (z.array() != Scalar(0)).any())
        throw std::invalid_argument("reverse_step: z must be zero at t = 1");
    const auto ti = static_cast<std::size_t>(t);
    const Scalar inv_sqrt_alpha = static_cast<Scalar>(1.0 / std::sqrt(sched.alpha[ti]));
    const Scalar eps_coef = static_cast<Scalar>(sched.beta[ti] / sched.sqrt_one_minus_alpha_bar(t));
    const Scalar sigma = static_cast<Scalar>(std::sqrt(sched.beta[ti]));
    Tensor<Scalar> out(x_t.shape());
    out.array() = inv_sqrt_alpha * (x_t.array() - eps_coef * eps_hat.array()) + sigma * z.array();
    return out;
}

template <typename Scalar>
struct NoiseSample {
    Tensor<Scalar> epsilon;
    int t = 0;
    Tensor<Scalar> x_t;
};

// Samples one training pair for a clean image: t uniform in [1, T], epsilon
// i.i.d. standard normal.
template <typename Scalar>
NoiseSample<Scalar> sample_training_pair(const Tensor<Scalar>& x0, const VarianceSchedule& sched,
                                         Rng& rng) {
    NoiseSample<Scalar> s;
    s.t = static_cast<int>(rng.uniform_int(1, sched.T));
    s.epsilon = Tensor<Scalar>::randn(x0.shape(), rng);
    s.x_t = forward_diffuse(x0, s.t, s.epsilon, sched);
    return s;
}

}  // namespace cfdm
