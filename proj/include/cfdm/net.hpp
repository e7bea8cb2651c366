#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfdm/autodiff.hpp"
#include "cfdm/rng.hpp"
#include "cfdm/tensor.hpp"

namespace cfdm {

struct NetConfig {
    int base_channels = 16;
    int depth = 2;  // number of down/up stages
    int timestep_embed_dim = 32;
    int image_channels = 1;
    int image_size = 32;

    void validate() const {
        if (base_channels < 1) throw std::invalid_argument("NetConfig: base_channels must be >= 1");
        if (depth < 1) throw std::invalid_argument("NetConfig: depth must be >= 1");
        if (timestep_embed_dim < 2 || timestep_embed_dim % 2)
            throw std::invalid_argument("NetConfig: timestep_embed_dim must be even and >= 2");
        if (image_channels < 1) throw std::invalid_argument("NetConfig: image_channels must be >= 1");
        const int div = 1 << depth;
        if (image_size < div || image_size % div)
            throw std::invalid_argument("NetConfig: image_size " + std::to_string(image_size) +
                                        " not divisible by 2^depth = " + std::to_string(div));
    }

    bool operator==(const NetConfig&) const = default;
};

// Sinusoidal timestep embedding: first half sines, second half cosines, with
// geometric frequencies from 1 down to 1/10000.
template <typename Scalar = float>
Tensor<Scalar> timestep_embedding(int t, int dim) {
    if (dim < 2 || dim % 2) throw std::invalid_argument("timestep_embedding: dim must be even");
    if (t < 0) throw std::invalid_argument("timestep_embedding: t must be >= 0");
    const int half = dim / 2;
    Tensor<Scalar> out({dim});
    for (int i = 0; i < half; ++i) {
        const double freq =
            half == 1 ? 1.0 : std::exp(-std::log(10000.0) * i / static_cast<double>(half - 1));
        out[i] = static_cast<Scalar>(std::sin(t * freq));
        out[half + i] = static_cast<Scalar>(std::cos(t * freq));
    }
    return out;
}

template <typename Scalar = float>
Tensor<Scalar> timestep_embedding_batch(const std::vector<int>& t, int dim) {
    Tensor<Scalar> out({static_cast<Index>(t.size()), dim});
    for (std::size_t i = 0; i < t.size(); ++i) {
        Tensor<Scalar> row = timestep_embedding<Scalar>(t[i], dim);
        out.array().segment(static_cast<Index>(i) * dim, dim) = row.array();
    }
    return out;
}

namespace netdetail {

struct ConvSpec {
    std::string name;
    Index cout, cin, kh, kw;
    Index out_h, out_w;  // spatial extent the conv runs at
};
struct LinearSpec {
    std::string name;
    Index out_dim, in_dim;
};
struct NormSpec {
    std::string name;
    Index channels;
};

// Structural plan of the UNet-lite; build, forward and FLOP accounting all
// derive from this single enumeration.
struct NetPlan {
    std::vector<ConvSpec> convs;
    std::vector<LinearSpec> linears;
    std::vector<NormSpec> norms;
};

inline NetPlan make_plan(const NetConfig& cfg) {
    cfg.validate();
    NetPlan plan;
    const Index e = cfg.timestep_embed_dim;
    plan.linears.push_back({"temb", e, e});
    auto block = [&](const std::string& prefix, Index cin, Index cout, Index size) {
        plan.convs.push_back({prefix + ".conv", cout, cin, 3, 3, size, size});
        plan.linears.push_back({prefix + ".time", cout, e});
        plan.norms.push_back({prefix + ".norm", cout});
    };
    Index ch = cfg.image_channels;
    Index size = cfg.image_size;
    for (int i = 0; i < cfg.depth; ++i) {
        const Index cout = static_cast<Index>(cfg.base_channels) << i;
        block("enc" + std::to_string(i), ch, cout, size);
        ch = cout;
        size /= 2;
    }
    block("mid", ch, static_cast<Index>(cfg.base_channels) << cfg.depth, size);
    ch = static_cast<Index>(cfg.base_channels) << cfg.depth;
    for (int i = cfg.depth - 1; i >= 0; --i) {
        const Index skip = static_cast<Index>(cfg.base_channels) << i;
        size *= 2;
        block("dec" + std::to_string(i), ch + skip, skip, size);
        ch = skip;
    }
    plan.convs.push_back({"out", cfg.image_channels, ch, 3, 3, cfg.image_size, cfg.image_size});
    return plan;
}

}  // namespace netdetail

// Named parameter set of the noise-prediction UNet. Entry order is fixed by
// construction; two instances built from the same config are element-wise
// combinable.
template <typename Scalar>
struct ModelParams {
    NetConfig config;
    std::vector<std::pair<std::string, Tensor<Scalar>>> entries;

    Tensor<Scalar>& at(const std::string& name) {
        for (auto& [n, t] : entries)
            if (n == name) return t;
        throw std::invalid_argument("ModelParams: no parameter named " + name);
    }
    const Tensor<Scalar>& at(const std::string& name) const {
        return const_cast<ModelParams*>(this)->at(name);
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& [name, t] : entries) n += static_cast<std::size_t>(t.size());
        return n;
    }

    template <typename Other>
    ModelParams<Other> cast() const {
        ModelParams<Other> out;
        out.config = config;
        for (const auto& [name, t] : entries)
            out.entries.emplace_back(name, t.template cast<Other>());
        return out;
    }
};

using ModelParamsF = ModelParams<float>;

// He fan-in initialization; the final output convolution is zero-initialized
// so a fresh model predicts exactly zero noise.
template <typename Scalar = float>
ModelParams<Scalar> build_unet(const NetConfig& cfg, std::uint64_t seed) {
    const auto plan = netdetail::make_plan(cfg);
    Rng rng(seed);
    ModelParams<Scalar> p;
    p.config = cfg;
    auto he = [&](const Shape& shape, Index fan_in) {
        Tensor<Scalar> t(shape);
        const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (Index i = 0; i < t.size(); ++i)
            t[i] = static_cast<Scalar>(rng.normal() * scale);
        return t;
    };
    for (const auto& lin : plan.linears) {
        p.entries.emplace_back(lin.name + ".w", he({lin.out_dim, lin.in_dim}, lin.in_dim));
        p.entries.emplace_back(lin.name + ".b", Tensor<Scalar>({lin.out_dim}));
    }
    for (const auto& conv : plan.convs) {
        if (conv.name == "out")
            p.entries.emplace_back(conv.name + ".w",
                                   Tensor<Scalar>({conv.cout, conv.cin, conv.kh, conv.kw}));
        else
            p.entries.emplace_back(conv.name + ".w",
                                   he({conv.cout, conv.cin, conv.kh, conv.kw},
                                      conv.cin * conv.kh * conv.kw));
        p.entries.emplace_back(conv.name + ".b", Tensor<Scalar>({conv.cout}));
    }
    for (const auto& norm : plan.norms)
        p.entries.emplace_back(norm.name + ".g", Tensor<Scalar>::full({norm.channels}, Scalar(1)));
    return p;
}

namespace netdetail {

template <typename Scalar>
struct ParamVars {
    std::map<std::string, Var<Scalar>> by_name;
    const Var<Scalar>& at(const std::string& name) const {
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw std::invalid_argument("ParamVars: no parameter named " + name);
        return it->second;
    }
};

template <typename Scalar>
ParamVars<Scalar> make_param_vars(const ModelParams<Scalar>& p, bool requires_grad) {
    ParamVars<Scalar> vars;
    for (const auto& [name, t] : p.entries)
        vars.by_name.emplace(name, Var<Scalar>::leaf(t, name, requires_grad));
    return vars;
}

template <typename Scalar>
Var<Scalar> block(const ParamVars<Scalar>& p, const std::string& prefix, Var<Scalar> h,
                  const Var<Scalar>& temb) {
    h = conv2d(h, p.at(prefix + ".conv.w"), p.at(prefix + ".conv.b"));
    h = add_channels(h, linear(temb, p.at(prefix + ".time.w"), p.at(prefix + ".time.b")));
    h = channel_norm(h, p.at(prefix + ".norm.g"));
    return silu(h);
}

// Two-or-more stage UNet: conv blocks with mean-pool descents, a bottleneck,
// nearest-neighbour ascents with skip concatenation, zero-initialized output.
template <typename Scalar>
Var<Scalar> unet_apply(const ParamVars<Scalar>& p, const NetConfig& cfg, const Var<Scalar>& x,
                       const std::vector<int>& t) {
    const auto& xs = x.value().shape();
    if (xs.size() != 4 || xs[1] != cfg.image_channels || xs[2] != cfg.image_size ||
        xs[3] != cfg.image_size)
        throw std::invalid_argument("unet_apply: input shape " + shape_to_string(xs) +
                                    " does not match the network configuration");
    if (static_cast<Index>(t.size()) != xs[0])
        throw std::invalid_argument("unet_apply: one timestep required per sample");

    Var<Scalar> temb0 = Var<Scalar>::leaf(
        timestep_embedding_batch<Scalar>(t, cfg.timestep_embed_dim), "temb0", false);
    Var<Scalar> temb = silu(linear(temb0, p.at("temb.w"), p.at("temb.b")));

    std::vector<Var<Scalar>> skips;
    Var<Scalar> h = x;
    for (int i = 0; i < cfg.depth; ++i) {
        h = block(p, "enc" + std::to_string(i), h, temb);
        skips.push_back(h);
        h = downsample2(h);
    }
    h = block(p, "mid", h, temb);
    for (int i = cfg.depth - 1; i >= 0; --i) {
        h = upsample2(h);
        h = concat_channels(h, skips[static_cast<std::size_t>(i)]);
        h = block(p, "dec" + std::to_string(i), h, temb);
    }
    return conv2d(h, p.at("out.w"), p.at("out.b"));
}

}  // namespace netdetail

// Noise prediction eps_hat = model(x_t, t); forward pass only.
template <typename Scalar>
Tensor<Scalar> predict_noise(const ModelParams<Scalar>& params, const Tensor<Scalar>& x_t,
                             const std::vector<int>& t) {
    auto vars = netdetail::make_param_vars(params, false);
    Var<Scalar> x = Var<Scalar>::leaf(x_t, "input", false);
    return netdetail::unet_apply(vars, params.config, x, t).value();
}

// Adam with bias correction; state is owned by the caller alongside the
// parameters it optimizes.
template <typename Scalar>
struct Adam {
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
    Scalar eps = Scalar(1e-8);
    long step = 0;
    std::vector<Tensor<Scalar>> m, v;

    void apply(ModelParams<Scalar>& params, const std::vector<Tensor<Scalar>>& grads, Scalar lr) {
        if (m.empty()) {
            for (const auto& [name, t] : params.entries) {
                m.emplace_back(t.shape());
                v.emplace_back(t.shape());
            }
        }
        if (grads.size() != params.entries.size())
            throw std::invalid_argument("Adam: gradient count mismatch");
        ++step;
        const Scalar c1 = Scalar(1) - std::pow(beta1, static_cast<Scalar>(step));
        const Scalar c2 = Scalar(1) - std::pow(beta2, static_cast<Scalar>(step));
        for (std::size_t i = 0; i < grads.size(); ++i) {
            auto& g = grads[i].array();
            m[i].array() = beta1 * m[i].array() + (Scalar(1) - beta1) * g;
            v[i].array() = beta2 * v[i].array() + (Scalar(1) - beta2) * g.square();
            params.entries[i].second.array() -=
                lr * (m[i].array() / c1) / ((v[i].array() / c2).sqrt() + eps);
        }
    }
};

using AdamF = Adam<float>;

template <typename Scalar>
struct TrainStepResult {
    Scalar loss = Scalar(0);
    Tensor<Scalar> prediction;  // eps_hat from the pre-update forward pass
};

// One optimization step: MSE between predicted and true noise, reverse pass,
// Adam update. The tape is local to the call and dropped on return. A
// non-finite loss aborts the step before any parameter is touched.
template <typename Scalar>
TrainStepResult<Scalar> train_step(ModelParams<Scalar>& params, Adam<Scalar>& opt,
                                   const Tensor<Scalar>& x_t, const std::vector<int>& t,
                                   const Tensor<Scalar>& true_noise, Scalar lr) {
    if (!(lr >= Scalar(0))) throw std::invalid_argument("train_step: lr must be >= 0");
    require_same_shape(x_t, true_noise, "train_step");
    auto vars = netdetail::make_param_vars(params, true);
    Var<Scalar> x = Var<Scalar>::leaf(x_t, "input", false);
    Var<Scalar> target = Var<Scalar>::leaf(true_noise, "target", false);
    Var<Scalar> pred = netdetail::unet_apply(vars, params.config, x, t);
    Var<Scalar> loss = mse_loss(pred, target);
    if (!std::isfinite(static_cast<double>(loss.value()[0]))) {
        const auto* bad = find_non_finite(loss);
        throw std::runtime_error("train_step: non-finite loss; first non-finite value produced by '" +
                                 (bad ? bad->label : std::string("<unknown>")) + "'");
    }
    backward(loss);
    std::vector<Tensor<Scalar>> grads;
    grads.reserve(params.entries.size());
    for (const auto& [name, tensor] : params.entries) {
        const auto& g = vars.at(name).grad();
        if (g.size() != tensor.size())
            throw std::runtime_error("train_step: missing gradient for " + name);
        if (!g.all_finite())
            throw std::runtime_error("train_step: non-finite gradient in '" + name + "'");
        grads.push_back(g);
    }
    opt.apply(params, grads, lr);
    return {loss.value()[0], pred.value()};
}

}  // namespace cfdm
