#include "cfdm/metrics.hpp"

#include <Eigen/Dense>

#include "cfdm/autodiff.hpp"
#include "cfdm/rng.hpp"

namespace cfdm {

FeatureExtractor FeatureExtractor::make(int image_channels, int image_size, std::uint64_t seed,
                                        int dim) {
    if (image_size % 4 != 0)
        throw std::invalid_argument("FeatureExtractor: image_size must be divisible by 4");
    if (dim < 1) throw std::invalid_argument("FeatureExtractor: dim must be >= 1");
    FeatureExtractor ex;
    ex.image_channels = image_channels;
    ex.image_size = image_size;
    ex.dim = dim;
    ex.seed = seed;
    Rng rng(seed);
    auto he = [&](Shape shape, Index fan_in) {
        TensorF t(std::move(shape));
        const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.normal() * scale);
        return t;
    };
    const Index c = image_channels;
    ex.w1 = he({16, c, 3, 3}, c * 9);
    ex.b1 = TensorF({16});
    ex.w2 = he({32, 16, 3, 3}, 16 * 9);
    ex.b2 = TensorF({32});
    ex.w3 = he({dim, 32, 3, 3}, 32 * 9);
    ex.b3 = TensorF({dim});
    return ex;
}

TensorF extract_features(const FeatureExtractor& ex, const TensorF& images) {
    const auto& s = images.shape();
    if (s.size() != 4 || s[1] != ex.image_channels || s[2] != ex.image_size ||
        s[3] != ex.image_size)
        throw std::invalid_argument("extract_features: image shape " + shape_to_string(s) +
                                    " does not match extractor (" +
                                    std::to_string(ex.image_channels) + " channels, " +
                                    std::to_string(ex.image_size) + " px)");
    auto v = [&](const TensorF& t) { return Var<float>::leaf(t, "feat", false); };
    Var<float> h = v(images);
    h = silu(conv2d(h, v(ex.w1), v(ex.b1)));
    h = downsample2(h);
    h = silu(conv2d(h, v(ex.w2), v(ex.b2)));
    h = downsample2(h);
    h = silu(conv2d(h, v(ex.w3), v(ex.b3)));

    const auto& hv = h.value();
    const Index n = hv.extent(0), ch = hv.extent(1), hw = hv.extent(2) * hv.extent(3);
    TensorF out({n, ch});
    for (Index i = 0; i < n; ++i)
        for (Index cidx = 0; cidx < ch; ++cidx) {
            const float* p = hv.data() + (i * ch + cidx) * hw;
            double acc = 0.0;
            for (Index k = 0; k < hw; ++k) acc += p[k];
            out.at2(i, cidx) = static_cast<float>(acc / static_cast<double>(hw));
        }
    return out;
}

namespace {

using MatD = Eigen::MatrixXd;

MatD to_double(const TensorF& features) {
    const Index n = features.extent(0), d = features.extent(1);
    MatD m(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) m(i, j) = features.at2(i, j);
    return m;
}

}  // namespace

KidScore kid(const TensorF& real_features, const TensorF& gen_features) {
    if (real_features.rank() != 2 || gen_features.rank() != 2)
        throw std::invalid_argument("kid: feature matrices must be rank 2");
    if (real_features.extent(1) != gen_features.extent(1))
        throw std::invalid_argument("kid: feature dimensions differ");
    const Index nr = real_features.extent(0), ng = gen_features.extent(0);
    if (nr < 2 || ng < 2)
        throw std::invalid_argument("kid: each set needs at least 2 samples");

    const MatD x = to_double(real_features);
    const MatD y = to_double(gen_features);
    const double d = static_cast<double>(x.cols());
    const MatD kxx = ((x * x.transpose()).array() / d + 1.0).cube().matrix();
    const MatD kyy = ((y * y.transpose()).array() / d + 1.0).cube().matrix();
    const MatD kxy = ((x * y.transpose()).array() / d + 1.0).cube().matrix();

    const double sum_xx = kxx.sum() - kxx.trace();
    const double sum_yy = kyy.sum() - kyy.trace();
    const double mean_xy = kxy.mean();

    KidScore score;
    score.n_real = nr;
    score.n_gen = ng;
    score.value = sum_xx / (static_cast<double>(nr) * (nr - 1)) +
                  sum_yy / (static_cast<double>(ng) * (ng - 1)) - 2.0 * mean_xy;
    return score;
}

DisclosureReport disclosure(const TensorF& boundary_images, const TensorF& real_images,
                            const FeatureExtractor& ex) {
    if (boundary_images.rank() != 4 || real_images.rank() != 4)
        throw std::invalid_argument("disclosure: image stacks must be rank 4");
    if (boundary_images.extent(0) < 1 || real_images.extent(0) < 1)
        throw std::invalid_argument("disclosure: both sets must be non-empty");
    for (int a = 1; a < 4; ++a)
        if (boundary_images.extent(a) != real_images.extent(a))
            throw std::invalid_argument("disclosure: image sizes differ");

    const Index nb = boundary_images.extent(0), nr = real_images.extent(0);
    const Index px = boundary_images.size() / nb;
    DisclosureReport report;
    report.nearest_mse.reserve(static_cast<std::size_t>(nb));
    for (Index i = 0; i < nb; ++i) {
        const float* bi = boundary_images.data() + i * px;
        double best = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < nr; ++j) {
            const float* rj = real_images.data() + j * px;
            double acc = 0.0;
            for (Index k = 0; k < px; ++k) {
                const double diff = static_cast<double>(bi[k]) - static_cast<double>(rj[k]);
                acc += diff * diff;
            }
            best = std::min(best, acc / static_cast<double>(px));
        }
        report.nearest_mse.push_back(best);
    }
    double total = 0.0;
    for (double v : report.nearest_mse) total += v;
    report.mean_nearest_mse = total / static_cast<double>(nb);
    report.kid_value = kid(extract_features(ex, real_images),
                           extract_features(ex, boundary_images)).value;
    return report;
}

std::uint64_t conv_flops(Index kh, Index kw, Index cin, Index cout, Index out_h, Index out_w) {
    return 2ull * static_cast<std::uint64_t>(kh * kw * cin) *
           static_cast<std::uint64_t>(cout) * static_cast<std::uint64_t>(out_h * out_w);
}

std::uint64_t linear_flops(Index in_dim, Index out_dim) {
    return 2ull * static_cast<std::uint64_t>(in_dim) * static_cast<std::uint64_t>(out_dim);
}

std::uint64_t unet_flops_per_image(const NetConfig& cfg, Direction dir) {
    const auto plan = netdetail::make_plan(cfg);
    std::uint64_t fwd = 0;
    for (const auto& conv : plan.convs)
        fwd += conv_flops(conv.kh, conv.kw, conv.cin, conv.cout, conv.out_h, conv.out_w);
    for (const auto& lin : plan.linears) fwd += linear_flops(lin.in_dim, lin.out_dim);
    return dir == Direction::Forward ? fwd : 2 * fwd;
}

std::uint64_t flop_account(const NetConfig& cfg, Index batch, Direction dir) {
    return unet_flops_per_image(cfg, dir) * static_cast<std::uint64_t>(batch);
}

}  // namespace cfdm
