#pragma once

#include <cstdint>
#include <vector>

#include "cfdm/net.hpp"
#include "cfdm/tensor.hpp"

namespace cfdm {

// Fixed random-weight convolutional feature extractor: three 3x3 conv stages
// with mean-pool descents and global average pooling to a d-dimensional
// vector. Never trained; identical seeds give bit-identical features.
struct FeatureExtractor {
    int image_channels = 1;
    int image_size = 32;
    int dim = 64;
    std::uint64_t seed = 0;
    TensorF w1, b1, w2, b2, w3, b3;

    static FeatureExtractor make(int image_channels, int image_size, std::uint64_t seed,
                                 int dim = 64);
};

// images: [n, C, H, W] in the [-1, 1] convention -> features [n, dim].
TensorF extract_features(const FeatureExtractor& ex, const TensorF& images);

// Unbiased squared MMD with the degree-3 polynomial kernel
// k(x, y) = (x.y / d + 1)^3: mean off-diagonal kernel within each set minus
// twice the mean cross kernel. Slightly negative values are legitimate.
struct KidScore {
    double value = 0.0;
    Index n_real = 0;
    Index n_gen = 0;
};

KidScore kid(const TensorF& real_features, const TensorF& gen_features);

// Disclosure at the split boundary: per boundary image, the minimum pixel MSE
// over the real set (nearest-real), plus the KID between the two sets.
struct DisclosureReport {
    std::vector<double> nearest_mse;
    double mean_nearest_mse = 0.0;
    double kid_value = 0.0;
};

DisclosureReport disclosure(const TensorF& boundary_images, const TensorF& real_images,
                            const FeatureExtractor& ex);

// Analytic FLOP model: one multiply-accumulate = 2 FLOPs; backward passes are
// counted as twice the forward cost. Only MAC-bearing layers (convolutions
// and fully connected projections) are counted.
enum class Direction { Forward, Backward };

std::uint64_t conv_flops(Index kh, Index kw, Index cin, Index cout, Index out_h, Index out_w);
std::uint64_t linear_flops(Index in_dim, Index out_dim);
std::uint64_t unet_flops_per_image(const NetConfig& cfg, Direction dir);
std::uint64_t flop_account(const NetConfig& cfg, Index batch, Direction dir);

// Per-entity resource tallies; entity indices are clients 0..n-1 and the
// server last. Additive across rounds, zero at session start.
struct EntityUsage {
    std::uint64_t train_forward_flops = 0;
    std::uint64_t train_backward_flops = 0;
    std::uint64_t infer_forward_flops = 0;
    std::uint64_t bytes_tx = 0;

    std::uint64_t train_flops() const { return train_forward_flops + train_backward_flops; }
    std::uint64_t total_flops() const { return train_flops() + infer_forward_flops; }
};

class EnergyMeter {
public:
    explicit EnergyMeter(std::size_t n_entities) : usage_(n_entities) {}

    void add_train(std::size_t entity, std::uint64_t fwd, std::uint64_t bwd) {
        usage_.at(entity).train_forward_flops += fwd;
        usage_.at(entity).train_backward_flops += bwd;
    }
    void add_infer(std::size_t entity, std::uint64_t fwd) {
        usage_.at(entity).infer_forward_flops += fwd;
    }
    void set_bytes(std::size_t entity, std::uint64_t total) { usage_.at(entity).bytes_tx = total; }

    std::size_t entities() const { return usage_.size(); }
    const EntityUsage& usage(std::size_t entity) const { return usage_.at(entity); }
    const std::vector<EntityUsage>& all() const { return usage_; }

private:
    std::vector<EntityUsage> usage_;
};

}  // namespace cfdm
