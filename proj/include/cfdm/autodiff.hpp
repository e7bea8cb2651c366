#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cfdm/tensor.hpp"

namespace cfdm {

// Reverse-mode tape over dense tensors. Each operation appends a node holding
// its forward value and a closure that scatters the node's gradient to its
// parents. Graphs are rebuilt per step; execution is single-threaded and the
// node/parent ordering is fixed, so results are bit-reproducible.

template <typename Scalar>
struct Node;

template <typename Scalar>
using NodePtr = std::shared_ptr<Node<Scalar>>;

template <typename Scalar>
struct Node {
    Tensor<Scalar> value;
    Tensor<Scalar> grad;  // empty until backward touches it
    std::vector<NodePtr<Scalar>> parents;
    std::function<void(Node&)> backprop;
    std::string label;
    bool needs_grad = false;
};

template <typename Scalar>
Tensor<Scalar>& grad_of(Node<Scalar>& n) {
    if (n.grad.size() != n.value.size()) n.grad = Tensor<Scalar>(n.value.shape());
    return n.grad;
}

template <typename Scalar>
class Var {
public:
    Var() = default;
    explicit Var(NodePtr<Scalar> n) : n_(std::move(n)) {}

    static Var leaf(Tensor<Scalar> value, std::string label, bool requires_grad) {
        auto n = std::make_shared<Node<Scalar>>();
        n->value = std::move(value);
        n->label = std::move(label);
        n->needs_grad = requires_grad;
        return Var(std::move(n));
    }

    const Tensor<Scalar>& value() const { return n_->value; }
    const Tensor<Scalar>& grad() const { return n_->grad; }
    const std::string& label() const { return n_->label; }
    bool needs_grad() const { return n_ && n_->needs_grad; }
    NodePtr<Scalar> node() const { return n_; }
    explicit operator bool() const { return static_cast<bool>(n_); }

private:
    NodePtr<Scalar> n_;
};

namespace detail {

template <typename Scalar>
NodePtr<Scalar> make_op(std::string label, std::vector<NodePtr<Scalar>> parents,
                        Tensor<Scalar> value, std::function<void(Node<Scalar>&)> backprop) {
    auto n = std::make_shared<Node<Scalar>>();
    n->label = std::move(label);
    n->parents = std::move(parents);
    n->value = std::move(value);
    n->backprop = std::move(backprop);
    for (const auto& p : n->parents)
        if (p->needs_grad) n->needs_grad = true;
    return n;
}

template <typename Scalar>
std::vector<Node<Scalar>*> topo_order(const NodePtr<Scalar>& root) {
    std::vector<Node<Scalar>*> order;
    std::unordered_set<Node<Scalar>*> visited;
    std::vector<std::pair<Node<Scalar>*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i < n->parents.size()) {
            Node<Scalar>* p = n->parents[i++].get();
            if (visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    return order;  // parents precede children; reverse for backprop
}

template <typename Scalar>
using MatRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MapRM = Eigen::Map<MatRM<Scalar>>;
template <typename Scalar>
using CMapRM = Eigen::Map<const MatRM<Scalar>>;
template <typename Scalar>
using VecMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;
template <typename Scalar>
using CVecMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;

// Unrolls the kh*kw*Cin receptive fields of one image into a (Cin*kh*kw) x
// (H*W) matrix; stride 1, zero padding kh/2, kw/2 (same-size output).
template <typename Scalar>
void im2col(const Tensor<Scalar>& x, Index b, Index kh, Index kw, MatRM<Scalar>& cols) {
    const Index cin = x.extent(1), h = x.extent(2), w = x.extent(3);
    const Index ph = kh / 2, pw = kw / 2;
    cols.resize(cin * kh * kw, h * w);
    const Scalar* img = x.data() + b * cin * h * w;
    for (Index ci = 0; ci < cin; ++ci) {
        for (Index u = 0; u < kh; ++u) {
            for (Index v = 0; v < kw; ++v) {
                Scalar* row = cols.data() + ((ci * kh + u) * kw + v) * (h * w);
                const Index dw = v - pw;
                const Index ow_lo = std::max<Index>(0, -dw);
                const Index ow_hi = std::min<Index>(w, w - dw);  // exclusive
                for (Index oh = 0; oh < h; ++oh) {
                    Scalar* out = row + oh * w;
                    const Index ih = oh + u - ph;
                    if (ih < 0 || ih >= h) {
                        std::fill(out, out + w, Scalar(0));
                        continue;
                    }
                    const Scalar* in = img + (ci * h + ih) * w;
                    if (ow_lo > 0) std::fill(out, out + ow_lo, Scalar(0));
                    if (ow_hi > ow_lo)
                        std::copy(in + ow_lo + dw, in + ow_hi + dw, out + ow_lo);
                    if (ow_hi < w) std::fill(out + ow_hi, out + w, Scalar(0));
                }
            }
        }
    }
}

// Scatter-add of a (Cin*kh*kw) x (H*W) gradient matrix back into image b.
template <typename Scalar>
void col2im_add(const MatRM<Scalar>& cols, Index b, Index kh, Index kw, Tensor<Scalar>& dx) {
    const Index cin = dx.extent(1), h = dx.extent(2), w = dx.extent(3);
    const Index ph = kh / 2, pw = kw / 2;
    Scalar* img = dx.data() + b * cin * h * w;
    for (Index ci = 0; ci < cin; ++ci) {
        for (Index u = 0; u < kh; ++u) {
            for (Index v = 0; v < kw; ++v) {
                const Scalar* row = cols.data() + ((ci * kh + u) * kw + v) * (h * w);
                const Index dw = v - pw;
                const Index ow_lo = std::max<Index>(0, -dw);
                const Index ow_hi = std::min<Index>(w, w - dw);
                for (Index oh = 0; oh < h; ++oh) {
                    const Index ih = oh + u - ph;
                    if (ih < 0 || ih >= h) continue;
                    Scalar* in = img + (ci * h + ih) * w;
                    const Scalar* g = row + oh * w;
                    for (Index ow = ow_lo; ow < ow_hi; ++ow) in[ow + dw] += g[ow];
                }
            }
        }
    }
}

}  // namespace detail

// 3x3 (or any odd kernel) convolution, stride 1, same padding.
// x: [B, Cin, H, W], w: [Cout, Cin, kh, kw], bias: [Cout] -> [B, Cout, H, W].
template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& w, const Var<Scalar>& bias) {
    const auto& xs = x.value().shape();
    const auto& ws = w.value().shape();
    if (xs.size() != 4 || ws.size() != 4)
        throw std::invalid_argument("conv2d: expected rank-4 input and kernel");
    if (xs[1] != ws[1])
        throw std::invalid_argument("conv2d: input channels " + std::to_string(xs[1]) +
                                    " do not match kernel channels " + std::to_string(ws[1]));
    if (ws[2] % 2 == 0 || ws[3] % 2 == 0)
        throw std::invalid_argument("conv2d: kernel extents must be odd");
    if (bias.value().size() != ws[0])
        throw std::invalid_argument("conv2d: bias length does not match output channels");
    const Index batch = xs[0], cout = ws[0], kh = ws[2], kw = ws[3];
    const Index h = xs[2], wd = xs[3], n = h * wd, k = ws[1] * kh * kw;

    Tensor<Scalar> out({batch, cout, h, wd});
    detail::CMapRM<Scalar> wmat(w.value().data(), cout, k);
    detail::CVecMap<Scalar> bvec(bias.value().data(), cout);
    detail::MatRM<Scalar> cols;
    for (Index b = 0; b < batch; ++b) {
        detail::im2col(x.value(), b, kh, kw, cols);
        detail::MapRM<Scalar> y(out.data() + b * cout * n, cout, n);
        y.noalias() = wmat * cols;
        y.colwise() += bvec;
    }

    auto back = [kh, kw](Node<Scalar>& self) {
        auto& xp = *self.parents[0];
        auto& wp = *self.parents[1];
        auto& bp = *self.parents[2];
        const Index batch = xp.value.extent(0), cout = wp.value.extent(0);
        const Index n = xp.value.extent(2) * xp.value.extent(3);
        const Index k = wp.value.extent(1) * kh * kw;
        detail::MatRM<Scalar> cols, dcols;
        for (Index b = 0; b < batch; ++b) {
            detail::CMapRM<Scalar> dy(self.grad.data() + b * cout * n, cout, n);
            if (wp.needs_grad || bp.needs_grad) {
                detail::im2col(xp.value, b, kh, kw, cols);
                if (wp.needs_grad) {
                    detail::MapRM<Scalar> dw(grad_of(wp).data(), cout, k);
                    dw.noalias() += dy * cols.transpose();
                }
                if (bp.needs_grad) {
                    detail::VecMap<Scalar> db(grad_of(bp).data(), cout);
                    db.noalias() += dy.rowwise().sum();
                }
            }
            if (xp.needs_grad) {
                detail::CMapRM<Scalar> wmat(wp.value.data(), cout, k);
                dcols.resize(k, n);
                dcols.noalias() = wmat.transpose() * dy;
                detail::col2im_add(dcols, b, kh, kw, grad_of(xp));
            }
        }
    };
    return Var<Scalar>(detail::make_op<Scalar>("conv2d", {x.node(), w.node(), bias.node()},
                                               std::move(out), back));
}

// Fully connected layer: x [B, In], w [Out, In], bias [Out] -> [B, Out].
template <typename Scalar>
Var<Scalar> linear(const Var<Scalar>& x, const Var<Scalar>& w, const Var<Scalar>& bias) {
    const auto& xs = x.value().shape();
    const auto& ws = w.value().shape();
    if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1])
        throw std::invalid_argument("linear: incompatible shapes " + shape_to_string(xs) +
                                    " and " + shape_to_string(ws));
    if (bias.value().size() != ws[0])
        throw std::invalid_argument("linear: bias length does not match output features");
    const Index batch = xs[0], in = xs[1], out_dim = ws[0];

    Tensor<Scalar> out({batch, out_dim});
    detail::CMapRM<Scalar> xm(x.value().data(), batch, in);
    detail::CMapRM<Scalar> wm(w.value().data(), out_dim, in);
    detail::CVecMap<Scalar> bv(bias.value().data(), out_dim);
    detail::MapRM<Scalar> ym(out.data(), batch, out_dim);
    ym.noalias() = xm * wm.transpose();
    ym.rowwise() += bv.transpose();

    auto back = [](Node<Scalar>& self) {
        auto& xp = *self.parents[0];
        auto& wp = *self.parents[1];
        auto& bp = *self.parents[2];
        const Index batch = xp.value.extent(0), in = xp.value.extent(1);
        const Index out_dim = wp.value.extent(0);
        detail::CMapRM<Scalar> dy(self.grad.data(), batch, out_dim);
        detail::CMapRM<Scalar> xm(xp.value.data(), batch, in);
        detail::CMapRM<Scalar> wm(wp.value.data(), out_dim, in);
        if (xp.needs_grad) {
            detail::MapRM<Scalar> dx(grad_of(xp).data(), batch, in);
            dx.noalias() += dy * wm;
        }
        if (wp.needs_grad) {
            detail::MapRM<Scalar> dw(grad_of(wp).data(), out_dim, in);
            dw.noalias() += dy.transpose() * xm;
        }
        if (bp.needs_grad) {
            detail::VecMap<Scalar> db(grad_of(bp).data(), out_dim);
            db.noalias() += dy.colwise().sum().transpose();
        }
    };
    return Var<Scalar>(detail::make_op<Scalar>("linear", {x.node(), w.node(), bias.node()},
                                               std::move(out), back));
}

// Per-sample, per-channel normalization over the spatial extent with a
// learned per-channel scale: y = gamma_c * (x - mean_bc) / sqrt(var_bc + eps).
template <typename Scalar>
Var<Scalar> channel_norm(const Var<Scalar>& x, const Var<Scalar>& gamma,
                         Scalar eps = Scalar(1e-5)) {
    const auto& xs = x.value().shape();
    if (xs.size() != 4) throw std::invalid_argument("channel_norm: expected rank-4 input");
    if (gamma.value().size() != xs[1])
        throw std::invalid_argument("channel_norm: scale length does not match channels");
    const Index batch = xs[0], ch = xs[1], hw = xs[2] * xs[3];

    Tensor<Scalar> out(xs);
    std::vector<Scalar> mean(static_cast<std::size_t>(batch * ch));
    std::vector<Scalar> istd(static_cast<std::size_t>(batch * ch));
    for (Index g = 0; g < batch * ch; ++g) {
        detail::CVecMap<Scalar> seg(x.value().data() + g * hw, hw);
        const Scalar mu = seg.mean();
        const Scalar var = (seg.array() - mu).square().mean();
        const Scalar is = Scalar(1) / std::sqrt(var + eps);
        mean[static_cast<std::size_t>(g)] = mu;
        istd[static_cast<std::size_t>(g)] = is;
        detail::VecMap<Scalar> dst(out.data() + g * hw, hw);
        dst.array() = (seg.array() - mu) * (is * gamma.value()[g % ch]);
    }

    auto back = [mean = std::move(mean), istd = std::move(istd), hw](Node<Scalar>& self) {
        auto& xp = *self.parents[0];
        auto& gp = *self.parents[1];
        const Index ch = gp.value.size();
        const Index groups = static_cast<Index>(mean.size());
        using Arr = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
        for (Index g = 0; g < groups; ++g) {
            detail::CVecMap<Scalar> xseg(xp.value.data() + g * hw, hw);
            detail::CVecMap<Scalar> dyseg(self.grad.data() + g * hw, hw);
            const Scalar mu = mean[static_cast<std::size_t>(g)];
            const Scalar is = istd[static_cast<std::size_t>(g)];
            Arr xhat = (xseg.array() - mu) * is;
            if (gp.needs_grad) grad_of(gp)[g % ch] += (dyseg.array() * xhat).sum();
            if (xp.needs_grad) {
                const Scalar gamma_c = gp.value[g % ch];
                Arr dxhat = dyseg.array() * gamma_c;
                const Scalar m1 = dxhat.mean();
                const Scalar m2 = (dxhat * xhat).mean();
                detail::VecMap<Scalar> dx(grad_of(xp).data() + g * hw, hw);
                dx.array() += is * (dxhat - m1 - xhat * m2);
            }
        }
    };
    return Var<Scalar>(detail::make_op<Scalar>("channel_norm", {x.node(), gamma.node()},
                                               std::move(out), back));
}

template <typename Scalar>
Var<Scalar> silu(const Var<Scalar>& x) {
    Tensor<Scalar> out(x.value().shape());
    auto sig = (Scalar(1) / (Scalar(1) + (-x.value().array()).exp())).eval();
    out.array() = x.value().array() * sig;
    auto back = [](Node<Scalar>& self) {
        auto& xp = *self.parents[0];
        if (!xp.needs_grad) return;
        const auto& xv = xp.value.array();
        auto sig = (Scalar(1) / (Scalar(1) + (-xv).exp())).eval();
        grad_of(xp).array() += self.grad.array() * sig * (Scalar(1) + xv * (Scalar(1) - sig));
    };
    return Var<Scalar>(detail::make_op<Scalar>("silu", {x.node()}, std::move(out), back));
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
    require_same_shape(a.value(), b.value(), "add");
    Tensor<Scalar> out(a.value().shape());
    out.array() = a.value().array() + b.value().array();
    auto back = [](Node<Scalar>& self) {
        for (auto& p : self.parents)
            if (p->needs_grad) grad_of(*p).array() += self.grad.array();
    };
    return Var<Scalar>(detail::make_op<Scalar>("add", {a.node(), b.node()}, std::move(out), back));
}

// Broadcasts a per-sample channel vector v [B, C] over the spatial extent of
// x [B, C, H, W]; used to inject the timestep embedding into feature maps.
template <typename Scalar>
Var<Scalar> add_channels(const Var<Scalar>& x, const Var<Scalar>& v) {
    const auto& xs = x.value().shape();
    const auto& vs = v.value().shape();
    if (xs.size() != 4 || vs.size() != 2 || vs[0] != xs[0] || vs[1] != xs[1])
        throw std::invalid_argument("add_channels: incompatible shapes " + shape_to_string(xs) +
                                    " and " + shape_to_string(vs));
    const Index hw = xs[2] * xs[3];
    Tensor<Scalar> out(xs);
    for (Index g = 0; g < xs[0] * xs[1]; ++g) {
        detail::CVecMap<Scalar> seg(x.value().data() + g * hw, hw);
        detail::VecMap<Scalar> dst(out.data() + g * hw, hw);
        dst.array() = seg.array() + v.value()[g];
    }
    auto back = [hw](Node<Scalar>& self) {
        auto& xp = *self.parents[0];
        auto& vp = *self.parents[1];
        if (xp.needs_grad) grad_of(xp).array() += self.grad.array();
        if (vp.needs_grad) {
            auto& dv = grad_of(vp);
            for (Index g = 0; g < dv.size(); ++g) {
                detail::CVecMap<Scalar> seg(self.grad.data() + g * hw, hw);
                dv[g] += seg.sum();
            }
        }
    };
    return Var<Scalar>(detail::make_op<Scalar>("add_channels", {x.node(), v.node()},
                                               std::move(out), back));
}

// 2x2 mean pooling, stride 2. Requires even spatial extents.
template <typename Scalar>
Var<Scalar> downsample2(const Var<Scalar>& x) {
    const auto& xs = x.value().shape();
    if (xs.size() != 4 || xs[2] % 2 || xs[3] % 2)
        throw std::invalid_argument("downsample2: spatial extents must be even");
    const Index bc = xs[0] * xs[1], h = xs[2], w = xs[3], oh = h / 2, ow = w / 2;
    Tensor<Scalar> out({xs[0], xs[1], oh, ow});
    for (Index g = 0; g < bc; ++g) {
        const Scalar* in = x.value().data() + g * h * w;
        Scalar* dst = out.data() + g * oh * ow;
        for (Index y = 0; y < oh; ++y)
            for (Index z = 0; z < ow; ++z)
                dst[y * ow + z] = (in[(2 * y) * w + 2 * z] + in[(2 * y) * w + 2 * z + 1] +
                                   in[(2 * y + 1) * w + 2 * z] + in[(2 * y + 1) * w + 2 * z + 1]) *
                                  Scalar(0.25);
    }
    auto back = [](Node<Scalar>& self) {
        auto& xp = *self.parents[0];
        if (!xp.needs_grad) return;
        const Index bc = xp.value.extent(0) * xp.value.extent(1);
        const Index h = xp.value.extent(2), w = xp.value.extent(3), oh = h / 2, ow = w / 2;
        auto& dx = grad_of(xp);
        for (Index g = 0; g < bc; ++g) {
            const Scalar* dy = self.grad.data() + g * oh * ow;
            Scalar* out = dx.data() + g * h * w;
            for (Index y = 0; y < oh; ++y)
                for (Index z = 0; z < ow; ++z) {
                    const Scalar v = dy[y * ow + z] * Scalar(0.25);
                    out[(2 * y) * w + 2 * z] += v;
                    out[(2 * y) * w + 2 * z + 1] += v;
                    out[(2 * y + 1) * w + 2 * z] += v;
                    out[(2 * y + 1) * w + 2 * z + 1] += v;
                }
        }
    };
    return Var<Scalar>(detail::make_op<Scalar>("downsample2", {x.node()}, std::move(out), back));
}

// Nearest-neighbour 2x upsampling.
template <typename Scalar>
Var<Scalar> upsample2(const Var<Scalar>& x) {
    const auto& xs = x.value().shape();
    if (xs.size() != 4) throw std::invalid_argument("upsample2: expected rank-4 input");
    const Index bc = xs[0] * xs[1], h = xs[2], w = xs[3];
    Tensor<Scalar> out({xs[0], xs[1], 2 * h, 2 * w});
    for (Index g = 0; g < bc; ++g) {
        const Scalar* in = x.value().data() + g * h * w;
        Scalar* dst = out.data() + g * 4 * h * w;
        for (Index y = 0; y < 2 * h; ++y)
            for (Index z = 0; z < 2 * w; ++z) dst[y * 2 * w + z] = in[(y / 2) * w + z / 2];
    }
    auto back = [](Node<Scalar>& self) {
        auto& xp = *self.parents[0];
        if (!xp.needs_grad) return;
        const Index bc = xp.value.extent(0) * xp.value.extent(1);
        const Index h = xp.value.extent(2), w = xp.value.extent(3);
        auto& dx = grad_of(xp);
        for (Index g = 0; g < bc; ++g) {
            const Scalar* dy = self.grad.data() + g * 4 * h * w;
            Scalar* out = dx.data() + g * h * w;
            for (Index y = 0; y < 2 * h; ++y)
                for (Index z = 0; z < 2 * w; ++z) out[(y / 2) * w + z / 2] += dy[y * 2 * w + z];
        }
    };
    return Var<Scalar>(detail::make_op<Scalar>("upsample2", {x.node()}, std::move(out), back));
}

// Concatenation along the channel axis.
template <typename Scalar>
Var<Scalar> concat_channels(const Var<Scalar>& a, const Var<Scalar>& b) {
    const auto& as = a.value().shape();
    const auto& bs = b.value().shape();
    if (as.size() != 4 || bs.size() != 4 || as[0] != bs[0] || as[2] != bs[2] || as[3] != bs[3])
        throw std::invalid_argument("concat_channels: incompatible shapes " +
                                    shape_to_string(as) + " and " + shape_to_string(bs));
    const Index batch = as[0], ca = as[1], cb = bs[1], hw = as[2] * as[3];
    Tensor<Scalar> out({batch, ca + cb, as[2], as[3]});
    for (Index i = 0; i < batch; ++i) {
        out.array().segment(i * (ca + cb) * hw, ca * hw) =
            a.value().array().segment(i * ca * hw, ca * hw);
        out.array().segment(i * (ca + cb) * hw + ca * hw, cb * hw) =
            b.value().array().segment(i * cb * hw, cb * hw);
    }
    auto back = [ca, cb, hw](Node<Scalar>& self) {
        auto& ap = *self.parents[0];
        auto& bp = *self.parents[1];
        const Index batch = self.value.extent(0);
        for (Index i = 0; i < batch; ++i) {
            if (ap.needs_grad)
                grad_of(ap).array().segment(i * ca * hw, ca * hw) +=
                    self.grad.array().segment(i * (ca + cb) * hw, ca * hw);
            if (bp.needs_grad)
                grad_of(bp).array().segment(i * cb * hw, cb * hw) +=
                    self.grad.array().segment(i * (ca + cb) * hw + ca * hw, cb * hw);
        }
    };
    return Var<Scalar>(detail::make_op<Scalar>("concat_channels", {a.node(), b.node()},
                                               std::move(out), back));
}

// Mean squared error over all elements; returns a scalar (shape [1]) node.
template <typename Scalar>
Var<Scalar> mse_loss(const Var<Scalar>& pred, const Var<Scalar>& target) {
    require_same_shape(pred.value(), target.value(), "mse_loss");
    const Index n = pred.value().size();
    Tensor<Scalar> out({1});
    out[0] = (pred.value().array() - target.value().array()).square().sum() / Scalar(n);
    auto back = [n](Node<Scalar>& self) {
        auto& pp = *self.parents[0];
        auto& tp = *self.parents[1];
        const Scalar g = self.grad[0] * Scalar(2) / Scalar(n);
        auto diff = (pp.value.array() - tp.value.array()).eval();
        if (pp.needs_grad) grad_of(pp).array() += g * diff;
        if (tp.needs_grad) grad_of(tp).array() -= g * diff;
    };
    return Var<Scalar>(detail::make_op<Scalar>("mse_loss", {pred.node(), target.node()},
                                               std::move(out), back));
}

// Fixed-weight scalarization, used by the finite-difference checks.
template <typename Scalar>
Var<Scalar> weighted_sum(const Var<Scalar>& x, Tensor<Scalar> weights) {
    require_same_shape(x.value(), weights, "weighted_sum");
    Tensor<Scalar> out({1});
    out[0] = (x.value().array() * weights.array()).sum();
    auto back = [w = std::move(weights)](Node<Scalar>& self) {
        auto& xp = *self.parents[0];
        if (xp.needs_grad) grad_of(xp).array() += self.grad[0] * w.array();
    };
    return Var<Scalar>(detail::make_op<Scalar>("weighted_sum", {x.node()}, std::move(out), back));
}

// Runs reverse accumulation from a scalar root.
template <typename Scalar>
void backward(const Var<Scalar>& root) {
    if (root.value().size() != 1)
        throw std::invalid_argument("backward: root must be a scalar");
    auto order = detail::topo_order(root.node());
    for (auto* n : order) n->grad = Tensor<Scalar>();
    grad_of(*root.node())[0] = Scalar(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<Scalar>* n = *it;
        if (n->backprop && n->needs_grad) n->backprop(*n);
    }
}

// First node (in execution order) whose forward value is non-finite, if any.
template <typename Scalar>
const Node<Scalar>* find_non_finite(const Var<Scalar>& root) {
    auto order = detail::topo_order(root.node());
    for (const auto* n : order)
        if (!n->value.all_finite()) return n;
    return nullptr;
}

}  // namespace cfdm
