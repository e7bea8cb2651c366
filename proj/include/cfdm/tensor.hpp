#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfdm/rng.hpp"

namespace cfdm {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_numel(const Shape& shape) {
    Index n = 1;
    for (Index e : shape) {
        if (e < 0) throw std::invalid_argument("tensor extent must be non-negative");
        n *= e;
    }
    return n;
}

inline std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

// Dense row-major tensor over a flat Eigen array. Images travel as rank-4
// (batch, channels, height, width); internals use whatever rank they need.
template <typename Scalar>
class Tensor {
public:
    using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    Tensor() = default;

    explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_)) {
        data_.setZero();
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, Scalar value) {
        Tensor t(std::move(shape));
        t.data_.setConstant(value);
        return t;
    }

    static Tensor from_values(Shape shape, std::initializer_list<Scalar> values) {
        Tensor t(std::move(shape));
        if (static_cast<Index>(values.size()) != t.size())
            throw std::invalid_argument("from_values: element count does not match shape");
        Index i = 0;
        for (Scalar v : values) t.data_[i++] = v;
        return t;
    }

    static Tensor randn(Shape shape, Rng& rng) {
        Tensor t(std::move(shape));
        for (Index i = 0; i < t.size(); ++i)
            t.data_[i] = static_cast<Scalar>(rng.normal());
        return t;
    }

    const Shape& shape() const { return shape_; }
    Index rank() const { return static_cast<Index>(shape_.size()); }
    Index extent(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
    Index size() const { return data_.size(); }

    Scalar* data() { return data_.data(); }
    const Scalar* data() const { return data_.data(); }

    Storage& array() { return data_; }
    const Storage& array() const { return data_; }

    Scalar& operator[](Index i) { return data_[i]; }
    Scalar operator[](Index i) const { return data_[i]; }

    // Rank-4 accessors (b, c, h, w), row-major.
    Scalar& at4(Index b, Index c, Index h, Index w) {
        return data_[((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    Scalar at4(Index b, Index c, Index h, Index w) const {
        return data_[((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }

    Scalar& at2(Index r, Index c) { return data_[r * shape_[1] + c]; }
    Scalar at2(Index r, Index c) const { return data_[r * shape_[1] + c]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const { return data_.isFinite().all(); }

    template <typename Other>
    Tensor<Other> cast() const {
        Tensor<Other> out(shape_);
        out.array() = data_.template cast<Other>();
        return out;
    }

    // Copies the slice [first, first+count) along axis 0.
    Tensor slice0(Index first, Index count) const {
        if (rank() < 1 || first < 0 || count < 0 || first + count > shape_[0])
            throw std::invalid_argument("slice0: range out of bounds");
        Shape out_shape = shape_;
        out_shape[0] = count;
        Tensor out(out_shape);
        const Index stride = size() / std::max<Index>(shape_[0], 1);
        out.array() = data_.segment(first * stride, count * stride);
        return out;
    }

private:
    Shape shape_;
    Storage data_;
};

template <typename Scalar>
void require_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                    shape_to_string(a.shape()) + " vs " +
                                    shape_to_string(b.shape()));
}

// Stacks tensors of identical shape along a new leading axis.
template <typename Scalar>
Tensor<Scalar> stack0(const std::vector<Tensor<Scalar>>& parts) {
    if (parts.empty()) throw std::invalid_argument("stack0: empty input");
    Shape s = parts[0].shape();
    for (const auto& p : parts) require_same_shape(parts[0], p, "stack0");
    Shape out_shape;
    out_shape.push_back(static_cast<Index>(parts.size()));
    out_shape.insert(out_shape.end(), s.begin(), s.end());
    Tensor<Scalar> out(out_shape);
    const Index stride = parts[0].size();
    for (std::size_t i = 0; i < parts.size(); ++i)
        out.array().segment(static_cast<Index>(i) * stride, stride) = parts[i].array();
    return out;
}

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace cfdm
