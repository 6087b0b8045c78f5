#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ecf/error.hpp"

namespace ecf {

namespace detail {

inline std::size_t checked_mul(std::size_t a, std::size_t b, const char* what) {
    if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a) {
        raise(ErrorCode::ShapeMismatch, std::string(what) + ": element count overflows size_t");
    }
    return a * b;
}

} // namespace detail

/// (length, height, depth, batch) extents of a dense 4-D array.
/// Depth is the channel axis; batch is the sample axis.
struct Shape4 {
    std::size_t length = 1;
    std::size_t height = 1;
    std::size_t depth = 1;
    std::size_t batch = 1;

    bool operator==(const Shape4&) const = default;

    /// Per-sample feature count (length * height * depth).
    std::size_t features() const {
        return detail::checked_mul(detail::checked_mul(length, height, "Shape4"), depth, "Shape4");
    }

    std::size_t elements() const { return detail::checked_mul(features(), batch, "Shape4"); }

    void validate() const {
        if (length == 0 || height == 0 || depth == 0 || batch == 0) {
            raise(ErrorCode::ShapeMismatch, "Shape4 dimensions must all be >= 1, got " + to_string());
        }
        elements(); // overflow check
    }

    std::string to_string() const {
        return std::to_string(length) + "x" + std::to_string(height) + "x" +
               std::to_string(depth) + "x" + std::to_string(batch);
    }
};

/// Dense 4-D tensor of doubles.
///
/// Canonical memory order is batch-major: the flat index of (l, h, d, b) is
/// ((b * depth + d) * height + h) * length + l, so each sample's block is
/// contiguous and length varies fastest.
class Tensor4 {
public:
    Tensor4() : shape_{1, 1, 1, 1}, data_(1, 0.0) {}

    explicit Tensor4(Shape4 shape) : shape_(shape) {
        shape_.validate();
        data_.assign(shape_.elements(), 0.0);
    }

    Tensor4(Shape4 shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
        shape_.validate();
        if (data_.size() != shape_.elements()) {
            raise(ErrorCode::ShapeMismatch,
                  "data length " + std::to_string(data_.size()) + " does not match shape " +
                      shape_.to_string());
        }
        for (double v : data_) {
            if (!std::isfinite(v)) raise(ErrorCode::NonFinite, "tensor holds a non-finite value");
        }
    }

    const Shape4& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    std::size_t index(std::size_t l, std::size_t h, std::size_t d, std::size_t b) const {
        return ((b * shape_.depth + d) * shape_.height + h) * shape_.length + l;
    }

    double& at(std::size_t l, std::size_t h, std::size_t d, std::size_t b) {
        return data_[index(l, h, d, b)];
    }
    double at(std::size_t l, std::size_t h, std::size_t d, std::size_t b) const {
        return data_[index(l, h, d, b)];
    }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    Shape4 shape_;
    std::vector<double> data_;
};

/// Row-major 2-D matrix; the (samples x features) workhorse shared by the
/// flattener, the regressor and the data loader.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), values(detail::checked_mul(r, c, "Matrix"), fill) {}

    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Geometry of one convolution: input size I, filter size F, padding P,
/// stride S and filter count N.
struct ConvGeometry {
    std::size_t input_size = 1;   // I
    std::size_t filter_size = 1;  // F
    std::size_t padding = 0;      // P
    std::size_t stride = 1;       // S
    std::size_t filter_count = 1; // N

    void validate() const {
        if (input_size == 0 || filter_size == 0 || stride == 0 || filter_count == 0) {
            raise(ErrorCode::ShapeMismatch, "ConvGeometry fields I, F, S, N must all be >= 1");
        }
    }
};

/// Output (length, channels) of a convolution layer: ((I - F + 2P)/S + 1, N).
inline std::pair<std::size_t, std::size_t> conv_output_shape(const ConvGeometry& g) {
    g.validate();
    std::size_t extent = g.input_size + 2 * g.padding;
    if (g.filter_size > extent) {
        raise(ErrorCode::NegativeExtent,
              "filter size " + std::to_string(g.filter_size) + " exceeds padded input " +
                  std::to_string(extent));
    }
    std::size_t span = extent - g.filter_size;
    if (span % g.stride != 0) {
        raise(ErrorCode::NonDivisibleStride,
              "(I - F + 2P) = " + std::to_string(span) + " is not divisible by stride " +
                  std::to_string(g.stride));
    }
    return {span / g.stride + 1, g.filter_count};
}

/// Output (length, channels) of a max-pooling layer: (I/S, N).
/// Uses floor division; a dropped remainder is reported on stderr.
inline std::pair<std::size_t, std::size_t> pool_output_shape(std::size_t input_size,
                                                             std::size_t pool_stride,
                                                             std::size_t channels) {
    if (pool_stride == 0 || channels == 0) {
        raise(ErrorCode::ShapeMismatch, "pool stride and channel count must be >= 1");
    }
    if (input_size < pool_stride) {
        raise(ErrorCode::PoolTooLarge,
              "pool stride " + std::to_string(pool_stride) + " exceeds input size " +
                  std::to_string(input_size));
    }
    if (input_size % pool_stride != 0) {
        std::fprintf(stderr,
                     "warning: max-pool input %zu not divisible by stride %zu; trailing %zu "
                     "position(s) dropped\n",
                     input_size, pool_stride, input_size % pool_stride);
    }
    return {input_size / pool_stride, channels};
}

/// Flattens a tensor to (batch x features). Row b is sample b's block in
/// canonical order; no element is reordered or dropped.
inline Matrix flatten(const Tensor4& t) {
    std::size_t features = t.shape().features();
    Matrix out(t.shape().batch, features);
    out.values = t.data(); // batch-major layout: each sample is already one contiguous row
    return out;
}

/// Inverse of flatten for a known shape; round-trips bit-exactly.
inline Tensor4 unflatten(const Matrix& m, Shape4 shape) {
    if (m.rows != shape.batch || m.cols != shape.features()) {
        raise(ErrorCode::ShapeMismatch,
              "matrix " + std::to_string(m.rows) + "x" + std::to_string(m.cols) +
                  " cannot fill shape " + shape.to_string());
    }
    return Tensor4(shape, m.values);
}

} // namespace ecf
