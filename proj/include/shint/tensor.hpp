#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "shint/error.hpp"

namespace shint {

using cdouble = std::complex<double>;

namespace detail {

inline std::string dims_str(std::size_t c, std::size_t h, std::size_t w) {
    return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
}

template <std::floating_point R>
bool finite(R v) {
    return std::isfinite(v);
}
template <std::floating_point R>
bool finite(const std::complex<R>& v) {
    return std::isfinite(v.real()) && std::isfinite(v.imag());
}

} // namespace detail

/// Real C x H x W signal. H and W must be even so the spectrum splits dyadically.
struct SpatialLayout {
    static constexpr const char* name = "spatial";
    static void check(std::size_t c, std::size_t h, std::size_t w) {
        if (c == 0)
            throw ShapeError("spatial tensor needs at least one channel");
        if (h < 2 || w < 2 || h % 2 != 0 || w % 2 != 0)
            throw ShapeError("spatial tensor dims must be even and >= 2, got " + detail::dims_str(c, h, w));
    }
};

/// Half spectrum of a real C x H x W signal: H rows (DC row shifted to H/2), W/2+1 columns (DC at 0).
struct SpectralLayout {
    static constexpr const char* name = "spectral";
    static void check(std::size_t c, std::size_t h, std::size_t w) {
        if (c == 0)
            throw ShapeError("spectral tensor needs at least one channel");
        if (h < 2 || h % 2 != 0 || w < 2)
            throw ShapeError("spectral tensor needs even height >= 2 and width >= 2, got " +
                             detail::dims_str(c, h, w));
    }
};

/// Dense row-major channel x row x column array with layout invariants checked at construction.
template <typename T, typename Layout>
class Tensor {
public:
    using value_type = T;

    Tensor(std::size_t channels, std::size_t height, std::size_t width)
        : c_(channels), h_(height), w_(width) {
        Layout::check(c_, h_, w_);
        data_.assign(c_ * h_ * w_, T{});
    }

    Tensor(std::size_t channels, std::size_t height, std::size_t width, std::vector<T> data)
        : c_(channels), h_(height), w_(width), data_(std::move(data)) {
        Layout::check(c_, h_, w_);
        if (data_.size() != c_ * h_ * w_)
            throw ShapeError(std::string(Layout::name) + " tensor data length " + std::to_string(data_.size()) +
                             " does not match " + detail::dims_str(c_, h_, w_));
        for (const auto& v : data_)
            if (!detail::finite(v))
                throw ValueError(std::string(Layout::name) + " tensor contains non-finite values");
    }

    std::size_t channels() const { return c_; }
    std::size_t height() const { return h_; }
    std::size_t width() const { return w_; }
    std::size_t plane_size() const { return h_ * w_; }
    std::size_t size() const { return data_.size(); }

    /// Width of the real signal this half spectrum came from.
    std::size_t source_width() const
        requires std::is_same_v<Layout, SpectralLayout>
    {
        return 2 * (w_ - 1);
    }

    T& operator()(std::size_t c, std::size_t i, std::size_t j) { return data_[(c * h_ + i) * w_ + j]; }
    const T& operator()(std::size_t c, std::size_t i, std::size_t j) const { return data_[(c * h_ + i) * w_ + j]; }

    std::span<T> plane(std::size_t c) { return {data_.data() + c * h_ * w_, h_ * w_}; }
    std::span<const T> plane(std::size_t c) const { return {data_.data() + c * h_ * w_, h_ * w_}; }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    const std::vector<T>& values() const { return data_; }

    bool same_shape(const Tensor& o) const { return c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }
    std::string shape_str() const { return detail::dims_str(c_, h_, w_); }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](const T& v) { return detail::finite(v); });
    }

    /// Channels [first, first + count) as a new tensor.
    Tensor slice_channels(std::size_t first, std::size_t count) const {
        if (count == 0 || first + count > c_)
            throw ShapeError("channel slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
                             ") out of range for " + shape_str());
        auto b = data_.begin() + static_cast<std::ptrdiff_t>(first * h_ * w_);
        return Tensor(count, h_, w_, std::vector<T>(b, b + static_cast<std::ptrdiff_t>(count * h_ * w_)));
    }

    friend bool operator==(const Tensor& a, const Tensor& b) { return a.same_shape(b) && a.data_ == b.data_; }

private:
    std::size_t c_, h_, w_;
    std::vector<T> data_;
};

using SpatialTensor = Tensor<double, SpatialLayout>;
using SpectralTensor = Tensor<cdouble, SpectralLayout>;

template <typename T, typename L>
void require_same_shape(const Tensor<T, L>& a, const Tensor<T, L>& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

/// Elementwise alpha*a + beta*b.
inline SpectralTensor spectral_axpy(cdouble alpha, const SpectralTensor& a, cdouble beta, const SpectralTensor& b) {
    require_same_shape(a, b, "spectral_axpy");
    SpectralTensor out(a.channels(), a.height(), a.width());
    auto o = out.data();
    auto x = a.data();
    auto y = b.data();
    for (std::size_t n = 0; n < o.size(); ++n)
        o[n] = alpha * x[n] + beta * y[n];
    return out;
}

/// Elementwise alpha*a + beta*b for real tensors.
inline SpatialTensor spatial_axpy(double alpha, const SpatialTensor& a, double beta, const SpatialTensor& b) {
    require_same_shape(a, b, "spatial_axpy");
    SpatialTensor out(a.channels(), a.height(), a.width());
    auto o = out.data();
    auto x = a.data();
    auto y = b.data();
    for (std::size_t n = 0; n < o.size(); ++n)
        o[n] = alpha * x[n] + beta * y[n];
    return out;
}

template <typename T, typename L>
double max_abs_diff(const Tensor<T, L>& a, const Tensor<T, L>& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n)
        m = std::max(m, static_cast<double>(std::abs(a.data()[n] - b.data()[n])));
    return m;
}

/// Real inner product over stacked components: sum re*re' + im*im' for complex data.
template <typename T, typename L>
double real_dot(const Tensor<T, L>& a, const Tensor<T, L>& b) {
    require_same_shape(a, b, "real_dot");
    double s = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        if constexpr (std::is_same_v<T, cdouble>)
            s += a.data()[n].real() * b.data()[n].real() + a.data()[n].imag() * b.data()[n].imag();
        else
            s += a.data()[n] * b.data()[n];
    }
    return s;
}

} // namespace shint
