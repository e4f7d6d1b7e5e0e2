#pragma once

// 2D real FFT in the row-shifted half-spectrum layout.
//
// forward:  X(k, j) = sum_{m,n} x(m, n) exp(-2 pi i (k m / H + j n / W)),  j = 0 .. W/2
//           stored at row (k + H/2) mod H, column j.
// inverse:  x(m, n) = 1/(HW) sum_j c_j Re( sum_k X(k, j) exp(2 pi i (k m / H + j n / W)) )
//           with c_j = 1 on the DC and Nyquist columns and 2 on interior columns.
//
// The inverse is defined for every stored value, Hermitian-consistent or not, so it is a
// real-linear map and has an exact adjoint (see rfft2_adjoint / irfft2_adjoint).

#include <complex>
#include <cstddef>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "shint/tensor.hpp"

namespace shint {

namespace detail {

inline Eigen::FFT<double>& fft_engine() {
    thread_local Eigen::FFT<double> engine = [] {
        Eigen::FFT<double> f;
        f.SetFlag(Eigen::FFT<double>::Unscaled);
        return f;
    }();
    return engine;
}

inline std::size_t shifted_row(std::size_t k, std::size_t h) { return (k + h / 2) % h; }

} // namespace detail

/// Multiplicity of stored column j in the full spectrum of a width-W real signal.
inline double column_multiplicity(std::size_t j, std::size_t spec_width) {
    return (j == 0 || j + 1 == spec_width) ? 1.0 : 2.0;
}

inline SpectralTensor forward_rfft2(const SpatialTensor& x) {
    const std::size_t H = x.height(), W = x.width(), Ws = W / 2 + 1;
    SpectralTensor out(x.channels(), H, Ws);
    auto& fft = detail::fft_engine();
    std::vector<cdouble> row_in(W), row_out(W), col_in(H), col_out(H);
    std::vector<cdouble> tmp(H * Ws);
    for (std::size_t c = 0; c < x.channels(); ++c) {
        for (std::size_t m = 0; m < H; ++m) {
            for (std::size_t n = 0; n < W; ++n)
                row_in[n] = x(c, m, n);
            fft.fwd(row_out, row_in);
            for (std::size_t j = 0; j < Ws; ++j)
                tmp[m * Ws + j] = row_out[j];
        }
        for (std::size_t j = 0; j < Ws; ++j) {
            for (std::size_t m = 0; m < H; ++m)
                col_in[m] = tmp[m * Ws + j];
            fft.fwd(col_out, col_in);
            for (std::size_t k = 0; k < H; ++k)
                out(c, detail::shifted_row(k, H), j) = col_out[k];
        }
    }
    return out;
}

/// Inverse of forward_rfft2; target_width must equal 2 * (spec_width - 1).
inline SpatialTensor inverse_rfft2(const SpectralTensor& s, std::size_t target_width) {
    if (target_width != s.source_width())
        throw ShapeError("inverse_rfft2: target width " + std::to_string(target_width) +
                         " inconsistent with spectrum width " + std::to_string(s.width()));
    const std::size_t H = s.height(), Ws = s.width(), W = target_width;
    SpatialTensor out(s.channels(), H, W);
    auto& fft = detail::fft_engine();
    std::vector<cdouble> row_in(W), row_out(W), col_in(H), col_out(H);
    std::vector<cdouble> tmp(H * Ws);
    const double scale = 1.0 / static_cast<double>(H * W);
    for (std::size_t c = 0; c < s.channels(); ++c) {
        for (std::size_t j = 0; j < Ws; ++j) {
            for (std::size_t k = 0; k < H; ++k)
                col_in[k] = s(c, detail::shifted_row(k, H), j);
            fft.inv(col_out, col_in);
            for (std::size_t m = 0; m < H; ++m)
                tmp[m * Ws + j] = col_out[m];
        }
        for (std::size_t m = 0; m < H; ++m) {
            const cdouble* z = &tmp[m * Ws];
            row_in[0] = z[0].real();
            row_in[W / 2] = z[W / 2].real();
            for (std::size_t j = 1; j < W / 2; ++j) {
                row_in[j] = z[j];
                row_in[W - j] = std::conj(z[j]);
            }
            fft.inv(row_out, row_in);
            for (std::size_t n = 0; n < W; ++n)
                out(c, m, n) = row_out[n].real() * scale;
        }
    }
    return out;
}

inline SpatialTensor inverse_rfft2(const SpectralTensor& s) { return inverse_rfft2(s, s.source_width()); }

/// Transpose of forward_rfft2 under the real inner product on stacked re/im components.
inline SpatialTensor rfft2_adjoint(const SpectralTensor& g) {
    const std::size_t H = g.height(), Ws = g.width(), W = g.source_width();
    SpectralTensor z = g;
    const double hw = static_cast<double>(H * W);
    for (std::size_t c = 0; c < z.channels(); ++c)
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < Ws; ++j)
                z(c, i, j) *= hw / column_multiplicity(j, Ws);
    return inverse_rfft2(z, W);
}

/// Transpose of inverse_rfft2 under the real inner product on stacked re/im components.
inline SpectralTensor irfft2_adjoint(const SpatialTensor& g) {
    SpectralTensor z = forward_rfft2(g);
    const std::size_t H = z.height(), Ws = z.width();
    const double hw = static_cast<double>(H * g.width());
    for (std::size_t c = 0; c < z.channels(); ++c)
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < Ws; ++j)
                z(c, i, j) *= column_multiplicity(j, Ws) / hw;
    return z;
}

/// Full H x W spectrum of one channel (row-shifted), the omitted columns filled by conjugate reflection.
inline std::vector<cdouble> full_spectrum(const SpectralTensor& s, std::size_t channel) {
    const std::size_t H = s.height(), Ws = s.width(), W = s.source_width();
    std::vector<cdouble> full(H * W);
    for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < Ws; ++j)
            full[i * W + j] = s(channel, i, j);
        // shifted row i holds frequency k = i - H/2; its mirror -k sits at row (H - i) mod H
        const std::size_t mirror = (H - i) % H;
        for (std::size_t j = Ws; j < W; ++j)
            full[i * W + j] = std::conj(s(channel, mirror, W - j));
    }
    return full;
}

} // namespace shint
