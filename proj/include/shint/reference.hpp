#pragma once

// Extended-precision forward passes written as direct DFT sums, independent of the fast kernels.
// Finite differences taken through these carry far less rounding noise than the double pipeline.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "shint/grad.hpp"
#include "shint/hefilter.hpp"
#include "shint/shu.hpp"
#include "shint/tensor.hpp"

namespace shint::reference {

using real = long double;
using complex = std::complex<real>;
using Spatial = Tensor<real, SpatialLayout>;
using Spectral = Tensor<complex, SpectralLayout>;

inline Spatial widen(const SpatialTensor& x) {
    return Spatial(x.channels(), x.height(), x.width(), {x.data().begin(), x.data().end()});
}

inline Spectral widen(const SpectralTensor& s) {
    return Spectral(s.channels(), s.height(), s.width(), {s.data().begin(), s.data().end()});
}

inline Spatial spatial_from(std::span<const real> v, std::size_t c, std::size_t h, std::size_t w) {
    return Spatial(c, h, w, {v.begin(), v.end()});
}

/// Re/im interleaved per bin.
inline Spectral spectral_from(std::span<const real> v, std::size_t c, std::size_t h, std::size_t w) {
    std::vector<complex> z(v.size() / 2);
    for (std::size_t n = 0; n < z.size(); ++n)
        z[n] = {v[2 * n], v[2 * n + 1]};
    return Spectral(c, h, w, std::move(z));
}

namespace detail {

/// exp(sign * 2 pi i k / n) for k = 0 .. n-1.
inline std::vector<complex> unit_roots(std::size_t n, int sign) {
    std::vector<complex> r(n);
    for (std::size_t k = 0; k < n; ++k) {
        const real a = 2 * std::numbers::pi_v<real> * static_cast<real>(k) / static_cast<real>(n);
        r[k] = {std::cos(a), sign * std::sin(a)};
    }
    return r;
}

} // namespace detail

inline Spectral rfft2(const Spatial& x) {
    const std::size_t C = x.channels(), H = x.height(), W = x.width(), Ws = W / 2 + 1;
    const auto rw = detail::unit_roots(W, -1), rh = detail::unit_roots(H, -1);
    Spectral out(C, H, Ws);
    std::vector<complex> rows(H * Ws);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t m = 0; m < H; ++m)
            for (std::size_t j = 0; j < Ws; ++j) {
                complex acc{};
                for (std::size_t n = 0; n < W; ++n)
                    acc += x(c, m, n) * rw[(j * n) % W];
                rows[m * Ws + j] = acc;
            }
        for (std::size_t k = 0; k < H; ++k)
            for (std::size_t j = 0; j < Ws; ++j) {
                complex acc{};
                for (std::size_t m = 0; m < H; ++m)
                    acc += rows[m * Ws + j] * rh[(k * m) % H];
                out(c, (k + H / 2) % H, j) = acc;
            }
    }
    return out;
}

/// Inverse with the same reading of the half spectrum as inverse_rfft2: only the real part of the
/// DC and Nyquist columns enters after the column pass.
inline Spatial irfft2(const Spectral& s) {
    const std::size_t C = s.channels(), H = s.height(), Ws = s.width(), W = s.source_width();
    const auto rw = detail::unit_roots(W, 1), rh = detail::unit_roots(H, 1);
    const real scale = real{1} / static_cast<real>(H * W);
    Spatial out(C, H, W);
    std::vector<complex> cols(H * Ws);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t m = 0; m < H; ++m)
            for (std::size_t j = 0; j < Ws; ++j) {
                complex acc{};
                for (std::size_t k = 0; k < H; ++k)
                    acc += s(c, (k + H / 2) % H, j) * rh[(k * m) % H];
                cols[m * Ws + j] = acc;
            }
        for (std::size_t m = 0; m < H; ++m)
            for (std::size_t n = 0; n < W; ++n) {
                const complex* z = &cols[m * Ws];
                real acc = z[0].real() + (n % 2 ? -z[W / 2].real() : z[W / 2].real());
                for (std::size_t j = 1; j < W / 2; ++j)
                    acc += 2 * (z[j] * rw[(j * n) % W]).real();
                out(c, m, n) = acc * scale;
            }
    }
    return out;
}

/// Mix weights in ParamVector order: K*K complex entries re/im interleaved, or the 2K x 2K real block.
inline Spectral channel_mix(const Spectral& s, MixMode mode, std::span<const real> w) {
    const std::size_t K = s.channels(), P = s.plane_size();
    Spectral out(K, s.height(), s.width());
    auto in = s.data();
    auto o = out.data();
    for (std::size_t n = 0; n < P; ++n)
        for (std::size_t a = 0; a < K; ++a) {
            complex acc{};
            for (std::size_t b = 0; b < K; ++b) {
                const complex v = in[b * P + n];
                if (mode == MixMode::complex_matrix) {
                    acc += complex{w[2 * (a * K + b)], w[2 * (a * K + b) + 1]} * v;
                } else {
                    const std::size_t re = a * 2 * K, im = (K + a) * 2 * K;
                    acc += complex{w[re + b] * v.real() + w[re + K + b] * v.imag(),
                                   w[im + b] * v.real() + w[im + K + b] * v.imag()};
                }
            }
            o[a * P + n] = acc;
        }
    return out;
}

inline Spectral split_relu(const Spectral& s) {
    Spectral out = s;
    for (auto& z : out.data())
        z = {std::max(z.real(), real{0}), std::max(z.imag(), real{0})};
    return out;
}

/// Anchor weights in ParamVector order, re/im interleaved.
inline Spectral hefilter(const Spectral& s, FilterMode mode, std::size_t grid_rows, std::size_t grid_cols,
                         std::span<const real> w) {
    const std::size_t K = s.channels(), H = s.height(), Ws = s.width();
    const std::size_t A = mode == FilterMode::diagonal ? K : K * K;
    auto locate = [](std::size_t idx, std::size_t extent, std::size_t anchors, std::size_t& cell, real& t) {
        const real pos = static_cast<real>(idx) * static_cast<real>(anchors - 1) / static_cast<real>(extent - 1);
        cell = std::min(static_cast<std::size_t>(std::floor(pos)), anchors - 2);
        t = pos - static_cast<real>(cell);
    };
    auto anchor = [&](std::size_t r, std::size_t c, std::size_t n) {
        const std::size_t at = 2 * ((r * grid_cols + c) * A + n);
        return complex{w[at], w[at + 1]};
    };
    Spectral out(K, H, Ws);
    std::vector<complex> wt(A);
    for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < Ws; ++j) {
            std::size_t r0, c0;
            real tr, tc;
            locate(i, H, grid_rows, r0, tr);
            locate(j, Ws, grid_cols, c0, tc);
            for (std::size_t n = 0; n < A; ++n)
                wt[n] = (1 - tr) * (1 - tc) * anchor(r0, c0, n) + tr * (1 - tc) * anchor(r0 + 1, c0, n) +
                        (1 - tr) * tc * anchor(r0, c0 + 1, n) + tr * tc * anchor(r0 + 1, c0 + 1, n);
            for (std::size_t a = 0; a < K; ++a) {
                if (mode == FilterMode::diagonal) {
                    out(a, i, j) = wt[a] * s(a, i, j);
                } else {
                    complex acc{};
                    for (std::size_t b = 0; b < K; ++b)
                        acc += wt[a * K + b] * s(b, i, j);
                    out(a, i, j) = acc;
                }
            }
        }
    return out;
}

/// Residual unit; `theta` holds the mix then the anchors in ParamVector order for the shape of `p`.
inline Spatial shu_forward(const Spatial& x, const ShuParams& p, std::span<const real> theta) {
    const std::size_t K = p.hint_channels, first = p.first_hint_channel();
    const std::size_t mix_count = param_count(p) - 2 * p.hef.anchor_count() * p.hef.anchor_size();
    const auto pre = channel_mix(rfft2(x.slice_channels(first, K)), p.mix.mode(), theta.subspan(0, mix_count));
    const auto g = hefilter(split_relu(pre), p.hef.mode(), p.hef.grid_rows(), p.hef.grid_cols(),
                            theta.subspan(mix_count));
    const auto branch = irfft2(g);
    Spatial out = x;
    auto o = out.data().subspan(first * x.plane_size());
    for (std::size_t n = 0; n < o.size(); ++n)
        o[n] += branch.data()[n];
    return out;
}

inline real dot(const Spatial& a, const SpatialTensor& b) {
    real s = 0;
    for (std::size_t n = 0; n < a.size(); ++n)
        s += a.data()[n] * b.data()[n];
    return s;
}

inline real dot(const Spectral& a, const SpectralTensor& b) {
    real s = 0;
    for (std::size_t n = 0; n < a.size(); ++n)
        s += a.data()[n].real() * b.data()[n].real() + a.data()[n].imag() * b.data()[n].imag();
    return s;
}

/// Central differences (L(t + h e_i) - L(t - h e_i)) / 2h with the loss and the perturbed point
/// held in extended precision.
inline ParamVector central_differences(const std::function<real(std::span<const real>)>& loss,
                                       std::span<const double> point, double h) {
    if (!(h > 0.0))
        throw ValueError("finite difference step must be positive");
    std::vector<real> theta(point.begin(), point.end());
    ParamVector grad{std::vector<double>(theta.size())};
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const real orig = theta[i];
        theta[i] = orig + h;
        const real up = loss(theta);
        theta[i] = orig - h;
        const real down = loss(theta);
        theta[i] = orig;
        if (!std::isfinite(up) || !std::isfinite(down))
            throw ValueError("loss is not finite at coordinate " + std::to_string(i));
        grad[i] = static_cast<double>((up - down) / (2 * static_cast<real>(h)));
    }
    return grad;
}

} // namespace shint::reference
