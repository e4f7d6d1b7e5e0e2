#pragma once

// Heterogeneous filtering: a grid of channel-mixing weights pinned over the half-spectrum plane,
// bilinearly interpolated to every bin and applied to that bin's channel vector.
//
// Anchor (r, c) sits at normalized position (r / (rows - 1), c / (cols - 1)); spectrum row 0 maps
// to 0 and row H-1 to 1, column 0 (DC) to 0 and column W/2 (Nyquist) to 1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shint/error.hpp"
#include "shint/sht_io.hpp"
#include "shint/tensor.hpp"

namespace shint {

enum class FilterMode : std::uint8_t { diagonal = 0, full_matrix = 1 };

class HeFilterParams {
public:
    HeFilterParams(std::size_t channels, FilterMode mode = FilterMode::diagonal, std::size_t grid_rows = 3,
                   std::size_t grid_cols = 2)
        : rows_(grid_rows), cols_(grid_cols), k_(channels), mode_(mode) {
        if (rows_ < 2 || cols_ < 2)
            throw ShapeError("hefilter grid needs at least 2x2 anchors, got " + std::to_string(rows_) + "x" +
                             std::to_string(cols_));
        if (k_ == 0)
            throw ShapeError("hefilter needs at least one channel");
        weights_.assign(rows_ * cols_ * anchor_size(), cdouble{});
    }

    /// Every anchor equal to `value` times the identity map.
    static HeFilterParams uniform(std::size_t channels, cdouble value, FilterMode mode = FilterMode::diagonal,
                                  std::size_t grid_rows = 3, std::size_t grid_cols = 2) {
        HeFilterParams p(channels, mode, grid_rows, grid_cols);
        for (std::size_t r = 0; r < grid_rows; ++r)
            for (std::size_t c = 0; c < grid_cols; ++c)
                p.set_anchor_identity(r, c, value);
        return p;
    }

    static HeFilterParams identity(std::size_t channels, FilterMode mode = FilterMode::diagonal,
                                   std::size_t grid_rows = 3, std::size_t grid_cols = 2) {
        return uniform(channels, 1.0, mode, grid_rows, grid_cols);
    }

    std::size_t grid_rows() const { return rows_; }
    std::size_t grid_cols() const { return cols_; }
    std::size_t channels() const { return k_; }
    FilterMode mode() const { return mode_; }
    std::size_t anchor_count() const { return rows_ * cols_; }
    /// K weights per anchor in diagonal mode, K*K (row-major) in full_matrix mode.
    std::size_t anchor_size() const { return mode_ == FilterMode::diagonal ? k_ : k_ * k_; }

    std::span<cdouble> anchor(std::size_t r, std::size_t c) {
        return {weights_.data() + (r * cols_ + c) * anchor_size(), anchor_size()};
    }
    std::span<const cdouble> anchor(std::size_t r, std::size_t c) const {
        return {weights_.data() + (r * cols_ + c) * anchor_size(), anchor_size()};
    }

    void set_anchor_identity(std::size_t r, std::size_t c, cdouble value) {
        auto a = anchor(r, c);
        std::fill(a.begin(), a.end(), cdouble{});
        for (std::size_t k = 0; k < k_; ++k)
            a[mode_ == FilterMode::diagonal ? k : k * k_ + k] = value;
    }

    std::span<cdouble> weights() { return weights_; }
    std::span<const cdouble> weights() const { return weights_; }

    bool same_shape(const HeFilterParams& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && k_ == o.k_ && mode_ == o.mode_;
    }

    void require_finite() const {
        for (const auto& w : weights_)
            if (!detail::finite(w))
                throw ValueError("hefilter weights must be finite");
    }

    friend bool operator==(const HeFilterParams& a, const HeFilterParams& b) {
        return a.same_shape(b) && a.weights_ == b.weights_;
    }

private:
    std::size_t rows_, cols_, k_;
    FilterMode mode_;
    std::vector<cdouble> weights_;
};

/// Position of one bin inside the anchor grid: lower-left anchor cell plus fractional offsets.
struct BilinearStencil {
    std::size_t r0, c0;
    double tr, tc;

    /// Coefficient of anchor (r0 + dr, c0 + dc); the four sum to one.
    double coefficient(std::size_t dr, std::size_t dc) const {
        return (dr ? tr : 1.0 - tr) * (dc ? tc : 1.0 - tc);
    }
};

inline BilinearStencil bilinear_stencil(std::size_t i, std::size_t height, std::size_t j, std::size_t spec_width,
                                        std::size_t grid_rows, std::size_t grid_cols) {
    auto locate = [](std::size_t idx, std::size_t extent, std::size_t anchors, std::size_t& cell, double& t) {
        const double pos = static_cast<double>(idx * (anchors - 1)) / static_cast<double>(extent - 1);
        cell = std::min(static_cast<std::size_t>(std::floor(pos)), anchors - 2);
        t = pos - static_cast<double>(cell);
    };
    BilinearStencil s{};
    locate(i, height, grid_rows, s.r0, s.tr);
    locate(j, spec_width, grid_cols, s.c0, s.tc);
    return s;
}

namespace detail {

inline cdouble clerp(cdouble a, cdouble b, double t) {
    return {std::lerp(a.real(), b.real(), t), std::lerp(a.imag(), b.imag(), t)};
}

/// Interpolated weight at one bin. Nested std::lerp keeps equal anchors and anchor positions exact.
inline void interpolate_weights(const HeFilterParams& p, const BilinearStencil& st, std::span<cdouble> out) {
    auto a00 = p.anchor(st.r0, st.c0), a10 = p.anchor(st.r0 + 1, st.c0);
    auto a01 = p.anchor(st.r0, st.c0 + 1), a11 = p.anchor(st.r0 + 1, st.c0 + 1);
    for (std::size_t n = 0; n < out.size(); ++n)
        out[n] = clerp(clerp(a00[n], a10[n], st.tr), clerp(a01[n], a11[n], st.tr), st.tc);
}

inline void require_filter_fits(const SpectralTensor& s, const HeFilterParams& p, const char* what) {
    if (s.channels() != p.channels())
        throw ShapeError(std::string(what) + ": spectrum has " + std::to_string(s.channels()) +
                         " channels, filter expects " + std::to_string(p.channels()));
}

} // namespace detail

/// Interpolated weight at bin (i, j) of an H x spec_width spectrum.
inline std::vector<cdouble> hefilter_weight_at(const HeFilterParams& p, std::size_t i, std::size_t height,
                                               std::size_t j, std::size_t spec_width) {
    std::vector<cdouble> w(p.anchor_size());
    detail::interpolate_weights(p, bilinear_stencil(i, height, j, spec_width, p.grid_rows(), p.grid_cols()), w);
    return w;
}

inline SpectralTensor hefilter_apply(const SpectralTensor& s, const HeFilterParams& p) {
    detail::require_filter_fits(s, p, "hefilter_apply");
    p.require_finite();
    const std::size_t K = p.channels(), H = s.height(), Ws = s.width();
    SpectralTensor out(K, H, Ws);
    std::vector<cdouble> w(p.anchor_size());
    for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < Ws; ++j) {
            detail::interpolate_weights(p, bilinear_stencil(i, H, j, Ws, p.grid_rows(), p.grid_cols()), w);
            if (p.mode() == FilterMode::diagonal) {
                for (std::size_t k = 0; k < K; ++k)
                    out(k, i, j) = w[k] * s(k, i, j);
            } else {
                for (std::size_t a = 0; a < K; ++a) {
                    cdouble acc{};
                    for (std::size_t b = 0; b < K; ++b)
                        acc += w[a * K + b] * s(b, i, j);
                    out(a, i, j) = acc;
                }
            }
        }
    }
    return out;
}

struct HeFilterGrad {
    SpectralTensor input;
    HeFilterParams params;
};

/// Gradients of a real loss given its gradient `upstream` with respect to hefilter_apply(s, p).
/// Complex entries carry (dL/dre, dL/dim). Anchor gradients accumulate in row-major bin order.
inline HeFilterGrad hefilter_backward(const SpectralTensor& s, const HeFilterParams& p, const SpectralTensor& upstream) {
    detail::require_filter_fits(s, p, "hefilter_backward");
    require_same_shape(s, upstream, "hefilter_backward");
    const std::size_t K = p.channels(), H = s.height(), Ws = s.width();
    HeFilterGrad g{SpectralTensor(K, H, Ws), HeFilterParams(K, p.mode(), p.grid_rows(), p.grid_cols())};
    std::vector<cdouble> w(p.anchor_size()), gw(p.anchor_size());
    for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < Ws; ++j) {
            const auto st = bilinear_stencil(i, H, j, Ws, p.grid_rows(), p.grid_cols());
            detail::interpolate_weights(p, st, w);
            if (p.mode() == FilterMode::diagonal) {
                for (std::size_t k = 0; k < K; ++k) {
                    g.input(k, i, j) = std::conj(w[k]) * upstream(k, i, j);
                    gw[k] = std::conj(s(k, i, j)) * upstream(k, i, j);
                }
            } else {
                for (std::size_t b = 0; b < K; ++b) {
                    cdouble acc{};
                    for (std::size_t a = 0; a < K; ++a)
                        acc += std::conj(w[a * K + b]) * upstream(a, i, j);
                    g.input(b, i, j) = acc;
                }
                for (std::size_t a = 0; a < K; ++a)
                    for (std::size_t b = 0; b < K; ++b)
                        gw[a * K + b] = upstream(a, i, j) * std::conj(s(b, i, j));
            }
            for (std::size_t dr = 0; dr < 2; ++dr) {
                for (std::size_t dc = 0; dc < 2; ++dc) {
                    const double beta = st.coefficient(dr, dc);
                    auto ga = g.params.anchor(st.r0 + dr, st.c0 + dc);
                    for (std::size_t n = 0; n < gw.size(); ++n)
                        ga[n] += beta * gw[n];
                }
            }
        }
    }
    return g;
}

// HEF1 parameter file: a 16-byte header followed by an SHT1 complex tensor of shape
// (grid_rows * grid_cols) x K x K. Header: magic "HEF1", u8 mode, u8 grid_rows, u8 grid_cols,
// u8 pad (0), u32 K, u32 reserved (0). Diagonal mode stores each anchor's K weights in row 0
// of its K x K slot; the other rows are zero.

inline std::vector<std::uint8_t> encode_hefilter(const HeFilterParams& p) {
    if (p.grid_rows() > 255 || p.grid_cols() > 255)
        throw ShapeError("HEF1 supports at most 255 anchors per axis");
    const std::size_t K = p.channels();
    std::vector<std::uint8_t> out{'H', 'E', 'F', '1'};
    io::put_u8(out, static_cast<std::uint8_t>(p.mode()));
    io::put_u8(out, static_cast<std::uint8_t>(p.grid_rows()));
    io::put_u8(out, static_cast<std::uint8_t>(p.grid_cols()));
    io::put_u8(out, 0);
    io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(K));
    io::put_le<std::uint32_t>(out, 0);

    ShtRecord rec{ShtKind::complex, {p.anchor_count(), K, K}, {}};
    rec.values.assign(p.anchor_count() * K * K * 2, 0.0);
    for (std::size_t q = 0; q < p.anchor_count(); ++q) {
        auto a = p.anchor(q / p.grid_cols(), q % p.grid_cols());
        for (std::size_t n = 0; n < a.size(); ++n) {
            const std::size_t slot = q * K * K + n; // diagonal: row 0, column n
            rec.values[2 * slot] = a[n].real();
            rec.values[2 * slot + 1] = a[n].imag();
        }
    }
    encode_sht(out, rec);
    return out;
}

inline HeFilterParams decode_hefilter(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    r.expect_magic("HEF1");
    const auto mode = r.u8("mode");
    if (mode > 1)
        throw FormatError("unknown hefilter mode " + std::to_string(mode));
    const auto rows = r.u8("grid_rows");
    const auto cols = r.u8("grid_cols");
    r.u8("pad");
    const auto K = r.le<std::uint32_t>("K");
    r.le<std::uint32_t>("reserved");
    const auto rec = decode_sht(r);
    if (r.remaining() != 0)
        throw FormatError("trailing bytes after hefilter payload");
    if (rec.kind != ShtKind::complex || rec.dims[0] != std::uint64_t(rows) * cols || rec.dims[1] != K ||
        rec.dims[2] != K)
        throw FormatError("hefilter payload shape does not match its header");
    HeFilterParams p(K, static_cast<FilterMode>(mode), rows, cols);
    const auto vals = complex_values(rec);
    for (std::size_t q = 0; q < p.anchor_count(); ++q) {
        auto a = p.anchor(q / cols, q % cols);
        for (std::size_t n = 0; n < a.size(); ++n)
            a[n] = vals[q * K * K + n];
    }
    p.require_finite();
    return p;
}

inline void write_hefilter(const std::filesystem::path& path, const HeFilterParams& p) {
    io::write_file_atomic(path, encode_hefilter(p));
}

inline HeFilterParams read_hefilter(const std::filesystem::path& path) {
    return decode_hefilter(io::read_file(path));
}

} // namespace shint
