#pragma once

// Spectral hint unit. For an N-channel input x and hint width K, the last K channels go through
//
//     f = inverse_rfft2 . hefilter_apply . split_relu . channel_mix . forward_rfft2
//
// and are added back residually: x' = concat(x[0 .. N-K), x[N-K .. N) + f(x[N-K .. N))).
// No bias anywhere, so a zero channel mix makes the unit an exact identity.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shint/error.hpp"
#include "shint/fft.hpp"
#include "shint/hefilter.hpp"
#include "shint/spectral_split.hpp"
#include "shint/tensor.hpp"

namespace shint {

inline constexpr std::size_t default_hint_channels = 32;

enum class MixMode : std::uint8_t {
    complex_matrix = 0, ///< K x K complex matrix on the channel vector
    stacked_real = 1,   ///< 2K x 2K real matrix on (re_0 .. re_{K-1}, im_0 .. im_{K-1})
};

inline const char* to_string(MixMode m) { return m == MixMode::complex_matrix ? "complex" : "stacked"; }

inline MixMode parse_mix_mode(const std::string& s) {
    if (s == "complex")
        return MixMode::complex_matrix;
    if (s == "stacked")
        return MixMode::stacked_real;
    throw ValueError("unknown mix mode '" + s + "'");
}

/// The 1x1 convolution of the spectral transform: one channel map shared by every bin.
class ChannelMix {
public:
    explicit ChannelMix(std::size_t channels, MixMode mode = MixMode::complex_matrix) : k_(channels), mode_(mode) {
        if (k_ == 0)
            throw ShapeError("channel mix needs at least one channel");
        if (mode_ == MixMode::complex_matrix)
            complex_.assign(k_ * k_, cdouble{});
        else
            real_.assign(4 * k_ * k_, 0.0);
    }

    static ChannelMix identity(std::size_t channels, MixMode mode = MixMode::complex_matrix) {
        ChannelMix m(channels, mode);
        const std::size_t d = m.dim();
        for (std::size_t n = 0; n < d; ++n) {
            if (mode == MixMode::complex_matrix)
                m.complex_[n * d + n] = 1.0;
            else
                m.real_[n * d + n] = 1.0;
        }
        return m;
    }

    std::size_t channels() const { return k_; }
    MixMode mode() const { return mode_; }
    /// Side of the stored matrix: K, or 2K when stacked.
    std::size_t dim() const { return mode_ == MixMode::complex_matrix ? k_ : 2 * k_; }

    cdouble& complex_at(std::size_t a, std::size_t b) { return complex_.at(a * k_ + b); }
    cdouble complex_at(std::size_t a, std::size_t b) const { return complex_.at(a * k_ + b); }
    double& real_at(std::size_t p, std::size_t q) { return real_.at(p * 2 * k_ + q); }
    double real_at(std::size_t p, std::size_t q) const { return real_.at(p * 2 * k_ + q); }

    std::span<cdouble> complex_weights() { return complex_; }
    std::span<const cdouble> complex_weights() const { return complex_; }
    std::span<double> real_weights() { return real_; }
    std::span<const double> real_weights() const { return real_; }

    bool same_shape(const ChannelMix& o) const { return k_ == o.k_ && mode_ == o.mode_; }

    friend bool operator==(const ChannelMix& a, const ChannelMix& b) {
        return a.same_shape(b) && a.complex_ == b.complex_ && a.real_ == b.real_;
    }

private:
    std::size_t k_;
    MixMode mode_;
    std::vector<cdouble> complex_;
    std::vector<double> real_;
};

inline SpectralTensor channel_mix(const SpectralTensor& s, const ChannelMix& m) {
    const std::size_t K = m.channels();
    if (s.channels() != K)
        throw ShapeError("channel_mix: spectrum has " + std::to_string(s.channels()) + " channels, mix expects " +
                         std::to_string(K));
    SpectralTensor out(K, s.height(), s.width());
    const std::size_t P = s.plane_size();
    auto in = s.data();
    auto o = out.data();
    if (m.mode() == MixMode::complex_matrix) {
        for (std::size_t n = 0; n < P; ++n)
            for (std::size_t a = 0; a < K; ++a) {
                cdouble acc{};
                for (std::size_t b = 0; b < K; ++b)
                    acc += m.complex_at(a, b) * in[b * P + n];
                o[a * P + n] = acc;
            }
    } else {
        std::vector<double> v(2 * K);
        for (std::size_t n = 0; n < P; ++n) {
            for (std::size_t b = 0; b < K; ++b) {
                v[b] = in[b * P + n].real();
                v[K + b] = in[b * P + n].imag();
            }
            for (std::size_t a = 0; a < K; ++a) {
                double re = 0.0, im = 0.0;
                for (std::size_t q = 0; q < 2 * K; ++q) {
                    re += m.real_at(a, q) * v[q];
                    im += m.real_at(K + a, q) * v[q];
                }
                o[a * P + n] = {re, im};
            }
        }
    }
    return out;
}

struct ChannelMixGrad {
    SpectralTensor input;
    ChannelMix mix;
};

inline ChannelMixGrad channel_mix_backward(const SpectralTensor& s, const ChannelMix& m, const SpectralTensor& upstream) {
    const std::size_t K = m.channels();
    if (s.channels() != K)
        throw ShapeError("channel_mix_backward: channel mismatch");
    require_same_shape(s, upstream, "channel_mix_backward");
    ChannelMixGrad g{SpectralTensor(K, s.height(), s.width()), ChannelMix(K, m.mode())};
    const std::size_t P = s.plane_size();
    auto in = s.data();
    auto up = upstream.data();
    auto gi = g.input.data();
    if (m.mode() == MixMode::complex_matrix) {
        for (std::size_t n = 0; n < P; ++n)
            for (std::size_t b = 0; b < K; ++b) {
                cdouble acc{};
                for (std::size_t a = 0; a < K; ++a) {
                    acc += std::conj(m.complex_at(a, b)) * up[a * P + n];
                    g.mix.complex_at(a, b) += up[a * P + n] * std::conj(in[b * P + n]);
                }
                gi[b * P + n] = acc;
            }
    } else {
        std::vector<double> v(2 * K), gv(2 * K);
        for (std::size_t n = 0; n < P; ++n) {
            for (std::size_t b = 0; b < K; ++b) {
                v[b] = in[b * P + n].real();
                v[K + b] = in[b * P + n].imag();
                gv[b] = up[b * P + n].real();
                gv[K + b] = up[b * P + n].imag();
            }
            for (std::size_t q = 0; q < 2 * K; ++q) {
                double acc = 0.0;
                for (std::size_t p = 0; p < 2 * K; ++p) {
                    acc += m.real_at(p, q) * gv[p];
                    g.mix.real_at(p, q) += gv[p] * v[q];
                }
                if (q < K)
                    gi[q * P + n].real(acc);
                else
                    gi[(q - K) * P + n].imag(acc);
            }
        }
    }
    return g;
}

/// ReLU applied separately to the real and imaginary part of every bin.
inline SpectralTensor split_relu(const SpectralTensor& s) {
    SpectralTensor out(s.channels(), s.height(), s.width());
    auto in = s.data();
    auto o = out.data();
    for (std::size_t n = 0; n < o.size(); ++n)
        o[n] = {std::max(in[n].real(), 0.0), std::max(in[n].imag(), 0.0)};
    return out;
}

/// Subgradient 0 at a component equal to zero.
inline SpectralTensor split_relu_backward(const SpectralTensor& pre, const SpectralTensor& upstream) {
    require_same_shape(pre, upstream, "split_relu_backward");
    SpectralTensor out(pre.channels(), pre.height(), pre.width());
    auto in = pre.data();
    auto up = upstream.data();
    auto o = out.data();
    for (std::size_t n = 0; n < o.size(); ++n)
        o[n] = {in[n].real() > 0.0 ? up[n].real() : 0.0, in[n].imag() > 0.0 ? up[n].imag() : 0.0};
    return out;
}

struct PyramidConfig {
    std::size_t levels = 5;
    SplitKind kind = SplitKind::gaussian;
    double sigma_ratio = default_sigma_ratio;
};

struct ShuParams {
    std::size_t total_channels;
    std::size_t hint_channels;
    ChannelMix mix;
    HeFilterParams hef;
    std::optional<PyramidConfig> pyramid;

    /// Zero mix (identity unit) with identity filter anchors.
    static ShuParams zero_init(std::size_t total, std::size_t hint = default_hint_channels,
                               MixMode mix_mode = MixMode::complex_matrix,
                               FilterMode filter_mode = FilterMode::diagonal, std::size_t grid_rows = 3,
                               std::size_t grid_cols = 2) {
        ShuParams p{total, hint, ChannelMix(hint, mix_mode),
                    HeFilterParams::identity(hint, filter_mode, grid_rows, grid_cols), std::nullopt};
        p.validate();
        return p;
    }

    void validate() const {
        if (hint_channels == 0 || hint_channels > total_channels)
            throw ShapeError("hint channels K=" + std::to_string(hint_channels) + " must satisfy 1 <= K <= N=" +
                             std::to_string(total_channels));
        if (mix.channels() != hint_channels || hef.channels() != hint_channels)
            throw ShapeError("channel mix and hefilter must both act on K=" + std::to_string(hint_channels) +
                             " channels");
    }

    std::size_t first_hint_channel() const { return total_channels - hint_channels; }
};

/// g = hefilter . split_relu . channel_mix, on a K-channel spectrum.
inline SpectralTensor spectral_transform(const SpectralTensor& s, const ShuParams& p) {
    return hefilter_apply(split_relu(channel_mix(s, p.mix)), p.hef);
}

namespace detail {

inline void require_shu_input(const SpatialTensor& x, const ShuParams& p, const char* what) {
    p.validate();
    if (x.channels() != p.total_channels)
        throw ShapeError(std::string(what) + ": input has " + std::to_string(x.channels()) +
                         " channels, unit expects N=" + std::to_string(p.total_channels));
}

} // namespace detail

/// f applied to the K hint channels only.
inline SpatialTensor shu_branch(const SpatialTensor& hint_slice, const ShuParams& p) {
    return inverse_rfft2(spectral_transform(forward_rfft2(hint_slice), p), hint_slice.width());
}

inline SpatialTensor shu_forward(const SpatialTensor& x, const ShuParams& p) {
    detail::require_shu_input(x, p, "shu_forward");
    const std::size_t first = p.first_hint_channel();
    const auto branch = shu_branch(x.slice_channels(first, p.hint_channels), p);
    SpatialTensor out = x;
    auto o = out.data().subspan(first * x.plane_size());
    auto b = branch.data();
    for (std::size_t n = 0; n < b.size(); ++n)
        o[n] += b[n];
    return out;
}

/// Multi-resolution hints: g on the last K channels, then a pyramid split in place of the single iFFT.
inline SplitPyramid shu_hints(const SpatialTensor& x, const ShuParams& p) {
    detail::require_shu_input(x, p, "shu_hints");
    if (!p.pyramid)
        throw ValueError("shu_hints needs a pyramid configuration");
    const auto g = spectral_transform(forward_rfft2(x.slice_channels(p.first_hint_channel(), p.hint_channels)), p);
    return pyramid_split(g, p.pyramid->levels, p.pyramid->kind, p.pyramid->sigma_ratio);
}

/// Feature maps keyed by resolution (height).
using FeatureSet = std::map<std::size_t, SpatialTensor>;

/// Adds each hint map into the first K channels of the same-resolution feature map.
inline FeatureSet inject_hints(FeatureSet features, const SplitPyramid& hints) {
    for (const auto& level : hints.levels) {
        auto it = features.find(level.resolution());
        if (it == features.end())
            throw ShapeError("no feature map at resolution " + std::to_string(level.resolution()));
        auto& f = it->second;
        const auto& h = level.hint;
        if (f.height() != h.height() || f.width() != h.width())
            throw ShapeError("feature map " + f.shape_str() + " does not match hint " + h.shape_str());
        if (f.channels() < h.channels())
            throw ShapeError("feature map at resolution " + std::to_string(level.resolution()) + " has " +
                             std::to_string(f.channels()) + " channels, hints need " + std::to_string(h.channels()));
        auto fd = f.data();
        auto hd = h.data();
        for (std::size_t n = 0; n < hd.size(); ++n)
            fd[n] += hd[n];
    }
    return features;
}

// Parameter container directory: mix.sht, hefilter.sht (HEF1), shu.meta.

inline void write_shu_params(const std::filesystem::path& dir, const ShuParams& p) {
    p.validate();
    std::filesystem::create_directories(dir);
    const std::size_t d = p.mix.dim();
    if (p.mix.mode() == MixMode::complex_matrix) {
        ShtRecord rec{ShtKind::complex, {1, d, d}, {}};
        for (const auto& w : p.mix.complex_weights()) {
            rec.values.push_back(w.real());
            rec.values.push_back(w.imag());
        }
        write_sht(dir / "mix.sht", rec);
    } else {
        const auto w = p.mix.real_weights();
        write_sht(dir / "mix.sht", ShtRecord{ShtKind::real, {1, d, d}, {w.begin(), w.end()}});
    }
    write_hefilter(dir / "hefilter.sht", p.hef);
    MetaMap meta{{"N", std::to_string(p.total_channels)},
                 {"K", std::to_string(p.hint_channels)},
                 {"relu_mode", "split_re_im"},
                 {"mix_mode", to_string(p.mix.mode())}};
    if (p.pyramid) {
        meta["pyramid_levels"] = std::to_string(p.pyramid->levels);
        meta["pyramid_kind"] = to_string(p.pyramid->kind);
        meta["sigma_ratio"] = format_double(p.pyramid->sigma_ratio);
    }
    write_meta(dir / "shu.meta", meta);
}

inline ShuParams read_shu_params(const std::filesystem::path& dir) {
    const auto meta = read_meta(dir / "shu.meta");
    if (meta_get(meta, "relu_mode") != "split_re_im")
        throw FormatError("unsupported relu_mode " + meta_get(meta, "relu_mode"));
    const std::size_t N = meta_size(meta, "N"), K = meta_size(meta, "K");
    const MixMode mode = parse_mix_mode(meta_get(meta, "mix_mode"));
    ChannelMix mix(K, mode);
    const auto rec = read_sht(dir / "mix.sht");
    const std::size_t d = mix.dim();
    if (rec.dims[0] != 1 || rec.dims[1] != d || rec.dims[2] != d)
        throw FormatError("mix.sht shape does not match K=" + std::to_string(K));
    if (mode == MixMode::complex_matrix) {
        const auto vals = complex_values(rec);
        std::copy(vals.begin(), vals.end(), mix.complex_weights().begin());
    } else {
        if (rec.kind != ShtKind::real)
            throw FormatError("stacked mix must be a real tensor");
        std::copy(rec.values.begin(), rec.values.end(), mix.real_weights().begin());
    }
    ShuParams p{N, K, std::move(mix), read_hefilter(dir / "hefilter.sht"), std::nullopt};
    if (meta.count("pyramid_levels"))
        p.pyramid = PyramidConfig{meta_size(meta, "pyramid_levels"), parse_split_kind(meta_get(meta, "pyramid_kind")),
                                  meta_double(meta, "sigma_ratio")};
    p.validate();
    return p;
}

} // namespace shint
