#pragma once

// Vanilla and Gaussian spectral splits.
//
// The low-frequency block of an H x (W/2+1) row-shifted half spectrum is rows [H/4, 3H/4) and
// columns [0, W/4]. It is exactly the half spectrum of an (H/2) x (W/2) signal, DC at block row H/4.
// A vanilla split moves the block out verbatim; a Gaussian split moves block * N and keeps
// block * (1 - N), N being a peak-1 Gaussian centred on DC.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "shint/error.hpp"
#include "shint/fft.hpp"
#include "shint/sht_io.hpp"
#include "shint/tensor.hpp"

namespace shint {

enum class SplitKind { vanilla, gaussian };

inline const char* to_string(SplitKind k) { return k == SplitKind::vanilla ? "vanilla" : "gaussian"; }

inline SplitKind parse_split_kind(const std::string& s) {
    if (s == "vanilla")
        return SplitKind::vanilla;
    if (s == "gaussian")
        return SplitKind::gaussian;
    throw ValueError("unknown split kind '" + s + "'");
}

/// Location of the low-frequency block inside a spectrum.
struct LowBlock {
    std::size_t row0, rows, cols;
};

inline LowBlock low_block(std::size_t height, std::size_t spec_width) {
    const std::size_t W = 2 * (spec_width - 1);
    if (height % 4 != 0 || W % 4 != 0)
        throw ShapeError("spectral split needs height and source width divisible by 4, got " +
                         std::to_string(height) + "x" + std::to_string(W));
    return {height / 4, height / 2, W / 4 + 1};
}

inline LowBlock low_block(const SpectralTensor& s) { return low_block(s.height(), s.width()); }

/// Peak-normalized isotropic Gaussian over the half spectrum (or its low block), centred on DC.
class GaussianMap {
public:
    GaussianMap(std::size_t height, std::size_t spec_width, bool block, double sigma) : sigma_(sigma) {
        if (!(sigma > 0.0) || !std::isfinite(sigma))
            throw ValueError("gaussian map sigma must be positive and finite");
        std::size_t row0 = 0;
        rows_ = height;
        cols_ = spec_width;
        if (block) {
            const auto b = low_block(height, spec_width);
            row0 = b.row0;
            rows_ = b.rows;
            cols_ = b.cols;
        }
        const double centre = static_cast<double>(height / 2);
        const double denom = 2.0 * sigma * sigma;
        values_.resize(rows_ * cols_);
        for (std::size_t i = 0; i < rows_; ++i) {
            const double di = static_cast<double>(i + row0) - centre;
            for (std::size_t j = 0; j < cols_; ++j) {
                const double dj = static_cast<double>(j);
                values_[i * cols_ + j] = std::exp(-(di * di + dj * dj) / denom);
            }
        }
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double sigma() const { return sigma_; }
    double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
    const std::vector<double>& values() const { return values_; }

private:
    std::size_t rows_ = 0, cols_ = 0;
    double sigma_;
    std::vector<double> values_;
};

inline GaussianMap build_gaussian_map(std::size_t height, std::size_t spec_width, bool block, double sigma) {
    return GaussianMap(height, spec_width, block, sigma);
}

struct SpectralSplit {
    SpectralTensor hi;
    SpectralTensor lo;
};

inline SpectralSplit vanilla_split(const SpectralTensor& s) {
    const auto b = low_block(s);
    SpectralSplit out{s, SpectralTensor(s.channels(), b.rows, b.cols)};
    for (std::size_t c = 0; c < s.channels(); ++c)
        for (std::size_t i = 0; i < b.rows; ++i)
            for (std::size_t j = 0; j < b.cols; ++j) {
                out.lo(c, i, j) = s(c, b.row0 + i, j);
                out.hi(c, b.row0 + i, j) = cdouble{};
            }
    return out;
}

inline SpectralSplit gaussian_split(const SpectralTensor& s, double sigma) {
    const auto b = low_block(s);
    const GaussianMap n(s.height(), s.width(), true, sigma);
    SpectralSplit out{s, SpectralTensor(s.channels(), b.rows, b.cols)};
    for (std::size_t c = 0; c < s.channels(); ++c)
        for (std::size_t i = 0; i < b.rows; ++i)
            for (std::size_t j = 0; j < b.cols; ++j) {
                const cdouble v = s(c, b.row0 + i, j);
                const cdouble lo = v * n(i, j);
                out.lo(c, i, j) = lo;
                out.hi(c, b.row0 + i, j) = v - lo; // v * (1 - N), complementary by construction
            }
    return out;
}

/// Adds `lo` back into the low block of `hi`. Inverse of both split kinds.
inline SpectralTensor spectral_merge(const SpectralTensor& hi, const SpectralTensor& lo) {
    const auto b = low_block(hi);
    if (lo.channels() != hi.channels() || lo.height() != b.rows || lo.width() != b.cols)
        throw ShapeError("spectral merge: low piece " + lo.shape_str() + " does not fit the block of " +
                         hi.shape_str());
    SpectralTensor out = hi;
    for (std::size_t c = 0; c < hi.channels(); ++c)
        for (std::size_t i = 0; i < b.rows; ++i)
            for (std::size_t j = 0; j < b.cols; ++j)
                out(c, b.row0 + i, j) += lo(c, i, j);
    return out;
}

inline SpectralTensor vanilla_merge(const SpectralTensor& hi, const SpectralTensor& lo) { return spectral_merge(hi, lo); }
inline SpectralTensor gaussian_merge(const SpectralTensor& hi, const SpectralTensor& lo) { return spectral_merge(hi, lo); }

/// Zero spectrum of `hi`'s shape with `lo` written into its low block.
inline SpectralTensor embed_low_block(const SpectralTensor& lo, std::size_t height, std::size_t spec_width) {
    return spectral_merge(SpectralTensor(lo.channels(), height, spec_width), lo);
}

/// One pyramid level: its spectral piece and the spatial hint map at the piece's own resolution.
struct PyramidLevel {
    SpectralTensor spectrum;
    SpatialTensor hint;

    std::size_t resolution() const { return hint.height(); }
};

struct SplitPyramid {
    SplitKind kind = SplitKind::gaussian;
    double sigma_ratio = 0.25;
    std::size_t source_channels = 0, source_height = 0, source_width = 0;
    std::vector<PyramidLevel> levels; // finest first
};

inline constexpr double default_sigma_ratio = 0.25;

/// Checks that `levels` successive halvings of an H x W signal stay on a dyadic grid ending at >= 4.
inline void require_pyramid_dims(std::size_t height, std::size_t width, std::size_t levels) {
    if (levels == 0)
        throw ValueError("pyramid needs at least one level");
    std::size_t h = height, w = width;
    for (std::size_t l = 1; l < levels; ++l) {
        if (h % 4 != 0 || w % 4 != 0)
            throw ShapeError("source " + std::to_string(height) + "x" + std::to_string(width) +
                             " is not dyadic enough for " + std::to_string(levels) + " levels");
        h /= 2;
        w /= 2;
    }
    if (levels > 1 && (h < 4 || w < 4))
        throw ShapeError("too many pyramid levels: coarsest level would be " + std::to_string(h) + "x" +
                         std::to_string(w) + ", minimum is 4");
}

/// Recursive split of the low branch. The split applied to an h-row spectrum uses
/// sigma = sigma_ratio * h / 2 (the block height). Each level is inverse-transformed with its own
/// 1/(h*w) normalization, so a coarse hint carries (H*W)/(h*w) times the amplitude of an ideal
/// low-pass-then-subsample of the source.
inline SplitPyramid pyramid_split(const SpectralTensor& s, std::size_t levels, SplitKind kind,
                                  double sigma_ratio = default_sigma_ratio) {
    if (kind == SplitKind::gaussian && !(sigma_ratio > 0.0 && std::isfinite(sigma_ratio)))
        throw ValueError("sigma_ratio must be positive");
    require_pyramid_dims(s.height(), s.source_width(), levels);
    SplitPyramid p;
    p.kind = kind;
    p.sigma_ratio = sigma_ratio;
    p.source_channels = s.channels();
    p.source_height = s.height();
    p.source_width = s.source_width();
    SpectralTensor cur = s;
    for (std::size_t l = 0; l + 1 < levels; ++l) {
        const double sigma = sigma_ratio * static_cast<double>(cur.height() / 2);
        auto parts = kind == SplitKind::vanilla ? vanilla_split(cur) : gaussian_split(cur, sigma);
        auto hint = inverse_rfft2(parts.hi);
        p.levels.push_back({std::move(parts.hi), std::move(hint)});
        cur = std::move(parts.lo);
    }
    auto hint = inverse_rfft2(cur);
    p.levels.push_back({std::move(cur), std::move(hint)});
    return p;
}

inline SpectralTensor pyramid_merge(const SplitPyramid& p) {
    if (p.levels.empty())
        throw ShapeError("pyramid has no levels");
    SpectralTensor cur = p.levels.back().spectrum;
    for (std::size_t l = p.levels.size() - 1; l-- > 0;)
        cur = spectral_merge(p.levels[l].spectrum, cur);
    if (cur.channels() != p.source_channels || cur.height() != p.source_height ||
        cur.source_width() != p.source_width)
        throw ShapeError("pyramid levels do not reassemble to the recorded source dims");
    return cur;
}

// Pyramid directory: level_<res>.sht (real hint map), level_<res>.spectrum.sht (complex piece,
// needed for lossless reassembly), and pyramid.meta with key=value lines.

using MetaMap = std::map<std::string, std::string>;

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_meta(const std::filesystem::path& path, const MetaMap& meta) {
    std::string text;
    for (const auto& [k, v] : meta)
        text += k + "=" + v + "\n";
    io::write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline MetaMap read_meta(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw FormatError("cannot open " + path.string());
    MetaMap meta;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("malformed meta line '" + line + "' in " + path.string());
        meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return meta;
}

inline const std::string& meta_get(const MetaMap& meta, const std::string& key) {
    auto it = meta.find(key);
    if (it == meta.end())
        throw FormatError("meta is missing key '" + key + "'");
    return it->second;
}

inline std::size_t meta_size(const MetaMap& meta, const std::string& key) {
    const auto& v = meta_get(meta, key);
    std::size_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw FormatError("meta key '" + key + "' is not an unsigned integer: " + v);
    return out;
}

inline double meta_double(const MetaMap& meta, const std::string& key) {
    const auto& v = meta_get(meta, key);
    std::istringstream ss(v);
    ss.imbue(std::locale::classic());
    double out = 0.0;
    if (!(ss >> out) || !ss.eof())
        throw FormatError("meta key '" + key + "' is not a number: " + v);
    return out;
}

inline std::string level_stem(std::size_t resolution) { return "level_" + std::to_string(resolution); }

/// Writes every file of the pyramid into `dir`; `extra` keys are appended to pyramid.meta.
inline void write_pyramid(const std::filesystem::path& dir, const SplitPyramid& p, const MetaMap& extra = {}) {
    std::filesystem::create_directories(dir);
    for (const auto& level : p.levels) {
        const auto stem = level_stem(level.resolution());
        write_sht(dir / (stem + ".sht"), level.hint);
        write_sht(dir / (stem + ".spectrum.sht"), level.spectrum);
    }
    MetaMap meta = extra;
    meta["kind"] = to_string(p.kind);
    meta["sigma_ratio"] = format_double(p.sigma_ratio);
    meta["levels"] = std::to_string(p.levels.size());
    meta["source_channels"] = std::to_string(p.source_channels);
    meta["source_height"] = std::to_string(p.source_height);
    meta["source_width"] = std::to_string(p.source_width);
    write_meta(dir / "pyramid.meta", meta);
}

inline SplitPyramid read_pyramid(const std::filesystem::path& dir, MetaMap* meta_out = nullptr) {
    const auto meta = read_meta(dir / "pyramid.meta");
    SplitPyramid p;
    p.kind = parse_split_kind(meta_get(meta, "kind"));
    p.sigma_ratio = meta_double(meta, "sigma_ratio");
    p.source_channels = meta_size(meta, "source_channels");
    p.source_height = meta_size(meta, "source_height");
    p.source_width = meta_size(meta, "source_width");
    const std::size_t levels = meta_size(meta, "levels");
    require_pyramid_dims(p.source_height, p.source_width, levels);
    std::size_t res = p.source_height;
    for (std::size_t l = 0; l < levels; ++l, res /= 2) {
        const auto stem = level_stem(res);
        auto spectrum = spectral_from_record(read_sht(dir / (stem + ".spectrum.sht")));
        auto hint = spatial_from_record(read_sht(dir / (stem + ".sht")));
        if (hint.height() != res || spectrum.height() != res)
            throw ShapeError("pyramid level " + stem + " has unexpected resolution");
        p.levels.push_back({std::move(spectrum), std::move(hint)});
    }
    if (meta_out)
        *meta_out = meta;
    return p;
}

} // namespace shint
