#pragma once

// Free-form inpainting masks: brush strokes plus axis-aligned rectangles painted as 0 (unknown)
// on an all-ones (known) canvas.
//
// All integer draws are inclusive discrete uniforms from CounterRng(seed). Draw order:
//   1. stroke count                     U(stroke_count)
//   2. per stroke:  width               U(stroke_width)
//                   vertex count        U(stroke_vertices)
//                   start x, y          uniform [0, W), [0, H)
//                   per segment:        angle uniform [0, 2pi), length uniform [H*seg_min, H*seg_max]
//                                       (endpoint clamped to [0, W] x [0, H])
//   3. full-size rectangle count        U(full_rect_count); per rectangle h U(1, H), w U(1, W),
//                                       top U(0, H - h), left U(0, W - w)
//   4. half-size rectangle count        U(half_rect_count); same with h U(1, H/2), w U(1, W/2)
// A stroke covers every pixel whose centre lies within width/2 of one of its segments, which
// gives round joints and round caps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shint/error.hpp"
#include "shint/imageio.hpp"
#include "shint/random.hpp"
#include "shint/tensor.hpp"

namespace shint {

struct IntRange {
    std::int64_t lo, hi;

    bool contains(std::int64_t v) const { return lo <= v && v <= hi; }
};

inline constexpr std::size_t min_mask_side = 64;

struct MaskSpec {
    std::size_t height = 256, width = 256;
    IntRange stroke_width{12, 48};
    IntRange stroke_count{0, 20};
    IntRange full_rect_count{0, 5};
    IntRange half_rect_count{0, 10};
    IntRange stroke_vertices{4, 12};
    double segment_min_fraction = 1.0 / 16.0; ///< of the canvas height
    double segment_max_fraction = 1.0 / 4.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (height < min_mask_side || width < min_mask_side)
            throw ShapeError("mask canvas must be at least " + std::to_string(min_mask_side) + "x" +
                             std::to_string(min_mask_side) + ", got " + std::to_string(height) + "x" +
                             std::to_string(width));
        auto check = [](const IntRange& r, std::int64_t floor, const char* name) {
            if (r.lo > r.hi || r.lo < floor)
                throw ValueError(std::string("mask spec range ") + name + " is invalid");
        };
        check(stroke_width, 1, "stroke_width");
        check(stroke_count, 0, "stroke_count");
        check(full_rect_count, 0, "full_rect_count");
        check(half_rect_count, 0, "half_rect_count");
        check(stroke_vertices, 1, "stroke_vertices");
        if (!(segment_min_fraction >= 0.0) || !(segment_max_fraction >= segment_min_fraction))
            throw ValueError("mask spec segment length fractions are invalid");
    }
};

/// What the generator sampled, recorded at generation time.
struct MaskProvenance {
    std::size_t stroke_count = 0;
    std::vector<std::int64_t> stroke_widths;
    std::vector<std::int64_t> stroke_vertices;
    std::size_t full_rect_count = 0;
    std::size_t half_rect_count = 0;
};

struct Mask {
    std::size_t height = 0, width = 0;
    std::vector<std::uint8_t> values; ///< 1 = known, 0 = unknown
    MaskProvenance provenance;

    std::uint8_t at(std::size_t i, std::size_t j) const { return values[i * width + j]; }

    static Mask filled(std::size_t h, std::size_t w, std::uint8_t v) { return {h, w, std::vector<std::uint8_t>(h * w, v), {}}; }

    double unknown_fraction() const {
        return static_cast<double>(std::count(values.begin(), values.end(), std::uint8_t{0})) /
               static_cast<double>(values.size());
    }
};

namespace detail {

struct Point {
    double x, y;
};

inline void paint_segment(Mask& m, Point a, Point b, double radius) {
    const double r2 = radius * radius;
    const auto lo_x = static_cast<std::int64_t>(std::floor(std::min(a.x, b.x) - radius));
    const auto hi_x = static_cast<std::int64_t>(std::ceil(std::max(a.x, b.x) + radius));
    const auto lo_y = static_cast<std::int64_t>(std::floor(std::min(a.y, b.y) - radius));
    const auto hi_y = static_cast<std::int64_t>(std::ceil(std::max(a.y, b.y) + radius));
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    const auto W = static_cast<std::int64_t>(m.width), H = static_cast<std::int64_t>(m.height);
    for (std::int64_t r = std::max<std::int64_t>(lo_y, 0); r <= std::min(hi_y, H - 1); ++r) {
        for (std::int64_t c = std::max<std::int64_t>(lo_x, 0); c <= std::min(hi_x, W - 1); ++c) {
            const double px = static_cast<double>(c) + 0.5, py = static_cast<double>(r) + 0.5;
            double t = len2 > 0.0 ? ((px - a.x) * dx + (py - a.y) * dy) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const double ex = px - (a.x + t * dx), ey = py - (a.y + t * dy);
            if (ex * ex + ey * ey <= r2)
                m.values[static_cast<std::size_t>(r) * m.width + static_cast<std::size_t>(c)] = 0;
        }
    }
}

inline void paint_rect(Mask& m, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
    for (std::size_t r = top; r < top + h; ++r)
        std::fill_n(m.values.begin() + static_cast<std::ptrdiff_t>(r * m.width + left), w, std::uint8_t{0});
}

inline std::size_t draw_rects(Mask& m, CounterRng& rng, const IntRange& count, std::size_t max_h, std::size_t max_w) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(count.lo, count.hi));
    for (std::size_t k = 0; k < n; ++k) {
        const auto h = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(max_h)));
        const auto w = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(max_w)));
        const auto top = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(m.height - h)));
        const auto left = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(m.width - w)));
        paint_rect(m, top, left, h, w);
    }
    return n;
}

} // namespace detail

inline Mask generate_mask(const MaskSpec& spec) {
    spec.validate();
    Mask m = Mask::filled(spec.height, spec.width, 1);
    CounterRng rng(spec.seed);
    const double H = static_cast<double>(spec.height), W = static_cast<double>(spec.width);

    const auto strokes = static_cast<std::size_t>(rng.uniform_int(spec.stroke_count.lo, spec.stroke_count.hi));
    m.provenance.stroke_count = strokes;
    for (std::size_t s = 0; s < strokes; ++s) {
        const auto width = rng.uniform_int(spec.stroke_width.lo, spec.stroke_width.hi);
        const auto vertices = rng.uniform_int(spec.stroke_vertices.lo, spec.stroke_vertices.hi);
        m.provenance.stroke_widths.push_back(width);
        m.provenance.stroke_vertices.push_back(vertices);
        const double radius = static_cast<double>(width) / 2.0;
        detail::Point p{rng.uniform(0.0, W), rng.uniform(0.0, H)};
        detail::paint_segment(m, p, p, radius);
        for (std::int64_t v = 1; v < vertices; ++v) {
            const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double length = rng.uniform(H * spec.segment_min_fraction, H * spec.segment_max_fraction);
            const detail::Point q{std::clamp(p.x + length * std::cos(angle), 0.0, W),
                                  std::clamp(p.y + length * std::sin(angle), 0.0, H)};
            detail::paint_segment(m, p, q, radius);
            p = q;
        }
    }
    m.provenance.full_rect_count = detail::draw_rects(m, rng, spec.full_rect_count, spec.height, spec.width);
    m.provenance.half_rect_count =
        detail::draw_rects(m, rng, spec.half_rect_count, spec.height / 2, spec.width / 2);
    return m;
}

/// image * mask, the mask broadcast over channels.
inline SpatialTensor apply_mask(const SpatialTensor& image, const Mask& mask) {
    if (image.height() != mask.height || image.width() != mask.width)
        throw ShapeError("mask " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                         " does not match image " + image.shape_str());
    SpatialTensor out = image;
    for (std::size_t c = 0; c < image.channels(); ++c) {
        auto plane = out.plane(c);
        for (std::size_t n = 0; n < plane.size(); ++n)
            if (mask.values[n] == 0)
                plane[n] = 0.0;
    }
    return out;
}

struct MaskStatistics {
    std::vector<double> unknown_fraction;
    std::optional<std::int64_t> min_stroke_width, max_stroke_width; ///< empty when no strokes were drawn
    std::size_t min_stroke_count = 0, max_stroke_count = 0;
    std::size_t min_full_rects = 0, max_full_rects = 0;
    std::size_t min_half_rects = 0, max_half_rects = 0;
};

inline MaskStatistics mask_statistics(std::span<const Mask> masks) {
    if (masks.empty())
        throw ValueError("mask_statistics needs at least one mask");
    MaskStatistics st;
    st.min_stroke_count = st.min_full_rects = st.min_half_rects = std::numeric_limits<std::size_t>::max();
    for (const auto& m : masks) {
        st.unknown_fraction.push_back(m.unknown_fraction());
        const auto& p = m.provenance;
        for (auto w : p.stroke_widths) {
            st.min_stroke_width = std::min(st.min_stroke_width.value_or(w), w);
            st.max_stroke_width = std::max(st.max_stroke_width.value_or(w), w);
        }
        st.min_stroke_count = std::min(st.min_stroke_count, p.stroke_count);
        st.max_stroke_count = std::max(st.max_stroke_count, p.stroke_count);
        st.min_full_rects = std::min(st.min_full_rects, p.full_rect_count);
        st.max_full_rects = std::max(st.max_full_rects, p.full_rect_count);
        st.min_half_rects = std::min(st.min_half_rects, p.half_rect_count);
        st.max_half_rects = std::max(st.max_half_rects, p.half_rect_count);
    }
    return st;
}

/// PGM form: 0 -> 0, 1 -> 255.
inline ImageBuffer mask_to_image(const Mask& m) {
    ImageBuffer img{1, m.height, m.width, std::vector<std::uint8_t>(m.values.size())};
    for (std::size_t n = 0; n < m.values.size(); ++n)
        img.samples[n] = m.values[n] ? 255 : 0;
    return img;
}

inline Mask mask_from_image(const ImageBuffer& img) {
    if (img.channels != 1)
        throw FormatError("mask images must be single-channel PGM");
    Mask m = Mask::filled(img.height, img.width, 1);
    for (std::size_t n = 0; n < img.samples.size(); ++n) {
        if (img.samples[n] != 0 && img.samples[n] != 255)
            throw FormatError("mask PGM samples must be 0 or 255");
        m.values[n] = img.samples[n] ? 1 : 0;
    }
    return m;
}

} // namespace shint
