#pragma once

// Binary PGM (P5) / PPM (P6) with maxval 255, and the [-1, 1] sample mapping used by the tensors:
// v -> v / 127.5 - 1, inverted with clamping and round-half-away-from-zero.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "shint/error.hpp"
#include "shint/sht_io.hpp"
#include "shint/tensor.hpp"

namespace shint {

struct ImageBuffer {
    std::size_t channels = 1; // 1 (gray) or 3 (rgb)
    std::size_t height = 0, width = 0;
    std::vector<std::uint8_t> samples; // row-major, channel-interleaved

    std::uint8_t& at(std::size_t i, std::size_t j, std::size_t c) { return samples[(i * width + j) * channels + c]; }
    std::uint8_t at(std::size_t i, std::size_t j, std::size_t c) const { return samples[(i * width + j) * channels + c]; }
};

namespace detail {

class PnmHeaderReader {
public:
    explicit PnmHeaderReader(std::span<const std::uint8_t> b) : b_(b) {}

    void skip_space_and_comments() {
        while (pos_ < b_.size()) {
            if (std::isspace(b_[pos_])) {
                ++pos_;
            } else if (b_[pos_] == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n')
                    ++pos_;
            } else {
                break;
            }
        }
    }

    std::size_t number(const char* what) {
        skip_space_and_comments();
        if (pos_ >= b_.size() || !std::isdigit(b_[pos_]))
            throw FormatError(std::string("pnm header: expected ") + what);
        std::size_t v = 0;
        while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
            v = v * 10 + (b_[pos_++] - '0');
            if (v > (1u << 24))
                throw FormatError(std::string("pnm header: ") + what + " too large");
        }
        return v;
    }

    std::size_t pos_ = 0;
    std::span<const std::uint8_t> b_;
};

} // namespace detail

inline ImageBuffer decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
        throw FormatError("not a binary PGM/PPM file (expected P5 or P6)");
    ImageBuffer img;
    img.channels = bytes[1] == '5' ? 1 : 3;
    detail::PnmHeaderReader r(bytes);
    r.pos_ = 2;
    img.width = r.number("width");
    img.height = r.number("height");
    const auto maxval = r.number("maxval");
    if (maxval != 255)
        throw FormatError("pnm maxval must be 255, got " + std::to_string(maxval));
    if (r.pos_ >= bytes.size() || !std::isspace(bytes[r.pos_]))
        throw FormatError("pnm header: expected whitespace after maxval");
    ++r.pos_;
    if (img.width == 0 || img.height == 0)
        throw FormatError("pnm image has zero size");
    const std::size_t n = img.width * img.height * img.channels;
    if (bytes.size() - r.pos_ < n)
        throw FormatError("truncated pnm payload: need " + std::to_string(n) + " bytes, have " +
                          std::to_string(bytes.size() - r.pos_));
    img.samples.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos_),
                       bytes.begin() + static_cast<std::ptrdiff_t>(r.pos_ + n));
    return img;
}

inline std::vector<std::uint8_t> encode_image(const ImageBuffer& img) {
    if (img.channels != 1 && img.channels != 3)
        throw ShapeError("pnm images have 1 or 3 channels");
    if (img.samples.size() != img.width * img.height * img.channels)
        throw ShapeError("image buffer size does not match its dims");
    const std::string header = std::string(img.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(img.width) +
                               " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.samples.begin(), img.samples.end());
    return out;
}

inline ImageBuffer read_image(const std::filesystem::path& path) { return decode_image(io::read_file(path)); }

inline void write_image(const std::filesystem::path& path, const ImageBuffer& img) {
    io::write_file_atomic(path, encode_image(img));
}

inline SpatialTensor to_tensor(const ImageBuffer& img) {
    SpatialTensor t(img.channels, img.height, img.width);
    for (std::size_t c = 0; c < img.channels; ++c)
        for (std::size_t i = 0; i < img.height; ++i)
            for (std::size_t j = 0; j < img.width; ++j)
                t(c, i, j) = img.at(i, j, c) / 127.5 - 1.0;
    return t;
}

inline std::uint8_t quantize_sample(double v) {
    const double clamped = std::isnan(v) ? 0.0 : std::clamp(v, -1.0, 1.0);
    return static_cast<std::uint8_t>(std::round((clamped + 1.0) * 127.5));
}

inline ImageBuffer from_tensor(const SpatialTensor& t) {
    if (t.channels() != 1 && t.channels() != 3)
        throw ShapeError("from_tensor needs 1 or 3 channels, got " + std::to_string(t.channels()));
    ImageBuffer img{t.channels(), t.height(), t.width(), std::vector<std::uint8_t>(t.size())};
    for (std::size_t c = 0; c < t.channels(); ++c)
        for (std::size_t i = 0; i < t.height(); ++i)
            for (std::size_t j = 0; j < t.width(); ++j)
                img.at(i, j, c) = quantize_sample(t(c, i, j));
    return img;
}

} // namespace shint
