#pragma once

// ".sht" tensor container.
//
//   offset  size  field
//   0       4     magic "SHT1"
//   4       1     kind: 0 = real, 1 = complex
//   5       1     ndim, always 3
//   6       24    dims C, H, W (u64 little-endian); W is the stored width
//   30      ...   f64 little-endian payload, row-major, complex as (re, im) pairs

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <string>
#include <vector>

#include "shint/error.hpp"
#include "shint/tensor.hpp"

namespace shint {

enum class ShtKind : std::uint8_t { real = 0, complex = 1 };

/// Raw container contents, independent of the spatial/spectral layout invariants.
struct ShtRecord {
    ShtKind kind = ShtKind::real;
    std::array<std::uint64_t, 3> dims{};
    std::vector<double> values; // interleaved re/im when complex

    std::uint64_t element_count() const { return dims[0] * dims[1] * dims[2]; }
};

namespace io {

inline void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
    for (std::size_t b = 0; b < sizeof(U); ++b)
        out.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xFF));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

/// Bounds-checked little-endian reader over a byte buffer.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n)
            throw FormatError(std::string("truncated input while reading ") + what);
    }

    std::uint8_t u8(const char* what) {
        need(1, what);
        return bytes_[pos_++];
    }

    template <typename U>
    U le(const char* what) {
        need(sizeof(U), what);
        U v = 0;
        for (std::size_t b = 0; b < sizeof(U); ++b)
            v |= static_cast<U>(bytes_[pos_ + b]) << (8 * b);
        pos_ += sizeof(U);
        return v;
    }

    double f64(const char* what) { return std::bit_cast<double>(le<std::uint64_t>(what)); }

    void expect_magic(const char (&magic)[5]) {
        need(4, "magic");
        if (std::memcmp(bytes_.data() + pos_, magic, 4) != 0)
            throw FormatError(std::string("bad magic, expected ") + magic);
        pos_ += 4;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }
    std::size_t position() const { return pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad())
        throw FormatError("read failed for " + path.string());
    return bytes;
}

/// Write through a sibling temp file and rename, so a failed write leaves nothing at `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw FormatError("cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            out.close();
            std::filesystem::remove(tmp);
            throw FormatError("write failed for " + path.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw FormatError("cannot rename into " + path.string() + ": " + ec.message());
    }
}

} // namespace io

inline void encode_sht(std::vector<std::uint8_t>& out, const ShtRecord& rec) {
    const std::uint64_t expected = rec.element_count() * (rec.kind == ShtKind::complex ? 2 : 1);
    if (rec.values.size() != expected)
        throw ShapeError("sht record payload length does not match dims");
    out.insert(out.end(), {'S', 'H', 'T', '1'});
    io::put_u8(out, static_cast<std::uint8_t>(rec.kind));
    io::put_u8(out, 3);
    for (auto d : rec.dims)
        io::put_le<std::uint64_t>(out, d);
    for (double v : rec.values)
        io::put_f64(out, v);
}

inline ShtRecord decode_sht(io::ByteReader& r) {
    r.expect_magic("SHT1");
    ShtRecord rec;
    const auto kind = r.u8("kind");
    if (kind > 1)
        throw FormatError("unknown sht kind " + std::to_string(kind));
    rec.kind = static_cast<ShtKind>(kind);
    const auto ndim = r.u8("ndim");
    if (ndim != 3)
        throw FormatError("sht ndim must be 3, got " + std::to_string(ndim));
    for (auto& d : rec.dims)
        d = r.le<std::uint64_t>("dims");
    const std::uint64_t per = rec.kind == ShtKind::complex ? 2 : 1;
    // guard the multiplication before trusting it as an allocation size
    if (rec.dims[0] != 0 && rec.dims[1] != 0 && rec.dims[2] != 0 &&
        (r.remaining() / 8 / per / rec.dims[0] / rec.dims[1]) < rec.dims[2])
        throw FormatError("truncated sht payload");
    const std::uint64_t count = rec.element_count() * per;
    rec.values.resize(count);
    for (auto& v : rec.values)
        v = r.f64("payload");
    return rec;
}

inline ShtRecord decode_sht(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    auto rec = decode_sht(r);
    if (r.remaining() != 0)
        throw FormatError("trailing bytes after sht payload");
    return rec;
}

inline ShtRecord to_record(const SpatialTensor& t) {
    ShtRecord rec{ShtKind::real, {t.channels(), t.height(), t.width()}, t.values()};
    return rec;
}

inline ShtRecord to_record(const SpectralTensor& t) {
    ShtRecord rec{ShtKind::complex, {t.channels(), t.height(), t.width()}, {}};
    rec.values.reserve(t.size() * 2);
    for (const auto& v : t.data()) {
        rec.values.push_back(v.real());
        rec.values.push_back(v.imag());
    }
    return rec;
}

inline std::vector<cdouble> complex_values(const ShtRecord& rec) {
    if (rec.kind != ShtKind::complex)
        throw FormatError("expected a complex sht record");
    std::vector<cdouble> out(rec.values.size() / 2);
    for (std::size_t n = 0; n < out.size(); ++n)
        out[n] = {rec.values[2 * n], rec.values[2 * n + 1]};
    return out;
}

inline SpatialTensor spatial_from_record(const ShtRecord& rec) {
    if (rec.kind != ShtKind::real)
        throw FormatError("expected a real sht record");
    return SpatialTensor(rec.dims[0], rec.dims[1], rec.dims[2], rec.values);
}

inline SpectralTensor spectral_from_record(const ShtRecord& rec) {
    return SpectralTensor(rec.dims[0], rec.dims[1], rec.dims[2], complex_values(rec));
}

inline ShtRecord read_sht(const std::filesystem::path& path) { return decode_sht(io::read_file(path)); }

inline void write_sht(const std::filesystem::path& path, const ShtRecord& rec) {
    std::vector<std::uint8_t> bytes;
    encode_sht(bytes, rec);
    io::write_file_atomic(path, bytes);
}

template <typename T, typename L>
void write_sht(const std::filesystem::path& path, const Tensor<T, L>& t) {
    write_sht(path, to_record(t));
}

} // namespace shint
