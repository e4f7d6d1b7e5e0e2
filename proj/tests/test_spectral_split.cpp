#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "shint/fft.hpp"
#include "shint/spectral_split.hpp"
#include "support.hpp"

using namespace shint;

namespace {

double energy(const SpectralTensor& s) {
    double e = 0.0;
    for (std::size_t c = 0; c < s.channels(); ++c)
        for (std::size_t i = 0; i < s.height(); ++i)
            for (std::size_t j = 0; j < s.width(); ++j)
                e += column_multiplicity(j, s.width()) * std::norm(s(c, i, j));
    return e;
}

SpatialTensor cosine(std::size_t H, std::size_t W, std::size_t fr, std::size_t fc) {
    SpatialTensor x(1, H, W);
    for (std::size_t m = 0; m < H; ++m)
        for (std::size_t n = 0; n < W; ++n)
            x(0, m, n) = std::cos(2.0 * std::numbers::pi *
                                  (static_cast<double>(fr * m) / H + static_cast<double>(fc * n) / W));
    return x;
}

// Writes a level's piece into a zero full-size spectrum: row-centred on DC, from column 0.
SpectralTensor reembed(const SpectralTensor& piece, std::size_t H, std::size_t Ws) {
    SpectralTensor out(piece.channels(), H, Ws);
    const std::size_t off = H / 2 - piece.height() / 2;
    for (std::size_t c = 0; c < piece.channels(); ++c)
        for (std::size_t i = 0; i < piece.height(); ++i)
            for (std::size_t j = 0; j < piece.width(); ++j)
                out(c, off + i, j) = piece(c, i, j);
    return out;
}

} // namespace

TEST(LowBlock, BoundsAreHalfOpenRowsClosedColumns) {
    const auto b = low_block(8, 5);
    EXPECT_EQ(b.row0, 2u);
    EXPECT_EQ(b.rows, 4u);
    EXPECT_EQ(b.cols, 3u);
    const auto c = low_block(64, 33);
    EXPECT_EQ(c.row0, 16u);
    EXPECT_EQ(c.rows, 32u);
    EXPECT_EQ(c.cols, 17u);
    EXPECT_THROW(low_block(6, 5), ShapeError);
    EXPECT_THROW(low_block(8, 4), ShapeError);
}

TEST(VanillaSplit, DcImpulseMovesToLowBlockCentre) {
    SpectralTensor s(1, 8, 5);
    s(0, 4, 0) = 1.0;
    const auto parts = vanilla_split(s);
    EXPECT_EQ(parts.hi(0, 4, 0), cdouble{});
    ASSERT_EQ(parts.lo.height(), 4u);
    ASSERT_EQ(parts.lo.width(), 3u);
    EXPECT_EQ(parts.lo(0, 2, 0), cdouble(1.0, 0.0));
    for (std::size_t n = 0; n < parts.lo.size(); ++n)
        if (n != 2 * 3) {
            EXPECT_EQ(parts.lo.data()[n], cdouble{});
        }
}

TEST(VanillaSplit, HighCornerImpulseStaysInHigh) {
    SpectralTensor s(1, 8, 5);
    s(0, 0, 4) = {0.5, -2.0};
    const auto parts = vanilla_split(s);
    EXPECT_EQ(parts.hi, s);
    for (const auto& v : parts.lo.data())
        EXPECT_EQ(v, cdouble{});
}

TEST(VanillaSplit, BlockIsCopiedAndZeroedVerbatim) {
    std::mt19937_64 gen(31);
    const auto s = support::random_spectral(gen, 2, 16, 9);
    const auto parts = vanilla_split(s);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 16; ++i)
            for (std::size_t j = 0; j < 9; ++j) {
                const bool in_block = i >= 4 && i < 12 && j <= 4;
                EXPECT_EQ(parts.hi(c, i, j), in_block ? cdouble{} : s(c, i, j));
                if (in_block) {
                    EXPECT_EQ(parts.lo(c, i - 4, j), s(c, i, j));
                }
            }
}

TEST(VanillaMerge, InvertsSplitExactly) {
    std::mt19937_64 gen(32);
    const auto s = support::random_spectral(gen, 2, 16, 9);
    const auto parts = vanilla_split(s);
    EXPECT_EQ(vanilla_merge(parts.hi, parts.lo), s);
}

TEST(VanillaMerge, ZeroPieces) {
    std::mt19937_64 gen(33);
    const auto hi = support::random_spectral(gen, 1, 8, 5);
    EXPECT_EQ(vanilla_merge(hi, SpectralTensor(1, 4, 3)), hi);
    SpectralTensor lo(1, 4, 3);
    lo(0, 1, 2) = {3.0, 1.0};
    const auto merged = vanilla_merge(SpectralTensor(1, 8, 5), lo);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            EXPECT_EQ(merged(0, i, j), (i == 3 && j == 2) ? cdouble(3.0, 1.0) : cdouble{});
}

TEST(VanillaMerge, RejectsMismatchedPieces) {
    EXPECT_THROW(vanilla_merge(SpectralTensor(1, 8, 5), SpectralTensor(1, 4, 2)), ShapeError);
    EXPECT_THROW(vanilla_merge(SpectralTensor(1, 8, 5), SpectralTensor(2, 4, 3)), ShapeError);
    EXPECT_THROW(vanilla_split(SpectralTensor(1, 6, 5)), ShapeError);
}

TEST(GaussianMap, PeakAndOneSigmaValues) {
    const auto m = build_gaussian_map(16, 9, false, 2.0);
    EXPECT_EQ(m.rows(), 16u);
    EXPECT_EQ(m.cols(), 9u);
    EXPECT_EQ(m(8, 0), 1.0);
    EXPECT_NEAR(m(10, 0), 0.6065306597126334, 1e-15);
    EXPECT_NEAR(m(6, 0), 0.6065306597126334, 1e-15);
    EXPECT_NEAR(m(8, 2), 0.6065306597126334, 1e-15);
    EXPECT_NEAR(m(8, 2), std::exp(-0.5), 1e-16);
}

TEST(GaussianMap, FlatInWideLimit) {
    const auto m = build_gaussian_map(16, 9, false, 1e9);
    for (const auto v : m.values())
        EXPECT_NEAR(v, 1.0, 1e-9);
}

TEST(GaussianMap, MonotoneInDistanceAndBounded) {
    const auto m = build_gaussian_map(32, 17, false, 3.5);
    for (std::size_t a = 0; a < 32 * 17; ++a)
        for (std::size_t b = 0; b < 32 * 17; b += 7) {
            auto d2 = [](std::size_t n) {
                const double di = static_cast<double>(n / 17) - 16.0, dj = static_cast<double>(n % 17);
                return di * di + dj * dj;
            };
            if (d2(a) < d2(b)) {
                EXPECT_GE(m.values()[a], m.values()[b]);
            }
        }
    for (const auto v : m.values()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(GaussianMap, BlockVariantUsesGlobalCoordinates) {
    const auto full = build_gaussian_map(16, 9, false, 2.5);
    const auto block = build_gaussian_map(16, 9, true, 2.5);
    ASSERT_EQ(block.rows(), 8u);
    ASSERT_EQ(block.cols(), 5u);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            EXPECT_EQ(block(i, j), full(i + 4, j));
    EXPECT_EQ(block(4, 0), 1.0);
}

TEST(GaussianMap, RejectsNonPositiveSigma) {
    EXPECT_THROW(build_gaussian_map(8, 5, false, 0.0), ValueError);
    EXPECT_THROW(build_gaussian_map(8, 5, false, -1.0), ValueError);
    EXPECT_THROW(gaussian_split(SpectralTensor(1, 8, 5), 0.0), ValueError);
}

TEST(GaussianSplit, CentreBinMigratesFully) {
    std::mt19937_64 gen(34);
    const auto s = support::random_spectral(gen, 1, 8, 5);
    const auto parts = gaussian_split(s, 1.5);
    EXPECT_EQ(parts.hi(0, 4, 0), cdouble{});
    EXPECT_EQ(parts.lo(0, 2, 0), s(0, 4, 0));
}

TEST(GaussianSplit, NarrowLimitKeepsOnlyCentreInLow) {
    std::mt19937_64 gen(35);
    const auto s = support::random_spectral(gen, 1, 16, 9);
    const auto parts = gaussian_split(s, 1e-9);
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < 9; ++j)
            EXPECT_EQ(parts.hi(0, i, j), (i == 8 && j == 0) ? cdouble{} : s(0, i, j));
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            EXPECT_EQ(parts.lo(0, i, j), (i == 4 && j == 0) ? s(0, 8, 0) : cdouble{});
}

TEST(GaussianSplit, OutsideBlockUntouchedInsideWeighted) {
    std::mt19937_64 gen(36);
    const auto s = support::random_spectral(gen, 2, 16, 9);
    const double sigma = 2.0;
    const auto parts = gaussian_split(s, sigma);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 16; ++i)
            for (std::size_t j = 0; j < 9; ++j) {
                if (i >= 4 && i < 12 && j <= 4) {
                    const double di = static_cast<double>(i) - 8.0, dj = static_cast<double>(j);
                    const double n = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
                    EXPECT_LE(std::abs(parts.lo(c, i - 4, j) - s(c, i, j) * n), 1e-15);
                    EXPECT_LE(std::abs(parts.hi(c, i, j) - s(c, i, j) * (1.0 - n)), 1e-15);
                } else {
                    EXPECT_EQ(parts.hi(c, i, j), s(c, i, j));
                }
            }
}

TEST(GaussianMerge, InvertsSplit) {
    std::mt19937_64 gen(37);
    const auto s = support::random_spectral(gen, 1, 16, 9);
    const auto parts = gaussian_split(s, 2.0);
    EXPECT_LE(max_abs_diff(gaussian_merge(parts.hi, parts.lo), s), 1e-14);
}

TEST(GaussianMerge, ZeroPieces) {
    std::mt19937_64 gen(38);
    const auto s = support::random_spectral(gen, 1, 8, 5);
    const auto parts = gaussian_split(s, 1.0);
    EXPECT_EQ(gaussian_merge(parts.hi, SpectralTensor(1, 4, 3)), parts.hi);
    const auto impulse = gaussian_split([] {
        SpectralTensor t(1, 8, 5);
        t(0, 4, 0) = 2.0;
        return t;
    }(), 1.0);
    const auto merged = gaussian_merge(SpectralTensor(1, 8, 5), impulse.lo);
    for (std::size_t n = 0; n < merged.size(); ++n)
        EXPECT_EQ(merged.data()[n], n == 4 * 5 ? cdouble(2.0, 0.0) : cdouble{});
}

TEST(SpectralSplit, LosslessAcrossSizesChannelsAndSigmas) {
    std::mt19937_64 gen(39);
    for (std::size_t res : {8u, 16u, 32u, 64u})
        for (std::size_t C = 1; C <= 4; ++C) {
            const auto s = forward_rfft2(support::random_spatial(gen, C, res, res));
            const auto v = vanilla_split(s);
            EXPECT_LE(max_abs_diff(vanilla_merge(v.hi, v.lo), s), 1e-12);
            for (double f : {0.5, 2.0, 8.0, 1e9}) {
                const auto g = gaussian_split(s, f * static_cast<double>(res) / 4.0);
                EXPECT_LE(max_abs_diff(gaussian_merge(g.hi, g.lo), s), 1e-12) << res << " " << C << " " << f;
            }
        }
}

TEST(SpectralSplit, IsLinear) {
    std::mt19937_64 gen(40);
    const auto a = support::random_spectral(gen, 2, 16, 9);
    const auto b = support::random_spectral(gen, 2, 16, 9);
    const cdouble alpha{1.5, -0.5}, beta{-0.25, 2.0};
    const auto combo = spectral_axpy(alpha, a, beta, b);
    {
        const auto pa = vanilla_split(a), pb = vanilla_split(b), pc = vanilla_split(combo);
        EXPECT_LE(max_abs_diff(pc.hi, spectral_axpy(alpha, pa.hi, beta, pb.hi)), 1e-14);
        EXPECT_LE(max_abs_diff(pc.lo, spectral_axpy(alpha, pa.lo, beta, pb.lo)), 1e-14);
    }
    {
        const auto pa = gaussian_split(a, 3.0), pb = gaussian_split(b, 3.0), pc = gaussian_split(combo, 3.0);
        EXPECT_LE(max_abs_diff(pc.hi, spectral_axpy(alpha, pa.hi, beta, pb.hi)), 1e-14);
        EXPECT_LE(max_abs_diff(pc.lo, spectral_axpy(alpha, pa.lo, beta, pb.lo)), 1e-14);
    }
}

TEST(SpectralSplit, LowFrequencyCosinesLandInLow) {
    const std::size_t H = 32, W = 32;
    for (std::size_t fr = 0; fr < H / 8; ++fr)
        for (std::size_t fc = 0; fc < W / 8; ++fc) {
            const auto parts = vanilla_split(forward_rfft2(cosine(H, W, fr, fc)));
            const double lo = energy(embed_low_block(parts.lo, H, W / 2 + 1)), hi = energy(parts.hi);
            EXPECT_GE(lo / (lo + hi), 0.99) << fr << "," << fc;
        }
}

TEST(SpectralSplit, HighFrequencyCosinesStayInHigh) {
    const std::size_t H = 32, W = 32;
    for (std::size_t fr = 0; fr <= H / 2; ++fr)
        for (std::size_t fc = 0; fc <= W / 2; ++fc) {
            if (fr <= H / 4 && fc <= W / 4)
                continue;
            const auto parts = vanilla_split(forward_rfft2(cosine(H, W, fr, fc)));
            const double lo = energy(embed_low_block(parts.lo, H, W / 2 + 1)), hi = energy(parts.hi);
            EXPECT_GE(hi / (lo + hi), 1.0 - 1e-15) << fr << "," << fc;
            EXPECT_LE(lo, 1e-20 * hi) << fr << "," << fc;
        }
}

TEST(SpectralSplit, GaussianWeightingIsCircularConvolution) {
    std::mt19937_64 gen(41);
    for (std::size_t n : {4u, 8u, 16u, 32u})
        for (double sigma : {0.5, 1.7, 4.0}) {
            const auto x = support::random_spatial(gen, 2, n, n);
            const auto map = build_gaussian_map(n, n / 2 + 1, false, sigma);
            SpectralTensor ns(1, n, n / 2 + 1);
            for (std::size_t k = 0; k < ns.size(); ++k)
                ns.data()[k] = map.values()[k];
            auto s = forward_rfft2(x);
            for (std::size_t c = 0; c < 2; ++c)
                for (std::size_t k = 0; k < ns.size(); ++k)
                    s.plane(c)[k] *= ns.data()[k];
            const auto filtered = inverse_rfft2(s, n);
            const auto kernel = inverse_rfft2(ns, n);
            EXPECT_LE(max_abs_diff(filtered, oracle::circular_convolve(x, kernel)), 1e-10) << n << " " << sigma;
        }
}

TEST(SpectralSplit, HighBranchIsDifferenceOfSignals) {
    std::mt19937_64 gen(42);
    const auto x = support::random_spatial(gen, 2, 32, 32);
    const auto s = forward_rfft2(x);
    const auto p = pyramid_split(s, 2, SplitKind::gaussian, 0.25);
    const auto low_spatial = inverse_rfft2(embed_low_block(p.levels[1].spectrum, 32, 17), 32);
    EXPECT_LE(max_abs_diff(p.levels[0].hint, spatial_axpy(1.0, x, -1.0, low_spatial)), 1e-12);
}

TEST(PyramidSplit, SingleLevelIsPlainInverse) {
    std::mt19937_64 gen(43);
    const auto s = forward_rfft2(support::random_spatial(gen, 3, 16, 16));
    const auto p = pyramid_split(s, 1, SplitKind::gaussian);
    ASSERT_EQ(p.levels.size(), 1u);
    EXPECT_EQ(p.levels[0].hint, inverse_rfft2(s, 16));
    EXPECT_EQ(p.levels[0].spectrum, s);
    EXPECT_EQ(pyramid_merge(p), s);
}

TEST(PyramidSplit, DefaultLadderOn64) {
    std::mt19937_64 gen(44);
    const auto s = forward_rfft2(support::random_spatial(gen, 1, 64, 64));
    for (auto kind : {SplitKind::vanilla, SplitKind::gaussian}) {
        const auto p = pyramid_split(s, 5, kind);
        ASSERT_EQ(p.levels.size(), 5u);
        const std::size_t expect[] = {64, 32, 16, 8, 4};
        for (std::size_t l = 0; l < 5; ++l) {
            EXPECT_EQ(p.levels[l].resolution(), expect[l]);
            EXPECT_EQ(p.levels[l].hint.width(), expect[l]);
            EXPECT_EQ(p.levels[l].spectrum.width(), expect[l] / 2 + 1);
            EXPECT_EQ(p.levels[l].hint, inverse_rfft2(p.levels[l].spectrum));
        }
    }
}

TEST(PyramidSplit, ReembeddedLevelsSumToSource) {
    std::mt19937_64 gen(45);
    for (auto kind : {SplitKind::vanilla, SplitKind::gaussian})
        for (std::size_t levels = 1; levels <= 5; ++levels) {
            const auto s = forward_rfft2(support::random_spatial(gen, 2, 64, 64));
            const auto p = pyramid_split(s, levels, kind, 0.3);
            SpectralTensor sum(2, 64, 33);
            for (const auto& level : p.levels)
                sum = spectral_axpy(1.0, sum, 1.0, reembed(level.spectrum, 64, 33));
            EXPECT_LE(max_abs_diff(sum, s), 1e-12) << levels;
            EXPECT_LE(max_abs_diff(pyramid_merge(p), s), 1e-12) << levels;
        }
}

TEST(PyramidSplit, ZeroInputGivesZeroPyramid) {
    const auto p = pyramid_split(SpectralTensor(1, 32, 17), 4, SplitKind::gaussian);
    for (const auto& level : p.levels)
        for (const auto v : level.hint.data())
            EXPECT_EQ(v, 0.0);
    const auto merged = pyramid_merge(p);
    for (const auto& v : merged.data())
        EXPECT_EQ(v, cdouble{});
}

TEST(PyramidSplit, CoarseHintAmplitudeScalesWithArea) {
    // a constant source keeps its whole spectrum in the DC bin, which migrates to the coarsest
    // level; that level's own 1/(h*w) inverse then reports (H*W)/(h*w) times the source value
    const auto s = forward_rfft2(SpatialTensor(1, 64, 64, std::vector<double>(64 * 64, 0.5)));
    const auto p = pyramid_split(s, 5, SplitKind::vanilla);
    for (const auto v : p.levels.back().hint.data())
        EXPECT_NEAR(v, 0.5 * (64.0 * 64.0) / (4.0 * 4.0), 1e-12);
    for (std::size_t l = 0; l < 4; ++l)
        for (const auto v : p.levels[l].hint.data())
            EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(PyramidSplit, RejectsBadLevelCounts) {
    const SpectralTensor s(1, 64, 33);
    EXPECT_THROW(pyramid_split(s, 0, SplitKind::gaussian), ValueError);
    EXPECT_THROW(pyramid_split(s, 6, SplitKind::gaussian), ShapeError);
    EXPECT_THROW(pyramid_split(SpectralTensor(1, 24, 13), 4, SplitKind::vanilla), ShapeError);
    EXPECT_NO_THROW(pyramid_split(SpectralTensor(1, 24, 13), 3, SplitKind::vanilla));
    EXPECT_THROW(pyramid_split(s, 3, SplitKind::gaussian, 0.0), ValueError);
}

TEST(PyramidFormat, DirectoryRoundTrip) {
    std::mt19937_64 gen(46);
    const auto s = forward_rfft2(support::random_spatial(gen, 2, 32, 32));
    const auto p = pyramid_split(s, 4, SplitKind::gaussian, 0.3);
    const auto dir = std::filesystem::temp_directory_path() / "shint_test_pyramid";
    std::filesystem::remove_all(dir);
    write_pyramid(dir, p, {{"note", "x"}});
    for (std::size_t res : {32u, 16u, 8u, 4u}) {
        EXPECT_TRUE(std::filesystem::exists(dir / ("level_" + std::to_string(res) + ".sht")));
        EXPECT_TRUE(std::filesystem::exists(dir / ("level_" + std::to_string(res) + ".spectrum.sht")));
    }
    MetaMap meta;
    const auto q = read_pyramid(dir, &meta);
    EXPECT_EQ(meta.at("kind"), "gaussian");
    EXPECT_EQ(meta.at("levels"), "4");
    EXPECT_EQ(meta.at("note"), "x");
    EXPECT_EQ(q.sigma_ratio, 0.3);
    ASSERT_EQ(q.levels.size(), 4u);
    for (std::size_t l = 0; l < 4; ++l) {
        EXPECT_EQ(q.levels[l].spectrum, p.levels[l].spectrum);
        EXPECT_EQ(q.levels[l].hint, p.levels[l].hint);
    }
    EXPECT_LE(max_abs_diff(pyramid_merge(q), s), 1e-12);
    std::filesystem::remove(dir / "level_8.spectrum.sht");
    EXPECT_THROW(read_pyramid(dir), FormatError);
    std::filesystem::remove_all(dir);
}
