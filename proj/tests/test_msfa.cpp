#include "oracles.hpp"

#include "rawmix/error.hpp"
#include "rawmix/msfa.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace rawmix;

namespace {

std::vector<MsfaPattern> all_patterns()
{
    return {MsfaPattern::imec2x2(), MsfaPattern::imec4x4(), MsfaPattern::imec5x5()};
}

} // namespace

TEST(MsfaPattern, BuiltinsAreBijectionsWithPositiveWavelengths)
{
    for (const auto& p : all_patterns()) {
        const int n = p.band_count();
        std::set<int> seen(p.band_grid().begin(), p.band_grid().end());
        EXPECT_EQ(static_cast<int>(seen.size()), n);
        EXPECT_EQ(*seen.begin(), 0);
        EXPECT_EQ(*seen.rbegin(), n - 1);
        ASSERT_EQ(static_cast<int>(p.wavelengths().size()), n);
        for (double w : p.wavelengths())
            EXPECT_GT(w, 0);
    }
}

TEST(MsfaPattern, WavelengthRanges)
{
    auto range = [](const MsfaPattern& p) {
        auto w = p.wavelengths();
        return std::pair(*std::min_element(w.begin(), w.end()), *std::max_element(w.begin(), w.end()));
    };
    EXPECT_EQ(range(MsfaPattern::imec2x2()), std::pair(465.0, 811.0));
    EXPECT_EQ(range(MsfaPattern::imec4x4()), std::pair(469.0, 633.0));
    EXPECT_EQ(range(MsfaPattern::imec5x5()), std::pair(678.0, 960.0));
}

TEST(MsfaPattern, RejectsRedundantBands)
{
    EXPECT_THROW(MsfaPattern("bad", 2, {0, 1, 1, 3}, {1, 2, 3, 4}), Error);
    EXPECT_THROW(MsfaPattern("bad", 2, {0, 1, 2, 3}, {1, 2, 3}), Error);
    EXPECT_THROW(MsfaPattern("bad", 2, {0, 1, 2, 3}, {1, 2, 0, 4}), Error);
    EXPECT_THROW(MsfaPattern::by_id("bayer"), Error);
}

TEST(BandAt, Examples)
{
    const auto p2 = MsfaPattern::imec2x2();
    RawImage img2(p2, 4, 4);
    EXPECT_EQ(band_at(img2, 0, 0), 0);
    EXPECT_EQ(band_at(img2, 2, 2), 0);

    const auto p5 = MsfaPattern::imec5x5();
    RawImage img5(p5, 10, 10);
    // Hand tiling: x = 7 -> column 2, y = 3 -> row 3.
    EXPECT_EQ(band_at(img5, 7, 3), p5.band_grid()[3 * 5 + 2]);
}

TEST(BandAt, MatchesTilingEverywhere)
{
    for (const auto& p : all_patterns()) {
        RawImage img(p, 3 * p.width(), 2 * p.width());
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                EXPECT_EQ(band_at(img, x, y), oracle::band_of(p, x, y));
    }
}

TEST(BandAt, OutOfBoundsIsCoordinateError)
{
    RawImage img(MsfaPattern::imec2x2(), 4, 4);
    for (auto [x, y] : {std::pair{-1, 0}, {0, -1}, {4, 0}, {0, 4}}) {
        try {
            band_at(img, x, y);
            FAIL() << "no error for (" << x << ", " << y << ")";
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::coordinate);
        }
    }
}

TEST(RawImage, SidesMustBeMultiplesOfB)
{
    try {
        RawImage(MsfaPattern::imec5x5(), 10, 12);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::structure);
    }
}

TEST(PixelUnshuffle, MatchesDefinition)
{
    std::mt19937_64 rng(3);
    for (const auto& p : all_patterns()) {
        const int b = p.width();
        RawImage img = oracle::random_raw(p, 3, 4, rng);
        PlaneCube cube = pixel_unshuffle(img);
        ASSERT_EQ(cube.channels(), b * b);
        ASSERT_EQ(cube.width(), 4);
        ASSERT_EQ(cube.height(), 3);
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 4; ++x)
                for (int j = 0; j < b; ++j)
                    for (int i = 0; i < b; ++i)
                        EXPECT_EQ(cube.at(p.band_grid()[j * b + i], x, y), img.at(x * b + i, y * b + j));
    }
}

TEST(PixelUnshuffle, ImecTwoByTwoExample)
{
    const auto p = MsfaPattern::imec2x2();
    RawImage img(p, 2, 2, {1, 2, 3, 4});
    PlaneCube cube = pixel_unshuffle(img);
    // row-major band numbering: band k sits at cell (k / 2, k % 2)
    EXPECT_EQ(cube.at(0, 0, 0), 1);
    EXPECT_EQ(cube.at(1, 0, 0), 2);
    EXPECT_EQ(cube.at(2, 0, 0), 3);
    EXPECT_EQ(cube.at(3, 0, 0), 4);
}

TEST(PixelShuffle, RoundTripBitwise)
{
    std::mt19937_64 rng(11);
    for (const auto& p : all_patterns())
        for (int k = 0; k < 10; ++k) {
            RawImage img = oracle::random_raw(p, 1 + k % 4, 1 + (k * 3) % 5, rng);
            RawImage back = pixel_shuffle(pixel_unshuffle(img));
            ASSERT_EQ(back.width(), img.width());
            EXPECT_TRUE(std::equal(img.data().begin(), img.data().end(), back.data().begin()));
            PlaneCube cube = pixel_unshuffle(img);
            PlaneCube again = pixel_unshuffle(pixel_shuffle(cube));
            EXPECT_TRUE(std::equal(cube.data().begin(), cube.data().end(), again.data().begin()));
        }
}

TEST(PixelShuffle, WrongChannelCountIsStructureError)
{
    try {
        PlaneCube(MsfaPattern::imec2x2(), 3, 2, 2, std::vector<double>(12));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::structure);
    }
}

TEST(Mosaic, PicksBandOfEachPixel)
{
    std::mt19937_64 rng(5);
    const auto p = MsfaPattern::imec4x4();
    PlaneCube full(p, 8, 12);
    for (double& v : full.data())
        v = std::uniform_real_distribution<double>()(rng);
    RawImage raw = mosaic(full);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 12; ++x)
            EXPECT_EQ(raw.at(x, y), full.at(oracle::band_of(p, x, y), x, y));
    EXPECT_THROW(mosaic(PlaneCube(p, 6, 8)), Error);
}

TEST(TileBandValues, EveryPixelCarriesItsBandValue)
{
    const auto p = MsfaPattern::imec5x5();
    std::vector<double> vals(25);
    for (int i = 0; i < 25; ++i)
        vals[i] = i * 0.5;
    RawImage img = tile_band_values(p, 10, 15, vals);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 15; ++x)
            EXPECT_EQ(img.at(x, y), vals[oracle::band_of(p, x, y)]);
}

TEST(NormalizeU16, FullScale)
{
    EXPECT_EQ(normalize_u16(0), 0.0);
    EXPECT_EQ(normalize_u16(65535), 1.0);
}
