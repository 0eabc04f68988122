#include <gtest/gtest.h>

#include "hotguard/drc.hpp"
#include "../support/oracles.hpp"

using namespace hotguard;

namespace {

RectilinearPolygon rect(Coord x0, Coord y0, Coord x1, Coord y1) { return RectilinearPolygon::from_rect({x0, y0, x1, y1}); }

std::size_t count_kind(const std::vector<DrcViolation>& v, DrcViolation::Kind k) {
    return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [&](const auto& x) { return x.kind == k; }));
}

}  // namespace

TEST(Drc, SpacingJustBelowMinimum) {
    // 64 nm is off the 5 nm grid; use a 1 nm deck grid so only spacing can fire.
    RuleDeck deck{65, 65, 1};
    LayoutClip c{"c", {rect(100, 100, 170, 600), rect(234, 100, 304, 600)}};
    const auto v = check_clip(c, deck);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, DrcViolation::Kind::Spacing);
    EXPECT_DOUBLE_EQ(v[0].measured, 64.0);
    EXPECT_DOUBLE_EQ(v[0].required, 65.0);
}

TEST(Drc, MinimumWidthWireIsClean) {
    LayoutClip c{"c", {rect(100, 100, 165, 800)}};
    EXPECT_TRUE(check_clip(c).empty());
}

TEST(Drc, MinimumSpacingIsClean) {
    LayoutClip c{"c", {rect(100, 100, 170, 600), rect(235, 100, 305, 600)}};
    EXPECT_TRUE(check_clip(c).empty());
}

TEST(Drc, EmptyClipIsClean) { EXPECT_TRUE(check_clip(LayoutClip{}).empty()); }

TEST(Drc, NarrowWireFlagged) {
    LayoutClip c{"c", {rect(100, 100, 160, 800)}};
    const auto v = check_clip(c);
    ASSERT_EQ(count_kind(v, DrcViolation::Kind::Width), 1u);
    EXPECT_DOUBLE_EQ(v[0].measured, 60.0);
}

TEST(Drc, NarrowNeckOfLShapeFlagged) {
    // 200x200 block with a 40 nm tall arm sticking out to the right.
    LayoutClip c{"c", {RectilinearPolygon({{0, 0}, {400, 0}, {400, 40}, {200, 40}, {200, 200}, {0, 200}})}};
    const auto v = check_clip(c);
    ASSERT_EQ(count_kind(v, DrcViolation::Kind::Width), 1u);
    EXPECT_GE(v[0].location.x1, 400);
}

TEST(Drc, OffGridAndOutOfBounds) {
    LayoutClip c{"c", {rect(3, 100, 103, 200), rect(1050, 1000, 1115, 1100)}};
    const auto v = check_clip(c);
    EXPECT_EQ(count_kind(v, DrcViolation::Kind::OffGrid), 1u);
    EXPECT_EQ(count_kind(v, DrcViolation::Kind::OutOfBounds), 1u);
}

TEST(Drc, DiagonalSpacingIsEuclidean) {
    // Corner offsets (40, 40): Euclidean 56.6 < 65 although each axis gap is only 40.
    LayoutClip bad{"c", {rect(0, 0, 100, 100), rect(140, 140, 240, 240)}};
    EXPECT_EQ(count_kind(check_clip(bad), DrcViolation::Kind::Spacing), 1u);
    // Offsets (50, 50): 70.7 >= 65.
    LayoutClip ok{"c", {rect(0, 0, 100, 100), rect(150, 150, 250, 250)}};
    EXPECT_TRUE(check_clip(ok).empty());
}

TEST(Drc, OverlapReportsZeroSpacing) {
    LayoutClip c{"c", {rect(0, 0, 100, 100), rect(50, 50, 150, 150)}};
    const auto v = check_clip(c);
    ASSERT_EQ(count_kind(v, DrcViolation::Kind::Spacing), 1u);
    EXPECT_DOUBLE_EQ(v[0].measured, 0.0);
}

TEST(Drc, AgreesWithBruteForceRaster) {
    Rng rng(2024);
    const RuleDeck deck{};
    int compared = 0;
    for (int clip = 0; clip < 220; ++clip) {
        std::vector<RectilinearPolygon> polys;
        for (int k = 0; k < 3; ++k) polys.push_back(oracle::random_shape(rng, 240));
        for (std::size_t i = 0; i < polys.size(); ++i)
            for (std::size_t j = i + 1; j < polys.size(); ++j) {
                const double brute = oracle::brute_spacing(polys[i], polys[j]);
                double d;
                try {
                    d = pair_spacing(polys[i], polys[j]);
                } catch (const OverlapError&) {
                    EXPECT_EQ(brute, 0.0);
                    continue;
                }
                EXPECT_NEAR(d, brute, 1.0);
                LayoutClip two{"p", {polys[i], polys[j]}};
                EXPECT_EQ(count_kind(check_clip(two, deck), DrcViolation::Kind::Spacing) == 1, d < deck.min_spacing_nm);
                ++compared;
            }
    }
    EXPECT_GT(compared, 300);
}

TEST(Drc, DeckValidation) {
    EXPECT_THROW((RuleDeck{0, 65, 5}.validate()), ConfigError);
    EXPECT_THROW((RuleDeck{66, 65, 5}.validate()), ConfigError);
    EXPECT_NO_THROW(RuleDeck{}.validate());
}
