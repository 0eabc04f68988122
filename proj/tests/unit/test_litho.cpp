#include <gtest/gtest.h>

#include "hotguard/calibrate.hpp"
#include "hotguard/litho.hpp"
#include "hotguard/synthesis.hpp"

using namespace hotguard;

namespace {

RectilinearPolygon rect(Coord x0, Coord y0, Coord x1, Coord y1) { return RectilinearPolygon::from_rect({x0, y0, x1, y1}); }

LithoConfig calibrated() {
    LithoConfig c;
    c.sigma_nm = 30;
    c.threshold = 0.23;
    return c;
}

// Two 300 nm long, 70 nm wide vertical lines centered on the ROI, `gap` apart.
LayoutClip line_pair(Coord gap) {
    const Coord x0 = 555 - gap / 2 - 70;
    return {"pair", {rect(x0, 405, x0 + 70, 705), rect(x0 + 70 + gap, 405, x0 + 140 + gap, 705)}};
}

// Same pair stretched to 700 nm: the bridge now runs mostly outside the ROI.
LayoutClip long_pair(Coord gap) {
    const Coord x0 = 555 - gap / 2 - 70;
    return {"pair", {rect(x0, 200, x0 + 70, 900), rect(x0 + 70 + gap, 200, x0 + 140 + gap, 900)}};
}

}  // namespace

TEST(Litho, EmptyClipHasNoMarkers) {
    const auto r = simulate(LayoutClip{}, calibrated());
    EXPECT_TRUE(r.markers.empty());
    EXPECT_EQ(r.label, Label::NonHotspot);
    EXPECT_EQ(r.printed.count(), 0);
}

TEST(Litho, IsolatedLargeRectPrintsClean) {
    for (const auto& cfg : {LithoConfig{}, calibrated()}) {
        const auto r = simulate({"sq", {rect(405, 405, 705, 705)}}, cfg);
        EXPECT_TRUE(r.markers.empty());
        EXPECT_EQ(r.label, Label::NonHotspot);
        EXPECT_GT(r.printed.count(), 0);
    }
}

TEST(Litho, MinimumGapLinePairGolden) {
    // Frozen output of the surrogate: at the minimum legal gap the calibrated
    // model bridges the two lines inside the ROI.
    const auto r = simulate(line_pair(65), calibrated());
    EXPECT_EQ(r.label, Label::Hotspot);
    ASSERT_FALSE(r.markers.empty());
    EXPECT_EQ(r.markers[0].kind, ErrorMarker::Kind::Bridge);
    EXPECT_EQ(r.markers[0].rect, (Rect{545, 425, 570, 685}));
    // A wide gap prints clean.
    EXPECT_EQ(simulate(line_pair(150), calibrated()).label, Label::NonHotspot);
    // Under 30% of the long bridge lies in the ROI.
    const auto l = simulate(long_pair(65), calibrated());
    ASSERT_EQ(l.markers.size(), 1u);
    EXPECT_EQ(l.label, Label::NonHotspot);
}

TEST(Litho, MarkerFullyInsideRoiIsHotspot) {
    std::vector<ErrorMarker> m{{{500, 500, 550, 550}, ErrorMarker::Kind::Bridge, 2500}};
    EXPECT_EQ(label_from_markers(m), Label::Hotspot);
}

TEST(Litho, ThirtyPercentThresholdIsInclusive) {
    // 100x100 marker; x-overlap with the ROI of 29 nm vs 30 nm.
    std::vector<ErrorMarker> m29{{{kRoi.x1 - 29, 500, kRoi.x1 + 71, 600}, ErrorMarker::Kind::Pinch, 10000}};
    std::vector<ErrorMarker> m30{{{kRoi.x1 - 30, 500, kRoi.x1 + 70, 600}, ErrorMarker::Kind::Pinch, 10000}};
    EXPECT_EQ(label_from_markers(m29), Label::NonHotspot);
    EXPECT_EQ(label_from_markers(m30), Label::Hotspot);
    EXPECT_EQ(label_from_markers({}), Label::NonHotspot);
}

TEST(Litho, RectAerialMatchesDenseConvolution) {
    CorpusParams p;
    p.clip_count = 12;
    p.seed = 99;
    const auto corpus = generate_corpus(p);
    for (const auto& clip : corpus) {
        for (double sigma : {25.0, 32.5}) {
            LithoConfig cfg;
            cfg.sigma_nm = sigma;
            const auto prep = prepare_litho(clip, cfg);
            const auto fast = aerial_image(prep, sigma);
            const auto dense = aerial_image(prep.drawn, sigma, cfg.pixel_nm);
            ASSERT_EQ(fast.intensity.size(), dense.intensity.size());
            double worst = 0;
            for (std::size_t i = 0; i < fast.intensity.size(); ++i)
                worst = std::max(worst, std::abs(static_cast<double>(fast.intensity[i]) - dense.intensity[i]));
            EXPECT_LT(worst, 1e-5) << clip.id;
        }
    }
}

TEST(Litho, AerialOfFullMaskIsOne) {
    BinaryImage all(222, 222);
    std::fill(all.bits.begin(), all.bits.end(), 1);
    const auto a = aerial_image(all, 30.0, 5);
    for (float v : a.intensity) ASSERT_NEAR(v, 1.0f, 1e-5f);
}

TEST(Litho, LowerThresholdNeverRemovesPrintedPixels) {
    const auto clip = line_pair(80);
    auto lo = calibrated(), hi = calibrated();
    lo.threshold = 0.2;
    hi.threshold = 0.4;
    const auto a = simulate(clip, lo).printed, b = simulate(clip, hi).printed;
    for (std::size_t i = 0; i < a.bits.size(); ++i) ASSERT_GE(a.bits[i], b.bits[i]);
}

TEST(Litho, SmallMarkersIgnored) {
    auto cfg = calibrated();
    const auto base = simulate(line_pair(65), cfg);
    ASSERT_FALSE(base.markers.empty());
    cfg.min_marker_area_nm2 = 1e9;
    EXPECT_TRUE(simulate(line_pair(65), cfg).markers.empty());
}

TEST(Litho, ConfigValidation) {
    LithoConfig c;
    c.pixel_nm = 7;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.threshold = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Calibration, SingleConfigSearchSpace) {
    CorpusParams p;
    p.clip_count = 500;
    p.seed = 3;
    const auto corpus = generate_corpus(p);
    GenParams gen;
    gen.seed = 4;
    CalibrationTargets t;
    t.sigmas = {30.0};
    t.thresholds = {0.23};
    t.cross_parents = 60;
    t.variants_per_parent = 5;
    // A band that includes every rate: the single point is returned.
    t.cross_rate_min = 0.0;
    t.cross_rate_max = 1.0;
    const auto ok = calibrate(corpus, LithoConfig{}, gen, t);
    EXPECT_EQ(ok.config.sigma_nm, 30.0);
    EXPECT_EQ(ok.config.threshold, 0.23);
    ASSERT_EQ(ok.table.size(), 1u);
    // A band no rate can satisfy: calibration fails.
    t.cross_rate_min = 0.9;
    EXPECT_THROW(calibrate(corpus, LithoConfig{}, gen, t), CalibrationError);
}

TEST(Calibration, TooFewClipsRejected) {
    EXPECT_THROW(calibrate(std::vector<LayoutClip>(10), LithoConfig{}, GenParams{}, CalibrationTargets{}), CalibrationError);
}
