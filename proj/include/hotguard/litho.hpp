#pragma once

// Surrogate lithography: Gaussian aerial image, constant-threshold resist,
// pinch/bridge defect extraction and the ROI overlap labeling rule.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "hotguard/error.hpp"
#include "hotguard/geometry.hpp"
#include "hotguard/image.hpp"
#include "hotguard/manifest.hpp"

namespace hotguard {

struct LithoConfig {
    int pixel_nm = 5;
    double sigma_nm = 25.0;
    double threshold = 0.45;
    double min_marker_area_nm2 = 1000.0;
    Coord dilation_margin_nm = 20;

    void validate() const {
        if (pixel_nm <= 0 || kClipSize % pixel_nm != 0)
            throw ConfigError("litho pixel_nm must divide " + std::to_string(kClipSize));
        if (!(sigma_nm > 0)) throw ConfigError("sigma_nm must be positive");
        if (!(threshold > 0 && threshold < 1)) throw ConfigError("threshold must lie in (0, 1)");
        if (min_marker_area_nm2 < 0) throw ConfigError("min_marker_area_nm2 must be non-negative");
        if (dilation_margin_nm < 0) throw ConfigError("dilation_margin_nm must be non-negative");
    }
    friend bool operator==(const LithoConfig&, const LithoConfig&) = default;
};

struct ErrorMarker {
    enum class Kind { Pinch, Bridge };
    Rect rect;
    Kind kind;
    double area;  // defect component area in nm^2
    friend bool operator==(const ErrorMarker&, const ErrorMarker&) = default;
};

struct LithoResult {
    BinaryImage printed;
    std::vector<ErrorMarker> markers;
    Label label = Label::NonHotspot;
    friend bool operator==(const LithoResult&, const LithoResult&) = default;
};

/// Hotspot iff some marker has at least 30% of its area inside the ROI.
inline Label label_from_markers(const std::vector<ErrorMarker>& markers, const Rect& roi = kRoi) {
    for (const auto& m : markers)
        if (static_cast<double>(intersection_area(m.rect, roi)) >= 0.30 * m.area) return Label::Hotspot;
    return Label::NonHotspot;
}

struct AerialImage {
    int size = 0;
    std::vector<float> intensity;  // row-major, row 0 = lowest y
    float at(int x, int y) const { return intensity[static_cast<std::size_t>(y) * size + x]; }
};

/// Normalized 1-D Gaussian taps for radius ceil(4 sigma / pixel).
inline std::vector<double> gaussian_taps(double sigma_nm, int pixel_nm) {
    const int radius = static_cast<int>(std::ceil(4.0 * sigma_nm / pixel_nm));
    std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        const double d = static_cast<double>(k) * pixel_nm;
        taps[k + radius] = std::exp(-d * d / (2.0 * sigma_nm * sigma_nm));
        sum += taps[k + radius];
    }
    for (auto& t : taps) t /= sum;
    return taps;
}

/// Mask convolved with a unit-mass separable Gaussian, half-sample reflective border.
inline AerialImage aerial_image(const BinaryImage& mask, double sigma_nm, int pixel_nm) {
    const int n = mask.width;
    const auto taps = gaussian_taps(sigma_nm, pixel_nm);
    const int radius = static_cast<int>(taps.size() / 2);
    if (radius >= n) throw ConfigError("Gaussian radius exceeds the raster size");
    auto reflect = [n](int i) { return i < 0 ? -i - 1 : (i >= n ? 2 * n - i - 1 : i); };

    std::vector<float> tmp(static_cast<std::size_t>(n) * n, 0.0f);
    std::vector<float> row(static_cast<std::size_t>(n + 2 * radius));
    for (int y = 0; y < n; ++y) {
        bool any = false;
        for (int i = -radius; i < n + radius; ++i) {
            row[i + radius] = mask.at(reflect(i), y);
            any |= row[i + radius] != 0.0f;
        }
        if (!any) continue;
        for (int x = 0; x < n; ++x) {
            double acc = 0.0;
            const float* src = &row[x];
            for (std::size_t k = 0; k < taps.size(); ++k) acc += taps[k] * src[k];
            tmp[static_cast<std::size_t>(y) * n + x] = static_cast<float>(acc);
        }
    }
    AerialImage out;
    out.size = n;
    out.intensity.assign(static_cast<std::size_t>(n) * n, 0.0f);
    std::vector<double> acc(static_cast<std::size_t>(n));
    for (int y = 0; y < n; ++y) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int k = -radius; k <= radius; ++k) {
            const float* src = &tmp[static_cast<std::size_t>(reflect(y + k)) * n];
            const double w = taps[k + radius];
            for (int x = 0; x < n; ++x) acc[x] += w * src[x];
        }
        for (int x = 0; x < n; ++x) out.intensity[static_cast<std::size_t>(y) * n + x] = static_cast<float>(acc[x]);
    }
    return out;
}

/// Config-independent rasters shared by every (sigma, threshold) evaluation of a clip.
struct LithoPrep {
    int pixel_nm = 0;
    BinaryImage drawn;
    BinaryImage dilated;
    std::vector<std::int32_t> owner;  // polygon index per drawn pixel, -1 elsewhere
    std::vector<Rect> pixel_rects;     // disjoint half-open pixel-index rects covering `drawn`
    int margin_px = 0;
};

inline LithoPrep prepare_litho(const LayoutClip& clip, const LithoConfig& cfg) {
    cfg.validate();
    LithoPrep prep;
    prep.pixel_nm = cfg.pixel_nm;
    const int n = kClipSize / cfg.pixel_nm;
    prep.drawn = BinaryImage(n, n);
    prep.owner.assign(static_cast<std::size_t>(n) * n, -1);
    for (std::size_t i = 0; i < clip.polygons.size(); ++i) {
        for (const auto& r : to_rects(clip.polygons[i])) {
            const auto [xa, xb] = detail::center_range(r.x0, r.x1, cfg.pixel_nm, n);
            const auto [ya, yb] = detail::center_range(r.y0, r.y1, cfg.pixel_nm, n);
            if (xa < xb && ya < yb) prep.pixel_rects.push_back({xa, ya, xb, yb});
            for (int y = ya; y < yb; ++y)
                for (int x = xa; x < xb; ++x) {
                    const auto k = static_cast<std::size_t>(y) * n + x;
                    prep.drawn.bits[k] = 1;
                    prep.owner[k] = static_cast<std::int32_t>(i);
                }
        }
    }
    prep.margin_px = (cfg.dilation_margin_nm + cfg.pixel_nm - 1) / cfg.pixel_nm;
    prep.dilated = dilate_square(prep.drawn, prep.margin_px);
    return prep;
}

/// Same discrete convolution as aerial_image(mask), evaluated rect by rect: a
/// pixel rect blurs to an outer product of cumulative-tap differences, and the
/// reflective border adds mirrored copies of rects near the edges.
inline AerialImage aerial_image(const LithoPrep& prep, double sigma_nm) {
    const int n = prep.drawn.width;
    const auto taps = gaussian_taps(sigma_nm, prep.pixel_nm);
    const int radius = static_cast<int>(taps.size() / 2);
    if (radius >= n) throw ConfigError("Gaussian radius exceeds the raster size");
    // cum[j] = sum of taps[0 .. j-1]; tap k (offset k - radius).
    std::vector<double> cum(taps.size() + 1, 0.0);
    for (std::size_t k = 0; k < taps.size(); ++k) cum[k + 1] = cum[k] + taps[k];
    // Blur of the 1-D indicator of [a, b) at x: sum of taps with offset in [x-b+1, x-a].
    auto blur1 = [&](int a, int b, int x) {
        const int lo = std::clamp(x - b + 1 + radius, 0, 2 * radius + 1);
        const int hi = std::clamp(x - a + radius + 1, 0, 2 * radius + 1);
        return hi > lo ? cum[hi] - cum[lo] : 0.0;
    };
    // Profile of [a, b) plus its mirror images across both borders.
    std::vector<double> px(static_cast<std::size_t>(n)), py(static_cast<std::size_t>(n));
    auto profile = [&](int a, int b, std::vector<double>& out, int& lo, int& hi) {
        lo = std::max(0, a - radius);
        hi = std::min(n, b + radius);
        for (int x = lo; x < hi; ++x) {
            double v = blur1(a, b, x);
            if (a < radius) v += blur1(-b, -a, x);
            if (b > n - radius) v += blur1(2 * n - b, 2 * n - a, x);
            out[x] = v;
        }
    };
    std::vector<double> acc(static_cast<std::size_t>(n) * n, 0.0);
    for (const auto& r : prep.pixel_rects) {
        int x0, x1, y0, y1;
        profile(r.x0, r.x1, px, x0, x1);
        profile(r.y0, r.y1, py, y0, y1);
        for (int y = y0; y < y1; ++y) {
            const double wy = py[y];
            double* row = &acc[static_cast<std::size_t>(y) * n];
            for (int x = x0; x < x1; ++x) row[x] += wy * px[x];
        }
    }
    AerialImage out;
    out.size = n;
    out.intensity.resize(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out.intensity[i] = static_cast<float>(acc[i]);
    return out;
}

/// Resist threshold + defect extraction on a precomputed aerial image.
inline LithoResult develop(const LithoPrep& prep, const AerialImage& aerial, const LithoConfig& cfg) {
    const int n = prep.drawn.width;
    const int p = prep.pixel_nm;
    const double px_area = static_cast<double>(p) * p;
    const auto thr = static_cast<float>(cfg.threshold);
    LithoResult res;
    res.printed = BinaryImage(n, n);
    for (std::size_t i = 0; i < res.printed.bits.size(); ++i) res.printed.bits[i] = aerial.intensity[i] >= thr;

    auto to_rect = [p](const Component& c) { return Rect{c.x0 * p, c.y0 * p, (c.x1 + 1) * p, (c.y1 + 1) * p}; };

    BinaryImage pinch(n, n);
    for (std::size_t i = 0; i < pinch.bits.size(); ++i) pinch.bits[i] = prep.drawn.bits[i] & !res.printed.bits[i];
    for (const auto& c : label_components(pinch).components) {
        const double area = static_cast<double>(c.pixels) * px_area;
        if (area >= cfg.min_marker_area_nm2) res.markers.push_back({to_rect(c), ErrorMarker::Kind::Pinch, area});
    }

    BinaryImage extra(n, n);
    for (std::size_t i = 0; i < extra.bits.size(); ++i) extra.bits[i] = res.printed.bits[i] & !prep.dilated.bits[i];
    const auto lab = label_components(extra);
    const int r = prep.margin_px;
    for (std::size_t ci = 0; ci < lab.components.size(); ++ci) {
        const auto& c = lab.components[ci];
        const double area = static_cast<double>(c.pixels) * px_area;
        if (area < cfg.min_marker_area_nm2) continue;
        // Polygons whose dilation is 4-adjacent to this component.
        std::set<std::int32_t> touched;
        for (int y = c.y0; y <= c.y1 && touched.size() < 2; ++y)
            for (int x = c.x0; x <= c.x1 && touched.size() < 2; ++x) {
                if (lab.labels[static_cast<std::size_t>(y) * n + x] != static_cast<std::int32_t>(ci)) continue;
                const int nx[4] = {x - 1, x + 1, x, x};
                const int ny[4] = {y, y, y - 1, y + 1};
                for (int k = 0; k < 4; ++k) {
                    if (nx[k] < 0 || ny[k] < 0 || nx[k] >= n || ny[k] >= n) continue;
                    if (!prep.dilated.at(nx[k], ny[k])) continue;
                    for (int dy = -r; dy <= r; ++dy)
                        for (int dx = -r; dx <= r; ++dx) {
                            const int qx = nx[k] + dx, qy = ny[k] + dy;
                            if (qx < 0 || qy < 0 || qx >= n || qy >= n) continue;
                            const auto o = prep.owner[static_cast<std::size_t>(qy) * n + qx];
                            if (o >= 0) touched.insert(o);
                        }
                }
            }
        if (touched.size() >= 2) res.markers.push_back({to_rect(c), ErrorMarker::Kind::Bridge, area});
    }
    res.label = label_from_markers(res.markers);
    return res;
}

inline LithoResult simulate(const LayoutClip& clip, const LithoConfig& cfg) {
    const auto prep = prepare_litho(clip, cfg);
    return develop(prep, aerial_image(prep, cfg.sigma_nm), cfg);
}

}  // namespace hotguard
