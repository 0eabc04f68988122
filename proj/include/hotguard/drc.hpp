#pragma once

// Two-rule design-rule checker: minimum width (per polygon, by morphological
// opening of the grid raster) and minimum spacing (pairwise, Euclidean).

#include <algorithm>
#include <string>
#include <tuple>
#include <vector>

#include "hotguard/error.hpp"
#include "hotguard/geometry.hpp"
#include "hotguard/image.hpp"

namespace hotguard {

struct RuleDeck {
    Coord min_width_nm = 65;
    Coord min_spacing_nm = 65;
    Coord grid_nm = 5;

    void validate() const {
        if (min_width_nm <= 0 || min_spacing_nm <= 0 || grid_nm <= 0)
            throw ConfigError("rule deck values must be positive");
        if (min_width_nm % grid_nm || min_spacing_nm % grid_nm)
            throw ConfigError("min_width_nm and min_spacing_nm must be multiples of grid_nm");
    }
};

struct DrcViolation {
    enum class Kind { Width, Spacing, OffGrid, OutOfBounds };
    Kind kind;
    Rect location;
    double measured;
    double required;

    friend bool operator==(const DrcViolation&, const DrcViolation&) = default;
};

inline const char* to_string(DrcViolation::Kind k) {
    switch (k) {
        case DrcViolation::Kind::Width: return "width";
        case DrcViolation::Kind::Spacing: return "spacing";
        case DrcViolation::Kind::OffGrid: return "offgrid";
        case DrcViolation::Kind::OutOfBounds: return "outofbounds";
    }
    return "?";
}

namespace detail {

// Width violations of one polygon: connected regions removed by the opening.
inline void check_width(const RectilinearPolygon& poly, const RuleDeck& deck, std::vector<DrcViolation>& out) {
    const int g = deck.grid_nm;
    const int k = deck.min_width_nm / g;
    const Rect bb = poly.bbox();
    // Pad by one pixel so the polygon never touches the raster border.
    const Coord ox = bb.x0 - (bb.x0 % g + g) % g - g;
    const Coord oy = bb.y0 - (bb.y0 % g + g) % g - g;
    const int w = (bb.x1 - ox) / g + 2;
    const int h = (bb.y1 - oy) / g + 2;
    BinaryImage mask(w, h);
    paint_polygon(mask, poly, g, ox, oy);
    const BinaryImage opened = open_square(mask, k);
    if (opened == mask) return;
    BinaryImage removed(w, h);
    for (std::size_t i = 0; i < mask.bits.size(); ++i) removed.bits[i] = mask.bits[i] & !opened.bits[i];
    const auto lab = label_components(removed);
    for (std::size_t c = 0; c < lab.components.size(); ++c) {
        const auto& comp = lab.components[c];
        // Measured width: largest square size (in grid steps) that still covers
        // every pixel of this narrow region.
        int best = 0;
        for (int s = k - 1; s >= 1; --s) {
            const BinaryImage o = open_square(mask, s);
            bool all = true;
            for (std::size_t i = 0; i < mask.bits.size() && all; ++i)
                if (lab.labels[i] == static_cast<std::int32_t>(c) && !o.bits[i]) all = false;
            if (all) {
                best = s;
                break;
            }
        }
        out.push_back({DrcViolation::Kind::Width,
                       {ox + comp.x0 * g, oy + comp.y0 * g, ox + (comp.x1 + 1) * g, oy + (comp.y1 + 1) * g},
                       static_cast<double>(best * g),
                       static_cast<double>(deck.min_width_nm)});
    }
}

inline Rect gap_rect(const Rect& a, const Rect& b) {
    // Region between two bboxes; degenerates to a line/point when they touch.
    const Coord x0 = std::min(std::max(a.x0, b.x0), std::min(a.x1, b.x1));
    const Coord x1 = std::max(std::max(a.x0, b.x0), std::min(a.x1, b.x1));
    const Coord y0 = std::min(std::max(a.y0, b.y0), std::min(a.y1, b.y1));
    const Coord y1 = std::max(std::max(a.y0, b.y0), std::min(a.y1, b.y1));
    return {x0, y0, x1, y1};
}

}  // namespace detail

/// All violations of `clip` under `deck`, sorted by kind then location.
/// An empty result means the clip is DRC-clean.
inline std::vector<DrcViolation> check_clip(const LayoutClip& clip, const RuleDeck& deck = {}) {
    std::vector<DrcViolation> out;
    const auto& polys = clip.polygons;
    for (const auto& p : polys) {
        const Rect bb = p.bbox();
        if (bb.x0 < 0 || bb.y0 < 0 || bb.x1 > kClipSize || bb.y1 > kClipSize)
            out.push_back({DrcViolation::Kind::OutOfBounds, bb, 0.0, 0.0});
        bool off = false;
        for (const auto& v : p.vertices()) off |= (v.x % deck.grid_nm) != 0 || (v.y % deck.grid_nm) != 0;
        if (off) out.push_back({DrcViolation::Kind::OffGrid, bb, 0.0, static_cast<double>(deck.grid_nm)});
        detail::check_width(p, deck, out);
    }
    for (std::size_t i = 0; i < polys.size(); ++i) {
        const Rect bi = polys[i].bbox();
        for (std::size_t j = i + 1; j < polys.size(); ++j) {
            const Rect bj = polys[j].bbox();
            if (rect_gap(bi, bj) >= deck.min_spacing_nm) continue;
            double d = 0.0;
            try {
                d = pair_spacing(polys[i], polys[j]);
            } catch (const OverlapError&) {
                d = 0.0;
            }
            if (d < deck.min_spacing_nm)
                out.push_back({DrcViolation::Kind::Spacing, detail::gap_rect(bi, bj), d,
                               static_cast<double>(deck.min_spacing_nm)});
        }
    }
    std::sort(out.begin(), out.end(), [](const DrcViolation& a, const DrcViolation& b) {
        return std::tie(a.kind, a.location, a.measured) < std::tie(b.kind, b.location, b.measured);
    });
    return out;
}

inline bool is_drc_clean(const LayoutClip& clip, const RuleDeck& deck = {}) { return check_clip(clip, deck).empty(); }

}  // namespace hotguard
