#pragma once

// Integer-nanometer rectilinear geometry for layout clips.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hotguard/error.hpp"
#include "hotguard/image.hpp"

namespace hotguard {

using Coord = std::int32_t;
using Area = std::int64_t;

inline constexpr Coord kClipSize = 1110;
inline constexpr Coord kRoiSize = 195;

struct Point {
    Coord x = 0;
    Coord y = 0;
    friend bool operator==(const Point&, const Point&) = default;
};

struct Rect {
    Coord x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    Area area() const { return static_cast<Area>(x1 - x0) * (y1 - y0); }
    bool valid() const { return x0 < x1 && y0 < y1; }
    friend bool operator==(const Rect&, const Rect&) = default;
    friend auto operator<=>(const Rect&, const Rect&) = default;
};

/// Area of the intersection of two rects (0 when disjoint or touching).
inline Area intersection_area(const Rect& a, const Rect& b) {
    const Coord w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const Coord h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
    return (w > 0 && h > 0) ? static_cast<Area>(w) * h : 0;
}

/// Euclidean gap between two closed rects (0 when they touch or overlap).
inline double rect_gap(const Rect& a, const Rect& b) {
    const double dx = std::max({0, a.x0 - b.x1, b.x0 - a.x1});
    const double dy = std::max({0, a.y0 - b.y1, b.y0 - a.y1});
    return std::hypot(dx, dy);
}

/// The centered 195 x 195 region of interest. The exact center box is
/// (457.5, 457.5)-(652.5, 652.5); we floor the low corner and the high corner.
inline constexpr Rect kRoi{457, 457, 652, 652};

struct Segment {
    Point a, b;
};

namespace detail {

inline Area shoelace2(std::span<const Point> v) {
    Area s = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& p = v[i];
        const auto& q = v[(i + 1) % v.size()];
        s += static_cast<Area>(p.x) * q.y - static_cast<Area>(q.x) * p.y;
    }
    return s;
}

// Closed axis-aligned segments intersect (including touching)?
inline bool segments_touch(const Segment& s, const Segment& t) {
    const Coord sx0 = std::min(s.a.x, s.b.x), sx1 = std::max(s.a.x, s.b.x);
    const Coord sy0 = std::min(s.a.y, s.b.y), sy1 = std::max(s.a.y, s.b.y);
    const Coord tx0 = std::min(t.a.x, t.b.x), tx1 = std::max(t.a.x, t.b.x);
    const Coord ty0 = std::min(t.a.y, t.b.y), ty1 = std::max(t.a.y, t.b.y);
    return sx0 <= tx1 && tx0 <= sx1 && sy0 <= ty1 && ty0 <= sy1;
}

inline double point_segment_dist(Point p, const Segment& s) {
    const Coord x0 = std::min(s.a.x, s.b.x), x1 = std::max(s.a.x, s.b.x);
    const Coord y0 = std::min(s.a.y, s.b.y), y1 = std::max(s.a.y, s.b.y);
    const double dx = std::max({0, x0 - p.x, p.x - x1});
    const double dy = std::max({0, y0 - p.y, p.y - y1});
    return std::hypot(dx, dy);
}

inline double segment_dist(const Segment& s, const Segment& t) {
    if (segments_touch(s, t)) return 0.0;
    return std::min({point_segment_dist(s.a, t), point_segment_dist(s.b, t),
                     point_segment_dist(t.a, s), point_segment_dist(t.b, s)});
}

}  // namespace detail

/// Closed rectilinear polygon stored counter-clockwise without a repeated
/// closing vertex. Construction validates every invariant.
class RectilinearPolygon {
public:
    RectilinearPolygon() = default;

    /// Accepts either orientation and an optional explicit closing vertex.
    /// Stored counter-clockwise, starting at the lowest-leftmost vertex.
    explicit RectilinearPolygon(std::vector<Point> vertices) : v_(std::move(vertices)) {
        if (v_.size() >= 2 && v_.front() == v_.back()) v_.pop_back();
        validate_structure(v_);
        if (detail::shoelace2(v_) < 0) std::reverse(v_.begin(), v_.end());
        std::rotate(v_.begin(), std::min_element(v_.begin(), v_.end(), [](const Point& a, const Point& b) {
                        return a.x != b.x ? a.x < b.x : a.y < b.y;
                    }), v_.end());
    }

    static RectilinearPolygon from_rect(const Rect& r) {
        return RectilinearPolygon({{r.x0, r.y0}, {r.x1, r.y0}, {r.x1, r.y1}, {r.x0, r.y1}});
    }

    const std::vector<Point>& vertices() const { return v_; }
    std::size_t size() const { return v_.size(); }

    Segment edge(std::size_t i) const { return {v_[i], v_[(i + 1) % v_.size()]}; }

    Rect bbox() const {
        Rect r{v_[0].x, v_[0].y, v_[0].x, v_[0].y};
        for (const auto& p : v_) {
            r.x0 = std::min(r.x0, p.x);
            r.y0 = std::min(r.y0, p.y);
            r.x1 = std::max(r.x1, p.x);
            r.y1 = std::max(r.y1, p.y);
        }
        return r;
    }

    friend bool operator==(const RectilinearPolygon&, const RectilinearPolygon&) = default;

    /// Throws StructuralError unless `v` (open form) is a simple rectilinear loop.
    static void validate_structure(const std::vector<Point>& v) {
        const std::size_t n = v.size();
        if (n < 4) throw StructuralError("polygon needs at least 4 vertices, got " + std::to_string(n));
        if (n % 2 != 0) throw StructuralError("rectilinear polygon must have an even vertex count");
        for (std::size_t i = 0; i < n; ++i) {
            const auto& p = v[i];
            const auto& q = v[(i + 1) % n];
            const bool h = p.y == q.y;
            const bool vert = p.x == q.x;
            if (h && vert) throw StructuralError("zero-length edge at vertex " + std::to_string(i));
            if (!h && !vert) throw StructuralError("non-rectilinear edge at vertex " + std::to_string(i));
            const auto& r = v[(i + 2) % n];
            const bool h2 = q.y == r.y;
            if (h == h2) throw StructuralError("consecutive edges do not alternate at vertex " + std::to_string(i + 1));
        }
        for (std::size_t i = 0; i < n; ++i) {
            const Segment s{v[i], v[(i + 1) % n]};
            for (std::size_t j = i + 2; j < n; ++j) {
                if (i == 0 && j == n - 1) continue;  // adjacent through the closing vertex
                const Segment t{v[j], v[(j + 1) % n]};
                if (detail::segments_touch(s, t))
                    throw StructuralError("self-intersection between edges " + std::to_string(i) + " and " +
                                          std::to_string(j));
            }
        }
        if (detail::shoelace2(v) == 0) throw StructuralError("polygon has zero area");
    }

private:
    std::vector<Point> v_;
};

/// Exact enclosed area in nm^2.
inline Area polygon_area(const RectilinearPolygon& poly) {
    return detail::shoelace2(poly.vertices()) / 2;
}

/// Disjoint rectangles whose union is the polygon (vertical slab decomposition,
/// horizontally merged). Rects are half-open-compatible: they share edges only.
inline std::vector<Rect> to_rects(const RectilinearPolygon& poly) {
    const auto& v = poly.vertices();
    std::vector<Coord> xs;
    xs.reserve(v.size());
    for (const auto& p : v) xs.push_back(p.x);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    std::vector<Rect> out;
    std::vector<Rect> open;  // rects from the previous slab, candidates for merging
    std::vector<Coord> ys;
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
        const Coord xa = xs[k], xb = xs[k + 1];
        ys.clear();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto& p = v[i];
            const auto& q = v[(i + 1) % v.size()];
            if (p.y != q.y) continue;
            if (std::min(p.x, q.x) <= xa && std::max(p.x, q.x) >= xb) ys.push_back(p.y);
        }
        std::sort(ys.begin(), ys.end());
        std::vector<Rect> current;
        for (std::size_t i = 0; i + 1 < ys.size(); i += 2) current.push_back({xa, ys[i], xb, ys[i + 1]});
        std::vector<Rect> next_open;
        for (auto r : current) {
            auto it = std::find_if(open.begin(), open.end(),
                                   [&](const Rect& o) { return o.x1 == xa && o.y0 == r.y0 && o.y1 == r.y1; });
            if (it != open.end()) {
                r.x0 = it->x0;
                open.erase(it);
            }
            next_open.push_back(r);
        }
        out.insert(out.end(), open.begin(), open.end());
        open = std::move(next_open);
    }
    out.insert(out.end(), open.begin(), open.end());
    std::sort(out.begin(), out.end());
    return out;
}

/// Minimum Euclidean distance between the boundaries of two disjoint polygons.
/// Touching polygons are 0 apart; interiors that overlap raise OverlapError.
inline double pair_spacing(const RectilinearPolygon& a, const RectilinearPolygon& b) {
    const auto ra = to_rects(a);
    const auto rb = to_rects(b);
    for (const auto& p : ra)
        for (const auto& q : rb)
            if (intersection_area(p, q) > 0) throw OverlapError("polygons overlap");
    double best = INFINITY;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) {
            best = std::min(best, detail::segment_dist(a.edge(i), b.edge(j)));
            if (best == 0.0) return 0.0;
        }
    return best;
}

/// True iff the polygon interior has positive-area overlap with the rect.
inline bool intersects(const RectilinearPolygon& poly, const Rect& r) {
    for (const auto& pr : to_rects(poly))
        if (intersection_area(pr, r) > 0) return true;
    return false;
}

/// Translate edge `edge_index` (from vertex i to i+1) along its outward normal by
/// `dist` nm; positive grows the polygon. Throws RejectedMoveError when the result
/// would be degenerate, self-intersecting, or leave [0, bound]^2.
inline RectilinearPolygon move_edge(const RectilinearPolygon& poly, std::size_t edge_index, Coord dist,
                                    Coord bound = kClipSize) {
    const auto& v = poly.vertices();
    const std::size_t n = v.size();
    if (edge_index >= n) throw RejectedMoveError("edge index out of range");
    if (dist == 0) return poly;
    const Point p = v[edge_index];
    const Point q = v[(edge_index + 1) % n];
    // CCW: outward normal of direction (dx, dy) is (dy, -dx).
    const Coord nx = (q.y > p.y) - (q.y < p.y);
    const Coord ny = -((q.x > p.x) - (q.x < p.x));
    std::vector<Point> w = v;
    for (std::size_t k : {edge_index, (edge_index + 1) % n}) {
        w[k].x += nx * dist;
        w[k].y += ny * dist;
    }
    // Adjacent edges must keep their direction and nonzero length.
    auto same_dir = [](Point a0, Point a1, Point b0, Point b1) {
        const auto sx = [](Coord d) { return (d > 0) - (d < 0); };
        return sx(a1.x - a0.x) == sx(b1.x - b0.x) && sx(a1.y - a0.y) == sx(b1.y - b0.y) && !(b0 == b1);
    };
    const std::size_t prev = (edge_index + n - 1) % n;
    const std::size_t next = (edge_index + 2) % n;
    if (!same_dir(v[prev], v[edge_index], w[prev], w[edge_index]) ||
        !same_dir(v[(edge_index + 1) % n], v[next], w[(edge_index + 1) % n], w[next]))
        throw RejectedMoveError("edge move collapses the polygon");
    for (const auto& pt : w)
        if (pt.x < 0 || pt.y < 0 || pt.x > bound || pt.y > bound)
            throw RejectedMoveError("edge move leaves the clip bounds");
    if (detail::shoelace2(w) <= 0) throw RejectedMoveError("edge move inverted the polygon");
    try {
        return RectilinearPolygon(std::move(w));
    } catch (const StructuralError& e) {
        throw RejectedMoveError(std::string("edge move rejected: ") + e.what());
    }
}

struct LayoutClip {
    std::string id;
    std::vector<RectilinearPolygon> polygons;
    static constexpr Coord width_nm = kClipSize;
    static constexpr Coord height_nm = kClipSize;
    static constexpr Rect roi = kRoi;

    friend bool operator==(const LayoutClip& a, const LayoutClip& b) {
        return a.id == b.id && a.polygons == b.polygons;
    }
};

/// Throws unless every polygon lies inside the clip and no two overlap.
inline void validate_clip(const LayoutClip& clip) {
    for (const auto& p : clip.polygons) {
        const auto b = p.bbox();
        if (b.x0 < 0 || b.y0 < 0 || b.x1 > kClipSize || b.y1 > kClipSize)
            throw StructuralError("polygon outside clip bounds in " + clip.id);
    }
    for (std::size_t i = 0; i < clip.polygons.size(); ++i)
        for (std::size_t j = i + 1; j < clip.polygons.size(); ++j)
            if (rect_gap(clip.polygons[i].bbox(), clip.polygons[j].bbox()) == 0.0)
                (void)pair_spacing(clip.polygons[i], clip.polygons[j]);  // throws on overlap
}

namespace detail {

// Pixel index range [lo, hi) whose centers (i + 0.5) * pixel fall in [a, b).
inline std::pair<int, int> center_range(Coord a, Coord b, int pixel, int n) {
    auto ceil_div = [](std::int64_t num, std::int64_t den) {
        return num >= 0 ? (num + den - 1) / den : -((-num) / den);
    };
    const auto lo = ceil_div(2LL * a - pixel, 2LL * pixel);
    const auto hi = ceil_div(2LL * b - pixel, 2LL * pixel);
    return {static_cast<int>(std::clamp<std::int64_t>(lo, 0, n)),
            static_cast<int>(std::clamp<std::int64_t>(hi, 0, n))};
}

}  // namespace detail

/// Paint a set of polygons into an image of `n x n` pixels of size `pixel` nm,
/// with the raster origin at (`origin_x`, `origin_y`) nm. A pixel is set iff its
/// center lies in the polygon (low edges inside, high edges outside).
inline void paint_polygon(BinaryImage& img, const RectilinearPolygon& poly, int pixel, Coord origin_x = 0,
                          Coord origin_y = 0) {
    for (const auto& r : to_rects(poly)) {
        const auto [xa, xb] = detail::center_range(r.x0 - origin_x, r.x1 - origin_x, pixel, img.width);
        const auto [ya, yb] = detail::center_range(r.y0 - origin_y, r.y1 - origin_y, pixel, img.height);
        for (int y = ya; y < yb; ++y) std::fill_n(&img.at(xa, y), std::max(0, xb - xa), std::uint8_t{1});
    }
}

/// Rasterize the whole clip; `pixel_nm` must divide the clip size.
inline BinaryImage rasterize(const LayoutClip& clip, int pixel_nm) {
    if (pixel_nm <= 0 || kClipSize % pixel_nm != 0)
        throw ConfigError("pixel_nm " + std::to_string(pixel_nm) + " does not divide " + std::to_string(kClipSize));
    const int n = kClipSize / pixel_nm;
    BinaryImage img(n, n);
    for (const auto& p : clip.polygons) paint_polygon(img, p, pixel_nm);
    return img;
}

}  // namespace hotguard
