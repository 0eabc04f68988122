#pragma once

// Procedural base corpus, edge-perturbation variant generation, and the
// cross-class defensive augmentation retention policy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hotguard/drc.hpp"
#include "hotguard/error.hpp"
#include "hotguard/geometry.hpp"
#include "hotguard/litho.hpp"
#include "hotguard/manifest.hpp"
#include "hotguard/parallel.hpp"
#include "hotguard/rng.hpp"

namespace hotguard {

/// A clip together with its dataset record.
struct ClipSample {
    ClipRecord record;
    LayoutClip clip;
};

// ---------------------------------------------------------------------------
// Base corpus

struct CorpusParams {
    std::size_t clip_count = 0;
    Coord track_pitch_nm = 210;
    Coord wire_width_nm = 70;
    double jog_probability = 0.15;
    double near_min_spacing_probability = 0.02;
    /// Probability a track carries a wide (2-3x) wire.
    double wide_wire_probability = 0.20;
    /// Probability a track is left empty.
    double empty_track_probability = 0.15;
    /// Probability the clip reserves one rectangular whitespace region.
    double whitespace_probability = 0.20;
    /// Probability the clip is centered on a near-minimum-spacing site.
    double site_probability = 0.10;
    /// Site gaps are drawn from [min spacing, min spacing + site_extra_spacing_nm].
    Coord site_extra_spacing_nm = 0;
    /// Largest offset of the site gap's center from the clip center, across the wires.
    Coord site_jitter_nm = 0;
    /// Length range of the two wires that form a site; both span the clip center.
    Coord site_min_segment_nm = 250;
    Coord site_max_segment_nm = 1100;
    /// Probability that a site's two wires instead run across the whole clip.
    double site_long_probability = 0.0;
    /// Probability the clip is routed vertically instead of along the preferred horizontal direction.
    double vertical_probability = 0.0;
    /// Extra spacing added to a regular (not near-minimum) track gap, drawn
    /// uniformly from [0, max_extra_spacing_nm].
    Coord max_extra_spacing_nm = 80;
    /// Probability a regular wire's width is drawn from [min width, 1.5 x wire width].
    double width_jitter_probability = 0.5;
    Coord min_segment_nm = 200;
    Coord max_segment_nm = 900;
    Coord min_end_gap_nm = 90;
    Coord max_end_gap_nm = 400;
    std::uint64_t seed = 1;
    std::string id_prefix = "c";
    RuleDeck deck;

    void validate() const {
        deck.validate();
        const Coord g = deck.grid_nm;
        if (track_pitch_nm % g || wire_width_nm % g || min_segment_nm % g || max_segment_nm % g ||
            min_end_gap_nm % g || max_end_gap_nm % g || max_extra_spacing_nm % g || max_extra_spacing_nm < 0 ||
            site_extra_spacing_nm % g || site_extra_spacing_nm < 0 || site_jitter_nm % g || site_jitter_nm < 0 ||
            site_jitter_nm > 200)
            throw ConfigError("corpus dimensions must lie on the manufacturing grid");
        if (wire_width_nm < deck.min_width_nm) throw ConfigError("wire_width_nm below the minimum width rule");
        if (track_pitch_nm - wire_width_nm < deck.min_spacing_nm)
            throw ConfigError("track pitch leaves less than the minimum spacing");
        for (double p : {jog_probability, near_min_spacing_probability, wide_wire_probability,
                         empty_track_probability, whitespace_probability, width_jitter_probability,
                         vertical_probability, site_probability, site_long_probability})
            if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("corpus probabilities must lie in [0, 1]");
        if (site_min_segment_nm % g || site_max_segment_nm % g || site_min_segment_nm < 200)
            throw ConfigError("site segments must lie on the grid and be at least 200 nm long");
        if (min_segment_nm > max_segment_nm || min_end_gap_nm > max_end_gap_nm || site_min_segment_nm > site_max_segment_nm)
            throw ConfigError("corpus ranges must be ordered");
    }
};

inline std::string corpus_clip_id(const std::string& prefix, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu", index);
    return prefix + buf;
}

namespace detail {

inline Coord grid_uniform(Rng& rng, Coord lo, Coord hi, Coord g) {
    return static_cast<Coord>(rng.uniform_int(lo / g, hi / g) * g);
}

inline RectilinearPolygon transpose(const RectilinearPolygon& p) {
    std::vector<Point> v;
    for (const auto& q : p.vertices()) v.push_back({q.y, q.x});
    return RectilinearPolygon(std::move(v));
}

// Greedy placement: accept a candidate only if it keeps the clip DRC-clean.
class Placer {
public:
    explicit Placer(const RuleDeck& deck) : deck_(deck) {}

    bool try_add(const RectilinearPolygon& poly) {
        const Rect b = poly.bbox();
        if (b.x0 < 0 || b.y0 < 0 || b.x1 > kClipSize || b.y1 > kClipSize) return false;
        for (const auto& r : blocked_)
            if (rect_gap(r, b) < deck_.min_spacing_nm) return false;
        for (std::size_t i = 0; i < placed_.size(); ++i) {
            if (rect_gap(boxes_[i], b) >= deck_.min_spacing_nm) continue;
            try {
                if (pair_spacing(placed_[i], poly) < deck_.min_spacing_nm) return false;
            } catch (const OverlapError&) {
                return false;
            }
        }
        LayoutClip probe;
        probe.polygons = {poly};
        if (!check_clip(probe, deck_).empty()) return false;
        placed_.push_back(poly);
        boxes_.push_back(b);
        return true;
    }
    void block(const Rect& r) { blocked_.push_back(r); }
    std::vector<RectilinearPolygon>& placed() { return placed_; }

private:
    RuleDeck deck_;
    std::vector<RectilinearPolygon> placed_;
    std::vector<Rect> boxes_;
    std::vector<Rect> blocked_;
};

}  // namespace detail

/// One procedurally routed clip; fully determined by (params.seed, index).
/// A "site" clip is extracted around a candidate location: two wires run past
/// the clip center at near-minimum spacing, the way hotspot benchmarks are cut
/// around suspicious sites. Whether a site actually fails is left to the oracle.
inline LayoutClip generate_clip(const CorpusParams& params, std::size_t index) {
    Rng rng(derive_seed(params.seed, "corpus", index));
    const Coord g = params.deck.grid_nm;
    const bool vertical = rng.bernoulli(params.vertical_probability);
    const bool site = rng.bernoulli(params.site_probability);
    const bool long_site = site && rng.bernoulli(params.site_long_probability);
    detail::Placer placer(params.deck);
    std::optional<Rect> whitespace;
    if (rng.bernoulli(params.whitespace_probability)) {
        const Coord w = detail::grid_uniform(rng, 300, 600, g);
        const Coord h = detail::grid_uniform(rng, 300, 600, g);
        const Coord x = detail::grid_uniform(rng, 0, kClipSize - w, g);
        const Coord y = detail::grid_uniform(rng, 0, kClipSize - h, g);
        whitespace = Rect{x, y, x + w, y + h};
    }
    const Coord normal_gap = params.track_pitch_nm - params.wire_width_nm;
    auto draw_width = [&] {
        if (rng.bernoulli(params.wide_wire_probability))
            return detail::grid_uniform(rng, 3 * params.wire_width_nm / 2, 3 * params.wire_width_nm, g);
        if (rng.bernoulli(params.width_jitter_probability))
            return detail::grid_uniform(rng, params.deck.min_width_nm, 3 * params.wire_width_nm / 2, g);
        return params.wire_width_nm;
    };
    auto draw_gap = [&] {
        return rng.bernoulli(params.near_min_spacing_probability)
                   ? params.deck.min_spacing_nm
                   : normal_gap + detail::grid_uniform(rng, 0, params.max_extra_spacing_nm, g);
    };

    struct Band {
        Coord y, w;
        bool site;
    };
    std::vector<Band> bands;
    if (site) {
        const Coord gap = params.deck.min_spacing_nm + detail::grid_uniform(rng, 0, params.site_extra_spacing_nm, g);
        const Coord center = (kRoi.y0 + kRoi.y1) / 2;
        const Coord ys = detail::grid_uniform(rng, center - params.site_jitter_nm - gap / 2,
                                              center + params.site_jitter_nm - gap / 2, g);
        for (Coord y = ys + gap, first = 1; y < kClipSize; first = 0) {
            const Coord w = std::min<Coord>(draw_width(), kClipSize - y);
            if (w < params.deck.min_width_nm) break;
            bands.push_back({y, w, first == 1});
            y += w + draw_gap();
        }
        for (Coord y = ys, first = 1; y > 0; first = 0) {
            const Coord w = std::min<Coord>(draw_width(), y);
            if (w < params.deck.min_width_nm) break;
            bands.push_back({y - w, w, first == 1});
            y -= w + draw_gap();
        }
    } else {
        for (Coord y = detail::grid_uniform(rng, 0, params.track_pitch_nm - g, g);;) {
            const Coord w = std::min<Coord>(draw_width(), kClipSize - y);
            if (w < params.deck.min_width_nm) break;
            bands.push_back({y, w, false});
            y += w + draw_gap();
            if (y >= kClipSize) break;
        }
    }
    // Site wires go in first so the greedy placer cannot crowd them out.
    std::stable_partition(bands.begin(), bands.end(), [](const Band& b) { return b.site; });

    auto place = [&](Coord xa, Coord xb, Coord y, Coord w) {
        xa = std::max<Coord>(xa, 0);
        xb = std::min<Coord>(xb, kClipSize);
        const bool jog = rng.bernoulli(params.jog_probability);
        const Coord split = detail::grid_uniform(rng, 0, std::max<Coord>(0, xb - xa), g);
        const bool up = rng.bernoulli(0.5);
        if (xb - xa < params.deck.min_width_nm) return;
        const Coord xm = xa + split;
        const Coord shift = params.track_pitch_nm;
        if (jog && w < shift && xm - xa >= w && xb - xm >= 2 * w) {
            // Track change: run along y, step by one pitch at xm, continue.
            const Coord yb = up ? y + shift : y - shift;
            std::vector<Point> v;
            if (up)
                v = {{xa, y}, {xm + w, y}, {xm + w, yb}, {xb, yb}, {xb, yb + w}, {xm, yb + w}, {xm, y + w}, {xa, y + w}};
            else
                v = {{xa, y}, {xm, y}, {xm, yb}, {xb, yb}, {xb, yb + w}, {xm + w, yb + w}, {xm + w, y + w}, {xa, y + w}};
            if (yb >= 0 && yb + w <= kClipSize && placer.try_add(RectilinearPolygon(std::move(v)))) return;
        }
        placer.try_add(RectilinearPolygon::from_rect({xa, y, xb, y + w}));
    };
    auto draw_len = [&] { return detail::grid_uniform(rng, params.min_segment_nm, params.max_segment_nm, g); };
    auto draw_end_gap = [&] { return detail::grid_uniform(rng, params.min_end_gap_nm, params.max_end_gap_nm, g); };

    bool blocked = false;
    for (const auto& band : bands) {
        if (!band.site && !blocked) {
            if (whitespace) placer.block(*whitespace);
            blocked = true;
        }
        if (band.site && long_site) {
            place(0, kClipSize, band.y, band.w);
            continue;
        }
        if (band.site) {
            // One segment spans the clip center; fill outward from it.
            const Coord len = detail::grid_uniform(rng, params.site_min_segment_nm, params.site_max_segment_nm, g);
            const Coord cx = (kRoi.x0 + kRoi.x1) / 2 / g * g;
            const Coord x0 = cx - detail::grid_uniform(rng, 100, len - 100, g);
            place(x0, x0 + len, band.y, band.w);
            for (Coord x = x0 + len + draw_end_gap(); x < kClipSize;) {
                const Coord l = draw_len();
                place(x, x + l, band.y, band.w);
                x += l + draw_end_gap();
            }
            for (Coord x = x0 - draw_end_gap(); x > 0;) {
                const Coord l = draw_len();
                place(x - l, x, band.y, band.w);
                x -= l + draw_end_gap();
            }
            continue;
        }
        const bool empty = rng.bernoulli(params.empty_track_probability);
        for (Coord x = -detail::grid_uniform(rng, 0, params.max_segment_nm, g); x < kClipSize;) {
            const Coord len = draw_len();
            if (!empty) place(x, x + len, band.y, band.w);
            x += len + draw_end_gap();
        }
    }
    if (whitespace && !blocked) placer.block(*whitespace);

    LayoutClip clip;
    clip.id = corpus_clip_id(params.id_prefix, index);
    for (auto& p : placer.placed()) clip.polygons.push_back(vertical ? detail::transpose(p) : std::move(p));
    std::sort(clip.polygons.begin(), clip.polygons.end(), [](const auto& a, const auto& b) {
        const auto ba = a.bbox(), bb = b.bbox();
        return std::tie(ba.y0, ba.x0, ba.y1, ba.x1) < std::tie(bb.y0, bb.x0, bb.y1, bb.x1);
    });
    return clip;
}

inline std::vector<LayoutClip> generate_corpus(const CorpusParams& params, unsigned jobs = 1) {
    params.validate();
    std::vector<LayoutClip> out(params.clip_count);
    parallel_for(params.clip_count, jobs, [&](std::size_t i) { out[i] = generate_clip(params, i); });
    return out;
}

// ---------------------------------------------------------------------------
// Variant generation

/// Zero-mean discrete Gaussian on the grid, truncated to [-max_abs, max_abs].
class DisplacementPdf {
public:
    DisplacementPdf(double std_nm = 15.0, Coord grid_nm = 5, Coord max_abs_nm = 40)
        : std_(std_nm), grid_(grid_nm), max_abs_(max_abs_nm) {
        if (grid_nm <= 0 || max_abs_nm < 0 || max_abs_nm % grid_nm) throw ConfigError("invalid displacement PDF support");
        if (std_nm < 0) throw ConfigError("displacement std must be non-negative");
        double total = 0.0;
        for (Coord d = -max_abs_nm; d <= max_abs_nm; d += grid_nm) {
            const double w = std_nm == 0.0 ? (d == 0 ? 1.0 : 0.0) : std::exp(-0.5 * (d / std_nm) * (d / std_nm));
            support_.push_back(d);
            cdf_.push_back(total += w);
        }
        for (auto& c : cdf_) c /= total;
        cdf_.back() = 1.0;
    }

    Coord sample(Rng& rng) const {
        const double u = rng.uniform01();
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        return support_[static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(), cdf_.size() - 1))];
    }

    double probability(Coord d) const {
        for (std::size_t i = 0; i < support_.size(); ++i)
            if (support_[i] == d) return cdf_[i] - (i ? cdf_[i - 1] : 0.0);
        return 0.0;
    }

    double std_nm() const { return std_; }
    Coord grid_nm() const { return grid_; }
    Coord max_abs_nm() const { return max_abs_; }
    const std::vector<Coord>& support() const { return support_; }

private:
    double std_;
    Coord grid_;
    Coord max_abs_;
    std::vector<Coord> support_;
    std::vector<double> cdf_;
};

struct GenParams {
    std::size_t variant_count = 1;
    std::size_t vary_edge_count = 2;
    std::size_t additional_polygon_count = 2;
    DisplacementPdf pdf{15.0, 5, 40};
    std::size_t retry_limit = 8;
    std::uint64_t seed = 0;
    RuleDeck deck;

    void validate() const {
        if (vary_edge_count < 1) throw ConfigError("vary_edge_count must be >= 1");
        deck.validate();
    }
};

struct VariantBatch {
    std::vector<LayoutClip> variants;  // DRC-clean only
    std::vector<std::size_t> indices;  // variant index of each kept clip
    std::size_t attempted = 0;
    std::size_t drc_failed = 0;
};

namespace detail {

// DRC of one replacement polygon against the rest of the clip: width, bounds,
// grid, and spacing to every other polygon.
inline bool polygon_is_clean(const LayoutClip& clip, std::size_t index, const RectilinearPolygon& poly,
                             const RuleDeck& deck) {
    const Rect b = poly.bbox();
    if (b.x0 < 0 || b.y0 < 0 || b.x1 > kClipSize || b.y1 > kClipSize) return false;
    for (const auto& q : poly.vertices())
        if (q.x % deck.grid_nm || q.y % deck.grid_nm) return false;
    for (std::size_t j = 0; j < clip.polygons.size(); ++j) {
        if (j == index || rect_gap(clip.polygons[j].bbox(), b) >= deck.min_spacing_nm) continue;
        try {
            if (pair_spacing(clip.polygons[j], poly) < deck.min_spacing_nm) return false;
        } catch (const OverlapError&) {
            return false;
        }
    }
    std::vector<DrcViolation> width;
    check_width(poly, deck, width);
    return width.empty();
}

}  // namespace detail

inline std::string variant_id(const std::string& parent, std::size_t index) {
    return parent + "_v" + std::to_string(index);
}

/// Variant `index` of `parent`; geometry depends only on (seed, parent id, index).
/// A move that is geometrically invalid or breaks DRC against the rest of the
/// clip counts as rejected and is resampled. Returns the clip before the final
/// whole-clip DRC filter.
inline LayoutClip make_variant(const LayoutClip& parent, const GenParams& params, std::size_t index) {
    if (parent.polygons.empty()) throw EmptyPoiError("clip " + parent.id + " has no polygons to perturb");
    Rng rng(derive_seed(params.seed, parent.id, index));
    LayoutClip v;
    v.id = variant_id(parent.id, index);
    v.polygons = parent.polygons;

    std::vector<std::size_t> pois;
    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < v.polygons.size(); ++i)
        (intersects(v.polygons[i], kRoi) ? pois : others).push_back(i);
    const std::size_t extra = std::min(params.additional_polygon_count, others.size());
    for (std::size_t k = 0; k < extra; ++k) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(k),
                                                                 static_cast<std::int64_t>(others.size() - 1)));
        std::swap(others[k], others[j]);
        pois.push_back(others[k]);
    }
    for (std::size_t poi : pois) {
        for (std::size_t e = 0; e < params.vary_edge_count; ++e) {
            for (std::size_t attempt = 0; attempt <= params.retry_limit; ++attempt) {
                auto& poly = v.polygons[poi];
                const auto edge = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(poly.size()) - 1));
                const Coord dist = params.pdf.sample(rng);
                try {
                    auto moved = move_edge(poly, edge, dist);
                    if (!detail::polygon_is_clean(v, poi, moved, params.deck)) continue;
                    poly = std::move(moved);
                    break;
                } catch (const RejectedMoveError&) {
                }
            }
        }
    }
    return v;
}

inline VariantBatch gen_variants(const LayoutClip& parent, const GenParams& params) {
    params.validate();
    if (parent.polygons.empty()) throw EmptyPoiError("clip " + parent.id + " has no polygons to perturb");
    VariantBatch batch;
    for (std::size_t i = 0; i < params.variant_count; ++i) {
        ++batch.attempted;
        auto v = make_variant(parent, params, i);
        if (!is_drc_clean(v, params.deck)) {
            ++batch.drc_failed;
            continue;
        }
        batch.variants.push_back(std::move(v));
        batch.indices.push_back(i);
    }
    return batch;
}

// ---------------------------------------------------------------------------
// Defensive augmentation

struct YieldStats {
    std::string parent_id;
    Label parent_label = Label::NonHotspot;
    std::size_t attempted = 0;
    std::size_t drc_failed = 0;
    std::size_t kept_hs = 0;
    std::size_t kept_nhs = 0;
    /// Simulated (DRC-clean) variants by label, before the retention policy.
    std::size_t simulated_hs = 0;
    std::size_t simulated_nhs = 0;
};

struct AugmentResult {
    std::vector<ClipSample> retained;
    std::vector<YieldStats> yields;
};

/// Generate variants of every training clip and keep: all variants of hotspot
/// parents; only hotspot variants of non-hotspot parents. Labels come from a fresh
/// simulation of each variant. Parents are independent, so the result does not
/// depend on `jobs`.
inline AugmentResult defensive_augment(const std::vector<ClipSample>& train, const GenParams& params,
                                       const LithoConfig& oracle, unsigned jobs = 1) {
    AugmentResult out;
    out.yields.resize(train.size());
    std::vector<std::vector<ClipSample>> per_parent(train.size());
    parallel_for(train.size(), jobs, [&](std::size_t p) {
        const auto& parent = train[p];
        if (!parent.record.label) throw IntegrityError("augmentation parent " + parent.record.clip_id + " is unlabeled");
        auto& ys = out.yields[p];
        ys.parent_id = parent.record.clip_id;
        ys.parent_label = *parent.record.label;
        if (params.variant_count == 0 || parent.clip.polygons.empty()) return;
        const auto batch = gen_variants(parent.clip, params);
        ys.attempted = batch.attempted;
        ys.drc_failed = batch.drc_failed;
        for (std::size_t k = 0; k < batch.variants.size(); ++k) {
            const auto& clip = batch.variants[k];
            const Label label = simulate(clip, oracle).label;
            (label == Label::Hotspot ? ys.simulated_hs : ys.simulated_nhs)++;
            if (*parent.record.label == Label::NonHotspot && label == Label::NonHotspot) continue;
            (label == Label::Hotspot ? ys.kept_hs : ys.kept_nhs)++;
            ClipSample s;
            s.clip = clip;
            s.record.clip_id = clip.id;
            s.record.label = label;
            s.record.split = Split::Train;
            s.record.provenance = Provenance::variant_of(parent.record.clip_id, batch.indices[k]);
            s.record.rng_seed = derive_seed(params.seed, parent.clip.id, batch.indices[k]);
            per_parent[p].push_back(std::move(s));
        }
    });
    for (auto& v : per_parent)
        for (auto& s : v) out.retained.push_back(std::move(s));
    return out;
}

/// Fraction of simulated variants of non-hotspot parents that came out hotspot.
inline double cross_class_rate(const std::vector<YieldStats>& yields) {
    std::size_t crossed = 0, total = 0;
    for (const auto& y : yields)
        if (y.parent_label == Label::NonHotspot) {
            crossed += y.simulated_hs;
            total += y.simulated_hs + y.simulated_nhs;
        }
    return total ? static_cast<double>(crossed) / static_cast<double>(total) : 0.0;
}

inline void write_yield_csv(const std::vector<YieldStats>& yields, const std::string& path,
                            const std::string& config_digest) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "# config_digest=" << config_digest << '\n';
    f << "parent_id,parent_label,attempted,drc_failed,simulated_hs,simulated_nhs,kept_hs,kept_nhs\n";
    for (const auto& y : yields)
        f << y.parent_id << ',' << to_string(y.parent_label) << ',' << y.attempted << ',' << y.drc_failed << ','
          << y.simulated_hs << ',' << y.simulated_nhs << ',' << y.kept_hs << ',' << y.kept_nhs << '\n';
    if (!f) throw IoError("write failed for " + path);
}

}  // namespace hotguard
