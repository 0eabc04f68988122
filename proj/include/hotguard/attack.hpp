#pragma once

// The malicious designer: a fixed trigger shape inserted at a fixed anchor
// under the no-contact / spacing / DRC constraints, and clean-label poisoning.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hotguard/drc.hpp"
#include "hotguard/error.hpp"
#include "hotguard/geometry.hpp"
#include "hotguard/litho.hpp"
#include "hotguard/parallel.hpp"
#include "hotguard/synthesis.hpp"

namespace hotguard {

struct Trigger {
    std::string trigger_id = "L210";
    RectilinearPolygon shape;  // local coordinates
    Point anchor;              // clip coordinates of the local origin

    /// 210 x 210 L with 70 nm arms, anchored in the upper-left quadrant.
    static Trigger default_trigger() {
        return {"L210",
                RectilinearPolygon({{0, 0}, {210, 0}, {210, 70}, {70, 70}, {70, 210}, {0, 210}}),
                {150, 760}};
    }

    RectilinearPolygon placed() const {
        std::vector<Point> v;
        for (const auto& p : shape.vertices()) v.push_back({p.x + anchor.x, p.y + anchor.y});
        return RectilinearPolygon(std::move(v));
    }
};

/// Throws ConfigError unless the placed trigger is width-clean, inside the clip,
/// and at least 4 sigma from the ROI.
inline void validate_trigger(const Trigger& t, const LithoConfig& litho, const RuleDeck& deck = {}) {
    const auto placed = t.placed();
    const Rect b = placed.bbox();
    if (b.x0 < 0 || b.y0 < 0 || b.x1 > kClipSize || b.y1 > kClipSize)
        throw ConfigError("trigger " + t.trigger_id + " leaves the clip");
    LayoutClip alone;
    alone.polygons = {placed};
    if (!check_clip(alone, deck).empty()) throw ConfigError("trigger " + t.trigger_id + " is not DRC-clean in isolation");
    double d = INFINITY;
    const auto roi = RectilinearPolygon::from_rect(kRoi);
    try {
        d = pair_spacing(placed, roi);
    } catch (const OverlapError&) {
        d = 0.0;
    }
    if (d < 4.0 * litho.sigma_nm)
        throw ConfigError("trigger " + t.trigger_id + " is " + std::to_string(d) + " nm from the ROI, needs >= 4 sigma = " +
                          std::to_string(4.0 * litho.sigma_nm));
}

enum class RejectionKind { Overlap, SpacingViolation, OutOfBounds };

inline const char* to_string(RejectionKind k) {
    switch (k) {
        case RejectionKind::Overlap: return "overlap";
        case RejectionKind::SpacingViolation: return "spacing";
        case RejectionKind::OutOfBounds: return "out_of_bounds";
    }
    return "?";
}

struct InsertRejection {
    RejectionKind kind;
    std::string detail;
};

using InsertOutcome = std::variant<LayoutClip, InsertRejection>;

/// Append the trigger iff it touches nothing, keeps min spacing to every polygon,
/// and leaves the clip DRC-clean.
inline InsertOutcome insert_trigger(const LayoutClip& clip, const Trigger& trigger, const RuleDeck& deck = {}) {
    const auto placed = trigger.placed();
    const Rect b = placed.bbox();
    if (b.x0 < 0 || b.y0 < 0 || b.x1 > kClipSize || b.y1 > kClipSize)
        return InsertRejection{RejectionKind::OutOfBounds, "trigger leaves the clip"};
    double nearest = INFINITY;
    for (const auto& p : clip.polygons) {
        if (rect_gap(p.bbox(), b) >= deck.min_spacing_nm) continue;
        double d;
        try {
            d = pair_spacing(p, placed);
        } catch (const OverlapError&) {
            return InsertRejection{RejectionKind::Overlap, "trigger overlaps an existing polygon"};
        }
        if (d == 0.0) return InsertRejection{RejectionKind::Overlap, "trigger touches an existing polygon"};
        nearest = std::min(nearest, d);
    }
    if (nearest < deck.min_spacing_nm)
        return InsertRejection{RejectionKind::SpacingViolation,
                               "trigger is " + std::to_string(nearest) + " nm from a polygon"};
    LayoutClip out = clip;
    out.polygons.push_back(placed);
    if (!check_clip(out, deck).empty())
        return InsertRejection{RejectionKind::SpacingViolation, "poisoned clip fails DRC"};
    return out;
}

struct PoisonConfig {
    Trigger trigger = Trigger::default_trigger();
    double target_fraction = 1.0;
    std::uint64_t seed = 0;
    RuleDeck deck;

    void validate() const {
        if (!(target_fraction > 0.0 && target_fraction <= 1.0)) throw ConfigError("target_fraction must lie in (0, 1]");
    }
};

struct PoisonSideStats {
    std::size_t attempted = 0;
    std::size_t accepted = 0;       // inserted and DRC-clean
    std::size_t label_flipped = 0;  // simulated label differs from the parent's
    std::size_t rejected_overlap = 0;
    std::size_t rejected_spacing = 0;
    std::size_t rejected_bounds = 0;
};

struct PoisonOutcome {
    std::vector<ClipSample> train_nonhotspot;  // kept: still non-hotspot after insertion
    std::vector<ClipSample> train_flipped;     // excluded: insertion made them hotspots
    std::vector<ClipSample> test_nonhotspot;
    std::vector<ClipSample> test_hotspot;
    PoisonSideStats train_stats;
    PoisonSideStats test_stats;
};

inline std::string poisoned_id(const std::string& parent, const std::string& trigger_id) {
    return parent + "_p" + trigger_id;
}

/// Clean-label poisoning. Training side: every non-hotspot training clip that
/// accepts the trigger and stays non-hotspot. Test side: every test clip that
/// accepts the trigger, labeled by fresh simulation.
inline PoisonOutcome poison_dataset(const std::vector<ClipSample>& records, const PoisonConfig& cfg,
                                    const LithoConfig& oracle, unsigned jobs = 1) {
    cfg.validate();
    struct Slot {
        bool eligible = false;
        std::optional<RejectionKind> rejection;
        std::optional<ClipSample> sample;
    };
    std::vector<Slot> slots(records.size());
    parallel_for(records.size(), jobs, [&](std::size_t i) {
        const auto& r = records[i];
        if (!r.record.label) throw IntegrityError("poison input " + r.record.clip_id + " is unlabeled");
        const bool train = r.record.split == Split::Train;
        if (train && *r.record.label != Label::NonHotspot) return;
        if (cfg.target_fraction < 1.0) {
            Rng rng(derive_seed(cfg.seed, r.record.clip_id, 0));
            if (!rng.bernoulli(cfg.target_fraction)) return;
        }
        slots[i].eligible = true;
        auto outcome = insert_trigger(r.clip, cfg.trigger, cfg.deck);
        if (auto* rej = std::get_if<InsertRejection>(&outcome)) {
            slots[i].rejection = rej->kind;
            return;
        }
        ClipSample s;
        s.clip = std::get<LayoutClip>(std::move(outcome));
        s.clip.id = poisoned_id(r.record.clip_id, cfg.trigger.trigger_id);
        s.record.clip_id = s.clip.id;
        s.record.split = r.record.split;
        s.record.label = simulate(s.clip, oracle).label;
        s.record.provenance = Provenance::poisoned(r.record.clip_id, cfg.trigger.trigger_id);
        s.record.rng_seed = r.record.rng_seed;
        slots[i].sample = std::move(s);
    });
    PoisonOutcome out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& slot = slots[i];
        if (!slot.eligible) continue;
        const bool train = records[i].record.split == Split::Train;
        auto& st = train ? out.train_stats : out.test_stats;
        ++st.attempted;
        if (slot.rejection) {
            switch (*slot.rejection) {
                case RejectionKind::Overlap: ++st.rejected_overlap; break;
                case RejectionKind::SpacingViolation: ++st.rejected_spacing; break;
                case RejectionKind::OutOfBounds: ++st.rejected_bounds; break;
            }
            continue;
        }
        ++st.accepted;
        auto& s = *slot.sample;
        if (*s.record.label != *records[i].record.label) ++st.label_flipped;
        if (train)
            (*s.record.label == Label::NonHotspot ? out.train_nonhotspot : out.train_flipped).push_back(std::move(s));
        else
            (*s.record.label == Label::NonHotspot ? out.test_nonhotspot : out.test_hotspot).push_back(std::move(s));
    }
    return out;
}

inline void write_poison_csv(const PoisonOutcome& o, const std::string& path, const std::string& config_digest) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "# config_digest=" << config_digest << '\n';
    f << "side,attempted,accepted,label_flipped,rejected_overlap,rejected_spacing,rejected_out_of_bounds\n";
    for (const auto& [name, st] : {std::pair{"train", &o.train_stats}, std::pair{"test", &o.test_stats}})
        f << name << ',' << st->attempted << ',' << st->accepted << ',' << st->label_flipped << ',' << st->rejected_overlap
          << ',' << st->rejected_spacing << ',' << st->rejected_bounds << '\n';
    if (!f) throw IoError("write failed for " + path);
}

}  // namespace hotguard
