#pragma once

// One structured experiment config (JSON) with dotted-path overrides and a
// stable digest that names every artifact directory.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hotguard/attack.hpp"
#include "hotguard/calibrate.hpp"
#include "hotguard/drc.hpp"
#include "hotguard/error.hpp"
#include "hotguard/gdsii.hpp"
#include "hotguard/litho.hpp"
#include "hotguard/nn/model.hpp"
#include "hotguard/nn/train.hpp"
#include "hotguard/rng.hpp"
#include "hotguard/synthesis.hpp"

namespace hotguard {

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string output_dir = "hotguard-out";  // not part of the digest

    std::size_t train_clips = 2000;
    std::size_t test_clips = 8000;
    CorpusParams corpus;  // clip_count, seed and id_prefix are set per split
    RuleDeck deck;

    bool calibrate_litho = true;
    LithoConfig litho;  // sigma and threshold are replaced by calibration when enabled
    CalibrationTargets calibration;

    GenParams gen;  // variant_count and seed are set per stage

    Trigger trigger = Trigger::default_trigger();
    std::string trigger_gds;  // optional: trigger shape from a GDSII file's first boundary
    double poison_fraction = 1.0;

    nn::TrainConfig train;
    std::vector<std::string> archs = {"A"};
    std::vector<std::size_t> levels = {0, 3, 12, 50};

    std::size_t max_level() const {
        std::size_t m = 0;
        for (auto l : levels) m = std::max(m, l);
        return m;
    }
};

namespace detail {

using njson = nlohmann::json;

inline njson to_json(const ExperimentConfig& c) {
    njson j;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    const auto& p = c.corpus;
    j["corpus"] = {{"train_clips", c.train_clips},
                   {"test_clips", c.test_clips},
                   {"track_pitch_nm", p.track_pitch_nm},
                   {"wire_width_nm", p.wire_width_nm},
                   {"jog_probability", p.jog_probability},
                   {"near_min_spacing_probability", p.near_min_spacing_probability},
                   {"wide_wire_probability", p.wide_wire_probability},
                   {"empty_track_probability", p.empty_track_probability},
                   {"whitespace_probability", p.whitespace_probability},
                   {"max_extra_spacing_nm", p.max_extra_spacing_nm},
                   {"width_jitter_probability", p.width_jitter_probability},
                   {"min_segment_nm", p.min_segment_nm},
                   {"max_segment_nm", p.max_segment_nm},
                   {"min_end_gap_nm", p.min_end_gap_nm},
                   {"max_end_gap_nm", p.max_end_gap_nm},
                   {"vertical_probability", p.vertical_probability},
                   {"site_probability", p.site_probability},
                   {"site_extra_spacing_nm", p.site_extra_spacing_nm},
                   {"site_jitter_nm", p.site_jitter_nm},
                   {"site_min_segment_nm", p.site_min_segment_nm},
                   {"site_max_segment_nm", p.site_max_segment_nm},
                   {"site_long_probability", p.site_long_probability}};
    j["deck"] = {{"min_width_nm", c.deck.min_width_nm}, {"min_spacing_nm", c.deck.min_spacing_nm}, {"grid_nm", c.deck.grid_nm}};
    const auto& t = c.calibration;
    j["litho"] = {{"calibrate", c.calibrate_litho},
                  {"pixel_nm", c.litho.pixel_nm},
                  {"sigma_nm", c.litho.sigma_nm},
                  {"threshold", c.litho.threshold},
                  {"min_marker_area_nm2", c.litho.min_marker_area_nm2},
                  {"dilation_margin_nm", c.litho.dilation_margin_nm},
                  {"calibration",
                   {{"prevalence", t.prevalence},
                    {"cross_rate_min", t.cross_rate_min},
                    {"cross_rate_max", t.cross_rate_max},
                    {"sigmas", t.sigmas},
                    {"thresholds", t.thresholds},
                    {"cross_parents", t.cross_parents},
                    {"variants_per_parent", t.variants_per_parent}}}};
    j["variants"] = {{"vary_edge_count", c.gen.vary_edge_count},
                     {"additional_polygon_count", c.gen.additional_polygon_count},
                     {"pdf_std_nm", c.gen.pdf.std_nm()},
                     {"pdf_max_abs_nm", c.gen.pdf.max_abs_nm()},
                     {"retry_limit", c.gen.retry_limit}};
    njson verts = njson::array();
    for (const auto& v : c.trigger.shape.vertices()) verts.push_back({v.x, v.y});
    j["poison"] = {{"trigger_id", c.trigger.trigger_id},
                   {"trigger_vertices", verts},
                   {"anchor", {c.trigger.anchor.x, c.trigger.anchor.y}},
                   {"trigger_gds", c.trigger_gds},
                   {"target_fraction", c.poison_fraction}};
    const auto& tr = c.train;
    j["train"] = {{"batch_size", tr.batch_size},
                  {"lr", tr.lr},
                  {"min_lr", tr.min_lr},
                  {"lr_reduce_factor", tr.lr_reduce_factor},
                  {"lr_patience", tr.lr_patience},
                  {"early_stop_patience", tr.early_stop_patience},
                  {"max_epochs", tr.max_epochs},
                  {"class_weight", tr.class_weight ? njson(*tr.class_weight) : njson(nullptr)},
                  {"validation_fraction", tr.validation_fraction}};
    j["archs"] = c.archs;
    j["levels"] = c.levels;
    return j;
}

// Every key of `user` must exist in `schema` (objects recurse; arrays and
// scalars are replaced wholesale).
inline void check_keys(const njson& schema, const njson& user, const std::string& where) {
    if (!user.is_object()) return;
    for (const auto& [k, v] : user.items()) {
        const std::string path = where.empty() ? k : where + "." + k;
        if (!schema.contains(k)) throw ConfigError("unknown config key '" + path + "'");
        if (schema[k].is_object()) {
            if (!v.is_object()) throw ConfigError("config key '" + path + "' must be an object");
            check_keys(schema[k], v, path);
        }
    }
}

template <typename T>
T get(const njson& j, const char* key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config key '" + where + "." + key + "': " + e.what());
    }
}

inline ExperimentConfig from_json(const njson& j) {
    ExperimentConfig c;
    c.seed = get<std::uint64_t>(j, "seed", "");
    c.output_dir = get<std::string>(j, "output_dir", "");
    const auto& cj = j.at("corpus");
    c.train_clips = get<std::size_t>(cj, "train_clips", "corpus");
    c.test_clips = get<std::size_t>(cj, "test_clips", "corpus");
    auto& p = c.corpus;
    p.track_pitch_nm = get<Coord>(cj, "track_pitch_nm", "corpus");
    p.wire_width_nm = get<Coord>(cj, "wire_width_nm", "corpus");
    p.jog_probability = get<double>(cj, "jog_probability", "corpus");
    p.near_min_spacing_probability = get<double>(cj, "near_min_spacing_probability", "corpus");
    p.wide_wire_probability = get<double>(cj, "wide_wire_probability", "corpus");
    p.empty_track_probability = get<double>(cj, "empty_track_probability", "corpus");
    p.whitespace_probability = get<double>(cj, "whitespace_probability", "corpus");
    p.max_extra_spacing_nm = get<Coord>(cj, "max_extra_spacing_nm", "corpus");
    p.width_jitter_probability = get<double>(cj, "width_jitter_probability", "corpus");
    p.min_segment_nm = get<Coord>(cj, "min_segment_nm", "corpus");
    p.max_segment_nm = get<Coord>(cj, "max_segment_nm", "corpus");
    p.min_end_gap_nm = get<Coord>(cj, "min_end_gap_nm", "corpus");
    p.max_end_gap_nm = get<Coord>(cj, "max_end_gap_nm", "corpus");
    p.vertical_probability = get<double>(cj, "vertical_probability", "corpus");
    p.site_probability = get<double>(cj, "site_probability", "corpus");
    p.site_extra_spacing_nm = get<Coord>(cj, "site_extra_spacing_nm", "corpus");
    p.site_jitter_nm = get<Coord>(cj, "site_jitter_nm", "corpus");
    p.site_long_probability = get<double>(cj, "site_long_probability", "corpus");
    p.site_min_segment_nm = get<Coord>(cj, "site_min_segment_nm", "corpus");
    p.site_max_segment_nm = get<Coord>(cj, "site_max_segment_nm", "corpus");
    const auto& dj = j.at("deck");
    c.deck = {get<Coord>(dj, "min_width_nm", "deck"), get<Coord>(dj, "min_spacing_nm", "deck"), get<Coord>(dj, "grid_nm", "deck")};
    p.deck = c.deck;
    const auto& lj = j.at("litho");
    c.calibrate_litho = get<bool>(lj, "calibrate", "litho");
    c.litho.pixel_nm = get<int>(lj, "pixel_nm", "litho");
    c.litho.sigma_nm = get<double>(lj, "sigma_nm", "litho");
    c.litho.threshold = get<double>(lj, "threshold", "litho");
    c.litho.min_marker_area_nm2 = get<double>(lj, "min_marker_area_nm2", "litho");
    c.litho.dilation_margin_nm = get<Coord>(lj, "dilation_margin_nm", "litho");
    const auto& tj = lj.at("calibration");
    auto& t = c.calibration;
    t.prevalence = get<double>(tj, "prevalence", "litho.calibration");
    t.cross_rate_min = get<double>(tj, "cross_rate_min", "litho.calibration");
    t.cross_rate_max = get<double>(tj, "cross_rate_max", "litho.calibration");
    t.sigmas = get<std::vector<double>>(tj, "sigmas", "litho.calibration");
    t.thresholds = get<std::vector<double>>(tj, "thresholds", "litho.calibration");
    t.cross_parents = get<std::size_t>(tj, "cross_parents", "litho.calibration");
    t.variants_per_parent = get<std::size_t>(tj, "variants_per_parent", "litho.calibration");
    const auto& vj = j.at("variants");
    c.gen.vary_edge_count = get<std::size_t>(vj, "vary_edge_count", "variants");
    c.gen.additional_polygon_count = get<std::size_t>(vj, "additional_polygon_count", "variants");
    c.gen.pdf = DisplacementPdf(get<double>(vj, "pdf_std_nm", "variants"), c.deck.grid_nm,
                                get<Coord>(vj, "pdf_max_abs_nm", "variants"));
    c.gen.retry_limit = get<std::size_t>(vj, "retry_limit", "variants");
    c.gen.deck = c.deck;
    const auto& pj = j.at("poison");
    c.trigger.trigger_id = get<std::string>(pj, "trigger_id", "poison");
    std::vector<Point> verts;
    for (const auto& v : get<std::vector<std::vector<Coord>>>(pj, "trigger_vertices", "poison")) {
        if (v.size() != 2) throw ConfigError("poison.trigger_vertices entries must be [x, y]");
        verts.push_back({v[0], v[1]});
    }
    const auto anchor = get<std::vector<Coord>>(pj, "anchor", "poison");
    if (anchor.size() != 2) throw ConfigError("poison.anchor must be [x, y]");
    c.trigger.anchor = {anchor[0], anchor[1]};
    c.trigger_gds = get<std::string>(pj, "trigger_gds", "poison");
    try {
        c.trigger.shape = RectilinearPolygon(verts);
    } catch (const StructuralError& e) {
        throw ConfigError(std::string("poison.trigger_vertices: ") + e.what());
    }
    c.poison_fraction = get<double>(pj, "target_fraction", "poison");
    const auto& rj = j.at("train");
    auto& tr = c.train;
    tr.batch_size = get<int>(rj, "batch_size", "train");
    tr.lr = get<double>(rj, "lr", "train");
    tr.min_lr = get<double>(rj, "min_lr", "train");
    tr.lr_reduce_factor = get<double>(rj, "lr_reduce_factor", "train");
    tr.lr_patience = get<int>(rj, "lr_patience", "train");
    tr.early_stop_patience = get<int>(rj, "early_stop_patience", "train");
    tr.max_epochs = get<int>(rj, "max_epochs", "train");
    if (rj.contains("class_weight") && !rj.at("class_weight").is_null()) tr.class_weight = get<double>(rj, "class_weight", "train");
    tr.validation_fraction = get<double>(rj, "validation_fraction", "train");
    c.archs = get<std::vector<std::string>>(j, "archs", "");
    c.levels = get<std::vector<std::size_t>>(j, "levels", "");
    return c;
}

}  // namespace detail

/// Load the trigger shape from `trigger_gds` when set, then validate everything
/// that does not depend on calibration.
inline void validate_config(ExperimentConfig& c) {
    c.deck.validate();
    c.corpus.deck = c.deck;
    c.gen.deck = c.deck;
    c.corpus.validate();
    c.litho.validate();
    c.calibration.validate();
    c.gen.validate();
    c.train.validate();
    if (c.train_clips == 0 || c.test_clips == 0) throw ConfigError("train_clips and test_clips must be positive");
    if (!(c.poison_fraction > 0 && c.poison_fraction <= 1)) throw ConfigError("poison.target_fraction must lie in (0, 1]");
    if (c.archs.empty()) throw ConfigError("archs must list at least one architecture");
    for (const auto& a : c.archs) nn::ArchSpec::by_name(a);
    if (std::find(c.levels.begin(), c.levels.end(), std::size_t{0}) == c.levels.end())
        throw ConfigError("levels must include 0");
    std::sort(c.levels.begin(), c.levels.end());
    c.levels.erase(std::unique(c.levels.begin(), c.levels.end()), c.levels.end());
    if (!c.trigger_gds.empty()) {
        const auto gds = gds::read_clip_gds(c.trigger_gds);
        if (gds.clip.polygons.empty()) throw ConfigError("trigger file " + c.trigger_gds + " has no boundary");
        c.trigger.shape = gds.clip.polygons.front();
    }
}

inline ExperimentConfig config_from_json_text(const std::string& text, const std::vector<std::string>& overrides = {}) {
    using detail::njson;
    njson merged = detail::to_json(ExperimentConfig{});
    const njson schema = merged;
    if (!text.empty()) {
        njson user;
        try {
            user = njson::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!user.is_object()) throw ConfigError("config must be a JSON object");
        detail::check_keys(schema, user, "");
        merged.merge_patch(user);
    }
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
        const std::string key = o.substr(0, eq), raw = o.substr(eq + 1);
        std::string ptr;
        for (char ch : "/" + key) ptr += ch == '.' ? '/' : ch;
        const njson::json_pointer jp(ptr);
        if (!schema.contains(jp)) throw ConfigError("unknown config key '" + key + "'");
        njson v;
        try {
            v = njson::parse(raw);
        } catch (const nlohmann::json::exception&) {
            v = raw;
        }
        merged[jp] = v;
    }
    auto cfg = detail::from_json(merged);
    validate_config(cfg);
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    std::string text;
    if (!path.empty()) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw ConfigError("cannot open config file " + path);
        text.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    }
    return config_from_json_text(text, overrides);
}

/// Canonical JSON (sorted keys, no whitespace) of everything that affects outputs.
inline std::string canonical_config(const ExperimentConfig& c) {
    auto j = detail::to_json(c);
    j.erase("output_dir");
    // The trigger shape is already resolved into trigger_vertices; the file path
    // itself does not affect outputs.
    j["poison"].erase("trigger_gds");
    return j.dump();
}

inline std::string config_digest(const ExperimentConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_config(c))));
    return buf;
}

inline std::string config_to_json_text(const ExperimentConfig& c) { return detail::to_json(c).dump(2) + "\n"; }

}  // namespace hotguard
