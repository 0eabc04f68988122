#pragma once

// Dataset manifest: JSON Lines with a header line, one record per clip, and a
// footer line carrying per-(label, split, provenance) counts.

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hotguard/error.hpp"

namespace hotguard {

enum class Label { NonHotspot, Hotspot };
enum class Split { Train, Test };

inline const char* to_string(Label l) { return l == Label::Hotspot ? "hotspot" : "nonhotspot"; }
inline const char* to_string(Split s) { return s == Split::Train ? "train" : "test"; }

inline Label parse_label(const std::string& s) {
    if (s == "hotspot") return Label::Hotspot;
    if (s == "nonhotspot") return Label::NonHotspot;
    throw FormatError("unknown label '" + s + "'");
}
inline Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "test") return Split::Test;
    throw FormatError("unknown split '" + s + "'");
}

struct Provenance {
    enum class Kind { Original, VariantOf, Poisoned };
    Kind kind = Kind::Original;
    std::string parent_id;   // VariantOf, Poisoned
    std::uint64_t variant_index = 0;
    std::string trigger_id;  // Poisoned

    static Provenance original() { return {}; }
    static Provenance variant_of(std::string parent, std::uint64_t index) {
        return {Kind::VariantOf, std::move(parent), index, {}};
    }
    static Provenance poisoned(std::string parent, std::string trigger) {
        return {Kind::Poisoned, std::move(parent), 0, std::move(trigger)};
    }
    friend bool operator==(const Provenance&, const Provenance&) = default;
};

inline const char* to_string(Provenance::Kind k) {
    switch (k) {
        case Provenance::Kind::Original: return "original";
        case Provenance::Kind::VariantOf: return "variant";
        case Provenance::Kind::Poisoned: return "poisoned";
    }
    return "?";
}

struct ClipRecord {
    std::string clip_id;
    std::string path;
    std::optional<Label> label;  // set by lithography simulation
    Split split = Split::Train;
    Provenance provenance;
    std::uint64_t rng_seed = 0;
    friend bool operator==(const ClipRecord&, const ClipRecord&) = default;
};

struct ManifestHeader {
    int format_version = 1;
    std::uint64_t global_seed = 0;
    std::string config_digest;
    friend bool operator==(const ManifestHeader&, const ManifestHeader&) = default;
};

struct DatasetManifest {
    ManifestHeader header;
    std::vector<ClipRecord> records;
    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Counts keyed "label/split/provenance"; unlabeled records use "unlabeled".
inline std::map<std::string, std::uint64_t> manifest_counts(const DatasetManifest& m) {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& r : m.records) {
        const std::string key = std::string(r.label ? to_string(*r.label) : "unlabeled") + "/" +
                                to_string(r.split) + "/" + to_string(r.provenance.kind);
        ++counts[key];
    }
    return counts;
}

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson record_to_json(const ClipRecord& r) {
    ojson j;
    j["id"] = r.clip_id;
    j["path"] = r.path;
    j["label"] = r.label ? ojson(to_string(*r.label)) : ojson(nullptr);
    j["split"] = to_string(r.split);
    ojson p;
    p["kind"] = to_string(r.provenance.kind);
    if (r.provenance.kind != Provenance::Kind::Original) p["parent"] = r.provenance.parent_id;
    if (r.provenance.kind == Provenance::Kind::VariantOf) p["index"] = r.provenance.variant_index;
    if (r.provenance.kind == Provenance::Kind::Poisoned) p["trigger"] = r.provenance.trigger_id;
    j["provenance"] = p;
    j["seed"] = r.rng_seed;
    return j;
}

inline ClipRecord record_from_json(const ojson& j) {
    ClipRecord r;
    r.clip_id = j.at("id").get<std::string>();
    r.path = j.at("path").get<std::string>();
    if (!j.at("label").is_null()) r.label = parse_label(j.at("label").get<std::string>());
    r.split = parse_split(j.at("split").get<std::string>());
    const auto& p = j.at("provenance");
    const auto kind = p.at("kind").get<std::string>();
    if (kind == "original") {
        r.provenance = Provenance::original();
    } else if (kind == "variant") {
        r.provenance = Provenance::variant_of(p.at("parent").get<std::string>(), p.at("index").get<std::uint64_t>());
    } else if (kind == "poisoned") {
        r.provenance = Provenance::poisoned(p.at("parent").get<std::string>(), p.at("trigger").get<std::string>());
    } else {
        throw FormatError("unknown provenance kind '" + kind + "'");
    }
    r.rng_seed = j.at("seed").get<std::uint64_t>();
    return r;
}

}  // namespace detail

inline std::string manifest_to_string(const DatasetManifest& m) {
    std::ostringstream out;
    detail::ojson h;
    h["format"] = "hotguard-manifest";
    h["version"] = m.header.format_version;
    h["seed"] = m.header.global_seed;
    h["config_digest"] = m.header.config_digest;
    out << h.dump() << '\n';
    for (const auto& r : m.records) out << detail::record_to_json(r).dump() << '\n';
    detail::ojson f;
    detail::ojson counts(detail::ojson::value_t::object);
    for (const auto& [k, v] : manifest_counts(m)) counts[k] = v;
    f["footer"] = {{"records", m.records.size()}, {"counts", counts}};
    out << f.dump() << '\n';
    return out.str();
}

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << manifest_to_string(m);
    if (!f) throw IoError("write failed for " + path);
}

inline DatasetManifest manifest_from_string(const std::string& text) {
    DatasetManifest m;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    bool have_footer = false;
    detail::ojson footer;
    std::set<std::string> ids;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (have_footer) throw FormatError("content after footer at line " + std::to_string(lineno));
        detail::ojson j;
        try {
            j = detail::ojson::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("manifest line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!have_header) {
            if (j.value("format", "") != "hotguard-manifest") throw FormatError("not a hotguard manifest");
            m.header.format_version = j.at("version").get<int>();
            if (m.header.format_version != 1) throw FormatError("unsupported manifest version");
            m.header.global_seed = j.at("seed").get<std::uint64_t>();
            m.header.config_digest = j.at("config_digest").get<std::string>();
            have_header = true;
            continue;
        }
        if (j.contains("footer")) {
            footer = j.at("footer");
            have_footer = true;
            continue;
        }
        try {
            auto r = detail::record_from_json(j);
            if (!ids.insert(r.clip_id).second) throw IntegrityError("duplicate clip_id '" + r.clip_id + "'");
            m.records.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("manifest line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!have_header) throw FormatError("manifest missing header");
    if (!have_footer) throw FormatError("manifest missing footer");
    if (footer.at("records").get<std::size_t>() != m.records.size())
        throw IntegrityError("footer record count does not match records");
    for (const auto& [k, v] : manifest_counts(m))
        if (!footer.at("counts").contains(k) || footer.at("counts").at(k).get<std::uint64_t>() != v)
            throw IntegrityError("footer count mismatch for " + k);
    if (footer.at("counts").size() != manifest_counts(m).size()) throw IntegrityError("footer has stale count keys");
    return m;
}

inline DatasetManifest load_manifest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return manifest_from_string(ss.str());
}

}  // namespace hotguard
