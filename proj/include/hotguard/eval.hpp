#pragma once

// Four-slice confusion matrices, attack success rates, sweep tables and
// penultimate-layer activation export.

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hotguard/error.hpp"
#include "hotguard/features.hpp"
#include "hotguard/manifest.hpp"
#include "hotguard/nn/model.hpp"
#include "hotguard/nn/train.hpp"
#include "hotguard/parallel.hpp"

namespace hotguard {

enum class Slice { CleanNonHotspot = 0, CleanHotspot = 1, PoisonedNonHotspot = 2, PoisonedHotspot = 3 };
inline constexpr std::array<Slice, 4> kSlices = {Slice::CleanNonHotspot, Slice::CleanHotspot, Slice::PoisonedNonHotspot,
                                                 Slice::PoisonedHotspot};

inline const char* slice_tag(Slice s) {
    switch (s) {
        case Slice::CleanNonHotspot: return "C-NH";
        case Slice::CleanHotspot: return "C-HS";
        case Slice::PoisonedNonHotspot: return "P-NH";
        case Slice::PoisonedHotspot: return "P-HS";
    }
    return "?";
}

inline Label slice_label(Slice s) {
    return s == Slice::CleanHotspot || s == Slice::PoisonedHotspot ? Label::Hotspot : Label::NonHotspot;
}

struct ConfusionMatrix {
    std::array<std::array<std::size_t, 2>, 2> counts{};  // [true class][predicted class]

    void add(Label truth, Label pred) { ++counts[nn::label_index(truth)][nn::label_index(pred)]; }
    std::size_t row_total(Label truth) const {
        const auto& r = counts[nn::label_index(truth)];
        return r[0] + r[1];
    }
    /// Fraction of `truth` samples predicted as `pred`; 0 for an empty row.
    double fraction(Label truth, Label pred) const {
        const auto n = row_total(truth);
        return n ? static_cast<double>(counts[nn::label_index(truth)][nn::label_index(pred)]) / static_cast<double>(n) : 0.0;
    }
};

struct EvalReport {
    std::string model_id;
    std::string arch;
    std::size_t level = 0;
    std::array<ConfusionMatrix, 4> slices;
    double asr = 0.0;
    std::optional<double> r_asr;
    bool poisoned_hotspot_empty = false;

    const ConfusionMatrix& slice(Slice s) const { return slices[static_cast<int>(s)]; }
    /// Fraction of the slice classified as its true class.
    double accuracy(Slice s) const { return slice(s).fraction(slice_label(s), slice_label(s)); }
    std::size_t size(Slice s) const { return slice(s).row_total(slice_label(s)); }
};

inline double relative_asr(double asr, double baseline_asr) {
    if (!(baseline_asr > 0.0)) throw EvaluationError("baseline ASR is zero; relative ASR is undefined");
    return asr / baseline_asr;
}

inline std::vector<Label> predict_labels(const nn::Model& model, const std::vector<FeatureTensor>& x, unsigned jobs = 1) {
    std::vector<Label> out(x.size());
    parallel_for(x.size(), jobs, [&](std::size_t i) { out[i] = nn::decide(model.predict(x[i].values.data())); });
    return out;
}

/// `slices` holds the feature tensors of C-NH, C-HS, P-NH, P-HS in that order.
inline EvalReport evaluate(const nn::Model& model, const std::array<std::vector<FeatureTensor>, 4>& slices,
                           unsigned jobs = 1) {
    if (slices[0].empty() || slices[1].empty()) throw EvaluationError("clean test slices must be non-empty");
    EvalReport r;
    r.arch = model.arch().name;
    for (Slice s : kSlices) {
        auto& cm = r.slices[static_cast<int>(s)];
        for (Label p : predict_labels(model, slices[static_cast<int>(s)], jobs)) cm.add(slice_label(s), p);
    }
    r.poisoned_hotspot_empty = slices[3].empty();
    r.asr = r.poisoned_hotspot_empty ? 0.0 : 1.0 - r.accuracy(Slice::PoisonedHotspot);
    return r;
}

namespace detail {

inline std::string fmt(double v, const char* f = "%.4f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << text;
    if (!f) throw IoError("write failed for " + path);
}

}  // namespace detail

/// Fill r_asr of every report from the level-0 report of the same architecture
/// and return them ordered by (level, arch). A zero baseline leaves r_asr empty.
inline std::vector<EvalReport> with_relative_asr(std::vector<EvalReport> reports) {
    std::map<std::string, double> base;
    for (const auto& r : reports)
        if (r.level == 0) base[r.arch] = r.asr;
    for (auto& r : reports) {
        const auto it = base.find(r.arch);
        if (it == base.end()) throw EvaluationError("no level-0 baseline for architecture " + r.arch);
        if (it->second > 0.0) r.r_asr = relative_asr(r.asr, it->second);
    }
    std::stable_sort(reports.begin(), reports.end(),
                     [](const EvalReport& a, const EvalReport& b) { return std::tie(a.level, a.arch) < std::tie(b.level, b.arch); });
    return reports;
}

/// Wide CSV: one row per level, six columns per architecture.
inline std::string sweep_csv(const std::vector<EvalReport>& input, const std::string& config_digest) {
    const auto reports = with_relative_asr(input);
    std::vector<std::string> arches;
    std::map<std::size_t, std::map<std::string, const EvalReport*>> rows;
    for (const auto& r : reports) {
        if (std::find(arches.begin(), arches.end(), r.arch) == arches.end()) arches.push_back(r.arch);
        rows[r.level][r.arch] = &r;
    }
    std::sort(arches.begin(), arches.end());
    std::ostringstream os;
    os << "# config_digest=" << config_digest << '\n' << "level";
    for (const auto& a : arches)
        for (const char* c : {"C-NH", "C-HS", "P-NH", "P-HS", "ASR", "R-ASR"}) os << ',' << a << '_' << c;
    os << '\n';
    for (const auto& [level, by_arch] : rows) {
        os << level;
        for (const auto& a : arches) {
            const auto it = by_arch.find(a);
            if (it == by_arch.end()) {
                os << ",,,,,,";
                continue;
            }
            const auto& r = *it->second;
            for (Slice s : kSlices) os << ',' << detail::fmt(r.accuracy(s));
            os << ',' << detail::fmt(r.asr) << ',' << (r.r_asr ? detail::fmt(*r.r_asr) : std::string());
        }
        os << '\n';
    }
    return os.str();
}

inline std::string sweep_table(const std::vector<EvalReport>& input) {
    const auto reports = with_relative_asr(input);
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-6s %-4s %7s %7s %7s %7s %7s %7s\n", "level", "arch", "C-NH", "C-HS", "P-NH", "P-HS",
                  "ASR", "R-ASR");
    os << buf;
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof buf, "%-6zu %-4s %7.3f %7.3f %7.3f %7.3f %7.3f", r.level, r.arch.c_str(),
                      r.accuracy(Slice::CleanNonHotspot), r.accuracy(Slice::CleanHotspot),
                      r.accuracy(Slice::PoisonedNonHotspot), r.accuracy(Slice::PoisonedHotspot), r.asr);
        os << buf;
        if (r.r_asr) {
            std::snprintf(buf, sizeof buf, " %7.3f\n", *r.r_asr);
            os << buf;
        } else {
            os << "     n/a\n";
        }
    }
    return os.str();
}

inline void write_sweep_report(const std::vector<EvalReport>& reports, const std::string& csv_path,
                               const std::string& config_digest) {
    detail::write_text(csv_path, sweep_csv(reports, config_digest));
}

/// Per-slice confusion matrix CSV for a single report.
inline std::string report_csv(const EvalReport& r, const std::string& config_digest) {
    std::ostringstream os;
    os << "# config_digest=" << config_digest << '\n';
    os << "slice,count,pred_nonhotspot,pred_hotspot,frac_nonhotspot,frac_hotspot,accuracy\n";
    for (Slice s : kSlices) {
        const auto& cm = r.slice(s);
        const Label t = slice_label(s);
        os << slice_tag(s) << ',' << cm.row_total(t) << ',' << cm.counts[nn::label_index(t)][0] << ','
           << cm.counts[nn::label_index(t)][1] << ',' << detail::fmt(cm.fraction(t, Label::NonHotspot), "%.6f") << ','
           << detail::fmt(cm.fraction(t, Label::Hotspot), "%.6f") << ',' << detail::fmt(r.accuracy(s), "%.6f") << '\n';
    }
    os << "# asr=" << detail::fmt(r.asr, "%.6f") << (r.poisoned_hotspot_empty ? " (P-HS slice empty)" : "") << '\n';
    return os.str();
}

struct ActivationInput {
    std::string clip_id;
    std::string slice;
    const FeatureTensor* features;
};

/// CSV rows (clip_id, slice, one column per unit of `layer`) in input order.
inline std::string activation_csv(const nn::Model& model, const std::vector<ActivationInput>& clips,
                                  const std::string& config_digest, const std::string& layer = "fc1",
                                  unsigned jobs = 1) {
    const std::size_t li = model.layer_index(layer);
    const std::size_t units = model.shapes()[li].size();
    std::vector<std::string> lines(clips.size());
    parallel_for(clips.size(), jobs, [&](std::size_t i) {
        nn::Model::Cache c;
        model.forward(clips[i].features->values.data(), c);
        std::string line = clips[i].clip_id + ',' + clips[i].slice;
        char buf[32];
        for (float v : c.acts[li]) {
            std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(v));
            line += buf;
        }
        lines[i] = std::move(line);
    });
    std::ostringstream os;
    os << "# config_digest=" << config_digest << '\n' << "clip_id,slice";
    for (std::size_t u = 0; u < units; ++u) os << ',' << layer << '_' << u;
    os << '\n';
    for (const auto& l : lines) os << l << '\n';
    return os.str();
}

}  // namespace hotguard
