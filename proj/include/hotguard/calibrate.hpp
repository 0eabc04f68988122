#pragma once

// Grid search of the litho surrogate's (sigma, threshold) against a target
// hotspot prevalence and a band on the variant cross-class rate.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "hotguard/error.hpp"
#include "hotguard/litho.hpp"
#include "hotguard/parallel.hpp"
#include "hotguard/synthesis.hpp"

namespace hotguard {

struct CalibrationTargets {
    double prevalence = 0.0475;
    double cross_rate_min = 0.001;
    double cross_rate_max = 0.010;
    std::vector<double> sigmas = {25.0, 27.5, 30.0, 32.5, 35.0};
    std::vector<double> thresholds = {0.20, 0.21, 0.22, 0.23, 0.24, 0.25, 0.26, 0.27, 0.28,
                                      0.29, 0.30, 0.31, 0.32, 0.33, 0.34, 0.35};
    /// Parents (taken from the front of the corpus) whose variants estimate the cross-class rate.
    std::size_t cross_parents = 300;
    std::size_t variants_per_parent = 10;

    void validate() const {
        if (!(prevalence > 0 && prevalence < 1)) throw ConfigError("target prevalence must lie in (0, 1)");
        if (!(cross_rate_min >= 0 && cross_rate_min <= cross_rate_max)) throw ConfigError("cross-rate band must be ordered");
        if (sigmas.empty() || thresholds.empty()) throw ConfigError("calibration grid is empty");
        if (variants_per_parent == 0) throw ConfigError("variants_per_parent must be positive");
    }
};

struct CalibrationCandidate {
    double sigma_nm = 0;
    double threshold = 0;
    double prevalence = 0;
    double cross_rate = 0;
    std::size_t cross_variants = 0;  // variants of non-hotspot parents
    bool in_band = false;
};

struct CalibrationResult {
    LithoConfig config;
    CalibrationCandidate chosen;
    std::vector<CalibrationCandidate> table;  // grid order: sigma-major
};

inline std::string candidate_summary(const CalibrationCandidate& c) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "sigma=%.3g threshold=%.3g prevalence=%.4f cross_rate=%.4f", c.sigma_nm, c.threshold,
                  c.prevalence, c.cross_rate);
    return buf;
}

/// Among grid points whose cross-class rate lies in the band, the one whose
/// prevalence is closest to the target; ties go to smaller sigma, then smaller
/// threshold. Throws CalibrationError naming the best out-of-band point otherwise.
inline CalibrationResult calibrate(const std::vector<LayoutClip>& corpus, const LithoConfig& base,
                                   const GenParams& gen, const CalibrationTargets& targets, unsigned jobs = 1) {
    targets.validate();
    base.validate();
    if (corpus.size() < 500) throw CalibrationError("calibration needs at least 500 clips, got " + std::to_string(corpus.size()));

    std::vector<double> sigmas = targets.sigmas, thresholds = targets.thresholds;
    std::sort(sigmas.begin(), sigmas.end());
    std::sort(thresholds.begin(), thresholds.end());
    const std::size_t ns = sigmas.size(), nt = thresholds.size();

    // Hotspot flag of one clip at every grid point, sigma-major.
    auto grid_labels = [&](const LayoutClip& clip) {
        const auto prep = prepare_litho(clip, base);
        std::vector<char> out(ns * nt);
        for (std::size_t si = 0; si < ns; ++si) {
            const auto a = aerial_image(prep, sigmas[si]);
            for (std::size_t t = 0; t < nt; ++t) {
                LithoConfig c = base;
                c.sigma_nm = sigmas[si];
                c.threshold = thresholds[t];
                out[si * nt + t] = develop(prep, a, c).label == Label::Hotspot;
            }
        }
        return out;
    };

    std::vector<std::vector<char>> parent_hs(corpus.size());
    parallel_for(corpus.size(), jobs, [&](std::size_t i) { parent_hs[i] = grid_labels(corpus[i]); });

    GenParams gp = gen;
    gp.variant_count = targets.variants_per_parent;
    const std::size_t np = std::min(targets.cross_parents, corpus.size());
    std::vector<std::vector<std::vector<char>>> variant_hs(np);
    parallel_for(np, jobs, [&](std::size_t i) {
        if (corpus[i].polygons.empty()) return;
        for (const auto& v : gen_variants(corpus[i], gp).variants) variant_hs[i].push_back(grid_labels(v));
    });

    CalibrationResult res;
    for (std::size_t g = 0; g < ns * nt; ++g) {
        CalibrationCandidate c;
        c.sigma_nm = sigmas[g / nt];
        c.threshold = thresholds[g % nt];
        std::size_t n_hs = 0, crossed = 0;
        for (const auto& h : parent_hs) n_hs += h[g];
        for (std::size_t i = 0; i < np; ++i) {
            if (parent_hs[i][g]) continue;
            c.cross_variants += variant_hs[i].size();
            for (const auto& h : variant_hs[i]) crossed += h[g];
        }
        c.prevalence = static_cast<double>(n_hs) / static_cast<double>(corpus.size());
        c.cross_rate = c.cross_variants ? static_cast<double>(crossed) / static_cast<double>(c.cross_variants) : 0.0;
        c.in_band = c.cross_variants > 0 && c.cross_rate >= targets.cross_rate_min && c.cross_rate <= targets.cross_rate_max;
        res.table.push_back(c);
    }

    const CalibrationCandidate* best = nullptr;
    const CalibrationCandidate* best_any = nullptr;
    auto closer = [&](const CalibrationCandidate* a, const CalibrationCandidate& b) {
        // Grid order already is (sigma, threshold) ascending, so strict < keeps the tie-break.
        return !a || std::abs(b.prevalence - targets.prevalence) < std::abs(a->prevalence - targets.prevalence);
    };
    for (const auto& c : res.table) {
        if (closer(best_any, c)) best_any = &c;
        if (c.in_band && closer(best, c)) best = &c;
    }
    if (!best)
        throw CalibrationError("no (sigma, threshold) grid point has a cross-class rate in [" +
                               std::to_string(targets.cross_rate_min) + ", " + std::to_string(targets.cross_rate_max) +
                               "]; closest prevalence: " + candidate_summary(*best_any));
    res.chosen = *best;
    res.config = base;
    res.config.sigma_nm = best->sigma_nm;
    res.config.threshold = best->threshold;
    return res;
}

inline void write_calibration_csv(const CalibrationResult& r, const std::string& path, const std::string& config_digest) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "# config_digest=" << config_digest << '\n';
    f << "sigma_nm,threshold,prevalence,cross_rate,cross_variants,in_band,chosen\n";
    char buf[200];
    for (const auto& c : r.table) {
        const bool chosen = c.sigma_nm == r.chosen.sigma_nm && c.threshold == r.chosen.threshold;
        std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6f,%.6f,%zu,%d,%d\n", c.sigma_nm, c.threshold, c.prevalence,
                      c.cross_rate, c.cross_variants, c.in_band ? 1 : 0, chosen ? 1 : 0);
        f << buf;
    }
    if (!f) throw IoError("write failed for " + path);
}

}  // namespace hotguard
