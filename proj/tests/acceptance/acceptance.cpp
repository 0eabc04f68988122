// End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero exit if
// any criterion fails.
//
//   acceptance_tests [--jobs N] [--work DIR] [--config FILE]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "hotguard/pipeline.hpp"
#include "../support/gradcheck.hpp"
#include "../support/oracles.hpp"

namespace fs = std::filesystem;
using namespace hotguard;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int n, const std::string& title, const Outcome& o) {
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", n, title.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

std::string f3(double v) { return detail::fmt(v, "%.3f"); }

double clean_accuracy(const EvalReport& r) {
    const auto& nh = r.slice(Slice::CleanNonHotspot);
    const auto& hs = r.slice(Slice::CleanHotspot);
    const double correct = static_cast<double>(nh.counts[0][0] + hs.counts[1][1]);
    return correct / static_cast<double>(r.size(Slice::CleanNonHotspot) + r.size(Slice::CleanHotspot));
}

const EvalReport& at_level(const Pipeline::SweepResult& s, std::size_t level) {
    for (const auto& r : s.levels)
        if (r.level == level && r.arch == "A") return r;
    throw std::runtime_error("sweep has no architecture-A report at level " + std::to_string(level));
}

Outcome backdoor(const Pipeline::SweepResult& s, double minutes) {
    const auto& clean = s.clean.front();
    const auto& l0 = at_level(s, 0);
    const double dnh = l0.accuracy(Slice::CleanNonHotspot) - clean.accuracy(Slice::CleanNonHotspot);
    const double dhs = l0.accuracy(Slice::CleanHotspot) - clean.accuracy(Slice::CleanHotspot);
    Outcome o;
    o.pass = l0.asr >= 0.50 && std::abs(dnh) <= 0.03 && std::abs(dhs) <= 0.03 && minutes <= 30.0;
    o.detail = "ASR " + f3(l0.asr) + " on " + std::to_string(l0.size(Slice::PoisonedHotspot)) + " P-HS clips (need >= 0.50); " +
               "clean-slice change C-NH " + f3(dnh) + ", C-HS " + f3(dhs) + " (need |.| <= 0.03); sweep runtime " +
               detail::fmt(minutes, "%.1f") + " min (need <= 30)";
    return o;
}

Outcome defense(const Pipeline::SweepResult& s) {
    Outcome o;
    o.pass = true;
    std::string trend;
    double lowest = INFINITY;
    for (const auto& r : s.levels) {
        if (r.arch != "A") continue;
        if (!r.r_asr) {
            o.pass = false;
            o.detail = "level-0 ASR is zero, so R-ASR is undefined";
            return o;
        }
        const double v = *r.r_asr;
        trend += (trend.empty() ? "" : " ") + std::to_string(r.level) + ":" + f3(v);
        if (v > lowest + 0.10) o.pass = false;
        lowest = std::min(lowest, v);
    }
    const auto& top = s.levels.back();
    const double base_acc = clean_accuracy(s.clean.front()), top_acc = clean_accuracy(top);
    if (*top.r_asr > 0.25 || top_acc < base_acc - 0.02) o.pass = false;
    o.detail = "R-ASR " + trend + " (never above the lowest earlier level + 0.10, top <= 0.25); clean accuracy at level " +
               std::to_string(top.level) + " " + f3(top_acc) + " vs baseline " + f3(base_acc) + " (need >= baseline - 0.02)";
    return o;
}

Outcome cross_rate(const Pipeline& p) {
    std::ifstream f(p.dir() / "augment" / "yield.csv");
    std::string line;
    std::size_t crossed = 0, total = 0;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("parent_id", 0) == 0) continue;
        std::vector<std::string> c;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) c.push_back(cell);
        if (c.size() != 8 || c[1] != "nonhotspot") continue;
        crossed += std::stoul(c[4]);
        total += std::stoul(c[4]) + std::stoul(c[5]);
    }
    const double rate = total ? static_cast<double>(crossed) / static_cast<double>(total) : 0.0;
    return {total > 0 && rate >= 0.001 && rate <= 0.01,
            std::to_string(crossed) + " of " + std::to_string(total) + " non-hotspot-parent variants crossed, rate " +
                detail::fmt(rate, "%.4f") + " (need 0.0010..0.0100)"};
}

Outcome clean_label_audit(const Pipeline& p, unsigned jobs) {
    const auto litho = p.load_litho();
    const RuleDeck deck = p.config().deck;
    std::size_t checked = 0, bad_drc = 0, bad_label = 0;
    for (const auto& m : {p.poison_manifest(), p.augment_manifest()}) {
        const auto set = p.load_clips(m);
        std::vector<char> drc_ok(set.clips.size()), label_ok(set.clips.size());
        parallel_for(set.clips.size(), jobs, [&](std::size_t i) {
            drc_ok[i] = is_drc_clean(set.clips[i], deck);
            label_ok[i] = simulate(set.clips[i], litho).label == *set.manifest.records[i].label;
        });
        checked += set.clips.size();
        for (std::size_t i = 0; i < set.clips.size(); ++i) {
            bad_drc += !drc_ok[i];
            bad_label += !label_ok[i];
        }
    }
    return {checked > 0 && bad_drc == 0 && bad_label == 0,
            std::to_string(checked) + " poisoned/augmented records; " + std::to_string(bad_drc) + " DRC failures, " +
                std::to_string(bad_label) + " label mismatches"};
}

Outcome gradients() {
    Outcome o;
    o.pass = true;
    for (const auto& r : gradcheck::run_all(2025, 60, 50)) {
        if (r.instances < 50 || !(r.worst < 1e-4)) o.pass = false;
        o.detail += r.layer + " " + std::to_string(r.instances) + "x worst " + detail::fmt(r.worst, "%.1e") + "; ";
    }
    o.detail += "need >= 50 instances each, < 1e-4";
    return o;
}

Outcome dct_suite() {
    Rng rng(7);
    const std::size_t nb = static_cast<std::size_t>(kBlock) * kBlock;
    double worst_rt = 0, worst_parseval = 0, dc_err = 0;
    std::vector<std::vector<double>> blocks;
    for (int t = 0; t < 20; ++t) {
        std::vector<double> b(nb);
        for (auto& v : b) v = rng.uniform01() * 2 - 1;
        blocks.push_back(std::move(b));
    }
    // Blocks cut from generated layouts.
    CorpusParams cp;
    cp.clip_count = 2;
    cp.seed = 5;
    for (const auto& clip : generate_corpus(cp)) {
        const auto img = clip_to_image(clip);
        for (int br = 3; br < 7; ++br) {
            std::vector<double> b(nb);
            for (int y = 0; y < kBlock; ++y)
                for (int x = 0; x < kBlock; ++x) b[static_cast<std::size_t>(y) * kBlock + x] = img.at(br * kBlock + x, br * kBlock + y);
            blocks.push_back(std::move(b));
        }
    }
    for (const auto& b : blocks) {
        const auto c = dct2(b, kBlock);
        const auto back = idct2(c, kBlock);
        double eb = 0, ec = 0;
        for (std::size_t i = 0; i < nb; ++i) {
            worst_rt = std::max(worst_rt, std::abs(back[i] - b[i]));
            eb += b[i] * b[i];
            ec += c[i] * c[i];
        }
        worst_parseval = std::max(worst_parseval, std::abs(eb - ec) / std::max(1.0, eb));
    }
    const auto dc = dct2(std::vector<double>(nb, 1.0), kBlock);
    dc_err = std::abs(dc[0] - 111.0);
    return {worst_rt < 1e-9 && dc_err < 1e-9 && worst_parseval < 1e-9,
            std::to_string(blocks.size()) + " blocks: round-trip max error " + detail::fmt(worst_rt, "%.1e") +
                ", constant-block DC error " + detail::fmt(dc_err, "%.1e") + ", Parseval relative error " +
                detail::fmt(worst_parseval, "%.1e") + " (all need < 1e-9)"};
}

Outcome parameter_audit() {
    const auto a = oracle::audit_parameters(10, 10, 32, {{{16, 16}}, {{32, 32}}}, {250, 2});
    const auto b = oracle::audit_parameters(10, 10, 32, {{{32, 32, 32, 32}}, {{64, 64, 64, 64}}}, {250, 2});
    const auto ma = nn::Model(nn::ArchSpec::A()).parameter_count();
    const auto mb = nn::Model(nn::ArchSpec::B()).parameter_count();
    return {a == 53584 && b == 231024 && ma == a && mb == b,
            "A built " + std::to_string(ma) + " / audit " + std::to_string(a) + " / expected 53584; B built " +
                std::to_string(mb) + " / audit " + std::to_string(b) + " / expected 231024"};
}

Outcome drc_oracle() {
    Rng rng(31337);
    const RuleDeck deck{};
    std::size_t pairs = 0, disagreements = 0, flag_mismatch = 0;
    double worst = 0;
    for (int clip = 0; clip < 1000; ++clip) {
        std::vector<RectilinearPolygon> polys;
        for (int k = 0; k < 3; ++k) polys.push_back(oracle::random_shape(rng, 240));
        for (std::size_t i = 0; i < polys.size(); ++i)
            for (std::size_t j = i + 1; j < polys.size(); ++j) {
                const double brute = oracle::brute_spacing(polys[i], polys[j]);
                double d = 0;
                try {
                    d = pair_spacing(polys[i], polys[j]);
                } catch (const OverlapError&) {
                    d = 0;
                }
                ++pairs;
                worst = std::max(worst, std::abs(d - brute));
                if (std::abs(d - brute) > 1.0) ++disagreements;
                if (d > 0) {
                    LayoutClip two{"p", {polys[i], polys[j]}};
                    std::size_t spacing = 0;
                    for (const auto& v : check_clip(two, deck)) spacing += v.kind == DrcViolation::Kind::Spacing;
                    if ((spacing > 0) != (d < deck.min_spacing_nm)) ++flag_mismatch;
                }
            }
    }
    return {disagreements == 0 && flag_mismatch == 0,
            "1000 clips, " + std::to_string(pairs) + " polygon pairs: worst |checker - brute| " + detail::fmt(worst, "%.3f") +
                " nm, " + std::to_string(disagreements) + " beyond 1 nm, " + std::to_string(flag_mismatch) +
                " spacing-flag mismatches"};
}

Outcome determinism(const fs::path& a, const fs::path& b) {
    std::size_t files = 0, differing = 0;
    std::string first_diff;
    auto slurp = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    };
    std::vector<fs::path> rel;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a));
    std::size_t in_b = 0;
    for (const auto& e : fs::recursive_directory_iterator(b)) in_b += e.is_regular_file();
    for (const auto& r : rel) {
        ++files;
        if (!fs::exists(b / r) || slurp(a / r) != slurp(b / r)) {
            ++differing;
            if (first_diff.empty()) first_diff = r.string();
        }
    }
    return {files > 0 && differing == 0 && in_b == files,
            std::to_string(files) + " files compared (manifests, GDS, feature caches, models, reports); " +
                std::to_string(differing) + " differ" + (first_diff.empty() ? "" : " (first: " + first_diff + ")") +
                (in_b == files ? "" : "; file counts differ")};
}

Outcome schedule_rules() {
    bool ok = true;
    std::string detail;
    nn::TrainConfig cfg;
    {
        auto c = cfg;
        c.max_epochs = 1000;
        c.early_stop_patience = 1000;
        nn::PlateauSchedule s(c);
        s.update(1.0);
        for (int k = 1; k <= 8; ++k) {
            for (int e = 0; e < c.lr_patience; ++e) s.update(2.0);
            const double want = std::max(0.001 * std::pow(0.3, k), 1e-5);
            if (std::abs(s.lr() - want) > 1e-15) ok = false;
        }
        detail += "lr after 8 plateau events " + detail::fmt(s.lr(), "%.1e") + "; ";
    }
    {
        nn::PlateauSchedule s(cfg);
        int epochs = 0;
        double loss = 1.0;
        while (!s.update(loss *= 0.95).stop) ++epochs;
        ++epochs;
        if (epochs != 20) ok = false;
        detail += "improving trace stops at epoch " + std::to_string(epochs) + "; ";
    }
    {
        auto c = cfg;
        c.max_epochs = 100;
        nn::PlateauSchedule s(c);
        s.update(0.5);
        int stagnant = 0;
        while (!s.update(0.5 + 0.01 * (stagnant % 3)).stop) ++stagnant;
        ++stagnant;
        if (stagnant != 10) ok = false;
        detail += "early stop after " + std::to_string(stagnant) + " stagnant epochs";
    }
    return {ok, detail + " (need max(0.001*0.3^k, 1e-5), 20, 10)"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    unsigned jobs = 1;
    std::string work = "acceptance-work", config;
    app.add_option("-j,--jobs", jobs);
    app.add_option("--work", work);
    app.add_option("-c,--config", config);
    CLI11_PARSE(app, argc, argv);

    std::printf("== property criteria\n");
    report(5, "gradient checks", gradients());
    report(6, "DCT suite", dct_suite());
    report(7, "parameter audit", parameter_audit());
    report(8, "DRC vs brute force", drc_oracle());
    report(10, "schedule rules", schedule_rules());

    std::printf("== end-to-end sweeps\n");
    std::fflush(stdout);
    const fs::path root = fs::absolute(work);
    fs::remove_all(root);
    auto make = [&](const std::string& sub) {
        auto c = load_config(config, {"output_dir=" + (root / sub).string()});
        return c;
    };
    try {
        Pipeline first(make("run1"), jobs);
        const auto t0 = std::chrono::steady_clock::now();
        const auto s = first.sweep();
        const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
        std::printf("%s", sweep_table(s.levels).c_str());
        report(1, "backdoor demonstration", backdoor(s, minutes));
        report(2, "defense trend", defense(s));
        report(3, "cross-class rate", cross_rate(first));
        report(4, "clean-label audit", clean_label_audit(first, jobs));

        Pipeline second(make("run2"), jobs + 1);
        second.sweep();
        report(9, "determinism", determinism(first.dir(), second.dir()));
    } catch (const std::exception& e) {
        std::printf("FAIL end-to-end sweep aborted: %s\n", e.what());
        ++failures;
    }
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
