#pragma once

// End-to-end experiment stages. Each stage reads its inputs from, and writes
// its outputs to, <output_dir>/<config digest>/, so stages can run as separate
// processes and re-runs overwrite files with identical bytes.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hotguard/attack.hpp"
#include "hotguard/calibrate.hpp"
#include "hotguard/config.hpp"
#include "hotguard/error.hpp"
#include "hotguard/eval.hpp"
#include "hotguard/features.hpp"
#include "hotguard/gdsii.hpp"
#include "hotguard/litho.hpp"
#include "hotguard/manifest.hpp"
#include "hotguard/nn/model.hpp"
#include "hotguard/nn/train.hpp"
#include "hotguard/parallel.hpp"
#include "hotguard/synthesis.hpp"

namespace hotguard {

namespace fs = std::filesystem;

struct TrainSummary {
    std::string tag;
    std::size_t train_size = 0;
    std::size_t hotspots = 0;
    double class_weight = 0;
    int epochs = 0;
    int selected_epoch = 0;
    bool degraded = false;
};

class Pipeline {
public:
    Pipeline(ExperimentConfig cfg, unsigned jobs = 1, std::ostream* log = &std::cerr)
        : cfg_(std::move(cfg)), jobs_(std::max(1u, jobs)), log_(log) {
        digest_ = config_digest(cfg_);
        dir_ = fs::path(cfg_.output_dir) / digest_;
    }

    const ExperimentConfig& config() const { return cfg_; }
    const std::string& digest() const { return digest_; }
    const fs::path& dir() const { return dir_; }
    std::uint64_t digest_value() const { return std::stoull(digest_, nullptr, 16); }

    // Artifact paths.
    fs::path corpus_manifest() const { return dir_ / "corpus" / "manifest.jsonl"; }
    fs::path litho_file() const { return dir_ / "litho.json"; }
    fs::path labels_manifest() const { return dir_ / "labels" / "manifest.jsonl"; }
    fs::path poison_manifest() const { return dir_ / "poison" / "manifest.jsonl"; }
    fs::path augment_manifest() const { return dir_ / "augment" / "manifest.jsonl"; }
    fs::path feature_file(const std::string& set) const { return dir_ / "features" / (set + ".hgft"); }
    fs::path model_file(const std::string& tag) const { return dir_ / "models" / (tag + ".hsdm"); }
    fs::path report_file(const std::string& name) const { return dir_ / "reports" / name; }

    static std::string model_tag(const std::string& arch, std::optional<std::size_t> level) {
        return level ? arch + "_L" + std::to_string(*level) : arch + "_clean";
    }

    // ---------------------------------------------------------------- stages

    void gen_corpus() {
        fs::create_directories(dir_ / "corpus" / "gds");
        write_config();
        DatasetManifest m = new_manifest();
        for (Split split : {Split::Train, Split::Test}) {
            CorpusParams p = split_params(split);
            const auto clips = generate_corpus(p, jobs_);
            write_clips(clips, "corpus/gds");
            for (std::size_t i = 0; i < clips.size(); ++i) {
                ClipRecord r;
                r.clip_id = clips[i].id;
                r.path = "corpus/gds/" + clips[i].id + ".gds";
                r.split = split;
                r.rng_seed = derive_seed(p.seed, "corpus", i);
                m.records.push_back(std::move(r));
            }
        }
        save_manifest(m, corpus_manifest().string());
        say("gen-corpus", std::to_string(cfg_.train_clips) + " train + " + std::to_string(cfg_.test_clips) + " test clips");
    }

    LithoConfig calibrate_litho() {
        const auto corpus = load_clips(require(corpus_manifest(), "gen-corpus"));
        LithoConfig litho = cfg_.litho;
        if (cfg_.calibrate_litho) {
            std::vector<LayoutClip> train;
            for (std::size_t i = 0; i < corpus.manifest.records.size(); ++i)
                if (corpus.manifest.records[i].split == Split::Train) train.push_back(corpus.clips[i]);
            GenParams gp = cfg_.gen;
            gp.seed = derive_seed(cfg_.seed, "calibration");
            const auto res = calibrate(train, cfg_.litho, gp, cfg_.calibration, jobs_);
            write_calibration_csv(res, (dir_ / "calibration.csv").string(), digest_);
            litho = res.config;
            say("calibrate", candidate_summary(res.chosen));
        } else {
            say("calibrate", "calibration disabled; using configured sigma/threshold");
        }
        validate_trigger(cfg_.trigger, litho, cfg_.deck);
        nlohmann::ordered_json j;
        j["config_digest"] = digest_;
        j["pixel_nm"] = litho.pixel_nm;
        j["sigma_nm"] = litho.sigma_nm;
        j["threshold"] = litho.threshold;
        j["min_marker_area_nm2"] = litho.min_marker_area_nm2;
        j["dilation_margin_nm"] = litho.dilation_margin_nm;
        write_text(litho_file(), j.dump(2) + "\n");
        return litho;
    }

    LithoConfig load_litho() const {
        const auto text = read_text(require(litho_file(), "calibrate"));
        try {
            const auto j = nlohmann::json::parse(text);
            LithoConfig c;
            c.pixel_nm = j.at("pixel_nm").get<int>();
            c.sigma_nm = j.at("sigma_nm").get<double>();
            c.threshold = j.at("threshold").get<double>();
            c.min_marker_area_nm2 = j.at("min_marker_area_nm2").get<double>();
            c.dilation_margin_nm = j.at("dilation_margin_nm").get<Coord>();
            c.validate();
            return c;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(litho_file().string() + ": " + e.what());
        }
    }

    void simulate_labels() {
        const auto litho = load_litho();
        auto set = load_clips(require(corpus_manifest(), "gen-corpus"));
        std::vector<Label> labels(set.clips.size());
        parallel_for(set.clips.size(), jobs_, [&](std::size_t i) { labels[i] = simulate(set.clips[i], litho).label; });
        std::size_t hs[2] = {0, 0}, n[2] = {0, 0};
        for (std::size_t i = 0; i < labels.size(); ++i) {
            auto& r = set.manifest.records[i];
            r.label = labels[i];
            const int s = r.split == Split::Train ? 0 : 1;
            ++n[s];
            hs[s] += labels[i] == Label::Hotspot;
        }
        fs::create_directories(labels_manifest().parent_path());
        save_manifest(set.manifest, labels_manifest().string());
        say("simulate", "hotspots: train " + std::to_string(hs[0]) + "/" + std::to_string(n[0]) + ", test " +
                            std::to_string(hs[1]) + "/" + std::to_string(n[1]));
    }

    void poison() {
        const auto litho = load_litho();
        const auto set = load_clips(require(labels_manifest(), "simulate"));
        std::vector<ClipSample> samples;
        for (std::size_t i = 0; i < set.clips.size(); ++i) samples.push_back({set.manifest.records[i], set.clips[i]});
        PoisonConfig pc;
        pc.trigger = cfg_.trigger;
        pc.target_fraction = cfg_.poison_fraction;
        pc.seed = derive_seed(cfg_.seed, "poison");
        pc.deck = cfg_.deck;
        const auto out = poison_dataset(samples, pc, litho, jobs_);
        fs::create_directories(dir_ / "poison" / "gds");
        DatasetManifest m = new_manifest();
        for (const auto* group : {&out.train_nonhotspot, &out.test_nonhotspot, &out.test_hotspot})
            for (const auto& s : *group) {
                write_clip(s.clip, "poison/gds");
                ClipRecord r = s.record;
                r.path = "poison/gds/" + s.clip.id + ".gds";
                m.records.push_back(std::move(r));
            }
        save_manifest(m, poison_manifest().string());
        write_poison_csv(out, report_path_in("poison", "stats.csv"), digest_);
        say("poison", "train kept " + std::to_string(out.train_nonhotspot.size()) + " of " +
                          std::to_string(out.train_stats.attempted) + " (flipped " +
                          std::to_string(out.train_flipped.size()) + "); test P-NH " +
                          std::to_string(out.test_nonhotspot.size()) + ", P-HS " + std::to_string(out.test_hotspot.size()));
    }

    void augment() {
        const auto litho = load_litho();
        const auto base = load_clips(require(labels_manifest(), "simulate"));
        const auto pois = load_clips(require(poison_manifest(), "poison"));
        std::vector<ClipSample> parents;
        for (const auto* set : {&base, &pois})
            for (std::size_t i = 0; i < set->clips.size(); ++i)
                if (set->manifest.records[i].split == Split::Train)
                    parents.push_back({set->manifest.records[i], set->clips[i]});
        GenParams gp = cfg_.gen;
        gp.variant_count = cfg_.max_level();
        gp.seed = derive_seed(cfg_.seed, "variants");
        const auto res = defensive_augment(parents, gp, litho, jobs_);
        fs::create_directories(dir_ / "augment" / "gds");
        DatasetManifest m = new_manifest();
        std::vector<LayoutClip> clips;
        for (const auto& s : res.retained) {
            ClipRecord r = s.record;
            r.path = "augment/gds/" + s.clip.id + ".gds";
            m.records.push_back(std::move(r));
            clips.push_back(s.clip);
        }
        write_clips(clips, "augment/gds");
        save_manifest(m, augment_manifest().string());
        write_yield_csv(res.yields, report_path_in("augment", "yield.csv"), digest_);
        std::size_t att = 0, failed = 0;
        for (const auto& y : res.yields) {
            att += y.attempted;
            failed += y.drc_failed;
        }
        say("augment", std::to_string(res.retained.size()) + " variants retained from " + std::to_string(att) +
                           " generated (" + std::to_string(failed) + " failed DRC), max level " +
                           std::to_string(cfg_.max_level()) + ", cross-class rate " +
                           detail::fmt(cross_class_rate(res.yields), "%.4f"));
    }

    void featurize_all() {
        const std::vector<std::pair<std::string, fs::path>> sets = {
            {"corpus", require(labels_manifest(), "simulate")},
            {"poison", require(poison_manifest(), "poison")},
            {"augment", require(augment_manifest(), "augment")}};
        fs::create_directories(dir_ / "features");
        for (const auto& [name, path] : sets) {
            const auto set = load_clips(path);
            FeatureCache cache;
            cache.config_digest = digest_value();
            cache.tensors.resize(set.clips.size());
            parallel_for(set.clips.size(), jobs_, [&](std::size_t i) { cache.tensors[i] = featurize(set.clips[i]); });
            save_feature_cache(cache, feature_file(name).string());
            say("featurize", name + ": " + std::to_string(cache.tensors.size()) + " tensors");
        }
    }

    /// Train one model. `level` empty means the clean baseline (no poison, no augmentation).
    TrainSummary train_model(const std::string& arch_name, std::optional<std::size_t> level) {
        const auto arch = nn::ArchSpec::by_name(arch_name);
        std::vector<FeatureTensor> x;
        std::vector<Label> y;
        auto add = [&](const std::string& set, const fs::path& manifest, const char* stage, auto&& keep) {
            const auto m = load_manifest(require(manifest, stage).string());
            const auto f = load_features(set, m, stage);
            for (std::size_t i = 0; i < m.records.size(); ++i)
                if (m.records[i].split == Split::Train && keep(m.records[i])) {
                    x.push_back(f.tensors[i]);
                    y.push_back(*m.records[i].label);
                }
        };
        add("corpus", labels_manifest(), "simulate", [](const ClipRecord&) { return true; });
        if (level) {
            add("poison", poison_manifest(), "poison", [](const ClipRecord&) { return true; });
            if (*level > 0)
                add("augment", augment_manifest(), "augment",
                    [&](const ClipRecord& r) { return r.provenance.variant_index < *level; });
        }
        nn::TrainConfig tc = cfg_.train;
        const std::string tag = model_tag(arch_name, level);
        tc.seed = derive_seed(cfg_.seed, "train/" + tag);
        const auto res = nn::train(arch, x, y, tc, jobs_);
        const auto sel = nn::select_checkpoint(res.checkpoints);
        const auto model = nn::model_from_checkpoint(arch, res.checkpoints[sel.index]);
        fs::create_directories(dir_ / "models");
        save_model(model, model_file(tag).string(), digest_value());
        nn::write_training_log(res, (dir_ / "models" / (tag + ".log.csv")).string(), digest_);

        TrainSummary s;
        s.tag = tag;
        s.train_size = x.size();
        for (Label l : y) s.hotspots += l == Label::Hotspot;
        s.class_weight = res.class_weight;
        s.epochs = static_cast<int>(res.checkpoints.size());
        s.selected_epoch = res.checkpoints[sel.index].epoch;
        s.degraded = sel.degraded;
        nlohmann::ordered_json j;
        j["config_digest"] = digest_;
        j["model"] = tag;
        j["train_size"] = s.train_size;
        j["hotspots"] = s.hotspots;
        j["class_weight"] = s.class_weight;
        j["epochs"] = s.epochs;
        j["selected_epoch"] = s.selected_epoch;
        j["degraded_selection"] = s.degraded;
        write_text(dir_ / "models" / (tag + ".selection.json"), j.dump(2) + "\n");
        say("train", tag + ": " + std::to_string(s.train_size) + " samples (" + std::to_string(s.hotspots) +
                         " hotspots), weight " + detail::fmt(s.class_weight, "%.0f") + ", epoch " +
                         std::to_string(s.selected_epoch) + "/" + std::to_string(s.epochs) +
                         (s.degraded ? " [degraded selection]" : ""));
        return s;
    }

    EvalReport evaluate_model(const std::string& arch_name, std::optional<std::size_t> level, bool activations = false) {
        const std::string tag = model_tag(arch_name, level);
        const auto loaded = nn::load_model(require(model_file(tag), "train").string());
        const auto slices = test_slices();
        auto report = evaluate(loaded.model, slices.features, jobs_);
        report.model_id = tag;
        report.level = level.value_or(0);
        fs::create_directories(dir_ / "reports");
        write_text(report_file("eval_" + tag + ".csv"), report_csv(report, digest_));
        if (activations) {
            std::vector<ActivationInput> rows;
            for (Slice s : kSlices) {
                const auto k = static_cast<int>(s);
                for (std::size_t i = 0; i < slices.features[k].size(); ++i)
                    rows.push_back({slices.ids[k][i], slice_tag(s), &slices.features[k][i]});
            }
            write_text(report_file("activations_" + tag + ".csv"), activation_csv(loaded.model, rows, digest_, "fc1", jobs_));
        }
        say("evaluate", tag + ": C-NH " + detail::fmt(report.accuracy(Slice::CleanNonHotspot), "%.3f") + " C-HS " +
                            detail::fmt(report.accuracy(Slice::CleanHotspot), "%.3f") + " P-NH " +
                            detail::fmt(report.accuracy(Slice::PoisonedNonHotspot), "%.3f") + " P-HS " +
                            detail::fmt(report.accuracy(Slice::PoisonedHotspot), "%.3f") + " ASR " +
                            detail::fmt(report.asr, "%.3f"));
        return report;
    }

    struct SweepResult {
        std::vector<EvalReport> levels;  // with r_asr filled, ordered by (level, arch)
        std::vector<EvalReport> clean;   // clean baselines, one per arch
        std::vector<TrainSummary> training;
    };

    /// Every stage, then a clean baseline and one backdoored model per level and architecture.
    SweepResult sweep(bool activations = false) {
        gen_corpus();
        calibrate_litho();
        simulate_labels();
        poison();
        augment();
        featurize_all();
        SweepResult out;
        std::vector<EvalReport> reports;
        for (const auto& arch : cfg_.archs) {
            out.training.push_back(train_model(arch, std::nullopt));
            out.clean.push_back(evaluate_model(arch, std::nullopt, activations));
            for (std::size_t level : cfg_.levels) {
                out.training.push_back(train_model(arch, level));
                reports.push_back(evaluate_model(arch, level, activations));
            }
        }
        out.levels = with_relative_asr(reports);
        write_text(report_file("sweep.csv"), sweep_csv(reports, digest_));
        std::string table = "# config_digest=" + digest_ + "\n" + sweep_table(reports);
        for (const auto& c : out.clean)
            table += "clean baseline " + c.arch + ": C-NH " + detail::fmt(c.accuracy(Slice::CleanNonHotspot), "%.3f") +
                     " C-HS " + detail::fmt(c.accuracy(Slice::CleanHotspot), "%.3f") + " ASR " +
                     detail::fmt(c.asr, "%.3f") + "\n";
        write_text(report_file("sweep.txt"), table);
        say("sweep", "report written to " + report_file("sweep.csv").string());
        return out;
    }

    // ---------------------------------------------------------------- helpers

    struct ClipSet {
        DatasetManifest manifest;
        std::vector<LayoutClip> clips;
    };

    ClipSet load_clips(const fs::path& manifest_path) const {
        ClipSet s;
        s.manifest = load_manifest(manifest_path.string());
        check_digest(s.manifest.header.config_digest, manifest_path);
        s.clips.resize(s.manifest.records.size());
        parallel_for(s.clips.size(), jobs_, [&](std::size_t i) {
            const auto& r = s.manifest.records[i];
            auto clip = gds::read_clip_gds((dir_ / r.path).string()).clip;
            if (clip.id != r.clip_id) throw IntegrityError(r.path + " holds structure '" + clip.id + "', expected '" + r.clip_id + "'");
            s.clips[i] = std::move(clip);
        });
        return s;
    }

    struct TestSlices {
        std::array<std::vector<FeatureTensor>, 4> features;
        std::array<std::vector<std::string>, 4> ids;
    };

    TestSlices test_slices() const {
        TestSlices t;
        auto add = [&](const std::string& set, const fs::path& manifest, const char* stage, bool poisoned) {
            const auto m = load_manifest(require(manifest, stage).string());
            const auto f = load_features(set, m, stage);
            for (std::size_t i = 0; i < m.records.size(); ++i) {
                const auto& r = m.records[i];
                if (r.split != Split::Test) continue;
                const bool hs = *r.label == Label::Hotspot;
                const int k = poisoned ? (hs ? 3 : 2) : (hs ? 1 : 0);
                t.features[k].push_back(f.tensors[i]);
                t.ids[k].push_back(r.clip_id);
            }
        };
        add("corpus", labels_manifest(), "simulate", false);
        add("poison", poison_manifest(), "poison", true);
        return t;
    }

private:
    ExperimentConfig cfg_;
    unsigned jobs_;
    std::ostream* log_;
    std::string digest_;
    fs::path dir_;

    void say(const std::string& stage, const std::string& msg) const {
        if (log_) *log_ << "[" << stage << "] " << msg << std::endl;
    }

    DatasetManifest new_manifest() const {
        DatasetManifest m;
        m.header.global_seed = cfg_.seed;
        m.header.config_digest = digest_;
        return m;
    }

    CorpusParams split_params(Split split) const {
        CorpusParams p = cfg_.corpus;
        p.deck = cfg_.deck;
        const bool train = split == Split::Train;
        p.clip_count = train ? cfg_.train_clips : cfg_.test_clips;
        p.seed = derive_seed(cfg_.seed, train ? "corpus/train" : "corpus/test");
        p.id_prefix = train ? "tr" : "te";
        return p;
    }

    void write_config() const {
        nlohmann::ordered_json j;
        j["config_digest"] = digest_;
        // Canonical form: runs that differ only in where they write get identical files.
        j["config"] = nlohmann::ordered_json::parse(canonical_config(cfg_));
        write_text(dir_ / "config.json", j.dump(2) + "\n");
    }

    std::string libname() const { return "HOTGUARD-" + digest_; }

    void write_clip(const LayoutClip& c, const std::string& subdir) const {
        gds::write_clip_gds(c, (dir_ / subdir / (c.id + ".gds")).string(), libname());
    }

    void write_clips(const std::vector<LayoutClip>& clips, const std::string& subdir) const {
        parallel_for(clips.size(), jobs_, [&](std::size_t i) { write_clip(clips[i], subdir); });
    }

    std::string report_path_in(const std::string& sub, const std::string& name) const {
        fs::create_directories(dir_ / sub);
        return (dir_ / sub / name).string();
    }

    FeatureCache load_features(const std::string& set, const DatasetManifest& m, const char*) const {
        auto cache = load_feature_cache(require(feature_file(set), "featurize").string());
        if (cache.config_digest != digest_value()) throw IntegrityError(feature_file(set).string() + " was produced by another config");
        if (cache.tensors.size() != m.records.size())
            throw IntegrityError(feature_file(set).string() + " does not match its manifest; re-run featurize");
        return cache;
    }

    void check_digest(const std::string& d, const fs::path& path) const {
        if (d != digest_) throw IntegrityError(path.string() + " was produced by config " + d + ", expected " + digest_);
    }

    static fs::path require(const fs::path& p, const char* stage) {
        if (!fs::exists(p)) throw DependencyError("missing " + p.string() + "; run `" + stage + "` first");
        return p;
    }

    static std::string read_text(const fs::path& p) { return detail::read_file(p.string()); }
    static void write_text(const fs::path& p, const std::string& text) {
        fs::create_directories(p.parent_path());
        detail::write_file(p.string(), text);
    }
};

}  // namespace hotguard
