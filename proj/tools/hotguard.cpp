// hotguard: command-line driver for the backdoor attack / defensive augmentation experiment.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hotguard/pipeline.hpp"

namespace {

using namespace hotguard;

struct Common {
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> count, test_count;
    std::string levels;
    std::string out;
    unsigned jobs = 1;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("-c,--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--set", c.sets, "override a config key, e.g. --set train.max_epochs=5 (repeatable)");
    sub->add_option("--seed", c.seed, "global seed");
    sub->add_option("--count", c.count, "number of training clips");
    sub->add_option("--test-count", c.test_count, "number of test clips");
    sub->add_option("--levels", c.levels, "augmentation levels, comma separated (must include 0)");
    sub->add_option("-o,--out", c.out, "output directory (default: $HOTGUARD_OUT or the config value)");
    sub->add_option("-j,--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
}

std::string levels_json(const std::string& csv) {
    std::string out = "[";
    std::stringstream ss(csv);
    std::string tok;
    bool first = true;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty() || tok.find_first_not_of("0123456789 ") != std::string::npos)
            throw ConfigError("--levels expects comma-separated non-negative integers, got '" + csv + "'");
        out += (first ? "" : ",") + tok;
        first = false;
    }
    return out + "]";
}

ExperimentConfig resolve(const Common& c) {
    std::string text;
    if (!c.config_path.empty()) {
        std::ifstream f(c.config_path, std::ios::binary);
        if (!f) throw ConfigError("cannot open config file " + c.config_path);
        text.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    }
    std::vector<std::string> ov;
    bool file_sets_out = false;
    if (!text.empty()) {
        try {
            file_sets_out = nlohmann::json::parse(text).contains("output_dir");
        } catch (const nlohmann::json::exception&) {
        }
    }
    if (const char* env = std::getenv("HOTGUARD_OUT"); env && *env && !file_sets_out)
        ov.push_back(std::string("output_dir=") + nlohmann::json(env).dump());
    if (c.seed) ov.push_back("seed=" + std::to_string(*c.seed));
    if (c.count) ov.push_back("corpus.train_clips=" + std::to_string(*c.count));
    if (c.test_count) ov.push_back("corpus.test_clips=" + std::to_string(*c.test_count));
    if (!c.levels.empty()) ov.push_back("levels=" + levels_json(c.levels));
    ov.insert(ov.end(), c.sets.begin(), c.sets.end());
    if (!c.out.empty()) ov.push_back("output_dir=" + nlohmann::json(c.out).dump());
    return config_from_json_text(text, ov);
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const DependencyError*>(&e)) return 2;
    if (dynamic_cast<const IntegrityError*>(&e) || dynamic_cast<const CalibrationError*>(&e) ||
        dynamic_cast<const FormatError*>(&e))
        return 3;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hotguard: clean-label backdoor attack and defensive augmentation for litho hotspot detection"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "hotguard 1.0");

    Common common;
    std::string arch = "A";
    std::optional<std::size_t> level;
    bool clean = false, activations = false, print_digest = false;

    auto* gen = app.add_subcommand("gen-corpus", "generate the train and test layout corpora");
    auto* cal = app.add_subcommand("calibrate", "fit litho sigma/threshold and validate the trigger");
    auto* sim = app.add_subcommand("simulate", "label the corpus with the litho oracle");
    auto* poi = app.add_subcommand("poison", "insert the trigger into train non-hotspots and all test clips");
    auto* aug = app.add_subcommand("augment", "generate defensive variants up to the largest level");
    auto* fea = app.add_subcommand("featurize", "compute DCT feature tensors");
    auto* trn = app.add_subcommand("train", "train one model");
    auto* evl = app.add_subcommand("evaluate", "evaluate one model on the four test slices");
    auto* swp = app.add_subcommand("sweep", "run every stage and the full level grid");
    auto* dig = app.add_subcommand("digest", "print the config digest and artifact directory");
    for (auto* s : {gen, cal, sim, poi, aug, fea, trn, evl, swp, dig}) add_common(s, common);
    for (auto* s : {trn, evl}) {
        s->add_option("--arch", arch, "architecture")->check(CLI::IsMember({"A", "B"}));
        s->add_option("--level", level, "augmentation level (default 0)");
        s->add_flag("--clean", clean, "clean baseline: no poisoned or augmented samples");
    }
    evl->add_flag("--activations", activations, "also export fc1 activations");
    swp->add_flag("--activations", activations, "also export fc1 activations for every model");
    swp->add_option("--arch", arch, "restrict the sweep to one architecture")->check(CLI::IsMember({"A", "B"}));
    dig->add_flag("--path", print_digest, "print the artifact directory instead of the digest");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (swp->parsed() && swp->count("--arch")) common.sets.push_back("archs=[\"" + arch + "\"]");
        auto cfg = resolve(common);
        Pipeline p(std::move(cfg), common.jobs);
        std::optional<std::size_t> model_level;
        if (!clean) model_level = level.value_or(0);
        if ((trn->parsed() || evl->parsed()) && !clean && model_level &&
            std::find(p.config().levels.begin(), p.config().levels.end(), *model_level) == p.config().levels.end())
            throw ConfigError("--level " + std::to_string(*model_level) + " is not one of the configured levels");

        if (gen->parsed()) p.gen_corpus();
        else if (cal->parsed()) p.calibrate_litho();
        else if (sim->parsed()) p.simulate_labels();
        else if (poi->parsed()) p.poison();
        else if (aug->parsed()) p.augment();
        else if (fea->parsed()) p.featurize_all();
        else if (trn->parsed()) p.train_model(arch, model_level);
        else if (evl->parsed()) p.evaluate_model(arch, model_level, activations);
        else if (swp->parsed()) {
            p.sweep(activations);
            std::cout << detail::read_file(p.report_file("sweep.txt").string());
        } else if (dig->parsed()) {
            std::cout << (print_digest ? p.dir().string() : p.digest()) << '\n';
            return 0;
        }
        std::cerr << "artifacts: " << p.dir().string() << '\n';
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
