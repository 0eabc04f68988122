#include <gtest/gtest.h>

#include "hotguard/eval.hpp"

using namespace hotguard;

namespace {

// A model whose output is fixed by the final bias: all weights zero.
nn::Model constant_model(Label always) {
    nn::Model m(nn::ArchSpec::A());
    for (auto& l : m.params()) {
        std::fill(l.w.begin(), l.w.end(), 0.0f);
        std::fill(l.b.begin(), l.b.end(), 0.0f);
    }
    m.params().back().b[nn::label_index(always)] = 1.0f;
    return m;
}

std::array<std::vector<FeatureTensor>, 4> slices(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return {std::vector<FeatureTensor>(a), std::vector<FeatureTensor>(b), std::vector<FeatureTensor>(c),
            std::vector<FeatureTensor>(d)};
}

EvalReport report(const std::string& arch, std::size_t level, double asr) {
    EvalReport r;
    r.arch = arch;
    r.level = level;
    r.asr = asr;
    return r;
}

}  // namespace

TEST(Evaluate, AllNonHotspotPredictionsGiveFullAsr) {
    const auto r = evaluate(constant_model(Label::NonHotspot), slices(5, 4, 3, 7));
    EXPECT_DOUBLE_EQ(r.asr, 1.0);
    EXPECT_DOUBLE_EQ(r.accuracy(Slice::CleanNonHotspot), 1.0);
    EXPECT_DOUBLE_EQ(r.accuracy(Slice::CleanHotspot), 0.0);
    EXPECT_EQ(r.size(Slice::PoisonedHotspot), 7u);
    EXPECT_EQ(r.slice(Slice::CleanHotspot).counts[1][0], 4u);
}

TEST(Evaluate, AllHotspotPredictionsGiveZeroAsr) {
    const auto r = evaluate(constant_model(Label::Hotspot), slices(5, 4, 3, 7));
    EXPECT_DOUBLE_EQ(r.asr, 0.0);
    EXPECT_DOUBLE_EQ(r.accuracy(Slice::PoisonedNonHotspot), 0.0);
}

TEST(Evaluate, EmptyPoisonedHotspotSliceIsFlagged) {
    const auto r = evaluate(constant_model(Label::NonHotspot), slices(2, 2, 0, 0));
    EXPECT_TRUE(r.poisoned_hotspot_empty);
    EXPECT_THROW(evaluate(constant_model(Label::NonHotspot), slices(0, 2, 1, 1)), EvaluationError);
}

TEST(RelativeAsr, Examples) {
    EXPECT_NEAR(relative_asr(0.68, 0.81), 0.8395, 1e-4);
    EXPECT_DOUBLE_EQ(relative_asr(0.5, 0.5), 1.0);
    EXPECT_DOUBLE_EQ(relative_asr(0.0, 0.7), 0.0);
    EXPECT_THROW(relative_asr(0.3, 0.0), EvaluationError);
}

TEST(Sweep, OrderedByLevelWithBaselinePerArch) {
    const auto out = with_relative_asr({report("A", 12, 0.2), report("B", 0, 0.5), report("A", 0, 0.8), report("B", 12, 0.1)});
    ASSERT_EQ(out.size(), 4u);
    EXPECT_EQ(out[0].level, 0u);
    EXPECT_EQ(out[0].arch, "A");
    EXPECT_DOUBLE_EQ(*out[0].r_asr, 1.0);
    EXPECT_DOUBLE_EQ(*out[2].r_asr, 0.25);
    EXPECT_DOUBLE_EQ(*out[3].r_asr, 0.2);
    EXPECT_THROW(with_relative_asr({report("A", 3, 0.2)}), EvaluationError);
}

TEST(Sweep, CsvLayout) {
    const auto csv = sweep_csv({report("A", 50, 0.1), report("A", 0, 0.8), report("A", 3, 0.6)}, "abc");
    std::istringstream is(csv);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(is, line)) lines.push_back(line);
    ASSERT_EQ(lines.size(), 5u);
    EXPECT_EQ(lines[0], "# config_digest=abc");
    EXPECT_EQ(lines[1], "level,A_C-NH,A_C-HS,A_P-NH,A_P-HS,A_ASR,A_R-ASR");
    EXPECT_EQ(lines[2].substr(0, 2), "0,");
    EXPECT_EQ(lines[3].substr(0, 2), "3,");
    EXPECT_EQ(lines[4].substr(0, 3), "50,");
    EXPECT_NE(lines[4].find("0.1250"), std::string::npos);
}

TEST(Sweep, SingleLevelHasUnitRelativeAsr) {
    const auto out = with_relative_asr({report("A", 0, 0.4)});
    EXPECT_DOUBLE_EQ(*out[0].r_asr, 1.0);
}

TEST(ReportCsv, RowsPerSlice) {
    const auto r = evaluate(constant_model(Label::NonHotspot), slices(2, 3, 1, 4));
    const auto csv = report_csv(r, "d");
    EXPECT_NE(csv.find("C-HS,3,3,0,1.000000,0.000000,0.000000"), std::string::npos);
    EXPECT_NE(csv.find("# asr=1.000000"), std::string::npos);
}

TEST(Activations, ColumnsAndValues) {
    nn::Model m(nn::ArchSpec::A());
    m.initialize(4);
    std::vector<FeatureTensor> x(3);
    Rng rng(2);
    for (auto& t : x)
        for (auto& v : t.values) v = static_cast<float>(rng.uniform01());
    std::vector<ActivationInput> in = {{"a", "C-NH", &x[0]}, {"b", "P-HS", &x[1]}, {"c", "C-HS", &x[2]}};
    const auto csv = activation_csv(m, in, "digest", "fc1", 2);
    EXPECT_EQ(csv, activation_csv(m, in, "digest", "fc1", 1));
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "# config_digest=digest");
    std::getline(is, line);
    EXPECT_EQ(std::count(line.begin(), line.end(), ',') + 1, 252);
    EXPECT_EQ(line.substr(0, 20), "clip_id,slice,fc1_0,");
    std::getline(is, line);
    EXPECT_EQ(std::count(line.begin(), line.end(), ',') + 1, 252);
    EXPECT_EQ(line.substr(0, 7), "a,C-NH,");
    nn::Model::Cache c;
    m.forward(x[0].values.data(), c);
    const auto fc1 = m.layer_index("fc1");
    std::istringstream row(line.substr(7));
    std::string cell;
    for (std::size_t u = 0; u < 250; ++u) {
        ASSERT_TRUE(std::getline(row, cell, ','));
        EXPECT_FLOAT_EQ(std::stof(cell), c.acts[fc1][u]);
    }
}
