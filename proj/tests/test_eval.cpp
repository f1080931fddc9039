#include "oracles.hpp"

#include "rawmix/error.hpp"
#include "rawmix/eval/knn.hpp"
#include "rawmix/eval/report.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rawmix;

namespace {

std::filesystem::path tmp_dir()
{
    auto d = std::filesystem::temp_directory_path() / "rawmix_tests";
    std::filesystem::create_directories(d);
    return d;
}

ExperimentConfig tiny_experiment()
{
    ExperimentConfig c;
    c.name = "tiny";
    c.msfa = "imec2x2";
    c.patch_size = 12;
    c.classes = 2;
    c.descriptor = "mlbp";
    c.illuminant_train = "daylight";
    c.illuminant_test = {"daylight"};
    c.train_augs.clear();
    c.test_augs.clear();
    return c;
}

EvalReport sample_report()
{
    EvalReport r;
    r.name = "r";
    r.descriptor = "mlbp";
    r.msfa = "imec4x4";
    r.patch_size = 64;
    r.classes = 2;
    r.accuracy = 75.0;
    r.per_class = {100.0, 50.0};
    r.confusion = {{2, 0}, {1, 1}};
    r.results.push_back({"warm", 75.0, {100.0, 50.0}, {{2, 0}, {1, 1}}, 4, 0.5});
    r.results.push_back({"daylight", 100.0, {100.0, 100.0}, {{2, 0}, {0, 2}}, 4, 0.25});
    r.train_patches = 8;
    r.feature_dim = 4096;
    r.config = {{"k", 1}};
    return r;
}

} // namespace

TEST(Knn, OneDimensionalExample)
{
    const FeatureMatrix train{{0.0}, {10.0}};
    const std::vector<int> labels{0, 1};
    EXPECT_EQ(knn_classify(train, labels, {{3.0}}), std::vector<int>{0});
    EXPECT_EQ(knn_classify(train, labels, {{7.0}}), std::vector<int>{1});
    // equidistant: lowest index wins
    EXPECT_EQ(knn_classify(train, labels, {{5.0}}), std::vector<int>{0});
}

TEST(Knn, MatchesExhaustiveSearch)
{
    std::mt19937_64 rng(1);
    FeatureMatrix train, test;
    std::vector<int> labels;
    for (int i = 0; i < 50; ++i) {
        train.push_back(oracle::random_vec(8, rng));
        labels.push_back(i % 5);
    }
    for (int i = 0; i < 20; ++i)
        test.push_back(oracle::random_vec(8, rng));
    const auto pred = knn_classify(train, labels, test);
    for (std::size_t q = 0; q < test.size(); ++q) {
        std::size_t best = 0;
        double bd = INFINITY;
        for (std::size_t i = 0; i < train.size(); ++i) {
            double d = 0;
            for (int k = 0; k < 8; ++k)
                d += (train[i][k] - test[q][k]) * (train[i][k] - test[q][k]);
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        EXPECT_EQ(pred[q], labels[best]);
        EXPECT_EQ(nearest_index(train, test[q]), best);
    }
}

TEST(Knn, SelfMatchIsPerfect)
{
    std::mt19937_64 rng(2);
    FeatureMatrix train;
    std::vector<int> labels;
    for (int i = 0; i < 30; ++i) {
        train.push_back(oracle::random_vec(6, rng));
        labels.push_back(i % 3);
    }
    EXPECT_EQ(knn_classify(train, labels, train), labels);
}

TEST(Knn, Errors)
{
    const FeatureMatrix train{{0.0, 1.0}};
    const std::vector<int> labels{0};
    auto kind = [](auto f) {
        try {
            f();
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::io; // not thrown
    };
    EXPECT_EQ(kind([&] { knn_classify({}, {}, {{1.0}}); }), ErrorKind::data);
    EXPECT_EQ(kind([&] { knn_classify(train, labels, {{1.0}}); }), ErrorKind::structure);
    EXPECT_EQ(kind([&] { knn_classify(train, labels, {{1.0, 2.0}}, 3); }), ErrorKind::contract);
}

TEST(Median, OddAndEven)
{
    EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
}

TEST(Report, JsonRoundTrip)
{
    const EvalReport r = sample_report();
    EXPECT_EQ(EvalReport::from_json(r.to_json()), r);
    const auto path = tmp_dir() / "report.json";
    emit_report(r, ReportFormat::json, path);
    auto back = load_reports(path);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0], r);
}

TEST(Report, CsvColumnsFollowIlluminants)
{
    const EvalReport r = sample_report();
    std::istringstream csv(report_csv(std::span(&r, 1)));
    std::string header, row;
    std::getline(csv, header);
    std::getline(csv, row);
    auto cols = [](const std::string& s) { return std::count(s.begin(), s.end(), ',') + 1; };
    EXPECT_EQ(cols(header), 3 + static_cast<long>(r.results.size()));
    EXPECT_EQ(cols(row), cols(header));
}

TEST(Report, SvgIsWritten)
{
    const EvalReport r = sample_report();
    const auto path = tmp_dir() / "report.svg";
    emit_report(r, ReportFormat::svg, path);
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    EXPECT_NE(first.find("<svg"), std::string::npos);
}

TEST(Report, EmptyPerClassIsRejected)
{
    EvalReport r = sample_report();
    r.per_class.clear();
    try {
        emit_report(r, ReportFormat::json, tmp_dir() / "bad.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::data);
    }
}

TEST(Report, UnwritablePathIsIoError)
{
    try {
        emit_report(sample_report(), ReportFormat::csv, "/nonexistent/dir/r.csv");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::io);
    }
}

TEST(ExperimentConfigJson, RoundTripAndDefaults)
{
    ExperimentConfig c = ExperimentConfig::from_json({{"msfa", "imec4x4"}, {"patch_size", 64}});
    EXPECT_EQ(c.train_augs.size(), ExperimentConfig::default_train_augs(16).size());
    EXPECT_EQ(ExperimentConfig::from_json(c.to_json()).to_json(), c.to_json());
    EXPECT_THROW(ExperimentConfig::from_json({{"msfa", "imec5x5"}, {"patch_size", 64}}).validate(), Error);
    EXPECT_THROW(ExperimentConfig::from_json({{"wb_enabled", false}}).validate(), Error);
}

TEST(Experiment, SanityCeiling)
{
    const EvalReport r = run_experiment(tiny_experiment());
    EXPECT_EQ(r.accuracy, 100.0);
    ASSERT_EQ(r.results.size(), 1u);
    EXPECT_EQ(r.per_class, (std::vector<double>{100.0, 100.0}));
    EXPECT_EQ(r.feature_dim, 1024);
}

TEST(Experiment, DeterministicGivenSeeds)
{
    ExperimentConfig c = tiny_experiment();
    c.classes = 3;
    c.illuminant_test = {"warm", "daylight"};
    c.test_augs = ExperimentConfig::default_test_augs(6);
    const EvalReport a = run_experiment(c), b = run_experiment(c);
    EXPECT_TRUE(a.same_outcome(b));
    EXPECT_EQ(a.results.size(), 2u);
}

TEST(Experiment, StageErrorsAreLabelled)
{
    ExperimentConfig c = tiny_experiment();
    c.dataset = tmp_dir() / "missing_manifest.json";
    try {
        run_experiment(c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("scenes"), std::string::npos) << e.what();
    }
}
