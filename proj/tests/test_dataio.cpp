#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ecf/dataio.hpp"
#include "ecf/model_io.hpp"
#include "ecf/pipeline.hpp"

using namespace ecf;
using Catch::Matchers::WithinAbs;

static bool throws_code(ErrorCode code, auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code() == code;
    }
    return false;
}

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("ecf_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

bool datasets_equal(const Dataset& a, const Dataset& b) {
    return a.factor_names == b.factor_names && a.factors.values == b.factors.values &&
           a.factors.rows == b.factors.rows && a.targets == b.targets &&
           a.month_labels == b.month_labels;
}

} // namespace

TEST_CASE("synthetic generator is deterministic and shaped as requested") {
    Dataset a = generate_synthetic(62, 7, 0.05);
    Dataset b = generate_synthetic(62, 7, 0.05);
    CHECK(datasets_equal(a, b));
    CHECK(a.rows() == 62);
    CHECK(a.factors.cols == 8);
    CHECK(a.factor_names.size() == 8);
    CHECK(a.month_labels.front() == "2012-01");
    CHECK(a.month_labels[12] == "2013-01");
    CHECK(a.targets.size() == 62);

    Dataset c = generate_synthetic(62, 8, 0.05);
    CHECK_FALSE(a.factors.values == c.factors.values);
}

TEST_CASE("noise-free synthetic targets equal the documented generating function") {
    Dataset d = generate_synthetic(24, 3, 0.0);
    for (std::size_t i = 0; i < d.rows(); ++i) {
        std::vector<double> row(8);
        for (std::size_t c = 0; c < 8; ++c) row[c] = d.factors.at(i, c);
        CHECK(d.targets[i] == synthetic_target(row, i));
    }
}

TEST_CASE("csv round-trip preserves the dataset exactly") {
    TempDir tmp;
    Dataset d = generate_synthetic(62, 7, 0.05);
    save_csv(d, tmp.file("data.csv"));
    Dataset loaded = load_csv(tmp.file("data.csv"));
    CHECK(datasets_equal(d, loaded));
    CHECK(loaded.rows() == 62);
}

TEST_CASE("csv parser diagnostics") {
    TempDir tmp;

    SECTION("missing file") {
        CHECK(throws_code(ErrorCode::ParseError, [&] { load_csv(tmp.file("absent.csv")); }));
    }
    SECTION("header only") {
        std::ofstream(tmp.file("empty.csv")) << "month,f1,ev\n";
        CHECK(throws_code(ErrorCode::ParseError, [&] { load_csv(tmp.file("empty.csv")); }));
    }
    SECTION("wrong leading column") {
        std::ofstream(tmp.file("bad.csv")) << "date,f1,ev\n2012-01,1,2\n";
        CHECK(throws_code(ErrorCode::MissingColumn, [&] { load_csv(tmp.file("bad.csv")); }));
    }
    SECTION("non-numeric cell names its row") {
        std::ofstream(tmp.file("nan.csv"))
            << "month,f1,ev\n2012-01,1,2\n2012-02,2,3\n2012-03,oops,4\n";
        try {
            load_csv(tmp.file("nan.csv"));
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::NonNumeric);
            CHECK(std::string(e.what()).find("row 3") != std::string::npos);
        }
    }
    SECTION("ragged row") {
        std::ofstream(tmp.file("ragged.csv")) << "month,f1,f2,ev\n2012-01,1,2\n";
        CHECK(throws_code(ErrorCode::ParseError, [&] { load_csv(tmp.file("ragged.csv")); }));
    }
    SECTION("crlf and no-ev files load") {
        std::ofstream(tmp.file("crlf.csv")) << "month,f1,f2\r\n2012-01,1,2\r\n2012-02,3,4\r\n";
        Dataset d = load_csv(tmp.file("crlf.csv"));
        CHECK(d.rows() == 2);
        CHECK_FALSE(d.has_targets());
        CHECK(d.factors.at(1, 1) == 4.0);
    }
}

TEST_CASE("chronological split") {
    Dataset d = generate_synthetic(62, 7, 0.05);
    auto [train, test] = split(d, {50, 12});
    CHECK(train.rows() == 50);
    CHECK(test.rows() == 12);
    CHECK(train.month_labels.front() == d.month_labels.front());
    CHECK(test.month_labels.back() == d.month_labels[61]);
    for (const auto& label : test.month_labels) {
        CHECK(std::find(train.month_labels.begin(), train.month_labels.end(), label) ==
              train.month_labels.end());
    }

    auto [train61, test1] = split(d, {61, 1});
    CHECK(test1.rows() == 1);
    CHECK(test1.month_labels[0] == d.month_labels[61]);

    CHECK(throws_code(ErrorCode::SplitTooLarge, [&] { split(d, {60, 12}); }));
    CHECK(throws_code(ErrorCode::SplitTooLarge, [&] { split(d, {62, 0}); }));
}

TEST_CASE("standardization uses training-population statistics") {
    Dataset d;
    d.factor_names = {"f1"};
    d.factors = Matrix(3, 1);
    d.factors.at(0, 0) = 2.0;
    d.factors.at(1, 0) = 4.0;
    d.factors.at(2, 0) = 6.0;
    d.targets = {1.0, 2.0, 3.0};
    d.month_labels = {"a", "b", "c"};

    auto [stats, std_d] = standardize(d);
    CHECK_THAT(stats.factor_mean[0], WithinAbs(4.0, 1e-15));
    CHECK_THAT(stats.factor_sd[0], WithinAbs(std::sqrt(8.0 / 3.0), 1e-15));
    CHECK_THAT(std_d.factors.at(0, 0), WithinAbs(-std::sqrt(3.0 / 2.0), 1e-12));
    CHECK_THAT(std_d.factors.at(1, 0), WithinAbs(0.0, 1e-15));
    CHECK_THAT(std_d.factors.at(2, 0), WithinAbs(std::sqrt(3.0 / 2.0), 1e-12));

    SECTION("idempotence on already-standardized data") {
        auto [stats2, std2] = standardize(std_d);
        CHECK_THAT(stats2.factor_mean[0], WithinAbs(0.0, 1e-12));
        CHECK_THAT(stats2.factor_sd[0], WithinAbs(1.0, 1e-12));
        for (std::size_t r = 0; r < 3; ++r) {
            CHECK_THAT(std2.factors.at(r, 0), WithinAbs(std_d.factors.at(r, 0), 1e-12));
        }
    }

    SECTION("apply-then-invert round-trips test rows") {
        Matrix test(2, 1);
        test.at(0, 0) = 5.0;
        test.at(1, 0) = -1.0;
        Matrix std_test = standardize_factors(stats, test);
        for (std::size_t r = 0; r < 2; ++r) {
            double back = std_test.at(r, 0) * stats.factor_sd[0] + stats.factor_mean[0];
            CHECK_THAT(back, WithinAbs(test.at(r, 0), 1e-12));
        }
        std::vector<double> targets{9.0, -3.0};
        auto round = destandardize_targets(stats, standardize_targets(stats, targets));
        CHECK_THAT(round[0], WithinAbs(9.0, 1e-12));
        CHECK_THAT(round[1], WithinAbs(-3.0, 1e-12));
    }

    SECTION("constant columns are rejected") {
        Dataset flat = d;
        flat.factors.at(0, 0) = 4.0;
        flat.factors.at(1, 0) = 4.0;
        flat.factors.at(2, 0) = 4.0;
        CHECK(throws_code(ErrorCode::ConstantColumn, [&] { standardize(flat); }));
        Dataset flat_target = d;
        flat_target.targets = {2.0, 2.0, 2.0};
        CHECK(throws_code(ErrorCode::ConstantColumn, [&] { standardize(flat_target); }));
    }
}

TEST_CASE("model files round-trip bit-exactly and reject damage") {
    TempDir tmp;
    Dataset data = generate_synthetic(30, 5, 0.05);
    TrainConfig tc;
    tc.max_epochs = 15;
    tc.seed = 5;
    SvrHyperparams hp;

    Matrix probe(5, 8);
    Rng rng(55);
    for (double& v : probe.values) v = rng.uniform(-0.5, 0.5);
    for (std::size_t r = 0; r < probe.rows; ++r)
        for (std::size_t c = 0; c < probe.cols; ++c)
            probe.at(r, c) += data.factors.at(r, c); // plausible ranges

    for (PipelineKind kind : {PipelineKind::SvrOnly, PipelineKind::RcnnOnly, PipelineKind::RcnnSvr}) {
        FittedPipeline p = fit_pipeline(kind, data, tc, hp);
        std::string path = tmp.file(std::string("model_") + to_string(kind) + ".ecf");
        save_model(p, path);
        FittedPipeline loaded = load_model(path);
        CHECK(loaded.kind == p.kind);
        auto before = predict_pipeline(p, probe);
        auto after = predict_pipeline(loaded, probe);
        CHECK(before == after); // bit-identical
    }

    SECTION("truncated file") {
        FittedPipeline p = fit_pipeline(PipelineKind::SvrOnly, data, tc, hp);
        save_model(p, tmp.file("model.ecf"));
        auto full = std::filesystem::file_size(tmp.file("model.ecf"));
        std::filesystem::resize_file(tmp.file("model.ecf"), full / 2);
        CHECK(throws_code(ErrorCode::CorruptFile, [&] { load_model(tmp.file("model.ecf")); }));
    }

    SECTION("flipped payload byte") {
        FittedPipeline p = fit_pipeline(PipelineKind::SvrOnly, data, tc, hp);
        save_model(p, tmp.file("model.ecf"));
        std::fstream f(tmp.file("model.ecf"), std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(40);
        f.put('7');
        f.close();
        CHECK(throws_code(ErrorCode::CorruptFile, [&] { load_model(tmp.file("model.ecf")); }));
    }

    SECTION("newer format version names both versions") {
        FittedPipeline p = fit_pipeline(PipelineKind::SvrOnly, data, tc, hp);
        save_model(p, tmp.file("model.ecf"));
        std::ifstream in(tmp.file("model.ecf"));
        std::string magic_line, rest((std::istreambuf_iterator<char>(in)), {});
        std::getline(std::ifstream(tmp.file("model.ecf")), magic_line);
        std::string contents = magic_line + rest.substr(magic_line.size());
        contents.replace(contents.find("ECFMODEL 1"), 10, "ECFMODEL 2");
        std::ofstream(tmp.file("model.ecf"), std::ios::binary) << contents;
        try {
            load_model(tmp.file("model.ecf"));
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::VersionMismatch);
            std::string msg = e.what();
            CHECK(msg.find("2") != std::string::npos);
            CHECK(msg.find("1") != std::string::npos);
        }
    }
}
