#include <doctest.h>

#include <cmath>

#include "sgfd/errors.hpp"
#include "sgfd/io.hpp"
#include "test_helpers.hpp"

using namespace sgfd;
using sgfd::test::TempDir;

namespace {

GenericFeatureMatrix sample_features(int items, int dim, std::uint64_t seed) {
    GenericFeatureMatrix fm;
    fm.modality = Modality::Visual;
    fm.dim = dim;
    Rng rng(seed);
    for (int i = 0; i < items; ++i) {
        Eigen::VectorXd v(dim);
        for (int d = 0; d < dim; ++d) v(d) = rng.normal();
        fm.rows["i" + std::to_string(i)] = v;
    }
    return fm;
}

std::vector<std::string> item_order(int items) {
    std::vector<std::string> order;
    for (int i = 0; i < items; ++i) order.push_back("i" + std::to_string(i));
    return order;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("interaction records parse optional rating and timestamp columns") {
    TempDir dir("inter");
    write_text_file(dir.file("a.tsv"), "u1\ti1\nu2\ti2\t4.5\nu3\ti3\t2.0\t12345\n");
    auto records = read_interactions_file(dir.file("a.tsv"));
    REQUIRE(records.size() == 3);
    CHECK(records[0].rating == 1.0);
    CHECK(records[1].rating == 4.5);
    CHECK(records[2].timestamp == "12345");
}

TEST_CASE("bad rating reports the line number") {
    TempDir dir("badrating");
    write_text_file(dir.file("a.tsv"), "u1\ti1\nu2\ti2\tnotanumber\n");
    CHECK_THROWS_WITH_AS(read_interactions_file(dir.file("a.tsv")), doctest::Contains("line 2"),
                         ParseError);
}

TEST_CASE("missing file is an io error naming the path") {
    CHECK_THROWS_WITH_AS(read_interactions_file("/nonexistent/xyz.tsv"),
                         doctest::Contains("/nonexistent/xyz.tsv"), IoError);
}

TEST_CASE("text feature files round-trip exactly") {
    TempDir dir("feat");
    auto fm = sample_features(7, 5, 1);
    write_feature_file(dir.file("f.feat"), fm, item_order(7), /*binary=*/false);
    auto loaded = read_feature_file(dir.file("f.feat"));
    CHECK(loaded.modality == Modality::Visual);
    CHECK(loaded.dim == 5);
    REQUIRE(loaded.rows.size() == 7);
    for (const auto& [id, row] : fm.rows) CHECK(loaded.rows.at(id) == row);
}

TEST_CASE("binary feature files round-trip at f32 precision and are auto-detected") {
    TempDir dir("featbin");
    auto fm = sample_features(6, 4, 2);
    write_feature_file(dir.file("f.feat"), fm, item_order(6), /*binary=*/true);
    auto loaded = read_feature_file(dir.file("f.feat"));
    CHECK(loaded.dim == 4);
    REQUIRE(loaded.rows.size() == 6);
    for (const auto& [id, row] : fm.rows) {
        const auto& got = loaded.rows.at(id);
        for (int d = 0; d < 4; ++d)
            CHECK(got(d) == doctest::Approx(row(d)).epsilon(1e-6));
    }
}

TEST_CASE("feature header violations are parse errors") {
    TempDir dir("feathdr");
    write_text_file(dir.file("bad1.feat"), "WRONG 1 visual 1 2\ni0 1 2\n");
    CHECK_THROWS_AS(read_feature_file(dir.file("bad1.feat")), ParseError);
    write_text_file(dir.file("bad2.feat"), "SGFD-FEAT 1 visual 2 2\ni0 1 2\n");
    CHECK_THROWS_WITH_AS(read_feature_file(dir.file("bad2.feat")), doctest::Contains("2 rows"),
                         ParseError);
    write_text_file(dir.file("bad3.feat"), "SGFD-FEAT 1 visual 1 3\ni0 1 2\n");
    CHECK_THROWS_AS(read_feature_file(dir.file("bad3.feat")), ParseError);
}

TEST_CASE("parameter containers round-trip exactly in text mode") {
    TempDir dir("params");
    Matrix w = Matrix::Random(3, 4), gw = Matrix::Zero(3, 4);
    Vector b = Vector::Random(3), gb = Vector::Zero(3);
    ParamStore store;
    store.add("layer.weight", w, gw);
    store.add("layer.bias", b, gb);
    write_param_container(dir.file("p.params"), store);

    auto loaded = read_param_container(dir.file("p.params"));
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].name == "layer.weight");
    CHECK(loaded[0].value == w);
    CHECK(loaded[1].name == "layer.bias");
    CHECK(loaded[1].value.col(0) == b);
}

TEST_CASE("binary parameter containers round-trip at f32 precision") {
    TempDir dir("paramsbin");
    Matrix w = Matrix::Random(2, 5), gw = Matrix::Zero(2, 5);
    ParamStore store;
    store.add("w", w, gw);
    write_param_container(dir.file("p.params"), store, /*binary=*/true);
    auto loaded = read_param_container(dir.file("p.params"));
    REQUIRE(loaded.size() == 1);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 5; ++c)
            CHECK(loaded[0].value(r, c) == doctest::Approx(w(r, c)).epsilon(1e-6));
}

TEST_CASE("loading into a store enforces names and shapes") {
    TempDir dir("paramload");
    Matrix w = Matrix::Random(3, 3), gw = Matrix::Zero(3, 3);
    ParamStore store;
    store.add("w", w, gw);
    write_param_container(dir.file("p.params"), store);

    Matrix w2 = Matrix::Zero(3, 3), gw2 = Matrix::Zero(3, 3);
    ParamStore target;
    target.add("w", w2, gw2);
    load_param_container(dir.file("p.params"), target);
    CHECK(w2 == w);

    Matrix bad = Matrix::Zero(2, 3), gbad = Matrix::Zero(2, 3);
    ParamStore wrong_shape;
    wrong_shape.add("w", bad, gbad);
    CHECK_THROWS_AS(load_param_container(dir.file("p.params"), wrong_shape), ConfigError);

    ParamStore wrong_name;
    Matrix v = Matrix::Zero(3, 3), gv = Matrix::Zero(3, 3);
    wrong_name.add("missing", v, gv);
    CHECK_THROWS_WITH_AS(load_param_container(dir.file("p.params"), wrong_name),
                         doctest::Contains("missing"), ConfigError);
}

TEST_CASE("kv config files parse comments, blanks and spacing") {
    TempDir dir("kv");
    write_text_file(dir.file("c.conf"),
                    "# a comment\n\nlearning_rate = 0.01\n  batch_size=64 # inline\n");
    auto kv = read_kv_config(dir.file("c.conf"));
    CHECK(kv.at("learning_rate") == "0.01");
    CHECK(kv.at("batch_size") == "64");

    write_text_file(dir.file("bad.conf"), "justakey\n");
    CHECK_THROWS_WITH_AS(read_kv_config(dir.file("bad.conf")), doctest::Contains("line 1"),
                         ParseError);
}

TEST_CASE("metrics logs round-trip exactly") {
    TempDir dir("metrics");
    std::vector<LossReport> log;
    Rng rng(3);
    for (int i = 0; i < 10; ++i) {
        LossWeights w{rng.uniform(), rng.uniform()};
        log.push_back(total_loss(rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(),
                                 rng.uniform(), w));
    }
    write_metrics_log(dir.file("m.jsonl"), log);
    auto loaded = read_metrics_log(dir.file("m.jsonl"));
    REQUIRE(loaded.size() == log.size());
    for (std::size_t i = 0; i < log.size(); ++i) {
        CHECK(loaded[i].total == log[i].total);
        CHECK(loaded[i].rec == log[i].rec);
        CHECK(loaded[i].ld == log[i].ld);
        CHECK(loaded[i].fd == log[i].fd);
        CHECK(loaded[i].tce == log[i].tce);
        CHECK(loaded[i].fce == log[i].fce);
        CHECK(loaded[i].weights.lambda1 == log[i].weights.lambda1);
    }
}

TEST_CASE("manifests serialize their fields") {
    TempDir dir("manifest");
    RunManifest m;
    m.command = "train";
    m.version = kVersion;
    m.seed = 42;
    m.config["learning_rate"] = "0.001";
    m.outputs = {"a.txt"};
    write_manifest(dir.file("manifest.json"), m);
    const std::string text = read_text_file(dir.file("manifest.json"));
    CHECK(text.find("\"command\": \"train\"") != std::string::npos);
    CHECK(text.find("\"seed\": 42") != std::string::npos);
    CHECK(text.find("learning_rate") != std::string::npos);
}

TEST_CASE("file digests are stable and content sensitive") {
    TempDir dir("digest");
    write_text_file(dir.file("a"), "hello");
    write_text_file(dir.file("b"), "hello");
    write_text_file(dir.file("c"), "hellp");
    CHECK(file_digest(dir.file("a")) == file_digest(dir.file("b")));
    CHECK(file_digest(dir.file("a")) != file_digest(dir.file("c")));
    CHECK(file_digest(dir.file("a")).size() == 16);
}

}  // TEST_SUITE
