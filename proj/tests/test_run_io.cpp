#include "doctest.h"

#include <fstream>

#include "gsr/error.hpp"
#include "gsr/run_io.hpp"
#include "support.hpp"

using namespace gsr;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

RunRecord small_record() {
    const auto inst = random_oracle_instance({8, 2, 2, 2, 3, 1.0, 4});
    OuterConfig outer;
    outer.steps = 3;
    return gsr_run(inst.heldout, inst.target, inst.target, InnerSolveConfig{}, outer, InfluenceMethod::exact);
}

}  // namespace

TEST_SUITE("run_io") {

TEST_CASE("format_double round-trips") {
    gsr::Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double v = std::ldexp(rng.normal(), static_cast<int>(rng.below(200)) - 100);
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("run record round trip") {
    test::TempDir dir("runio");
    const auto rec = small_record();
    write_run_record(rec, dir / "records.jsonl", nlohmann::json{{"label", "GSR"}});
    const auto parsed = read_run_record(dir / "records.jsonl");
    REQUIRE(parsed.steps.size() == 3);
    CHECK(parsed.summary["label"] == "GSR");
    CHECK(parsed.summary["selected_step"] == rec.selected_step);
    CHECK(parsed.summary["method"] == "exact");
    for (std::size_t t = 0; t < 3; ++t) {
        const auto& row = parsed.steps[t];
        CHECK(row["step"] == rec.steps[t].step);
        CHECK(row["val_wg_risk"].get<double>() == rec.steps[t].val_wg_risk);
        const auto gamma = row["gamma"].get<std::vector<double>>();
        REQUIRE(gamma.size() == 2);
        CHECK(gamma[0] == rec.steps[t].gamma(0));
        CHECK(row["group_weight_sums"].get<std::vector<double>>() == rec.steps[t].group_weight_sums);
        CHECK(row["selected"].get<bool>() == rec.steps[t].selected);
    }
}

TEST_CASE("weights round trip, with and without flips") {
    test::TempDir dir("weights");
    const Eigen::VectorXd w = test::random_simplex(6, 9);
    const std::vector<int> groups{0, 1, 1, 0, 2, 2};
    write_weights(dir / "w.csv", w, groups, std::vector<std::size_t>{1, 4});
    auto rows = read_weights(dir / "w.csv");
    REQUIRE(rows.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(rows[i].index == i);
        CHECK(rows[i].group == groups[i]);
        CHECK(rows[i].weight == w(static_cast<Eigen::Index>(i)));
        CHECK(rows[i].flipped == (i == 1 || i == 4));
    }
    write_weights(dir / "plain.csv", w, std::nullopt);
    rows = read_weights(dir / "plain.csv");
    CHECK(rows[3].group == -1);
    CHECK_FALSE(rows[3].flipped.has_value());
}

TEST_CASE("params round trip") {
    test::TempDir dir("params");
    const auto p = test::random_params(5, 3, 2, 10.0);
    write_params(dir / "psi.csv", p);
    CHECK(read_params(dir / "psi.csv").psi == p.psi);
}

TEST_CASE("influence table file") {
    test::TempDir dir("table");
    Eigen::MatrixXd s(2, 2);
    s << 1.5, -2.0, 0.25, 3.0;
    write_influence_table(dir / "t.csv", {s, InfluenceMethod::exact});
    std::ifstream in(dir / "t.csv");
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(header == "index,g0,g1");
    CHECK(first == "0,1.5,-2");
}

TEST_CASE("missing and corrupt files") {
    test::TempDir dir("corrupt");
    CHECK_THROWS_AS(read_run_record(dir / "none.jsonl"), IoError);
    CHECK_THROWS_AS(read_weights(dir / "none.csv"), IoError);
    CHECK_THROWS_AS(read_params(dir / "none.csv"), IoError);
    CHECK_THROWS_AS(write_params(dir / "no" / "such" / "dir.csv", test::random_params(1, 2, 1)), IoError);

    write_text(dir / "bad.jsonl", "{\"step\": 1, \"gamma\": [1], \"group_weight_sums\": []}\n{not json\n");
    CHECK_THROWS_AS(read_run_record(dir / "bad.jsonl"), ValidationError);
    write_text(dir / "nosteps.jsonl", "{\"summary\": {}}\n");
    CHECK_THROWS_AS(read_run_record(dir / "nosteps.jsonl"), ValidationError);
    write_text(dir / "partial.jsonl", "{\"step\": 1}\n");
    CHECK_THROWS_AS(read_run_record(dir / "partial.jsonl"), ValidationError);

    write_text(dir / "w.csv", "index,group,weight\n0,1,abc\n");
    CHECK_THROWS_AS(read_weights(dir / "w.csv"), ValidationError);
    write_text(dir / "short.csv", "index,group,weight\n0,1\n");
    CHECK_THROWS_AS(read_weights(dir / "short.csv"), ValidationError);
    write_text(dir / "empty.csv", "");
    CHECK_THROWS_AS(read_weights(dir / "empty.csv"), ValidationError);

    write_text(dir / "ragged.csv", "1,2\n3\n");
    CHECK_THROWS_AS(read_params(dir / "ragged.csv"), ValidationError);
    write_text(dir / "text.csv", "1,x\n");
    CHECK_THROWS_AS(read_params(dir / "text.csv"), ValidationError);
}

TEST_CASE("grad check report json") {
    Eigen::MatrixXd a(1, 2), b(1, 2);
    a << 1.0, 2.5;
    b << 1.0, 2.0;
    const auto j = to_json(compare(a, b, 1e-3));
    CHECK(j["pass"] == false);
    CHECK(j["offending"].size() == 1);
    CHECK(j["offending"][0][1] == 1);
    CHECK(j["max_rel_error"].get<double>() == doctest::Approx(0.25));
}

}  // TEST_SUITE
