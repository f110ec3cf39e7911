#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <variant>
#include <vector>

#include "esir/error.hpp"
#include "esir/params_io.hpp"
#include "test_util.hpp"

using namespace esir;
using esir::test::TempDir;

namespace {

FitLineParams sample_fitline() {
    FitLineParams p;
    p.poly = {0.01, -0.05, 0.22, 0.0, -0.03};
    p.segments = {{2.0, -1.0, 0.31}, {-1.5, 0.75, 0.29}, {8.0, 0.1, 0.3}, {0.5, 0.0, 0.33}};
    return p;
}

ControlParams sample_control() {
    ControlParams c;
    c.segment_count = 3;
    c.delta = {{0.01, -0.02}, {0.0, 0.0}, {-0.03, 0.04}, {0.05, 0.06}, {-0.07, 0.0}, {0.0, 0.08}};
    return c;
}

}  // namespace

TEST_CASE("control params validation checks the delta length") {
    CHECK_NOTHROW(sample_control().validate());
    ControlParams bad = sample_control();
    bad.delta.pop_back();
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
    bad = sample_control();
    bad.segment_count = 1;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
}

TEST_CASE("fitline documents round trip value-identically") {
    ParamsFile p = sample_fitline();
    ParamsFile back = params_from_json(to_json(p));
    REQUIRE(std::holds_alternative<FitLineParams>(back));
    const auto& a = std::get<FitLineParams>(p);
    const auto& b = std::get<FitLineParams>(back);
    CHECK(a.poly == b.poly);
    REQUIRE(a.segments.size() == b.segments.size());
    for (std::size_t i = 0; i < a.segments.size(); ++i) {
        CHECK(a.segments[i].slope == b.segments[i].slope);
        CHECK(a.segments[i].intercept == b.segments[i].intercept);
        CHECK(a.segments[i].half_length == b.segments[i].half_length);
    }
    CHECK(to_json(back) == to_json(p));  // serialization is a fixed point
}

TEST_CASE("control documents round trip value-identically") {
    ParamsFile p = sample_control();
    ParamsFile back = params_from_json(to_json(p));
    REQUIRE(std::holds_alternative<ControlParams>(back));
    const auto& a = std::get<ControlParams>(p);
    const auto& b = std::get<ControlParams>(back);
    CHECK(a.segment_count == b.segment_count);
    REQUIRE(a.delta.size() == b.delta.size());
    for (std::size_t i = 0; i < a.delta.size(); ++i) {
        CHECK(a.delta[i].x == b.delta[i].x);
        CHECK(a.delta[i].y == b.delta[i].y);
    }
    CHECK(to_json(back) == to_json(p));
}

TEST_CASE("space field order and defaults") {
    std::string text = to_json(ParamsFile(sample_control()));
    CHECK(text.rfind("{\"space\":\"control\"", 0) == 0);
    text = to_json(ParamsFile(sample_fitline()));
    CHECK(text.rfind("{\"space\":\"fitline\"", 0) == 0);

    // A bare fitline document (no space field) still parses as fitline.
    ParamsFile bare = params_from_json(esir::to_json(sample_fitline()));
    CHECK(std::holds_alternative<FitLineParams>(bare));
}

TEST_CASE("malformed documents raise typed errors") {
    CHECK_THROWS_AS(params_from_json("{"), ParseError);
    CHECK_THROWS_AS(params_from_json("{\"space\":\"martian\"}"), ArgumentError);
    CHECK_THROWS_AS(params_from_json("{\"space\":\"control\",\"L\":2,\"delta\":[[0,0]]}"),
                    ArgumentError);
    CHECK_THROWS_AS(params_from_json("{\"space\":\"control\",\"L\":2,\"delta\":\"zeros\"}"),
                    ArgumentError);
}

TEST_CASE("segment count and offsets come from either space") {
    ParamsFile control = sample_control();
    CHECK(segment_count_of(control) == 3);
    std::vector<Vec2> off = control_offsets_of(control);
    REQUIRE(off.size() == 6);
    CHECK(off[2].x == -0.03);

    ParamsFile fitline = sample_fitline();
    CHECK(segment_count_of(fitline) == 4);
    std::vector<Vec2> expect = control_offsets(std::get<FitLineParams>(fitline));
    std::vector<Vec2> got = control_offsets_of(fitline);
    REQUIRE(got.size() == expect.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(distance(got[i], expect[i]) == 0.0);
}

TEST_CASE("params files round trip through disk") {
    TempDir dir("esir-params");
    save_params_file(dir.path / "a.json", ParamsFile(sample_fitline()));
    ParamsFile back = load_params_file(dir.path / "a.json");
    CHECK(to_json(back) == to_json(ParamsFile(sample_fitline())));
    CHECK_THROWS_AS(load_params_file(dir.path / "nope.json"), IoError);
}
