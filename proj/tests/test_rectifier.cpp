#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "esir/error.hpp"
#include "esir/rectifier.hpp"
#include "esir/sampler.hpp"
#include "esir/synth.hpp"
#include "test_util.hpp"

using namespace esir;
using esir::test::random_image;

namespace {

// Provider returning a fixed increment every call.
class ConstantProvider : public ParameterProvider {
public:
    explicit ConstantProvider(Vec2 step, int count) : step_(step), count_(count) {}
    DeltaEstimate estimate_delta(const Image&, const ParamState&) override {
        return {std::vector<Vec2>(static_cast<std::size_t>(count_), step_), 0.0};
    }

private:
    Vec2 step_;
    int count_;
};

class ThrowingProvider : public ParameterProvider {
public:
    explicit ThrowingProvider(int fail_at) : fail_at_(fail_at) {}
    DeltaEstimate estimate_delta(const Image&, const ParamState& state) override {
        if (++calls_ == fail_at_) throw NumericalError("synthetic failure");
        return {std::vector<Vec2>(state.delta.size(), Vec2{0.01, 0.0}), 0.0};
    }

private:
    int fail_at_;
    int calls_ = 0;
};

}  // namespace

TEST_CASE("config validation rejects out-of-contract values") {
    RectifyConfig c;
    CHECK_NOTHROW(c.validate());
    RectifyConfig bad = c;
    bad.iterations = -1;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
    bad = c;
    bad.segment_count = 1;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
    bad = c;
    bad.poly_order = 0;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
    bad = c;
    bad.out_w = 0;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
}

TEST_CASE("zero state yields the identity sampling grid") {
    RectifyConfig config;
    config.out_w = 40;
    config.out_h = 16;
    Grid g = rectify_grid(init_state(config.segment_count), config);
    Grid id = identity_grid(40, 16);
    for (std::size_t i = 0; i < g.coords.size(); ++i)
        CHECK(distance(g.coords[i], id.coords[i]) < 1e-9);
}

TEST_CASE("rectify_once with zero delta is a bilinear resize") {
    RectifyConfig config;
    config.out_w = 50;
    config.out_h = 20;
    Image src = random_image(10, 100, 40, 1);
    Image out = rectify_once(src, init_state(config.segment_count), config);
    Image resized = sample(src, identity_grid(50, 20));
    CHECK(esir::test::max_abs_diff(out, resized) < 1e-9);
}

TEST_CASE("zero provider leaves delta at zero for any iteration count") {
    RectifyConfig config;
    config.out_w = 64;
    config.out_h = 24;
    Image src = random_image(11, 64, 24, 1);
    ZeroProvider provider;
    for (int n : {0, 1, 5}) {
        config.iterations = n;
        auto [out, trace] = rectify_iterative(src, provider, config);
        REQUIRE(static_cast<int>(trace.size()) == n + 1);
        CHECK(trace.back().delta_norm < 1e-15);
        CHECK(esir::test::max_abs_diff(out, sample(src, identity_grid(64, 24))) < 1e-9);
    }
}

TEST_CASE("increments accumulate additively and are clamped elementwise") {
    RectifyConfig config;
    config.iterations = 3;
    config.segment_count = 4;
    config.out_w = 20;
    config.out_h = 8;
    Image src = random_image(12, 20, 8, 1);

    ConstantProvider small({0.01, -0.02}, 8);
    auto [out_small, trace_small] = rectify_iterative(src, small, config);
    for (Vec2 d : trace_small.back().delta) {
        CHECK(d.x == doctest::Approx(0.03).epsilon(1e-12));
        CHECK(d.y == doctest::Approx(-0.06).epsilon(1e-12));
    }

    // 0.5 per call clamps to kIncrementClamp.
    ConstantProvider big({0.5, -0.5}, 8);
    config.iterations = 1;
    auto [out_big, trace_big] = rectify_iterative(src, big, config);
    for (Vec2 d : trace_big.back().delta) {
        CHECK(d.x == doctest::Approx(kIncrementClamp).epsilon(1e-12));
        CHECK(d.y == doctest::Approx(-kIncrementClamp).epsilon(1e-12));
    }
}

TEST_CASE("wrong-size increment surfaces as ProviderError with partial trace") {
    RectifyConfig config;
    config.iterations = 4;
    config.segment_count = 6;  // providers below emit 8 entries
    config.out_w = 20;
    config.out_h = 8;
    Image src = random_image(13, 20, 8, 1);
    ConstantProvider wrong({0.01, 0.0}, 8);
    CHECK_THROWS_AS(rectify_iterative(src, wrong, config), ProviderError);

    ThrowingProvider failing(3);
    config.segment_count = 4;
    try {
        rectify_iterative(src, failing, config);
        FAIL("expected ProviderError");
    } catch (const ProviderError& e) {
        CHECK(e.iteration == 3);
        CHECK(e.partial_trace.size() == 3);  // initial entry + two clean iterations
    }
}

TEST_CASE("oracle provider recovers a synthetic pose in three or five calls") {
    // Splitting across >= 3 calls keeps every increment under the clamp for
    // curved poses; a single call would be truncated to +-0.2.
    SynthCase sample_case = gen_case(321, Difficulty::curved);

    RectifyConfig config;
    config.segment_count = sample_case.true_params.segment_count();
    for (int calls : {3, 5}) {
        config.iterations = calls;
        OracleProvider provider(sample_case.true_control_offsets, calls);
        auto [out, trace] = rectify_iterative(sample_case.distorted, provider, config,
                                              &sample_case.template_image);
        CHECK(psnr(out, sample_case.template_image) >= 25.0);
        CHECK(std::isfinite(trace.back().loss));
        CHECK(trace.back().loss == doctest::Approx(mse(out, sample_case.template_image)));
    }
}

TEST_CASE("compose and chained pipelines agree when every increment is zero") {
    // With zero increments the chained variant resamples the resized image
    // at its own pixel centers, which bilinear interpolation reproduces
    // exactly, so the two pipelines only diverge once increments are real.
    Image src = random_image(654, 200, 64, 1);
    RectifyConfig config;
    config.iterations = 3;
    ZeroProvider a, b;
    auto [composed, t1] = rectify_iterative(src, a, config);
    auto [chained, t2] = rectify_chained(src, b, config);
    CHECK(esir::test::max_abs_diff(composed, chained) < 1e-9);
}

TEST_CASE("chained warping only adds resampling damage on a real pose") {
    SynthCase sample_case = gen_case(654, Difficulty::mild);

    RectifyConfig config;
    config.iterations = 5;
    config.segment_count = sample_case.true_params.segment_count();
    OracleProvider a(sample_case.true_control_offsets, 5);
    OracleProvider b(sample_case.true_control_offsets, 5);
    auto [composed, t1] = rectify_iterative(sample_case.distorted, a, config);
    auto [chained, t2] = rectify_chained(sample_case.distorted, b, config);

    // Both land on the same accumulated state...
    REQUIRE(t1.back().delta.size() == t2.back().delta.size());
    for (std::size_t j = 0; j < t1.back().delta.size(); ++j)
        CHECK(distance(t1.back().delta[j], t2.back().delta[j]) < 1e-12);
    // ...but the chained image carries the extra interpolation passes.
    CHECK(psnr(composed, sample_case.template_image) >
          psnr(chained, sample_case.template_image));
}

TEST_CASE("five chained warps lose fidelity against composing from the original") {
    SynthCase sample_case = gen_case(987, Difficulty::severe);

    RectifyConfig config;
    config.iterations = 5;
    config.segment_count = sample_case.true_params.segment_count();
    OracleProvider a(sample_case.true_control_offsets, 5);
    OracleProvider b(sample_case.true_control_offsets, 5);
    auto [composed, t1] = rectify_iterative(sample_case.distorted, a, config);
    auto [chained, t2] = rectify_chained(sample_case.distorted, b, config);
    double p_composed = psnr(composed, sample_case.template_image);
    double p_chained = psnr(chained, sample_case.template_image);
    CHECK(p_composed > p_chained);
}

TEST_CASE("trace serializes to one json object per line with nan loss as null") {
    RectifyConfig config;
    config.iterations = 2;
    config.segment_count = 3;
    config.out_w = 12;
    config.out_h = 6;
    Image src = random_image(14, 12, 6, 1);
    ConstantProvider p({0.01, 0.0}, 6);
    auto [out, trace] = rectify_iterative(src, p, config);
    std::string text = to_json_lines(trace);

    int lines = 0;
    for (char c : text)
        if (c == '\n') ++lines;
    CHECK(lines == 3);
    CHECK(text.find("\"iter\":0") != std::string::npos);
    CHECK(text.find("\"iter\":2") != std::string::npos);
    CHECK(text.find("\"loss\":null") != std::string::npos);
    CHECK(text.find("nan") == std::string::npos);
}
