#include "esir/rectifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <json.hpp>

#include "esir/sampler.hpp"
#include "esir/tps.hpp"

namespace esir {

namespace {

double delta_norm(const std::vector<Vec2>& delta) {
    double s = 0.0;
    for (Vec2 d : delta) s += d.x * d.x + d.y * d.y;
    return std::sqrt(s);
}

Vec2 clamp_delta(Vec2 d) {
    return {std::clamp(d.x, -kIncrementClamp, kIncrementClamp),
            std::clamp(d.y, -kIncrementClamp, kIncrementClamp)};
}

// Validates and clamps a provider increment; failures become ProviderError.
std::vector<Vec2> accept_increment(const DeltaEstimate& est, std::size_t expected, int iteration,
                                   const RectifyTrace& trace) {
    if (est.delta.size() != expected)
        throw ProviderError("provider returned " + std::to_string(est.delta.size()) +
                                " offsets, expected " + std::to_string(expected) +
                                " (iteration " + std::to_string(iteration) + ")",
                            iteration, trace);
    std::vector<Vec2> inc;
    inc.reserve(expected);
    for (Vec2 d : est.delta) {
        if (!std::isfinite(d.x) || !std::isfinite(d.y))
            throw ProviderError("provider returned a non-finite increment (iteration " +
                                    std::to_string(iteration) + ")",
                                iteration, trace);
        inc.push_back(clamp_delta(d));
    }
    return inc;
}

TraceEntry make_entry(int iter, const ParamState& state, const Grid& grid, const Image& img,
                      int src_w, int src_h, const Image* tmpl) {
    TraceEntry e;
    e.iter = iter;
    e.delta_norm = delta_norm(state.delta);
    e.loss = tmpl ? mse(img, *tmpl) : std::numeric_limits<double>::quiet_NaN();
    e.oob_frac = oob_fraction(grid, src_w, src_h);
    e.delta = state.delta;
    return e;
}

void check_template(const Image* tmpl, const RectifyConfig& config) {
    if (tmpl && (tmpl->width != config.out_w || tmpl->height != config.out_h))
        throw ArgumentError("template dimensions do not match the configured output");
}

}  // namespace

void RectifyConfig::validate() const {
    if (iterations < 0) throw ArgumentError("iterations must be >= 0");
    if (segment_count < 2) throw ArgumentError("segment count must be >= 2");
    if (poly_order < 1) throw ArgumentError("polynomial order must be >= 1");
    if (out_w < 1 || out_h < 1) throw ArgumentError("output dimensions must be positive");
    if (!(lambda >= 0.0)) throw ArgumentError("lambda must be >= 0");
}

ControlPoints ParamState::current() const {
    ControlPoints cp;
    cp.points.reserve(base.points.size());
    for (std::size_t i = 0; i < base.points.size(); ++i)
        cp.points.push_back(base.points[i] + delta[i]);
    return cp;
}

std::string to_json_lines(const RectifyTrace& trace) {
    std::string out;
    for (const TraceEntry& e : trace) {
        nlohmann::ordered_json j;
        j["iter"] = e.iter;
        j["delta_norm"] = e.delta_norm;
        j["loss"] = e.loss;  // NaN serializes as null
        j["oob_frac"] = e.oob_frac;
        out += j.dump();
        out += '\n';
    }
    return out;
}

DeltaEstimate ZeroProvider::estimate_delta(const Image&, const ParamState& state) {
    return {std::vector<Vec2>(state.delta.size()), 0.0};
}

OracleProvider::OracleProvider(std::vector<Vec2> total_offset, int calls) {
    if (calls < 1) throw ArgumentError("oracle provider needs at least one call");
    per_call_ = std::move(total_offset);
    for (Vec2& d : per_call_) d = d * (1.0 / calls);
}

DeltaEstimate OracleProvider::estimate_delta(const Image&, const ParamState&) {
    return {per_call_, 0.0};
}

ParamState init_state(int segment_count) {
    ParamState s;
    s.base = base_points(segment_count);
    s.delta.assign(s.base.points.size(), Vec2{});
    return s;
}

Grid rectify_grid(const ParamState& state, const RectifyConfig& config) {
    config.validate();
    TpsSolver solver(state.base, config.lambda);
    return map_grid(solver.solve(state.current()), config.out_w, config.out_h);
}

Image rectify_once(const Image& original, const ParamState& state, const RectifyConfig& config) {
    return sample(original, rectify_grid(state, config), 0.0);
}

std::pair<Image, RectifyTrace> rectify_iterative(const Image& original, ParameterProvider& provider,
                                                 const RectifyConfig& config,
                                                 const Image* template_image) {
    config.validate();
    check_template(template_image, config);

    ParamState state = init_state(config.segment_count);
    RectifyTrace trace;
    Image img;
    auto advance = [&](int iter) {
        Grid grid = rectify_grid(state, config);
        img = sample(original, grid, 0.0);
        trace.push_back(make_entry(iter, state, grid, img, original.width, original.height,
                                   template_image));
    };

    advance(0);
    for (int i = 1; i <= config.iterations; ++i) {
        DeltaEstimate est;
        try {
            est = provider.estimate_delta(img, state);
        } catch (const std::exception& ex) {
            throw ProviderError("parameter provider failed at iteration " + std::to_string(i) +
                                    ": " + ex.what(),
                                i, trace);
        }
        std::vector<Vec2> inc = accept_increment(est, state.delta.size(), i, trace);
        for (std::size_t j = 0; j < inc.size(); ++j) state.delta[j] += inc[j];
        advance(i);
    }
    return {std::move(img), std::move(trace)};
}

std::pair<Image, RectifyTrace> rectify_chained(const Image& original, ParameterProvider& provider,
                                               const RectifyConfig& config,
                                               const Image* template_image) {
    config.validate();
    check_template(template_image, config);

    ParamState state = init_state(config.segment_count);
    RectifyTrace trace;

    Grid grid0 = rectify_grid(state, config);
    Image img = sample(original, grid0, 0.0);
    trace.push_back(make_entry(0, state, grid0, img, original.width, original.height,
                               template_image));

    for (int i = 1; i <= config.iterations; ++i) {
        DeltaEstimate est;
        try {
            est = provider.estimate_delta(img, state);
        } catch (const std::exception& ex) {
            throw ProviderError("parameter provider failed at iteration " + std::to_string(i) +
                                    ": " + ex.what(),
                                i, trace);
        }
        std::vector<Vec2> inc = accept_increment(est, state.delta.size(), i, trace);
        for (std::size_t j = 0; j < inc.size(); ++j) state.delta[j] += inc[j];

        // Warp the previous output by this increment alone; blur and pad
        // erosion accumulate with every pass.
        ParamState step = init_state(config.segment_count);
        step.delta = inc;
        Grid grid = rectify_grid(step, config);
        img = sample(img, grid, 0.0);
        trace.push_back(make_entry(i, state, grid, img, config.out_w, config.out_h,
                                   template_image));
    }
    return {std::move(img), std::move(trace)};
}

}  // namespace esir
