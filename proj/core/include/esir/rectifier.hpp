#pragma once

#include <string>
#include <utility>
#include <vector>

#include "esir/error.hpp"
#include "esir/fitline.hpp"
#include "esir/geometry.hpp"
#include "esir/image.hpp"

namespace esir {

/// Elementwise bound applied to every provider increment before it is
/// accumulated; keeps any single iteration's correction small.
inline constexpr double kIncrementClamp = 0.2;

/// Geometry of a rectification run. Defaults follow the reference setup:
/// five iterations, 20 segments, order-4 middle line, 100x32 output.
struct RectifyConfig {
    int iterations = 5;
    int segment_count = 20;  // L
    int poly_order = 4;      // K, for providers working in fitting-line space
    int out_w = 100;
    int out_h = 32;
    double lambda = 0.0;

    /// Throws ArgumentError on iterations < 0, L < 2, K < 1, or empty output.
    void validate() const;
};

/// Accumulated pose: current control points are base + delta elementwise.
/// init_state starts delta at zero so the first warp is the identity.
struct ParamState {
    ControlPoints base;       // base_points(L)
    std::vector<Vec2> delta;  // size 2L

    ControlPoints current() const;
};

/// One trace record per pipeline state: the initial entry (iter 0) plus one
/// per executed iteration. `loss` is the mean squared error against the
/// bound template, NaN when none was supplied.
struct TraceEntry {
    int iter = 0;
    double delta_norm = 0.0;
    double loss = 0.0;
    double oob_frac = 0.0;
    std::vector<Vec2> delta;  // accumulated snapshot
};

using RectifyTrace = std::vector<TraceEntry>;

/// JSON lines, one object per entry, keys iter, delta_norm, loss, oob_frac
/// in that order. NaN loss serializes as null.
std::string to_json_lines(const RectifyTrace& trace);

/// Increment produced by one provider call. `diagnostic` is provider
/// specific (the fitter reports its final loss).
struct DeltaEstimate {
    std::vector<Vec2> delta;  // size 2L
    double diagnostic = 0.0;
};

/// The pose-estimation slot of the iterative loop: anything that can look at
/// the current rectified image and propose a control-point offset increment.
class ParameterProvider {
public:
    virtual ~ParameterProvider() = default;
    virtual DeltaEstimate estimate_delta(const Image& rectified, const ParamState& state) = 0;
};

/// Always proposes the zero increment; the pipeline reduces to a resize.
class ZeroProvider : public ParameterProvider {
public:
    DeltaEstimate estimate_delta(const Image& rectified, const ParamState& state) override;
};

/// Splits a known total offset into equal increments, one per expected call.
class OracleProvider : public ParameterProvider {
public:
    OracleProvider(std::vector<Vec2> total_offset, int calls);
    DeltaEstimate estimate_delta(const Image& rectified, const ParamState& state) override;

private:
    std::vector<Vec2> per_call_;
};

/// Provider failure surfaced by rectify_iterative: carries the 1-based
/// iteration index and the trace accumulated before the failure.
class ProviderError : public Error {
public:
    ProviderError(const std::string& what, int failed_iteration, RectifyTrace partial)
        : Error(what), iteration(failed_iteration), partial_trace(std::move(partial)) {}
    int iteration;
    RectifyTrace partial_trace;
};

/// Zero-offset state for L segments.
ParamState init_state(int segment_count);

/// Sampling grid of the warp encoded by `state`: solve the spline from the
/// base points toward base + delta, then map the output lattice.
Grid rectify_grid(const ParamState& state, const RectifyConfig& config);

/// One warp of the original image under the accumulated state (zero pad).
Image rectify_once(const Image& original, const ParamState& state, const RectifyConfig& config);

/// The iterative loop: each round rectifies the original under the state so
/// far, asks the provider for an increment on that image, clamps it
/// elementwise to [-0.2, 0.2], and accumulates. Sampling always reads
/// `original`; intermediate images only feed the provider. `template_image`,
/// when given, fills the trace's loss column.
std::pair<Image, RectifyTrace> rectify_iterative(const Image& original, ParameterProvider& provider,
                                                 const RectifyConfig& config,
                                                 const Image* template_image = nullptr);

/// Deliberately accumulation-by-resampling variant for comparison runs: each
/// iteration warps the previous iteration's output by its increment alone,
/// so interpolation blur and pad erosion compound. Same provider contract
/// and trace shape as rectify_iterative.
std::pair<Image, RectifyTrace> rectify_chained(const Image& original, ParameterProvider& provider,
                                               const RectifyConfig& config,
                                               const Image* template_image = nullptr);

}  // namespace esir
