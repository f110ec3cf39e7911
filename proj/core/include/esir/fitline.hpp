#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "esir/geometry.hpp"

namespace esir {

/// One of the L short line segments bounding the text vertically: the line
/// y = slope*x + intercept carrying two control points at distance
/// half_length on either side of its intersection with the middle line.
struct LineSegment {
    double slope = 0.0;
    double intercept = 0.0;
    double half_length = 0.0;  // >= 0
};

/// The fitting-line pose model: a middle-line polynomial of order K plus L
/// line segments, 3L + K + 1 parameters total. All values live in normalized
/// coordinates.
struct FitLineParams {
    std::vector<double> poly;           // a0..aK, lowest order first
    std::vector<LineSegment> segments;  // size L >= 2

    int poly_order() const { return static_cast<int>(poly.size()) - 1; }
    int segment_count() const { return static_cast<int>(segments.size()); }

    /// Throws ArgumentError unless K >= 1, L >= 2 and every half_length >= 0.
    void validate() const;
};

/// Ordered list of 2L control points: slots 0..L-1 are the top raster row
/// left to right, slots L..2L-1 the bottom row. `degenerate` marks
/// rank-deficient layouts that need a regularized TPS solve.
struct ControlPoints {
    std::vector<Vec2> points;
    bool degenerate = false;

    int segment_count() const { return static_cast<int>(points.size() / 2); }
};

/// Evaluates the middle-line polynomial sum(a_k x^k) by Horner's scheme.
double eval_middle_line(std::span<const double> poly, double x);

/// Nominal x of segment l (1-based) among L: -0.5 + (l-1)/(L-1).
double segment_nominal_x(int l, int segment_count);

/// Intersection of segment l's line with the middle line: the root of
/// middle(x) - (slope*x + intercept) nearest x_nominal, located by scanning
/// [-1, 1] for sign changes, bisecting, and polishing with Newton to
/// |f| < 1e-12. Falls back to (x_nominal, middle(x_nominal)) when no root
/// exists in [-1, 1] (parallel or coincident lines).
Vec2 segment_center(const FitLineParams& params, int l, double x_nominal);

/// The 2L segment endpoints. For each segment the unit direction
/// (1, slope)/norm is flipped so its y component is <= 0 (pointing at the
/// top raster row); the top slot gets center + r*d, the bottom slot
/// center - r*d. Flags degenerate layouts (see ControlPoints).
ControlPoints control_points(const FitLineParams& params);

/// The fixed rectified-frame layout: L points at y = -0.5 (top raster row)
/// and L at y = +0.5, x evenly spaced over [-0.5, 0.5]. Throws ArgumentError
/// for L < 2.
ControlPoints base_points(int segment_count);

/// control_points(params) minus base_points(L) slotwise: the offset vector
/// that moves the rectified layout onto this pose.
std::vector<Vec2> control_offsets(const FitLineParams& params);

/// JSON document {"K":..,"L":..,"poly":[..],"segments":[[b1,b0,r],..]} with
/// that exact field order.
std::string to_json(const FitLineParams& params);
FitLineParams fitline_params_from_json(std::string_view text);

}  // namespace esir
