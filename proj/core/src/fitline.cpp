#include "esir/fitline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "esir/error.hpp"

namespace esir {

namespace {

constexpr double kRootTol = 1e-12;
constexpr int kScanIntervals = 256;

double poly_derivative(std::span<const double> poly, double x) {
    double d = 0.0;
    for (std::size_t k = poly.size(); k-- > 1;) d = d * x + poly[k] * static_cast<double>(k);
    return d;
}

// Bisection on a bracketing interval, then a few Newton polish steps from
// the converged midpoint.
double refine_root(const FitLineParams& p, const LineSegment& s, double lo, double hi) {
    auto f = [&](double x) {
        return eval_middle_line(p.poly, x) - (s.slope * x + s.intercept);
    };
    double flo = f(lo);
    for (int it = 0; it < 80 && hi - lo > 1e-16; ++it) {
        double mid = 0.5 * (lo + hi);
        double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 4; ++it) {
        double fx = f(x);
        if (std::abs(fx) < kRootTol) break;
        double fp = poly_derivative(p.poly, x) - s.slope;
        if (fp == 0.0 || !std::isfinite(fp)) break;
        double next = x - fx / fp;
        if (!std::isfinite(next)) break;
        x = next;
    }
    return x;
}

// True when the union of `window` and `row` lies on one line, judged by the
// smallest singular value of the centered point cloud.
bool points_collinear(std::span<const Vec2> window, std::span<const Vec2> row) {
    double n = static_cast<double>(window.size() + row.size());
    double mx = 0.0, my = 0.0;
    for (Vec2 p : window) { mx += p.x; my += p.y; }
    for (Vec2 p : row) { mx += p.x; my += p.y; }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    auto accumulate = [&](Vec2 p) {
        double dx = p.x - mx, dy = p.y - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    };
    for (Vec2 p : window) accumulate(p);
    for (Vec2 p : row) accumulate(p);
    // eigenvalues of the 2x2 covariance
    double tr = sxx + syy;
    double det = sxx * syy - sxy * sxy;
    double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    double lmin = tr / 2.0 - disc;
    return lmin < 1e-14 * std::max(1.0, tr);
}

}  // namespace

void FitLineParams::validate() const {
    if (poly.size() < 2)
        throw ArgumentError("middle-line polynomial needs order >= 1, got " +
                            std::to_string(poly.size()) + " coefficients");
    if (segments.size() < 2)
        throw ArgumentError("need at least 2 line segments, got " +
                            std::to_string(segments.size()));
    for (const LineSegment& s : segments)
        if (!(s.half_length >= 0.0))
            throw ArgumentError("segment half_length must be >= 0");
}

double eval_middle_line(std::span<const double> poly, double x) {
    double y = 0.0;
    for (std::size_t k = poly.size(); k-- > 0;) y = y * x + poly[k];
    return y;
}

double segment_nominal_x(int l, int segment_count) {
    return -0.5 + static_cast<double>(l - 1) / (segment_count - 1);
}

Vec2 segment_center(const FitLineParams& params, int l, double x_nominal) {
    const LineSegment& seg = params.segments[static_cast<std::size_t>(l - 1)];
    auto f = [&](double x) {
        return eval_middle_line(params.poly, x) - (seg.slope * x + seg.intercept);
    };

    // Collect every root bracket in [-1, 1] and keep the root nearest
    // x_nominal; a root exactly at a scan node counts as its own bracket.
    double best_x = std::numeric_limits<double>::quiet_NaN();
    double best_dist = std::numeric_limits<double>::infinity();
    auto consider = [&](double x) {
        double d = std::abs(x - x_nominal);
        if (d < best_dist) {
            best_dist = d;
            best_x = x;
        }
    };

    double prev_x = -1.0;
    double prev_f = f(prev_x);
    if (prev_f == 0.0) consider(prev_x);
    for (int i = 1; i <= kScanIntervals; ++i) {
        double x = -1.0 + 2.0 * i / kScanIntervals;
        double fx = f(x);
        if (fx == 0.0) {
            consider(x);
        } else if ((fx < 0.0) != (prev_f < 0.0) && prev_f != 0.0) {
            consider(refine_root(params, seg, prev_x, x));
        }
        prev_x = x;
        prev_f = fx;
    }

    if (!std::isfinite(best_x))
        return {x_nominal, eval_middle_line(params.poly, x_nominal)};
    return {best_x, eval_middle_line(params.poly, best_x)};
}

ControlPoints control_points(const FitLineParams& params) {
    params.validate();
    const int L = params.segment_count();

    ControlPoints cp;
    cp.points.resize(static_cast<std::size_t>(2) * L);
    for (int l = 1; l <= L; ++l) {
        const LineSegment& seg = params.segments[static_cast<std::size_t>(l - 1)];
        Vec2 center = segment_center(params, l, segment_nominal_x(l, L));
        double norm = std::hypot(1.0, seg.slope);
        Vec2 dir{1.0 / norm, seg.slope / norm};
        if (dir.y > 0.0) dir = {-dir.x, -dir.y};  // top slot points up the raster
        cp.points[static_cast<std::size_t>(l - 1)] = center + dir * seg.half_length;
        cp.points[static_cast<std::size_t>(L + l - 1)] = center - (dir * seg.half_length);
    }

    std::span<const Vec2> top(cp.points.data(), static_cast<std::size_t>(L));
    std::span<const Vec2> bottom(cp.points.data() + L, static_cast<std::size_t>(L));
    if (points_collinear(top, bottom)) cp.degenerate = true;
    for (int i = 0; i + 3 <= L && !cp.degenerate; ++i) {
        if (points_collinear(top.subspan(i, 3), bottom)) cp.degenerate = true;
        if (points_collinear(bottom.subspan(i, 3), top)) cp.degenerate = true;
    }
    return cp;
}

ControlPoints base_points(int segment_count) {
    if (segment_count < 2)
        throw ArgumentError("base_points requires at least 2 segments, got " +
                            std::to_string(segment_count));
    ControlPoints cp;
    cp.points.resize(static_cast<std::size_t>(2) * segment_count);
    for (int j = 0; j < segment_count; ++j) {
        double x = -0.5 + static_cast<double>(j) / (segment_count - 1);
        cp.points[static_cast<std::size_t>(j)] = {x, -0.5};
        cp.points[static_cast<std::size_t>(segment_count + j)] = {x, 0.5};
    }
    return cp;
}

std::vector<Vec2> control_offsets(const FitLineParams& params) {
    ControlPoints cp = control_points(params);
    ControlPoints base = base_points(params.segment_count());
    std::vector<Vec2> offsets(cp.points.size());
    for (std::size_t i = 0; i < cp.points.size(); ++i)
        offsets[i] = cp.points[i] - base.points[i];
    return offsets;
}

std::string to_json(const FitLineParams& params) {
    nlohmann::ordered_json doc;
    doc["K"] = params.poly_order();
    doc["L"] = params.segment_count();
    doc["poly"] = params.poly;
    auto segs = nlohmann::ordered_json::array();
    for (const LineSegment& s : params.segments)
        segs.push_back({s.slope, s.intercept, s.half_length});
    doc["segments"] = std::move(segs);
    return doc.dump();
}

FitLineParams fitline_params_from_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("params JSON: ") + e.what(), e.byte);
    }
    try {
        FitLineParams p;
        p.poly = doc.at("poly").get<std::vector<double>>();
        for (const auto& row : doc.at("segments")) {
            if (!row.is_array() || row.size() != 3)
                throw ArgumentError("each segment must be a [b1, b0, r] triple");
            p.segments.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<double>()});
        }
        if (doc.at("K").get<int>() != p.poly_order())
            throw ArgumentError("params JSON: K does not match poly length");
        if (doc.at("L").get<int>() != p.segment_count())
            throw ArgumentError("params JSON: L does not match segments length");
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(std::string("params JSON: ") + e.what());
    }
}

}  // namespace esir
