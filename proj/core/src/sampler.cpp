#include "esir/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "esir/error.hpp"

namespace esir {

namespace {

constexpr double kBoundaryNudge = 1e-12;

struct Taps {
    int x0 = 0;
    int y0 = 0;
    double fx = 0.0;
    double fy = 0.0;
    bool finite = true;
};

Taps locate(Vec2 g, int src_w, int src_h) {
    double u = norm_to_pixel(g.x, src_w);
    double v = norm_to_pixel(g.y, src_h);
    if (!std::isfinite(u) || !std::isfinite(v)) return {0, 0, 0.0, 0.0, false};
    double x0 = std::floor(u + kBoundaryNudge);
    double y0 = std::floor(v + kBoundaryNudge);
    return {static_cast<int>(x0), static_cast<int>(y0), u - x0, v - y0, true};
}

double fetch(const Image& src, int x, int y, int ch, double pad) {
    if (x < 0 || x >= src.width || y < 0 || y >= src.height) return pad;
    return src.at(y, x, ch);
}

void check_inputs(const Image& src, const Grid& grid) {
    if (src.width < 1 || src.height < 1 || src.channels < 1 ||
        src.data.size() != static_cast<std::size_t>(src.width) * src.height * src.channels)
        throw ArgumentError("sample: malformed source image");
    if (grid.width < 1 || grid.height < 1 ||
        grid.coords.size() != static_cast<std::size_t>(grid.width) * grid.height)
        throw ArgumentError("sample: grid has " + std::to_string(grid.coords.size()) +
                            " coords for " + std::to_string(grid.width) + "x" +
                            std::to_string(grid.height));
}

}  // namespace

Image sample(const Image& src, const Grid& grid, double pad) {
    check_inputs(src, grid);
    Image out = Image::filled(grid.width, grid.height, src.channels, 0.0);
    std::size_t i = 0;
    for (const Vec2& g : grid.coords) {
        Taps t = locate(g, src.width, src.height);
        for (int ch = 0; ch < src.channels; ++ch, ++i) {
            if (!t.finite) {
                out.data[i] = pad;
                continue;
            }
            double t00 = fetch(src, t.x0, t.y0, ch, pad);
            double t10 = fetch(src, t.x0 + 1, t.y0, ch, pad);
            double t01 = fetch(src, t.x0, t.y0 + 1, ch, pad);
            double t11 = fetch(src, t.x0 + 1, t.y0 + 1, ch, pad);
            double top = t00 + t.fx * (t10 - t00);
            double bot = t01 + t.fx * (t11 - t01);
            out.data[i] = top + t.fy * (bot - top);
        }
    }
    return out;
}

SampledJacobian sample_with_jacobian(const Image& src, const Grid& grid, double pad) {
    check_inputs(src, grid);
    SampledJacobian s;
    s.output = Image::filled(grid.width, grid.height, src.channels, 0.0);
    s.dgx.assign(s.output.value_count(), 0.0);
    s.dgy.assign(s.output.value_count(), 0.0);
    std::size_t i = 0;
    for (const Vec2& g : grid.coords) {
        Taps t = locate(g, src.width, src.height);
        for (int ch = 0; ch < src.channels; ++ch, ++i) {
            if (!t.finite) {
                s.output.data[i] = pad;
                continue;
            }
            double t00 = fetch(src, t.x0, t.y0, ch, pad);
            double t10 = fetch(src, t.x0 + 1, t.y0, ch, pad);
            double t01 = fetch(src, t.x0, t.y0 + 1, ch, pad);
            double t11 = fetch(src, t.x0 + 1, t.y0 + 1, ch, pad);
            double top = t00 + t.fx * (t10 - t00);
            double bot = t01 + t.fx * (t11 - t01);
            s.output.data[i] = top + t.fy * (bot - top);
            double du = (1.0 - t.fy) * (t10 - t00) + t.fy * (t11 - t01);
            double dv = (1.0 - t.fx) * (t01 - t00) + t.fx * (t11 - t10);
            s.dgx[i] = du * src.width;
            s.dgy[i] = dv * src.height;
        }
    }
    return s;
}

double oob_fraction(const Grid& grid, int src_w, int src_h) {
    if (grid.coords.empty()) return 0.0;
    std::size_t outside = 0;
    for (const Vec2& g : grid.coords) {
        double u = norm_to_pixel(g.x, src_w);
        double v = norm_to_pixel(g.y, src_h);
        bool inside = std::isfinite(u) && std::isfinite(v) &&
                      u >= 0.0 && u <= src_w - 1.0 && v >= 0.0 && v <= src_h - 1.0;
        if (!inside) ++outside;
    }
    return static_cast<double>(outside) / static_cast<double>(grid.coords.size());
}

std::vector<double> cell_boundary_distances(const Grid& grid, int src_w, int src_h) {
    std::vector<double> dist;
    dist.reserve(grid.coords.size());
    for (const Vec2& g : grid.coords) {
        Taps t = locate(g, src_w, src_h);
        if (!t.finite) {
            dist.push_back(0.0);
            continue;
        }
        double dx = std::min(t.fx, 1.0 - t.fx);
        double dy = std::min(t.fy, 1.0 - t.fy);
        dist.push_back(std::min(dx, dy));
    }
    return dist;
}

}  // namespace esir
