#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace esir {

/// 2-D point or offset in normalized image coordinates: the image center is
/// the origin, pixel centers span (-0.5, 0.5) in each axis, and y grows
/// downward with the row index. Values may leave [-0.5, 0.5] after mapping.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }

    double norm() const { return std::hypot(x, y); }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

/// Normalized coordinate of the center of pixel (col, row) in a w x h raster.
inline Vec2 pixel_center(int col, int row, int width, int height) {
    return {(col + 0.5) / width - 0.5, (row + 0.5) / height - 0.5};
}

/// Continuous pixel-space location (column axis) of a normalized x; the
/// inverse of pixel_center along one axis. An integer result lands exactly
/// on a pixel center.
inline double norm_to_pixel(double coord, int extent) {
    return (coord + 0.5) * extent - 0.5;
}

/// Per-output-pixel source coordinates driving the sampler: entry
/// (row, col) holds the normalized source-image location that output pixel
/// should be read from.
struct Grid {
    int width = 0;
    int height = 0;
    std::vector<Vec2> coords;  // row-major, size width * height

    Vec2& at(int row, int col) { return coords[static_cast<std::size_t>(row) * width + col]; }
    Vec2 at(int row, int col) const { return coords[static_cast<std::size_t>(row) * width + col]; }
};

/// Grid of pixel centers mapped through the identity: sampling with it
/// reproduces a plain bilinear resize.
inline Grid identity_grid(int width, int height) {
    Grid g{width, height, {}};
    g.coords.resize(static_cast<std::size_t>(width) * height);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
            g.at(r, c) = pixel_center(c, r, width, height);
    return g;
}

}  // namespace esir
