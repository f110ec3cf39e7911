#pragma once

#include <array>
#include <memory>
#include <vector>

#include "esir/fitline.hpp"
#include "esir/geometry.hpp"

namespace esir {

/// Thin-plate-spline radial kernel r^2 ln(r^2), natural logarithm,
/// continuously extended with U(0) = 0.
double kernel_u(double r);

/// Coefficients of a fitted thin plate spline. The map is
///   t = affine^T [1, x, y] + sum_j kernel_weights[j] * U(|p - source_base[j]|)
/// with affine rows ordered (constant, x, y). Kernel weights satisfy the TPS
/// side conditions: they sum to zero and are orthogonal to the base x and y
/// coordinates.
struct TpsCoeffs {
    std::vector<Vec2> kernel_weights;  // one per base point
    std::array<Vec2, 3> affine{};      // rows: constant, x, y
    std::vector<Vec2> source_base;     // the points the kernel is centered on
    double lambda = 0.0;
    double condition = 0.0;  // estimate of the solved bordered system
};

/// Factorized bordered TPS system for a fixed set of base points. Reusable
/// across solves toward different targets and for map sensitivities (the
/// mapped point is linear in the targets; cardinal_weights exposes the
/// weights of that linear form).
class TpsSolver {
public:
    /// Assembles and factorizes the (2L+3) x (2L+3) bordered system
    /// [[S + lambda*I, 1, B], [1^T, 0, 0], [B^T, 0, 0]] on `base`. A
    /// near-singular factorization at lambda = 0 is retried once with
    /// lambda = 1e-8; a system still singular after that throws
    /// NumericalError carrying the condition estimate.
    TpsSolver(ControlPoints base, double lambda);
    ~TpsSolver();
    TpsSolver(TpsSolver&&) noexcept;
    TpsSolver& operator=(TpsSolver&&) noexcept;

    TpsCoeffs solve(const ControlPoints& targets) const;

    /// Weights w(p) such that the mapped point is sum_j w_j(p) * target_j
    /// for any target configuration; size 2L.
    std::vector<double> cardinal_weights(Vec2 p) const;

    /// Cardinal weights for every pixel center of a width x height output
    /// lattice, row-major: entry [pixel * 2L + j].
    std::vector<double> cardinal_weight_table(int width, int height) const;

    const ControlPoints& base() const;
    double lambda() const;
    double condition() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// One-shot solve of the bordered system on `base` toward `targets`. With
/// lambda = 0 the map interpolates: map_point(coeffs, base[j]) == targets[j].
TpsCoeffs solve(const ControlPoints& base, const ControlPoints& targets, double lambda = 0.0);

/// Image of a single normalized point under the fitted spline.
Vec2 map_point(const TpsCoeffs& coeffs, Vec2 p);

/// Maps every pixel center of an out_w x out_h lattice, producing the
/// sampling grid into the distorted image.
Grid map_grid(const TpsCoeffs& coeffs, int out_w, int out_h);

}  // namespace esir
