#pragma once

#include <vector>

#include "esir/geometry.hpp"
#include "esir/image.hpp"

namespace esir {

/// Output of sample_with_jacobian: the sampled image plus, per output value
/// (pixel x channel, same layout as output.data), the analytic partials of
/// that value with respect to the driving grid coordinate. Normalized grid
/// units, so the bilinear slope carries a factor of the source width or
/// height.
struct SampledJacobian {
    Image output;
    std::vector<double> dgx;
    std::vector<double> dgy;
};

/// Bilinear sampling of `src` at the grid's normalized coordinates. Source
/// taps outside the raster contribute `pad`. Output dimensions follow the
/// grid, channels follow the source.
Image sample(const Image& src, const Grid& grid, double pad = 0.0);

/// sample() plus analytic derivatives. The partials are piecewise constant
/// within each source cell; exactly on a cell boundary the cell containing
/// the tap nudged by +1e-12 in each axis decides.
SampledJacobian sample_with_jacobian(const Image& src, const Grid& grid, double pad = 0.0);

/// Fraction of grid points whose bilinear support is not entirely inside the
/// source raster, i.e. where `pad` influences the output.
double oob_fraction(const Grid& grid, int src_w, int src_h);

/// Per grid point, the distance (in source pixels) from the tap to the
/// nearest bilinear cell boundary, minimized over both axes. Finite
/// difference probes straddle a boundary when this is below the probe step,
/// which is what masks built on these distances exclude.
std::vector<double> cell_boundary_distances(const Grid& grid, int src_w, int src_h);

}  // namespace esir
