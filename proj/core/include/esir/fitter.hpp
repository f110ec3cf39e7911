#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "esir/image.hpp"
#include "esir/rectifier.hpp"

namespace esir {

enum class GradMode { analytic, finite_difference };

/// Descent settings. fd_step is the central-difference probe, well below the
/// smallest accepted step so probes stay within one smooth piece of the
/// objective almost everywhere.
struct FitConfig {
    int max_steps = 50;
    double step_size = 0.05;
    double backtrack_factor = 0.5;
    int max_backtracks = 8;
    GradMode grad_mode = GradMode::analytic;
    double fd_step = 1e-5;
    double rel_tol = 1e-6;  // relative loss change that counts as converged

    void validate() const;
};

/// Mean squared error between rectify_once(original, state) and the
/// template. Throws ArgumentError when the template does not match the
/// configured output dimensions.
double loss(const Image& original, const ParamState& state, const Image& template_image,
            const RectifyConfig& config);

/// Gradient of loss with respect to the 4L offset coordinates, ordered
/// [dx0, dy0, dx1, dy1, ...]. Analytic mode chains the sampler partials with
/// the spline's target sensitivities (the solve is linear in its targets);
/// finite-difference mode probes each coordinate with a central difference.
std::vector<double> grad_loss(const Image& original, const ParamState& state,
                              const Image& template_image, const RectifyConfig& config,
                              GradMode mode = GradMode::analytic, double fd_step = 1e-5);

/// One accepted descent step (step 0 is the starting point).
struct FitStep {
    int step = 0;
    double loss = 0.0;
    double step_size = 0.0;
};

/// JSON lines, one object per accepted step, keys step, loss, step_size.
std::string to_json_lines(const std::vector<FitStep>& trace);

struct FitResult {
    ParamState state;
    double final_loss = 0.0;
    std::vector<FitStep> trace;
    bool converged = false;  // relative loss change fell under rel_tol
    int steps_taken = 0;
};

/// Steepest descent with backtracking line search on loss, starting from
/// `start` (zero offsets when null). Accepted losses strictly decrease; the
/// search stops at max_steps, at convergence, or when no backtracked step
/// descends. Non-finite loss or gradient raises NumericalError naming the
/// step.
FitResult fit(const Image& original, const Image& template_image, const RectifyConfig& config,
              const FitConfig& fit_config, const ParamState* start = nullptr);

/// Plugs fit into the iterative loop: each estimate runs one descent budget
/// from the current state against the bound template and returns the
/// resulting offset increment (clamped like the rectifier clamps). Must be
/// constructed with the same original image the loop samples from.
class FitterProvider : public ParameterProvider {
public:
    FitterProvider(Image original, Image template_image, RectifyConfig config,
                   FitConfig fit_config = {});
    DeltaEstimate estimate_delta(const Image& rectified, const ParamState& state) override;

    /// Accepted descent steps accumulated across all estimate calls,
    /// renumbered as one continuous sequence.
    const std::vector<FitStep>& steps() const { return steps_; }

private:
    Image original_;
    Image template_;
    RectifyConfig config_;
    FitConfig fit_config_;
    std::vector<FitStep> steps_;
};

struct GradCheckOptions {
    double fd_step = 1e-5;
    double margin_px = 1e-2;  // taps closer than this to a cell boundary are masked out
    bool corrupt_analytic = false;  // fault hook: scales one component to force a failure
};

struct GradCheckCase {
    std::uint64_t seed = 0;
    double max_rel_err = 0.0;
    double cosine = 1.0;
};

struct GradCheckReport {
    std::vector<GradCheckCase> cases;
    double worst_rel_err = 0.0;
    double worst_cosine = 1.0;
    std::uint64_t worst_seed = 0;

    bool passes(double rel_tol = 1e-4, double cosine_tol = 0.999) const {
        return worst_rel_err < rel_tol && worst_cosine > cosine_tol;
    }
};

/// Compares analytic and central-difference gradients of the reconstruction
/// loss on generated cases at partially aligned states. Pixels whose taps
/// sit within margin_px of a sampler cell boundary are excluded on both
/// sides of the comparison (the probes would straddle the kink), with the
/// mask frozen at the evaluation state.
GradCheckReport gradient_check(std::uint64_t seed, int case_count,
                               const GradCheckOptions& options = {});

}  // namespace esir
