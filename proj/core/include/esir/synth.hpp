#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "esir/fitline.hpp"
#include "esir/geometry.hpp"
#include "esir/image.hpp"

namespace esir {

enum class Difficulty { mild, perspective, curved, severe };

std::string to_string(Difficulty d);
Difficulty difficulty_from_string(std::string_view name);

/// Axis-aligned filled rectangle, painted in list order (later boxes
/// overwrite earlier ones). Pixel units, (x, y) is the top-left corner.
struct GlyphBox {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
    double intensity = 0.0;
};

struct TemplateSpec {
    double background = 1.0;
    std::vector<GlyphBox> boxes;
};

/// Rasterizes the spec onto a width x height grayscale canvas. Throws
/// ArgumentError when a box reaches outside the canvas.
Image render_template(const TemplateSpec& spec, int width, int height);

/// A text-like banner for the default 100x32 rectified canvas: over- and
/// underline strips plus a row of ring/block glyphs with per-seed jitter in
/// placement, size, and intensity. Deterministic in the seed.
TemplateSpec banner_spec(std::uint64_t seed);

/// Forward distortion: the spline roles are swapped (the pose's control
/// points become the solve's base, the rectified layout its targets), so one
/// sweep over the src_w x src_h canvas pulls template pixels into their
/// distorted positions. Pad is the background (1.0). Throws NumericalError
/// when control_points(params) is degenerate.
Image warp_with_params(const Image& template_image, const FitLineParams& params, int src_w,
                       int src_h, double lambda = 0.0);

/// A generated test case: a fronto-parallel template, its distortion, and
/// the exact pose that undoes it. Rectifying `distorted` with
/// `true_control_offsets` reproduces `template_image` at PSNR >= 25 dB (the
/// generator rejects draws below that).
struct SynthCase {
    Image template_image;
    Image distorted;
    FitLineParams true_params;
    std::vector<Vec2> true_control_offsets;
    std::uint64_t seed = 0;
    Difficulty difficulty = Difficulty::mild;
};

/// Deterministic case generation. Parameter ranges grow with difficulty:
/// mild is a gently curved, slightly compressed banner; perspective adds
/// slanted segments and a tilted middle line; curved uses strong quadratic
/// through quartic terms; severe combines both. Draws whose control points
/// leave the canvas or whose round trip falls under the PSNR bound are
/// rejected and redrawn, at most 10 times before NumericalError.
SynthCase gen_case(std::uint64_t seed, Difficulty difficulty);

/// Writes template.ppm, distorted.ppm, params.json, and meta.json into dir
/// (created if missing).
void save_case(const std::filesystem::path& dir, const SynthCase& c);

/// Reads a bundle written by save_case. Offsets are recomputed from the
/// parameters; images carry one quantization round trip.
SynthCase load_case(const std::filesystem::path& dir);

}  // namespace esir
