#include "esir/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>

#include <json.hpp>

#include "esir/error.hpp"
#include "esir/rectifier.hpp"
#include "esir/sampler.hpp"
#include "esir/tps.hpp"

namespace esir {

namespace {

constexpr int kSrcW = 200;
constexpr int kSrcH = 64;
constexpr int kCaseL = 20;
constexpr int kMaxAttempts = 10;
constexpr double kMinRoundTripPsnr = 25.05;  // small margin over the 25 dB bound
constexpr double kCanvasBound = 0.48;
constexpr double kMinTiltFromVertical = 0.02;  // keeps segment slopes finite
constexpr double kMaxTiltFromVertical = 0.45;  // keeps middle-line roots unique

// 53-bit uniform draws from a fixed-width engine; identical streams on every
// platform.
struct Rng {
    std::mt19937_64 eng;

    explicit Rng(std::uint64_t seed) : eng(seed) {}

    double uniform(double lo, double hi) {
        double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
        return lo + u * (hi - lo);
    }
    double signed_uniform(double lo, double hi) {
        double v = uniform(lo, hi);
        return (eng() & 1u) ? v : -v;
    }
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(eng() % static_cast<std::uint64_t>(hi - lo + 1));
    }
};

double lerp(double a, double b, double t) { return a + (b - a) * t; }

double middle_slope(const std::vector<double>& poly, double x) {
    double m = 0.0;
    for (std::size_t k = poly.size(); k-- > 1;) m = m * x + poly[k] * static_cast<double>(k);
    return m;
}

struct DrawRanges {
    double psi_left = 0.0;
    double psi_right = 0.0;
    double psi_jitter = 0.0;
    bool follow_curve = false;
    double follow_cap = 0.0;
    double psi_cap = kMaxTiltFromVertical;
    double r_left = 0.3;
    double r_right = 0.3;
    double compression = 1.0;
};

FitLineParams draw_params(Rng& rng, Difficulty d) {
    FitLineParams p;
    p.poly.assign(5, 0.0);
    DrawRanges g;
    // Ranges below keep every control point inside |x|,|y| <= 0.47 in the
    // worst case: |x| <= compression/2 + r_max*sin(psi_max) and
    // |y| <= max|middle| + r_max, so the canvas rejection gate almost never
    // fires and the distorted text never taps the pad region on the way back.
    // Half-widths stay in [0.28, 0.37] so the distorted text band carries at
    // least one source row per template row; tighter bands alias vertically
    // and sink the round trip below the gate.
    switch (d) {
        case Difficulty::mild:
            p.poly[0] = rng.signed_uniform(0.0, 0.02);
            p.poly[1] = rng.signed_uniform(0.0, 0.05);
            p.poly[2] = rng.signed_uniform(0.02, 0.10);
            g.compression = rng.uniform(0.86, 0.895);
            g.psi_left = g.psi_right = rng.signed_uniform(0.02, 0.05);
            g.psi_jitter = 0.01;
            g.r_left = g.r_right = rng.uniform(0.30, 0.37);
            break;
        case Difficulty::perspective:
            p.poly[0] = rng.signed_uniform(0.0, 0.02);
            p.poly[1] = rng.signed_uniform(0.06, 0.15);
            p.poly[2] = rng.signed_uniform(0.02, 0.08);
            g.compression = rng.uniform(0.78, 0.81);
            g.psi_left = rng.signed_uniform(0.08, 0.18);
            g.psi_right = rng.signed_uniform(0.08, 0.18);
            g.psi_jitter = 0.01;
            g.r_left = rng.uniform(0.28, 0.34);
            g.r_right = std::clamp(g.r_left * rng.uniform(0.9, 1.1), 0.28, 0.35);
            break;
        case Difficulty::curved:
            p.poly[0] = rng.signed_uniform(0.0, 0.02);
            p.poly[1] = rng.signed_uniform(0.0, 0.03);
            p.poly[2] = rng.signed_uniform(0.15, 0.35);
            p.poly[3] = rng.signed_uniform(0.0, 0.15);
            p.poly[4] = rng.signed_uniform(0.0, 0.15);
            g.compression = rng.uniform(0.73, 0.76);
            g.follow_curve = true;
            g.follow_cap = 0.26;
            g.psi_cap = 0.27;
            g.psi_jitter = 0.01;
            g.r_left = g.r_right = rng.uniform(0.28, 0.34);
            break;
        case Difficulty::severe:
            p.poly[0] = rng.signed_uniform(0.0, 0.03);
            p.poly[1] = rng.signed_uniform(0.05, 0.12);
            p.poly[2] = rng.signed_uniform(0.25, 0.40);
            p.poly[3] = rng.signed_uniform(0.05, 0.20);
            p.poly[4] = rng.signed_uniform(0.05, 0.20);
            g.compression = rng.uniform(0.70, 0.73);
            g.follow_curve = true;
            g.follow_cap = 0.24;
            g.psi_cap = 0.32;
            g.psi_left = rng.signed_uniform(0.05, 0.08);
            g.psi_right = rng.signed_uniform(0.05, 0.08);
            g.psi_jitter = 0.01;
            g.r_left = rng.uniform(0.28, 0.32);
            g.r_right = std::clamp(g.r_left * rng.uniform(0.9, 1.1), 0.27, 0.32);
            break;
    }

    p.segments.reserve(kCaseL);
    for (int l = 0; l < kCaseL; ++l) {
        double t = static_cast<double>(l) / (kCaseL - 1);
        double xc = g.compression * (-0.5 + t);
        double yc = eval_middle_line(p.poly, xc);

        // Tilt from vertical: optionally following the middle line's slope,
        // plus a left-to-right ramp and per-segment jitter.
        double psi = 0.0;
        if (g.follow_curve)
            psi = std::clamp(std::atan(middle_slope(p.poly, xc)), -g.follow_cap, g.follow_cap);
        psi += lerp(g.psi_left, g.psi_right, t) + rng.signed_uniform(0.0, g.psi_jitter);
        psi = std::clamp(psi, -g.psi_cap, g.psi_cap);
        if (std::abs(psi) < kMinTiltFromVertical)
            psi = psi < 0.0 ? -kMinTiltFromVertical : kMinTiltFromVertical;

        double slope = -1.0 / std::tan(psi);
        double r = std::clamp(lerp(g.r_left, g.r_right, t), 0.20, 0.45);
        p.segments.push_back({slope, yc - slope * xc, r});
    }
    return p;
}

bool inside_canvas(const ControlPoints& cp) {
    for (Vec2 q : cp.points)
        if (std::abs(q.x) > kCanvasBound || std::abs(q.y) > kCanvasBound) return false;
    return true;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

}  // namespace

std::string to_string(Difficulty d) {
    switch (d) {
        case Difficulty::mild: return "mild";
        case Difficulty::perspective: return "perspective";
        case Difficulty::curved: return "curved";
        case Difficulty::severe: return "severe";
    }
    throw ArgumentError("unknown difficulty value");
}

Difficulty difficulty_from_string(std::string_view name) {
    if (name == "mild") return Difficulty::mild;
    if (name == "perspective") return Difficulty::perspective;
    if (name == "curved") return Difficulty::curved;
    if (name == "severe") return Difficulty::severe;
    throw ArgumentError("unknown difficulty \"" + std::string(name) + "\"");
}

Image render_template(const TemplateSpec& spec, int width, int height) {
    if (width < 1 || height < 1) throw ArgumentError("template canvas must be positive");
    Image img = Image::filled(width, height, 1, spec.background);
    for (const GlyphBox& b : spec.boxes) {
        if (b.w < 1 || b.h < 1 || b.x < 0 || b.y < 0 || b.x + b.w > width || b.y + b.h > height)
            throw ArgumentError("glyph box reaches outside the canvas");
        for (int r = b.y; r < b.y + b.h; ++r)
            for (int c = b.x; c < b.x + b.w; ++c) img.at(r, c) = b.intensity;
    }
    return img;
}

TemplateSpec banner_spec(std::uint64_t seed) {
    Rng rng(seed ^ 0x7c0fbe6f2d3c41b9ULL);
    TemplateSpec spec;
    spec.boxes.push_back({4, 2, 92, 3, 0.72});
    spec.boxes.push_back({4, 27, 92, 3, 0.72});
    const double cores[3] = {0.50, 0.58, 0.66};
    for (int j = 0; j < 6; ++j) {
        int x = 5 + 16 * j + rng.uniform_int(0, 2);
        int y = 8 + rng.uniform_int(0, 1);
        int w = 9 + rng.uniform_int(0, 2);
        int h = 14 + rng.uniform_int(0, 2);
        double core = cores[j % 3] + rng.uniform(0.0, 0.04);
        spec.boxes.push_back({x, y, w, h, 0.5 * (1.0 + core)});
        spec.boxes.push_back({x + 1, y + 1, w - 2, h - 2, core});
        if (j % 2 == 1) spec.boxes.push_back({x + 3, y + 4, w - 6, h - 8, 0.92});
    }
    return spec;
}

Image warp_with_params(const Image& template_image, const FitLineParams& params, int src_w,
                       int src_h, double lambda) {
    params.validate();
    ControlPoints cp = control_points(params);
    if (cp.degenerate)
        throw NumericalError("control points are degenerate; the forward warp is ill-posed");
    TpsSolver solver(cp, lambda);
    Grid grid = map_grid(solver.solve(base_points(params.segment_count())), src_w, src_h);
    return sample(template_image, grid, 1.0);
}

SynthCase gen_case(std::uint64_t seed, Difficulty difficulty) {
    Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(difficulty) + 1)));
    RectifyConfig cfg;

    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        Image tmpl = render_template(banner_spec(rng.eng()), cfg.out_w, cfg.out_h);
        FitLineParams params = draw_params(rng, difficulty);
        ControlPoints cp = control_points(params);
        if (cp.degenerate || !inside_canvas(cp)) continue;

        Image distorted = warp_with_params(tmpl, params, kSrcW, kSrcH);

        ParamState state = init_state(kCaseL);
        for (std::size_t i = 0; i < cp.points.size(); ++i)
            state.delta[i] = cp.points[i] - state.base.points[i];
        Image rect = rectify_once(distorted, state, cfg);
        if (psnr(rect, tmpl) < kMinRoundTripPsnr) continue;

        SynthCase c;
        c.template_image = std::move(tmpl);
        c.distorted = std::move(distorted);
        c.true_params = std::move(params);
        c.true_control_offsets = std::move(state.delta);
        c.seed = seed;
        c.difficulty = difficulty;
        return c;
    }
    throw NumericalError("no draw met the round-trip bound in " + std::to_string(kMaxAttempts) +
                         " attempts (seed " + std::to_string(seed) + ", " + to_string(difficulty) +
                         ")");
}

void save_case(const std::filesystem::path& dir, const SynthCase& c) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    save_image_file(dir / "template.ppm", c.template_image);
    save_image_file(dir / "distorted.ppm", c.distorted);
    write_text_file(dir / "params.json", to_json(c.true_params) + "\n");

    nlohmann::ordered_json meta;
    meta["seed"] = c.seed;
    meta["difficulty"] = to_string(c.difficulty);
    write_text_file(dir / "meta.json", meta.dump() + "\n");
}

SynthCase load_case(const std::filesystem::path& dir) {
    SynthCase c;
    c.template_image = load_image_file(dir / "template.ppm");
    c.distorted = load_image_file(dir / "distorted.ppm");
    c.true_params = fitline_params_from_json(read_text_file(dir / "params.json"));
    c.true_control_offsets = control_offsets(c.true_params);

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_text_file(dir / "meta.json"));
        c.seed = meta.at("seed").get<std::uint64_t>();
        c.difficulty = difficulty_from_string(meta.at("difficulty").get<std::string>());
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("malformed meta.json: ") + ex.what(), 0);
    }
    return c;
}

}  // namespace esir
