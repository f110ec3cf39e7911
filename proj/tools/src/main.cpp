// Command-line surface for the rectification library: forward warping,
// iterative rectification, template fitting, gradient checking, trend
// benchmarks, and pose overlays.
//
// Exit codes: 0 success, 1 check failure, 2 I/O or argument error,
// 3 numerical failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "esir/error.hpp"
#include "esir/fitline.hpp"
#include "esir/fitter.hpp"
#include "esir/image.hpp"
#include "esir/parallel.hpp"
#include "esir/params_io.hpp"
#include "esir/rectifier.hpp"
#include "esir/sampler.hpp"
#include "esir/synth.hpp"
#include "esir/tps.hpp"

namespace {

using namespace esir;

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

std::pair<int, int> parse_size(const std::string& text) {
    auto sep = text.find_first_of("xX");
    if (sep == std::string::npos)
        throw ArgumentError("size must look like WxH, got '" + text + "'");
    int w = 0, h = 0;
    try {
        w = std::stoi(text.substr(0, sep));
        h = std::stoi(text.substr(sep + 1));
    } catch (const std::exception&) {
        throw ArgumentError("size must look like WxH, got '" + text + "'");
    }
    if (w < 1 || h < 1) throw ArgumentError("size must be positive, got '" + text + "'");
    return {w, h};
}

double to_psnr(double mean_sq) {
    return mean_sq > 0.0 ? -10.0 * std::log10(mean_sq) : std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// warp

int cmd_warp(const std::string& template_path, const std::string& params_path,
             const std::string& out_path, const std::string& src_size) {
    auto [w, h] = parse_size(src_size);
    Image tmpl = load_image_file(template_path);
    ParamsFile params = load_params_file(params_path);

    Image out;
    if (const auto* fl = std::get_if<FitLineParams>(&params)) {
        out = warp_with_params(tmpl, *fl, w, h);
    } else {
        // Control-space pose: distort by solving from the displaced layout
        // back to the rectified one, mirroring the fitline forward warp.
        ControlPoints base = base_points(segment_count_of(params));
        ControlPoints displaced = base;
        std::vector<Vec2> offsets = control_offsets_of(params);
        for (std::size_t j = 0; j < displaced.points.size(); ++j)
            displaced.points[j] += offsets[j];
        TpsCoeffs coeffs = solve(displaced, base);
        out = sample(tmpl, map_grid(coeffs, w, h), 1.0);
    }
    save_image_file(out_path, out);
    return 0;
}

// ---------------------------------------------------------------------------
// rectify

int cmd_rectify(const std::string& input_path, const std::string& params_path,
                const std::string& out_path, int iters, const std::string& trace_path) {
    Image input = load_image_file(input_path);
    ParamsFile params = load_params_file(params_path);

    RectifyConfig config;
    config.segment_count = segment_count_of(params);
    config.iterations = iters;

    OracleProvider provider(control_offsets_of(params), std::max(iters, 1));
    auto [out, trace] = rectify_iterative(input, provider, config, nullptr);
    save_image_file(out_path, out);
    if (!trace_path.empty()) write_text(trace_path, to_json_lines(trace));
    return 0;
}

// ---------------------------------------------------------------------------
// fit

int cmd_fit(const std::string& input_path, const std::string& template_path,
            const std::string& out_params_path, int iters, const std::string& grad,
            const std::string& trace_path) {
    Image input = load_image_file(input_path);
    Image tmpl = load_image_file(template_path);

    RectifyConfig config;
    config.iterations = iters;
    FitConfig fit_config;
    fit_config.grad_mode = grad == "fd" ? GradMode::finite_difference : GradMode::analytic;

    FitterProvider provider(input, tmpl, config, fit_config);
    auto [out, trace] = rectify_iterative(input, provider, config, &tmpl);

    ControlParams best;
    best.segment_count = config.segment_count;
    best.delta = trace.back().delta;
    save_params_file(out_params_path, ParamsFile{best});
    if (!trace_path.empty()) write_text(trace_path, to_json_lines(provider.steps()));

    double final_loss = mse(out, tmpl);
    std::printf("final loss %.8f\npsnr %.4f dB\n", final_loss, to_psnr(final_loss));
    return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

int cmd_gradcheck(std::uint64_t seed, int cases, bool inject_fault) {
    if (cases == 0) {
        std::printf("no cases\n");
        return 0;
    }
    GradCheckOptions options;
    options.corrupt_analytic = inject_fault;
    GradCheckReport report = gradient_check(seed, cases, options);
    std::printf("cases %zu  worst rel err %.3e  worst cosine %.6f  worst seed %llu\n",
                report.cases.size(), report.worst_rel_err, report.worst_cosine,
                static_cast<unsigned long long>(report.worst_seed));
    if (!report.passes()) {
        std::fprintf(stderr, "gradient check failed at seed %llu: rel err %.3e cosine %.6f\n",
                     static_cast<unsigned long long>(report.worst_seed), report.worst_rel_err,
                     report.worst_cosine);
        return 1;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// bench

struct SuiteStat {
    double mean = 0.0;
    double stddev = 0.0;
};

SuiteStat stat_of(const std::vector<double>& xs) {
    SuiteStat s;
    if (xs.empty()) return s;
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double acc = 0.0;
    for (double x : xs) acc += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(acc / static_cast<double>(xs.size()));
    return s;
}

std::vector<SynthCase> bench_cases(Difficulty d, int count, std::uint64_t seed_base) {
    std::vector<SynthCase> cases(static_cast<std::size_t>(count));
    parallel_for(0, count, [&](int i) {
        cases[static_cast<std::size_t>(i)] =
            gen_case(seed_base + static_cast<std::uint64_t>(i), d);
    });
    return cases;
}

// Fitter pipeline PSNR per iteration count, one row per N.
void bench_iterations(std::ostream& out) {
    const int kCases = 8;
    std::vector<SynthCase> cases = bench_cases(Difficulty::mild, kCases / 2, 7000);
    std::vector<SynthCase> more = bench_cases(Difficulty::curved, kCases / 2, 7500);
    cases.insert(cases.end(), std::make_move_iterator(more.begin()),
                 std::make_move_iterator(more.end()));

    std::vector<std::vector<double>> psnr_by_n(6);
    for (auto& v : psnr_by_n) v.resize(cases.size());
    std::vector<double> wall(cases.size());

    parallel_for(0, static_cast<int>(cases.size()), [&](int i) {
        const SynthCase& c = cases[static_cast<std::size_t>(i)];
        RectifyConfig config;
        auto t0 = std::chrono::steady_clock::now();
        FitterProvider provider(c.distorted, c.template_image, config);
        auto [img, trace] = rectify_iterative(c.distorted, provider, config, &c.template_image);
        wall[static_cast<std::size_t>(i)] =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        for (int n = 0; n <= 5; ++n)
            psnr_by_n[static_cast<std::size_t>(n)][static_cast<std::size_t>(i)] =
                to_psnr(trace[static_cast<std::size_t>(n)].loss);
    });

    double mean_wall = stat_of(wall).mean;
    out << "suite,config,mean_psnr,std_psnr,wall_ms\n";
    for (int n = 0; n <= 5; ++n) {
        SuiteStat s = stat_of(psnr_by_n[static_cast<std::size_t>(n)]);
        out << "iterations,N=" << n << ',' << s.mean << ',' << s.stddev << ','
            << mean_wall * (n / 5.0) << '\n';
    }
}

// Fitter pipeline PSNR per segment count, one row per L.
void bench_segments(std::ostream& out) {
    std::vector<SynthCase> cases = bench_cases(Difficulty::curved, 8, 7800);
    out << "suite,config,mean_psnr,std_psnr,wall_ms\n";
    for (int segments : {5, 10, 15, 20}) {
        std::vector<double> scores(cases.size());
        std::vector<double> wall(cases.size());
        parallel_for(0, static_cast<int>(cases.size()), [&](int i) {
            const SynthCase& c = cases[static_cast<std::size_t>(i)];
            RectifyConfig config;
            config.segment_count = segments;
            auto t0 = std::chrono::steady_clock::now();
            FitterProvider provider(c.distorted, c.template_image, config);
            auto [img, trace] =
                rectify_iterative(c.distorted, provider, config, &c.template_image);
            wall[static_cast<std::size_t>(i)] =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
            scores[static_cast<std::size_t>(i)] = to_psnr(trace.back().loss);
        });
        SuiteStat s = stat_of(scores);
        out << "segments,L=" << segments << ',' << s.mean << ',' << s.stddev << ','
            << stat_of(wall).mean << '\n';
    }
}

// Compose-from-original vs chained resampling, one row per variant.
void bench_boundary(std::ostream& out) {
    std::vector<SynthCase> cases = bench_cases(Difficulty::severe, 8, 8200);
    std::vector<double> compose(cases.size()), chained(cases.size());
    std::vector<double> wall_compose(cases.size()), wall_chained(cases.size());

    parallel_for(0, static_cast<int>(cases.size()), [&](int i) {
        const SynthCase& c = cases[static_cast<std::size_t>(i)];
        RectifyConfig config;
        auto t0 = std::chrono::steady_clock::now();
        FitterProvider p1(c.distorted, c.template_image, config);
        auto [img1, tr1] = rectify_iterative(c.distorted, p1, config, &c.template_image);
        auto t1 = std::chrono::steady_clock::now();
        FitterProvider p2(c.distorted, c.template_image, config);
        auto [img2, tr2] = rectify_chained(c.distorted, p2, config, &c.template_image);
        auto t2 = std::chrono::steady_clock::now();
        compose[static_cast<std::size_t>(i)] = to_psnr(mse(img1, c.template_image));
        chained[static_cast<std::size_t>(i)] = to_psnr(mse(img2, c.template_image));
        wall_compose[static_cast<std::size_t>(i)] =
            std::chrono::duration<double, std::milli>(t1 - t0).count();
        wall_chained[static_cast<std::size_t>(i)] =
            std::chrono::duration<double, std::milli>(t2 - t1).count();
    });

    out << "suite,config,mean_psnr,std_psnr,wall_ms\n";
    SuiteStat sc = stat_of(compose);
    SuiteStat sk = stat_of(chained);
    out << "boundary,compose," << sc.mean << ',' << sc.stddev << ','
        << stat_of(wall_compose).mean << '\n';
    out << "boundary,chained," << sk.mean << ',' << sk.stddev << ','
        << stat_of(wall_chained).mean << '\n';
}

int cmd_bench(const std::string& suite, const std::string& out_path) {
    std::ostringstream csv;
    if (suite == "iterations")
        bench_iterations(csv);
    else if (suite == "segments")
        bench_segments(csv);
    else if (suite == "boundary")
        bench_boundary(csv);
    else
        throw ArgumentError("unknown suite '" + suite + "'");
    write_text(out_path, csv.str());
    return 0;
}

// ---------------------------------------------------------------------------
// gridviz

void burn_dot(Image& img, double x_norm, double y_norm, double intensity) {
    int cc = static_cast<int>(std::lround(norm_to_pixel(x_norm, img.width)));
    int cr = static_cast<int>(std::lround(norm_to_pixel(y_norm, img.height)));
    for (int r = cr - 1; r <= cr + 1; ++r)
        for (int c = cc - 1; c <= cc + 1; ++c) {
            if (r < 0 || r >= img.height || c < 0 || c >= img.width) continue;
            for (int ch = 0; ch < img.channels; ++ch)
                img.data[(static_cast<std::size_t>(r) * img.width + c) * img.channels + ch] =
                    intensity;
        }
}

void burn_line(Image& img, Vec2 a, Vec2 b, double intensity) {
    double ax = norm_to_pixel(a.x, img.width), ay = norm_to_pixel(a.y, img.height);
    double bx = norm_to_pixel(b.x, img.width), by = norm_to_pixel(b.y, img.height);
    int steps = static_cast<int>(std::ceil(std::max(std::abs(bx - ax), std::abs(by - ay)))) + 1;
    for (int i = 0; i <= steps; ++i) {
        double t = steps ? static_cast<double>(i) / steps : 0.0;
        int c = static_cast<int>(std::lround(ax + (bx - ax) * t));
        int r = static_cast<int>(std::lround(ay + (by - ay) * t));
        if (r < 0 || r >= img.height || c < 0 || c >= img.width) continue;
        for (int ch = 0; ch < img.channels; ++ch)
            img.data[(static_cast<std::size_t>(r) * img.width + c) * img.channels + ch] =
                intensity;
    }
}

int cmd_gridviz(const std::string& input_path, const std::string& params_path,
                const std::string& out_path) {
    Image img = load_image_file(input_path);
    ParamsFile params = load_params_file(params_path);

    int segments = segment_count_of(params);
    std::vector<Vec2> offsets = control_offsets_of(params);
    ControlPoints base = base_points(segments);
    std::vector<Vec2> points(offsets.size());
    for (std::size_t j = 0; j < points.size(); ++j) points[j] = base.points[j] + offsets[j];

    const std::size_t half = points.size() / 2;

    // Segment strokes between paired endpoints, then the middle polyline,
    // then endpoint dots on top.
    for (std::size_t j = 0; j < half; ++j) burn_line(img, points[j], points[half + j], 0.65);

    if (const auto* fl = std::get_if<FitLineParams>(&params)) {
        const int kSamples = 256;
        for (int i = 0; i < kSamples; ++i) {
            double x0 = -0.5 + static_cast<double>(i) / kSamples;
            double x1 = -0.5 + static_cast<double>(i + 1) / kSamples;
            burn_line(img, {x0, eval_middle_line(fl->poly, x0)},
                      {x1, eval_middle_line(fl->poly, x1)}, 0.3);
        }
    } else {
        for (std::size_t j = 0; j + 1 < half; ++j) {
            Vec2 m0 = (points[j] + points[half + j]) * 0.5;
            Vec2 m1 = (points[j + 1] + points[half + j + 1]) * 0.5;
            burn_line(img, m0, m1, 0.3);
        }
    }

    for (const Vec2& p : points) burn_dot(img, p.x, p.y, 0.0);

    save_image_file(out_path, img);
    return 0;
}

// ---------------------------------------------------------------------------
// synth (case bundles for the other commands to chew on)

int cmd_synth(std::uint64_t seed, const std::string& difficulty, const std::string& out_dir) {
    SynthCase c = gen_case(seed, difficulty_from_string(difficulty));
    save_case(out_dir, c);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Iterative scene-text rectification toolkit"};
    app.require_subcommand(1);

    std::string template_path, params_path, out_path, input_path, src_size = "200x64";
    std::string grad = "analytic", trace_path, suite, difficulty = "curved";
    int iters = 5, cases = 50;
    std::uint64_t seed = 1;
    bool inject_fault = false;

    CLI::App* warp = app.add_subcommand("warp", "Distort a template with fitting-line params");
    warp->add_option("--template", template_path)->required();
    warp->add_option("--params", params_path)->required();
    warp->add_option("--out", out_path)->required();
    warp->add_option("--src-size", src_size, "distorted canvas, WxH");

    CLI::App* rectify = app.add_subcommand("rectify", "Rectify an image with known params");
    rectify->add_option("--input", input_path)->required();
    rectify->add_option("--params", params_path)->required();
    rectify->add_option("--out", out_path)->required();
    rectify->add_option("--iters", iters);
    rectify->add_option("--trace", trace_path);

    CLI::App* fit = app.add_subcommand("fit", "Fit control-point offsets against a template");
    fit->add_option("--input", input_path)->required();
    fit->add_option("--template", template_path)->required();
    fit->add_option("--out-params", out_path)->required();
    fit->add_option("--iters", iters);
    fit->add_option("--grad", grad)->check(CLI::IsMember({"analytic", "fd"}));
    fit->add_option("--trace", trace_path);

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "Analytic vs finite-difference check");
    gradcheck->add_option("--seed", seed);
    gradcheck->add_option("--cases", cases);
    gradcheck->add_flag("--inject-fault", inject_fault)->group("");  // test hook

    CLI::App* bench = app.add_subcommand("bench", "Trend suites, CSV output");
    bench->add_option("--suite", suite)->required()->check(
        CLI::IsMember({"iterations", "segments", "boundary"}));
    bench->add_option("--out", out_path)->required();

    CLI::App* gridviz = app.add_subcommand("gridviz", "Overlay pose geometry on an image");
    gridviz->add_option("--input", input_path)->required();
    gridviz->add_option("--params", params_path)->required();
    gridviz->add_option("--out", out_path)->required();

    CLI::App* synth = app.add_subcommand("synth", "Write a synthetic case bundle");
    synth->add_option("--seed", seed);
    synth->add_option("--difficulty", difficulty)
        ->check(CLI::IsMember({"mild", "perspective", "curved", "severe"}));
    synth->add_option("--out-dir", out_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (warp->parsed()) return cmd_warp(template_path, params_path, out_path, src_size);
        if (rectify->parsed())
            return cmd_rectify(input_path, params_path, out_path, iters, trace_path);
        if (fit->parsed())
            return cmd_fit(input_path, template_path, out_path, iters, grad, trace_path);
        if (gradcheck->parsed()) return cmd_gradcheck(seed, cases, inject_fault);
        if (bench->parsed()) return cmd_bench(suite, out_path);
        if (gridviz->parsed()) return cmd_gridviz(input_path, params_path, out_path);
        if (synth->parsed()) return cmd_synth(seed, difficulty, out_path);
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const ProviderError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
