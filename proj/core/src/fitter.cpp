#include "esir/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>

#include <json.hpp>

#include "esir/error.hpp"
#include "esir/sampler.hpp"
#include "esir/synth.hpp"
#include "esir/tps.hpp"

namespace esir {

namespace {

// Shared per-fit state: the spline system on the fixed base layout plus the
// cardinal-weight table that makes the output grid a plain linear map of the
// control targets.
struct Workspace {
    RectifyConfig cfg;
    ControlPoints base;
    TpsSolver solver;
    std::vector<double> psi;

    explicit Workspace(const RectifyConfig& config)
        : cfg(config),
          base(base_points(config.segment_count)),
          solver(base, config.lambda),
          psi(solver.cardinal_weight_table(config.out_w, config.out_h)) {}

    Grid grid_at(const std::vector<Vec2>& delta) const {
        const int n2 = 2 * cfg.segment_count;
        const std::size_t px_count = static_cast<std::size_t>(cfg.out_w) * cfg.out_h;
        Grid g{cfg.out_w, cfg.out_h, {}};
        g.coords.resize(px_count);
        for (std::size_t px = 0; px < px_count; ++px) {
            const double* w = &psi[px * static_cast<std::size_t>(n2)];
            double gx = 0.0;
            double gy = 0.0;
            for (int j = 0; j < n2; ++j) {
                gx += w[j] * (base.points[static_cast<std::size_t>(j)].x + delta[static_cast<std::size_t>(j)].x);
                gy += w[j] * (base.points[static_cast<std::size_t>(j)].y + delta[static_cast<std::size_t>(j)].y);
            }
            g.coords[px] = {gx, gy};
        }
        return g;
    }
};

// mask, when present, flags output pixels (not individual channels).
double loss_at(const Workspace& ws, const Image& original, const std::vector<Vec2>& delta,
               const Image& tmpl, const std::vector<char>* mask) {
    Image out = sample(original, ws.grid_at(delta), 0.0);
    if (!mask) return mse(out, tmpl);
    double se = 0.0;
    std::size_t kept = 0;
    const std::size_t px_count = static_cast<std::size_t>(out.width) * out.height;
    for (std::size_t px = 0; px < px_count; ++px) {
        if (!(*mask)[px]) continue;
        ++kept;
        for (int ch = 0; ch < out.channels; ++ch) {
            double d = out.data[px * out.channels + ch] - tmpl.data[px * out.channels + ch];
            se += d * d;
        }
    }
    if (kept == 0) throw NumericalError("loss mask excluded every pixel");
    return se / (static_cast<double>(kept) * out.channels);
}

std::vector<double> analytic_grad(const Workspace& ws, const Image& original,
                                  const std::vector<Vec2>& delta, const Image& tmpl,
                                  const std::vector<char>* mask) {
    const int n2 = 2 * ws.cfg.segment_count;
    SampledJacobian sj = sample_with_jacobian(original, ws.grid_at(delta), 0.0);
    const Image& out = sj.output;
    const std::size_t px_count = static_cast<std::size_t>(out.width) * out.height;

    std::size_t kept = px_count;
    if (mask) {
        kept = 0;
        for (std::size_t px = 0; px < px_count; ++px)
            if ((*mask)[px]) ++kept;
        if (kept == 0) throw NumericalError("loss mask excluded every pixel");
    }
    const double scale = 2.0 / (static_cast<double>(kept) * out.channels);

    std::vector<double> grad(static_cast<std::size_t>(2) * n2, 0.0);
    for (std::size_t px = 0; px < px_count; ++px) {
        if (mask && !(*mask)[px]) continue;
        double ax = 0.0;
        double ay = 0.0;
        for (int ch = 0; ch < out.channels; ++ch) {
            std::size_t i = px * out.channels + ch;
            double r = scale * (out.data[i] - tmpl.data[i]);
            ax += r * sj.dgx[i];
            ay += r * sj.dgy[i];
        }
        const double* w = &ws.psi[px * static_cast<std::size_t>(n2)];
        for (int j = 0; j < n2; ++j) {
            grad[static_cast<std::size_t>(2 * j)] += ax * w[j];
            grad[static_cast<std::size_t>(2 * j + 1)] += ay * w[j];
        }
    }
    return grad;
}

std::vector<double> fd_grad(const Workspace& ws, const Image& original,
                            const std::vector<Vec2>& delta, const Image& tmpl, double h,
                            const std::vector<char>* mask) {
    std::vector<double> grad(delta.size() * 2, 0.0);
    std::vector<Vec2> probe = delta;
    for (std::size_t k = 0; k < grad.size(); ++k) {
        double& coord = (k % 2 == 0) ? probe[k / 2].x : probe[k / 2].y;
        double saved = coord;
        coord = saved + h;
        double lp = loss_at(ws, original, probe, tmpl, mask);
        coord = saved - h;
        double lm = loss_at(ws, original, probe, tmpl, mask);
        coord = saved;
        grad[k] = (lp - lm) / (2.0 * h);
    }
    return grad;
}

void check_dimensions(const Image& tmpl, const RectifyConfig& config) {
    if (tmpl.width != config.out_w || tmpl.height != config.out_h)
        throw ArgumentError("template dimensions do not match the configured output");
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

double linf(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

void FitConfig::validate() const {
    if (max_steps < 0) throw ArgumentError("max_steps must be >= 0");
    if (!(step_size > 0.0)) throw ArgumentError("step_size must be positive");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
        throw ArgumentError("backtrack_factor must lie in (0, 1)");
    if (max_backtracks < 0) throw ArgumentError("max_backtracks must be >= 0");
    if (!(fd_step > 0.0) || fd_step >= step_size)
        throw ArgumentError("fd_step must be positive and below step_size");
    if (!(rel_tol >= 0.0)) throw ArgumentError("rel_tol must be >= 0");
}

double loss(const Image& original, const ParamState& state, const Image& template_image,
            const RectifyConfig& config) {
    config.validate();
    check_dimensions(template_image, config);
    return mse(rectify_once(original, state, config), template_image);
}

std::vector<double> grad_loss(const Image& original, const ParamState& state,
                              const Image& template_image, const RectifyConfig& config,
                              GradMode mode, double fd_step) {
    config.validate();
    check_dimensions(template_image, config);
    if (state.delta.size() != static_cast<std::size_t>(2) * config.segment_count)
        throw ArgumentError("state offset count does not match the configured segments");
    Workspace ws(config);
    if (mode == GradMode::analytic)
        return analytic_grad(ws, original, state.delta, template_image, nullptr);
    return fd_grad(ws, original, state.delta, template_image, fd_step, nullptr);
}

std::string to_json_lines(const std::vector<FitStep>& trace) {
    std::string out;
    for (const FitStep& s : trace) {
        nlohmann::ordered_json j;
        j["step"] = s.step;
        j["loss"] = s.loss;
        j["step_size"] = s.step_size;
        out += j.dump();
        out += '\n';
    }
    return out;
}

FitResult fit(const Image& original, const Image& template_image, const RectifyConfig& config,
              const FitConfig& fit_config, const ParamState* start) {
    config.validate();
    fit_config.validate();
    check_dimensions(template_image, config);

    FitResult res;
    res.state = start ? *start : init_state(config.segment_count);
    if (res.state.delta.size() != static_cast<std::size_t>(2) * config.segment_count)
        throw ArgumentError("start state offset count does not match the configured segments");

    Workspace ws(config);
    double cur = loss_at(ws, original, res.state.delta, template_image, nullptr);
    if (!std::isfinite(cur)) throw NumericalError("non-finite loss at step 0");

    // Cold starts first sweep the two global modes, vertical contraction and
    // horizontal compression, and descend from the best sample. Text sits
    // well inside the source frame, so the basin around the all-zero state is
    // separated from the solution by more than one glyph height and plain
    // descent cannot cross it.
    bool cold = true;
    for (Vec2 d : res.state.delta) cold = cold && d.x == 0.0 && d.y == 0.0;
    if (cold) {
        const ControlPoints base = base_points(config.segment_count);
        const std::size_t half = res.state.delta.size() / 2;
        for (double contract = 0.0; contract <= 0.201; contract += 0.04) {
            for (double squeeze = 0.0; squeeze <= 0.241; squeeze += 0.06) {
                std::vector<Vec2> cand(res.state.delta.size());
                for (std::size_t j = 0; j < cand.size(); ++j)
                    cand[j] = {-squeeze * base.points[j].x, j < half ? contract : -contract};
                double l = loss_at(ws, original, cand, template_image, nullptr);
                if (std::isfinite(l) && l < cur) {
                    cur = l;
                    res.state.delta = std::move(cand);
                }
            }
        }
    }
    res.trace.push_back({0, cur, 0.0});

    double try_step = fit_config.step_size;
    for (int k = 1; k <= fit_config.max_steps; ++k) {
        std::vector<double> g =
            fit_config.grad_mode == GradMode::analytic
                ? analytic_grad(ws, original, res.state.delta, template_image, nullptr)
                : fd_grad(ws, original, res.state.delta, template_image, fit_config.fd_step,
                          nullptr);
        if (!all_finite(g))
            throw NumericalError("non-finite gradient at step " + std::to_string(k));
        double gnorm2 = 0.0;
        for (double x : g) gnorm2 += x * x;
        if (gnorm2 == 0.0) {
            res.converged = true;
            break;
        }

        double s = try_step;
        bool accepted = false;
        double cand_loss = 0.0;
        std::vector<Vec2> cand;
        for (int t = 0; t <= fit_config.max_backtracks; ++t) {
            cand = res.state.delta;
            for (std::size_t j = 0; j < cand.size(); ++j) {
                cand[j].x -= s * g[2 * j];
                cand[j].y -= s * g[2 * j + 1];
            }
            cand_loss = loss_at(ws, original, cand, template_image, nullptr);
            if (std::isfinite(cand_loss) && cand_loss < cur) {
                accepted = true;
                break;
            }
            s *= fit_config.backtrack_factor;
        }
        if (!accepted) break;  // no descent within the backtracking budget

        double rel = (cur - cand_loss) / std::max(cur, 1e-300);
        res.state.delta = std::move(cand);
        cur = cand_loss;
        res.steps_taken = k;
        res.trace.push_back({k, cur, s});
        try_step = s * 2.0;
        if (rel < fit_config.rel_tol) {
            res.converged = true;
            break;
        }
    }
    res.final_loss = cur;
    return res;
}

FitterProvider::FitterProvider(Image original, Image template_image, RectifyConfig config,
                               FitConfig fit_config)
    : original_(std::move(original)),
      template_(std::move(template_image)),
      config_(config),
      fit_config_(fit_config) {
    config_.validate();
    fit_config_.validate();
    check_dimensions(template_, config_);
}

DeltaEstimate FitterProvider::estimate_delta(const Image&, const ParamState& state) {
    FitResult res = fit(original_, template_, config_, fit_config_, &state);
    for (const FitStep& s : res.trace)
        steps_.push_back({static_cast<int>(steps_.size()), s.loss, s.step_size});
    DeltaEstimate est;
    est.delta.resize(state.delta.size());
    for (std::size_t j = 0; j < state.delta.size(); ++j) {
        Vec2 d = res.state.delta[j] - state.delta[j];
        est.delta[j] = {std::clamp(d.x, -kIncrementClamp, kIncrementClamp),
                        std::clamp(d.y, -kIncrementClamp, kIncrementClamp)};
    }

    // Clamping can bend the fitted step into an ascent direction; halve the
    // increment until it does not increase the pipeline loss so iterations
    // are non-worsening, and drop it entirely as a last resort.
    double before = loss(original_, state, template_, config_);
    double after = std::numeric_limits<double>::infinity();
    for (int half = 0; half <= 6; ++half) {
        ParamState candidate = state;
        for (std::size_t j = 0; j < candidate.delta.size(); ++j)
            candidate.delta[j] = candidate.delta[j] + est.delta[j];
        after = loss(original_, candidate, template_, config_);
        if (after <= before) break;
        for (Vec2& d : est.delta) d = d * 0.5;
    }
    if (after > before) {
        for (Vec2& d : est.delta) d = {0.0, 0.0};
        after = before;
    }
    est.diagnostic = after;
    return est;
}

GradCheckReport gradient_check(std::uint64_t seed, int case_count,
                               const GradCheckOptions& options) {
    if (case_count < 0) throw ArgumentError("case count must be >= 0");
    constexpr Difficulty kCycle[4] = {Difficulty::mild, Difficulty::perspective,
                                      Difficulty::curved, Difficulty::severe};
    GradCheckReport rep;
    RectifyConfig cfg;
    Workspace ws(cfg);

    for (int i = 0; i < case_count; ++i) {
        std::uint64_t case_seed = seed + static_cast<std::uint64_t>(i);
        SynthCase c = gen_case(case_seed, kCycle[i % 4]);

        // A partially corrected pose with per-point jitter: generic enough to
        // exercise every tap pattern without leaving the image.
        std::mt19937_64 eng(case_seed ^ 0xc2b2ae3d27d4eb4fULL);
        auto uniform = [&eng](double lo, double hi) {
            return lo + (static_cast<double>(eng() >> 11) * 0x1.0p-53) * (hi - lo);
        };
        double gamma = uniform(0.2, 0.8);
        std::vector<Vec2> delta(c.true_control_offsets.size());
        for (std::size_t j = 0; j < delta.size(); ++j)
            delta[j] = c.true_control_offsets[j] * gamma +
                       Vec2{uniform(-0.02, 0.02), uniform(-0.02, 0.02)};

        std::vector<double> dist =
            cell_boundary_distances(ws.grid_at(delta), c.distorted.width, c.distorted.height);
        std::vector<char> mask(dist.size());
        for (std::size_t px = 0; px < dist.size(); ++px)
            mask[px] = dist[px] >= options.margin_px ? 1 : 0;

        std::vector<double> ga =
            analytic_grad(ws, c.distorted, delta, c.template_image, &mask);
        if (options.corrupt_analytic) {
            std::size_t arg = 0;
            for (std::size_t k = 1; k < ga.size(); ++k)
                if (std::abs(ga[k]) > std::abs(ga[arg])) arg = k;
            ga[arg] = ga[arg] * 1.5 + 0.01;
        }
        std::vector<double> gf = fd_grad(ws, c.distorted, delta, c.template_image,
                                         options.fd_step, &mask);

        double scale = std::max(linf(ga), linf(gf));
        double worst = 0.0;
        double dot = 0.0;
        double na = 0.0;
        double nf = 0.0;
        for (std::size_t k = 0; k < ga.size(); ++k) {
            worst = std::max(worst, std::abs(ga[k] - gf[k]));
            dot += ga[k] * gf[k];
            na += ga[k] * ga[k];
            nf += gf[k] * gf[k];
        }
        double rel = scale > 0.0 ? worst / scale : 0.0;
        double cosine = (na > 0.0 && nf > 0.0) ? dot / std::sqrt(na * nf) : 1.0;

        rep.cases.push_back({case_seed, rel, cosine});
        if (rel > rep.worst_rel_err) {
            rep.worst_rel_err = rel;
            rep.worst_seed = case_seed;
        }
        rep.worst_cosine = std::min(rep.worst_cosine, cosine);
    }
    return rep;
}

}  // namespace esir
