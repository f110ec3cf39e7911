#include "esir/tps.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "esir/error.hpp"

namespace esir {

namespace {

constexpr double kAutoLambda = 1e-8;
constexpr double kRcondRetry = 1e-12;   // retry with kAutoLambda below this
constexpr double kRcondReject = 1e-14;  // singular even after regularization

// phi(p) = [U(|p - b_1|) ... U(|p - b_2L|), 1, x, y]
void fill_basis_row(const std::vector<Vec2>& base, Vec2 p, Eigen::VectorXd& phi) {
    const auto n = static_cast<Eigen::Index>(base.size());
    for (Eigen::Index j = 0; j < n; ++j)
        phi[j] = kernel_u(distance(p, base[static_cast<std::size_t>(j)]));
    phi[n] = 1.0;
    phi[n + 1] = p.x;
    phi[n + 2] = p.y;
}

}  // namespace

double kernel_u(double r) {
    double r2 = r * r;
    return r2 > 0.0 ? r2 * std::log(r2) : 0.0;
}

struct TpsSolver::Impl {
    ControlPoints base;
    double lambda = 0.0;
    double rcond = 0.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;

    void factorize(double lam) {
        const auto n = static_cast<Eigen::Index>(base.points.size());
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + 3, n + 3);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Vec2 pi = base.points[static_cast<std::size_t>(i)];
            for (Eigen::Index j = 0; j < n; ++j)
                A(i, j) = kernel_u(distance(pi, base.points[static_cast<std::size_t>(j)]));
            A(i, i) += lam;
            A(i, n) = 1.0;
            A(i, n + 1) = pi.x;
            A(i, n + 2) = pi.y;
            A(n, i) = 1.0;
            A(n + 1, i) = pi.x;
            A(n + 2, i) = pi.y;
        }
        lu.compute(A);
        rcond = lu.rcond();
        lambda = lam;
    }
};

TpsSolver::TpsSolver(ControlPoints base, double lambda) : impl_(std::make_unique<Impl>()) {
    if (base.points.size() < 4 || base.points.size() % 2 != 0)
        throw ArgumentError("TPS needs an even number of base points, at least 4, got " +
                            std::to_string(base.points.size()));
    impl_->base = std::move(base);
    if (lambda == 0.0 && impl_->base.degenerate) lambda = kAutoLambda;
    impl_->factorize(lambda);
    if (lambda == 0.0 && !(impl_->rcond > kRcondRetry)) impl_->factorize(kAutoLambda);
    if (!(impl_->rcond > kRcondReject))
        throw NumericalError(
            "TPS system is singular after regularization (rcond " +
                std::to_string(impl_->rcond) + "); base points are collinear or duplicated",
            impl_->rcond > 0.0 ? 1.0 / impl_->rcond : std::numeric_limits<double>::infinity());
}

TpsSolver::~TpsSolver() = default;
TpsSolver::TpsSolver(TpsSolver&&) noexcept = default;
TpsSolver& TpsSolver::operator=(TpsSolver&&) noexcept = default;

TpsCoeffs TpsSolver::solve(const ControlPoints& targets) const {
    const auto& base = impl_->base.points;
    if (targets.points.size() != base.size())
        throw ArgumentError("TPS solve: " + std::to_string(base.size()) + " base points vs " +
                            std::to_string(targets.points.size()) + " targets");

    const auto n = static_cast<Eigen::Index>(base.size());
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        rhs(i, 0) = targets.points[static_cast<std::size_t>(i)].x;
        rhs(i, 1) = targets.points[static_cast<std::size_t>(i)].y;
    }
    Eigen::MatrixXd c = impl_->lu.solve(rhs);

    TpsCoeffs out;
    out.kernel_weights.resize(base.size());
    for (Eigen::Index i = 0; i < n; ++i)
        out.kernel_weights[static_cast<std::size_t>(i)] = {c(i, 0), c(i, 1)};
    for (int k = 0; k < 3; ++k) out.affine[static_cast<std::size_t>(k)] = {c(n + k, 0), c(n + k, 1)};
    out.source_base = base;
    out.lambda = impl_->lambda;
    out.condition = impl_->rcond > 0.0 ? 1.0 / impl_->rcond : std::numeric_limits<double>::infinity();
    return out;
}

std::vector<double> TpsSolver::cardinal_weights(Vec2 p) const {
    const auto n = static_cast<Eigen::Index>(impl_->base.points.size());
    Eigen::VectorXd phi(n + 3);
    fill_basis_row(impl_->base.points, p, phi);
    Eigen::VectorXd psi = impl_->lu.transpose().solve(phi);
    return std::vector<double>(psi.data(), psi.data() + n);
}

std::vector<double> TpsSolver::cardinal_weight_table(int width, int height) const {
    const auto n = static_cast<Eigen::Index>(impl_->base.points.size());
    const Eigen::Index npx = static_cast<Eigen::Index>(width) * height;
    Eigen::MatrixXd phi(n + 3, npx);
    Eigen::VectorXd col(n + 3);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            fill_basis_row(impl_->base.points, pixel_center(c, r, width, height), col);
            phi.col(static_cast<Eigen::Index>(r) * width + c) = col;
        }
    }
    Eigen::MatrixXd psi = impl_->lu.transpose().solve(phi);
    std::vector<double> table(static_cast<std::size_t>(npx) * static_cast<std::size_t>(n));
    for (Eigen::Index px = 0; px < npx; ++px)
        for (Eigen::Index j = 0; j < n; ++j)
            table[static_cast<std::size_t>(px * n + j)] = psi(j, px);
    return table;
}

const ControlPoints& TpsSolver::base() const { return impl_->base; }
double TpsSolver::lambda() const { return impl_->lambda; }
double TpsSolver::condition() const {
    return impl_->rcond > 0.0 ? 1.0 / impl_->rcond : std::numeric_limits<double>::infinity();
}

TpsCoeffs solve(const ControlPoints& base, const ControlPoints& targets, double lambda) {
    return TpsSolver(base, lambda).solve(targets);
}

Vec2 map_point(const TpsCoeffs& coeffs, Vec2 p) {
    Vec2 t = coeffs.affine[0] + coeffs.affine[1] * p.x + coeffs.affine[2] * p.y;
    for (std::size_t j = 0; j < coeffs.source_base.size(); ++j)
        t += coeffs.kernel_weights[j] * kernel_u(distance(p, coeffs.source_base[j]));
    return t;
}

Grid map_grid(const TpsCoeffs& coeffs, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1)
        throw ArgumentError("map_grid target must be at least 1x1");
    Grid g{out_w, out_h, {}};
    g.coords.resize(static_cast<std::size_t>(out_w) * out_h);
    for (int r = 0; r < out_h; ++r)
        for (int c = 0; c < out_w; ++c)
            g.at(r, c) = map_point(coeffs, pixel_center(c, r, out_w, out_h));
    return g;
}

}  // namespace esir
