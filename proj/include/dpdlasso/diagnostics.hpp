#pragma once

// Influence functions of the adaptive DPD-LASSO functional at the normal
// model. Differentiating the population estimating equations
//
//   (1+g) (2pi)^{-g/2} s^{-g-2} E[e r x_1] = lambda sign(b) / |b~|,
//   E[e (1 - r~^2)] = g / (1+g)^{3/2},       e = exp(-g r~^2 / 2), r~ = r / s,
//
// along (1-eps) F + eps Delta_t and using E[e(1 - g r~^2)] = (1+g)^{-3/2},
// E[e (g r~^2 (1 - r~^2) + 2 r~^2)] = (2 + g^2) (1+g)^{-5/2} gives
//
//   IF_b = (1+g)^{3/2} Exx^{-1} [ r_t e_t x_{1,t} + lambda s^{g+2} (2pi)^{g/2} / (1+g) P0 IF_init ],
//   IF_s = -s (1+g)^{5/2} / (2 + g^2) [ (1 - r~_t^2) e_t - g / (1+g)^{3/2} ].
//
// At g = 0 these are the least-squares influence functions E[xx']^{-1} x r and
// s (r~^2 - 1) / 2.

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dpdlasso/dpd_loss.hpp"
#include "dpdlasso/error.hpp"
#include "dpdlasso/mm_fit.hpp"
#include "dpdlasso/stats.hpp"
#include "dpdlasso/types.hpp"

namespace dpdlasso {

struct IfContext {
    VectorXd beta_true;          // length p; the support is its nonzero set
    double sigma_true = 1.0;
    double gamma = 0.5;
    std::vector<Index> support;  // 0-based
    MatrixXd exx_inv;            // s x s
    VectorXd p0_diag;            // beta_j^{-2} on the support
    /// IF of the initial estimator at the contamination point; unset means the
    /// unpenalized DPD estimator's IF at the same point.
    std::optional<VectorXd> if_initial;
};

/// `exx` is E[x x'] over the support (s x s).
inline IfContext make_if_context(const VectorXd& beta_true, double sigma, double gamma, const MatrixXd& exx,
                                 std::optional<VectorXd> if_initial = std::nullopt)
{
    detail::require(sigma > 0.0, ErrorCode::NonPositiveSigma, "sigma must be positive");
    detail::require(gamma >= 0.0, ErrorCode::InvalidArgument, "gamma must be >= 0");
    IfContext ctx;
    ctx.beta_true = beta_true;
    ctx.sigma_true = sigma;
    ctx.gamma = gamma;
    for (Index j = 0; j < beta_true.size(); ++j)
        if (beta_true[j] != 0.0) ctx.support.push_back(j);
    const auto s = static_cast<Index>(ctx.support.size());
    detail::require(s >= 1, ErrorCode::ZeroTrueCoefficient, "beta_true has no nonzero coordinate");
    detail::require(exx.rows() == s && exx.cols() == s, ErrorCode::DimensionMismatch,
                    "Exx must be s x s over the support");
    Eigen::LLT<MatrixXd> llt(exx);
    detail::require(llt.info() == Eigen::Success, ErrorCode::InvalidArgument, "Exx must be positive definite");
    ctx.exx_inv = llt.solve(MatrixXd::Identity(s, s));
    ctx.p0_diag.resize(s);
    for (Index k = 0; k < s; ++k) {
        const double b = beta_true[ctx.support[static_cast<std::size_t>(k)]];
        ctx.p0_diag[k] = 1.0 / (b * b);
    }
    if (if_initial)
        detail::require(if_initial->size() == s, ErrorCode::DimensionMismatch, "if_initial must have length s");
    ctx.if_initial = std::move(if_initial);
    return ctx;
}

/// Plug-in E[x x'] over `support` from the sample second moment of X.
inline MatrixXd sample_exx(const MatrixXd& X, const std::vector<Index>& support)
{
    const auto s = static_cast<Index>(support.size());
    MatrixXd sub(X.rows(), s);
    for (Index k = 0; k < s; ++k) sub.col(k) = X.col(support[static_cast<std::size_t>(k)]);
    return sub.transpose() * sub / static_cast<double>(X.rows());
}

namespace detail {

inline void check_if_args(const IfContext& ctx, const VectorXd& x_t)
{
    require(x_t.size() == ctx.beta_true.size(), ErrorCode::DimensionMismatch, "x_t length differs from p");
    for (Index j : ctx.support)
        require(ctx.beta_true[j] != 0.0, ErrorCode::ZeroTrueCoefficient, "zero coefficient on the support");
}

inline VectorXd support_part(const VectorXd& x, const std::vector<Index>& support)
{
    VectorXd out(static_cast<Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k) out[static_cast<Index>(k)] = x[support[k]];
    return out;
}

} // namespace detail

/// IF of the support block of beta; the off-support block is identically 0.
inline VectorXd if_beta1(const IfContext& ctx, double y_t, const VectorXd& x_t, double lambda)
{
    detail::check_if_args(ctx, x_t);
    const double g = ctx.gamma;
    const double s = ctx.sigma_true;
    const double r = y_t - x_t.dot(ctx.beta_true);
    const VectorXd x1 = detail::support_part(x_t, ctx.support);
    const double e = std::exp(-0.5 * g * (r / s) * (r / s));
    const double lead = std::pow(1.0 + g, 1.5);
    const VectorXd score = r * e * x1;
    const VectorXd unpenalized = lead * (ctx.exx_inv * score);
    if (lambda == 0.0) return unpenalized;
    const VectorXd& init = ctx.if_initial ? *ctx.if_initial : unpenalized;
    const double c = lambda * std::exp((g + 2.0) * std::log(s) + 0.5 * g * kLog2Pi) / (1.0 + g);
    return lead * (ctx.exx_inv * (score + c * ctx.p0_diag.cwiseProduct(init)));
}

inline double if_sigma(double sigma, double gamma, double y_t, const VectorXd& x_t, const VectorXd& beta)
{
    detail::require(sigma > 0.0, ErrorCode::NonPositiveSigma, "sigma must be positive");
    detail::require(gamma >= 0.0, ErrorCode::InvalidArgument, "gamma must be >= 0");
    detail::require(x_t.size() == beta.size(), ErrorCode::DimensionMismatch, "x_t length differs from beta");
    const double rt = (y_t - x_t.dot(beta)) / sigma;
    const double bracket = (1.0 - rt * rt) * std::exp(-0.5 * gamma * rt * rt) - gamma / std::pow(1.0 + gamma, 1.5);
    return -sigma * std::pow(1.0 + gamma, 2.5) / (2.0 + gamma * gamma) * bracket;
}

struct NumericIf {
    VectorXd beta;   // length p, raw coordinates
    double sigma = 0.0;
    double eps_effective = 0.0;
};

/// Finite-contamination IF proxy: ceil(eps n) copies of (y_t, x_t) are appended
/// and the change in (beta, sigma) is divided by the realized mass k / (n + k).
/// The fit runs on the raw coordinates with the intercept free.
inline NumericIf numeric_if_check(const Dataset& ds_clean, const FitConfig& cfg, double y_t, const VectorXd& x_t,
                                  double eps = 1e-3)
{
    detail::require(eps > 0.0 && eps < 1.0, ErrorCode::InvalidArgument, "eps must lie in (0, 1)");
    detail::require(x_t.size() == ds_clean.p(), ErrorCode::DimensionMismatch, "x_t length differs from p");
    const Dataset clean = ds_clean.standardized() ? [&] {
        auto [y, X] = destandardize(ds_clean);
        return Dataset::raw(std::move(y), std::move(X));
    }() : ds_clean;
    const Index n = clean.n();
    const auto k = static_cast<Index>(std::ceil(eps * static_cast<double>(n)));

    VectorXd y(n + k);
    MatrixXd X(n + k, clean.p());
    y.head(n) = clean.y();
    X.topRows(n) = clean.X();
    for (Index i = n; i < n + k; ++i) {
        y[i] = y_t;
        X.row(i) = x_t.transpose();
    }
    const Dataset dirty = Dataset::raw(std::move(y), std::move(X));

    FitConfig c = cfg;
    c.initializer = Initializer::HuberLassoIrls;
    const InitialEstimate init = initialize(clean, c);
    const FittedModel base = fit(clean, c, init, init);
    const InitialEstimate warm{base.beta_std, base.intercept_std, base.sigma};
    const FittedModel cont = fit(dirty, c, warm, init);

    NumericIf out;
    out.eps_effective = static_cast<double>(k) / static_cast<double>(n + k);
    out.beta = (cont.beta - base.beta) / out.eps_effective;
    out.sigma = (cont.sigma - base.sigma) / out.eps_effective;
    return out;
}

/// tau-scale of a sample: MAD start, W_{4.5} location, rho_3 scale.
inline double tau_scale(const VectorXd& x)
{
    detail::require(x.size() >= 2, ErrorCode::InvalidArgument, "tau_scale needs n >= 2");
    constexpr double c1 = 4.5;
    constexpr double c2 = 3.0;
    const double med = stats::median(x);
    const double s0 = stats::mad(x);
    detail::require(s0 > 0.0, ErrorCode::DegenerateMad, "MAD of the sample is zero");
    double num = 0.0;
    double den = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
        const double u = (x[i] - med) / s0 / c1;
        const double w = std::abs(u) <= 1.0 ? (1.0 - u * u) * (1.0 - u * u) : 0.0;
        num += w * x[i];
        den += w;
    }
    const double mu = num / den;
    double rho = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
        const double z = (x[i] - mu) / s0;
        rho += std::min(z * z, c2 * c2);
    }
    return s0 * s0 * rho / static_cast<double>(x.size());
}

/// RMSE of the floor(keep * n) smallest |r_i|.
inline double trimmed_rmse(const VectorXd& r, double keep = 0.9)
{
    detail::require(r.size() >= 1, ErrorCode::InvalidArgument, "residuals are empty");
    detail::require(keep > 0.0 && keep <= 1.0, ErrorCode::InvalidArgument, "keep must lie in (0, 1]");
    const auto m = static_cast<Index>(std::floor(keep * static_cast<double>(r.size())));
    detail::require(m >= 1, ErrorCode::EmptyAfterTrim, "no residual survives trimming");
    std::vector<double> a(static_cast<std::size_t>(r.size()));
    for (Index i = 0; i < r.size(); ++i) a[static_cast<std::size_t>(i)] = std::abs(r[i]);
    std::sort(a.begin(), a.end());
    double s = 0.0;
    for (Index i = 0; i < m; ++i) s += a[static_cast<std::size_t>(i)] * a[static_cast<std::size_t>(i)];
    return std::sqrt(s / static_cast<double>(m));
}

} // namespace dpdlasso
