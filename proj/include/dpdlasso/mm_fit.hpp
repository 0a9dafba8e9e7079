#pragma once

// AW-DPD-LASSO estimator for normal errors.
//
// beta step. At fixed sigma, with nu_i = exp(-gamma r_i^2 / (2 sigma^2)) and
// A = mean(nu), the loss reads L = c0 - c1 A(beta) with
// c1 = (1+gamma)/gamma (2 pi)^{-gamma/2} sigma^{-gamma}. Write A = exp(-Lt)
// where Lt = -log A is the alternative loss. Jensen over the normalized weights
// mu_i = nu_i / sum(nu) bounds Lt by (gamma / (2 sigma^2)) sum_i mu_i r_i^2 plus
// a constant, tangent at the current iterate, and -c1 exp(-t) is concave and
// increasing in t, so its tangent line bounds it from above. Chaining both:
//
//   L(beta) <= const + K sum_i nu_i^(m) r_i^2,
//   K = (1+gamma) (2 pi)^{-gamma/2} sigma^{-gamma-2} / (2 n),
//
// with equality at beta^(m). After y*_i = sqrt(mu_i / sigma) y_i (same for x_i),
// sum (y* - x*'beta)^2 = (1 / (sigma n A)) sum nu_i r_i^2, so minimizing the
// majorizer of L + lambda * pen is the weighted LASSO
//
//   sum (y* - x*'beta)^2 + lambda_eff * pen,
//   lambda_eff = 2 lambda sigma^{gamma+1} (2 pi)^{gamma/2} / ((1+gamma) A).
//
// At gamma = 0 the bound is exact and lambda_eff = 2 sigma lambda.
//
// sigma step. One application of the fixed-point map for the sigma estimating
// equation, accepted when it does not increase Q and otherwise shortened
// geometrically toward the previous sigma.

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dpdlasso/dpd_loss.hpp"
#include "dpdlasso/error.hpp"
#include "dpdlasso/stats.hpp"
#include "dpdlasso/types.hpp"
#include "dpdlasso/weights.hpp"
#include "dpdlasso/wlasso.hpp"

namespace dpdlasso {

inline constexpr double kSigmaFloor = 1e-8;
inline constexpr double kSigmaCollapse = 1e-2;  // relative to the starting sigma
inline constexpr double kHuberC = 1.345;

struct MmState {
    VectorXd beta_current;
    double intercept = 0.0;
    double sigma_current = 1.0;
    VectorXd beta_tilde;
    VectorXd mu;
    double q_value = 0.0;
    int outer_iter = 0;
};

struct MmWeights {
    VectorXd mu;        // normalized, sums to 1
    double log_mean;    // log of mean(nu)
};

/// mu_i proportional to exp(-(gamma/2) (r_i / sigma)^2), normalized with max subtraction.
inline MmWeights compute_mm_weights_residuals(const Eigen::Ref<const VectorXd>& r, double sigma, double gamma)
{
    detail::require(sigma > 0.0, ErrorCode::NonPositiveSigma, "sigma must be positive");
    detail::require(gamma >= 0.0, ErrorCode::InvalidArgument, "gamma must be >= 0");
    const VectorXd e = -0.5 * gamma * (r.array() / sigma).square();
    const double m = e.maxCoeff();
    VectorXd mu = (e.array() - m).exp();
    const double total = mu.sum();
    // The maximal entry contributes exactly 1 to `total`.
    mu /= total;
    return {std::move(mu), m + std::log(total) - std::log(static_cast<double>(r.size()))};
}

inline VectorXd compute_mm_weights(const Dataset& ds, const VectorXd& beta, double sigma, double gamma,
                                   double intercept = 0.0)
{
    return compute_mm_weights_residuals(residuals(ds, beta, intercept), sigma, gamma).mu;
}

/// Rows scaled by sqrt(mu_i / sigma).
inline std::pair<VectorXd, MatrixXd> transform_data(const Dataset& ds, const VectorXd& mu, double sigma)
{
    detail::require(mu.size() == ds.n(), ErrorCode::DimensionMismatch, "mu length differs from n");
    detail::require(sigma > 0.0, ErrorCode::NonPositiveSigma, "sigma must be positive");
    const VectorXd s = (mu.array() / sigma).sqrt();
    VectorXd y_star = s.array() * ds.y().array();
    MatrixXd X_star = s.asDiagonal() * ds.X();
    return {std::move(y_star), std::move(X_star)};
}

/// lambda on the Q scale -> lambda on the subproblem scale.
inline double lambda_bridge(double lambda, double sigma, double gamma, double log_mean_nu)
{
    const double log_factor = std::log(2.0) + (gamma + 1.0) * std::log(sigma) + 0.5 * gamma * kLog2Pi -
                              std::log1p(gamma) - log_mean_nu;
    return lambda * std::exp(log_factor);
}

/// Q(beta, sigma) = L_{n,gamma}(beta, sigma) + lambda * sum_j w_j |beta_j|.
inline double objective(const Dataset& ds, const VectorXd& beta, double intercept, double sigma, double gamma,
                        double lambda, const PenaltyWeights& weights)
{
    return dpd_loss(ds, beta, sigma, gamma, intercept) + lambda * weights.penalty(beta);
}

/// Weights used for a fit at `lambda` anchored at `anchor`. At lambda = 0 the
/// penalty vanishes and no coordinate is excluded.
inline PenaltyWeights fit_weights(const WeightScheme& scheme, const VectorXd& anchor, double lambda)
{
    if (!(lambda > 0.0)) return PenaltyWeights::constant(anchor.size(), 1.0);
    return compute_weights(scheme, anchor, lambda);
}

struct BetaUpdate {
    VectorXd beta;
    double intercept = 0.0;
    bool solver_converged = true;
};

namespace detail {

struct Subproblem {
    WlsProblem prob;
    double lambda_eff = 0.0;
};

/// Weighted LASSO majorizing Q at (beta, intercept, sigma); the last column is
/// the unpenalized intercept.
inline Subproblem build_subproblem(const Dataset& ds, const VectorXd& beta, double intercept, double sigma,
                                   double gamma, double lambda, const PenaltyWeights& weights)
{
    const VectorXd r = residuals(ds, beta, intercept);
    const MmWeights mm = compute_mm_weights_residuals(r, sigma, gamma);
    const VectorXd s = (mm.mu.array() / sigma).sqrt();
    Subproblem sub;
    sub.prob.y = s.array() * ds.y().array();
    sub.prob.X.resize(ds.n(), ds.p() + 1);
    sub.prob.X.leftCols(ds.p()) = s.asDiagonal() * ds.X();
    sub.prob.X.col(ds.p()) = s;
    sub.lambda_eff = lambda_bridge(lambda, sigma, gamma, mm.log_mean);
    sub.prob.lambda = sub.lambda_eff;
    sub.prob.weights = weights.with_unpenalized();
    VectorXd warm(ds.p() + 1);
    warm.head(ds.p()) = beta;
    warm[ds.p()] = intercept;
    sub.prob.warm_start = std::move(warm);
    return sub;
}

} // namespace detail

/// One MM step in (beta, intercept) at the state's sigma. Never increases Q.
inline BetaUpdate update_beta(const MmState& state, const Dataset& ds, const FitConfig& cfg,
                              const PenaltyWeights& weights)
{
    auto sub = detail::build_subproblem(ds, state.beta_current, state.intercept, state.sigma_current, cfg.gamma,
                                        cfg.lambda, weights);
    if (!std::isfinite(sub.lambda_eff)) {
        // Every penalized coordinate is shut down; only the intercept moves.
        sub.prob.lambda = std::numeric_limits<double>::max();
    }
    const WlsResult res = solve_weighted_lasso(sub.prob, cfg.epsilon_inner, cfg.max_inner_iter);
    BetaUpdate out{res.beta.head(ds.p()), res.beta[ds.p()], res.converged};
    if (!std::isfinite(sub.lambda_eff)) out.beta.setZero();

    const double q_old = objective(ds, state.beta_current, state.intercept, state.sigma_current, cfg.gamma,
                                   cfg.lambda, weights);
    const double q_new = objective(ds, out.beta, out.intercept, state.sigma_current, cfg.gamma, cfg.lambda, weights);
    if (!(q_new <= q_old)) {
        out.beta = state.beta_current;
        out.intercept = state.intercept;
    }
    return out;
}

enum class SigmaStatus { Ok, DegenerateScale, ZeroResiduals };

struct SigmaUpdate {
    double sigma = 1.0;
    SigmaStatus status = SigmaStatus::Ok;
};

/// sigma^2 = [mean(w) - gamma/(gamma+1)^{3/2}]^{-1} mean(w r^2), w at sigma_prev.
inline SigmaUpdate update_sigma_residuals(const Eigen::Ref<const VectorXd>& r, double sigma_prev, double gamma)
{
    detail::require(sigma_prev > 0.0, ErrorCode::NonPositiveSigma, "sigma_prev must be positive");
    detail::require(gamma >= 0.0, ErrorCode::InvalidArgument, "gamma must be >= 0");
    const double n = static_cast<double>(r.size());
    const VectorXd w = (-0.5 * gamma * (r.array() / sigma_prev).square()).exp();
    const double bracket = w.sum() / n - gamma / std::pow(gamma + 1.0, 1.5);
    if (!(bracket > 0.0)) return {sigma_prev, SigmaStatus::DegenerateScale};
    const double s2 = (w.array() * r.array().square()).sum() / n / bracket;
    if (!(s2 > 0.0)) return {kSigmaFloor, SigmaStatus::ZeroResiduals};
    return {std::max(std::sqrt(s2), kSigmaFloor), SigmaStatus::Ok};
}

inline double update_sigma(const Dataset& ds, const VectorXd& beta, double sigma_prev, double gamma,
                           double intercept = 0.0)
{
    const SigmaUpdate u = update_sigma_residuals(residuals(ds, beta, intercept), sigma_prev, gamma);
    detail::require(u.status != SigmaStatus::DegenerateScale, ErrorCode::InvalidArgument,
                    "DegenerateScale: every observation is flagged as an outlier");
    return u.sigma;
}

/// Left-hand side of the sigma estimating equation:
/// mean(nu) - mean(nu s^2), s = r / sigma. Equals gamma/(gamma+1)^{3/2} at a solution.
inline double sigma_equation_lhs(const Eigen::Ref<const VectorXd>& r, double sigma, double gamma)
{
    const VectorXd s2 = (r.array() / sigma).square();
    const VectorXd nu = (-0.5 * gamma * s2.array()).exp();
    return (nu.sum() - (nu.array() * s2.array()).sum()) / static_cast<double>(r.size());
}

namespace detail {

/// Safeguarded sigma step: the fixed-point candidate, halved in log-space until
/// Q does not increase. Falls back to doubling/halving when the map is degenerate.
inline std::pair<double, bool> sigma_step(const Dataset& ds, const VectorXd& beta, double intercept, double sigma,
                                          double gamma)
{
    const VectorXd r = residuals(ds, beta, intercept);
    const double q_old = dpd_loss_residuals(r, sigma, gamma);
    const SigmaUpdate u = update_sigma_residuals(r, sigma, gamma);
    const bool degenerate = u.status == SigmaStatus::DegenerateScale;

    std::vector<double> candidates;
    if (!degenerate) {
        const double log_ratio = std::log(u.sigma / sigma);
        for (int k = 0; k < 30; ++k) candidates.push_back(sigma * std::exp(std::ldexp(log_ratio, -k)));
    } else {
        candidates = {2.0 * sigma, 0.5 * sigma};
    }
    for (double c : candidates) {
        if (!(c >= kSigmaFloor) || !std::isfinite(c)) continue;
        if (dpd_loss_residuals(r, c, gamma) <= q_old) return {c, degenerate};
    }
    return {sigma, degenerate};
}

} // namespace detail

namespace detail {

inline FittedModel finish_model(const Dataset& ds, const FitConfig& cfg, const VectorXd& beta, double intercept,
                                double sigma, std::vector<double> trace, bool converged, bool degenerate, int iters)
{
    FittedModel m;
    m.beta_std = beta;
    m.intercept_std = intercept;
    auto [b, c] = destandardize_coefficients(beta, ds, intercept);
    m.beta = std::move(b);
    m.intercept = c;
    m.sigma = sigma;
    m.support = support_of(beta, cfg.support_threshold);
    m.objective_trace = std::move(trace);
    m.converged = converged;
    m.degenerate_scale = degenerate;
    m.n_outer_iter = iters;
    m.gamma = cfg.gamma;
    m.lambda = cfg.lambda;
    m.weight_scheme = cfg.weight_scheme;
    m.initializer = cfg.initializer;
    return m;
}

} // namespace detail

/// Alternating MM beta step and sigma step, starting at `start`, with adaptive
/// weights anchored at `anchor.beta`. Stops when |Q(m+1) - Q(m)| <= epsilon_outer.
inline FittedModel fit(const Dataset& ds, const FitConfig& cfg, const InitialEstimate& start,
                       const InitialEstimate& anchor)
{
    cfg.validate();
    detail::require(start.beta.size() == ds.p() && anchor.beta.size() == ds.p(), ErrorCode::DimensionMismatch,
                    "initial coefficient length differs from p");
    detail::require(start.sigma > 0.0 && std::isfinite(start.sigma), ErrorCode::NonPositiveSigma,
                    "sigma_init must be positive");

    PenaltyWeights weights = fit_weights(cfg.weight_scheme, anchor.beta, cfg.lambda);

    MmState st;
    st.beta_current = start.beta;
    for (Index j = 0; j < ds.p(); ++j)
        if (weights.is_excluded(j)) st.beta_current[j] = 0.0;
    st.intercept = start.intercept;
    st.sigma_current = start.sigma;
    st.beta_tilde = anchor.beta;
    st.q_value = objective(ds, st.beta_current, st.intercept, st.sigma_current, cfg.gamma, cfg.lambda, weights);

    std::vector<double> trace{st.q_value};
    bool converged = false;
    bool degenerate = false;
    bool map_degenerate = false;
    for (st.outer_iter = 0; st.outer_iter < cfg.max_outer_iter;) {
        const VectorXd beta_prev = st.beta_current;
        const BetaUpdate bu = update_beta(st, ds, cfg, weights);
        st.beta_current = bu.beta;
        st.intercept = bu.intercept;

        auto [sigma_next, degen] = detail::sigma_step(ds, st.beta_current, st.intercept, st.sigma_current, cfg.gamma);
        map_degenerate = degen;
        st.sigma_current = sigma_next;
        ++st.outer_iter;
        if (st.sigma_current < kSigmaCollapse * start.sigma || st.sigma_current <= 10.0 * kSigmaFloor) {
            // A subset is fitted exactly and the loss is unbounded below in sigma.
            degenerate = true;
            trace.push_back(objective(ds, st.beta_current, st.intercept, st.sigma_current, cfg.gamma, cfg.lambda,
                                      weights));
            break;
        }

        if (cfg.reanchor_weights) {
            st.beta_tilde = beta_prev;
            weights = fit_weights(cfg.weight_scheme, st.beta_tilde, cfg.lambda);
            for (Index j = 0; j < ds.p(); ++j)
                if (weights.is_excluded(j)) st.beta_current[j] = 0.0;
        }

        const double q = objective(ds, st.beta_current, st.intercept, st.sigma_current, cfg.gamma, cfg.lambda,
                                   weights);
        trace.push_back(q);
        const double dq = std::abs(q - st.q_value);
        st.q_value = q;
        if (dq <= cfg.epsilon_outer) {
            converged = true;
            break;
        }
    }
    degenerate = degenerate || map_degenerate;
    if (degenerate) converged = false;
    return detail::finish_model(ds, cfg, st.beta_current, st.intercept, st.sigma_current, std::move(trace),
                                converged, degenerate, st.outer_iter);
}

inline FittedModel fit(const Dataset& ds, const FitConfig& cfg, const InitialEstimate& start)
{
    return fit(ds, cfg, start, start);
}

inline FittedModel fit(const Dataset& ds, const FitConfig& cfg, const VectorXd& beta_init, double sigma_init)
{
    return fit(ds, cfg, InitialEstimate{beta_init, 0.0, sigma_init});
}

namespace detail {

/// Weighted LASSO with an unpenalized intercept on rows scaled by sqrt(omega).
inline std::pair<VectorXd, double> weighted_lasso_intercept(const Dataset& ds, const VectorXd& omega, double lambda,
                                                            const VectorXd& beta0, double intercept0,
                                                            double epsilon_inner, int max_inner_iter)
{
    const VectorXd s = omega.array().sqrt();
    WlsProblem prob;
    prob.y = s.array() * ds.y().array();
    prob.X.resize(ds.n(), ds.p() + 1);
    prob.X.leftCols(ds.p()) = s.asDiagonal() * ds.X();
    prob.X.col(ds.p()) = s;
    prob.lambda = lambda;
    prob.weights = PenaltyWeights::constant(ds.p(), 1.0).with_unpenalized();
    VectorXd warm(ds.p() + 1);
    warm.head(ds.p()) = beta0;
    warm[ds.p()] = intercept0;
    prob.warm_start = std::move(warm);
    const WlsResult res = solve_weighted_lasso(prob, epsilon_inner, max_inner_iter);
    return {res.beta.head(ds.p()), res.beta[ds.p()]};
}

/// Mallows-type row weights from coordinatewise robust z-scores: rows whose
/// largest |z| exceeds sqrt(2 log 2p) + 1 are down-weighted quadratically.
inline VectorXd leverage_weights(const MatrixXd& X)
{
    const Index n = X.rows();
    const Index p = X.cols();
    VectorXd zmax = VectorXd::Zero(n);
    for (Index j = 0; j < p; ++j) {
        const double med = stats::median(X.col(j));
        double s = stats::mad(X.col(j));
        if (!(s > 0.0)) s = std::sqrt((X.col(j).array() - X.col(j).mean()).square().mean());
        if (!(s > 0.0)) continue;
        for (Index i = 0; i < n; ++i) zmax[i] = std::max(zmax[i], std::abs(X(i, j) - med) / s);
    }
    const double cut = std::sqrt(2.0 * std::log(2.0 * static_cast<double>(p))) + 1.0;
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) v[i] = zmax[i] <= cut ? 1.0 : (cut / zmax[i]) * (cut / zmax[i]);
    return v;
}

} // namespace detail

/// Starting values for the MM iteration. `provided` is returned unchanged for
/// Initializer::ProvidedCoefficients.
inline InitialEstimate initialize(const Dataset& ds, const FitConfig& cfg, const InitialEstimate* provided = nullptr)
{
    const Index n = ds.n();
    const Index p = ds.p();
    if (cfg.initializer == Initializer::ProvidedCoefficients) {
        detail::require(provided != nullptr, ErrorCode::InvalidArgument, "ProvidedCoefficients needs a start value");
        return *provided;
    }

    const VectorXd ones = VectorXd::Ones(n);
    WlsProblem base;
    base.y = ds.y();
    base.X.resize(n, p + 1);
    base.X.leftCols(p) = ds.X();
    base.X.col(p) = ones;
    base.weights = PenaltyWeights::constant(p, 1.0).with_unpenalized();
    const double lambda0 = 0.01 * lambda_max(base);
    const double eps = 1e-7;

    if (cfg.initializer == Initializer::OlsLassoNonRobust) {
        auto [beta, b0] = detail::weighted_lasso_intercept(ds, ones, lambda0, VectorXd::Zero(p), ds.y().mean(), eps,
                                                           cfg.max_inner_iter);
        const VectorXd r = residuals(ds, beta, b0);
        const double sd = std::sqrt((r.array() - r.mean()).square().sum() / static_cast<double>(n - 1));
        return {std::move(beta), b0, sd > 0.0 ? sd : 1e-4};
    }

    // Huber IRLS with leverage down-weighting and a small l1 penalty.
    const VectorXd lev = detail::leverage_weights(ds.X());
    VectorXd beta = VectorXd::Zero(p);
    double b0 = stats::median(ds.y());
    for (int it = 0; it < 25; ++it) {
        const VectorXd r = residuals(ds, beta, b0);
        double s = stats::mad(r);
        if (!(s > 0.0)) s = 1e-4;
        VectorXd omega(n);
        for (Index i = 0; i < n; ++i) {
            const double a = std::abs(r[i]);
            omega[i] = lev[i] * (a <= kHuberC * s ? 1.0 : kHuberC * s / a);
        }
        std::tie(beta, b0) = detail::weighted_lasso_intercept(ds, omega, lambda0, beta, b0, eps, cfg.max_inner_iter);
    }
    const double sigma = stats::mad(residuals(ds, beta, b0));
    return {std::move(beta), b0, sigma > 0.0 ? sigma : 1e-4};
}

} // namespace dpdlasso
