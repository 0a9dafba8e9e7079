#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "dpdlasso/error.hpp"
#include "dpdlasso/stats.hpp"
#include "dpdlasso/types.hpp"

namespace dpdlasso {

inline constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

/// Standard normal error density and its DPD constants.
struct LossKernel {
    double gamma = 0.0;
    double mf_gamma = 1.0;  // integral of f^{1+gamma}

    static LossKernel normal(double gamma)
    {
        detail::require(gamma >= 0.0, ErrorCode::InvalidArgument, "gamma must be >= 0");
        return {gamma, std::exp(-0.5 * gamma * kLog2Pi) / std::sqrt(1.0 + gamma)};
    }

    static double density(double s) { return std::exp(-0.5 * s * s - 0.5 * kLog2Pi); }
    /// Score u = f'/f.
    static double score(double s) { return -s; }
    /// f(s)^gamma, evaluated in log space.
    double density_pow(double s) const { return std::exp(-0.5 * gamma * (s * s + kLog2Pi)); }
};

inline VectorXd residuals(const Dataset& ds, const VectorXd& beta, double intercept = 0.0)
{
    detail::require(beta.size() == ds.p(), ErrorCode::DimensionMismatch, "beta length differs from p");
    return (ds.y() - ds.X() * beta).array() - intercept;
}

/// L_{n,gamma} for normal errors as a function of the residual vector. The
/// gamma = 0 branch is the Gaussian negative log-likelihood (per observation).
inline double dpd_loss_residuals(const Eigen::Ref<const VectorXd>& r, double sigma, double gamma)
{
    detail::require(sigma > 0.0 && std::isfinite(sigma), ErrorCode::NonPositiveSigma, "sigma must be positive");
    detail::require(gamma >= 0.0, ErrorCode::InvalidArgument, "gamma must be >= 0");
    const double n = static_cast<double>(r.size());
    if (gamma == 0.0)
        return r.squaredNorm() / (2.0 * n * sigma * sigma) + std::log(sigma) + 0.5 * kLog2Pi;

    // L = K/sqrt(1+g) + (1 - K (1+g) A)/g, with K = (2 pi)^{-g/2} sigma^{-g},
    // A = mean exp(-g r^2 / (2 sigma^2)). The second term uses expm1 so that
    // small gamma does not lose digits to cancellation.
    const double log_k = -0.5 * gamma * kLog2Pi - gamma * std::log(sigma);
    VectorXd e = -0.5 * gamma * (r.array() / sigma).square();
    const double log_a = stats::log_mean_exp(e);
    const double a = std::log1p(gamma) + log_k + log_a;
    return std::exp(log_k) / std::sqrt(1.0 + gamma) - std::expm1(a) / gamma;
}

inline double dpd_loss(const Dataset& ds, const VectorXd& beta, double sigma, double gamma, double intercept = 0.0)
{
    return dpd_loss_residuals(residuals(ds, beta, intercept), sigma, gamma);
}

/// -log of the mean kernel weight; same beta-minimizer as dpd_loss at fixed sigma.
inline double dpd_loss_alternative_residuals(const Eigen::Ref<const VectorXd>& r, double sigma, double gamma)
{
    detail::require(sigma > 0.0 && std::isfinite(sigma), ErrorCode::NonPositiveSigma, "sigma must be positive");
    detail::require(gamma > 0.0, ErrorCode::GammaZero, "alternative loss is undefined at gamma = 0");
    VectorXd e = -0.5 * gamma * (r.array() / sigma).square();
    return -stats::log_mean_exp(e);
}

inline double dpd_loss_alternative(const Dataset& ds, const VectorXd& beta, double sigma, double gamma,
                                   double intercept = 0.0)
{
    return dpd_loss_alternative_residuals(residuals(ds, beta, intercept), sigma, gamma);
}

/// psi_1(s) = u(s) f^gamma(s).
inline double psi1(double s, double gamma)
{
    return LossKernel::score(s) * LossKernel::normal(gamma).density_pow(s);
}

/// psi_2(s) = {s u(s) + 1} f^gamma(s) - gamma/(gamma+1) M_f.
inline double psi2(double s, double gamma)
{
    const LossKernel k = LossKernel::normal(gamma);
    return (s * LossKernel::score(s) + 1.0) * k.density_pow(s) - gamma / (gamma + 1.0) * k.mf_gamma;
}

/// Gradient of dpd_loss in beta:
/// -(1+gamma) (2 pi)^{-gamma/2} sigma^{-gamma-2} (1/n) sum_i e_i r_i x_i.
inline VectorXd loss_gradient_beta(const Dataset& ds, const VectorXd& beta, double sigma, double gamma,
                                   double intercept = 0.0)
{
    detail::require(sigma > 0.0, ErrorCode::NonPositiveSigma, "sigma must be positive");
    detail::require(gamma >= 0.0, ErrorCode::InvalidArgument, "gamma must be >= 0");
    const VectorXd r = residuals(ds, beta, intercept);
    const double n = static_cast<double>(ds.n());
    const VectorXd w = (-0.5 * gamma * (r.array() / sigma).square()).exp();
    const double scale =
        (1.0 + gamma) * std::exp(-0.5 * gamma * kLog2Pi - (gamma + 2.0) * std::log(sigma)) / n;
    return -scale * (ds.X().transpose() * (w.array() * r.array()).matrix());
}

} // namespace dpdlasso
