#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "dpdlasso/error.hpp"
#include "dpdlasso/types.hpp"
#include "dpdlasso/weights.hpp"

namespace dpdlasso {

/// min_beta sum_i (y_i - x_i' beta)^2 + lambda * sum_j w_j |beta_j|
///
/// No 1/n or 1/2 factor. Zero weights are unpenalized, excluded coordinates are
/// held at 0.
struct WlsProblem {
    VectorXd y;
    MatrixXd X;
    double lambda = 0.0;
    PenaltyWeights weights;
    std::optional<VectorXd> warm_start;
};

struct WlsResult {
    VectorXd beta;
    bool converged = false;
    int sweeps = 0;
    double kkt_violation = 0.0;
};

namespace detail {

inline double soft_threshold(double z, double t)
{
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

inline void check_problem(const WlsProblem& prob)
{
    require(prob.X.rows() == prob.y.size(), ErrorCode::DimensionMismatch, "y and X row counts differ");
    require(prob.weights.size() == prob.X.cols(), ErrorCode::DimensionMismatch, "weights length differs from p");
    require(prob.lambda >= 0.0 && std::isfinite(prob.lambda), ErrorCode::InvalidArgument, "lambda must be >= 0");
    require(prob.y.allFinite() && prob.X.allFinite(), ErrorCode::NonFiniteInput, "non-finite subproblem data");
    if (prob.warm_start)
        require(prob.warm_start->size() == prob.X.cols(), ErrorCode::DimensionMismatch, "warm start length differs");
}

} // namespace detail

/// Largest subgradient-optimality violation of `beta` for `prob`.
inline double kkt_violation(const WlsProblem& prob, const VectorXd& beta)
{
    const VectorXd g = 2.0 * (prob.X.transpose() * (prob.y - prob.X * beta));
    double worst = 0.0;
    for (Index j = 0; j < beta.size(); ++j) {
        if (prob.weights.is_excluded(j)) {
            worst = std::max(worst, std::abs(beta[j]));
            continue;
        }
        const double t = prob.lambda * prob.weights.value[j];
        double v;
        if (beta[j] == 0.0)
            v = std::max(0.0, std::abs(g[j]) - t);
        else
            v = std::abs(g[j] - t * (beta[j] > 0.0 ? 1.0 : -1.0));
        worst = std::max(worst, v);
    }
    return worst;
}

inline double wls_objective(const WlsProblem& prob, const VectorXd& beta)
{
    return (prob.y - prob.X * beta).squaredNorm() + prob.lambda * prob.weights.penalty(beta);
}

/// Cyclic coordinate descent over the active set with a full sweep at least
/// every 10 active passes. Terminates when the KKT violation of a full sweep is
/// at most `epsilon_inner`; otherwise returns the last iterate, unconverged.
inline WlsResult solve_weighted_lasso(const WlsProblem& prob, double epsilon_inner = 1e-8, int max_inner_iter = 1000)
{
    detail::check_problem(prob);
    const Index p = prob.X.cols();
    const auto& w = prob.weights;

    VectorXd beta = prob.warm_start ? *prob.warm_start : VectorXd::Zero(p);
    for (Index j = 0; j < p; ++j)
        if (w.is_excluded(j)) beta[j] = 0.0;

    const VectorXd norm2 = prob.X.colwise().squaredNorm().transpose();
    VectorXd r = prob.y - prob.X * beta;

    auto update = [&](Index j) -> double {
        if (w.is_excluded(j)) return 0.0;
        const double old = beta[j];
        double next = 0.0;
        if (norm2[j] > 0.0) {
            const double z = prob.X.col(j).dot(r) + norm2[j] * old;
            next = detail::soft_threshold(z, 0.5 * prob.lambda * w.value[j]) / norm2[j];
        }
        if (next != old) {
            r.noalias() -= (next - old) * prob.X.col(j);
            beta[j] = next;
        }
        return norm2[j] * (next - old) * (next - old);
    };

    WlsResult res;
    std::vector<Index> active;
    active.reserve(static_cast<std::size_t>(p));
    const double step_tol = epsilon_inner * epsilon_inner * 1e-2;

    while (res.sweeps < max_inner_iter) {
        // Full sweep.
        for (Index j = 0; j < p; ++j) update(j);
        ++res.sweeps;
        r = prob.y - prob.X * beta;
        res.kkt_violation = kkt_violation(prob, beta);
        if (res.kkt_violation <= epsilon_inner) {
            res.converged = true;
            break;
        }

        active.clear();
        for (Index j = 0; j < p; ++j)
            if (beta[j] != 0.0 || w.is_unpenalized(j)) active.push_back(j);

        for (int pass = 0; pass < 10 && res.sweeps < max_inner_iter; ++pass) {
            double max_step = 0.0;
            for (Index j : active) max_step = std::max(max_step, update(j));
            ++res.sweeps;
            if (max_step <= step_tol) break;
        }
    }
    res.beta = std::move(beta);
    if (!res.converged) res.kkt_violation = kkt_violation(prob, res.beta);
    return res;
}

/// Rescaled-design route: divide column j by w_j, solve a unit-weight LASSO,
/// divide coordinate j of the solution by w_j. Excluded coordinates are
/// dropped and returned as 0; zero weights are rejected.
inline VectorXd solve_via_rescaling(const VectorXd& y, const MatrixXd& X, double lambda, const PenaltyWeights& weights,
                                    double epsilon_inner = 1e-10, int max_inner_iter = 10000)
{
    detail::require(weights.size() == X.cols(), ErrorCode::DimensionMismatch, "weights length differs from p");
    std::vector<Index> keep;
    for (Index j = 0; j < X.cols(); ++j) {
        if (weights.is_excluded(j)) continue;
        detail::require(weights.value[j] > 0.0, ErrorCode::ZeroWeightInRescaling,
                        "coordinate " + std::to_string(j) + " has zero weight; solve it unpenalized instead");
        keep.push_back(j);
    }
    VectorXd out = VectorXd::Zero(X.cols());
    if (keep.empty()) return out;

    WlsProblem scaled;
    scaled.y = y;
    scaled.X.resize(X.rows(), static_cast<Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k)
        scaled.X.col(static_cast<Index>(k)) = X.col(keep[k]) / weights.value[keep[k]];
    scaled.lambda = lambda;
    scaled.weights = PenaltyWeights::constant(static_cast<Index>(keep.size()), 1.0);
    const WlsResult res = solve_weighted_lasso(scaled, epsilon_inner, max_inner_iter);
    for (std::size_t k = 0; k < keep.size(); ++k)
        out[keep[k]] = res.beta[static_cast<Index>(k)] / weights.value[keep[k]];
    return out;
}

/// Smallest lambda for which the solution is zero on all penalized
/// coordinates: max_j 2 |x_j' r0| / w_j, where r0 is the residual after a least
/// squares fit on the unpenalized columns.
inline double lambda_max(const WlsProblem& prob)
{
    detail::check_problem(prob);
    std::vector<Index> free_cols;
    for (Index j = 0; j < prob.X.cols(); ++j)
        if (prob.weights.is_unpenalized(j)) free_cols.push_back(j);
    VectorXd r0 = prob.y;
    if (!free_cols.empty()) {
        MatrixXd Z(prob.X.rows(), static_cast<Index>(free_cols.size()));
        for (std::size_t k = 0; k < free_cols.size(); ++k) Z.col(static_cast<Index>(k)) = prob.X.col(free_cols[k]);
        const VectorXd coef = Z.colPivHouseholderQr().solve(prob.y);
        r0 = prob.y - Z * coef;
    }
    double lam = 0.0;
    for (Index j = 0; j < prob.X.cols(); ++j) {
        if (prob.weights.is_excluded(j) || prob.weights.value[j] == 0.0) continue;
        lam = std::max(lam, 2.0 * std::abs(prob.X.col(j).dot(r0)) / prob.weights.value[j]);
    }
    return lam;
}

} // namespace dpdlasso
