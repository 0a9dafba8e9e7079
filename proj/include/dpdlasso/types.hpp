#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dpdlasso/error.hpp"
#include "dpdlasso/weights.hpp"

namespace dpdlasso {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace detail {

inline bool all_finite(const Eigen::Ref<const MatrixXd>& m)
{
    return m.allFinite();
}

} // namespace detail

/// Response and design, optionally z-scored. Immutable after construction.
class Dataset {
public:
    /// Wraps raw data without transformation (identity metadata).
    static Dataset raw(VectorXd y, MatrixXd X)
    {
        validate_shape(y, X);
        const Index p = X.cols();
        return Dataset(std::move(y), std::move(X), VectorXd::Zero(p), VectorXd::Ones(p), 0.0, false);
    }

    const VectorXd& y() const { return y_; }
    const MatrixXd& X() const { return X_; }
    const VectorXd& column_means() const { return column_means_; }
    const VectorXd& column_scales() const { return column_scales_; }
    double y_mean() const { return y_mean_; }
    bool standardized() const { return standardized_; }
    Index n() const { return X_.rows(); }
    Index p() const { return X_.cols(); }

    /// Row subset, as a raw dataset in the same coordinates.
    Dataset rows(const std::vector<Index>& idx) const
    {
        VectorXd y(static_cast<Index>(idx.size()));
        MatrixXd X(static_cast<Index>(idx.size()), p());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            y[static_cast<Index>(k)] = y_[idx[k]];
            X.row(static_cast<Index>(k)) = X_.row(idx[k]);
        }
        return Dataset(std::move(y), std::move(X), column_means_, column_scales_, y_mean_, false);
    }

private:
    Dataset(VectorXd y, MatrixXd X, VectorXd means, VectorXd scales, double y_mean, bool standardized)
        : y_(std::move(y)), X_(std::move(X)), column_means_(std::move(means)),
          column_scales_(std::move(scales)), y_mean_(y_mean), standardized_(standardized)
    {}

    static void validate_shape(const VectorXd& y, const MatrixXd& X)
    {
        detail::require(y.size() == X.rows(), ErrorCode::DimensionMismatch,
                        "y has " + std::to_string(y.size()) + " rows, X has " + std::to_string(X.rows()));
        detail::require(X.rows() >= 2, ErrorCode::InvalidArgument, "need at least 2 observations");
        detail::require(X.cols() >= 1, ErrorCode::InvalidArgument, "need at least 1 covariate");
        detail::require(y.allFinite() && X.allFinite(), ErrorCode::NonFiniteInput, "non-finite entry in data");
    }

    friend Dataset standardize(const VectorXd& raw_y, const MatrixXd& raw_X);

    VectorXd y_;
    MatrixXd X_;
    VectorXd column_means_;
    VectorXd column_scales_;
    double y_mean_;
    bool standardized_;
};

/// Centers y and z-scores each column of X (unit sample standard deviation).
inline Dataset standardize(const VectorXd& raw_y, const MatrixXd& raw_X)
{
    Dataset::validate_shape(raw_y, raw_X);
    const Index n = raw_X.rows();
    const Index p = raw_X.cols();
    VectorXd means = raw_X.colwise().mean().transpose();
    VectorXd scales(p);
    MatrixXd X(n, p);
    for (Index j = 0; j < p; ++j) {
        VectorXd c = raw_X.col(j).array() - means[j];
        const double sd = std::sqrt(c.squaredNorm() / static_cast<double>(n - 1));
        if (!(sd > 0.0) || sd <= 1e-14 * (1.0 + std::abs(means[j])))
            detail::fail(ErrorCode::ConstantColumn, "column " + std::to_string(j) + " has zero variance");
        scales[j] = sd;
        X.col(j) = c / sd;
    }
    const double y_mean = raw_y.mean();
    VectorXd y = raw_y.array() - y_mean;
    return Dataset(std::move(y), std::move(X), std::move(means), std::move(scales), y_mean, true);
}

inline Dataset standardize(const Dataset& raw)
{
    return standardize(raw.y(), raw.X());
}

/// Inverse of `standardize`: recovers the raw response and design.
inline std::pair<VectorXd, MatrixXd> destandardize(const Dataset& ds)
{
    if (!ds.standardized()) return {ds.y(), ds.X()};
    MatrixXd X = ds.X();
    for (Index j = 0; j < ds.p(); ++j)
        X.col(j) = X.col(j).array() * ds.column_scales()[j] + ds.column_means()[j];
    VectorXd y = ds.y().array() + ds.y_mean();
    return {std::move(y), std::move(X)};
}

/// Maps standardized coefficients (and standardized-scale intercept) back to
/// the raw design: beta_raw[j] = beta_std[j] / scale[j].
inline std::pair<VectorXd, double> destandardize_coefficients(const VectorXd& beta_std, const Dataset& ds,
                                                              double intercept_std = 0.0)
{
    detail::require(beta_std.size() == ds.p(), ErrorCode::DimensionMismatch, "coefficient length differs from p");
    if (!ds.standardized()) return {beta_std, intercept_std};
    VectorXd beta = beta_std.array() / ds.column_scales().array();
    const double intercept = ds.y_mean() + intercept_std - beta.dot(ds.column_means());
    return {std::move(beta), intercept};
}

enum class Initializer { ProvidedCoefficients, HuberLassoIrls, OlsLassoNonRobust };

inline std::string initializer_name(Initializer init)
{
    switch (init) {
    case Initializer::ProvidedCoefficients: return "provided";
    case Initializer::HuberLassoIrls: return "huber";
    case Initializer::OlsLassoNonRobust: return "ols";
    }
    return "unknown";
}

struct FitConfig {
    double gamma = 0.3;
    /// Regularization on the scale of Q = L_{n,gamma}(beta, sigma) + lambda * sum_j w_j |beta_j|.
    double lambda = 0.0;
    WeightScheme weight_scheme = HardThresholdWeights{};
    Initializer initializer = Initializer::HuberLassoIrls;
    double epsilon_outer = 1e-6;
    double epsilon_inner = 1e-8;
    int max_outer_iter = 100;
    int max_inner_iter = 1000;
    double support_threshold = 1e-8;
    /// Re-anchor the adaptive weights at the previous iterate every outer step.
    bool reanchor_weights = false;

    void validate() const
    {
        detail::require(gamma >= 0.0 && std::isfinite(gamma), ErrorCode::InvalidArgument, "gamma must be >= 0");
        detail::require(lambda >= 0.0 && std::isfinite(lambda), ErrorCode::InvalidArgument, "lambda must be >= 0");
        detail::require(epsilon_outer > 0.0 && epsilon_inner > 0.0, ErrorCode::InvalidArgument,
                        "tolerances must be positive");
        detail::require(max_outer_iter >= 1 && max_inner_iter >= 1, ErrorCode::InvalidArgument,
                        "iteration caps must be positive");
        detail::require(support_threshold > 0.0, ErrorCode::InvalidArgument, "support_threshold must be positive");
        if (const auto* s = std::get_if<ScadWeights>(&weight_scheme))
            detail::require(s->a > 2.0, ErrorCode::InvalidArgument, "SCAD requires a > 2");
    }
};

/// Starting values (and adaptive-weight anchor) for a fit, on the standardized scale.
struct InitialEstimate {
    VectorXd beta;
    double intercept = 0.0;
    double sigma = 1.0;
};

struct FittedModel {
    VectorXd beta;       // raw scale
    VectorXd beta_std;   // standardized scale
    double sigma = 1.0;
    double intercept = 0.0;      // raw scale
    double intercept_std = 0.0;  // standardized scale
    std::vector<Index> support;  // 0-based, |beta_std| > support_threshold
    std::vector<double> objective_trace;
    bool converged = false;
    bool degenerate_scale = false;
    int n_outer_iter = 0;
    double gamma = 0.0;
    double lambda = 0.0;
    WeightScheme weight_scheme = UnitWeights{};
    Initializer initializer = Initializer::ProvidedCoefficients;
    std::string error;  // non-empty when the fit failed

    bool failed() const { return !error.empty(); }
    Index model_size() const { return static_cast<Index>(support.size()); }

    VectorXd predict(const MatrixXd& X_raw) const
    {
        return (X_raw * beta).array() + intercept;
    }
};

inline std::vector<Index> support_of(const VectorXd& beta, double threshold)
{
    std::vector<Index> s;
    for (Index j = 0; j < beta.size(); ++j)
        if (std::abs(beta[j]) > threshold) s.push_back(j);
    return s;
}

struct RegularizationPath {
    VectorXd lambdas;  // strictly decreasing
    std::vector<FittedModel> models;
    VectorXd hbic;
    std::optional<VectorXd> cv_error;
    Index selected_index = 0;

    const FittedModel& selected() const { return models[static_cast<std::size_t>(selected_index)]; }
};

} // namespace dpdlasso
