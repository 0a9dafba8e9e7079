#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "dpdlasso/error.hpp"

namespace dpdlasso {

/// w(s) = 1 for every coordinate: plain DPD-LASSO.
struct UnitWeights {};

/// w(s) = 1/s for s != 0; a zero initial estimate excludes the coordinate.
struct HardThresholdWeights {};

/// Derivative of the SCAD penalty scaled to [0, 1]. When `lambda_n` is unset the
/// current path lambda is used.
struct ScadWeights {
    double a = 3.7;
    std::optional<double> lambda_n;
};

using WeightScheme = std::variant<UnitWeights, HardThresholdWeights, ScadWeights>;

inline std::string scheme_name(const WeightScheme& scheme)
{
    if (std::holds_alternative<UnitWeights>(scheme)) return "unit";
    if (std::holds_alternative<HardThresholdWeights>(scheme)) return "adaptive";
    return "scad";
}

inline WeightScheme parse_scheme(const std::string& name, double scad_a = 3.7)
{
    if (name == "unit") return UnitWeights{};
    if (name == "adaptive" || name == "hard" || name == "hardthreshold") return HardThresholdWeights{};
    if (name == "scad") {
        detail::require(scad_a > 2.0, ErrorCode::InvalidArgument, "SCAD requires a > 2");
        return ScadWeights{scad_a, std::nullopt};
    }
    detail::fail(ErrorCode::InvalidArgument, "unknown weight scheme '" + name + "'");
}

/// Per-coordinate penalty multipliers. Excluded coordinates carry an infinite
/// weight and are pinned at zero by the solver; their `value` entry is unused.
struct PenaltyWeights {
    Eigen::VectorXd value;
    std::vector<bool> excluded;

    static PenaltyWeights constant(Eigen::Index p, double w = 1.0)
    {
        return {Eigen::VectorXd::Constant(p, w), std::vector<bool>(static_cast<std::size_t>(p), false)};
    }

    Eigen::Index size() const { return value.size(); }
    bool is_excluded(Eigen::Index j) const { return excluded[static_cast<std::size_t>(j)]; }
    bool is_unpenalized(Eigen::Index j) const { return !is_excluded(j) && value[j] == 0.0; }

    /// Append an unpenalized coordinate (used for the intercept column).
    PenaltyWeights with_unpenalized() const
    {
        PenaltyWeights out = *this;
        out.value.conservativeResize(value.size() + 1);
        out.value[value.size()] = 0.0;
        out.excluded.push_back(false);
        return out;
    }

    /// sum_j w_j |beta_j| over non-excluded coordinates.
    double penalty(const Eigen::Ref<const Eigen::VectorXd>& beta) const
    {
        double s = 0.0;
        for (Eigen::Index j = 0; j < value.size(); ++j)
            if (!is_excluded(j)) s += value[j] * std::abs(beta[j]);
        return s;
    }
};

inline double scad_weight(double s, double a, double lambda_n)
{
    s = std::abs(s);
    if (s <= lambda_n) return 1.0;
    return std::max(a * lambda_n - s, 0.0) / ((a - 1.0) * lambda_n);
}

/// Weights from an initial estimate. `path_lambda` feeds the SCAD threshold when
/// the scheme does not fix its own.
inline PenaltyWeights compute_weights(const WeightScheme& scheme,
                                      const Eigen::Ref<const Eigen::VectorXd>& beta_init,
                                      double path_lambda = 1.0)
{
    const Eigen::Index p = beta_init.size();
    PenaltyWeights w = PenaltyWeights::constant(p, 1.0);
    if (std::holds_alternative<UnitWeights>(scheme)) return w;

    if (std::holds_alternative<HardThresholdWeights>(scheme)) {
        for (Eigen::Index j = 0; j < p; ++j) {
            if (beta_init[j] != 0.0) {
                w.value[j] = 1.0 / std::abs(beta_init[j]);
            } else {
                w.value[j] = 0.0;
                w.excluded[static_cast<std::size_t>(j)] = true;
            }
        }
        return w;
    }

    const auto& scad = std::get<ScadWeights>(scheme);
    detail::require(scad.a > 2.0, ErrorCode::InvalidArgument, "SCAD requires a > 2");
    const double lambda_n = scad.lambda_n.value_or(path_lambda);
    detail::require(lambda_n > 0.0, ErrorCode::InvalidArgument, "SCAD lambda_n must be positive");
    for (Eigen::Index j = 0; j < p; ++j) w.value[j] = scad_weight(beta_init[j], scad.a, lambda_n);
    return w;
}

} // namespace dpdlasso
