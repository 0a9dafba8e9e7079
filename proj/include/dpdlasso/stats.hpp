#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace dpdlasso::stats {

/// Consistency factor turning the raw MAD into a normal-scale estimate.
inline constexpr double kMadToSigma = 1.482602218505602;

inline double median(std::vector<double> values)
{
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t n = values.size();
    const std::size_t mid = n / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    double hi = values[mid];
    if (n % 2 == 1) return hi;
    double lo = *std::max_element(values.begin(), values.begin() + mid);
    return 0.5 * (lo + hi);
}

inline double median(const Eigen::Ref<const Eigen::VectorXd>& v)
{
    return median(std::vector<double>(v.data(), v.data() + v.size()));
}

/// Raw median absolute deviation about the median (no consistency factor).
inline double mad_raw(const Eigen::Ref<const Eigen::VectorXd>& v)
{
    const double med = median(v);
    std::vector<double> dev(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) dev[static_cast<std::size_t>(i)] = std::abs(v[i] - med);
    return median(std::move(dev));
}

/// Normalized MAD, consistent for the standard deviation under normality.
inline double mad(const Eigen::Ref<const Eigen::VectorXd>& v)
{
    return kMadToSigma * mad_raw(v);
}

/// log((1/n) * sum exp(a_i)) with max subtraction.
inline double log_mean_exp(const Eigen::Ref<const Eigen::VectorXd>& a)
{
    const double m = a.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((a.array() - m).exp().sum()) - std::log(static_cast<double>(a.size()));
}

} // namespace dpdlasso::stats
