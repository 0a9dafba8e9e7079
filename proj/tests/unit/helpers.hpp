#pragma once

#include <cstdint>
#include <random>

#include "dpdlasso/dpdlasso.hpp"

namespace testutil {

using dpdlasso::Index;
using dpdlasso::MatrixXd;
using dpdlasso::VectorXd;

inline MatrixXd gaussian_matrix(std::mt19937_64& rng, Index n, Index p)
{
    std::normal_distribution<double> z;
    MatrixXd X(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) X(i, j) = z(rng);
    return X;
}

inline VectorXd gaussian_vector(std::mt19937_64& rng, Index n, double sd = 1.0)
{
    std::normal_distribution<double> z(0.0, sd);
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) v[i] = z(rng);
    return v;
}

/// y = X beta + sd * noise on a standardized design.
inline dpdlasso::Dataset linear_dataset(std::uint64_t seed, Index n, const VectorXd& beta, double sd = 0.5)
{
    std::mt19937_64 rng(seed);
    const MatrixXd X = gaussian_matrix(rng, n, beta.size());
    const VectorXd y = X * beta + gaussian_vector(rng, n, sd);
    return dpdlasso::standardize(y, X);
}

inline VectorXd sparse_beta(Index p)
{
    VectorXd b = VectorXd::Zero(p);
    b[0] = 3.0;
    if (p > 1) b[1] = 1.5;
    if (p > 4) b[4] = 2.0;
    return b;
}

inline bool non_increasing(const std::vector<double>& trace, double slack = 1e-10)
{
    for (std::size_t k = 1; k < trace.size(); ++k)
        if (trace[k] > trace[k - 1] + slack) return false;
    return true;
}

} // namespace testutil
