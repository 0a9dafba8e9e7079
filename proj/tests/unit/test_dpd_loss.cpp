#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "unit/helpers.hpp"

using namespace dpdlasso;

namespace {

// aggregated data with a unit-column design so residuals can be set directly
Dataset residual_dataset(const VectorXd& r)
{
    MatrixXd X = MatrixXd::Zero(r.size(), 1);
    X(0, 0) = 1.0;
    return Dataset::raw(r, X);
}

} // namespace

TEST(DpdLoss, SinglePointClosedForm)
{
    VectorXd r = VectorXd::Zero(1);
    const double expect = (1.0 / std::sqrt(2.0 * std::numbers::pi)) * (1.0 / std::sqrt(2.0) - 2.0) + 1.0;
    EXPECT_NEAR(dpd_loss_residuals(r, 1.0, 1.0), expect, 1e-12);
    EXPECT_NEAR(expect, 0.484211, 1e-6);
}

TEST(DpdLoss, KernelConstants)
{
    EXPECT_DOUBLE_EQ(LossKernel::normal(0.0).mf_gamma, 1.0);
    const double g = 0.7;
    EXPECT_NEAR(LossKernel::normal(g).mf_gamma, std::pow(2.0 * std::numbers::pi, -g / 2) / std::sqrt(1 + g), 1e-14);
    EXPECT_GT(LossKernel::normal(5.0).mf_gamma, 0.0);
}

TEST(DpdLoss, SmallGammaMatchesLimit)
{
    VectorXd r(2);
    r << 1.0, -1.0;
    const double limit = 0.5 + 0.5 * kLog2Pi;
    EXPECT_NEAR(dpd_loss_residuals(r, 1.0, 0.0), limit, 1e-14);
    EXPECT_NEAR(limit, 1.41894, 1e-5);
    EXPECT_NEAR(dpd_loss_residuals(r, 1.0, 1e-6), limit, 1e-4);
}

TEST(DpdLoss, ContinuityAtZero)
{
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
        const VectorXd r = testutil::gaussian_vector(rng, 15, 2.0);
        const double sigma = 0.3 + std::abs(testutil::gaussian_vector(rng, 1)[0]);
        EXPECT_NEAR(dpd_loss_residuals(r, sigma, 1e-9), dpd_loss_residuals(r, sigma, 0.0), 1e-6);
    }
}

TEST(DpdLoss, ContinuityIsMonotone)
{
    std::mt19937_64 rng(4);
    const VectorXd r = testutil::gaussian_vector(rng, 30, 1.3);
    const double l0 = dpd_loss_residuals(r, 0.8, 0.0);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 3; k <= 8; ++k) {
        const double gap = std::abs(dpd_loss_residuals(r, 0.8, std::pow(10.0, -k)) - l0);
        EXPECT_LT(gap, prev) << "k=" << k;
        prev = gap;
    }
}

TEST(DpdLoss, DatasetOverloadMatchesResiduals)
{
    const Dataset ds = testutil::linear_dataset(7, 12, testutil::sparse_beta(5));
    const VectorXd b = VectorXd::Constant(5, 0.2);
    EXPECT_DOUBLE_EQ(dpd_loss(ds, b, 0.9, 0.4), dpd_loss_residuals(residuals(ds, b), 0.9, 0.4));
}

TEST(DpdLoss, ErrorCases)
{
    const VectorXd r = VectorXd::Ones(3);
    try {
        dpd_loss_residuals(r, 0.0, 0.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonPositiveSigma);
    }
    const Dataset ds = testutil::linear_dataset(1, 5, VectorXd::Ones(2));
    try {
        dpd_loss(ds, VectorXd::Ones(3), 1.0, 0.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
    }
}

TEST(DpdLoss, HugeResidualDoesNotOverflow)
{
    VectorXd r(3);
    r << 0.0, 1e200, -1e150;
    const double v = dpd_loss_residuals(r, 1.0, 0.5);
    EXPECT_TRUE(std::isfinite(v));
}

TEST(DpdLossAlternative, ClosedForms)
{
    EXPECT_DOUBLE_EQ(dpd_loss_alternative_residuals(VectorXd::Zero(4), 1.0, 0.5), 0.0);
    EXPECT_NEAR(dpd_loss_alternative_residuals(VectorXd::Ones(1), 1.0, 2.0), 1.0, 1e-14);
    try {
        dpd_loss_alternative_residuals(VectorXd::Ones(2), 1.0, 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::GammaZero);
    }
}

TEST(DpdLossAlternative, SharesArgminOnGrid)
{
    // 3-point toy, one covariate
    MatrixXd X(3, 1);
    X << 1.0, 2.0, -1.0;
    VectorXd y(3);
    y << 1.2, 1.7, 4.0;
    const Dataset ds = Dataset::raw(y, X);
    for (double g : {0.2, 0.5, 1.0, 2.0}) {
        int best_a = -1, best_b = -1;
        double va = INFINITY, vb = INFINITY;
        for (int k = 0; k <= 6000; ++k) {
            VectorXd b(1);
            b << -3.0 + 1e-3 * k;
            const double a = dpd_loss(ds, b, 0.7, g);
            const double c = dpd_loss_alternative(ds, b, 0.7, g);
            if (a < va) va = a, best_a = k;
            if (c < vb) vb = c, best_b = k;
        }
        EXPECT_EQ(best_a, best_b) << "gamma=" << g;
    }
}

TEST(Psi, ValuesAtZero)
{
    for (double g : {0.0, 0.1, 0.5, 2.0}) EXPECT_DOUBLE_EQ(psi1(0.0, g), 0.0);
    const double f0 = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    const double expect = f0 - 0.5 * f0 / std::sqrt(2.0);
    EXPECT_NEAR(psi2(0.0, 1.0), expect, 1e-14);
    EXPECT_NEAR(psi2(0.0, 1.0), 0.257895, 1e-6);
    EXPECT_DOUBLE_EQ(psi2(0.0, 0.0), 1.0);
}

TEST(Psi, Psi1PeakAtInverseRootGamma)
{
    const double g = 0.5;
    double best = 0.0, arg = 0.0;
    for (int k = -200000; k <= 200000; ++k) {
        const double s = 1e-3 * k * 0.5;
        if (std::abs(psi1(s, g)) > best) best = std::abs(psi1(s, g)), arg = s;
    }
    EXPECT_NEAR(std::abs(arg), 1.0 / std::sqrt(g), 1e-3);
    EXPECT_TRUE(std::isfinite(best));
    const double peak = std::pow(2.0 * std::numbers::pi, -g / 2) * std::exp(-0.5) / std::sqrt(g);
    EXPECT_NEAR(best, peak, 1e-6);
}

TEST(Psi, BoundedWithTailLimit)
{
    for (double g : {0.1, 0.5, 1.0}) {
        const double tail2 = -g / (g + 1.0) * LossKernel::normal(g).mf_gamma;
        double sup1 = 0.0, sup2 = 0.0;
        for (double s = -1e6; s <= 1e6; s += 37.1) {
            sup1 = std::max(sup1, std::abs(psi1(s, g)));
            sup2 = std::max(sup2, std::abs(psi2(s, g)));
        }
        for (double s = -20; s <= 20; s += 1e-3) {
            sup1 = std::max(sup1, std::abs(psi1(s, g)));
            sup2 = std::max(sup2, std::abs(psi2(s, g)));
        }
        EXPECT_TRUE(std::isfinite(sup1));
        EXPECT_TRUE(std::isfinite(sup2));
        // |(1 - s^2) exp(-g s^2 / 2)| peaks at s^2 = 1 + 2/g
        const double bump = std::max(1.0, 2.0 / g * std::exp(-(g + 2.0) / 2.0));
        EXPECT_LE(sup2, std::pow(2 * M_PI, -g / 2) * bump + std::abs(tail2) + 1e-12);
        EXPECT_NEAR(psi1(1e6, g), 0.0, 1e-300);
        EXPECT_NEAR(psi2(1e6, g), tail2, 1e-15);
        EXPECT_NEAR(psi2(-1e6, g), tail2, 1e-15);
    }
}

TEST(Gradient, ZeroAtPerfectFit)
{
    std::mt19937_64 rng(1);
    const MatrixXd X = testutil::gaussian_matrix(rng, 8, 3);
    const VectorXd b = testutil::gaussian_vector(rng, 3);
    const Dataset ds = Dataset::raw(X * b, X);
    EXPECT_LT(loss_gradient_beta(ds, b, 0.5, 0.3).norm(), 1e-12);
}

TEST(Gradient, LeastSquaresLimit)
{
    const Dataset ds = testutil::linear_dataset(2, 9, testutil::sparse_beta(4));
    const VectorXd b = VectorXd::Constant(4, 0.1);
    const double sigma = 0.6;
    const VectorXd expect = -(ds.X().transpose() * (ds.y() - ds.X() * b)) / (9.0 * sigma * sigma);
    EXPECT_LT((loss_gradient_beta(ds, b, sigma, 0.0) - expect).cwiseAbs().maxCoeff(), 1e-12);
}

namespace {

VectorXd finite_difference(const Dataset& ds, const VectorXd& b, double sigma, double gamma, double h)
{
    VectorXd g(b.size());
    for (Index j = 0; j < b.size(); ++j) {
        VectorXd bp = b, bm = b;
        bp[j] += h;
        bm[j] -= h;
        g[j] = (dpd_loss(ds, bp, sigma, gamma) - dpd_loss(ds, bm, sigma, gamma)) / (2 * h);
    }
    return g;
}

} // namespace

TEST(Gradient, MatchesFiniteDifferenceSmall)
{
    std::mt19937_64 rng(6);
    const MatrixXd X = testutil::gaussian_matrix(rng, 6, 4);
    const VectorXd y = testutil::gaussian_vector(rng, 6);
    const Dataset ds = Dataset::raw(y, X);
    const VectorXd b = testutil::gaussian_vector(rng, 4, 0.5);
    const VectorXd diff = loss_gradient_beta(ds, b, 1.0, 0.3) - finite_difference(ds, b, 1.0, 0.3, 1e-6);
    EXPECT_LT(diff.cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Gradient, MatchesFiniteDifferenceRandom)
{
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> ug(0.0, 1.5), us(0.4, 2.0);
    for (int t = 0; t < 100; ++t) {
        const Index n = 5 + t % 20, p = 1 + t % 6;
        const MatrixXd X = testutil::gaussian_matrix(rng, n, p);
        const VectorXd y = testutil::gaussian_vector(rng, n, 1.5);
        const Dataset ds = Dataset::raw(y, X);
        const VectorXd b = testutil::gaussian_vector(rng, p, 0.5);
        const double g = ug(rng), s = us(rng);
        const VectorXd an = loss_gradient_beta(ds, b, s, g);
        const VectorXd fd = finite_difference(ds, b, s, g, 1e-5);
        const double scale = std::max(an.cwiseAbs().maxCoeff(), 1e-3);
        EXPECT_LT((an - fd).cwiseAbs().maxCoeff() / scale, 1e-4) << "instance " << t;
    }
}
