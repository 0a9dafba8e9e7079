#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "common/reference.hpp"
#include "unit/helpers.hpp"

using namespace dpdlasso;

namespace {

IfContext scalar_context(double gamma, double sigma = 1.0)
{
    return make_if_context(VectorXd::Ones(1), sigma, gamma, MatrixXd::Identity(1, 1));
}

VectorXd unit_x() { return VectorXd::Ones(1); }

} // namespace

TEST(InfluenceBeta, ZeroAtModelPoint)
{
    const VectorXd beta = testutil::sparse_beta(6);
    const IfContext ctx = make_if_context(beta, 0.5, 0.3, MatrixXd::Identity(3, 3), VectorXd::Zero(3));
    std::mt19937_64 rng(70);
    const VectorXd x = testutil::gaussian_vector(rng, 6);
    const VectorXd v = if_beta1(ctx, x.dot(beta), x, 0.4);
    EXPECT_EQ(v.size(), 3);
    EXPECT_LT(v.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(InfluenceBeta, LeastSquaresSubstitution)
{
    // r_t = 2, x_t = 1, E x^2 = 1: the least-squares score x r. The sign is
    // pinned by the finite-contamination check below.
    const VectorXd v = if_beta1(scalar_context(0.0), 3.0, unit_x(), 0.0);
    EXPECT_NEAR(v[0], 2.0, 1e-15);
}

TEST(InfluenceBeta, BoundedWithPeakAtSigmaOverRootGamma)
{
    for (double sigma : {1.0, 0.5}) {
        const double g = 0.5;
        const IfContext ctx = scalar_context(g, sigma);
        double best = 0, arg = 0;
        for (double r = 0; r <= 20; r += 1e-4) {
            const double v = std::abs(if_beta1(ctx, 1.0 + r, unit_x(), 0.0)[0]);
            if (v > best) best = v, arg = r;
        }
        for (double r = 20; r <= 1e6; r *= 1.01) best = std::max(best, std::abs(if_beta1(ctx, 1.0 + r, unit_x(), 0.0)[0]));
        EXPECT_NEAR(arg, sigma / std::sqrt(g), 1e-3);
        EXPECT_TRUE(std::isfinite(best));
        EXPECT_NEAR(std::abs(if_beta1(ctx, 1.0 + 1e6, unit_x(), 0.0)[0]), 0.0, 1e-300);
    }
}

TEST(InfluenceBeta, PenaltyTermUsesInitialIf)
{
    const double g = 0.3, s = 0.7, lam = 0.2;
    VectorXd beta(1);
    beta << 2.0;
    const IfContext zero = make_if_context(beta, s, g, MatrixXd::Identity(1, 1), VectorXd::Zero(1));
    const IfContext one = make_if_context(beta, s, g, MatrixXd::Identity(1, 1), VectorXd::Ones(1));
    const VectorXd x = unit_x();
    const double diff = if_beta1(one, 2.5, x, lam)[0] - if_beta1(zero, 2.5, x, lam)[0];
    const double expect = std::pow(1 + g, 1.5) * lam * std::pow(s, g + 2) * std::pow(2 * M_PI, g / 2) / (1 + g) / 4.0;
    EXPECT_NEAR(diff, expect, 1e-14);
}

TEST(InfluenceBeta, ContextValidation)
{
    VectorXd beta = VectorXd::Zero(3);
    try {
        make_if_context(beta, 1.0, 0.5, MatrixXd::Identity(1, 1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroTrueCoefficient);
    }
    beta[1] = 1.0;
    EXPECT_THROW(make_if_context(beta, 1.0, 0.5, MatrixXd::Identity(2, 2)), Error);
    EXPECT_THROW(make_if_context(beta, 1.0, 0.5, -MatrixXd::Identity(1, 1)), Error);
}

TEST(InfluenceSigma, LeastSquaresValues)
{
    const VectorXd x = unit_x(), b = VectorXd::Zero(1);
    // sigma (r~^2 - 1) / 2
    EXPECT_NEAR(if_sigma(2.0, 0.0, 0.0, x, b), -1.0, 1e-15);
    EXPECT_NEAR(if_sigma(2.0, 0.0, 2.0, x, b), 0.0, 1e-15);
    EXPECT_NEAR(if_sigma(1.0, 0.0, 3.0, x, b), 4.0, 1e-14);
}

TEST(InfluenceSigma, MeanZeroUnderModel)
{
    // E IF = 0 at the model: Gauss-Hermite style integration on a grid
    for (double g : {0.0, 0.3, 1.0}) {
        double acc = 0.0;
        const double h = 1e-3;
        for (double r = -12; r <= 12; r += h)
            acc += if_sigma(1.0, g, r, unit_x(), VectorXd::Zero(1)) * std::exp(-0.5 * r * r) / std::sqrt(2 * M_PI) * h;
        EXPECT_NEAR(acc, 0.0, 1e-8) << "gamma " << g;
    }
}

TEST(InfluenceSigma, BoundedOnlyForPositiveGamma)
{
    const VectorXd x = unit_x(), b = VectorXd::Zero(1);
    for (double g : {0.3, 0.5, 1.0}) {
        double sup = 0;
        for (double r = 0; r <= 1e6; r = r < 50 ? r + 1e-3 : r * 1.01) sup = std::max(sup, std::abs(if_sigma(1.0, g, r, x, b)));
        EXPECT_TRUE(std::isfinite(sup));
        EXPECT_LT(sup, 10.0);
    }
    const double a = if_sigma(1.0, 0.0, 1e3, x, b), c = if_sigma(1.0, 0.0, 1e4, x, b);
    EXPECT_NEAR(c / a, 100.0, 1e-3);
}

TEST(NumericIf, AgreesWithAnalyticInSignAndNorm)
{
    std::mt19937_64 rng(71);
    const Index n = 500;
    VectorXd beta(3);
    beta << 1.5, -1.0, 2.0;
    const MatrixXd X = testutil::gaussian_matrix(rng, n, 3);
    const VectorXd y = X * beta + testutil::gaussian_vector(rng, n, 1.0);
    const Dataset ds = Dataset::raw(y, X);
    FitConfig cfg;
    cfg.gamma = 0.5;
    cfg.lambda = 0.0;
    cfg.epsilon_outer = 1e-12;
    cfg.max_outer_iter = 500;
    VectorXd x_t(3);
    x_t << 1.0, 0.5, -1.0;
    const double y_t = x_t.dot(beta) + 1.5;
    const NumericIf num = numeric_if_check(ds, cfg, y_t, x_t, 1e-2);
    const IfContext ctx = make_if_context(beta, 1.0, 0.5, sample_exx(X, {0, 1, 2}));
    const VectorXd an = if_beta1(ctx, y_t, x_t, 0.0);
    for (Index j = 0; j < 3; ++j) EXPECT_GT(an[j] * num.beta[j], 0.0) << "coordinate " << j;
    const double ratio = num.beta.norm() / an.norm();
    EXPECT_GT(ratio, 0.5);
    EXPECT_LT(ratio, 2.0);
}

TEST(NumericIf, CleanPointHasSmallInfluence)
{
    std::mt19937_64 rng(72);
    const Index n = 500;
    const VectorXd beta = Eigen::Vector3d(1.0, 2.0, -1.0);
    const MatrixXd X = testutil::gaussian_matrix(rng, n, 3);
    const Dataset ds = Dataset::raw(X * beta + testutil::gaussian_vector(rng, n, 0.5), X);
    FitConfig cfg;
    cfg.gamma = 0.5;
    cfg.lambda = 0.0;
    cfg.epsilon_outer = 1e-12;
    const VectorXd x_t = VectorXd::Zero(3);
    EXPECT_LT(numeric_if_check(ds, cfg, 0.0, x_t).beta.norm(), 0.1);
}

TEST(NumericIf, OutlierSweep)
{
    std::mt19937_64 rng(73);
    const Index n = 200;
    const VectorXd beta = Eigen::Vector3d(1.0, 2.0, -1.0);
    const MatrixXd X = testutil::gaussian_matrix(rng, n, 3);
    const Dataset ds = Dataset::raw(X * beta + testutil::gaussian_vector(rng, n, 0.5), X);
    VectorXd x_t(3);
    x_t << 1.0, 1.0, 1.0;
    auto norm_at = [&](double gamma, double shift) {
        FitConfig cfg;
        cfg.gamma = gamma;
        cfg.lambda = 0.0;
        cfg.epsilon_outer = 1e-12;
        cfg.max_outer_iter = 500;
        return numeric_if_check(ds, cfg, x_t.dot(beta) + shift, x_t).beta.norm();
    };
    const double r_lo = norm_at(0.5, 10.0), r_hi = norm_at(0.5, 1e4);
    EXPECT_LT(std::max(r_lo, r_hi) / std::max(std::min(r_lo, r_hi), 1e-12), 2.0);
    EXPECT_GT(norm_at(0.0, 1e4) / norm_at(0.0, 10.0), 10.0);
}

TEST(TauScale, DegenerateMad)
{
    try {
        tau_scale(VectorXd::Constant(5, 3.0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateMad);
    }
}

TEST(TauScale, SymmetricSample)
{
    // mu = 0, MAD = 1.4826: all |z| < 3, so tau = s0^2 * (2/s0^2)/3
    VectorXd x(3);
    x << -1.0, 0.0, 1.0;
    EXPECT_NEAR(tau_scale(x), 2.0 / 3.0, 1e-14);
}

TEST(TauScale, DualImplementation)
{
    std::mt19937_64 rng(74);
    for (int t = 0; t < 100; ++t) {
        VectorXd x = testutil::gaussian_vector(rng, 10 + t, 1.0 + t % 5);
        if (t % 3 == 0) x.head(3).array() += 25.0;
        const double a = tau_scale(x);
        const double b = reference::tau_scale(std::vector<double>(x.data(), x.data() + x.size()));
        EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, b));
    }
}

TEST(TauScale, LocationAndScale)
{
    std::mt19937_64 rng(75);
    for (int t = 0; t < 20; ++t) {
        const VectorXd x = testutil::gaussian_vector(rng, 50);
        const double base = tau_scale(x);
        // power-of-two factors keep every intermediate exact
        for (double c : {0.5, 2.0, 8.0}) EXPECT_EQ(tau_scale(c * x), c * c * base);
        for (double c : {3.0, -1.7, 1e3}) EXPECT_NEAR(tau_scale(x.array() + c), base, 1e-12 * (1.0 + std::abs(c)));
        EXPECT_NEAR(tau_scale(3.3 * x), 3.3 * 3.3 * base, 1e-12 * base);
    }
}

TEST(TrimmedRmse, Examples)
{
    std::mt19937_64 rng(76);
    const VectorXd r = testutil::gaussian_vector(rng, 37);
    EXPECT_NEAR(trimmed_rmse(r, 1.0), std::sqrt(r.squaredNorm() / 37.0), 1e-14);
    VectorXd s(4);
    s << 1, -1, 1, 100;
    EXPECT_DOUBLE_EQ(trimmed_rmse(s, 0.75), 1.0);
    EXPECT_LE(trimmed_rmse(r, 0.9), trimmed_rmse(r, 1.0));
    try {
        trimmed_rmse(VectorXd::Ones(3), 0.2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyAfterTrim);
    }
}

TEST(TrimmedRmse, DualImplementation)
{
    std::mt19937_64 rng(77);
    for (int t = 0; t < 100; ++t) {
        const VectorXd r = testutil::gaussian_vector(rng, 10 + t, 2.0);
        EXPECT_NEAR(trimmed_rmse(r, 0.9), reference::trimmed_rmse(std::vector<double>(r.data(), r.data() + r.size()), 0.9), 1e-12);
    }
}
