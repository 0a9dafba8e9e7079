#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "dpdlasso/dpd_loss.hpp"
#include "dpdlasso/error.hpp"
#include "dpdlasso/mm_fit.hpp"
#include "dpdlasso/parallel.hpp"
#include "dpdlasso/random.hpp"
#include "dpdlasso/types.hpp"
#include "dpdlasso/weights.hpp"
#include "dpdlasso/wlasso.hpp"

namespace dpdlasso {

struct DpdLossCv {};
struct TrimmedSquaredErrorCv {
    double trim = 0.1;
};
using CvLoss = std::variant<DpdLossCv, TrimmedSquaredErrorCv>;

struct HbicCriterion {};
struct KFoldCv {
    int k = 5;
    CvLoss loss = DpdLossCv{};
};
using Criterion = std::variant<HbicCriterion, KFoldCv>;

/// Where adaptive weights come from: the initializer itself, or the
/// HBIC-selected unit-weight DPD-LASSO fit at the same gamma.
enum class AnchorSource { Initializer, DpdLassoPath };

struct SelectionConfig {
    int n_lambdas = 50;
    double lambda_min_ratio = 1e-3;
    Criterion criterion = HbicCriterion{};
    std::uint64_t seed = 0;
    unsigned threads = 1;
    /// Also fit every lambda from the initializer and keep the lower objective.
    bool restart_from_initializer = true;
    AnchorSource anchor = AnchorSource::Initializer;

    void validate() const
    {
        detail::require(n_lambdas >= 1, ErrorCode::InvalidArgument, "n_lambdas must be >= 1");
        detail::require(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0, ErrorCode::InvalidArgument,
                        "lambda_min_ratio must lie in (0, 1)");
        if (const auto* cv = std::get_if<KFoldCv>(&criterion)) {
            detail::require(cv->k >= 2, ErrorCode::InvalidArgument, "k-fold CV needs k >= 2");
            if (const auto* t = std::get_if<TrimmedSquaredErrorCv>(&cv->loss))
                detail::require(t->trim >= 0.0 && t->trim < 0.5, ErrorCode::InvalidArgument,
                                "trim must lie in [0, 0.5)");
        }
    }
};

/// log(sigma^2) + log(log n) * log(p) / n * |support|.
inline double hbic(const FittedModel& model, Index n, Index p)
{
    detail::require(n >= 3, ErrorCode::InvalidSampleSize, "HBIC needs n >= 3");
    detail::require(p >= 2, ErrorCode::InvalidArgument, "HBIC needs p >= 2");
    detail::require(model.sigma > 0.0, ErrorCode::NonPositiveSigma, "model sigma must be positive");
    const double nd = static_cast<double>(n);
    return 2.0 * std::log(model.sigma) +
           std::log(std::log(nd)) * std::log(static_cast<double>(p)) / nd * static_cast<double>(model.model_size());
}

/// Log-spaced from lambda_max down to lambda_max * ratio.
inline VectorXd lambda_grid(double lambda_max, int n_lambdas, double ratio)
{
    detail::require(lambda_max > 0.0 && std::isfinite(lambda_max), ErrorCode::InvalidArgument,
                    "lambda_max must be positive");
    VectorXd grid(n_lambdas);
    grid[0] = lambda_max;
    if (n_lambdas == 1) return grid;
    const double step = std::log(ratio) / static_cast<double>(n_lambdas - 1);
    for (int k = 1; k < n_lambdas - 1; ++k) grid[k] = lambda_max * std::exp(step * k);
    grid[n_lambdas - 1] = lambda_max * ratio;
    return grid;
}

namespace detail {

inline PenaltyWeights shutdown_weights(const WeightScheme& scheme, const VectorXd& anchor)
{
    // SCAD with a tied threshold at lambda >= max |anchor| is all ones.
    if (const auto* s = std::get_if<ScadWeights>(&scheme); s && !s->lambda_n)
        return PenaltyWeights::constant(anchor.size(), 1.0);
    return compute_weights(scheme, anchor, 1.0);
}

} // namespace detail

/// Smallest lambda (Q scale) at which the fit from `init` is empty. Starts from
/// the shutdown bound of the first MM subproblem and the stationarity bound at
/// beta = 0, then grows by 1.25 until a fit confirms an empty support.
inline double lambda_max(const Dataset& ds, const FitConfig& cfg, const InitialEstimate& init,
                         const InitialEstimate& anchor)
{
    const PenaltyWeights w = detail::shutdown_weights(cfg.weight_scheme, anchor.beta);
    const auto sub = detail::build_subproblem(ds, init.beta, init.intercept, init.sigma, cfg.gamma, 1.0, w);
    double lam = lambda_max(sub.prob) / sub.lambda_eff;

    FitConfig big = cfg;
    big.lambda = std::max({lam, 1.0, anchor.beta.cwiseAbs().maxCoeff()}) * 1e6;
    const FittedModel null_fit = fit(ds, big, init, anchor);
    const VectorXd g =
        loss_gradient_beta(ds, VectorXd::Zero(ds.p()), null_fit.sigma, cfg.gamma, null_fit.intercept_std);
    for (Index j = 0; j < ds.p(); ++j)
        if (!w.is_excluded(j) && w.value[j] > 0.0) lam = std::max(lam, std::abs(g[j]) / w.value[j]);

    if (const auto* s = std::get_if<ScadWeights>(&cfg.weight_scheme); s && !s->lambda_n)
        lam = std::max(lam, anchor.beta.cwiseAbs().maxCoeff());
    if (!(lam > 0.0)) lam = 1e-8;

    auto empty_at = [&](double l) {
        FitConfig at = cfg;
        at.lambda = l;
        const FittedModel m = fit(ds, at, init, anchor);
        return m.model_size() == 0 && !m.degenerate_scale;
    };
    for (int attempt = 0; attempt < 40 && !empty_at(lam); ++attempt) lam *= 1.25;
    // The bounds above are evaluated at sigma_init and can overshoot by orders
    // of magnitude; walk down while the fit stays empty.
    for (int attempt = 0; attempt < 80 && empty_at(lam / 1.25); ++attempt) lam /= 1.25;
    return lam;
}

inline double lambda_max(const Dataset& ds, const FitConfig& cfg, const InitialEstimate& init)
{
    return lambda_max(ds, cfg, init, init);
}

inline VectorXd lambda_grid(const Dataset& ds, const FitConfig& cfg, const SelectionConfig& sel,
                            const InitialEstimate& init, const InitialEstimate& anchor)
{
    sel.validate();
    return lambda_grid(lambda_max(ds, cfg, init, anchor), sel.n_lambdas, sel.lambda_min_ratio);
}

inline VectorXd lambda_grid(const Dataset& ds, const FitConfig& cfg, const SelectionConfig& sel,
                            const InitialEstimate& init)
{
    return lambda_grid(ds, cfg, sel, init, init);
}

inline VectorXd lambda_grid(const Dataset& ds, const FitConfig& cfg, const SelectionConfig& sel)
{
    return lambda_grid(ds, cfg, sel, initialize(ds, cfg));
}

namespace detail {

inline double final_objective(const FittedModel& m)
{
    return m.objective_trace.empty() ? std::numeric_limits<double>::infinity() : m.objective_trace.back();
}

/// Fits along `lambdas` in order, warm-starting each from its predecessor.
inline std::vector<FittedModel> fit_grid(const Dataset& ds, const FitConfig& cfg, const VectorXd& lambdas,
                                         const InitialEstimate& init, const InitialEstimate& anchor, bool restart)
{
    std::vector<FittedModel> models;
    models.reserve(static_cast<std::size_t>(lambdas.size()));
    InitialEstimate start = init;
    int collapsed_run = 0;
    for (Index k = 0; k < lambdas.size(); ++k) {
        FitConfig at = cfg;
        at.lambda = lambdas[k];
        FittedModel m;
        if (collapsed_run >= 3) {
            m.beta = m.beta_std = VectorXd::Zero(ds.p());
            m.gamma = cfg.gamma;
            m.lambda = lambdas[k];
            m.weight_scheme = cfg.weight_scheme;
            m.initializer = cfg.initializer;
            m.degenerate_scale = true;
            m.error = "not fitted: the scale collapsed at a larger lambda";
            models.push_back(std::move(m));
            continue;
        }
        try {
            m = fit(ds, at, start, anchor);
            if (restart && k > 0) {
                FittedModel cold = fit(ds, at, init, anchor);
                const bool better = cold.degenerate_scale == m.degenerate_scale
                                        ? final_objective(cold) < final_objective(m)
                                        : !cold.degenerate_scale;
                if (better) m = std::move(cold);
            }
            // An empty fit sits at the total-scale sigma, where beta = 0 is itself
            // stationary; seeding from it would pin the rest of the path there.
            if (!m.degenerate_scale && m.model_size() > 0) start = {m.beta_std, m.intercept_std, m.sigma};
            collapsed_run = m.degenerate_scale ? collapsed_run + 1 : 0;
        } catch (const Error& e) {
            m = FittedModel{};
            m.beta = m.beta_std = VectorXd::Zero(ds.p());
            m.gamma = cfg.gamma;
            m.lambda = lambdas[k];
            m.weight_scheme = cfg.weight_scheme;
            m.initializer = cfg.initializer;
            m.error = e.what();
        }
        models.push_back(std::move(m));
    }
    return models;
}

/// Index minimizing `score`; ties go to the larger lambda.
inline Index argmin_prefer_large_lambda(const VectorXd& score, const VectorXd& lambdas)
{
    Index best = -1;
    for (Index k = 0; k < score.size(); ++k) {
        if (!std::isfinite(score[k]) && best >= 0) continue;
        if (best < 0 || score[k] < score[best] || (score[k] == score[best] && lambdas[k] > lambdas[best])) best = k;
    }
    return std::max<Index>(best, 0);
}

inline double validation_loss(const CvLoss& loss, const VectorXd& r, double sigma, double gamma)
{
    if (std::holds_alternative<DpdLossCv>(loss)) return dpd_loss_residuals(r, sigma, gamma);
    const double trim = std::get<TrimmedSquaredErrorCv>(loss).trim;
    std::vector<double> sq(static_cast<std::size_t>(r.size()));
    for (Index i = 0; i < r.size(); ++i) sq[static_cast<std::size_t>(i)] = r[i] * r[i];
    std::sort(sq.begin(), sq.end());
    const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor((1.0 - trim) * sq.size())));
    double s = 0.0;
    for (std::size_t i = 0; i < keep; ++i) s += sq[i];
    return s / static_cast<double>(keep);
}

inline bool usable(const FittedModel& m, bool require_converged)
{
    return !m.failed() && !m.degenerate_scale && (m.converged || !require_converged);
}

/// Failed or collapsed fits score +inf; so do unconverged ones unless none converged.
inline VectorXd hbic_scores(const std::vector<FittedModel>& models, Index n, Index p)
{
    bool any_converged = false;
    for (const auto& m : models) any_converged = any_converged || usable(m, true);
    VectorXd h(static_cast<Index>(models.size()));
    for (std::size_t k = 0; k < models.size(); ++k) {
        const auto& m = models[k];
        h[static_cast<Index>(k)] =
            usable(m, any_converged) ? hbic(m, n, p) : std::numeric_limits<double>::infinity();
    }
    return h;
}

} // namespace detail

/// Adaptive-weight anchor for a path: the initializer, or the HBIC pick of
/// the unit-weight path started from it.
inline InitialEstimate path_anchor(const Dataset& ds, const FitConfig& cfg, const SelectionConfig& sel,
                                   const InitialEstimate& init)
{
    if (sel.anchor == AnchorSource::Initializer || std::holds_alternative<UnitWeights>(cfg.weight_scheme))
        return init;
    FitConfig unit = cfg;
    unit.weight_scheme = UnitWeights{};
    unit.reanchor_weights = false;
    SelectionConfig s = sel;
    s.validate();
    const VectorXd lambdas = lambda_grid(ds, unit, s, init);
    const auto models = detail::fit_grid(ds, unit, lambdas, init, init, s.restart_from_initializer);
    const Index k = detail::argmin_prefer_large_lambda(detail::hbic_scores(models, ds.n(), ds.p()), lambdas);
    const auto& m = models[static_cast<std::size_t>(k)];
    if (m.failed() || m.degenerate_scale || m.model_size() == 0) return init;
    return {m.beta_std, m.intercept_std, m.sigma};
}

/// Fits the grid largest lambda first and selects by HBIC or k-fold CV.
inline RegularizationPath fit_path(const Dataset& ds, const FitConfig& cfg, const SelectionConfig& sel,
                                   const InitialEstimate& init, std::optional<VectorXd> lambdas = std::nullopt)
{
    sel.validate();
    RegularizationPath path;
    const InitialEstimate anchor = path_anchor(ds, cfg, sel, init);
    path.lambdas = lambdas ? *lambdas : lambda_grid(ds, cfg, sel, init, anchor);
    for (Index k = 1; k < path.lambdas.size(); ++k)
        detail::require(path.lambdas[k] < path.lambdas[k - 1], ErrorCode::InvalidArgument,
                        "lambda grid must be strictly decreasing");
    path.models = detail::fit_grid(ds, cfg, path.lambdas, init, anchor, sel.restart_from_initializer);
    const Index L = path.lambdas.size();
    path.hbic = detail::hbic_scores(path.models, ds.n(), ds.p());

    if (const auto* cv = std::get_if<KFoldCv>(&sel.criterion)) {
        const Index n = ds.n();
        detail::require(cv->k <= n, ErrorCode::InvalidArgument, "more folds than observations");
        Philox rng(sel.seed, 0, 4);
        const auto perm = rng.permutation(static_cast<std::size_t>(n));
        std::vector<VectorXd> fold_err(static_cast<std::size_t>(cv->k), VectorXd::Zero(L));
        parallel_for(static_cast<std::size_t>(cv->k), sel.threads, [&](std::size_t f) {
            const std::size_t lo = f * static_cast<std::size_t>(n) / static_cast<std::size_t>(cv->k);
            const std::size_t hi = (f + 1) * static_cast<std::size_t>(n) / static_cast<std::size_t>(cv->k);
            std::vector<Index> train, held;
            for (std::size_t i = 0; i < perm.size(); ++i)
                (i >= lo && i < hi ? held : train).push_back(static_cast<Index>(perm[i]));
            const Dataset tr = ds.rows(train);
            const Dataset va = ds.rows(held);
            const InitialEstimate fold_init = initialize(tr, cfg);
            const InitialEstimate fold_anchor = path_anchor(tr, cfg, sel, fold_init);
            const auto models =
                detail::fit_grid(tr, cfg, path.lambdas, fold_init, fold_anchor, sel.restart_from_initializer);
            for (Index k = 0; k < L; ++k) {
                const auto& m = models[static_cast<std::size_t>(k)];
                fold_err[f][k] = !detail::usable(m, false) ? std::numeric_limits<double>::infinity()
                                            : detail::validation_loss(cv->loss, residuals(va, m.beta_std, m.intercept_std),
                                                                      m.sigma, cfg.gamma);
            }
        });
        VectorXd err = VectorXd::Zero(L);
        for (const auto& e : fold_err) err += e;
        err /= static_cast<double>(cv->k);
        path.cv_error = err;
        path.selected_index = detail::argmin_prefer_large_lambda(err, path.lambdas);
    } else {
        path.selected_index = detail::argmin_prefer_large_lambda(path.hbic, path.lambdas);
    }
    return path;
}

inline RegularizationPath fit_path(const Dataset& ds, const FitConfig& cfg, const SelectionConfig& sel)
{
    return fit_path(ds, cfg, sel, initialize(ds, cfg));
}

} // namespace dpdlasso
