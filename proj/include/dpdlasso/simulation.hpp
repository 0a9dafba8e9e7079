#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dpdlasso/error.hpp"
#include "dpdlasso/mm_fit.hpp"
#include "dpdlasso/parallel.hpp"
#include "dpdlasso/random.hpp"
#include "dpdlasso/selection.hpp"
#include "dpdlasso/types.hpp"

namespace dpdlasso {

enum class Setting { A, B };
enum class ContaminationKind { None, YOutliers, XOutliers };

struct Contamination {
    ContaminationKind kind = ContaminationKind::None;
    double frac = 0.0;
    double mean = 20.0;
    double sd = 1.0;
    int n_cols = 10;          // X-outliers only
    bool random_cols = false; // X-outliers only; otherwise the first n_cols columns
};

struct SimScenario {
    int n = 100;
    int p = 50;
    Setting setting = Setting::A;
    Contamination contamination;
    double sigma0 = 0.5;
    double rho = 0.5;
    int n_replications = 50;
    std::uint64_t seed = 1;
    int n_test = 100;

    void validate() const
    {
        detail::require(n >= 3, ErrorCode::InvalidSampleSize, "scenario n must be >= 3");
        detail::require(p >= 5, ErrorCode::PTooSmall, "scenario p must be >= 5");
        detail::require(setting == Setting::A || p >= 60, ErrorCode::PTooSmall, "Setting B needs p >= 60");
        detail::require(contamination.frac >= 0.0 && contamination.frac < 1.0, ErrorCode::InvalidArgument,
                        "contamination fraction must lie in [0, 1)");
        detail::require(contamination.kind != ContaminationKind::XOutliers ||
                            (contamination.n_cols >= 0 && contamination.n_cols <= p),
                        ErrorCode::InvalidArgument, "n_cols must lie in [0, p]");
        detail::require(sigma0 > 0.0, ErrorCode::InvalidArgument, "sigma0 must be positive");
        detail::require(rho > -1.0 && rho < 1.0, ErrorCode::InvalidArgument, "rho must lie in (-1, 1)");
        detail::require(n_replications >= 1 && n_test >= 1, ErrorCode::InvalidArgument,
                        "replications and n_test must be positive");
    }
};

/// RNG stream ids within a replication.
enum Stream : std::uint32_t { kTrainX = 0, kNoise = 1, kTest = 2, kContamination = 3, kCv = 4 };

inline VectorXd true_beta(Setting setting, int p)
{
    const int need = setting == Setting::A ? 5 : 60;
    detail::require(p >= need, ErrorCode::PTooSmall, "p too small for the setting");
    VectorXd b = VectorXd::Zero(p);
    const int blocks = setting == Setting::A ? 1 : 3;
    for (int k = 0; k < blocks; ++k) {
        b[20 * k + 0] = 3.0;
        b[20 * k + 1] = 1.5;
        b[20 * k + 4] = 2.0;
    }
    return b;
}

/// Rows of N(0, Toeplitz(rho^|i-j|)) through the AR(1) recursion.
inline MatrixXd toeplitz_design(Philox& rng, int n, int p, double rho)
{
    MatrixXd X(n, p);
    const double innov = std::sqrt(1.0 - rho * rho);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = rng.normal();
        for (int j = 1; j < p; ++j) X(i, j) = rho * X(i, j - 1) + innov * rng.normal();
    }
    return X;
}

struct SimData {
    VectorXd y;
    MatrixXd X;
    VectorXd y_test;
    MatrixXd X_test;
    VectorXd beta0;
    double sigma0 = 0.5;
};

/// Clean training and test samples for replication `rep`.
inline SimData generate(const SimScenario& sc, int rep)
{
    sc.validate();
    SimData d;
    d.beta0 = true_beta(sc.setting, sc.p);
    d.sigma0 = sc.sigma0;
    const auto r = static_cast<std::uint32_t>(rep);
    Philox xs(sc.seed, r, kTrainX), noise(sc.seed, r, kNoise), test(sc.seed, r, kTest);
    d.X = toeplitz_design(xs, sc.n, sc.p, sc.rho);
    d.y = d.X * d.beta0;
    for (int i = 0; i < sc.n; ++i) d.y[i] += sc.sigma0 * noise.normal();
    d.X_test = toeplitz_design(test, sc.n_test, sc.p, sc.rho);
    d.y_test = d.X_test * d.beta0;
    for (int i = 0; i < sc.n_test; ++i) d.y_test[i] += sc.sigma0 * test.normal();
    return d;
}

/// Adds N(mean, sd^2) shifts to floor(frac n) random rows: to y, or to the
/// chosen columns of X (after y was generated, so those rows become bad
/// leverage points).
inline void contaminate(VectorXd& y, MatrixXd& X, const Contamination& c, Philox& rng)
{
    if (c.kind == ContaminationKind::None || c.frac <= 0.0) return;
    const auto n = static_cast<std::size_t>(y.size());
    const auto m = static_cast<std::size_t>(std::floor(c.frac * static_cast<double>(n)));
    const auto rows = rng.sample(n, m);
    if (c.kind == ContaminationKind::YOutliers) {
        for (auto i : rows) y[static_cast<Index>(i)] += rng.normal(c.mean, c.sd);
        return;
    }
    std::vector<std::size_t> cols;
    if (c.random_cols) {
        cols = rng.sample(static_cast<std::size_t>(X.cols()), static_cast<std::size_t>(c.n_cols));
    } else {
        for (int j = 0; j < c.n_cols; ++j) cols.push_back(static_cast<std::size_t>(j));
    }
    for (auto i : rows)
        for (auto j : cols) X(static_cast<Index>(i), static_cast<Index>(j)) += rng.normal(c.mean, c.sd);
}

struct MetricRow {
    double ms = 0, tp = 0, tn = 0, mses = 0, msen = 0, ee_sigma = 0, aprb = 0;
};

inline MetricRow metrics(const FittedModel& model, const VectorXd& beta0, double sigma0, const VectorXd& y_test,
                         const MatrixXd& X_test)
{
    const Index p = beta0.size();
    detail::require(model.beta.size() == p, ErrorCode::DimensionMismatch, "beta length differs from beta0");
    detail::require(X_test.cols() == p && X_test.rows() == y_test.size(), ErrorCode::DimensionMismatch,
                    "test data shape mismatch");
    std::vector<bool> selected(static_cast<std::size_t>(p), false);
    for (Index j : model.support) selected[static_cast<std::size_t>(j)] = true;
    int s = 0, tp = 0, tn = 0;
    double sse_s = 0.0, sse_n = 0.0;
    for (Index j = 0; j < p; ++j) {
        const bool truth = beta0[j] != 0.0;
        const bool sel = selected[static_cast<std::size_t>(j)];
        if (truth) {
            ++s;
            tp += sel;
            sse_s += (model.beta[j] - beta0[j]) * (model.beta[j] - beta0[j]);
        } else {
            tn += !sel;
            sse_n += model.beta[j] * model.beta[j];
        }
    }
    MetricRow m;
    m.ms = static_cast<double>(model.support.size());
    m.tp = s > 0 ? static_cast<double>(tp) / s : 1.0;
    m.tn = p - s > 0 ? static_cast<double>(tn) / static_cast<double>(p - s) : 1.0;
    m.mses = s > 0 ? sse_s / s : 0.0;
    m.msen = p - s > 0 ? sse_n / static_cast<double>(p - s) : 0.0;
    m.ee_sigma = std::abs(model.sigma - sigma0);
    m.aprb = (y_test - model.predict(X_test)).cwiseAbs().mean();
    return m;
}

struct SimMethod {
    std::string label;
    FitConfig fit;
    SelectionConfig selection;
};

struct ReplicationResult {
    int rep = 0;
    bool failed = false;
    std::string error;
    MetricRow metrics;
};

struct MethodSummary {
    std::string label;
    MetricRow mean;
    MetricRow se;
    double tp_full_fraction = 0.0;  // share of replications with TP = 1
    int n_ok = 0;
    int n_failed = 0;
    std::vector<ReplicationResult> replications;
};

struct SimReport {
    std::vector<MethodSummary> methods;
};

namespace detail {

inline void summarize(MethodSummary& ms)
{
    std::vector<MetricRow> ok;
    for (const auto& r : ms.replications) {
        if (r.failed)
            ++ms.n_failed;
        else
            ok.push_back(r.metrics);
    }
    ms.n_ok = static_cast<int>(ok.size());
    if (ok.empty()) return;
    const double k = static_cast<double>(ok.size());
    auto fields = [](MetricRow& m) {
        return std::vector<double*>{&m.ms, &m.tp, &m.tn, &m.mses, &m.msen, &m.ee_sigma, &m.aprb};
    };
    auto mean_f = fields(ms.mean);
    auto se_f = fields(ms.se);
    for (std::size_t f = 0; f < mean_f.size(); ++f) {
        double s = 0.0;
        for (auto& row : ok) s += *fields(row)[f];
        const double mu = s / k;
        double v = 0.0;
        for (auto& row : ok) v += (*fields(row)[f] - mu) * (*fields(row)[f] - mu);
        *mean_f[f] = mu;
        *se_f[f] = ok.size() > 1 ? std::sqrt(v / (k - 1.0) / k) : 0.0;
    }
    int full = 0;
    for (const auto& row : ok) full += row.tp == 1.0;
    ms.tp_full_fraction = full / k;
}

} // namespace detail

/// One replication: generate, contaminate, fit each method along its path.
inline std::vector<ReplicationResult> run_replication(const SimScenario& sc, const std::vector<SimMethod>& methods,
                                                      int rep)
{
    SimData d = generate(sc, rep);
    Philox crng(sc.seed, static_cast<std::uint32_t>(rep), kContamination);
    contaminate(d.y, d.X, sc.contamination, crng);
    std::vector<ReplicationResult> out(methods.size());
    for (std::size_t m = 0; m < methods.size(); ++m) {
        out[m].rep = rep;
        try {
            const Dataset ds = standardize(d.y, d.X);
            SelectionConfig sel = methods[m].selection;
            sel.seed = sc.seed ^ (static_cast<std::uint64_t>(rep) << 32);
            sel.threads = 1;
            const RegularizationPath path = fit_path(ds, methods[m].fit, sel);
            const FittedModel& best = path.selected();
            if (best.failed()) detail::fail(ErrorCode::InvalidArgument, best.error);
            out[m].metrics = metrics(best, d.beta0, d.sigma0, d.y_test, d.X_test);
        } catch (const std::exception& e) {
            out[m].failed = true;
            out[m].error = e.what();
        }
    }
    return out;
}

inline SimReport run_study(const SimScenario& sc, const std::vector<SimMethod>& methods, unsigned threads = 1)
{
    sc.validate();
    std::vector<std::vector<ReplicationResult>> per_rep(static_cast<std::size_t>(sc.n_replications));
    parallel_for(per_rep.size(), threads,
                 [&](std::size_t r) { per_rep[r] = run_replication(sc, methods, static_cast<int>(r)); });
    SimReport report;
    for (std::size_t m = 0; m < methods.size(); ++m) {
        MethodSummary ms;
        ms.label = methods[m].label;
        for (const auto& rows : per_rep) ms.replications.push_back(rows[m]);
        detail::summarize(ms);
        report.methods.push_back(std::move(ms));
    }
    return report;
}

inline std::string report_csv(const SimReport& report)
{
    std::ostringstream os;
    os.precision(10);
    os << "method,n_ok,n_failed,ms,tp,tn,mses,msen,ee_sigma,aprb,tp_full,"
          "se_ms,se_tp,se_tn,se_mses,se_msen,se_ee_sigma,se_aprb\n";
    for (const auto& m : report.methods) {
        const auto& a = m.mean;
        const auto& s = m.se;
        os << m.label << ',' << m.n_ok << ',' << m.n_failed << ',' << a.ms << ',' << a.tp << ',' << a.tn << ','
           << a.mses << ',' << a.msen << ',' << a.ee_sigma << ',' << a.aprb << ',' << m.tp_full_fraction << ','
           << s.ms << ',' << s.tp << ',' << s.tn << ',' << s.mses << ',' << s.msen << ',' << s.ee_sigma << ','
           << s.aprb << '\n';
    }
    return os.str();
}

} // namespace dpdlasso
