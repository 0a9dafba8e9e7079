// dpdlasso: batch front end for fitting, path selection, simulation studies
// and influence diagnostics.

#include <limits>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dpdlasso/dpdlasso.hpp"
#include "dpdlasso/io.hpp"

namespace {

using namespace dpdlasso;

constexpr int kExitOk = 0;
constexpr int kExitDataError = 2;
constexpr int kExitNotConverged = 3;

struct ModelFlags {
    std::string input;
    std::string response = "y";
    std::string output;
    double gamma = 0.3;
    std::string weights = "adaptive";
    double scad_a = 3.7;
    std::string initializer = "huber";
    bool reanchor = false;
    int max_outer_iter = 100;
    double epsilon_outer = 1e-6;
};

struct SelectFlags {
    int n_lambdas = 50;
    double lambda_min_ratio = 1e-3;
    std::string criterion = "hbic";
    int folds = 5;
    std::string cv_loss = "dpd";
    std::uint64_t seed = 1;
    unsigned threads = default_threads();
};

void add_model_flags(CLI::App* cmd, ModelFlags& f)
{
    cmd->add_option("-i,--input", f.input, "CSV with a header row")->required()->check(CLI::ExistingFile);
    cmd->add_option("-r,--response", f.response, "response column name")->capture_default_str();
    cmd->add_option("--gamma", f.gamma, "DPD tuning parameter (0 = least squares)")->capture_default_str();
    cmd->add_option("--weights", f.weights, "unit | adaptive | scad")->capture_default_str();
    cmd->add_option("--scad-a", f.scad_a, "SCAD shape parameter, > 2")->capture_default_str();
    cmd->add_option("--initializer", f.initializer, "huber | ols")->capture_default_str();
    cmd->add_flag("--reanchor-weights{true},--freeze-weights{false}", f.reanchor,
                  "recompute adaptive weights from the previous iterate (default: frozen)");
    cmd->add_option("--max-outer-iter", f.max_outer_iter)->capture_default_str();
    cmd->add_option("--epsilon-outer", f.epsilon_outer)->capture_default_str();
}

void add_select_flags(CLI::App* cmd, SelectFlags& s)
{
    cmd->add_option("--n-lambdas", s.n_lambdas)->capture_default_str();
    cmd->add_option("--lambda-min-ratio", s.lambda_min_ratio)->capture_default_str();
    cmd->add_option("--criterion", s.criterion, "hbic | cv")->capture_default_str();
    cmd->add_option("--folds", s.folds, "folds for --criterion cv")->capture_default_str();
    cmd->add_option("--cv-loss", s.cv_loss, "dpd | trimmed")->capture_default_str();
    cmd->add_option("--seed", s.seed)->capture_default_str();
    cmd->add_option("--threads", s.threads, "worker threads")->check(CLI::PositiveNumber);
}

Initializer parse_initializer(const std::string& name)
{
    if (name == "huber") return Initializer::HuberLassoIrls;
    if (name == "ols") return Initializer::OlsLassoNonRobust;
    detail::fail(ErrorCode::InvalidArgument, "unknown initializer '" + name + "'");
}

FitConfig make_fit_config(const ModelFlags& f)
{
    FitConfig cfg;
    cfg.gamma = f.gamma;
    cfg.weight_scheme = parse_scheme(f.weights, f.scad_a);
    cfg.initializer = parse_initializer(f.initializer);
    cfg.reanchor_weights = f.reanchor;
    cfg.max_outer_iter = f.max_outer_iter;
    cfg.epsilon_outer = f.epsilon_outer;
    cfg.validate();
    return cfg;
}

SelectionConfig make_selection(const SelectFlags& s)
{
    SelectionConfig sel;
    sel.n_lambdas = s.n_lambdas;
    sel.lambda_min_ratio = s.lambda_min_ratio;
    sel.seed = s.seed;
    sel.threads = s.threads;
    if (s.criterion == "cv") {
        KFoldCv cv;
        cv.k = s.folds;
        if (s.cv_loss == "trimmed")
            cv.loss = TrimmedSquaredErrorCv{};
        else if (s.cv_loss != "dpd")
            detail::fail(ErrorCode::InvalidArgument, "unknown CV loss '" + s.cv_loss + "'");
        sel.criterion = cv;
    } else if (s.criterion != "hbic") {
        detail::fail(ErrorCode::InvalidArgument, "unknown criterion '" + s.criterion + "'");
    }
    sel.validate();
    return sel;
}

std::string summary_line(const FittedModel& m)
{
    std::ostringstream os;
    os << "MS=" << m.model_size() << " sigma=" << m.sigma << " lambda=" << m.lambda
       << " converged=" << (m.converged ? "true" : "false");
    if (m.degenerate_scale) os << " degenerate_scale=true";
    return os.str();
}

int model_exit(const FittedModel& m)
{
    if (m.failed()) {
        std::cerr << "fit failed: " << m.error << "\n";
        return kExitDataError;
    }
    if (!m.converged) {
        std::cerr << "warning: the fit did not converge; the model is flagged\n";
        return kExitNotConverged;
    }
    return kExitOk;
}

int cmd_fit(const ModelFlags& f, const SelectFlags& s, std::optional<double> lambda)
{
    const io::CsvData data = io::read_csv(f.input, f.response);
    const Dataset ds = standardize(data.y, data.X);
    FitConfig cfg = make_fit_config(f);
    FittedModel model;
    if (lambda) {
        cfg.lambda = *lambda;
        cfg.validate();
        model = fit(ds, cfg, initialize(ds, cfg));
    } else {
        model = fit_path(ds, cfg, make_selection(s)).selected();
    }
    if (!model.failed()) io::atomic_write(f.output, io::model_to_json(model, data.columns).dump(2) + "\n");
    std::cout << summary_line(model) << "\n";
    return model_exit(model);
}

int cmd_path(const ModelFlags& f, const SelectFlags& s, const std::string& model_out)
{
    const io::CsvData data = io::read_csv(f.input, f.response);
    const Dataset ds = standardize(data.y, data.X);
    const FitConfig cfg = make_fit_config(f);
    const RegularizationPath path = fit_path(ds, cfg, make_selection(s));

    std::ostringstream os;
    os.precision(12);
    os << "lambda,hbic,ms,sigma,converged";
    if (path.cv_error) os << ",cv_error";
    os << "\n";
    for (std::size_t k = 0; k < path.models.size(); ++k) {
        const auto& m = path.models[k];
        const auto i = static_cast<Index>(k);
        os << path.lambdas[i] << ',' << path.hbic[i] << ',' << m.model_size() << ','
           << (m.failed() ? std::numeric_limits<double>::quiet_NaN() : m.sigma) << ',' << (m.converged ? 1 : 0);
        if (path.cv_error) os << ',' << (*path.cv_error)[i];
        os << "\n";
    }
    io::atomic_write(f.output, os.str());
    const FittedModel& best = path.selected();
    if (!model_out.empty() && !best.failed())
        io::atomic_write(model_out, io::model_to_json(best, data.columns).dump(2) + "\n");
    std::cout << "selected_index=" << path.selected_index << " " << summary_line(best) << "\n";
    return model_exit(best);
}

struct SimulateFlags {
    std::string scenario;
    std::string output;
    std::vector<double> gammas;
    std::vector<std::string> weights;
    std::optional<int> replications;
    std::optional<std::uint64_t> seed;
    unsigned threads = default_threads();
    bool reanchor = false;
};

int cmd_simulate(const SimulateFlags& f)
{
    io::ScenarioFile file = io::read_scenario(f.scenario);
    if (!f.gammas.empty()) file.gammas = f.gammas;
    if (!f.weights.empty()) file.weights = f.weights;
    if (f.replications) file.scenario.n_replications = *f.replications;
    if (f.seed) file.scenario.seed = *f.seed;
    file.scenario.validate();
    auto methods = io::scenario_methods(file);
    for (auto& m : methods) m.fit.reanchor_weights = f.reanchor;
    const SimReport report = run_study(file.scenario, methods, f.threads);
    io::atomic_write(f.output, report_csv(report));
    for (const auto& m : report.methods) {
        std::cout << m.label << ": ok=" << m.n_ok << " failed=" << m.n_failed << " MS=" << m.mean.ms
                  << " TP=" << m.mean.tp << " EE=" << m.mean.ee_sigma << "\n";
        for (const auto& r : m.replications)
            if (r.failed) std::cerr << m.label << " replication " << r.rep << ": " << r.error << "\n";
    }
    return kExitOk;
}

struct DiagnoseFlags {
    std::string model;
    std::string input;
    std::string response = "y";
    std::string points;
    std::string output;
    std::optional<double> lambda;
    bool zero_initial_if = false;
};

int cmd_diagnose(const DiagnoseFlags& f)
{
    const FittedModel model = io::read_model(f.model);
    const io::CsvData data = io::read_csv(f.input, f.response);
    const io::CsvData pts = io::read_csv(f.points, f.response);
    detail::require(data.X.cols() == model.beta.size(), ErrorCode::DimensionMismatch,
                    "model has " + std::to_string(model.beta.size()) + " coefficients, data has " +
                        std::to_string(data.X.cols()) + " covariates");
    detail::require(pts.columns == data.columns, ErrorCode::DimensionMismatch,
                    "contamination points must have the same columns as the data");
    const std::vector<Index> support = support_of(model.beta, 0.0);
    detail::require(!support.empty(), ErrorCode::ZeroTrueCoefficient, "the model has an empty support");

    std::optional<VectorXd> if_init;
    if (f.zero_initial_if) if_init = VectorXd::Zero(static_cast<Index>(support.size()));
    const IfContext ctx = make_if_context(model.beta, model.sigma, model.gamma, sample_exx(data.X, support), if_init);
    const double lambda = f.lambda ? *f.lambda : model.lambda;

    std::ostringstream os;
    os.precision(12);
    os << "point,residual,if_sigma";
    for (Index j : support) os << ",if_" << data.columns[static_cast<std::size_t>(j)];
    os << "\n";
    for (Index i = 0; i < pts.X.rows(); ++i) {
        const VectorXd x = pts.X.row(i).transpose();
        const double y = pts.y[i] - model.intercept;
        const VectorXd ib = if_beta1(ctx, y, x, lambda);
        os << i + 1 << ',' << y - x.dot(model.beta) << ',' << if_sigma(model.sigma, model.gamma, y, x, model.beta);
        for (Index k = 0; k < ib.size(); ++k) os << ',' << ib[k];
        os << "\n";
    }
    io::atomic_write(f.output, os.str());
    std::cout << "wrote " << pts.X.rows() << " influence rows over " << support.size() << " support coordinates\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Robust sparse regression with the adaptive DPD-LASSO"};
    app.set_version_flag("--version", std::string("dpdlasso ") + DPDLASSO_VERSION);
    app.require_subcommand(1, 1);

    ModelFlags mf;
    SelectFlags sf;
    std::optional<double> lambda;
    auto* fit_cmd = app.add_subcommand("fit", "fit one model; HBIC/CV selects lambda unless --lambda is given");
    add_model_flags(fit_cmd, mf);
    add_select_flags(fit_cmd, sf);
    fit_cmd->add_option("-o,--output", mf.output, "model JSON")->required();
    fit_cmd->add_option("--lambda", lambda, "fixed regularization; skips selection");

    ModelFlags pf;
    SelectFlags ps;
    std::string path_model;
    auto* path_cmd = app.add_subcommand("path", "fit the lambda grid and write one CSV row per lambda");
    add_model_flags(path_cmd, pf);
    add_select_flags(path_cmd, ps);
    path_cmd->add_option("-o,--output", pf.output, "path CSV")->required();
    path_cmd->add_option("--model-output", path_model, "also write the selected model as JSON");

    SimulateFlags sim;
    auto* sim_cmd = app.add_subcommand("simulate", "run a Monte Carlo study from a scenario file");
    sim_cmd->add_option("-s,--scenario", sim.scenario, "key = value scenario file")->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("-o,--output", sim.output, "report CSV")->required();
    sim_cmd->add_option("--gamma", sim.gammas, "comma-separated gamma sweep")->delimiter(',');
    sim_cmd->add_option("--weights", sim.weights, "comma-separated weight schemes")->delimiter(',');
    sim_cmd->add_option("--replications", sim.replications);
    sim_cmd->add_option("--seed", sim.seed);
    sim_cmd->add_option("--threads", sim.threads)->check(CLI::PositiveNumber);
    sim_cmd->add_flag("--reanchor-weights{true},--freeze-weights{false}", sim.reanchor);

    DiagnoseFlags dg;
    auto* diag_cmd = app.add_subcommand("diagnose", "influence functions of a fitted model at given points");
    diag_cmd->add_option("-m,--model", dg.model, "model JSON from `fit`")->required()->check(CLI::ExistingFile);
    diag_cmd->add_option("-i,--input", dg.input, "data CSV used for E[xx']")->required()->check(CLI::ExistingFile);
    diag_cmd->add_option("-r,--response", dg.response)->capture_default_str();
    diag_cmd->add_option("-p,--points", dg.points, "CSV of contamination points, same header as the data")
        ->required()
        ->check(CLI::ExistingFile);
    diag_cmd->add_option("-o,--output", dg.output, "IF CSV")->required();
    diag_cmd->add_option("--lambda", dg.lambda, "lambda in the IF (default: the model's)");
    diag_cmd->add_flag("--zero-initial-if", dg.zero_initial_if, "treat the initial estimator's IF as zero");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitDataError;
    }

    try {
        if (*fit_cmd) return cmd_fit(mf, sf, lambda);
        if (*path_cmd) return cmd_path(pf, ps, path_model);
        if (*sim_cmd) return cmd_simulate(sim);
        if (*diag_cmd) return cmd_diagnose(dg);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDataError;
    }
    return kExitDataError;
}
