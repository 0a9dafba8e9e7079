#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "dpdlasso/error.hpp"
#include "dpdlasso/simulation.hpp"
#include "dpdlasso/types.hpp"
#include "dpdlasso/weights.hpp"

namespace dpdlasso::io {

namespace detail {

inline std::string trim(std::string s)
{
    auto notspace = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
    s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
    return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline bool parse_double(const std::string& s, double& v)
{
    if (s.empty()) return false;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    if (*b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, e, v);
    return ec == std::errc() && ptr == e;
}

} // namespace detail

using dpdlasso::detail::fail;
using dpdlasso::detail::require;

struct CsvData {
    VectorXd y;
    MatrixXd X;
    std::vector<std::string> columns;  // names of the X columns, in order
    std::vector<std::string> skipped;  // non-numeric columns
};

/// Header row, one column named `response`, every other fully numeric column
/// becomes a covariate.
inline CsvData read_csv(const std::string& path, const std::string& response)
{
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path + "'");
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorCode::Parse, "'" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_csv_line(line);
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_csv_line(line);
        require(cells.size() == header.size(), ErrorCode::Parse,
                "row " + std::to_string(rows.size() + 2) + " has " + std::to_string(cells.size()) +
                    " fields, header has " + std::to_string(header.size()));
        rows.push_back(std::move(cells));
    }
    std::size_t yc = header.size();
    for (std::size_t j = 0; j < header.size(); ++j)
        if (header[j] == response) yc = j;
    require(yc < header.size(), ErrorCode::Parse, "response column '" + response + "' not found");

    const auto n = static_cast<Index>(rows.size());
    std::vector<std::size_t> numeric;
    CsvData out;
    for (std::size_t j = 0; j < header.size(); ++j) {
        bool ok = true;
        double v;
        for (const auto& r : rows) ok = ok && detail::parse_double(r[j], v);
        if (j == yc) {
            require(ok, ErrorCode::Parse, "response column '" + response + "' is not numeric");
            continue;
        }
        if (ok)
            numeric.push_back(j);
        else
            out.skipped.push_back(header[j]);
    }
    out.y.resize(n);
    out.X.resize(n, static_cast<Index>(numeric.size()));
    for (Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        detail::parse_double(r[yc], out.y[i]);
        for (std::size_t k = 0; k < numeric.size(); ++k) detail::parse_double(r[numeric[k]], out.X(i, static_cast<Index>(k)));
    }
    for (auto j : numeric) out.columns.push_back(header[j]);
    return out;
}

/// Writes to a sibling temporary file and renames it over `path`.
inline void atomic_write(const std::string& path, const std::string& content)
{
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp" + std::to_string(static_cast<unsigned long>(std::hash<std::string>{}(path) & 0xffffff));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(static_cast<bool>(out), ErrorCode::Io, "cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        require(static_cast<bool>(out), ErrorCode::Io, "write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        fail(ErrorCode::Io, "cannot move output into '" + path + "': " + ec.message());
    }
}

inline nlohmann::json model_to_json(const FittedModel& m, const std::vector<std::string>& columns = {})
{
    nlohmann::json j;
    j["beta"] = std::vector<double>(m.beta.data(), m.beta.data() + m.beta.size());
    j["beta_std"] = std::vector<double>(m.beta_std.data(), m.beta_std.data() + m.beta_std.size());
    j["intercept"] = m.intercept;
    j["sigma"] = m.sigma;
    std::vector<Index> support;
    for (Index s : m.support) support.push_back(s + 1);
    j["support"] = support;
    j["gamma"] = m.gamma;
    j["lambda"] = m.lambda;
    j["weight_scheme"] = scheme_name(m.weight_scheme);
    if (const auto* s = std::get_if<ScadWeights>(&m.weight_scheme)) j["scad_a"] = s->a;
    j["initializer"] = initializer_name(m.initializer);
    j["converged"] = m.converged;
    j["degenerate_scale"] = m.degenerate_scale;
    j["n_outer_iter"] = m.n_outer_iter;
    j["objective_trace"] = m.objective_trace;
    if (!columns.empty()) j["columns"] = columns;
    return j;
}

inline FittedModel model_from_json(const nlohmann::json& j)
{
    FittedModel m;
    try {
        const auto beta = j.at("beta").get<std::vector<double>>();
        m.beta = Eigen::Map<const VectorXd>(beta.data(), static_cast<Index>(beta.size()));
        if (j.contains("beta_std")) {
            const auto b = j.at("beta_std").get<std::vector<double>>();
            m.beta_std = Eigen::Map<const VectorXd>(b.data(), static_cast<Index>(b.size()));
        } else {
            m.beta_std = m.beta;
        }
        m.intercept = j.value("intercept", 0.0);
        m.sigma = j.at("sigma").get<double>();
        m.gamma = j.at("gamma").get<double>();
        m.lambda = j.value("lambda", 0.0);
        m.weight_scheme = parse_scheme(j.value("weight_scheme", std::string("adaptive")), j.value("scad_a", 3.7));
        m.converged = j.value("converged", true);
        for (Index s : j.value("support", std::vector<Index>{})) m.support.push_back(s - 1);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Parse, std::string("malformed model JSON: ") + e.what());
    }
    require(m.sigma > 0.0, ErrorCode::NonPositiveSigma, "model sigma must be positive");
    return m;
}

inline FittedModel read_model(const std::string& path)
{
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Parse, "'" + path + "' is not valid JSON: " + e.what());
    }
    return model_from_json(j);
}

/// Scenario file contents: the generative scenario plus the method grid.
struct ScenarioFile {
    SimScenario scenario;
    std::vector<double> gammas{0.0, 0.3, 0.5};
    std::vector<std::string> weights{"adaptive"};
    double scad_a = 3.7;
    int n_lambdas = 50;
    double lambda_min_ratio = 1e-3;
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

inline double to_double(const std::string& key, const std::string& v)
{
    double d;
    require(parse_double(v, d), ErrorCode::Parse, "'" + key + "' expects a number, got '" + v + "'");
    return d;
}

inline long long to_int(const std::string& key, const std::string& v)
{
    long long i;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), i);
    require(ec == std::errc() && ptr == v.data() + v.size(), ErrorCode::Parse,
            "'" + key + "' expects an integer, got '" + v + "'");
    return i;
}

inline bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(ErrorCode::Parse, "'" + key + "' expects true/false, got '" + v + "'");
}

} // namespace detail

/// Flat `key = value` lines; `#` starts a comment.
inline ScenarioFile parse_scenario(const std::string& text)
{
    ScenarioFile f;
    auto& sc = f.scenario;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, ErrorCode::Parse, "line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string v = detail::trim(line.substr(eq + 1));
        if (key == "n") sc.n = static_cast<int>(detail::to_int(key, v));
        else if (key == "p") sc.p = static_cast<int>(detail::to_int(key, v));
        else if (key == "setting") {
            require(v == "A" || v == "B", ErrorCode::Parse, "setting must be A or B");
            sc.setting = v == "A" ? Setting::A : Setting::B;
        } else if (key == "contamination") {
            if (v == "none") sc.contamination.kind = ContaminationKind::None;
            else if (v == "y") sc.contamination.kind = ContaminationKind::YOutliers;
            else if (v == "x") sc.contamination.kind = ContaminationKind::XOutliers;
            else fail(ErrorCode::Parse, "contamination must be none, y or x");
        } else if (key == "frac") sc.contamination.frac = detail::to_double(key, v);
        else if (key == "cont_mean") sc.contamination.mean = detail::to_double(key, v);
        else if (key == "cont_sd") sc.contamination.sd = detail::to_double(key, v);
        else if (key == "n_cols") sc.contamination.n_cols = static_cast<int>(detail::to_int(key, v));
        else if (key == "random_cols") sc.contamination.random_cols = detail::to_bool(key, v);
        else if (key == "sigma0") sc.sigma0 = detail::to_double(key, v);
        else if (key == "rho") sc.rho = detail::to_double(key, v);
        else if (key == "replications") sc.n_replications = static_cast<int>(detail::to_int(key, v));
        else if (key == "seed") sc.seed = static_cast<std::uint64_t>(detail::to_int(key, v));
        else if (key == "n_test") sc.n_test = static_cast<int>(detail::to_int(key, v));
        else if (key == "gammas") {
            f.gammas.clear();
            for (const auto& g : detail::split_list(v)) f.gammas.push_back(detail::to_double(key, g));
        } else if (key == "weights") f.weights = detail::split_list(v);
        else if (key == "scad_a") f.scad_a = detail::to_double(key, v);
        else if (key == "n_lambdas") f.n_lambdas = static_cast<int>(detail::to_int(key, v));
        else if (key == "lambda_min_ratio") f.lambda_min_ratio = detail::to_double(key, v);
        else fail(ErrorCode::Parse, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    sc.validate();
    require(!f.gammas.empty() && !f.weights.empty(), ErrorCode::Parse, "gammas and weights must be non-empty");
    return f;
}

inline ScenarioFile read_scenario(const std::string& path)
{
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

/// Methods as the cross product of gammas and weight schemes.
inline std::vector<SimMethod> scenario_methods(const ScenarioFile& f)
{
    std::vector<SimMethod> methods;
    for (double g : f.gammas) {
        for (const auto& w : f.weights) {
            SimMethod m;
            std::ostringstream label;
            label << "gamma=" << g << ";weights=" << w;
            m.label = label.str();
            m.fit.gamma = g;
            m.fit.weight_scheme = parse_scheme(w, f.scad_a);
            m.selection.n_lambdas = f.n_lambdas;
            m.selection.lambda_min_ratio = f.lambda_min_ratio;
            methods.push_back(std::move(m));
        }
    }
    return methods;
}

} // namespace dpdlasso::io
