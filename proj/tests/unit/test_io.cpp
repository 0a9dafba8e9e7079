#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dpdlasso/io.hpp"
#include "unit/helpers.hpp"

using namespace dpdlasso;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const std::string& name)
{
    fs::create_directories(DPDLASSO_TEST_TMP);
    return (fs::path(DPDLASSO_TEST_TMP) / name).string();
}

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream(path) << text;
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(Csv, ReadsResponseAndNumericColumns)
{
    const std::string p = tmp_path("basic.csv");
    write_file(p, "a,y,label,\"b\"\r\n1,2,x,3\n4,5,z,6\n\n");
    const io::CsvData d = io::read_csv(p, "y");
    EXPECT_EQ(d.y, Eigen::Vector2d(2, 5));
    ASSERT_EQ(d.X.cols(), 2);
    EXPECT_EQ(d.X(1, 0), 4.0);
    EXPECT_EQ(d.X(1, 1), 6.0);
    EXPECT_EQ(d.columns, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(d.skipped, (std::vector<std::string>{"label"}));
}

TEST(Csv, Errors)
{
    const std::string p = tmp_path("bad.csv");
    write_file(p, "a,b\n1,2\n");
    try {
        io::read_csv(p, "y");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Parse);
        EXPECT_NE(std::string(e.what()).find("'y'"), std::string::npos);
    }
    write_file(p, "a,y\n1,2\n3\n");
    EXPECT_THROW(io::read_csv(p, "y"), Error);
    write_file(p, "a,y\n1,oops\n");
    EXPECT_THROW(io::read_csv(p, "y"), Error);
    try {
        io::read_csv(tmp_path("missing.csv"), "y");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Io);
    }
}

TEST(AtomicWrite, ReplacesContentWithoutLeftovers)
{
    const std::string p = tmp_path("atomic.txt");
    io::atomic_write(p, "first");
    io::atomic_write(p, "second\n");
    EXPECT_EQ(slurp(p), "second\n");
    for (const auto& e : fs::directory_iterator(fs::path(p).parent_path()))
        EXPECT_EQ(e.path().string().find("atomic.txt.tmp"), std::string::npos);
    EXPECT_THROW(io::atomic_write(tmp_path("no/such/dir/x.txt"), "x"), Error);
}

TEST(ModelJson, RoundTrip)
{
    const Dataset ds = testutil::linear_dataset(80, 40, testutil::sparse_beta(6));
    FitConfig cfg;
    cfg.lambda = 0.05;
    cfg.weight_scheme = ScadWeights{3.9, std::nullopt};
    const FittedModel m = fit(ds, cfg, initialize(ds, cfg));
    const nlohmann::json j = io::model_to_json(m, {"a", "b", "c", "d", "e", "f"});
    EXPECT_EQ(j["beta"].size(), 6u);
    EXPECT_EQ(j["weight_scheme"], "scad");
    for (Index s : j["support"].get<std::vector<Index>>()) EXPECT_GE(s, 1);

    const std::string p = tmp_path("model.json");
    io::atomic_write(p, j.dump(2));
    const FittedModel back = io::read_model(p);
    EXPECT_EQ(back.beta, m.beta);
    EXPECT_EQ(back.beta_std, m.beta_std);
    EXPECT_EQ(back.intercept, m.intercept);
    EXPECT_EQ(back.sigma, m.sigma);
    EXPECT_EQ(back.support, m.support);
    EXPECT_EQ(back.gamma, m.gamma);
    EXPECT_EQ(back.lambda, m.lambda);
    EXPECT_DOUBLE_EQ(std::get<ScadWeights>(back.weight_scheme).a, 3.9);
}

TEST(ModelJson, Malformed)
{
    EXPECT_THROW(io::model_from_json(nlohmann::json::parse(R"({"sigma": 1})")), Error);
    EXPECT_THROW(io::model_from_json(nlohmann::json::parse(R"({"beta": [1], "sigma": -1, "gamma": 0})")), Error);
    const std::string p = tmp_path("broken.json");
    write_file(p, "{not json");
    try {
        io::read_model(p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Parse);
    }
}

TEST(Scenario, ParsesAllKeys)
{
    const io::ScenarioFile f = io::parse_scenario(R"(
# desk scale
n = 60
p = 20
setting = A
contamination = x   # leverage points
frac = 0.2
cont_mean = 10
cont_sd = 2
n_cols = 4
random_cols = true
sigma0 = 1.5
rho = 0.3
replications = 7
seed = 99
n_test = 25
gammas = 0.1, 0.7
weights = unit,scad
scad_a = 4
n_lambdas = 12
lambda_min_ratio = 0.01
)");
    const auto& sc = f.scenario;
    EXPECT_EQ(sc.n, 60);
    EXPECT_EQ(sc.p, 20);
    EXPECT_EQ(sc.contamination.kind, ContaminationKind::XOutliers);
    EXPECT_DOUBLE_EQ(sc.contamination.frac, 0.2);
    EXPECT_DOUBLE_EQ(sc.contamination.mean, 10.0);
    EXPECT_DOUBLE_EQ(sc.contamination.sd, 2.0);
    EXPECT_EQ(sc.contamination.n_cols, 4);
    EXPECT_TRUE(sc.contamination.random_cols);
    EXPECT_DOUBLE_EQ(sc.sigma0, 1.5);
    EXPECT_DOUBLE_EQ(sc.rho, 0.3);
    EXPECT_EQ(sc.n_replications, 7);
    EXPECT_EQ(sc.seed, 99u);
    EXPECT_EQ(sc.n_test, 25);
    EXPECT_EQ(f.gammas, (std::vector<double>{0.1, 0.7}));
    EXPECT_EQ(f.weights, (std::vector<std::string>{"unit", "scad"}));

    const auto methods = io::scenario_methods(f);
    ASSERT_EQ(methods.size(), 4u);
    EXPECT_EQ(methods[1].label, "gamma=0.1;weights=scad");
    EXPECT_DOUBLE_EQ(std::get<ScadWeights>(methods[1].fit.weight_scheme).a, 4.0);
    EXPECT_EQ(methods[3].selection.n_lambdas, 12);
}

TEST(Scenario, Errors)
{
    EXPECT_THROW(io::parse_scenario("n = 10\nbogus = 1\n"), Error);
    EXPECT_THROW(io::parse_scenario("n = ten\n"), Error);
    EXPECT_THROW(io::parse_scenario("setting = C\n"), Error);
    EXPECT_THROW(io::parse_scenario("setting = B\np = 50\n"), Error);
    EXPECT_THROW(io::parse_scenario("frac = 1.5\n"), Error);
    EXPECT_THROW(io::parse_scenario("just a line\n"), Error);
    EXPECT_THROW(io::scenario_methods(io::parse_scenario("weights = mcp\n")), Error);
}
