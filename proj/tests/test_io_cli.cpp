#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "pkbd/io.hpp"

using namespace pkbd;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pkbd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("pkbd_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST(Csv, DetectsHeaderAndLabels) {
  std::istringstream in("a,b,c,species\n3,4,0,setosa\n# comment\n\n0,0,2,virginica\n1,1,1,setosa\n");
  const auto t = read_csv_table(in);
  EXPECT_TRUE(t.had_header);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.line_numbers, (std::vector<std::size_t>{2, 5, 6}));
  const auto data = dataset_from_table(t, "species");
  EXPECT_EQ(data.dim(), 3u);
  EXPECT_NEAR(data.point(0)[0], 0.6, 1e-15);
  EXPECT_NEAR(data.point(1)[2], 1.0, 1e-15);
  EXPECT_EQ(*data.labels(), (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(dataset_from_table(t, "3").labels(), data.labels());
}

TEST(Csv, HeaderlessAndIntegerLabels) {
  std::istringstream in("1,0,7\n0,1,-2\n");
  const auto t = read_csv_table(in);
  EXPECT_FALSE(t.had_header);
  EXPECT_EQ(*dataset_from_table(t, "2").labels(), (std::vector<int>{7, -2}));
  std::istringstream forced("1,0\n0,1\n");
  EXPECT_EQ(read_csv_table(forced, HeaderMode::Present).rows.size(), 1u);
}

TEST(Csv, ReportsZeroRowsAndBadFields) {
  std::istringstream zero("x,y\n1,2\n0,0\n3,3\n0,0\n");
  try {
    dataset_from_table(read_csv_table(zero));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroVector);
    EXPECT_NE(std::string(e.what()).find("line(s) 3 5"), std::string::npos) << e.what();
  }
  std::istringstream ragged("1,2\n3\n");
  try {
    read_csv_table(ragged);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  std::istringstream bad("x,y\n1,abc\n");
  EXPECT_THROW(dataset_from_table(read_csv_table(bad)), Error);
  std::istringstream empty("x,y\n");
  EXPECT_THROW(read_csv_table(empty), Error);
}

TEST(Csv, WriteThenReadRoundTrip) {
  Rng rng(3);
  std::vector<UnitVector> pts;
  for (int i = 0; i < 20; ++i) {
    std::vector<double> v(4);
    for (auto& x : v) x = rng.normal();
    pts.push_back(normalize(v));
  }
  Dataset data(pts);
  data.set_labels(std::vector<int>(20, 1));
  std::ostringstream out;
  write_dataset_csv(out, data);
  std::istringstream in(out.str());
  const auto back = dataset_from_table(read_csv_table(in), "label");
  ASSERT_EQ(back.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(back.point(i)[j], data.point(i)[j], 1e-15);
}

TEST(ModelJson, RoundTrip) {
  MixtureModel m;
  m.d = 3;
  m.components = {PkbdComponent(normalize(std::vector<double>{1.0, 2.0, 3.0}), 0.123456789),
                  PkbdComponent(UnitVector{0.0, 0.0, 1.0}, 0.9)};
  m.weights = {0.3, 0.5};
  m.has_noise = true;
  m.noise_weight = 0.2;
  const auto back = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
  EXPECT_EQ(back.d, 3u);
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.noise_weight, 0.2);
  EXPECT_TRUE(back.has_noise);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(back.components[k].rho(), m.components[k].rho());
    EXPECT_NEAR(dot(back.components[k].mu(), m.components[k].mu()), 1.0, 1e-15);
  }
  auto broken = model_to_json(m);
  broken.erase("components");
  try {
    model_from_json(broken);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
  }
}

TEST(Manifest, RoundTrip) {
  RunManifest m;
  m.subcommand = "fit";
  m.params = {{"clusters", 3}, {"noise", true}};
  m.seed = 18446744073709551615ull;
  m.inputs = {"in.csv"};
  m.outputs = {"a.json", "b.csv"};
  m.duration_seconds = 1.25;
  EXPECT_EQ(manifest_from_json(nlohmann::json::parse(manifest_to_json(m).dump())), m);
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double x : {0.1, 1.0 / 3, 1e-300, -2.5e17, 0.97661})
    EXPECT_EQ(std::stod(format_double(x)), x);
  EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(Svg, ProducesDocument) {
  const auto svg = svg_line_plot("t", "x", "y", {{"s", {1, 2, 3}, {3, 1, 2}}});
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find("polyline"), std::string::npos);
}

TEST(CliExitCodes, MapErrors) {
  EXPECT_EQ(cli::exit_code_for(ErrorCode::EfficiencyTooLow), cli::kExitInfeasible);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::AllRunsDegenerate), cli::kExitNumerical);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::InvalidParameter), cli::kExitUsage);
}

TEST_F(TempDir, SampleIsDeterministicAndReportsEfficiency) {
  const auto a = run_cli({"sample", "--dist", "pkbd", "--d", "3", "--rho", "0.1", "--n", "2000", "--seed", "7",
                          "--out", path("a.csv")});
  const auto b = run_cli({"sample", "--dist", "pkbd", "--d", "3", "--rho", "0.1", "--n", "2000", "--seed", "7",
                          "--out", path("b.csv")});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_NE(a.out.find("predicted_efficiency: 0.9766"), std::string::npos) << a.out;
  const auto manifest = manifest_from_json(nlohmann::json::parse(slurp(path("a.csv.manifest.json"))));
  EXPECT_EQ(manifest.subcommand, "sample");
  EXPECT_EQ(manifest.seed, 7u);
  EXPECT_EQ(manifest.params.at("rho"), "0.1");

  const auto c = run_cli({"sample", "--d", "2", "--rho", "0.5", "--n", "10", "--seed", "8"});
  EXPECT_EQ(c.code, 0);
  EXPECT_EQ(std::count(c.out.begin(), c.out.end(), '\n'), 11);
}

TEST_F(TempDir, ExitCodes) {
  EXPECT_EQ(run_cli({"sample", "--bogus"}).code, 2);
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"sample", "--rho", "1.5"}).code, 2);
  EXPECT_EQ(run_cli({"sample", "--d", "100", "--rho", "0.9", "--n", "5"}).code, 3);
  EXPECT_EQ(run_cli({"fit", "--input", path("missing.csv"), "--clusters", "2"}).code, 2);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  EXPECT_EQ(run_cli({"--version"}).code, 0);
}

TEST_F(TempDir, DatagenFitSelectEval) {
  const auto gen = run_cli({"datagen", "--preset", "three-clusters", "--n", "150", "--rho", "0.9", "--seed", "3",
                            "--out", path("data.csv")});
  ASSERT_EQ(gen.code, 0) << gen.err;
  const auto fit = run_cli({"fit", "--input", path("data.csv"), "--label-column", "label", "--clusters", "3",
                            "--restarts", "3", "--seed", "4", "--out-prefix", path("run")});
  ASSERT_EQ(fit.code, 0) << fit.err;
  EXPECT_NE(fit.out.find("ari: "), std::string::npos);
  const auto model = model_from_json(nlohmann::json::parse(slurp(path("run.model.json"))));
  EXPECT_EQ(model.num_components(), 3u);
  EXPECT_TRUE(fs::exists(path("run.trace.csv")));
  EXPECT_TRUE(fs::exists(path("run.manifest.json")));

  const auto again = run_cli({"fit", "--input", path("data.csv"), "--label-column", "label", "--clusters", "3",
                              "--restarts", "3", "--seed", "4", "--out-prefix", path("run2")});
  EXPECT_EQ(slurp(path("run.model.json")), slurp(path("run2.model.json")));
  EXPECT_EQ(slurp(path("run.assignments.csv")), slurp(path("run2.assignments.csv")));

  const auto sel = run_cli({"select-k", "--input", path("data.csv"), "--label-column", "label", "--max-clusters",
                            "5", "--restarts", "3", "--seed", "5", "--out-prefix", path("sel"), "--svg",
                            path("sel.svg")});
  ASSERT_EQ(sel.code, 0) << sel.err;
  EXPECT_NE(sel.out.find("estimated_clusters: 3"), std::string::npos) << sel.out;
  EXPECT_EQ(slurp(path("sel.profile.csv")).rfind("M,distance,loglik,aic,bic\n", 0), 0u);
  EXPECT_TRUE(fs::exists(path("sel.svg")));

  const auto ev = run_cli({"eval", "--truth", path("data.csv") + ":label", "--pred", path("data.csv") + ":label"});
  ASSERT_EQ(ev.code, 0) << ev.err;
  const auto report = nlohmann::json::parse(ev.out);
  EXPECT_EQ(report.at("ari").get<double>(), 1.0);
  EXPECT_EQ(report.at("macro_precision").get<double>(), 1.0);
  EXPECT_EQ(report.at("macro_recall").get<double>(), 1.0);

  const auto ev2 = run_cli({"eval", "--truth", path("data.csv"), "--pred", path("run.assignments.csv") + ":cluster"});
  ASSERT_EQ(ev2.code, 0) << ev2.err;
  EXPECT_GT(nlohmann::json::parse(ev2.out).at("ari").get<double>(), 0.5);
}

TEST_F(TempDir, DatagenFromJsonSpec) {
  {
    std::ofstream spec(path("spec.json"));
    spec << R"({"d": 4, "n": 50, "components": [
      {"kind": "uniform", "weight": 0.5},
      {"kind": "pkbd", "weight": 0.25, "mu": "e2", "rho": 0.8},
      {"kind": "vmf", "weight": 0.25, "mu": [1, 1, 0, 0], "kappa": 3}]})";
  }
  const auto r = run_cli({"datagen", "--spec", path("spec.json"), "--seed", "1", "--out", path("out.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(path("out.csv"));
  const auto t = read_csv_table(in);
  EXPECT_EQ(t.header, (std::vector<std::string>{"x1", "x2", "x3", "x4", "label"}));
  EXPECT_EQ(t.rows.size(), 50u);
  {
    std::ofstream spec(path("bad.json"));
    spec << R"({"d": 3, "n": 5, "components": [{"kind": "uniform", "weight": 0.4}]})";
  }
  EXPECT_EQ(run_cli({"datagen", "--spec", path("bad.json"), "--out", path("bad.csv")}).code, 2);
}

TEST_F(TempDir, ReplicateEfficiencyTable) {
  const auto r = run_cli({"replicate", "--experiment", "tableA6", "--out-dir", path("res")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = slurp(path("res/tableA6.csv"));
  EXPECT_NE(csv.find("0.97661"), std::string::npos) << csv;
  EXPECT_TRUE(fs::exists(path("res/tableA6.manifest.json")));
}
