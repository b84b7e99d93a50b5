#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "uacnn/cli.hpp"

namespace uacnn {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("uacnn_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& contents) const {
    std::ofstream(path(name)) << contents;
    return path(name);
  }

  fs::path dir_;
};

std::string linear_net() {
  std::mt19937_64 rng(21);
  const auto net = NetworkSpec::make(
      {2, 3}, {LayerSpec::linear(testing::random_linear(rng, 3, 4)),
               LayerSpec::linear(testing::random_linear(rng, 4, 2))});
  return to_json(net).dump();
}

std::string linear_input() {
  return to_json(make_moment_tensor({2, 3}, {0.5, -1, 2, 0, 1, -0.5}, {1, 0.25, 2, 0.5, 0, 1}))
      .dump();
}

TEST_F(CliTest, PropagateWritesOutput) {
  const auto net = write("net.json", to_json(testing::lenet_style(3)).dump());
  std::mt19937_64 rng(3);
  const auto in = write("in.json", to_json(testing::random_tensor(rng, {1, 1, 28, 28}, 1, 0.2)).dump());
  std::ostringstream err;
  ASSERT_EQ(cli::cmd_propagate(net, in, path("out.json"), err), 0) << err.str();
  const auto out = load_moment_tensor(cli::read_file(path("out.json")));
  EXPECT_EQ(out.shape(), (Shape{1, 3}));
}

TEST_F(CliTest, PropagateInputMismatchNamesShapes) {
  const auto net = write("net.json", to_json(testing::lenet_style(3)).dump());
  const auto in = write("in.json", linear_input());
  std::ostringstream err;
  EXPECT_EQ(cli::cmd_propagate(net, in, path("out.json"), err), cli::kValidationFailure);
  EXPECT_NE(err.str().find("expected [1,1,28,28]"), std::string::npos) << err.str();
  EXPECT_NE(err.str().find("got [2,3]"), std::string::npos) << err.str();
  EXPECT_FALSE(fs::exists(path("out.json")));
  EXPECT_FALSE(fs::exists(path("out.json.partial")));
}

TEST_F(CliTest, PropagateMalformedJsonReportsByteOffset) {
  const auto net = write("net.json", R"({"input_shape":[2,3],"layers":[}})");
  const auto in = write("in.json", linear_input());
  std::ostringstream err;
  EXPECT_EQ(cli::cmd_propagate(net, in, path("out.json"), err), cli::kIoOrParse);
  EXPECT_NE(err.str().find("at byte"), std::string::npos) << err.str();
  EXPECT_FALSE(fs::exists(path("out.json")));
}

TEST_F(CliTest, PropagateMissingFileIsIoError) {
  std::ostringstream err;
  EXPECT_EQ(cli::cmd_propagate(path("nope.json"), path("nope2.json"), path("out.json"), err),
            cli::kIoOrParse);
  EXPECT_FALSE(fs::exists(path("out.json")));
}

TEST_F(CliTest, OracleLinearNetPassesAtSixSigma) {
  const auto net = write("net.json", linear_net());
  const auto in = write("in.json", linear_input());
  std::ostringstream err;
  ASSERT_EQ(cli::cmd_oracle(net, in, 1'000'000, 5, 6.0, path("report.json"), err), 0) << err.str();
  const auto report = parse_json(cli::read_file(path("report.json")));
  EXPECT_TRUE(report["pass"].get<bool>());
  ASSERT_EQ(report["layers"].size(), 2u);
  EXPECT_EQ(report["layers"][0]["judged_by"], "se_band");
  EXPECT_EQ(report["layers"][1]["oracle"]["samples"], 1'000'000);
}

TEST_F(CliTest, OracleTightBandFailsWithDiffTable) {
  const auto net = write("net.json", linear_net());
  const auto in = write("in.json", linear_input());
  std::ostringstream err;
  EXPECT_EQ(cli::cmd_oracle(net, in, 100'000, 5, 0.01, path("report.json"), err),
            cli::kValidationFailure);
  EXPECT_NE(err.str().find("index,analytic_mean,oracle_mean"), std::string::npos) << err.str();
  EXPECT_FALSE(fs::exists(path("report.json")));
}

TEST_F(CliTest, OracleIsByteIdenticalAcrossRuns) {
  const auto net = write("net.json", to_json(testing::lenet_style(9, 1, 2)).dump());
  std::mt19937_64 rng(9);
  const auto in = write("in.json", to_json(testing::random_tensor(rng, {1, 1, 28, 28}, 1, 0.2)).dump());
  std::ostringstream err;
  ASSERT_EQ(cli::cmd_oracle(net, in, 2000, 8, 6.0, path("a.json"), err), 0) << err.str();
  ASSERT_EQ(cli::cmd_oracle(net, in, 2000, 8, 6.0, path("b.json"), err), 0) << err.str();
  EXPECT_EQ(cli::read_file(path("a.json")), cli::read_file(path("b.json")));
}

TEST_F(CliTest, OracleSigmoidIsJudgedByApproximation) {
  const auto net = write("net.json", R"({"input_shape":[1,3],"layers":[{"kind":"sigmoid"}]})");
  const auto in = write("in.json", R"({"shape":[1,3],"means":[-1,0,2],"variances":[0.5,1,4]})");
  std::ostringstream err;
  ASSERT_EQ(cli::cmd_oracle(net, in, 100'000, 1, 6.0, path("r.json"), err), 0) << err.str();
  const auto report = parse_json(cli::read_file(path("r.json")));
  EXPECT_EQ(report["layers"][0]["judged_by"], "approximation");
  EXPECT_TRUE(report["layers"][0]["pass"].get<bool>());
}

std::vector<std::vector<double>> read_csv(const std::string& text, std::string& header) {
  std::istringstream in(text);
  std::getline(in, header);
  std::vector<std::vector<double>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<double> row;
    std::istringstream cells(line);
    for (std::string cell; std::getline(cells, cell, ',');) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

TEST_F(CliTest, ReluFigure) {
  std::ostringstream err;
  ASSERT_EQ(cli::cmd_figure("relu", path("relu.csv"), err), 0);
  const std::string text = cli::read_file(path("relu.csv"));
  EXPECT_EQ(text.find('\r'), std::string::npos);
  std::string header;
  const auto rows = read_csv(text, header);
  EXPECT_EQ(header, "mu,sigma,mean_out,var_out");
  EXPECT_EQ(rows.size(), 3u * 201u);
  bool found = false;
  for (const auto& r : rows) {
    if (r[0] == 0.0 && r[1] == 1.0) {
      found = true;
      EXPECT_NEAR(r[2], 0.3989422804, 1e-10);
      EXPECT_NEAR(r[3], 0.3408450569, 1e-10);
    }
  }
  EXPECT_TRUE(found);
}

TEST_F(CliTest, BceFigure) {
  std::ostringstream err;
  ASSERT_EQ(cli::cmd_figure("bce", path("bce.csv"), err), 0);
  std::string header;
  const auto rows = read_csv(cli::read_file(path("bce.csv")), header);
  EXPECT_EQ(header, "mu,sigma,expected_loss,standard_loss");
  EXPECT_EQ(rows.size(), 4u * 241u);
  bool found = false;
  for (const auto& r : rows) {
    EXPECT_GE(r[2], r[3]);
    if (r[0] == 0.0 && r[1] == 1.0) {
      found = true;
      EXPECT_NEAR(r[2], 0.8181471806, 1e-10);
      EXPECT_NEAR(r[3], 0.6931471806, 1e-10);
    }
  }
  EXPECT_TRUE(found);
}

TEST_F(CliTest, UnknownFigureWritesNothing) {
  std::ostringstream err;
  EXPECT_NE(cli::cmd_figure("gelu", path("x.csv"), err), 0);
  EXPECT_FALSE(fs::exists(path("x.csv")));
}

TEST(FormatNumber, IsLocaleIndependentRoundTrip) {
  EXPECT_EQ(cli::format_number(0.5), "0.5");
  EXPECT_EQ(cli::format_number(-2.0), "-2");
  const double v = 0.1 + 0.2;
  EXPECT_EQ(std::stod(cli::format_number(v)), v);
}

TEST_F(CliTest, BinaryExitCodes) {
  const std::string exe = UACNN_CLI_PATH;
  const auto net = write("net.json", linear_net());
  const auto in = write("in.json", linear_input());
  const auto bad = write("bad.json", "{");
  auto run = [](const std::string& cmd) {
    const int status = std::system((cmd + " 2>/dev/null").c_str());
    return WEXITSTATUS(status);
  };
  EXPECT_EQ(run(exe + " propagate --network " + net + " --input " + in + " --output " +
                path("o.json")),
            0);
  EXPECT_TRUE(fs::exists(path("o.json")));
  EXPECT_EQ(run(exe + " propagate --network " + bad + " --input " + in + " --output " +
                path("o2.json")),
            2);
  EXPECT_EQ(run(exe + " propagate --network " + net + " --input " +
                write("wrong.json", R"({"shape":[1,3],"means":[0,0,0],"variances":[0,0,0]})") +
                " --output " + path("o3.json")),
            1);
  EXPECT_EQ(run(exe + " oracle --network " + net + " --input " + in +
                " --samples 20000 --seed 3 --sigmas 0.01 --report " + path("r.json")),
            1);
  EXPECT_EQ(run(exe + " figure --which relu --output " + path("f.csv")), 0);
  EXPECT_EQ(run(exe + " figure --which tanh --output " + path("g.csv")), 1);
  EXPECT_FALSE(fs::exists(path("o2.json")));
  EXPECT_FALSE(fs::exists(path("o3.json")));
  EXPECT_FALSE(fs::exists(path("r.json")));
  EXPECT_FALSE(fs::exists(path("g.csv")));
}

}  // namespace
}  // namespace uacnn
