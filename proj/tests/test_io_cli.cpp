#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "switchfit_cli.hpp"

namespace switchfit {
namespace {

namespace fs = std::filesystem;
using io::json;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("switchfit_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return cli::run(std::move(args), out_, err_);
  }

  void write_model(const std::string& name, const SwitchingModel& m) {
    io::write_text(path(name), io::model_to_json(m).dump(2));
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

SwitchingModel two_regime_model() {
  Matrix a(2, 2);
  a << 0.95, 0.10, 0.05, 0.90;
  return SwitchingModel(a,
                        {RegimeParams(Eigen::Vector2d(0.5, 0.6), 0.2), RegimeParams(Eigen::Vector2d(-0.5, -0.3), 0.2)},
                        Eigen::Vector2d(0.5, 0.5));
}

TEST(SeriesCsv, RoundTripsEveryDouble) {
  std::mt19937_64 gen(3);
  std::vector<double> values;
  for (int k = 0; k < 5000; ++k) {
    double v;
    std::uint64_t bits = gen();
    std::memcpy(&v, &bits, sizeof v);
    if (std::isfinite(v)) values.push_back(v);
  }
  values.insert(values.end(), {0.0, -0.0, 0.1, 1e-310, 5e-324, 1.7976931348623157e308, -2.5});
  std::stringstream ss;
  io::write_series_csv(ss, values);
  EXPECT_EQ(ss.str().substr(0, 2), "y\n");
  const auto back = io::read_series_csv(ss);
  ASSERT_EQ(back.size(), values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    EXPECT_EQ(std::memcmp(&back[k], &values[k], sizeof(double)), 0) << values[k];
  }
}

TEST(SeriesCsv, RejectsMalformedInput) {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return io::read_series_csv(in);
  };
  EXPECT_EQ(parse("y\r\n1.5\r\n+2\n").size(), 2u);
  EXPECT_THROW(parse(""), InputError);
  EXPECT_THROW(parse("x\n1\n"), InputError);
  EXPECT_THROW(parse("y\n1,000\n"), InputError);
  EXPECT_THROW(parse("y\n1.5abc\n"), InputError);
  EXPECT_THROW(parse("y\nnan\n"), InputError);
  EXPECT_THROW(parse("y\ninf\n"), InputError);
}

TEST(ModelJson, RoundTrip) {
  const SwitchingModel m = random_model(3, 2, 8);
  const json j = io::model_to_json(m);
  EXPECT_EQ(io::model_from_json(json::parse(j.dump())), m);
  // Columns are stored as arrays: transition[c][i] = P(next = i | current = c).
  EXPECT_EQ(j["transition"][1][0].get<double>(), m.transition()(0, 1));
}

TEST(ModelJson, SchemaViolationsAreInputErrors) {
  const json good = io::model_to_json(two_regime_model());
  auto broken = [&](auto&& edit) {
    json j = good;
    edit(j);
    return j;
  };
  EXPECT_NO_THROW(io::model_from_json(good));
  EXPECT_THROW(io::model_from_json(broken([](json& j) { j.erase("regimes"); })), InputError);
  EXPECT_THROW(io::model_from_json(broken([](json& j) { j["n_regimes"] = -1; })), InputError);
  EXPECT_THROW(io::model_from_json(broken([](json& j) { j["n_regimes"] = 3; })), InputError);
  EXPECT_THROW(io::model_from_json(broken([](json& j) { j["ar_order"] = 2; })), InputError);
  EXPECT_THROW(io::model_from_json(broken([](json& j) { j["regimes"][0]["sigma"] = 0.0; })), InputError);
  EXPECT_THROW(io::model_from_json(broken([](json& j) { j["regimes"][1]["sigma"] = "1"; })), InputError);
  // Row-major transition is not column-stochastic here.
  EXPECT_THROW(io::model_from_json(broken([](json& j) {
                 j["transition"] = json::array({json::array({0.95, 0.10}), json::array({0.05, 0.90})});
               })),
               InputError);
  EXPECT_THROW(io::model_from_json(broken([](json& j) { j["initial_dist"] = {0.7, 0.7}; })), InputError);
  EXPECT_THROW(io::model_from_json(json::array()), InputError);
}

TEST_F(TempDir, SimulateWritesSeriesAndTruth) {
  const SwitchingModel m(Matrix::Ones(1, 1), {RegimeParams(Eigen::Vector3d(0.1, 0.2, 0.1), 1.0)}, Vector::Ones(1));
  write_model("m.json", m);
  ASSERT_EQ(run({"simulate", "--model", path("m.json"), "--length", "50", "--seed", "4", "--out", path("d.csv")}), 0)
      << err_.str();
  const auto values = io::read_series_csv(path("d.csv"));
  EXPECT_EQ(values.size(), 52u);
  const json truth = io::parse_json_file(path("d.truth.json"));
  EXPECT_EQ(truth["seed"], 4);
  EXPECT_EQ(truth["hidden_path"].size(), 50u);
  EXPECT_EQ(truth["hidden_path"][0], 1);
  EXPECT_EQ(io::model_from_json(truth["model"]), m);
  EXPECT_EQ(values, simulate(m, 50, 4).series.values());
}

TEST_F(TempDir, InvalidInputsExitTwo) {
  io::write_text(path("bad.json"), "{\"n_regimes\": 2,");
  EXPECT_EQ(run({"simulate", "--model", path("bad.json"), "--length", "5", "--out", path("d.csv")}), 2);
  EXPECT_NE(err_.str().find("invalid JSON"), std::string::npos);
  EXPECT_EQ(run({"simulate", "--model", path("missing.json"), "--length", "5", "--out", path("d.csv")}), 2);
  EXPECT_EQ(run({"simulate", "--length", "5", "--out", path("d.csv")}), 2);
  EXPECT_EQ(run({"fit", "--data", path("d.csv")}), 2);
  EXPECT_EQ(run({"frobnicate"}), 2);
  EXPECT_EQ(run({}), 2);

  io::write_text(path("short.csv"), "y\n1.0\n2.0\n");
  EXPECT_EQ(run({"fit", "--data", path("short.csv"), "--states", "2", "--order", "1", "--out", path("f.json")}), 2);
  EXPECT_EQ(run({"fit", "--data", path("short.csv"), "--states", "1", "--order", "0", "--algo", "magic", "--out",
                 path("f.json")}),
            2);
  write_model("m.json", two_regime_model());
  io::write_text(path("one.csv"), "y\n1.0\n");
  EXPECT_EQ(run({"eval", "--data", path("one.csv"), "--model", path("m.json")}), 2);
}

TEST_F(TempDir, FitSingleRegimeAndEvalAgree) {
  const SwitchingModel m(Matrix::Ones(1, 1), {RegimeParams(Eigen::Vector2d(0.3, 0.5), 0.8)}, Vector::Ones(1));
  write_model("m.json", m);
  ASSERT_EQ(run({"simulate", "--model", path("m.json"), "--length", "400", "--seed", "2", "--out", path("d.csv")}), 0);
  ASSERT_EQ(run({"fit", "--data", path("d.csv"), "--states", "1", "--order", "1", "--out", path("f.json")}), 0)
      << err_.str();
  const json report = io::parse_json_file(path("f.json"));
  EXPECT_TRUE(report["converged"].get<bool>());
  EXPECT_LE(report["iterations"].get<int>(), 2);
  EXPECT_EQ(report["algo"], "forward-only");
  EXPECT_EQ(report["initial_dist_policy"], "frozen");
  const ObservationSeries series(io::read_series_csv(path("d.csv")), 1);
  const OlsFit ols = ols_fit(series);
  const SwitchingModel fitted = io::model_from_json(report["model"]);
  EXPECT_LT((fitted.regime(0).coeffs() - ols.coeffs).cwiseAbs().maxCoeff(), 1e-10);

  io::write_text(path("fitted.json"), report["model"].dump());
  ASSERT_EQ(run({"eval", "--data", path("d.csv"), "--model", path("fitted.json")}), 0);
  const json ev = json::parse(out_.str());
  EXPECT_NEAR(ev["loglik"].get<double>(), report["loglik_trace"].back().get<double>(), 1e-9);
  EXPECT_EQ(ev["final_filter_probs"], json::array({1.0}));

  // Direct density product under the fitted model.
  double direct = 0.0;
  for (std::size_t l = 1; l <= series.length(); ++l) {
    direct += log_emission_density(0, fitted, series.emission(l), series.window_before(l));
  }
  EXPECT_NEAR(ev["loglik"].get<double>(), direct, 1e-9 * std::abs(direct));
}

TEST_F(TempDir, FitIsByteIdenticalForSameSeed) {
  write_model("m.json", two_regime_model());
  ASSERT_EQ(run({"simulate", "--model", path("m.json"), "--length", "600", "--seed", "9", "--out", path("d.csv")}), 0);
  const std::vector<std::string> args{"fit",   "--data", path("d.csv"), "--states", "2",           "--order",
                                      "1",     "--seed", "5",           "--out",    path("a.json")};
  const int code = run(args);
  EXPECT_TRUE(code == 0 || code == 3);
  auto again = args;
  again.back() = path("b.json");
  EXPECT_EQ(run(again), code);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));

  auto bw = args;
  bw.back() = path("c.json");
  bw.insert(bw.end(), {"--algo", "baum-welch"});
  EXPECT_EQ(run(bw), code);
  const json fo = io::parse_json_file(path("a.json")), fb = io::parse_json_file(path("c.json"));
  EXPECT_EQ(fb["algo"], "baum-welch");
  EXPECT_NEAR(fo["loglik_trace"].back().get<double>(), fb["loglik_trace"].back().get<double>(), 1e-6);
}

TEST_F(TempDir, MaxIterExhaustedExitsThree) {
  write_model("m.json", two_regime_model());
  ASSERT_EQ(run({"simulate", "--model", path("m.json"), "--length", "300", "--seed", "1", "--out", path("d.csv")}), 0);
  EXPECT_EQ(run({"fit", "--data", path("d.csv"), "--states", "2", "--order", "1", "--max-iter", "2", "--out",
                 path("f.json")}),
            3);
  const json report = io::parse_json_file(path("f.json"));
  EXPECT_FALSE(report["converged"].get<bool>());
  EXPECT_EQ(report["loglik_trace"].size(), 3u);
}

TEST_F(TempDir, EvalIdenticalRegimesGivesChainMarginals) {
  Matrix a(2, 2);
  a << 0.9, 0.3, 0.1, 0.7;
  const Vector pi(Eigen::Vector2d(0.2, 0.8));
  const SwitchingModel m(a, {RegimeParams(Vector::Constant(1, 0.4), 1.1), RegimeParams(Vector::Constant(1, 0.4), 1.1)},
                         pi);
  write_model("m.json", m);
  io::write_text(path("d.csv"), "y\n0.3\n-1.2\n2.5\n0.0\n");
  ASSERT_EQ(run({"eval", "--data", path("d.csv"), "--model", path("m.json"), "--trace", path("t.csv")}), 0);
  const json ev = json::parse(out_.str());
  Vector marginal = pi;
  for (int k = 0; k < 4; ++k) marginal = a * marginal;
  EXPECT_NEAR(ev["final_filter_probs"][0].get<double>(), marginal[0], 1e-14);
  EXPECT_NEAR(ev["final_filter_probs"][1].get<double>(), marginal[1], 1e-14);
  const std::string trace = slurp(path("t.csv"));
  EXPECT_EQ(trace.substr(0, trace.find('\n')), "step,scale,q_1,q_2");
  EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 5);
}

TEST_F(TempDir, CompareReportsAllFamilies) {
  const SwitchingModel m = random_model(3, 1, 2);
  write_model("m.json", m);
  ASSERT_EQ(run({"simulate", "--model", path("m.json"), "--length", "200", "--seed", "3", "--out", path("d.csv")}), 0);
  ASSERT_EQ(run({"compare", "--data", path("d.csv"), "--model", path("m.json")}), 0);
  const json rep = json::parse(out_.str());
  EXPECT_EQ(rep["families"].size(), 7u);
  EXPECT_LT(rep["max"].get<double>(), 1e-8);
}

TEST_F(TempDir, BenchCountsAreDeterministic) {
  auto counts = [&] {
    EXPECT_EQ(run({"bench", "--states-grid", "1,2,4", "--order-grid", "0,2", "--length", "300"}), 0);
    std::vector<std::string> lines;
    std::istringstream in(out_.str());
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream cols(line);
      std::string n, p, t, fo, fb;
      cols >> n >> p >> t >> fo >> fb;
      lines.push_back(n + " " + p + " " + t + " " + fo + " " + fb);
    }
    return lines;
  };
  const auto first = counts();
  EXPECT_EQ(first.size(), 7u);
  EXPECT_EQ(first, counts());

  const auto rows = run_bench({1, 2, 4, 8}, {1}, 200);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    EXPECT_GT(rows[k].forward_only_macs_per_step, rows[k - 1].forward_only_macs_per_step);
    EXPECT_GT(rows[k].forward_backward_macs_per_step, rows[k - 1].forward_backward_macs_per_step);
  }
  EXPECT_GT(rows[0].cost_ratio(), 0.1);
  EXPECT_LT(rows[0].cost_ratio(), 10.0);
}

TEST(CliHelpers, TruthPath) {
  EXPECT_EQ(cli::truth_path("data.csv"), "data.truth.json");
  EXPECT_EQ(cli::truth_path("dir.v2/data"), "dir.v2/data.truth.json");
}

}  // namespace
}  // namespace switchfit
