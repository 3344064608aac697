#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "soma/bounds.hpp"
#include "soma/commands.hpp"
#include "soma/errors.hpp"

#ifndef SOMA_CLI_PATH
#define SOMA_CLI_PATH "soma"
#endif

namespace soma {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("soma_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  fs::path root_;
};

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

RunConfig beta_config(std::size_t iters, std::size_t thin) {
  return parse_config(Json::parse(R"({"version": 1, "experiment": "sample",
      "target": {"kind": "beta_laplace", "a0": 10, "b0": 10, "eps": 1.0, "y_obs": 0.5, "n": 3},
      "iters": )" + std::to_string(iters) + R"(, "thin": )" + std::to_string(thin) + "}"));
}

TEST_F(Cli, SampleRowsAndReplay) {
  const RunConfig c = beta_config(1000, 10);
  OutputDir a(root_ / "a"), b(root_ / "b");
  EXPECT_EQ(cmd_sample(c, a), kExitOk);
  EXPECT_EQ(cmd_sample(c, b), kExitOk);
  for (const char* kind : {"soma", "ran_imwg", "sys_imwg"}) {
    const std::string name = std::string("trace_") + kind + ".csv";
    const auto rows = read_csv(root_ / "a" / name);
    ASSERT_EQ(rows.size(), 1u + 100u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"iteration", "x0", "x1", "x2"}));
    EXPECT_EQ(read_file(root_ / "a" / name), read_file(root_ / "b" / name));
  }
  const Json s = Json::parse(read_file(root_ / "a" / "summary.json"));
  EXPECT_EQ(s["seed"], c.seed);
  EXPECT_EQ(s["config"], to_json(c));
  EXPECT_EQ(s["runs"].size(), 3u);
}

TEST_F(Cli, SampleSummaryMatchesTrace) {
  // with continuous offers an accepted step always changes the state
  const RunConfig c = beta_config(2000, 1);
  OutputDir out(root_);
  cmd_sample(c, out);
  const Json s = Json::parse(read_file(root_ / "summary.json"));
  const Model m = build_model(c.target);
  Rng init_rng = make_rng(derive_seed(c.seed, 0));
  const State init = initial_state(m, init_rng);
  for (const auto& run : s["runs"]) {
    const auto rows = read_csv(root_ / ("trace_" + run["kind"].get<std::string>() + ".csv"));
    std::vector<std::string> prev;
    for (double v : init.flat()) prev.push_back(format_number(v));
    std::size_t changes = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const std::vector<std::string> cur(rows[r].begin() + 1, rows[r].end());
      changes += cur != prev ? 1 : 0;
      prev = cur;
    }
    EXPECT_EQ(run["accept_count"].get<std::size_t>(), changes);
    EXPECT_EQ(run["step_count"].get<std::size_t>(), 2000u);
    EXPECT_DOUBLE_EQ(run["acceptance_rate"].get<double>(), static_cast<double>(changes) / 2000.0);
  }
}

TEST_F(Cli, CoupleRowsAndCensoring) {
  RunConfig c = beta_config(10, 1);
  c.replicates = 1;
  c.burn_in = 10;
  c.t_max = 10000;
  c.samplers = {SamplerKind::Soma};
  OutputDir out(root_ / "one");
  EXPECT_EQ(cmd_couple(c, out), kExitOk);
  const auto rows = read_csv(root_ / "one" / "meeting_times.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"replicate", "kind", "tau", "censored"}));
  const Json rates = Json::parse(read_file(root_ / "one" / "rates.json"));
  EXPECT_TRUE(rates["rates"][0]["r_hat"].is_null());

  c.target["n"] = 40;
  c.t_max = 1;
  c.replicates = 3;
  OutputDir censored(root_ / "censored");
  EXPECT_EQ(cmd_couple(c, censored), kExitCensored);
  for (std::size_t r = 1; r < 4; ++r) EXPECT_EQ(read_csv(root_ / "censored" / "meeting_times.csv")[r][3], "true");
  c.allow_censored = true;
  OutputDir allowed(root_ / "allowed");
  EXPECT_EQ(cmd_couple(c, allowed), kExitOk);
}

TEST_F(Cli, CoupleHistogramOrdering) {
  RunConfig c = parse_config(Json::parse(R"({"version": 1,
      "target": {"kind": "perturbed_histogram", "n": 20, "eps": 5, "bins": 10, "data_seed": 3},
      "samplers": ["soma", "ran_imwg"], "replicates": 40, "burn_in": 5000, "t_max": 400000,
      "allow_censored": true, "workers": 4})"));
  OutputDir out(root_);
  cmd_couple(c, out);
  const Json r = Json::parse(read_file(root_ / "rates.json"))["rates"];
  ASSERT_FALSE(r[0]["r_hat"].is_null());
  if (!r[1]["r_hat"].is_null()) {
    EXPECT_LT(r[0]["r_hat"].get<double>(), r[1]["r_hat"].get<double>());
  }
  double mean[2] = {0, 0};
  for (const auto& row : read_csv(root_ / "meeting_times.csv")) {
    if (row[1] == "soma") mean[0] += std::stod(row[2]);
    if (row[1] == "ran_imwg") mean[1] += std::stod(row[2]);
  }
  EXPECT_LT(mean[0], mean[1]);
}

TEST_F(Cli, BoundsTable) {
  RunConfig c;
  c.n_list = {2, 5, 10};
  c.m_list = {1.0, 2.0, 5.0};
  OutputDir out(root_);
  EXPECT_EQ(cmd_bounds(c, out), kExitOk);
  const auto rows = read_csv(root_ / "bounds.csv");
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows[1], (std::vector<std::string>{"2", "1", "1", "1", "0.5", "0.5", "0"}));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::size_t n = std::stoul(rows[r][0]);
    const double m = std::stod(rows[r][1]);
    EXPECT_DOUBLE_EQ(std::stod(rows[r][2]), accept_bound_soma(n, m));
    EXPECT_GE(std::stod(rows[r][2]), std::stod(rows[r][3]));
  }
  // rows are n-major: the M-sweep within an n raises every rate column
  for (std::size_t r = 2; r < rows.size(); ++r) {
    if (rows[r][0] != rows[r - 1][0]) continue;
    for (int col = 4; col < 7; ++col) EXPECT_GT(std::stod(rows[r][col]), std::stod(rows[r - 1][col]));
    EXPECT_LT(std::stod(rows[r][2]), std::stod(rows[r - 1][2]));
  }
  RunConfig empty;
  OutputDir none(root_ / "none");
  EXPECT_THROW(cmd_bounds(empty, none), ConfigError);
}

TEST(Config, ValidationAndRoundTrip) {
  EXPECT_THROW(parse_config(Json::parse(R"({"version": 1, "iterz": 5})")), ConfigError);
  EXPECT_THROW(parse_config(Json::parse(R"({"version": 2})")), ConfigError);
  EXPECT_THROW(parse_config(Json::parse(R"({"samplers": ["mtm"]})")), ConfigError);
  EXPECT_THROW(parse_config(Json::parse(R"({"iters": "many"})")), ConfigError);
  EXPECT_THROW(parse_config(Json::parse(R"({"thin": 0})")), ConfigError);
  EXPECT_THROW(build_model(Json::parse(R"({"kind": "beta_laplace", "eps": 1, "y_obs": 0.5, "n": 2, "colour": 1})")),
               ConfigError);
  EXPECT_THROW(build_model(Json::parse(R"({"kind": "bayesian_pca"})")), ConfigError);
  const RunConfig c = beta_config(123, 3);
  EXPECT_EQ(to_json(parse_config(to_json(c))), to_json(c));
}

TEST(Overrides, Whitelist) {
  const RunConfig base = recipe_defaults("fig3A");
  const RunConfig c = apply_overrides(base, {"iters=77", "seed=5", "workers=2"});
  EXPECT_EQ(c.iters, 77u);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.workers, 2);
  Json a = to_json(c), b = to_json(base);
  for (const char* k : {"iters", "seed", "workers"}) {
    a.erase(k);
    b.erase(k);
  }
  EXPECT_EQ(a, b);
  EXPECT_THROW(apply_overrides(base, {"target=1"}), ConfigError);
  EXPECT_THROW(apply_overrides(base, {"allow_censored=0"}), ConfigError);
  EXPECT_THROW(apply_overrides(base, {"iters"}), ConfigError);
  EXPECT_THROW(apply_overrides(base, {"iters=lots"}), ConfigError);
}

TEST(Experiments, Registry) {
  std::vector<std::string> ids;
  for (const auto& e : experiments()) {
    ids.push_back(e.id);
    EXPECT_FALSE(e.feeds.empty());
  }
  EXPECT_EQ(ids, (std::vector<std::string>{"fig2", "fig3A", "fig3B", "fig4A", "fig4B", "fig5", "fig6", "fig7",
                                           "fig8", "fig9", "fig10", "fig11", "table1"}));
  for (const auto& id : ids) EXPECT_NO_THROW(parse_config(to_json(recipe_defaults(id)))) << id;
  try {
    recipe_defaults("fig12");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("table1"), std::string::npos);
  }
}

TEST_F(Cli, ExperimentFig3A) {
  const RunConfig c = apply_overrides(recipe_defaults("fig3A"), {"iters=200"});
  OutputDir out(root_);
  EXPECT_EQ(cmd_experiment("fig3A", c, out), kExitOk);
  const auto rows = read_csv(root_ / "fig3A" / "acceptance.csv");
  ASSERT_EQ(rows.size(), 1u + 3u * 7u);
  std::set<std::string> kinds;
  for (std::size_t r = 1; r < rows.size(); ++r) kinds.insert(rows[r][0]);
  EXPECT_EQ(kinds.size(), 3u);
  const Json s = Json::parse(read_file(root_ / "fig3A" / "summary.json"));
  EXPECT_EQ(s["feeds_criterion"], "4");
  EXPECT_EQ(s["config"]["iters"], 200);
}

TEST_F(Cli, ExperimentTable1) {
  const RunConfig c = apply_overrides(recipe_defaults("table1"), {"iters=5", "replicates=2", "t_max=50"});
  OutputDir out(root_);
  EXPECT_EQ(cmd_experiment("table1", c, out), kExitOk);
  const auto rows = read_csv(root_ / "table1" / "table1.csv");
  ASSERT_EQ(rows.size(), 1u + 2u * 3u);
  EXPECT_EQ(rows[1][0], "3");
  EXPECT_EQ(rows[4][0], "30");
}

TEST_F(Cli, OutputDirRollback) {
  OutputDir out(root_ / "fresh");
  out.write("a/b/one.csv", "x\n1\n");
  out.write("two.json", "{}\n");
  EXPECT_TRUE(fs::exists(root_ / "fresh" / "a" / "b" / "one.csv"));
  out.rollback();
  EXPECT_FALSE(fs::exists(root_ / "fresh"));
}

int run(const std::string& args) {
  const int status = std::system((std::string(SOMA_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(Cli, BinaryExitCodes) {
  const std::string out = (root_ / "out").string();
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("--out " + out + " bounds --n 2 3 --M 1 2"), 0);
  EXPECT_TRUE(fs::exists(root_ / "out" / "bounds.csv"));
  {
    std::ofstream bad(root_ / "bad.json");
    bad << R"({"version": 1, "target": {"kind": "beta_laplace", "eps": -1, "y_obs": 0.5, "n": 2}})";
  }
  EXPECT_EQ(run("--config " + (root_ / "bad.json").string() + " --out " + (root_ / "bad").string() + " sample"), 2);
  EXPECT_FALSE(fs::exists(root_ / "bad"));
  EXPECT_EQ(run("experiment nope"), 2);
  EXPECT_EQ(run("experiment fig2 --set target=x"), 2);
  EXPECT_EQ(run("--out " + out + " --seed 4 experiment fig2 --set iters=20"), 0);
  const Json s = Json::parse(read_file(root_ / "out" / "fig2" / "summary.json"));
  EXPECT_EQ(s["seed"], 4);
}

}  // namespace
}  // namespace soma
