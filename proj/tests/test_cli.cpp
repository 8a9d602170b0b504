#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "blowup/cli_io.hpp"

using namespace blowup;
using namespace blowup::io;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("blowup_cli_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string ode_json(const fs::path& out, int count) {
  return R"({"mode": "ode", "output_dir": ")" + out.string() + R"(",
    "ladder": {"first": 0.1, "base": 0.1, "count": )" + std::to_string(count) + R"(},
    "ode": {"coeffs": [0, 0, 1], "u0": 1.0, "algorithm": 2, "tau1": 0.1}})";
}

}  // namespace

TEST(Config, ParsesOdeDefaults) {
  const RunConfig c = parse_config(R"({"mode": "ode", "ladder": {"count": 3}})");
  EXPECT_EQ(c.mode, RunConfig::Mode::Ode);
  EXPECT_EQ(c.ladder.values(), (std::vector<double>{1.0, 0.125, 0.015625}));
  ASSERT_TRUE(c.ode.blowup_time);
  EXPECT_DOUBLE_EQ(*c.ode.blowup_time, 1.0);
  EXPECT_EQ(c.ode.schemes.size(), 3u);
}

TEST(Config, ParsesPde) {
  const RunConfig c = parse_config(R"({"mode": "pde", "ladder": {"count": 2},
    "pde": {"domain": [-8, 8, -2, 2], "u0": {"name": "gaussian", "params": [10, 2]},
            "velocity": {"name": "constant", "params": [1, 1]}, "degree": 3, "grid": [8, 2]}})");
  EXPECT_EQ(c.mode, RunConfig::Mode::Pde);
  EXPECT_DOUBLE_EQ(c.pde.domain.x0, -8);
  EXPECT_DOUBLE_EQ(c.pde.domain.y1, 2);
  EXPECT_EQ(c.pde.adapt.degree, 3);
  EXPECT_EQ(c.pde.adapt.grid_nx, 8);
  const ProblemData d = make_problem(c.pde);
  EXPECT_TRUE(d.has_velocity());
  EXPECT_NEAR(d.initial(0, 0), 10.0, 1e-14);
}

TEST(Config, RejectsBadInput) {
  const char* bad[] = {
      R"({"mode": "ode", "ladder": {"count": 1}, "extra": 1})",
      R"({"mode": "ode", "ladder": {"count": 1, "step": 2}})",
      R"({"mode": "ode", "ladder": {"count": 1}, "ode": {"tolerance": 1}})",
      R"({"mode": "pde", "ladder": {"count": 1}, "pde": {"u0": {"name": "gaussian", "parms": [1]}}})",
      R"({"mode": "ode", "ladder": {"count": 0}})",
      R"({"mode": "ode"})",
      R"({"mode": "heat", "ladder": {"count": 1}})",
      R"({"mode": "ode", "ladder": {"count": 1}, "ode": {"schemes": ["rk4"]}})",
      R"({"mode": "ode", "ladder": {"count": 1}, "ode": {"algorithm": 3}})",
      R"({"mode": "ode", "ladder": {"count": 1}, "ode": {"tau1": -1}})",
      R"({"mode": "pde", "ladder": {"count": 1}, "pde": {"epsilon": 0}})",
      R"({"mode": "pde", "ladder": {"count": 1}, "pde": {"domain": [1, 0, 0, 1]}})",
      R"({"mode": "pde", "ladder": {"count": 1}, "pde": {"u0": {"name": "nope"}}})",
      R"({"mode": "pde", "ladder": {"count": 1}, "pde": {"velocity": {"name": "linear", "params": [1, 0, 0, 1]}}})",
      R"({"mode": "ode", "ladder": {"count": "two"}})",
      R"({"mode": "ode", "ladder": )",
  };
  for (const char* text : bad) EXPECT_THROW(parse_config(text), ConfigError) << text;
}

TEST(Csv, RoundTripAndNumbers) {
  Table t{{"a", "b"}, {{fmt(0.1), fmt(1.0 / 3.0)}, {fmt(-2.5e-300), fmt(12345678.9)}}};
  const Table back = parse_csv(to_csv(t));
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  const auto a = back.numbers("a");
  EXPECT_EQ(a[0], 0.1);
  EXPECT_EQ(back.numbers("b")[0], 1.0 / 3.0);
  EXPECT_EQ(a[1], -2.5e-300);
  EXPECT_EQ(back.column("c"), -1);
  EXPECT_THROW(back.numbers("c"), ConfigError);
}

TEST(Csv, Malformed) {
  EXPECT_THROW(parse_csv(""), ConfigError);
  EXPECT_THROW(parse_csv("a,b\n1,2,3\n"), ConfigError);
  EXPECT_THROW(parse_csv("a,b\n1\n"), ConfigError);
  EXPECT_THROW(parse_csv("a,b\n1,x\n").numbers("b"), ConfigError);
  EXPECT_THROW(parse_csv("a,b\n1,2.5z\n").numbers("b"), ConfigError);
  // comments and blank lines are skipped, empty trailing cells kept
  const Table t = parse_csv("# note\na,b\n\n1,\n");
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][1], "");
}

TEST(OdeCommand, SingleToleranceWritesNoRates) {
  const fs::path dir = fresh_dir("single");
  std::ostringstream log;
  EXPECT_EQ(cmd_ode_run(parse_config(ode_json(dir, 1)), log), kExitOk);
  EXPECT_TRUE(fs::exists(dir / "ode_runs.csv"));
  EXPECT_FALSE(fs::exists(dir / "ode_rates.csv"));
  const Table t = read_csv(dir / "ode_runs.csv");
  EXPECT_EQ(t.rows.size(), 3u);
}

TEST(OdeCommand, DeterministicAndRatesReadable) {
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
  std::ostringstream log;
  EXPECT_EQ(cmd_ode_run(parse_config(ode_json(a, 4)), log), kExitOk);
  EXPECT_EQ(cmd_ode_run(parse_config(ode_json(b, 4)), log), kExitOk);
  EXPECT_EQ(slurp(a / "ode_runs.csv"), slurp(b / "ode_runs.csv"));
  EXPECT_EQ(slurp(a / "ode_rates.csv"), slurp(b / "ode_rates.csv"));
  const Table rates = read_csv(a / "ode_rates.csv");
  EXPECT_EQ(rates.rows.size(), 3u);
  // The rates command recomputes the fits from the runs file.
  std::ostringstream out;
  EXPECT_EQ(cmd_rates({a / "ode_runs.csv"}, out), kExitOk);
  const std::string text = out.str();
  for (const auto& row : rates.rows) {
    const std::string line = row[0] + "," + row[2] + "," + row[3];
    EXPECT_NE(text.find(line), std::string::npos) << line << "\n" << text;
  }
}

TEST(OdeCommand, EnvironmentOverridesOutputDir) {
  const fs::path cfg_dir = fresh_dir("cfg_dir"), env_dir = fresh_dir("env_dir");
  ::setenv("BLOWUP_OUTPUT_DIR", env_dir.c_str(), 1);
  std::ostringstream log;
  cmd_ode_run(parse_config(ode_json(cfg_dir, 1)), log);
  ::unsetenv("BLOWUP_OUTPUT_DIR");
  EXPECT_TRUE(fs::exists(env_dir / "ode_runs.csv"));
  EXPECT_FALSE(fs::exists(cfg_dir / "ode_runs.csv"));
}

TEST(RatesCommand, SummaryAndTrajectory) {
  const fs::path dir = fresh_dir("rates");
  // ||U|| = 2 / (0.5 - t) along a trajectory; summary norms grow like N^0.5
  Table traj{{"k", "t", "linf"}, {}};
  for (int k = 0; k < 6; ++k) {
    const double t = 0.5 - 0.25 / (1 << k);
    traj.rows.push_back({std::to_string(k), fmt(t), fmt(2.0 / (0.5 - t))});
  }
  write_file(dir / "traj.csv", to_csv(traj));
  Table summary{{"ttol_plus", "steps", "linf", "final_time"}, {}};
  for (int m = 0; m < 4; ++m) {
    const double n = 10.0 * (1 << (2 * m));
    summary.rows.push_back({fmt(std::pow(0.125, m)), fmt(n), fmt(3.0 * std::sqrt(n)), fmt(0.1 * m)});
  }
  write_file(dir / "summary.csv", to_csv(summary));
  std::ostringstream out;
  EXPECT_EQ(cmd_rates({dir / "summary.csv", dir / "traj.csv"}, out), kExitOk);
  EXPECT_NE(out.str().find("norm_growth_exponent,0.5"), std::string::npos) << out.str();
  EXPECT_NE(out.str().find("t_star,0.5"), std::string::npos) << out.str();
  EXPECT_NE(out.str().find("p_tail_average,1"), std::string::npos) << out.str();

  std::ostringstream fixed;
  EXPECT_EQ(cmd_rates({dir / "traj.csv"}, fixed, 0.5), kExitOk);
  EXPECT_NE(fixed.str().find("t_star,0.5\n"), std::string::npos) << fixed.str();

  write_file(dir / "junk.csv", "x,y\n1,2\n");
  EXPECT_THROW(cmd_rates({dir / "junk.csv"}, out), ConfigError);
  EXPECT_THROW(cmd_rates({dir / "missing.csv"}, out), ConfigError);
  EXPECT_THROW(cmd_rates({dir / "traj.csv"}, out, 0.3), ConfigError);
}

TEST(PdeCommand, WritesAllOutputs) {
  const fs::path dir = fresh_dir("pde");
  const RunConfig c = parse_config(R"({"mode": "pde", "output_dir": ")" + dir.string() + R"(",
    "ladder": {"first": 1.0, "count": 1},
    "pde": {"domain": [-4, 4, -4, 4], "u0": {"name": "gaussian", "params": [10, 2]},
            "degree": 1, "grid": [2, 2], "max_level": 2, "stol_plus": 0.1}})");
  std::ostringstream log;
  EXPECT_EQ(cmd_pde_run(c, log), kExitOk);
  for (const char* f : {"pde_summary.csv", "level_0_ledger.csv", "level_0_trajectory.csv",
                        "level_0_mesh_initial.txt", "level_0_mesh_final.txt", "level_0_field_initial.csv",
                        "level_0_field_final.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  const Table s = read_csv(dir / "pde_summary.csv");
  ASSERT_EQ(s.rows.size(), 1u);
  const Table tr = read_csv(dir / "level_0_trajectory.csv");
  const Table lg = read_csv(dir / "level_0_ledger.csv");
  EXPECT_EQ(tr.rows.size(), lg.rows.size() + 1);
  EXPECT_EQ(s.numbers("steps")[0], static_cast<double>(lg.rows.size()));
  const MeshForest m = MeshForest::from_text(slurp(dir / "level_0_mesh_final.txt"));
  EXPECT_EQ(s.numbers("cells")[0], static_cast<double>(m.num_active()));
}
