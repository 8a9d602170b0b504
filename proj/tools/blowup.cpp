#include <iostream>

#include <CLI11.hpp>

#include "blowup/cli_io.hpp"

using namespace blowup;

int main(int argc, char** argv) {
  CLI::App app{"Adaptive blow-up solver for u' = f(u) and u_t - eps Lap u + a.grad u + f0 - u^2 = 0"};
  app.require_subcommand(1);
  std::string ode_config, pde_config;
  std::vector<std::string> rate_files;
  auto* ode_cmd = app.add_subcommand("ode", "ODE tolerance ladder with Algorithm 1 or 2");
  ode_cmd->add_option("--config", ode_config, "JSON config")->required();
  auto* pde_cmd = app.add_subcommand("pde", "IMEX dG with space-time adaptivity over a ttol+ ladder");
  pde_cmd->add_option("--config", pde_config, "JSON config")->required();
  auto* rates_cmd = app.add_subcommand("rates", "rate fits from CSVs written by ode/pde");
  rates_cmd->add_option("files", rate_files, "CSV files")->required();
  double t_star = 0.0;
  auto* t_star_opt = rates_cmd->add_option("--t-star", t_star, "blow-up time for trajectory rates");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? io::kExitOk : io::kExitConfig;
  }

  try {
    if (*ode_cmd) return io::cmd_ode_run(io::load_config(ode_config), std::cerr);
    if (*pde_cmd) return io::cmd_pde_run(io::load_config(pde_config), std::cerr);
    std::vector<std::filesystem::path> paths(rate_files.begin(), rate_files.end());
    return io::cmd_rates(paths, std::cout,
                         *t_star_opt ? std::optional<double>(t_star) : std::nullopt);
  } catch (const io::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return io::kExitConfig;
  }
}
