#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "blowup/adaptive_driver.hpp"
#include "blowup/ode_blowup.hpp"

namespace blowup::io {

/// Bad configuration or malformed input file. Exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitOverflow = 2;

/// tol_m = first * base^m, m = 0..count-1.
struct Ladder {
  double first = 1.0;
  double base = 0.125;
  int count = 1;
  std::vector<double> values() const;
};

/// A named catalog expression with its parameters.
struct Expr {
  std::string name = "zero";
  std::vector<double> params;
};

struct OdeConfig {
  std::vector<double> coeffs;  ///< alpha_0 .. alpha_p
  double u0 = 1.0;
  std::optional<double> blowup_time;
  std::vector<ode::Scheme> schemes;
  int algorithm = 2;
  double tau1 = 0.1;
  int fit_levels = 6;
};

struct PdeConfig {
  Box domain{-4.0, -4.0, 4.0, 4.0};
  double epsilon = 1.0;
  double gamma = 30.0;
  Expr velocity;
  Expr f0;
  Expr u0;
  /// ttol+ ladder; stol+ and the rest come from `adapt`.
  AdaptConfig adapt;
  double ttol_minus_ratio = 0.01;
  double stol_minus_ratio = 1e-6;
  bool dump_fields = true;
};

struct RunConfig {
  enum class Mode { Ode, Pde } mode = Mode::Ode;
  Ladder ladder;
  std::filesystem::path output_dir = ".";
  unsigned seed = 0;
  OdeConfig ode;
  PdeConfig pde;
};

/// Parses the JSON config text. Unknown keys are rejected.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// The output directory: $BLOWUP_OUTPUT_DIR when set, else the config's.
std::filesystem::path output_directory(const RunConfig& config);

ProblemData make_problem(const PdeConfig& pde);

/// Number formatting used in every CSV: 17 significant digits, C locale.
std::string fmt(double v);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// Column index by name, or -1.
  int column(const std::string& name) const;
  /// Numeric column; throws ConfigError on a non-number.
  std::vector<double> numbers(const std::string& name) const;
};

std::string to_csv(const Table& t);
/// Throws ConfigError on ragged rows or an empty header.
Table parse_csv(const std::string& text);
Table read_csv(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

/// Writes ode_runs.csv (one row per scheme and tolerance) and, when the
/// ladder has at least two levels and T* is known, ode_rates.csv.
int cmd_ode_run(const RunConfig& config, std::ostream& log);

/// Writes pde_summary.csv (ttol+, steps, estimator, final time, norm) and per
/// level: ledger, trajectory, meshes and field dumps at t=0 and t=T.
int cmd_pde_run(const RunConfig& config, std::ostream& log);

/// Reports fits for CSVs written by the two commands above (or typed by
/// hand with the same headers). For trajectories, t_star replaces the
/// blow-up time extrapolated from the file's own last two points.
int cmd_rates(const std::vector<std::filesystem::path>& files, std::ostream& out,
              std::optional<double> t_star = {});

}  // namespace blowup::io
