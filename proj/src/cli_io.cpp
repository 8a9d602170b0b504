#include "blowup/cli_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <locale>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace blowup::io {

using nlohmann::json;

std::vector<double> Ladder::values() const {
  std::vector<double> v;
  double x = first;
  for (int m = 0; m < count; ++m, x *= base) v.push_back(x);
  return v;
}

namespace {

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.contains(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
T get(const json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

double positive(double v, const std::string& what) {
  if (!std::isfinite(v) || !(v > 0.0)) throw ConfigError(what + " must be positive");
  return v;
}

Expr parse_expr(const json& j, const std::string& where) {
  only_keys(j, where, {"name", "params"});
  Expr e;
  e.name = get<std::string>(j, "name", where, "zero");
  e.params = get<std::vector<double>>(j, "params", where, {});
  return e;
}

Ladder parse_ladder(const json& j) {
  only_keys(j, "ladder", {"first", "base", "count"});
  Ladder l;
  l.first = positive(get<double>(j, "first", "ladder", 1.0), "ladder.first");
  l.base = positive(get<double>(j, "base", "ladder", 0.125), "ladder.base");
  l.count = get<int>(j, "count", "ladder", 1);
  if (l.count < 1) throw ConfigError("ladder.count must be at least 1");
  return l;
}

OdeConfig parse_ode(const json& j) {
  const std::string w = "ode";
  only_keys(j, w, {"coeffs", "u0", "blowup_time", "schemes", "algorithm", "tau1", "fit_levels"});
  OdeConfig c;
  c.coeffs = get<std::vector<double>>(j, "coeffs", w, {0.0, 0.0, 1.0});
  c.u0 = get<double>(j, "u0", w, 1.0);
  if (j.contains("blowup_time")) c.blowup_time = positive(get<double>(j, "blowup_time", w, 0.0), "ode.blowup_time");
  for (const auto& s : get<std::vector<std::string>>(j, "schemes", w, {"implicit", "explicit", "improved"})) {
    try {
      c.schemes.push_back(ode::scheme_from_string(s));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("ode.schemes: ") + e.what());
    }
  }
  if (c.schemes.empty()) throw ConfigError("ode.schemes is empty");
  const bool pure = c.coeffs.size() >= 3 && c.coeffs.back() == 1.0 &&
                    std::all_of(c.coeffs.begin(), c.coeffs.end() - 1, [](double a) { return a == 0.0; });
  if (!c.blowup_time && pure && c.u0 > 0.0)
    c.blowup_time = ode::PolynomialOde::power(static_cast<int>(c.coeffs.size()) - 1, c.u0).blowup_time();
  c.algorithm = get<int>(j, "algorithm", w, 2);
  if (c.algorithm != 1 && c.algorithm != 2) throw ConfigError("ode.algorithm must be 1 or 2");
  c.tau1 = positive(get<double>(j, "tau1", w, 0.1), "ode.tau1");
  c.fit_levels = get<int>(j, "fit_levels", w, 6);
  if (c.fit_levels < 2) throw ConfigError("ode.fit_levels must be at least 2");
  return c;
}

PdeConfig parse_pde(const json& j) {
  const std::string w = "pde";
  only_keys(j, w,
            {"domain", "epsilon", "gamma", "velocity", "f0", "u0", "stol_plus", "ttol_minus_ratio",
             "stol_minus_ratio", "tau1", "degree", "grid", "max_level", "max_halvings", "max_steps",
             "horizon", "C", "C_GN", "dump_fields"});
  PdeConfig c;
  const auto dom = get<std::vector<double>>(j, "domain", w, {-4.0, 4.0, -4.0, 4.0});
  if (dom.size() != 4) throw ConfigError("pde.domain must be [x0, x1, y0, y1]");
  c.domain = Box{dom[0], dom[2], dom[1], dom[3]};
  if (!(c.domain.x1 > c.domain.x0) || !(c.domain.y1 > c.domain.y0)) throw ConfigError("pde.domain is empty");
  c.epsilon = positive(get<double>(j, "epsilon", w, 1.0), "pde.epsilon");
  c.gamma = positive(get<double>(j, "gamma", w, 30.0), "pde.gamma");
  if (j.contains("velocity")) c.velocity = parse_expr(j["velocity"], "pde.velocity");
  if (j.contains("f0")) c.f0 = parse_expr(j["f0"], "pde.f0");
  if (j.contains("u0")) c.u0 = parse_expr(j["u0"], "pde.u0");
  AdaptConfig& a = c.adapt;
  a.stol_plus = positive(get<double>(j, "stol_plus", w, 1e-5), "pde.stol_plus");
  c.ttol_minus_ratio = get<double>(j, "ttol_minus_ratio", w, 0.01);
  c.stol_minus_ratio = get<double>(j, "stol_minus_ratio", w, 1e-6);
  if (!(c.ttol_minus_ratio > 0.0 && c.ttol_minus_ratio < 1.0) ||
      !(c.stol_minus_ratio > 0.0 && c.stol_minus_ratio < 1.0))
    throw ConfigError("pde: coarsening ratios must lie in (0, 1)");
  a.tau1 = positive(get<double>(j, "tau1", w, 0.125), "pde.tau1");
  a.degree = get<int>(j, "degree", w, 5);
  const auto grid = get<std::vector<int>>(j, "grid", w, {4, 4});
  if (grid.size() != 2) throw ConfigError("pde.grid must be [nx, ny]");
  a.grid_nx = grid[0];
  a.grid_ny = grid[1];
  a.max_level = get<int>(j, "max_level", w, a.max_level);
  a.max_halvings = get<int>(j, "max_halvings", w, a.max_halvings);
  a.max_steps = get<long>(j, "max_steps", w, a.max_steps);
  a.horizon = get<double>(j, "horizon", w, a.horizon);
  a.constants.C = get<double>(j, "C", w, 1.0);
  a.constants.C_GN = get<double>(j, "C_GN", w, 1.0);
  c.dump_fields = get<bool>(j, "dump_fields", w, true);
  return c;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  only_keys(j, "config", {"mode", "ladder", "output_dir", "seed", "ode", "pde"});
  RunConfig c;
  const std::string mode = get<std::string>(j, "mode", "config", "");
  if (mode == "ode") c.mode = RunConfig::Mode::Ode;
  else if (mode == "pde") c.mode = RunConfig::Mode::Pde;
  else throw ConfigError("config.mode must be \"ode\" or \"pde\"");
  if (!j.contains("ladder")) throw ConfigError("config.ladder is required");
  c.ladder = parse_ladder(j["ladder"]);
  c.output_dir = get<std::string>(j, "output_dir", "config", ".");
  c.seed = get<unsigned>(j, "seed", "config", 0u);
  if (c.mode == RunConfig::Mode::Ode) {
    if (j.contains("pde")) throw ConfigError("config: 'pde' block given in ode mode");
    c.ode = parse_ode(j.value("ode", json::object()));
    try {
      ode::PolynomialOde(c.ode.coeffs, c.ode.u0, c.ode.blowup_time);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("ode: ") + e.what());
    }
  } else {
    if (j.contains("ode")) throw ConfigError("config: 'ode' block given in pde mode");
    c.pde = parse_pde(j.value("pde", json::object()));
    try {
      make_problem(c.pde).validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("pde: ") + e.what());
    }
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::filesystem::path output_directory(const RunConfig& config) {
  if (const char* env = std::getenv("BLOWUP_OUTPUT_DIR"); env && *env) return env;
  return config.output_dir;
}

ProblemData make_problem(const PdeConfig& pde) {
  ProblemData d;
  d.domain = pde.domain;
  d.epsilon = pde.epsilon;
  d.gamma = pde.gamma;
  try {
    if (pde.velocity.name != "zero") {
      d.velocity = make_velocity(pde.velocity.name, pde.velocity.params);
      d.velocity_steady = velocity_is_steady(pde.velocity.name);
    }
    if (pde.f0.name != "zero") {
      d.f0 = make_scalar(pde.f0.name, pde.f0.params, pde.domain);
      d.f0_steady = pde.f0.name != "sine_product";
    }
    if (pde.u0.name != "zero") d.u0 = make_scalar(pde.u0.name, pde.u0.params, pde.domain);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return d;
}

std::string fmt(double v) {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out << std::setprecision(17) << v;
  return out.str();
}

int Table::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

std::vector<double> Table::numbers(const std::string& name) const {
  const int c = column(name);
  if (c < 0) throw ConfigError("missing column '" + name + "'");
  std::vector<double> v;
  for (const auto& row : rows) {
    std::istringstream in(row[c]);
    in.imbue(std::locale::classic());
    double x;
    if (!(in >> x) || !(in >> std::ws).eof()) throw ConfigError("column '" + name + "': not a number: " + row[c]);
    v.push_back(x);
  }
  return v;
}

std::string to_csv(const Table& t) {
  std::string s;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) s += ',';
      s += cells[i];
    }
    s += '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return s;
}

Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t\r");
      const auto e = cell.find_last_not_of(" \t\r");
      cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
    } else {
      if (cells.size() != t.header.size())
        throw ConfigError("csv row has " + std::to_string(cells.size()) + " fields, header has " +
                          std::to_string(t.header.size()));
      t.rows.push_back(std::move(cells));
    }
  }
  if (t.header.empty()) throw ConfigError("csv has no header");
  return t;
}

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

int cmd_ode_run(const RunConfig& config, std::ostream& log) {
  const OdeConfig& oc = config.ode;
  const ode::PolynomialOde f(oc.coeffs, oc.u0, oc.blowup_time);
  const auto tols = config.ladder.values();
  const auto dir = output_directory(config);
  Table runs{{"scheme", "algorithm", "tol", "steps", "final_time", "final_value", "bound", "termination",
              "blowup_time"},
             {}};
  Table rates{{"scheme", "algorithm", "levels", "rate"}, {}};
  int code = kExitOk;
  ode::RunOptions opt;
  opt.record_slabs = false;
  for (ode::Scheme s : oc.schemes) {
    std::vector<ode::RateSample> samples;
    for (double tol : tols) {
      const ode::RunResult r = oc.algorithm == 1 ? ode::run_algorithm1(f, s, oc.tau1, tol, opt)
                                                 : ode::run_algorithm2(f, s, oc.tau1, tol, opt);
      if (r.termination == ode::Termination::Overflow) code = kExitOverflow;
      runs.rows.push_back({ode::to_string(s), std::to_string(oc.algorithm), fmt(tol), std::to_string(r.steps),
                           fmt(r.final_time), fmt(r.final_value), fmt(r.final_bound),
                           ode::to_string(r.termination), f.blowup_time() ? fmt(*f.blowup_time()) : ""});
      samples.push_back({tol, r.steps, r.final_time});
      log << ode::to_string(s) << " tol=" << fmt(tol) << " N=" << r.steps << " T=" << fmt(r.final_time) << '\n';
    }
    if (samples.size() >= 2 && f.blowup_time()) {
      const std::size_t n = std::min<std::size_t>(samples.size(), oc.fit_levels);
      const auto fit = ode::fit_rate(std::span(samples).last(n), *f.blowup_time());
      rates.rows.push_back({ode::to_string(s), std::to_string(oc.algorithm), std::to_string(n), fmt(fit.rate)});
      log << ode::to_string(s) << " r=" << fit.rate << '\n';
    }
  }
  write_file(dir / "ode_runs.csv", to_csv(runs));
  if (!rates.rows.empty()) write_file(dir / "ode_rates.csv", to_csv(rates));
  return code;
}

int cmd_pde_run(const RunConfig& config, std::ostream& log) {
  const PdeConfig& pc = config.pde;
  const ProblemData data = make_problem(pc);
  const auto dir = output_directory(config);
  Table summary{{"ttol_plus", "steps", "estimator", "final_time", "linf", "reason", "cells"}, {}};
  int code = kExitOk;
  const auto ttols = config.ladder.values();
  for (std::size_t m = 0; m < ttols.size(); ++m) {
    AdaptConfig a = pc.adapt;
    a.ttol_plus = ttols[m];
    a.ttol_minus = pc.ttol_minus_ratio * ttols[m];
    a.stol_minus = pc.stol_minus_ratio * a.stol_plus;
    AdaptResult r;
    try {
      r = algorithm3_run(data, a);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (r.reason == StopReason::Overflow) code = kExitOverflow;
    const std::string stem = "level_" + std::to_string(m) + "_";
    const StepRecord& last = r.trajectory.back();
    summary.rows.push_back({fmt(ttols[m]), std::to_string(r.steps), fmt(r.estimator), fmt(r.final_time),
                            fmt(r.final_linf), to_string(r.reason), std::to_string(last.cells)});

    std::string ledger = ledger_header() + "\n";
    for (const LedgerRow& row : r.ledger) ledger += ledger_line(row) + "\n";
    write_file(dir / (stem + "ledger.csv"), ledger);
    Table traj{{"k", "t", "tau", "linf", "cells", "dofs", "max_level", "int_eta_T2_sq", "tol_scale"}, {}};
    for (const StepRecord& s : r.trajectory)
      traj.rows.push_back({std::to_string(s.k), fmt(s.t), fmt(s.tau), fmt(s.linf), std::to_string(s.cells),
                           std::to_string(s.dofs), std::to_string(s.max_level), fmt(s.eta_T2_sq),
                           fmt(s.tol_scale)});
    write_file(dir / (stem + "trajectory.csv"), to_csv(traj));
    write_file(dir / (stem + "mesh_initial.txt"), r.u0.space->mesh().to_text());
    write_file(dir / (stem + "mesh_final.txt"), r.u_final.space->mesh().to_text());
    if (pc.dump_fields) {
      write_file(dir / (stem + "field_initial.csv"), field_csv(r.u0));
      write_file(dir / (stem + "field_final.csv"), field_csv(r.u_final));
    }
    log << "ttol+=" << fmt(ttols[m]) << " N=" << r.steps << " T=" << fmt(r.final_time)
        << " |U|=" << fmt(r.final_linf) << " estimator=" << fmt(r.estimator) << " (" << to_string(r.reason)
        << ")\n";
  }
  write_file(dir / "pde_summary.csv", to_csv(summary));
  return code;
}

int cmd_rates(const std::vector<std::filesystem::path>& files, std::ostream& out, std::optional<double> t_star) {
  if (files.empty()) throw ConfigError("rates: no input files");
  for (const auto& path : files) {
    const Table t = read_csv(path);
    out << "# " << path.string() << '\n';
    if (t.column("scheme") >= 0 && t.column("tol") >= 0) {
      const int sc = t.column("scheme");
      const auto steps = t.numbers("steps");
      const auto times = t.numbers("final_time");
      const auto tstar = t.numbers("blowup_time");
      std::vector<std::string> order;
      for (const auto& row : t.rows)
        if (std::find(order.begin(), order.end(), row[sc]) == order.end()) order.push_back(row[sc]);
      out << "scheme,levels,rate\n";
      for (const auto& name : order) {
        std::vector<ode::RateSample> s;
        double ts = 0.0;
        for (std::size_t i = 0; i < t.rows.size(); ++i)
          if (t.rows[i][sc] == name) {
            s.push_back({0.0, static_cast<long>(steps[i]), times[i]});
            ts = tstar[i];
          }
        if (s.size() < 2) continue;
        const std::size_t n = std::min<std::size_t>(s.size(), 6);
        try {
          out << name << ',' << n << ',' << fmt(ode::fit_rate(std::span(s).last(n), ts).rate) << '\n';
        } catch (const std::invalid_argument& e) {
          throw ConfigError(e.what());
        }
      }
    } else if (t.column("ttol_plus") >= 0) {
      const auto steps = t.numbers("steps");
      const auto linf = t.numbers("linf");
      const auto times = t.numbers("final_time");
      if (t.rows.size() < 2) throw ConfigError("rates: summary needs at least two rows");
      const std::size_t n = t.rows.size();
      out << "norm_growth_exponent," << fmt(fit_norm_growth(steps, linf)) << '\n';
      try {
        out << "t_star," << fmt(extrapolate_tstar(times[n - 2], linf[n - 2], times[n - 1], linf[n - 1])) << '\n';
      } catch (const DegenerateFit&) {
        out << "t_star,\n";
      }
    } else if (t.column("k") >= 0 && t.column("t") >= 0 && t.column("linf") >= 0) {
      const auto times = t.numbers("t");
      const auto linf = t.numbers("linf");
      if (times.size() < 3) throw ConfigError("rates: trajectory needs at least three rows");
      const std::size_t n = times.size();
      std::vector<double> p;
      double ts = 0.0;
      try {
        ts = t_star ? *t_star : extrapolate_tstar(times[n - 2], linf[n - 2], times[n - 1], linf[n - 1]);
        p = blowup_rate_sequence(times, linf, ts);
      } catch (const DegenerateFit& e) {
        throw ConfigError(std::string("rates: ") + e.what());
      }
      const std::size_t tail = std::max<std::size_t>(1, p.size() / 10);
      double avg = 0.0;
      for (std::size_t i = p.size() - tail; i < p.size(); ++i) avg += p[i];
      out << "t_star," << fmt(ts) << '\n' << "p_tail_average," << fmt(avg / tail) << '\n';
      out << "k,p_k\n";
      for (std::size_t i = 0; i < p.size(); ++i) out << i + 1 << ',' << fmt(p[i]) << '\n';
    } else {
      throw ConfigError("rates: unrecognised columns in " + path.string());
    }
  }
  return kExitOk;
}

}  // namespace blowup::io
