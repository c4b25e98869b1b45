// imcvf: command-line front end.
//
// Exit codes: 0 success, 1 usage / parse error, 2 validation or compatibility
// failure, 3 numerical non-convergence.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "imcvf/asymptotics.hpp"
#include "imcvf/chart_io.hpp"
#include "imcvf/curvature.hpp"
#include "imcvf/imcvf_builder.hpp"
#include "imcvf/sphere_geometry.hpp"
#include "imcvf/steering.hpp"
#include "imcvf/straight_out.hpp"

using namespace imcvf;
using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

struct ValidationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// output

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct Output {
  std::string command;
  bool as_json = false;
  std::string path;
  json summary = json::object();
  std::vector<std::pair<std::string, Table>> tables;

  void emit() const {
    std::ofstream file;
    if (!path.empty()) {
      file.open(path);
      if (!file) throw ChartFileError("cannot write " + path);
    }
    std::ostream& os = path.empty() ? std::cout : file;
    if (as_json) {
      json j;
      j["schema_version"] = kSchemaVersion;
      j["command"] = command;
      j["summary"] = summary;
      for (const auto& [name, t] : tables) j["tables"][name] = {{"columns", t.columns}, {"rows", t.rows}};
      os << j.dump(2) << '\n';
      return;
    }
    for (std::size_t k = 0; k < tables.size(); ++k) {
      const auto& t = tables[k].second;
      if (tables.size() > 1) os << (k ? "\n" : "") << "# " << tables[k].first << '\n';
      for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c];
      os << '\n';
      for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << fmt(row[c]);
        os << '\n';
      }
    }
    // the summary goes to stderr so stdout stays a clean CSV
    for (auto& [k, v] : summary.items()) std::cerr << k << " = " << v.dump() << '\n';
  }
};

// ---------------------------------------------------------------------------
// option parsing helpers

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double x = std::stod(item, &used);
    if (used != item.size()) throw CLI::ValidationError("bad number in list: " + item);
    out.push_back(x);
  }
  if (out.empty()) throw CLI::ValidationError("empty list");
  return out;
}

std::pair<int, int> parse_grid(const std::string& s) {
  int a = 0, b = 0;
  char x = 0;
  std::stringstream ss(s);
  if (!(ss >> a >> x >> b) || (x != 'x' && x != 'X') || !ss.eof())
    throw CLI::ValidationError("grid must look like 64x128");
  if (a < 8 || b < 8) throw CLI::ValidationError("grid sizes must be >= 8");
  return {a, b};
}

struct Common {
  std::string chart;
  std::string grid = "64x128";
  double t = 0;
  double r = 2;
  bool json = false;
  std::string out;
};

void add_chart(CLI::App* sc, Common& c) {
  sc->add_option("--chart", c.chart, "chart definition (JSON)")->required()->check(CLI::ExistingFile);
}
void add_grid(CLI::App* sc, Common& c) { sc->add_option("--grid", c.grid, "N_th x N_ph")->capture_default_str(); }
void add_output(CLI::App* sc, Common& c) {
  sc->add_flag("--json", c.json, "machine-readable JSON output");
  sc->add_option("--out", c.out, "write the table to a file instead of stdout");
}

Output make_output(const std::string& cmd, const Common& c) {
  Output o;
  o.command = cmd;
  o.as_json = c.json;
  o.path = c.out;
  return o;
}

json report_json(const ChartReport& r) {
  return {{"pass", r.pass},
          {"signature_ok", r.signature_ok},
          {"signature_note", r.signature_note},
          {"cond1_max", r.cond1_max},
          {"cond2_max", r.cond2_max},
          {"cond3_max", r.cond3_max},
          {"cond4_max", r.cond4_max},
          {"cond4_Hn_max", r.cond4_Hn_max},
          {"Hr_dev_max", r.Hr_dev_max},
          {"pole_strategy", to_string(r.pole_strategy)},
          {"samples", r.samples}};
}

SampleSpec sample_spec(const BlockMetric& g, double t, double r_lo, double r_hi, int nr) {
  SampleSpec s;
  s.t = t;
  s.r_lo = r_lo;
  s.r_hi = r_hi;
  s.nr = nr;
  s.theta_min = g.theta_min;
  return s;
}

bool spherically_symmetric(const BlockMetric& g) {
  for (int f : {FD, FE, FF, FC})
    if (!g.fld[f].is_const(0)) return false;
  for (int f : {FU, FV})
    if (g.fld[f].depends_on(TH) || g.fld[f].depends_on(PH)) return false;
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IMCVF chart toolkit"};
  app.require_subcommand(1);
  Common c;
  double r_lo = 1, r_hi = 10, tol_cond4 = 1e-8, tol_cond3 = 1e-10;
  int nr = 8, npts = 41;
  bool solve_d = false, solve = false;
  std::string factor, radii = "10,20,40,80", points;
  double m_adm = NAN;

  auto* validate = app.add_subcommand("validate", "check the four chart conditions and the signature");
  add_chart(validate, c);
  add_output(validate, c);
  validate->add_option("--t", c.t, "time slice")->capture_default_str();
  validate->add_option("--r-lo", r_lo, "")->capture_default_str();
  validate->add_option("--r-hi", r_hi, "")->capture_default_str();
  validate->add_option("--nr", nr, "")->capture_default_str();
  validate->add_option("--tol-cond4", tol_cond4, "")->capture_default_str()->check(CLI::PositiveNumber);
  validate->add_option("--tol-cond3", tol_cond3, "")->capture_default_str()->check(CLI::PositiveNumber);

  auto* build = app.add_subcommand("build", "complete a chart: b from the area condition, d from (*) = 0");
  add_chart(build, c);
  build->add_flag("--json", c.json, "machine-readable JSON report");
  build->add_flag("--solve-d", solve_d, "solve (*) = 0 for d (otherwise keep the file's d)");
  std::string chart_out;
  build->add_option("--out", chart_out, "where to write the completed chart")->required();

  auto* curv = app.add_subcommand("curvature", "dump Einstein / Ricci tensors at points");
  add_chart(curv, c);
  add_output(curv, c);
  curv->add_option("--points", points, "t,r,th,ph;t,r,th,ph;...")->required();

  auto* hawking = app.add_subcommand("hawking", "Hawking mass of coordinate spheres");
  add_chart(hawking, c);
  add_grid(hawking, c);
  add_output(hawking, c);
  hawking->add_option("--t", c.t, "")->capture_default_str();
  hawking->add_option("--radii", radii, "comma-separated radii")->capture_default_str();

  auto* meancurv = app.add_subcommand("meancurv", "mean curvature vector on one sphere");
  add_chart(meancurv, c);
  add_grid(meancurv, c);
  add_output(meancurv, c);
  meancurv->add_option("--t", c.t, "")->capture_default_str();
  meancurv->add_option("--r", c.r, "")->capture_default_str();

  auto* steer = app.add_subcommand("steer", "steering parameter Q on one sphere");
  add_chart(steer, c);
  add_grid(steer, c);
  add_output(steer, c);
  steer->add_option("--t", c.t, "")->capture_default_str();
  steer->add_option("--r", c.r, "")->capture_default_str();

  auto* so = app.add_subcommand("straightout", "straight-out residual, gauge rotation and d solve");
  add_chart(so, c);
  add_grid(so, c);
  add_output(so, c);
  so->add_option("--t", c.t, "")->capture_default_str();
  so->add_option("--r", c.r, "")->capture_default_str();
  so->add_flag("--solve", solve, "run the Picard solve for d");

  auto* adm = app.add_subcommand("adm", "ADM mass of g = u^4 delta");
  add_output(adm, c);
  adm->add_option("--factor", factor, "conformal factor u(r)")->required();
  adm->add_option("--radii", radii, "comma-separated increasing radii")->capture_default_str();
  adm->add_option("--mass", m_adm, "reference mass for the Hawking-mass gap (default: extrapolated)");

  auto* flowscan = app.add_subcommand("flowscan", "m_H and G_tt along the radial flow (spherical charts)");
  add_chart(flowscan, c);
  add_output(flowscan, c);
  flowscan->add_option("--t", c.t, "")->capture_default_str();
  flowscan->add_option("--r-lo", r_lo, "")->capture_default_str();
  flowscan->add_option("--r-hi", r_hi, "")->capture_default_str();
  flowscan->add_option("--n", npts, "")->capture_default_str()->check(CLI::Range(2, 100000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    auto* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();
    Output o = make_output(name, c);
    int rc = 0;

    if (name == "validate") {
      auto def = load_chart(c.chart);
      auto rep = validate_chart(def.g, sample_spec(def.g, c.t, r_lo, r_hi, nr), {tol_cond3, tol_cond4});
      o.summary = report_json(rep);
      o.summary["has_d"] = def.has_d;
      Table t{{"cond3_max", "cond4_max", "cond4_Hn_max", "Hr_dev_max", "pass"},
              {{rep.cond3_max, rep.cond4_max, rep.cond4_Hn_max, rep.Hr_dev_max, rep.pass ? 1.0 : 0.0}}};
      o.tables.push_back({"validate", t});
      rc = rep.pass ? 0 : 2;
    } else if (name == "build") {
      auto def = load_chart(c.chart);
      const auto& g = def.g;
      BlockMetric full = complete_chart({g.a(), g.c(), g.e(), g.f(), g.u(), g.v()}, solve_d);
      if (!solve_d) full = full.with(FD, g.d());
      full.theta_min = g.theta_min;
      save_chart(chart_out, full);
      auto rep = validate_chart(full, sample_spec(full, 0, 1, 10, 8));
      o.summary = report_json(rep);
      o.summary["written"] = chart_out;
      o.tables.push_back({"build", Table{{"cond3_max", "cond4_max", "cond4_Hn_max"},
                                         {{rep.cond3_max, rep.cond4_max, rep.cond4_Hn_max}}}});
      rc = rep.pass ? 0 : 2;
    } else if (name == "curvature") {
      auto def = load_chart(c.chart);
      CurvatureEngine eng(def.g);
      Table t{{"t", "r", "th", "ph", "i", "j", "G", "Ric"}, {}};
      Table s{{"t", "r", "th", "ph", "R"}, {}};
      std::stringstream ss(points);
      std::string item;
      while (std::getline(ss, item, ';')) {
        auto x = parse_list(item);
        if (x.size() != 4) throw CLI::ValidationError("points need four coordinates");
        CoordinatePoint p{x[0], x[1], x[2], x[3]};
        auto cp = eng.curvature(p);
        for (int i = 0; i < 4; ++i)
          for (int j = i; j < 4; ++j) t.rows.push_back({p.t, p.r, p.th, p.ph, double(i), double(j), cp.G(i, j), cp.ric(i, j)});
        s.rows.push_back({p.t, p.r, p.th, p.ph, cp.R});
      }
      o.tables.push_back({"tensors", t});
      o.tables.push_back({"scalar", s});
    } else if (name == "hawking") {
      auto def = load_chart(c.chart);
      auto [nth, nph] = parse_grid(c.grid);
      Table t{{"r", "area", "m_H"}, {}};
      for (double r : parse_list(radii)) {
        SphereGrid grid(c.t, r, nth, nph);
        auto nodes = survey_sphere(def.g, grid);
        t.rows.push_back({r, sphere_area(nodes, grid), hawking_mass(nodes, grid)});
      }
      o.tables.push_back({"hawking", t});
    } else if (name == "meancurv") {
      auto def = load_chart(c.chart);
      auto [nth, nph] = parse_grid(c.grid);
      SphereGrid grid(c.t, c.r, nth, nph);
      auto nodes = survey_sphere(def.g, grid);
      Table t{{"th", "ph", "H_r", "H_n", "star"}, {}};
      double hn = 0, star = 0;
      for (std::size_t k = 0; k < grid.size(); ++k) {
        auto p = grid.point(k);
        const auto& nd = nodes[k];
        t.rows.push_back({p.th, p.ph, nd.trace.H_r, nd.trace.H_n, nd.closed.star});
        hn = std::max(hn, std::fabs(nd.trace.H_n));
        star = std::max(star, std::fabs(nd.closed.star));
      }
      o.summary = {{"Hn_max", hn}, {"star_max", star}, {"hawking_mass", hawking_mass(nodes, grid)}};
      o.tables.push_back({"meancurv", t});
    } else if (name == "steer") {
      auto def = load_chart(c.chart);
      auto [nth, nph] = parse_grid(c.grid);
      SphereGrid grid(c.t, c.r, nth, nph);
      auto rep = steer_sphere(def.g, grid);
      Table t{{"th", "ph", "Q"}, {}};
      for (std::size_t k = 0; k < grid.size(); ++k) {
        auto p = grid.point(k);
        t.rows.push_back({p.th, p.ph, rep.Q[k]});
      }
      o.summary = {{"residual_max", rep.residual_max},
                   {"Hn_before_max", rep.Hn_before_max},
                   {"Hn_after_max", rep.Hn_after_max},
                   {"lemma_max", rep.lemma_max}};
      o.tables.push_back({"steer", t});
    } else if (name == "straightout") {
      auto def = load_chart(c.chart);
      auto [nth, nph] = parse_grid(c.grid);
      auto grid = SphereGrid::uniform(c.t, c.r, nth, nph);
      auto res = straight_out_residual(def.g, grid);
      Table t{{"th", "ph", "closed", "direct", "diff"}, {}};
      for (std::size_t k = 0; k < grid.size(); ++k) {
        auto p = grid.point(k);
        t.rows.push_back({p.th, p.ph, res.closed[k], res.direct[k], res.closed[k] - res.direct[k]});
      }
      o.summary = {{"route_max_diff", res.max_diff}, {"residual_max", res.max_closed}};
      o.tables.push_back({"residual", t});
      SphereOperator op(def.g, grid);
      try {
        auto gr = gauge_rotation(def.g, op);
        o.summary["gauge"] = {{"solvability", gr.solvability},
                              {"alpha_l2", gr.alpha_l2},
                              {"div_before_max", gr.div_before_max},
                              {"div_after_max", gr.div_after_max},
                              {"div_after_sampled", gr.div_after_sampled},
                              {"energy_before", normal_energy(op, sample_connection_one_form(def.g, grid))},
                              {"energy_after", normal_energy(op, gr.rotated)}};
      } catch (const CompatibilityError& e) {
        o.summary["gauge"] = {{"error", e.what()}, {"integral", e.integral}, {"scale", e.scale}};
        rc = 2;
      }
      if (solve) {
        auto sol = solve_straight_out_d(def.g, op);
        Table log{{"iter", "update", "compat", "compat_scale", "lambda", "damping"}, {}};
        for (const auto& st : sol.log)
          log.rows.push_back({double(st.iter), st.update, st.compat, st.compat_scale, st.lambda, st.damping});
        o.tables.push_back({"picard", log});
        o.summary["solve"] = {{"converged", sol.converged},
                              {"compatible", sol.compatible},
                              {"residual_max", sol.residual_max},
                              {"compat", sol.compat},
                              {"compat_scale", sol.compat_scale},
                              {"message", sol.message}};
        if (!sol.compatible) rc = 2;
        else if (!sol.converged && rc == 0) rc = 3;
      }
    } else if (name == "adm") {
      ConformalMetric3 g3(parse(factor));
      auto rs = parse_list(radii);
      auto m = adm_mass(g3, rs);
      auto dm = adm_conformal_delta(g3.factor(), rs);
      double ref = std::isnan(m_adm) ? m.extrapolated : m_adm;
      auto hk = hawking_to_adm_convergence(g3, rs, ref);
      Table t{{"r", "m_adm_r", "m_conformal_r", "m_H", "gap"}, {}};
      for (std::size_t k = 0; k < rs.size(); ++k)
        t.rows.push_back({rs[k], m.values[k], dm.values[k], hk.rows[k].m_H, hk.rows[k].gap});
      o.summary = {{"adm_mass", m.extrapolated},
                   {"conformal_delta", dm.extrapolated},
                   {"decaying", m.decaying},
                   {"gap_nonincreasing", hk.gap_nonincreasing}};
      o.tables.push_back({"adm", t});
      if (!m.decaying) rc = 2;
    } else if (name == "flowscan") {
      auto def = load_chart(c.chart);
      if (!spherically_symmetric(def.g))
        throw ValidationFailure("flowscan needs a spherically symmetric chart (d = e = f = c = 0, u and v radial)");
      auto rep = monotonicity_check_spherical(def.g.u(), def.g.v(), c.t, r_lo, r_hi, npts);
      Table t{{"r", "s", "m_H", "dm_ds", "G_tt", "I_mH", "I_mH_from_G"}, {}};
      for (const auto& s : rep.samples) t.rows.push_back({s.r, s.s, s.m_H, s.dm_ds, s.G_tt, s.I_mH, s.I_mH_from_G});
      o.summary = {{"identity_max", rep.identity_max},
                   {"worst_violation", rep.worst_violation},
                   {"monotone", rep.monotone}};
      o.tables.push_back({"flowscan", t});
      if (!rep.monotone) rc = 2;
    }
    o.emit();
    return rc;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ChartFileError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NonConvergence& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
