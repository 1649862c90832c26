// ffdg: discontinuous Galerkin solver for the stationary distribution of
// stochastic fluid-fluid processes, with an exact Monte Carlo cross-check.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "ffdg/analysis.hpp"
#include "ffdg/csv.hpp"
#include "ffdg/montecarlo.hpp"
#include "ffdg/stationary.hpp"

using namespace ffdg;
namespace fs = std::filesystem;

namespace {

struct CommonOpts {
  std::string model_path;
  int K = 43;
  double h = 0.4;
  double dh = 0.001;
  std::string nodes_list;  // explicit nodes, comma separated (overrides K/h/dh)
  int degree = 1;
  std::string out_dir = ".";
  std::string rho_mode = "normalized";
  std::string psi_method = "newton";
  double psi_tol = 1e-10;
  bool dump_operators = false;
  std::uint64_t seed = 42;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_stencil = true) {
  cmd->add_option("--model", o.model_path, "model file (JSON)")->required();
  if (with_stencil) {
    cmd->add_option("--K", o.K, "omega stencil node count");
    cmd->add_option("--h", o.h, "interior mesh width");
    cmd->add_option("--dh", o.dh, "boundary mesh width");
    cmd->add_option("--nodes", o.nodes_list, "explicit node list (overrides --K/--h/--dh)");
    cmd->add_option("--degree", o.degree, "basis degree on interior meshes (0 or 1)");
    cmd->add_option("--rho-mode", o.rho_mode, "rho mode: normalized|verbatim");
    cmd->add_option("--psi-method", o.psi_method, "riccati method: newton|fixed_point");
    cmd->add_option("--psi-tol", o.psi_tol, "riccati residual tolerance");
    cmd->add_flag("--dump-operators", o.dump_operators, "write assembled matrices as CSV");
  }
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--seed", o.seed, "random seed");
}

Stencil make_stencil(const CommonOpts& o) {
  if (!o.nodes_list.empty()) {
    std::vector<double> nodes;
    std::stringstream ss(o.nodes_list);
    std::string tok;
    while (std::getline(ss, tok, ',')) nodes.push_back(std::stod(tok));
    return Stencil::from_nodes(nodes);
  }
  return Stencil::omega(o.K, o.h, o.dh);
}

RhoMode rho_mode(const CommonOpts& o) {
  if (o.rho_mode == "normalized") return RhoMode::normalized;
  if (o.rho_mode == "verbatim") return RhoMode::verbatim;
  fail(errc::config_error, "unknown rho mode '" + o.rho_mode + "'");
}

PsiOptions psi_options(const CommonOpts& o) {
  PsiOptions p;
  if (o.psi_method == "newton")
    p.method = PsiMethod::newton;
  else if (o.psi_method == "fixed_point")
    p.method = PsiMethod::fixed_point;
  else
    fail(errc::config_error, "unknown psi method '" + o.psi_method + "'");
  p.tol = o.psi_tol;
  return p;
}

std::string outpath(const CommonOpts& o, const std::string& name) {
  fs::create_directories(o.out_dir);
  return (fs::path(o.out_dir) / name).string();
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  require(out.good(), errc::io_error, "cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

void dump_operators(const CommonOpts& o, const Discretisation& d) {
  for (int i = 0; i < d.model.phases.size(); ++i)
    CsvWriter::write_matrix(outpath(o, "Q_" + d.model.phases.labels[i] + ".csv"), d.gens.Q[i]);
  CsvWriter::write_matrix(outpath(o, "M.csv"), assemble_mass(d.basis));
  CsvWriter::write_matrix(outpath(o, "G.csv"), assemble_stiffness(d.basis));
  const GroupLayout& L = d.B.layout;
  for (int gi = 0; gi < L.groups(); ++gi)
    for (int gj = 0; gj < L.groups(); ++gj) {
      Matrix blk = d.B.group_block(gi, gj);
      if (blk.isZero(0.0)) continue;
      std::string name = std::string("B_") + sign_class_char(L.sign[gi]) +
                         d.model.phases.labels[L.phase[gi]] + "_" +
                         sign_class_char(L.sign[gj]) + d.model.phases.labels[L.phase[gj]];
      CsvWriter::write_matrix(outpath(o, name + ".csv"), blk);
    }
  CsvWriter::write_matrix(outpath(o, "D_pp.csv"), d.D0.pp);
  CsvWriter::write_matrix(outpath(o, "D_pm.csv"), d.D0.pm);
  CsvWriter::write_matrix(outpath(o, "D_mp.csv"), d.D0.mp);
  CsvWriter::write_matrix(outpath(o, "D_mm.csv"), d.D0.mm);
}

int run_validate(const CommonOpts& o) {
  ModelSpec m = load_model(o.model_path);
  ValidationReport rep = validate_model(m);
  nlohmann::json j;
  j["ok"] = rep.ok();
  for (const auto& c : rep.checks)
    j["checks"].push_back({{"code", errc_name(c.code)}, {"pass", c.pass}, {"detail", c.detail}});
  std::cout << j.dump(2) << "\n";
  if (!rep.ok()) {
    for (const auto& c : rep.checks)
      if (!c.pass) {
        std::cerr << "validation failed: " << errc_name(c.code) << ": " << c.detail << "\n";
        return 2;
      }
  }
  return 0;
}

int run_assemble(const CommonOpts& o) {
  ModelSpec m = load_model(o.model_path);
  validate_model(m).raise_if_failed();
  Discretisation d = discretise(m, make_basis(make_stencil(o), o.degree), rho_mode(o));
  dump_operators(o, d);
  nlohmann::json j;
  j["elements_per_phase"] = d.basis.total;
  j["meshes"] = d.basis.stencil.mesh_count();
  j["conservation_defect"] = conservation_defect(d.B);
  write_json(outpath(o, "assemble_summary.json"), j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_psi(const CommonOpts& o) {
  ModelSpec m = load_model(o.model_path);
  validate_model(m).raise_if_failed();
  const auto t0 = std::chrono::steady_clock::now();
  Discretisation d = discretise(m, make_basis(make_stencil(o), o.degree), rho_mode(o));
  PsiSolution s = solve_psi(d.D0, psi_options(o));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (o.dump_operators) CsvWriter::write_matrix(outpath(o, "psi.csv"), s.psi);
  nlohmann::json j;
  j["residual"] = s.residual;
  j["iterations"] = s.iterations;
  j["method"] = psi_method_name(s.method);
  j["rows"] = s.psi.rows();
  j["cols"] = s.psi.cols();
  j["min_entry"] = s.psi.minCoeff();
  j["max_row_mass_defect"] = (s.psi.rowwise().sum().array() - 1.0).abs().maxCoeff();
  j["wall_seconds"] = secs;
  write_json(outpath(o, "psi_summary.json"), j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

struct YGrid {
  double lo = 0.0, hi = 10.0, step = 0.1;
};

int run_stationary(const CommonOpts& o, const YGrid& yg) {
  ModelSpec m = load_model(o.model_path);
  validate_model(m).raise_if_failed();
  const auto t0 = std::chrono::steady_clock::now();
  Discretisation d = discretise(m, make_basis(make_stencil(o), o.degree), rho_mode(o));
  StationaryOptions sopt;
  sopt.psi = psi_options(o);
  StationarySolution sol = solve_stationary(d, sopt);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (o.dump_operators) dump_operators(o, d);

  const GroupLayout& L = sol.layout;
  const Stencil& st = sol.basis.stencil;

  {  // masses: per phase and x-cell, the Y = 0 point masses
    CsvWriter w(outpath(o, "masses.csv"));
    w.header({"phase", "sign_class", "x_cell_left", "x_cell_right", "mass"});
    auto emit = [&](SignClass cls, const Eigen::RowVectorXd& am) {
      int pos = 0;
      for (int g : L.class_groups[static_cast<int>(cls)])
        for (int cell : L.active[g]) {
          const int k = sol.basis.mesh_of_element(cell);
          w.field(sol.phase_labels[L.phase[g]]);
          w.field(std::string(1, sign_class_char(cls)));
          w.field(st.nodes[k]);
          w.field(st.nodes[k + 1]);
          w.field(am(pos++));
          w.endrow();
        }
    };
    emit(SignClass::minus, sol.p_minus);
    emit(SignClass::zero, sol.p_zero);
  }

  {  // densities on the y grid
    CsvWriter w(outpath(o, "density.csv"));
    w.header({"phase", "sign_class", "x_cell_left", "x_cell_right", "y", "density"});
    auto slices = sol.density_on_grid(yg.lo, yg.hi, yg.step);
    for (const auto& s : slices) {
      auto emit = [&](SignClass cls, const Eigen::RowVectorXd& am) {
        int pos = 0;
        for (int g : L.class_groups[static_cast<int>(cls)])
          for (int cell : L.active[g]) {
            const int k = sol.basis.mesh_of_element(cell);
            w.field(sol.phase_labels[L.phase[g]]);
            w.field(std::string(1, sign_class_char(cls)));
            w.field(st.nodes[k]);
            w.field(st.nodes[k + 1]);
            w.field(s.y);
            w.field(am(pos) / sol.basis.weights(cell));
            ++pos;
            w.endrow();
          }
      };
      emit(SignClass::plus, s.plus);
      emit(SignClass::minus, s.minus);
      emit(SignClass::zero, s.zero);
    }
  }

  {  // marginals of X under both splits
    Marginals yz = marginal_x(sol, MarginalSplit::y_zero_positive);
    Marginals oo = marginal_x(sol, MarginalSplit::on_off);
    CsvWriter w(outpath(o, "marginal_x.csv"));
    w.header({"group", "x_cell_left", "x_cell_right", "mass"});
    auto emit = [&](const std::string& name, const Eigen::RowVectorXd& cm) {
      for (int cell = 0; cell < L.N; ++cell) {
        const int k = sol.basis.mesh_of_element(cell);
        w.field(name);
        w.field(st.nodes[k]);
        w.field(st.nodes[k + 1]);
        w.field(cm(cell));
        w.endrow();
      }
    };
    for (size_t i = 0; i < yz.names.size(); ++i) emit(yz.names[i], yz.cell_masses[i]);
    for (size_t i = 0; i < oo.names.size(); ++i) emit(oo.names[i], oo.cell_masses[i]);
  }

  nlohmann::json j;
  j["total_probability"] = sol.total_probability;
  j["prob_y_zero"] = sol.prob_y_zero();
  j["prob_y_positive"] = sol.prob_y_positive();
  j["xi_eigenvalue"] = sol.xi.eigenvalue;
  j["normalising_alpha"] = sol.alpha;
  j["elements_per_phase"] = sol.basis.total;
  j["elements_total"] = sol.basis.total * static_cast<int>(sol.phase_labels.size());
  j["wall_seconds"] = secs;
  write_json(outpath(o, "stationary_summary.json"), j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_simulate(const CommonOpts& o, int paths, double horizon, double x0, double y0,
                 const std::string& phase0) {
  ModelSpec m = load_model(o.model_path);
  validate_model(m).raise_if_failed();
  const int p0 = m.phases.index(phase0);
  const auto t0 = std::chrono::steady_clock::now();
  auto recs = simulate_paths(m, {x0, y0, p0}, horizon, paths, o.seed);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  {
    CsvWriter w(outpath(o, "paths.csv"));
    w.header({"tau", "x_tau", "phase_tau", "censored"});
    for (const auto& r : recs) {
      w.field(r.tau);
      w.field(r.x_tau);
      w.field(r.censored ? std::string("-") : m.phases.labels[r.phase_tau]);
      w.field(r.censored ? 1 : 0);
      w.endrow();
    }
  }
  nlohmann::json j;
  j["paths"] = paths;
  j["censored_fraction"] = censored_fraction(recs);
  j["wall_seconds"] = secs;
  int retained = 0;
  for (const auto& r : recs)
    if (!r.censored) ++retained;
  j["retained"] = retained;
  for (int i = 0; i < m.phases.size(); ++i) {
    int n = 0;
    for (const auto& r : recs)
      if (!r.censored && r.phase_tau == i) ++n;
    if (n > 0) j["returns_by_phase"][m.phases.labels[i]] = n;
  }
  write_json(outpath(o, "simulate_summary.json"), j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_convergence(const CommonOpts& o, const std::string& degrees_list,
                    const std::string& hs_list, const std::string& bdhs_list,
                    double study_dh, double bh, double bref) {
  ModelSpec m = load_model(o.model_path);
  validate_model(m).raise_if_failed();
  auto parse_list = [](const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
    return v;
  };
  std::vector<int> degrees;
  for (double v : parse_list(degrees_list)) degrees.push_back(static_cast<int>(v));
  const std::vector<double> hs = parse_list(hs_list);

  StudyOptions sopt;
  sopt.rho_mode = rho_mode(o);

  nlohmann::json j;
  CsvWriter w(outpath(o, "convergence.csv"));
  w.header({"study", "degree", "param", "error", "elements"});
  for (int deg : degrees) {
    const auto t0 = std::chrono::steady_clock::now();
    ConvergenceReport rep = convergence_study(m, hs, study_dh, deg, sopt);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& p : rep.points) {
      w.field(std::string("h"));
      w.field(deg);
      w.field(p.param);
      w.field(p.error);
      w.field(p.elements);
      w.endrow();
    }
    j["h_study"].push_back({{"degree", deg},
                            {"slope", rep.slope},
                            {"r2", rep.r2},
                            {"wall_seconds", secs}});
  }
  if (!bdhs_list.empty()) {
    const std::vector<double> dhs = parse_list(bdhs_list);
    ConvergenceReport rep = boundary_width_study(m, dhs, bh, bref, 1, sopt);
    for (const auto& p : rep.points) {
      w.field(std::string("dh"));
      w.field(1);
      w.field(p.param);
      w.field(p.error);
      w.field(p.elements);
      w.endrow();
    }
    j["dh_study"] = {{"slope", rep.slope}, {"r2", rep.r2}};
  }
  write_json(outpath(o, "convergence_summary.json"), j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DG solver for stationary distributions of stochastic fluid-fluid processes"};
  app.require_subcommand(1);

  CommonOpts o;
  YGrid yg;
  int paths = 100000;
  double horizon = 10000.0, x0 = 5.0, y0 = 0.0;
  std::string phase0 = "01";
  std::string degrees_list = "0,1", hs_list = "1.5,1.0,0.5,0.25,0.1,0.05";
  std::string bdhs_list = "0.4,0.2,0.1,0.05,0.025";
  double study_dh = 1e-6, bh = 1.0, bref = 0.005;

  auto* validate = app.add_subcommand("validate", "check a model file");
  add_common(validate, o, false);

  auto* assemble = app.add_subcommand("assemble", "assemble and dump the DG operators");
  add_common(assemble, o);

  auto* psi = app.add_subcommand("psi", "solve the Riccati equation for psi");
  add_common(psi, o);

  auto* stationary = app.add_subcommand("stationary", "full stationary solve with exports");
  add_common(stationary, o);
  stationary->add_option("--y-from", yg.lo, "density grid start");
  stationary->add_option("--y-to", yg.hi, "density grid end");
  stationary->add_option("--y-step", yg.step, "density grid step");

  auto* simulate = app.add_subcommand("simulate", "exact Monte Carlo first-return paths");
  add_common(simulate, o, false);
  simulate->add_option("--paths", paths, "number of paths");
  simulate->add_option("--horizon", horizon, "censoring horizon V");
  simulate->add_option("--x0", x0, "initial first-fluid level");
  simulate->add_option("--y0", y0, "initial second-fluid level");
  simulate->add_option("--phase0", phase0, "initial phase label");

  auto* convergence = app.add_subcommand("convergence", "mesh refinement studies");
  add_common(convergence, o);
  convergence->add_option("--degrees", degrees_list, "comma list of degrees");
  convergence->add_option("--hs", hs_list, "comma list of interior widths");
  convergence->add_option("--study-dh", study_dh, "boundary width for the h study");
  convergence->add_option("--boundary-dhs", bdhs_list, "comma list for the dh study ('' to skip)");
  convergence->add_option("--boundary-h", bh, "fixed h for the dh study");
  convergence->add_option("--boundary-ref-dh", bref, "reference dh for differencing");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(validate)) return run_validate(o);
    if (app.got_subcommand(assemble)) return run_assemble(o);
    if (app.got_subcommand(psi)) return run_psi(o);
    if (app.got_subcommand(stationary)) return run_stationary(o, yg);
    if (app.got_subcommand(simulate)) return run_simulate(o, paths, horizon, x0, y0, phase0);
    if (app.got_subcommand(convergence))
      return run_convergence(o, degrees_list, hs_list, bdhs_list, study_dh, bh, bref);
  } catch (const Error& e) {
    nlohmann::json j;
    j["error"] = {{"code", e.code_name()}, {"message", e.what()}};
    std::cerr << j.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    nlohmann::json j;
    j["error"] = {{"code", "Internal"}, {"message", e.what()}};
    std::cerr << j.dump() << "\n";
    return 3;
  }
  return 1;
}
