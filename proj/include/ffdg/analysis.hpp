#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <set>
#include <vector>

#include "ffdg/block_operator.hpp"
#include "ffdg/error.hpp"
#include "ffdg/model.hpp"
#include "ffdg/stationary.hpp"
#include "ffdg/stencil.hpp"

namespace ffdg {

// ---------------------------------------------------------------------------
// Analytic stationary marginal of the first fluid {X_t, phi_t}: spectral
// solution of d/dx (f C) = f T with a regulated boundary at 0 and, in the
// truncated variant, at I. Modes solve z phi C = phi T.
// ---------------------------------------------------------------------------

struct FluidMarginal {
  int nphases = 0;
  bool truncated = false;
  double domain_end = 0.0;  // I when truncated, +inf otherwise

  Eigen::VectorXcd z;       // modes
  Eigen::MatrixXcd phi;     // one row per mode
  Eigen::VectorXcd coeff;   // mode amplitudes
  Eigen::VectorXd refs;     // per-mode scaling reference (0 or I, for stability)
  Eigen::VectorXd mass_at_zero;  // atom at X = 0 (phases with c < 0)
  Eigen::VectorXd mass_at_top;   // atom at X = I (phases with c > 0; truncated only)

  double density(int phase, double x) const {
    std::complex<double> v = 0.0;
    for (int m = 0; m < z.size(); ++m)
      v += coeff(m) * std::exp(z(m) * (x - refs(m))) * phi(m, phase);
    return v.real();
  }

  // exact integral of the density over [lo, hi]
  double interval_mass(int phase, double lo, double hi) const {
    std::complex<double> v = 0.0;
    for (int m = 0; m < z.size(); ++m) {
      std::complex<double> seg;
      if (std::abs(z(m)) < 1e-13)
        seg = hi - lo;
      else
        seg = (std::exp(z(m) * (hi - refs(m))) - std::exp(z(m) * (lo - refs(m)))) / z(m);
      v += coeff(m) * seg * phi(m, phase);
    }
    return v.real();
  }

  double total_mass() const {
    double s = mass_at_zero.sum() + mass_at_top.sum();
    const double end = truncated ? domain_end : 1e4;  // tail negligible far out
    for (int i = 0; i < nphases; ++i) s += interval_mass(i, 0.0, end);
    return s;
  }
};

namespace detail {

inline FluidMarginal solve_fluid_marginal(const ModelSpec& model, bool truncated,
                                          double I) {
  const int n = model.phases.size();
  const Eigen::VectorXd& c = model.c.c;
  require((c.array() != 0.0).all(), errc::degenerate_spectrum,
          "fluid marginal oracle needs all c_i nonzero");
  const Eigen::MatrixXd T = model.gen.T;

  // modes of z phi C = phi T via the plain eigenproblem C^{-1} T^T u = z u
  Eigen::MatrixXd Ainv = c.cwiseInverse().asDiagonal() * T.transpose();
  Eigen::EigenSolver<Eigen::MatrixXd> es(Ainv);
  require(es.info() == Eigen::Success, errc::degenerate_spectrum,
          "eigensolve failed for the fluid marginal");
  const Eigen::VectorXcd zs = es.eigenvalues();
  const Eigen::MatrixXcd vecs = es.eigenvectors();

  std::vector<int> sel;
  if (truncated) {
    for (int m = 0; m < n; ++m) sel.push_back(m);
  } else {
    for (int m = 0; m < n; ++m)
      if (zs(m).real() < -1e-9) sel.push_back(m);
    int nup = 0;
    for (int i = 0; i < n; ++i)
      if (c(i) > 0) ++nup;
    require(static_cast<int>(sel.size()) == nup, errc::degenerate_spectrum,
            "stable mode count does not match the up-phase count; "
            "the first fluid looks non-positive-recurrent");
  }
  for (size_t a = 0; a < sel.size(); ++a)
    for (size_t b = a + 1; b < sel.size(); ++b)
      require(std::abs(zs(sel[a]) - zs(sel[b])) > 1e-10, errc::degenerate_spectrum,
              "repeated spectral mode in the fluid marginal");

  const int nm = static_cast<int>(sel.size());
  std::vector<int> down, up;
  for (int i = 0; i < n; ++i) (c(i) < 0 ? down : up).push_back(i);

  FluidMarginal fm;
  fm.nphases = n;
  fm.truncated = truncated;
  fm.domain_end = truncated ? I : std::numeric_limits<double>::infinity();
  fm.z.resize(nm);
  fm.phi.resize(nm, n);
  fm.refs.resize(nm);
  for (int m = 0; m < nm; ++m) {
    fm.z(m) = zs(sel[m]);
    fm.phi.row(m) = vecs.col(sel[m]).transpose();
    fm.refs(m) = (truncated && fm.z(m).real() > 0) ? I : 0.0;
  }

  // unknowns: mode amplitudes, then p0 over down phases, then (truncated) pI
  // over up phases. Equations: flux balance at 0 (and at I), normalisation.
  const int ndown = static_cast<int>(down.size());
  const int nup2 = static_cast<int>(up.size());
  const int nun = nm + ndown + (truncated ? nup2 : 0);
  const int neq = (truncated ? 2 * n : n) + 1;
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(neq, nun);
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(neq);

  auto mode_val = [&](int m, double x, int i) {
    return std::exp(fm.z(m) * (x - fm.refs(m))) * fm.phi(m, i);
  };
  auto mode_integral = [&](int m, double lo, double hi) {
    if (std::abs(fm.z(m)) < 1e-13) return std::complex<double>(hi - lo, 0.0);
    return (std::exp(fm.z(m) * (hi - fm.refs(m))) -
            std::exp(fm.z(m) * (lo - fm.refs(m)))) / fm.z(m);
  };

  // c_i f_i(0) = [p0 T]_i
  for (int i = 0; i < n; ++i) {
    for (int m = 0; m < nm; ++m) A(i, m) += c(i) * mode_val(m, 0.0, i);
    for (int d = 0; d < ndown; ++d) A(i, nm + d) -= T(down[d], i);
  }
  if (truncated) {
    // -c_i f_i(I) = [pI T]_i
    for (int i = 0; i < n; ++i) {
      for (int m = 0; m < nm; ++m) A(n + i, m) += c(i) * mode_val(m, I, i);
      for (int u = 0; u < nup2; ++u) A(n + i, nm + ndown + u) += T(up[u], i);
    }
  }
  const int last = neq - 1;
  for (int m = 0; m < nm; ++m) {
    std::complex<double> s = 0.0;
    const double hi = truncated ? I : 0.0;
    for (int i = 0; i < n; ++i)
      s += (truncated ? mode_integral(m, 0.0, hi)
                      : -std::complex<double>(1.0, 0.0) / fm.z(m)) * fm.phi(m, i);
    A(last, m) = s;
  }
  for (int j = nm; j < nun; ++j) A(last, j) = 1.0;
  b(last) = 1.0;

  Eigen::VectorXcd sol = A.completeOrthogonalDecomposition().solve(b);
  const double resid = (A * sol - b).cwiseAbs().maxCoeff();
  require(resid < 1e-8, errc::degenerate_spectrum,
          "fluid marginal boundary system is inconsistent (residual " +
              std::to_string(resid) + ")");

  fm.coeff = sol.head(nm);
  fm.mass_at_zero = Eigen::VectorXd::Zero(n);
  fm.mass_at_top = Eigen::VectorXd::Zero(n);
  for (int d = 0; d < ndown; ++d) fm.mass_at_zero(down[d]) = sol(nm + d).real();
  if (truncated)
    for (int u = 0; u < nup2; ++u) fm.mass_at_top(up[u]) = sol(nm + ndown + u).real();
  return fm;
}

}  // namespace detail

// Stationary X-marginal of the untruncated first-fluid queue on [0, inf).
inline FluidMarginal analytic_chi_oracle(const ModelSpec& model) {
  return detail::solve_fluid_marginal(model, false, 0.0);
}

// Stationary X-marginal of the first-fluid queue regulated on [0, I]; the
// reference the DG solution actually approximates (it carries the truncation
// atom at I in its last cell).
inline FluidMarginal analytic_chi_oracle_truncated(const ModelSpec& model, double I) {
  return detail::solve_fluid_marginal(model, true, I);
}

// ---------------------------------------------------------------------------
// Star seminorm: an L1-type metric that collapses the two boundary meshes to
// signed point masses:  |int_0^dh g| + int_dh^{I-dh} |g| + |int_{I-dh}^I g|.
// ---------------------------------------------------------------------------

// Phase-indexed piecewise-linear function on [0, I] with optional atoms at
// the endpoints. Segment s runs from x[s] to x[s+1] with values vl[s] at the
// left end and vr[s] at the right end (jumps allowed at breakpoints).
struct PhaseFunction {
  std::vector<std::vector<double>> x;    // per phase: breakpoints
  std::vector<std::vector<double>> vl;   // per phase: left values per segment
  std::vector<std::vector<double>> vr;   // per phase: right values per segment
  Eigen::VectorXd atom0, atom_top;       // per-phase point masses (may be empty)

  int nphases() const { return static_cast<int>(x.size()); }
  double domain_end() const { return x.front().back(); }

  double value(int i, double t, bool from_left) const {
    const auto& xi = x[i];
    auto it = std::upper_bound(xi.begin(), xi.end(), t);
    int s = static_cast<int>(it - xi.begin()) - 1;
    if (from_left && s > 0 && t == xi[s]) --s;
    s = std::clamp(s, 0, static_cast<int>(xi.size()) - 2);
    const double lo = xi[s], hi = xi[s + 1];
    const double lam = (t - lo) / (hi - lo);
    return vl[i][s] + lam * (vr[i][s] - vl[i][s]);
  }
};

namespace detail {

// integral of the linear segment and of its absolute value over [a, b]
inline void segment_integrals(double a, double b, double va, double vb, double& integ,
                              double& integ_abs) {
  const double len = b - a;
  integ = 0.5 * (va + vb) * len;
  if (va * vb >= 0.0) {
    integ_abs = std::abs(integ);
  } else {
    const double r = va / (va - vb);  // root position in [0,1]
    integ_abs = 0.5 * (std::abs(va) * r + std::abs(vb) * (1.0 - r)) * len;
  }
}

}  // namespace detail

// Star seminorm of the difference f - g (either atom vector may be empty).
inline double star_seminorm(const PhaseFunction& f, const PhaseFunction& g, double dh) {
  require(f.nphases() == g.nphases(), errc::invalid_parameter,
          "star seminorm: phase counts differ");
  const double I = f.domain_end();
  require(std::abs(g.domain_end() - I) < 1e-9, errc::invalid_parameter,
          "star seminorm: domains differ");
  double total = 0.0;
  for (int i = 0; i < f.nphases(); ++i) {
    std::set<double> pts(f.x[i].begin(), f.x[i].end());
    pts.insert(g.x[i].begin(), g.x[i].end());
    pts.insert(dh);
    pts.insert(I - dh);
    std::vector<double> grid(pts.begin(), pts.end());

    double left = 0.0, mid = 0.0, right = 0.0;
    for (size_t s = 0; s + 1 < grid.size(); ++s) {
      const double a = grid[s], b = grid[s + 1];
      const double va = f.value(i, a, false) - g.value(i, a, false);
      const double vb = f.value(i, b, true) - g.value(i, b, true);
      double integ, integ_abs;
      detail::segment_integrals(a, b, va, vb, integ, integ_abs);
      if (b <= dh + 1e-15)
        left += integ;
      else if (a >= I - dh - 1e-15)
        right += integ;
      else
        mid += integ_abs;
    }
    const double a0f = f.atom0.size() ? f.atom0(i) : 0.0;
    const double a0g = g.atom0.size() ? g.atom0(i) : 0.0;
    const double aTf = f.atom_top.size() ? f.atom_top(i) : 0.0;
    const double aTg = g.atom_top.size() ? g.atom_top(i) : 0.0;
    total += std::abs(left + a0f - a0g) + mid + std::abs(right + aTf - aTg);
  }
  return total;
}

inline double star_seminorm(const PhaseFunction& f, double dh) {
  PhaseFunction zero = f;
  for (auto& v : zero.vl) std::fill(v.begin(), v.end(), 0.0);
  for (auto& v : zero.vr) std::fill(v.begin(), v.end(), 0.0);
  zero.atom0.setZero();
  zero.atom_top.setZero();
  return star_seminorm(f, zero, dh);
}

// DG per-phase cell masses as a piecewise-linear phase function (boundary
// cells enter as densities over their dh-wide meshes, matching the seminorm's
// point-mass reading of those cells).
inline PhaseFunction dg_phase_function(const BasisSet& basis,
                                       const std::vector<Eigen::RowVectorXd>& cell_masses) {
  PhaseFunction pf;
  const int n = static_cast<int>(cell_masses.size());
  pf.atom0 = Eigen::VectorXd::Zero(n);
  pf.atom_top = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    std::vector<double> xs{basis.stencil.nodes};
    std::vector<double> vl, vr;
    for (int k = 0; k < basis.stencil.mesh_count(); ++k) {
      const double w = basis.stencil.width(k);
      const int o = basis.offset[k];
      if (basis.count[k] == 1) {
        const double d = cell_masses[i](o) / w;
        vl.push_back(d);
        vr.push_back(d);
      } else {
        vl.push_back(cell_masses[i](o) / (w / 2.0));
        vr.push_back(cell_masses[i](o + 1) / (w / 2.0));
      }
    }
    pf.x.push_back(std::move(xs));
    pf.vl.push_back(std::move(vl));
    pf.vr.push_back(std::move(vr));
  }
  return pf;
}

// Oracle sampled onto a piecewise-linear proxy on the union of the stencil
// nodes and a uniform refinement; the proxy error is O(step^2) and far below
// the discretisation errors being measured.
inline PhaseFunction oracle_phase_function(const FluidMarginal& fm, const Stencil& st,
                                           double step = 0.002) {
  PhaseFunction pf;
  const double I = st.right();
  std::set<double> pts(st.nodes.begin(), st.nodes.end());
  for (double x = 0.0; x < I; x += step) pts.insert(x);
  pts.insert(I);
  std::vector<double> grid(pts.begin(), pts.end());
  pf.atom0 = fm.mass_at_zero;
  pf.atom_top = fm.mass_at_top;
  for (int i = 0; i < fm.nphases; ++i) {
    std::vector<double> vl, vr;
    for (size_t s = 0; s + 1 < grid.size(); ++s) {
      vl.push_back(fm.density(i, grid[s]));
      vr.push_back(fm.density(i, grid[s + 1]));
    }
    pf.x.push_back(grid);
    pf.vl.push_back(std::move(vl));
    pf.vr.push_back(std::move(vr));
  }
  return pf;
}

// ---------------------------------------------------------------------------
// Convergence studies.
// ---------------------------------------------------------------------------

struct StudyPoint {
  double param = 0.0;  // h or dh
  double error = 0.0;
  int elements = 0;  // total elements across phases
};

struct ConvergenceReport {
  std::vector<StudyPoint> points;
  double slope = 0.0;
  double r2 = 0.0;
  int degree = 0;
};

inline void fit_loglog(ConvergenceReport& rep) {
  // fit over the points with positive error; fewer than 3 leaves no slope
  std::vector<const StudyPoint*> pts;
  for (const auto& p : rep.points)
    if (p.error > 0.0) pts.push_back(&p);
  if (pts.size() < 3) {
    rep.slope = std::numeric_limits<double>::quiet_NaN();
    rep.r2 = 0.0;
    return;
  }
  const int n = static_cast<int>(pts.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (const auto* pp : pts) {
    const auto& p = *pp;
    const double lx = std::log(p.param), ly = std::log(p.error);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    syy += ly * ly;
  }
  const double vx = sxx - sx * sx / n;
  const double vy = syy - sy * sy / n;
  const double cov = sxy - sx * sy / n;
  rep.slope = cov / vx;
  rep.r2 = (vy > 0) ? (cov * cov) / (vx * vy) : 1.0;
}

enum class StudyReference { truncated, untruncated };

struct StudyOptions {
  RhoMode rho_mode = RhoMode::normalized;
  StudyReference reference = StudyReference::truncated;
  StationaryOptions stationary;
  double oracle_step = 0.002;
};

namespace detail {

inline double marginal_error(const ModelSpec& model, const Stencil& st, int degree,
                             const StudyOptions& opt, int* elements) {
  const BasisSet basis = make_basis(st, degree);
  const Discretisation d = discretise(model, basis, opt.rho_mode);
  const StationarySolution sol = solve_stationary(d, opt.stationary);
  const auto chi = per_phase_marginal(sol);
  const FluidMarginal fm = opt.reference == StudyReference::truncated
                               ? analytic_chi_oracle_truncated(model, st.right())
                               : analytic_chi_oracle(model);
  if (elements) *elements = basis.total * model.phases.size();
  const double dh = st.width(0);
  return star_seminorm(dg_phase_function(basis, chi),
                       oracle_phase_function(fm, st, opt.oracle_step), dh);
}

}  // namespace detail

// Error of the DG X-marginal against the analytic reference for a range of
// interior mesh sizes h, with the boundary width dh fixed.
inline ConvergenceReport convergence_study(const ModelSpec& model,
                                           const std::vector<double>& hs, double dh,
                                           int degree, const StudyOptions& opt = {}) {
  ConvergenceReport rep;
  rep.degree = degree;
  for (double h : hs) {
    const Stencil st = make_study_stencil(h, dh, model.truncation, model.r.breakpoints);
    StudyPoint p;
    p.param = h;
    p.error = detail::marginal_error(model, st, degree, opt, &p.elements);
    rep.points.push_back(p);
  }
  fit_loglog(rep);
  return rep;
}

// Error sensitivity to the boundary-mesh width dh at fixed h, differenced
// against a finer reference run to remove the h-dominated plateau.
inline ConvergenceReport boundary_width_study(const ModelSpec& model,
                                              const std::vector<double>& dhs,
                                              double h = 1.0, double ref_dh = 0.005,
                                              int degree = 1,
                                              const StudyOptions& opt = {}) {
  ConvergenceReport rep;
  rep.degree = degree;
  const Stencil st_ref = make_study_stencil(h, ref_dh, model.truncation, model.r.breakpoints);
  const double err_ref = detail::marginal_error(model, st_ref, degree, opt, nullptr);
  for (double dh : dhs) {
    require(dh < h, errc::invalid_parameter, "boundary study needs dh < h");
    const Stencil st = make_study_stencil(h, dh, model.truncation, model.r.breakpoints);
    StudyPoint p;
    p.param = dh;
    p.error = std::abs(detail::marginal_error(model, st, degree, opt, &p.elements) - err_ref);
    rep.points.push_back(p);
  }
  fit_loglog(rep);
  return rep;
}

}  // namespace ffdg
