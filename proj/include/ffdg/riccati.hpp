#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "ffdg/block_operator.hpp"
#include "ffdg/error.hpp"
#include "ffdg/linalg.hpp"

namespace ffdg {

enum class PsiMethod { newton, fixed_point };

inline const char* psi_method_name(PsiMethod m) {
  return m == PsiMethod::newton ? "newton" : "fixed_point";
}

struct PsiOptions {
  PsiMethod method = PsiMethod::newton;
  double tol = 1e-10;
  int max_iter_newton = 200;
  int max_iter_fixed_point = 50000;
  bool fallback_to_fixed_point = true;  // on Newton failure
};

// psi maps element masses on the + class to element masses on the - class
// (first-return distribution of the second fluid to level zero).
struct PsiSolution {
  Matrix psi;
  double residual = 0.0;
  int iterations = 0;
  PsiMethod method = PsiMethod::newton;
};

inline double riccati_residual(const DBlocks& D, const Matrix& psi) {
  return (D.pm + psi * D.mp * psi + D.pp * psi + psi * D.mm).cwiseAbs().maxCoeff();
}

namespace detail {

// Newton iteration from psi = 0: each step solves the Sylvester equation
// (Dpp + psi Dmp) delta + delta (Dmm + Dmp psi) = -residual.
inline PsiSolution solve_psi_newton(const DBlocks& D, double tol, int max_iter) {
  PsiSolution s;
  s.method = PsiMethod::newton;
  s.psi = Matrix::Zero(D.pp.rows(), D.mm.rows());
  for (int it = 0; it < max_iter; ++it) {
    const Matrix R = D.pm + s.psi * D.mp * s.psi + D.pp * s.psi + s.psi * D.mm;
    s.residual = R.cwiseAbs().maxCoeff();
    s.iterations = it;
    require(std::isfinite(s.residual), errc::non_finite_iterate,
            "newton iterate became non-finite");
    if (s.residual <= tol) return s;
    const Matrix A = D.pp + s.psi * D.mp;
    const Matrix B = D.mm + D.mp * s.psi;
    s.psi += solve_sylvester(A, B, -R);
  }
  fail(errc::no_convergence, "newton Riccati iteration did not reach tol " +
                                 std::to_string(tol) + " in " + std::to_string(max_iter) +
                                 " iterations (residual " + std::to_string(s.residual) + ")");
}

// Linear fixed point from psi = 0, monotone for this equation class:
//   Dpp psi_{n+1} + psi_{n+1} Dmm = -(Dpm + psi_n Dmp psi_n).
// The Schur factors of Dpp and Dmm are reused across iterations.
inline PsiSolution solve_psi_fixed_point(const DBlocks& D, double tol, int max_iter) {
  PsiSolution s;
  s.method = PsiMethod::fixed_point;
  s.psi = Matrix::Zero(D.pp.rows(), D.mm.rows());
  SylvesterFactor fac(D.pp, D.mm);
  for (int it = 0; it < max_iter; ++it) {
    const Matrix next = fac.solve(-(D.pm + s.psi * D.mp * s.psi));
    const double step = (next - s.psi).cwiseAbs().maxCoeff();
    require(next.allFinite(), errc::non_finite_iterate,
            "fixed-point iterate became non-finite");
    s.psi = next;
    s.iterations = it + 1;
    if (step <= 0.1 * tol) {
      s.residual = riccati_residual(D, s.psi);
      if (s.residual <= tol) return s;
    }
  }
  s.residual = riccati_residual(D, s.psi);
  if (s.residual <= tol) return s;
  fail(errc::no_convergence, "fixed-point Riccati iteration did not reach tol " +
                                 std::to_string(tol) + " (residual " +
                                 std::to_string(s.residual) + ")");
}

}  // namespace detail

// Minimal nonnegative solution of
//   D^{+-} + psi D^{-+} psi + D^{++} psi + psi D^{--} = 0,
// selected by iterating from psi = 0.
inline PsiSolution solve_psi(const DBlocks& D, const PsiOptions& opt = {}) {
  if (opt.method == PsiMethod::fixed_point)
    return detail::solve_psi_fixed_point(D, opt.tol, opt.max_iter_fixed_point);
  if (!opt.fallback_to_fixed_point)
    return detail::solve_psi_newton(D, opt.tol, opt.max_iter_newton);
  try {
    return detail::solve_psi_newton(D, opt.tol, opt.max_iter_newton);
  } catch (const Error&) {
    return detail::solve_psi_fixed_point(D, opt.tol, opt.max_iter_fixed_point);
  }
}

// K = D^{++}(0) + psi D^{-+}(0); generates the level dependence e^{Ky} of the
// stationary density. Spectrum must lie strictly in the open left half-plane,
// otherwise the model is not positive recurrent on this discretisation.
inline Matrix build_K(const DBlocks& D, const Matrix& psi, double tol = 1e-8) {
  Matrix K = D.pp + psi * D.mp;
  const double sa = spectral_abscissa(K);
  require(sa < -tol, errc::unstable_k,
          "K has spectral abscissa " + std::to_string(sa) +
              "; model looks null-recurrent/transient or truncation too tight");
  return K;
}

// Cumulative distribution of (X_tau, phi_tau) at the first return of Y to 0.
struct ReturnCdf {
  int phase;                  // destination phase (in S_-)
  std::vector<double> nodes;  // stencil nodes
  std::vector<double> cdf;    // P[X_tau <= node, phi_tau = phase], unnormalised
};

// initial: element masses over the + class (layout ordering); returns one CDF
// per destination phase evaluated at the stencil nodes.
inline std::vector<ReturnCdf> first_return_cdf(const Discretisation& d, const Matrix& psi,
                                               const Eigen::RowVectorXd& initial) {
  const GroupLayout& L = d.B.layout;
  require(initial.size() == L.class_size(SignClass::plus), errc::invalid_parameter,
          "initial vector must live on the + class cells");
  const Eigen::RowVectorXd ret = initial * psi;

  std::vector<ReturnCdf> out;
  int pos = 0;
  for (int g : L.class_groups[static_cast<int>(SignClass::minus)]) {
    ReturnCdf c;
    c.phase = L.phase[g];
    c.nodes = d.basis.stencil.nodes;
    c.cdf.assign(c.nodes.size(), 0.0);
    Eigen::VectorXd cell_mass = Eigen::VectorXd::Zero(L.N);
    for (int cell : L.active[g]) cell_mass(cell) = ret(pos++);
    for (int k = 0; k < d.basis.stencil.mesh_count(); ++k) {
      double m = 0.0;
      for (int j = 0; j < d.basis.count[k]; ++j) m += cell_mass(d.basis.offset[k] + j);
      c.cdf[k + 1] = c.cdf[k] + m;
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace ffdg
