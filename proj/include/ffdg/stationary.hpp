#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <string>
#include <vector>

#include "ffdg/block_operator.hpp"
#include "ffdg/error.hpp"
#include "ffdg/linalg.hpp"
#include "ffdg/riccati.hpp"

namespace ffdg {

// Stationary distribution of the embedded chain of (X, phi) observed at the
// successive returns of Y to level zero. Element masses over the (-) class.
struct XiVector {
  Eigen::RowVectorXd masses;  // sum = 1
  double eigenvalue = 0.0;    // Perron value of the return map (1 up to DG roundoff)
  double residual = 0.0;      // |xi A - eigenvalue xi|_inf
};

namespace detail {

// Return map of the embedded chain: xi -> [xi 0] (-C)^{-1} [B^{-+}; B^{0+}] psi,
// restricted to the (-) rows.
inline Matrix xi_return_map(const Discretisation& d, const Matrix& psi) {
  const Matrix C = d.B.minus_zero_block();
  const int nm = d.B.layout.class_size(SignClass::minus);
  const int n0 = d.B.layout.class_size(SignClass::zero);
  Matrix Btop(nm + n0, d.B.layout.class_size(SignClass::plus));
  Btop.topRows(nm) = d.B.sub(SignClass::minus, SignClass::plus);
  if (n0 > 0) Btop.bottomRows(n0) = d.B.sub(SignClass::zero, SignClass::plus);
  Eigen::PartialPivLU<Matrix> lu(-C);
  const Matrix M1 = lu.solve(Btop);
  require((((-C) * M1 - Btop).cwiseAbs().maxCoeff()) < 1e-6, errc::singular_censored_block,
          "censored (-,0) block is numerically singular");
  return (M1 * psi).topRows(nm);
}

}  // namespace detail

// Left Perron eigenvector of the return map for the eigenvalue nearest 1,
// by shifted inverse iteration with a dense eigensolve fallback; the unit
// eigenvalue must be simple.
inline XiVector solve_xi(const Discretisation& d, const Matrix& psi,
                         double eig_tol = 1e-6) {
  const Matrix A = detail::xi_return_map(d, psi);
  const int n = static_cast<int>(A.rows());

  Eigen::EigenSolver<Matrix> es(A.transpose(), /*computeEigenvectors=*/false);
  int near_one = 0;
  double lambda_best = 0.0, dist_best = 1e300;
  for (int i = 0; i < n; ++i) {
    const double dist = std::abs(es.eigenvalues()(i) - std::complex<double>(1.0, 0.0));
    if (dist < dist_best) {
      dist_best = dist;
      lambda_best = es.eigenvalues()(i).real();
    }
    if (dist < 1e-4) ++near_one;
  }
  require(near_one <= 1, errc::no_stationary_return,
          "unit eigenvalue of the return map is not simple");
  require(dist_best <= eig_tol, errc::no_stationary_return,
          "return map has no eigenvalue near 1 (closest at distance " +
              std::to_string(dist_best) + "); Y looks null-recurrent or transient");

  // inverse iteration on A^T with shift 1
  Eigen::PartialPivLU<Matrix> lu(A.transpose() - Matrix::Identity(n, n));
  Vector v = Vector::Ones(n) / std::sqrt(double(n));
  double resid = 1e300;
  for (int it = 0; it < 200 && resid > 1e-13; ++it) {
    Vector w = lu.solve(v);
    const double nw = w.norm();
    if (!std::isfinite(nw) || nw == 0.0) break;
    v = w / nw;
    resid = (A.transpose() * v - lambda_best * v).cwiseAbs().maxCoeff();
  }
  if (!(resid <= 1e-10)) {
    // dense fallback
    Eigen::EigenSolver<Matrix> esv(A.transpose(), true);
    int best = 0;
    for (int i = 1; i < n; ++i)
      if (std::abs(esv.eigenvalues()(i) - 1.0) < std::abs(esv.eigenvalues()(best) - 1.0))
        best = i;
    v = esv.eigenvectors().col(best).real();
  }

  XiVector xi;
  xi.masses = v.transpose();
  if (xi.masses.sum() < 0) xi.masses = -xi.masses;
  xi.masses /= xi.masses.sum();
  xi.eigenvalue = lambda_best;
  xi.residual = (xi.masses * A - lambda_best * xi.masses).cwiseAbs().maxCoeff();
  return xi;
}

// Unnormalised boundary masses [p^- p^0] = [xi 0] (-C)^{-1}: the expected
// sojourn measure of (X, phi) at Y = 0 per regeneration cycle.
inline std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd> boundary_masses(
    const Discretisation& d, const XiVector& xi) {
  const Matrix C = d.B.minus_zero_block();
  const int nm = d.B.layout.class_size(SignClass::minus);
  const int n0 = d.B.layout.class_size(SignClass::zero);
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(nm + n0);
  row.head(nm) = xi.masses;
  Eigen::RowVectorXd p = (-C).transpose().partialPivLu().solve(row.transpose()).transpose();
  return {p.head(nm), p.tail(n0)};
}

// The full joint stationary solution. All mass vectors are element masses in
// the layout's active-cell ordering, normalised so that total probability is
// one. Immutable after construction.
struct StationarySolution {
  GroupLayout layout;
  BasisSet basis;
  std::vector<std::string> phase_labels;

  XiVector xi;
  double alpha = 0.0;  // normalising constant applied to the cycle measures
  Eigen::RowVectorXd p_minus, p_zero;          // P[Y = 0] masses
  Eigen::RowVectorXd pi_plus, pi_minus, pi_zero;  // integrated Y > 0 masses
  double total_probability = 0.0;

  // cached operators for density evaluation
  Eigen::RowVectorXd v0;  // p [B^{-+}; B^{0+}] (normalised)
  Matrix K, Kinv;         // Kinv = (-K)^{-1}
  Matrix Bp0, Bm0, inv00; // inv00 = (-B^{00})^{-1}
  Vector inv_rho_plus, inv_rho_minus;

  double prob_y_zero() const { return p_minus.sum() + p_zero.sum(); }
  double prob_y_positive() const { return pi_plus.sum() + pi_minus.sum() + pi_zero.sum(); }

  struct Slice {
    double y;
    Eigen::RowVectorXd plus, minus, zero;  // element masses per unit y
    double total() const { return plus.sum() + minus.sum() + zero.sum(); }
  };

  Slice density_from(const Matrix& Eky, double y) const {
    Slice s;
    s.y = y;
    const Eigen::RowVectorXd w = v0 * Eky;
    s.plus = w.cwiseProduct(inv_rho_plus.transpose());
    const Eigen::RowVectorXd wm = w * psi_;
    s.minus = wm.cwiseProduct(inv_rho_minus.transpose());
    if (inv00.rows() > 0) {
      Eigen::RowVectorXd feed = s.plus * Bp0 + s.minus * Bm0;
      s.zero = feed * inv00;
    } else {
      s.zero = Eigen::RowVectorXd::Zero(0);
    }
    return s;
  }

  // Joint density slice at level y (element masses per unit y).
  Slice density_at_y(double y) const {
    require(y >= 0.0, errc::invalid_parameter, "density_at_y needs y >= 0");
    return density_from(expm(K * y), y);
  }

  // Density slices on a uniform y-grid, reusing e^{K step} across the grid.
  std::vector<Slice> density_on_grid(double y0, double y1, double step) const {
    require(step > 0 && y1 >= y0 && y0 >= 0, errc::invalid_parameter, "bad y grid");
    std::vector<Slice> out;
    const Matrix E = expm(K * step);
    Matrix Ey = expm(K * y0);
    for (double y = y0; y <= y1 + 1e-12; y += step) {
      out.push_back(density_from(Ey, y));
      Ey = Ey * E;
    }
    return out;
  }

  Matrix psi_;  // kept for density evaluation and diagnostics
};

struct StationaryOptions {
  PsiOptions psi;
  double k_stability_tol = 1e-8;
  double xi_eig_tol = 1e-6;
};

// Full pipeline of Theorem-2 quantities on one discretisation.
inline StationarySolution solve_stationary(const Discretisation& d,
                                           const StationaryOptions& opt = {}) {
  StationarySolution s;
  s.layout = d.B.layout;
  s.basis = d.basis;
  s.phase_labels = d.model.phases.labels;

  PsiSolution psi = solve_psi(d.D0, opt.psi);
  s.psi_ = psi.psi;

  s.xi = solve_xi(d, s.psi_, opt.xi_eig_tol);
  auto [pm, p0] = boundary_masses(d, s.xi);

  const int nm = s.layout.class_size(SignClass::minus);
  const int n0 = s.layout.class_size(SignClass::zero);
  Matrix Btop(nm + n0, s.layout.class_size(SignClass::plus));
  Btop.topRows(nm) = d.B.sub(SignClass::minus, SignClass::plus);
  if (n0 > 0) Btop.bottomRows(n0) = d.B.sub(SignClass::zero, SignClass::plus);
  Eigen::RowVectorXd pj(nm + n0);
  pj << pm, p0;
  Eigen::RowVectorXd v0 = pj * Btop;

  s.K = build_K(d.D0, s.psi_, opt.k_stability_tol);
  s.Kinv = (-s.K).partialPivLu().solve(Matrix::Identity(s.K.rows(), s.K.cols()));

  s.inv_rho_plus = d.R.inv_rho_plus;
  s.inv_rho_minus = d.R.inv_rho_minus;
  if (n0 > 0) {
    s.Bp0 = d.B.sub(SignClass::plus, SignClass::zero);
    s.Bm0 = d.B.sub(SignClass::minus, SignClass::zero);
    const Matrix B00 = d.B.sub(SignClass::zero, SignClass::zero);
    s.inv00 = (-B00).partialPivLu().solve(Matrix::Identity(n0, n0));
  }

  // integrated densities: int_0^inf e^{Ky} dy = (-K)^{-1}
  const Eigen::RowVectorXd base = v0 * s.Kinv;
  Eigen::RowVectorXd Pi_p = base.cwiseProduct(s.inv_rho_plus.transpose());
  Eigen::RowVectorXd Pi_m = (base * s.psi_).cwiseProduct(s.inv_rho_minus.transpose());
  Eigen::RowVectorXd Pi_0 =
      n0 > 0 ? Eigen::RowVectorXd((Pi_p * s.Bp0 + Pi_m * s.Bm0) * s.inv00)
             : Eigen::RowVectorXd::Zero(0);

  const double total = pj.sum() + Pi_p.sum() + Pi_m.sum() + Pi_0.sum();
  require(total > 0 && std::isfinite(total), errc::unstable_k,
          "non-finite or non-positive total cycle mass");
  s.alpha = 1.0 / total;

  s.p_minus = s.alpha * pm;
  s.p_zero = s.alpha * p0;
  s.pi_plus = s.alpha * Pi_p;
  s.pi_minus = s.alpha * Pi_m;
  s.pi_zero = s.alpha * Pi_0;
  s.v0 = s.alpha * v0;
  s.total_probability = s.prob_y_zero() + s.prob_y_positive();
  return s;
}

// ---------------------------------------------------------------------------
// Marginals of the first fluid.
// ---------------------------------------------------------------------------

// Per-phase X-marginal cell masses (full element indexing), combining the
// Y = 0 masses and the integrated Y > 0 densities.
inline std::vector<Eigen::RowVectorXd> per_phase_marginal(const StationarySolution& s) {
  const GroupLayout& L = s.layout;
  const int nphase = static_cast<int>(s.phase_labels.size());
  std::vector<Eigen::RowVectorXd> chi(nphase, Eigen::RowVectorXd::Zero(L.N));
  auto scatter = [&](SignClass cls, const Eigen::RowVectorXd& active_masses) {
    int pos = 0;
    for (int g : L.class_groups[static_cast<int>(cls)])
      for (int cell : L.active[g]) chi[L.phase[g]](cell) += active_masses(pos++);
  };
  scatter(SignClass::minus, s.p_minus + s.pi_minus);
  scatter(SignClass::zero, s.p_zero + s.pi_zero);
  scatter(SignClass::plus, s.pi_plus);
  return chi;
}

enum class MarginalSplit { y_zero_positive, on_off };

struct Marginals {
  std::vector<std::string> names;
  std::vector<Eigen::RowVectorXd> cell_masses;  // full element indexing
};

inline Marginals marginal_x(const StationarySolution& s, MarginalSplit split) {
  const GroupLayout& L = s.layout;
  Marginals m;
  if (split == MarginalSplit::y_zero_positive) {
    Eigen::RowVectorXd chi0 = Eigen::RowVectorXd::Zero(L.N);
    Eigen::RowVectorXd chip = Eigen::RowVectorXd::Zero(L.N);
    auto scatter = [&](SignClass cls, const Eigen::RowVectorXd& am, Eigen::RowVectorXd& dst) {
      int pos = 0;
      for (int g : L.class_groups[static_cast<int>(cls)])
        for (int cell : L.active[g]) dst(cell) += am(pos++);
    };
    scatter(SignClass::minus, s.p_minus, chi0);
    scatter(SignClass::zero, s.p_zero, chi0);
    scatter(SignClass::plus, s.pi_plus, chip);
    scatter(SignClass::minus, s.pi_minus, chip);
    scatter(SignClass::zero, s.pi_zero, chip);
    m.names = {"chi0", "chi_plus"};
    m.cell_masses = {chi0, chip};
  } else {
    // groups by the first character of the phase label: '1' = first input on
    auto per_phase = per_phase_marginal(s);
    Eigen::RowVectorXd on = Eigen::RowVectorXd::Zero(L.N);
    Eigen::RowVectorXd off = Eigen::RowVectorXd::Zero(L.N);
    for (size_t i = 0; i < s.phase_labels.size(); ++i) {
      require(!s.phase_labels[i].empty() &&
                  (s.phase_labels[i][0] == '0' || s.phase_labels[i][0] == '1'),
              errc::invalid_parameter,
              "on/off split needs phase labels starting with '0' or '1'");
      (s.phase_labels[i][0] == '1' ? on : off) += per_phase[i];
    }
    m.names = {"chi_on", "chi_off"};
    m.cell_masses = {on, off};
  }
  return m;
}

}  // namespace ffdg
