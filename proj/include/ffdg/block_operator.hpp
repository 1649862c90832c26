#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "ffdg/dg_core.hpp"
#include "ffdg/error.hpp"
#include "ffdg/model.hpp"
#include "ffdg/stencil.hpp"

namespace ffdg {

// Row/column bookkeeping for the phase-and-sign block operators. A "group" is
// one (sign class, phase) pair with phase in S_class; each group spans N
// element slots, of which only the cells of gamma_i^l are active. Groups are
// ordered +, -, 0 with phases ascending inside each class.
struct GroupLayout {
  int N = 0;
  std::vector<SignClass> sign;             // per group
  std::vector<int> phase;                  // per group
  std::vector<std::vector<int>> active;    // per group: local element indices
  std::array<std::vector<int>, 3> class_groups;   // group ids per class
  std::array<std::vector<int>, 3> class_active;   // stacked global indices per class

  int groups() const { return static_cast<int>(sign.size()); }
  int dim() const { return groups() * N; }
  int group_of(SignClass s, int ph) const {
    for (int g = 0; g < groups(); ++g)
      if (sign[g] == s && phase[g] == ph) return g;
    return -1;
  }
  int class_size(SignClass s) const {
    return static_cast<int>(class_active[static_cast<int>(s)].size());
  }

  static GroupLayout build(const BasisSet& basis, const MeshIndexSets& gamma) {
    GroupLayout L;
    L.N = basis.total;
    const int nphase = static_cast<int>(gamma.sets.size());
    for (int s = 0; s < 3; ++s) {
      for (int i = 0; i < nphase; ++i) {
        const auto& meshes = gamma.sets[i][s];
        if (meshes.empty()) continue;
        std::vector<int> cells;
        for (int k : meshes)
          for (int j = 0; j < basis.count[k]; ++j) cells.push_back(basis.offset[k] + j);
        const int g = L.groups();
        L.sign.push_back(static_cast<SignClass>(s));
        L.phase.push_back(i);
        L.active.push_back(cells);
        L.class_groups[s].push_back(g);
        for (int c : cells) L.class_active[s].push_back(g * L.N + c);
      }
    }
    return L;
  }
};

// The DG approximation of the generator of {X_t, phi_t} restricted to the
// sign regions: block (l,i),(m,j) is (T_ij I + [i==j] Q^i) with rows masked to
// gamma_i^l cells and columns to gamma_j^m cells. Stored stacked and dense;
// acts on element-mass row vectors from the right.
struct BlockOperatorMatrix {
  GroupLayout layout;
  Matrix full;

  Eigen::Block<const Matrix> group_block(int gi, int gj) const {
    return full.block(gi * layout.N, gj * layout.N, layout.N, layout.N);
  }

  // Active-index submatrix between two sign classes.
  Matrix sub(SignClass l, SignClass m) const {
    const auto& ri = layout.class_active[static_cast<int>(l)];
    const auto& ci = layout.class_active[static_cast<int>(m)];
    Matrix out(ri.size(), ci.size());
    for (size_t a = 0; a < ri.size(); ++a)
      for (size_t b = 0; b < ci.size(); ++b) out(a, b) = full(ri[a], ci[b]);
    return out;
  }

  // Stacked censored block over the (-,0) classes, in that order.
  Matrix minus_zero_block() const {
    const Matrix mm = sub(SignClass::minus, SignClass::minus);
    const Matrix m0 = sub(SignClass::minus, SignClass::zero);
    const Matrix zm = sub(SignClass::zero, SignClass::minus);
    const Matrix zz = sub(SignClass::zero, SignClass::zero);
    Matrix C(mm.rows() + zm.rows(), mm.cols() + m0.cols());
    C << mm, m0, zm, zz;
    return C;
  }
};

inline BlockOperatorMatrix assemble_B(const ModelSpec& model, const BasisSet& basis,
                                      const MeshIndexSets& gamma, const GeneratorSet& gens) {
  BlockOperatorMatrix B;
  B.layout = GroupLayout::build(basis, gamma);
  const GroupLayout& L = B.layout;
  const int N = L.N;
  B.full = Matrix::Zero(L.dim(), L.dim());

  std::vector<Eigen::VectorXd> mask(L.groups());
  for (int g = 0; g < L.groups(); ++g) {
    mask[g] = Eigen::VectorXd::Zero(N);
    for (int c : L.active[g]) mask[g](c) = 1.0;
  }

  for (int gi = 0; gi < L.groups(); ++gi) {
    for (int gj = 0; gj < L.groups(); ++gj) {
      const int i = L.phase[gi], j = L.phase[gj];
      Matrix blk = model.gen.T(i, j) * Matrix::Identity(N, N);
      if (i == j) blk += gens.Q[i];
      blk = mask[gi].asDiagonal() * blk * mask[gj].asDiagonal();
      B.full.block(gi * N, gj * N, N, N) = blk;
    }
  }
  return B;
}

// Largest absolute row sum of the stacked B; zero means the block operator
// conserves total mass.
inline double conservation_defect(const BlockOperatorMatrix& B) {
  double worst = 0.0;
  for (int g = 0; g < B.layout.groups(); ++g)
    for (int c : B.layout.active[g])
      worst = std::max(worst, std::abs(B.full.row(g * B.layout.N + c).sum()));
  return worst;
}

enum class RhoMode { normalized, verbatim };

// Diagonal rate rescaling R^l = diag(1/|rho|) on the + and - classes.
// normalized: rho = int r phi / int phi (the mesh rate itself for
// piecewise-constant fields); verbatim: rho = int r phi.
struct RateScaling {
  Vector inv_rho_plus;   // aligned with layout.class_active[+]
  Vector inv_rho_minus;  // aligned with layout.class_active[-]
  std::vector<Vector> rho;  // per group, full length N (zero off the mask)
};

inline RateScaling assemble_R(const ModelSpec& model, const BasisSet& basis,
                              const MeshIndexSets& gamma, const GroupLayout& L,
                              RhoMode mode = RhoMode::normalized) {
  RateScaling R;
  R.rho.assign(L.groups(), Vector::Zero(L.N));
  for (int cls : {0, 1}) {
    const SignClass s = static_cast<SignClass>(cls);
    std::vector<double> inv;
    for (int g : L.class_groups[cls]) {
      const int i = L.phase[g];
      for (int k : gamma.of(i, s)) {
        const double rv = mesh_rate(model, basis.stencil, i, k);
        for (int j = 0; j < basis.count[k]; ++j) {
          const int cell = basis.offset[k] + j;
          const double rho =
              mode == RhoMode::normalized ? rv : rv * basis.weights(cell);
          require(rho != 0.0, errc::zero_rho,
                  "zero rho on a signed mesh (phase " + model.phases.labels[i] +
                      ", mesh " + std::to_string(k) + ")");
          R.rho[g](cell) = rho;
          inv.push_back(1.0 / std::abs(rho));
        }
      }
    }
    Vector v(inv.size());
    for (size_t a = 0; a < inv.size(); ++a) v(a) = inv[a];
    (cls == 0 ? R.inv_rho_plus : R.inv_rho_minus) = v;
  }
  return R;
}

// The four D(s) blocks over the +/- classes:
//   D^{lm}(s) = R^l (B^{lm} - [l==m] s I + B^{l0} (s I - B^{00})^{-1} B^{0m}).
// The censoring term is omitted when S_0 is empty.
template <typename Scalar>
struct DBlocksT {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat pp, pm, mp, mm;
};

using DBlocks = DBlocksT<double>;

template <typename Scalar>
inline DBlocksT<Scalar> assemble_D_impl(const BlockOperatorMatrix& B, const RateScaling& R,
                                        Scalar s) {
  using Mat = typename DBlocksT<Scalar>::Mat;
  const int np = B.layout.class_size(SignClass::plus);
  const int nm = B.layout.class_size(SignClass::minus);
  const int n0 = B.layout.class_size(SignClass::zero);
  require(np > 0 && nm > 0, errc::invalid_parameter,
          "D(s) needs nonempty + and - classes");

  const Mat Bpp = B.sub(SignClass::plus, SignClass::plus).cast<Scalar>();
  const Mat Bpm = B.sub(SignClass::plus, SignClass::minus).cast<Scalar>();
  const Mat Bmp = B.sub(SignClass::minus, SignClass::plus).cast<Scalar>();
  const Mat Bmm = B.sub(SignClass::minus, SignClass::minus).cast<Scalar>();

  Mat cen_pp = Mat::Zero(np, np), cen_pm = Mat::Zero(np, nm);
  Mat cen_mp = Mat::Zero(nm, np), cen_mm = Mat::Zero(nm, nm);
  if (n0 > 0) {
    const Mat Bp0 = B.sub(SignClass::plus, SignClass::zero).cast<Scalar>();
    const Mat Bm0 = B.sub(SignClass::minus, SignClass::zero).cast<Scalar>();
    const Mat B0p = B.sub(SignClass::zero, SignClass::plus).cast<Scalar>();
    const Mat B0m = B.sub(SignClass::zero, SignClass::minus).cast<Scalar>();
    Mat A = -B.sub(SignClass::zero, SignClass::zero).cast<Scalar>();
    A += s * Mat::Identity(n0, n0);
    Eigen::PartialPivLU<Mat> lu(A);
    const Mat X0p = lu.solve(B0p);
    const Mat X0m = lu.solve(B0m);
    const double resid =
        ((A * X0p - B0p).cwiseAbs().maxCoeff() + (A * X0m - B0m).cwiseAbs().maxCoeff());
    require(std::isfinite(resid) && resid < 1e-6, errc::singular_censored_block,
            "(sI - B00) is numerically singular");
    cen_pp = Bp0 * X0p;
    cen_pm = Bp0 * X0m;
    cen_mp = Bm0 * X0p;
    cen_mm = Bm0 * X0m;
  }

  DBlocksT<Scalar> D;
  const auto scale = [](const Vector& inv, const Mat& M) {
    return Mat(inv.cast<Scalar>().asDiagonal() * M);
  };
  D.pp = scale(R.inv_rho_plus, Bpp - s * Mat::Identity(np, np) + cen_pp);
  D.pm = scale(R.inv_rho_plus, Bpm + cen_pm);
  D.mp = scale(R.inv_rho_minus, Bmp + cen_mp);
  D.mm = scale(R.inv_rho_minus, Bmm - s * Mat::Identity(nm, nm) + cen_mm);
  return D;
}

inline DBlocks assemble_D(const BlockOperatorMatrix& B, const RateScaling& R, double s = 0.0) {
  return assemble_D_impl<double>(B, R, s);
}

inline DBlocksT<std::complex<double>> assemble_D(const BlockOperatorMatrix& B,
                                                 const RateScaling& R,
                                                 std::complex<double> s) {
  require(s.real() >= 0.0, errc::invalid_parameter, "D(s) needs Re(s) >= 0");
  return assemble_D_impl<std::complex<double>>(B, R, s);
}

// Everything the solvers need, assembled once per (model, basis) pair.
struct Discretisation {
  ModelSpec model;
  BasisSet basis;
  MeshIndexSets gamma;
  GeneratorSet gens;
  BlockOperatorMatrix B;
  RateScaling R;
  DBlocks D0;  // D at s = 0
};

inline Discretisation discretise(const ModelSpec& model, const BasisSet& basis,
                                 RhoMode mode = RhoMode::normalized) {
  Discretisation d;
  d.model = model;
  d.basis = basis;
  d.gamma = assembly_index_sets(basis.stencil, model);
  d.gens = assemble_generator(model, basis);
  d.B = assemble_B(model, basis, d.gamma, d.gens);
  d.R = assemble_R(model, basis, d.gamma, d.B.layout, mode);
  d.D0 = assemble_D(d.B, d.R, 0.0);
  return d;
}

}  // namespace ffdg
