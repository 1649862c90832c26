#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ffdg/error.hpp"
#include "ffdg/linalg.hpp"
#include "ffdg/model.hpp"
#include "ffdg/stencil.hpp"

namespace ffdg {

// Block-diagonal mass matrix, [M^k]_{mn} = int phi_m phi_n over mesh k.
// Exact: constant mesh -> [w]; linear pair -> w/6 * [[2,1],[1,2]].
inline Matrix assemble_mass(const BasisSet& b) {
  Matrix M = Matrix::Zero(b.total, b.total);
  for (int k = 0; k < b.stencil.mesh_count(); ++k) {
    const double w = b.stencil.width(k);
    const int o = b.offset[k];
    if (b.count[k] == 1) {
      M(o, o) = w;
    } else {
      M(o, o) = w / 3.0;
      M(o, o + 1) = w / 6.0;
      M(o + 1, o) = w / 6.0;
      M(o + 1, o + 1) = w / 3.0;
    }
  }
  return M;
}

// Block-diagonal stiffness matrix, [G^k]_{mn} = int phi_m (phi_n)'.
// Constant meshes give zero blocks; linear pairs give [[-1/2,1/2],[-1/2,1/2]]
// independent of the mesh width.
inline Matrix assemble_stiffness(const BasisSet& b) {
  Matrix G = Matrix::Zero(b.total, b.total);
  for (int k = 0; k < b.stencil.mesh_count(); ++k) {
    if (b.count[k] == 1) continue;
    const int o = b.offset[k];
    G(o, o) = -0.5;
    G(o, o + 1) = 0.5;
    G(o + 1, o) = -0.5;
    G(o + 1, o + 1) = 0.5;
  }
  return G;
}

// eta_{l,k}: ratio of the receiving mesh's basis integrals to the sending
// mesh's, for adjacent meshes. Well defined only when the integrals within
// each mesh agree.
inline double compute_eta(const BasisSet& b, int from_mesh, int to_mesh) {
  require(std::abs(from_mesh - to_mesh) == 1, errc::invalid_parameter,
          "eta is defined for adjacent meshes only");
  for (int k : {from_mesh, to_mesh}) {
    const double w0 = b.weights(b.offset[k]);
    for (int j = 1; j < b.count[k]; ++j)
      require(std::abs(b.weights(b.offset[k] + j) - w0) <= 1e-12 * std::abs(w0),
              errc::ill_defined_eta, "per-mesh basis integrals differ");
  }
  return b.mesh_element_weight(to_mesh) / b.mesh_element_weight(from_mesh);
}

enum class Drift { up, down };

// First-order upwind flux matrix as displayed: for upward drift, feed blocks
// eta_{k-1,k} [phi^{k-1}(x_k^-)]^T phi^k(x_k) on the superdiagonal and sink
// blocks -[phi^k(x_{k+1}^-)]^T phi^k(x_{k+1}) on the diagonal; mirrored for
// downward drift. Includes the outflow sink at the domain boundary.
inline Matrix assemble_flux(const BasisSet& b, Drift d) {
  const int K1 = b.stencil.mesh_count();
  Matrix F = Matrix::Zero(b.total, b.total);
  auto block = [&](int kr, int kc) {
    return F.block(b.offset[kr], b.offset[kc], b.count[kr], b.count[kc]);
  };
  if (d == Drift::up) {
    for (int k = 0; k < K1; ++k) {
      block(k, k) -= b.at_right(k).transpose() * b.at_right(k);
      if (k + 1 < K1)
        block(k, k + 1) += compute_eta(b, k, k + 1) * b.at_right(k).transpose() * b.at_left(k + 1);
    }
  } else {
    for (int k = 0; k < K1; ++k) {
      block(k, k) += b.at_left(k).transpose() * b.at_left(k);
      if (k - 1 >= 0)
        block(k, k - 1) -= compute_eta(b, k, k - 1) * b.at_left(k).transpose() * b.at_right(k - 1);
    }
  }
  return F;
}

// DG generator Q = c (G + F) M^{-1} for one phase. The outflow sink at the
// domain boundary in the drift direction is removed so the boundary cell
// retains its mass (regulated boundary at 0, truncation atom at I); this is
// what makes every row sum vanish. Q acts on element-mass vectors q from the
// right: dq/dt = q Q.
inline Matrix assemble_generator_matrix(const BasisSet& b, double c) {
  if (c == 0.0) return Matrix::Zero(b.total, b.total);
  const int K1 = b.stencil.mesh_count();
  Matrix F = assemble_flux(b, c > 0 ? Drift::up : Drift::down);
  if (c > 0) {
    const int k = K1 - 1;
    F.block(b.offset[k], b.offset[k], b.count[k], b.count[k]) +=
        b.at_right(k).transpose() * b.at_right(k);
  } else {
    F.block(b.offset[0], b.offset[0], b.count[0], b.count[0]) -=
        b.at_left(0).transpose() * b.at_left(0);
  }
  Matrix M = assemble_mass(b);
  return c * (assemble_stiffness(b) + F) * M.inverse();
}

struct GeneratorSet {
  std::vector<Matrix> Q;  // per phase
};

// Per-phase DG generators with the conservation and stability checks.
inline GeneratorSet assemble_generator(const ModelSpec& model, const BasisSet& b,
                                       double rowsum_tol = 1e-10,
                                       double spectrum_tol = 1e-8) {
  GeneratorSet g;
  for (int i = 0; i < model.phases.size(); ++i) {
    Matrix Q = assemble_generator_matrix(b, model.c.c(i));
    const double rs = Q.rowwise().sum().cwiseAbs().maxCoeff();
    require(rs <= rowsum_tol, errc::conservation_violation,
            "phase " + model.phases.labels[i] + ": |row sum| = " + std::to_string(rs));
    if (!Q.isZero(0.0)) {
      const double sa = spectral_abscissa(Q);
      require(sa <= spectrum_tol, errc::spectrum_violation,
              "phase " + model.phases.labels[i] +
                  ": spectral abscissa = " + std::to_string(sa));
    }
    g.Q.push_back(std::move(Q));
  }
  return g;
}

// Element masses propagated through the semigroup: q e^{Qt}.
inline Eigen::RowVectorXd propagate(const Matrix& Q, const Eigen::RowVectorXd& q, double t) {
  return q * expm(Q * t);
}

}  // namespace ffdg
