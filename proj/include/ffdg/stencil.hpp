#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "ffdg/error.hpp"
#include "ffdg/model.hpp"

namespace ffdg {

// Nodal points and meshes of the DG discretisation on [0, I].
// Mesh k (0-based) is [nodes[k], nodes[k+1]]; the first and last meshes are
// boundary meshes carrying the point masses at 0 and I.
struct Stencil {
  std::vector<double> nodes;

  int mesh_count() const { return static_cast<int>(nodes.size()) - 1; }
  double width(int k) const { return nodes[k + 1] - nodes[k]; }
  double left() const { return nodes.front(); }
  double right() const { return nodes.back(); }
  bool is_boundary_mesh(int k) const { return k == 0 || k == mesh_count() - 1; }

  // Mesh containing x; at interior nodes returns the mesh on the right
  // (right-limit convention), except x = right() which maps to the last mesh.
  int find_mesh(double x) const {
    require(x >= left() && x <= right(), errc::out_of_domain,
            "x = " + std::to_string(x) + " outside [0, " + std::to_string(right()) + "]");
    if (x >= nodes[nodes.size() - 2]) return mesh_count() - 1;
    int k = static_cast<int>(std::upper_bound(nodes.begin(), nodes.end(), x) -
                             nodes.begin()) - 1;
    return std::min(std::max(k, 0), mesh_count() - 1);
  }

  // The omega stencil family: nodes (0, dh, h, 2h, ..., (K-4)h, (K-3)h - dh, (K-3)h).
  // K-1 meshes with widths dh, h-dh, h (x K-5), h-dh, dh.
  static Stencil omega(int K, double h, double dh) {
    require(K >= 6, errc::bad_stencil_params, "omega stencil needs K >= 6 nodes");
    require(h > 0.0 && dh > 0.0 && dh < h, errc::bad_stencil_params,
            "omega stencil needs 0 < dh < h");
    Stencil st;
    st.nodes.reserve(K);
    st.nodes.push_back(0.0);
    st.nodes.push_back(dh);
    for (int j = 1; j <= K - 4; ++j) st.nodes.push_back(j * h);
    st.nodes.push_back((K - 3) * h - dh);
    st.nodes.push_back((K - 3) * h);
    require(std::is_sorted(st.nodes.begin(), st.nodes.end()) &&
                std::adjacent_find(st.nodes.begin(), st.nodes.end()) == st.nodes.end(),
            errc::bad_stencil_params, "omega stencil parameters produce degenerate nodes");
    return st;
  }

  static Stencil from_nodes(std::vector<double> nodes) {
    require(nodes.size() >= 2, errc::bad_stencil_params, "need at least two nodes");
    require(std::is_sorted(nodes.begin(), nodes.end()) &&
                std::adjacent_find(nodes.begin(), nodes.end()) == nodes.end(),
            errc::bad_stencil_params, "nodes must be strictly increasing");
    require(nodes.front() == 0.0, errc::bad_stencil_params, "first node must be 0");
    Stencil st;
    st.nodes = std::move(nodes);
    return st;
  }
};

// Near-uniform stencil of spacing h on [0, I] with dh-wide boundary meshes and
// every model breakpoint inserted as a node. Used by the convergence studies,
// where h need not divide either I or the breakpoints.
inline Stencil make_study_stencil(double h, double dh, double I,
                                  const std::vector<double>& breakpoints) {
  require(h > 0 && dh > 0 && dh < h && I > 2 * dh, errc::bad_stencil_params,
          "study stencil needs 0 < dh < h and I > 2 dh");
  std::set<double> pts{0.0, dh, I - dh, I};
  for (double x = h; x < I - 1e-9; x += h) pts.insert(x);
  for (double b : breakpoints)
    if (b > 0.0 && b < I) pts.insert(b);
  std::vector<double> nodes(pts.begin(), pts.end());
  // drop interior nodes that collide with the boundary-mesh nodes
  std::vector<double> keep{nodes.front()};
  for (size_t i = 1; i < nodes.size(); ++i)
    if (nodes[i] - keep.back() > 0.49 * dh) keep.push_back(nodes[i]);
  return Stencil::from_nodes(std::move(keep));
}

// Per-mesh polynomial bases. Boundary meshes always carry a single constant
// basis function of value 1; interior meshes carry degree-0 or the
// partition-of-unity linear pair. Coefficient vectors indexed by these
// elements come in two flavours used throughout:
//   density coefficients alpha:  u(x) = sum alpha_n phi_n(x), mass = alpha . w
//   element masses q = alpha .* w, the coordinates in which the assembled
//   operators act and conserve (their displayed matrix convention).
struct BasisSet {
  Stencil stencil;
  int degree = 0;                 // interior mesh degree (0 or 1)
  std::vector<int> offset;        // first element index per mesh
  std::vector<int> count;         // elements per mesh
  int total = 0;                  // N
  Eigen::VectorXd weights;        // w_n = integral of phi_n over its mesh

  int mesh_of_element(int n) const {
    int k = static_cast<int>(std::upper_bound(offset.begin(), offset.end(), n) -
                             offset.begin()) - 1;
    return k;
  }

  // All elements of one mesh share the same integral (needed for eta).
  double mesh_element_weight(int k) const { return weights(offset[k]); }

  double value(int k, int n, double x) const {
    const double lo = stencil.nodes[k], hi = stencil.nodes[k + 1];
    if (x < lo || x > hi) return 0.0;
    if (count[k] == 1) return 1.0;
    const double t = (x - lo) / (hi - lo);
    return n == 0 ? 1.0 - t : t;
  }

  Eigen::RowVectorXd at_left(int k) const {
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(count[k]);
    v(0) = 1.0;
    return v;
  }
  Eigen::RowVectorXd at_right(int k) const {
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(count[k]);
    v(count[k] - 1) = 1.0;
    return v;
  }
};

inline BasisSet make_basis(const Stencil& st, int degree) {
  require(degree == 0 || degree == 1, errc::unsupported_degree,
          "only degree 0 and 1 bases are supported");
  BasisSet b;
  b.stencil = st;
  b.degree = degree;
  const int K1 = st.mesh_count();
  b.offset.resize(K1);
  b.count.resize(K1);
  int n = 0;
  for (int k = 0; k < K1; ++k) {
    b.offset[k] = n;
    b.count[k] = st.is_boundary_mesh(k) ? 1 : degree + 1;
    n += b.count[k];
  }
  b.total = n;
  b.weights.resize(n);
  for (int k = 0; k < K1; ++k) {
    const double w = st.width(k);
    for (int j = 0; j < b.count[k]; ++j) b.weights(b.offset[k] + j) = w / b.count[k];
  }
  return b;
}

// ---------------------------------------------------------------------------
// Coefficient-vector helpers (per phase, length N).
// ---------------------------------------------------------------------------

using Coefficients = Eigen::RowVectorXd;  // density coefficients

inline double mass(const BasisSet& b, const Coefficients& alpha) {
  return alpha * b.weights;
}

inline Eigen::RowVectorXd to_masses(const BasisSet& b, const Coefficients& alpha) {
  return alpha.cwiseProduct(b.weights.transpose());
}

inline Coefficients to_densities(const BasisSet& b, const Eigen::RowVectorXd& q) {
  return q.cwiseQuotient(b.weights.transpose());
}

// u(x) = sum alpha_n phi_n(x); right-limit convention at interior nodes.
inline double evaluate(const BasisSet& b, const Coefficients& alpha, double x) {
  const int k = b.stencil.find_mesh(x);
  double v = 0.0;
  for (int j = 0; j < b.count[k]; ++j) v += alpha(b.offset[k] + j) * b.value(k, j, x);
  return v;
}

// Element masses representing a unit point mass at x0: the covering mesh's
// elements split by their values at x0 (nonnegative, sums to one).
inline Eigen::RowVectorXd point_mass_elements(const BasisSet& b, double x0) {
  Eigen::RowVectorXd q = Eigen::RowVectorXd::Zero(b.total);
  const int k = b.stencil.find_mesh(x0);
  for (int j = 0; j < b.count[k]; ++j) q(b.offset[k] + j) = b.value(k, j, x0);
  const double s = q.sum();
  if (s > 0) q /= s;
  return q;
}

// ---------------------------------------------------------------------------
// Mesh index sets gamma_i^l: which meshes lie in F_i^l.
// ---------------------------------------------------------------------------

struct MeshIndexSets {
  std::vector<std::array<std::vector<int>, 3>> sets;  // [phase][class], 0-based meshes

  const std::vector<int>& of(int phase, SignClass s) const {
    return sets[phase][static_cast<int>(s)];
  }
};

// Classifies each mesh into exactly one sign class per phase. Every sign
// change of the partition must coincide with a node; a change strictly inside
// a mesh is a MisalignedBreakpoint.
inline MeshIndexSets mesh_index_sets(const Stencil& st, const SignPartition& part,
                                     double tol = 1e-9) {
  MeshIndexSets out;
  const int nphase = static_cast<int>(part.regions.size());
  out.sets.resize(nphase);
  for (int i = 0; i < nphase; ++i) {
    for (int k = 0; k < st.mesh_count(); ++k) {
      const double lo = st.nodes[k], hi = st.nodes[k + 1];
      int found = -1;
      for (int s = 0; s < 3; ++s) {
        for (const Interval& iv : part.regions[i][s]) {
          if (iv.lo <= lo + tol && hi <= iv.hi + tol) {
            found = s;
            break;
          }
          const bool overlaps = iv.lo < hi - tol && lo < iv.hi - tol;
          if (overlaps && !(iv.lo <= lo + tol && hi <= iv.hi + tol))
            fail(errc::misaligned_breakpoint,
                 "sign change inside mesh [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "] of phase " + std::to_string(i) +
                     "; breakpoints must be nodes");
        }
        if (found >= 0) break;
      }
      require(found >= 0, errc::misaligned_breakpoint,
              "mesh not covered by the sign partition");
      out.sets[i][found].push_back(k);
    }
  }
  return out;
}

// Index sets used for operator assembly: as mesh_index_sets, except the left
// boundary mesh stands for the X = 0 atom and is classified by the boundary
// rate row r_i(0). For the bandwidth model the signs agree, so only the rho
// values differ, but the atom's own rate is what drives the second fluid
// while X sits at zero.
inline MeshIndexSets assembly_index_sets(const Stencil& st, const ModelSpec& model,
                                         double tol = 1e-9) {
  MeshIndexSets out = mesh_index_sets(st, partition_rates(model), tol);
  for (int i = 0; i < model.phases.size(); ++i) {
    const double r0 = model.r.rate_at_zero(i);
    const SignClass s0 =
        r0 > 0.0 ? SignClass::plus : r0 < 0.0 ? SignClass::minus : SignClass::zero;
    for (int s = 0; s < 3; ++s) {
      auto& v = out.sets[i][s];
      v.erase(std::remove(v.begin(), v.end(), 0), v.end());
    }
    auto& v = out.sets[i][static_cast<int>(s0)];
    v.insert(v.begin(), 0);
  }
  return out;
}

// The per-mesh second-fluid rate used in assembly; mesh 0 carries the X = 0
// boundary row, other meshes evaluate the field at their midpoint.
inline double mesh_rate(const ModelSpec& model, const Stencil& st, int phase, int k) {
  if (k == 0) return model.r.rate_at_zero(phase);
  return model.r.rate(phase, 0.5 * (st.nodes[k] + st.nodes[k + 1]));
}

}  // namespace ffdg
