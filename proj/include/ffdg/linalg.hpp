#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "ffdg/error.hpp"

extern "C" {
// LAPACK: real quasi-triangular Sylvester equation op(A)X + isgn*X*op(B) = scale*C.
void dtrsyl_(const char* trana, const char* tranb, const int* isgn, const int* m,
             const int* n, const double* a, const int* lda, const double* b,
             const int* ldb, double* c, const int* ldc, double* scale, int* info);
}

namespace ffdg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Row = Eigen::RowVectorXd;

// Largest real part over the spectrum.
inline double spectral_abscissa(const Matrix& A) {
  Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
  return es.eigenvalues().real().maxCoeff();
}

// Matrix exponential by scaling-and-squaring with a degree-13 Pade approximant
// (Higham 2005). Dense, double precision.
inline Matrix expm(const Matrix& A) {
  const int n = static_cast<int>(A.rows());
  const Matrix I = Matrix::Identity(n, n);
  const double nrm = A.cwiseAbs().rowwise().sum().maxCoeff();  // inf-norm

  static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                             1187353796428800.0,  129060195264000.0,   10559470521600.0,
                             670442572800.0,      33522128640.0,       1323241920.0,
                             40840800.0,          960960.0,            16380.0,
                             182.0,               1.0};
  const double theta13 = 5.371920351148152;

  int squarings = 0;
  Matrix As = A;
  if (nrm > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(nrm / theta13)));
    As = A / std::ldexp(1.0, squarings);
  }

  const Matrix A2 = As * As;
  const Matrix A4 = A2 * A2;
  const Matrix A6 = A2 * A4;
  const Matrix U = As * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 +
                         b[5] * A4 + b[3] * A2 + b[1] * I);
  const Matrix V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 +
                   b[2] * A2 + b[0] * I;

  Matrix F = (V - U).partialPivLu().solve(V + U);
  for (int s = 0; s < squarings; ++s) F = F * F;
  return F;
}

// Solves A X + X B = C (Bartels-Stewart: real Schur forms + LAPACK dtrsyl).
inline Matrix solve_sylvester(const Matrix& A, const Matrix& B, const Matrix& C) {
  require(A.rows() == A.cols() && B.rows() == B.cols(), errc::invalid_parameter,
          "sylvester: A and B must be square");
  require(C.rows() == A.rows() && C.cols() == B.cols(), errc::invalid_parameter,
          "sylvester: C dimension mismatch");

  Eigen::RealSchur<Matrix> sa(A);
  Eigen::RealSchur<Matrix> sb(B);
  require(sa.info() == Eigen::Success && sb.info() == Eigen::Success, errc::no_convergence,
          "sylvester: Schur decomposition failed");

  const Matrix& Ta = sa.matrixT();
  const Matrix& Tb = sb.matrixT();
  const Matrix& Ua = sa.matrixU();
  const Matrix& Ub = sb.matrixU();

  Matrix Y = Ua.transpose() * C * Ub;

  const char trans = 'N';
  const int isgn = 1;
  const int m = static_cast<int>(Y.rows());
  const int n = static_cast<int>(Y.cols());
  const int lda = static_cast<int>(Ta.outerStride());
  const int ldb = static_cast<int>(Tb.outerStride());
  const int ldc = static_cast<int>(Y.outerStride());
  double scale = 1.0;
  int info = 0;
  dtrsyl_(&trans, &trans, &isgn, &m, &n, Ta.data(), &lda, Tb.data(), &ldb, Y.data(), &ldc,
          &scale, &info);
  require(info >= 0, errc::invalid_parameter, "sylvester: bad argument to dtrsyl");
  require(scale != 0.0, errc::no_convergence, "sylvester: dtrsyl returned zero scale");

  return Ua * (Y / scale) * Ub.transpose();
}

// Reusable factored form for repeated solves of A X + X B = C with fixed A, B.
class SylvesterFactor {
 public:
  SylvesterFactor(const Matrix& A, const Matrix& B) : sa_(A), sb_(B) {
    require(sa_.info() == Eigen::Success && sb_.info() == Eigen::Success,
            errc::no_convergence, "sylvester: Schur decomposition failed");
  }

  Matrix solve(const Matrix& C) const {
    Matrix Y = sa_.matrixU().transpose() * C * sb_.matrixU();
    const char trans = 'N';
    const int isgn = 1;
    const int m = static_cast<int>(Y.rows());
    const int n = static_cast<int>(Y.cols());
    const Matrix& Ta = sa_.matrixT();
    const Matrix& Tb = sb_.matrixT();
    const int lda = static_cast<int>(Ta.outerStride());
    const int ldb = static_cast<int>(Tb.outerStride());
    const int ldc = static_cast<int>(Y.outerStride());
    double scale = 1.0;
    int info = 0;
    dtrsyl_(&trans, &trans, &isgn, &m, &n, Ta.data(), &lda, Tb.data(), &ldb, Y.data(),
            &ldc, &scale, &info);
    require(info >= 0, errc::invalid_parameter, "sylvester: bad argument to dtrsyl");
    require(scale != 0.0, errc::no_convergence, "sylvester: dtrsyl returned zero scale");
    return sa_.matrixU() * (Y / scale) * sb_.matrixU().transpose();
  }

 private:
  Eigen::RealSchur<Matrix> sa_;
  Eigen::RealSchur<Matrix> sb_;
};

}  // namespace ffdg
