#include <catch2/catch_amalgamated.hpp>

#include "ffdg/linalg.hpp"
#include "ffdg/rng.hpp"

using namespace ffdg;

TEST_CASE("expm matches closed forms") {
  SECTION("zero matrix") {
    Matrix A = Matrix::Zero(3, 3);
    REQUIRE((expm(A) - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-15);
  }
  SECTION("diagonal") {
    Matrix A = Eigen::Vector2d(0.3, -1.7).asDiagonal();
    Matrix E = expm(A);
    REQUIRE(E(0, 0) == Catch::Approx(std::exp(0.3)).epsilon(1e-14));
    REQUIRE(E(1, 1) == Catch::Approx(std::exp(-1.7)).epsilon(1e-14));
    REQUIRE(std::abs(E(0, 1)) < 1e-16);
  }
  SECTION("nilpotent") {
    Matrix A(2, 2);
    A << 0, 1, 0, 0;
    Matrix E = expm(A);
    REQUIRE(E(0, 1) == Catch::Approx(1.0).epsilon(1e-14));
    REQUIRE(E(0, 0) == Catch::Approx(1.0).epsilon(1e-14));
  }
  SECTION("rotation") {
    const double th = 0.77;
    Matrix A(2, 2);
    A << 0, th, -th, 0;
    Matrix E = expm(A);
    REQUIRE(E(0, 0) == Catch::Approx(std::cos(th)).epsilon(1e-13));
    REQUIRE(E(0, 1) == Catch::Approx(std::sin(th)).epsilon(1e-13));
  }
  SECTION("large norm triggers scaling") {
    Matrix A(2, 2);
    A << 0, 100.0, 0, 0;
    Matrix E = expm(A);
    REQUIRE(E(0, 1) == Catch::Approx(100.0).epsilon(1e-12));
  }
}

TEST_CASE("sylvester solver recovers a planted solution") {
  Rng rng(1234);
  auto randmat = [&](int r, int c) {
    Matrix M(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) M(i, j) = 2.0 * rng.u01() - 1.0;
    return M;
  };
  const int m = 17, n = 5;
  Matrix A = randmat(m, m) - 6.0 * Matrix::Identity(m, m);
  Matrix B = randmat(n, n) - 6.0 * Matrix::Identity(n, n);
  Matrix X = randmat(m, n);
  Matrix C = A * X + X * B;

  SECTION("one-shot") {
    Matrix Xs = solve_sylvester(A, B, C);
    REQUIRE((Xs - X).cwiseAbs().maxCoeff() < 1e-10);
  }
  SECTION("factored form reuses Schur decompositions") {
    SylvesterFactor fac(A, B);
    Matrix X1 = fac.solve(C);
    Matrix X2 = fac.solve(2.0 * C);
    REQUIRE((X1 - X).cwiseAbs().maxCoeff() < 1e-10);
    REQUIRE((X2 - 2.0 * X).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("spectral abscissa") {
  Matrix A(3, 3);
  A << -2, 1, 0, 0, -0.5, 3, 0, 0, -7;
  REQUIRE(spectral_abscissa(A) == Catch::Approx(-0.5).margin(1e-12));
}
