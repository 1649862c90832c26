#include <catch2/catch_amalgamated.hpp>

#include "ffdg/model.hpp"

using namespace ffdg;

namespace {

ModelSpec two_phase_toy() {
  // simple up/down model used across tests: r = +1 for phase a, -1 for phase b
  ModelSpec m;
  m.phases.labels = {"a", "b"};
  m.gen.T.resize(2, 2);
  m.gen.T << -2, 2, 1, -1;
  m.c.c = Eigen::Vector2d(1.0, -1.0);
  m.r.breakpoints = {};
  Eigen::VectorXd row(2);
  row << 1.0, -1.0;
  m.r.piece_rates = {row};
  m.truncation = 4.0;
  return m;
}

}  // namespace

TEST_CASE("bandwidth model matches the published parameter set") {
  ModelSpec m = build_bandwidth_model({});
  REQUIRE(m.phases.labels == std::vector<std::string>{"11", "10", "01", "00"});

  // c = (lambda1 - theta1, lambda1 - theta1, -theta1, -theta1)
  REQUIRE(m.c.c(0) == Catch::Approx(10.88).margin(1e-14));
  REQUIRE(m.c.c(1) == Catch::Approx(10.88).margin(1e-14));
  REQUIRE(m.c.c(2) == Catch::Approx(-1.6).margin(1e-14));
  REQUIRE(m.c.c(3) == Catch::Approx(-1.6).margin(1e-14));

  // phase 11 on (0, x*): lambda2 - theta2
  REQUIRE(m.r.rate(0, 0.5) == Catch::Approx(15.25).margin(1e-14));
  // phase 10 above x*: idle
  REQUIRE(m.r.rate(1, 2.0) == 0.0);
  // boundary row at X = 0
  REQUIRE(m.r.rate_at_zero(3) == Catch::Approx(-2.6).margin(1e-14));
  REQUIRE(m.r.rate_at_zero(0) == Catch::Approx(13.65).margin(1e-14));

  ValidationReport rep = validate_model(m);
  REQUIRE(rep.ok());
  REQUIRE(m.gen.T.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("bandwidth parameter guards") {
  BandwidthParams p;
  p.theta1 = 1.6;
  p.theta2 = 0.9;  // theta1 + theta2 != kappa
  REQUIRE_THROWS_MATCHES(build_bandwidth_model(p), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == errc::invalid_parameter;
                         }));
}

TEST_CASE("validation catches broken generators") {
  ModelSpec m = two_phase_toy();

  SECTION("non-conservative row") {
    m.gen.T(0, 1) = 2.1;  // row sums to 0.1
    ValidationReport rep = validate_model(m);
    REQUIRE_FALSE(rep.ok());
    bool found = false;
    for (const auto& c : rep.checks)
      if (c.code == errc::non_conservative_generator && !c.pass) found = true;
    REQUIRE(found);
    REQUIRE_THROWS_AS(rep.raise_if_failed(), Error);
  }
  SECTION("negative off-diagonal") {
    m.gen.T(0, 1) = -2.0;
    ValidationReport rep = validate_model(m);
    bool found = false;
    for (const auto& c : rep.checks)
      if (c.code == errc::negative_off_diagonal && !c.pass) found = true;
    REQUIRE(found);
  }
  SECTION("all rates positive leaves no return to zero") {
    m.r.piece_rates[0] << 1.0, 2.0;
    ValidationReport rep = validate_model(m);
    bool found = false;
    for (const auto& c : rep.checks)
      if (c.code == errc::empty_negative_class && !c.pass) found = true;
    REQUIRE(found);
  }
  SECTION("breakpoint beyond truncation") {
    m.r.breakpoints = {5.0};
    Eigen::VectorXd row(2);
    row << 1.0, -1.0;
    m.r.piece_rates = {row, row};
    ValidationReport rep = validate_model(m);
    bool found = false;
    for (const auto& c : rep.checks)
      if (c.code == errc::breakpoint_beyond_truncation && !c.pass) found = true;
    REQUIRE(found);
  }
  SECTION("zero first-fluid rate rejected") {
    m.c.c(0) = 0.0;
    ValidationReport rep = validate_model(m);
    bool found = false;
    for (const auto& c : rep.checks)
      if (c.code == errc::zero_first_fluid_rate && !c.pass) found = true;
    REQUIRE(found);
  }
}

TEST_CASE("sign partition of the bandwidth model") {
  ModelSpec m = build_bandwidth_model({});
  SignPartition part = partition_rates(m);

  // phase "10" (index 1): F^- = [0, x*), F^0 = [x*, I]
  const auto& fm = part.region(1, SignClass::minus);
  REQUIRE(fm.size() == 1);
  REQUIRE(fm[0].lo == 0.0);
  REQUIRE(fm[0].hi == Catch::Approx(1.6));
  const auto& f0 = part.region(1, SignClass::zero);
  REQUIRE(f0.size() == 1);
  REQUIRE(f0[0].lo == Catch::Approx(1.6));
  REQUIRE(f0[0].hi == Catch::Approx(16.0));
  REQUIRE(part.region(1, SignClass::plus).empty());

  // phase "11" (index 0): F^+ covers the whole domain (both pieces positive)
  const auto& fp = part.region(0, SignClass::plus);
  REQUIRE(fp.size() == 1);
  REQUIRE(fp[0].lo == 0.0);
  REQUIRE(fp[0].hi == Catch::Approx(16.0));

  REQUIRE(part.phases_of(SignClass::plus) == std::vector<int>{0, 2});
  REQUIRE(part.phases_of(SignClass::minus) == std::vector<int>{1, 3});
  REQUIRE(part.phases_of(SignClass::zero) == std::vector<int>{1, 3});
}

TEST_CASE("identically zero rate gives a pure zero region") {
  ModelSpec m = two_phase_toy();
  m.r.piece_rates[0] << 0.0, -1.0;
  SignPartition part = partition_rates(m);
  const auto& f0 = part.region(0, SignClass::zero);
  REQUIRE(f0.size() == 1);
  REQUIRE(f0[0].lo == 0.0);
  REQUIRE(f0[0].hi == Catch::Approx(m.truncation));
  REQUIRE(part.region(0, SignClass::plus).empty());
  REQUIRE(part.region(0, SignClass::minus).empty());
}

TEST_CASE("every point belongs to exactly one region") {
  ModelSpec m = build_bandwidth_model({});
  SignPartition part = partition_rates(m);
  for (int i = 0; i < m.phases.size(); ++i) {
    for (double x : {0.0, 0.3, 1.6, 2.0, 15.99}) {
      int covering = 0;
      for (int s = 0; s < 3; ++s)
        for (const auto& iv : part.regions[i][s])
          if (iv.lo <= x && x < iv.hi) ++covering;
      REQUIRE(covering == 1);
    }
  }
}

TEST_CASE("model JSON round trip") {
  ModelSpec m = build_bandwidth_model({});
  nlohmann::json j = model_to_json(m);
  ModelSpec back = model_from_json(j);
  REQUIRE(back.phases.labels == m.phases.labels);
  REQUIRE((back.gen.T - m.gen.T).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((back.c.c - m.c.c).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(back.truncation == m.truncation);
  REQUIRE(back.r.rate_at_zero(1) == m.r.rate_at_zero(1));
  REQUIRE(back.r.rate(0, 5.0) == m.r.rate(0, 5.0));
}
