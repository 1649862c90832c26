#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffdg/error.hpp"

namespace ffdg {

// Sign classes of the second-fluid rate field. Order is fixed: +, -, 0.
enum class SignClass : int { plus = 0, minus = 1, zero = 2 };

inline char sign_class_char(SignClass s) {
  switch (s) {
    case SignClass::plus: return '+';
    case SignClass::minus: return '-';
    case SignClass::zero: return '0';
  }
  return '?';
}

struct PhaseSpace {
  std::vector<std::string> labels;

  int size() const { return static_cast<int>(labels.size()); }
  int index(const std::string& label) const {
    for (int i = 0; i < size(); ++i)
      if (labels[i] == label) return i;
    fail(errc::invalid_parameter, "unknown phase label '" + label + "'");
  }
};

struct Generator {
  Eigen::MatrixXd T;  // square, row sums 0, off-diagonals >= 0
};

struct FirstFluidRates {
  Eigen::VectorXd c;  // per-phase drift of the first fluid; boundary rule max{0,c} at X=0
};

// Piecewise-constant second-fluid rate field on [0, inf).
// Piece p covers [edge(p), edge(p+1)) with edge(0) = 0 and the last piece
// extending to infinity; a breakpoint belongs to the piece on its right.
// `at_zero` is the rate row that applies while X sits at the regulated
// boundary (the X = 0 atom); it defaults to the first piece.
struct RateField {
  std::vector<double> breakpoints;             // strictly increasing, all > 0
  std::vector<Eigen::VectorXd> piece_rates;    // breakpoints.size() + 1 rows
  Eigen::VectorXd at_zero;                     // may be empty

  int piece_count() const { return static_cast<int>(piece_rates.size()); }

  int piece_index(double x) const {
    int p = 0;
    while (p < static_cast<int>(breakpoints.size()) && x >= breakpoints[p]) ++p;
    return p;
  }

  double rate(int phase, double x) const { return piece_rates[piece_index(x)](phase); }

  double rate_at_zero(int phase) const {
    return at_zero.size() > 0 ? at_zero(phase) : piece_rates.front()(phase);
  }
};

struct ModelSpec {
  PhaseSpace phases;
  Generator gen;
  FirstFluidRates c;
  RateField r;
  double truncation = 0.0;  // upper bound of the approximation domain for X
};

struct Interval {
  double lo, hi;
};

// Per-phase partition of the (truncated) first-fluid domain by the sign of
// r_i, together with the derived phase classes S_+, S_-, S_0.
struct SignPartition {
  std::vector<std::array<std::vector<Interval>, 3>> regions;  // [phase][class]
  std::array<std::vector<int>, 3> phase_classes;              // S_+, S_-, S_0

  const std::vector<Interval>& region(int phase, SignClass s) const {
    return regions[phase][static_cast<int>(s)];
  }
  const std::vector<int>& phases_of(SignClass s) const {
    return phase_classes[static_cast<int>(s)];
  }
};

struct ValidationCheck {
  errc code;
  bool pass;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool ok() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  void add(errc code, bool pass, const std::string& detail) {
    checks.push_back({code, pass, detail});
  }
  // Throws the first failed check.
  void raise_if_failed() const {
    for (const auto& c : checks)
      if (!c.pass) fail(c.code, c.detail);
  }
};

namespace detail {

inline bool strongly_connected(const Eigen::MatrixXd& T) {
  const int n = static_cast<int>(T.rows());
  auto reach = [&](bool transpose) {
    std::vector<bool> seen(n, false);
    std::vector<int> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        double w = transpose ? T(v, u) : T(u, v);
        if (u != v && w > 0.0 && !seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  };
  return reach(false) && reach(true);
}

}  // namespace detail

inline SignPartition partition_rates(const ModelSpec& spec);

// Checks every model invariant and reports pass/fail per check.
// Downstream assembly requires ok().
inline ValidationReport validate_model(const ModelSpec& spec) {
  ValidationReport rep;
  const int n = spec.phases.size();

  rep.add(errc::empty_phase_space, n > 0, "phase space must be nonempty");
  if (n == 0) return rep;

  {
    auto labels = spec.phases.labels;
    std::sort(labels.begin(), labels.end());
    bool unique = std::adjacent_find(labels.begin(), labels.end()) == labels.end();
    rep.add(errc::duplicate_phase_label, unique, "phase labels must be unique");
  }

  const Eigen::MatrixXd& T = spec.gen.T;
  if (T.rows() != n || T.cols() != n) {
    rep.add(errc::invalid_parameter, false, "generator dimension does not match phase count");
    return rep;
  }

  bool offdiag_ok = true;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && T(i, j) < 0.0) offdiag_ok = false;
  rep.add(errc::negative_off_diagonal, offdiag_ok, "generator off-diagonals must be >= 0");

  const double rowsum = T.rowwise().sum().cwiseAbs().maxCoeff();
  rep.add(errc::non_conservative_generator, rowsum <= 1e-12,
          "generator row sums must vanish (max |sum| = " + std::to_string(rowsum) + ")");

  rep.add(errc::not_irreducible, detail::strongly_connected(T),
          "generator must be irreducible");

  bool c_finite = spec.c.c.size() == n && spec.c.c.allFinite();
  rep.add(errc::non_finite_rate, c_finite, "first-fluid rates must be finite");
  if (c_finite) {
    rep.add(errc::zero_first_fluid_rate, (spec.c.c.array() != 0.0).all(),
            "first-fluid rates must be nonzero");
    rep.add(errc::no_negative_first_fluid_rate, (spec.c.c.array() < 0.0).any(),
            "at least one first-fluid rate must be negative");
  }

  bool pieces_ok = spec.r.piece_count() == static_cast<int>(spec.r.breakpoints.size()) + 1 &&
                   spec.r.piece_count() > 0;
  bool rates_finite = pieces_ok;
  for (const auto& row : spec.r.piece_rates)
    rates_finite = rates_finite && row.size() == n && row.allFinite();
  if (spec.r.at_zero.size() > 0)
    rates_finite = rates_finite && spec.r.at_zero.size() == n && spec.r.at_zero.allFinite();
  rep.add(errc::non_finite_rate, rates_finite, "rate field rows must be finite, one per piece");

  bool bps_sorted = std::is_sorted(spec.r.breakpoints.begin(), spec.r.breakpoints.end()) &&
                    (spec.r.breakpoints.empty() || spec.r.breakpoints.front() > 0.0);
  rep.add(errc::invalid_parameter, bps_sorted, "rate-field breakpoints must be sorted and > 0");

  rep.add(errc::bad_truncation, spec.truncation > 0.0, "truncation bound must be positive");
  bool bp_inside = spec.r.breakpoints.empty() ||
                   spec.r.breakpoints.back() < spec.truncation;
  rep.add(errc::breakpoint_beyond_truncation, bp_inside,
          "every rate-field breakpoint must lie below the truncation bound");

  if (rates_finite && pieces_ok && rep.ok()) {
    SignPartition part = partition_rates(spec);
    rep.add(errc::empty_negative_class, !part.phases_of(SignClass::minus).empty(),
            "some phase must have a negative-rate region (S_- nonempty)");
  }
  return rep;
}

// Partitions [0, truncation] per phase into F_i^+, F_i^-, F_i^0 from the
// piecewise-constant rate field. Adjacent pieces of the same sign merge.
inline SignPartition partition_rates(const ModelSpec& spec) {
  const int n = spec.phases.size();
  const double I = spec.truncation;
  SignPartition part;
  part.regions.resize(n);

  for (int i = 0; i < n; ++i) {
    std::vector<double> edges{0.0};
    for (double b : spec.r.breakpoints)
      if (b < I) edges.push_back(b);
    edges.push_back(I);

    for (size_t p = 0; p + 1 < edges.size(); ++p) {
      const double lo = edges[p], hi = edges[p + 1];
      const double rv = spec.r.rate(i, lo);
      SignClass s = rv > 0.0 ? SignClass::plus : rv < 0.0 ? SignClass::minus : SignClass::zero;
      auto& reg = part.regions[i][static_cast<int>(s)];
      if (!reg.empty() && reg.back().hi == lo)
        reg.back().hi = hi;
      else
        reg.push_back({lo, hi});
    }
  }

  for (int s = 0; s < 3; ++s)
    for (int i = 0; i < n; ++i)
      if (!part.regions[i][s].empty()) part.phase_classes[s].push_back(i);
  return part;
}

// ---------------------------------------------------------------------------
// The on-off bandwidth-sharing model: two buffers fed by independent on-off
// sources, sharing output capacity kappa with priority to buffer 1 via the
// threshold x*. Phases are ordered (11, 10, 01, 00); the first digit is the
// state of input 1, the second of input 2.
// ---------------------------------------------------------------------------

struct BandwidthParams {
  double alpha1 = 11.0;   // input 1 on -> off
  double beta1 = 1.0;     // input 1 off -> on
  double lambda1 = 12.48; // input rate, buffer 1
  double theta1 = 1.6;    // buffer-1 output share below threshold
  double kappa = 2.6;     // total output capacity
  double alpha2 = 22.0;   // input 2 on -> off
  double beta2 = 1.0;     // input 2 off -> on
  double lambda2 = 16.25; // input rate, buffer 2
  double theta2 = 1.0;    // buffer-2 output share below threshold
  double xstar = 1.6;     // priority threshold on buffer 1
  double truncation = 16.0;
};

inline ModelSpec build_bandwidth_model(const BandwidthParams& p) {
  require(p.alpha1 > 0 && p.beta1 > 0 && p.alpha2 > 0 && p.beta2 > 0 && p.lambda1 > 0 &&
              p.lambda2 > 0 && p.theta1 > 0 && p.theta2 > 0 && p.kappa > 0 && p.xstar > 0,
          errc::invalid_parameter, "bandwidth model: all rates must be positive");
  require(std::abs(p.theta1 + p.theta2 - p.kappa) <= 1e-12, errc::invalid_parameter,
          "bandwidth model: theta1 + theta2 must equal kappa");
  require(p.lambda1 > p.theta1 && p.lambda2 > p.theta2, errc::invalid_parameter,
          "bandwidth model: lambda_k must exceed the below-threshold output rate");

  ModelSpec m;
  m.phases.labels = {"11", "10", "01", "00"};

  Eigen::MatrixXd T(4, 4);
  T << -(p.alpha1 + p.alpha2), p.alpha2, p.alpha1, 0.0,
      p.beta2, -(p.alpha1 + p.beta2), 0.0, p.alpha1,
      p.beta1, 0.0, -(p.alpha2 + p.beta1), p.alpha2,
      0.0, p.beta1, p.beta2, -(p.beta1 + p.beta2);
  m.gen.T = T;

  m.c.c = Eigen::Vector4d(p.lambda1 - p.theta1, p.lambda1 - p.theta1, -p.theta1, -p.theta1);

  m.r.breakpoints = {p.xstar};
  Eigen::VectorXd below(4), above(4), zero_row(4);
  below << p.lambda2 - p.theta2, -p.theta2, p.lambda2 - p.theta2, -p.theta2;
  above << p.lambda2, 0.0, p.lambda2, 0.0;
  zero_row << p.lambda2 - p.kappa, -p.kappa, p.lambda2 - p.kappa, -p.kappa;
  m.r.piece_rates = {below, above};
  m.r.at_zero = zero_row;

  m.truncation = p.truncation;
  return m;
}

// ---------------------------------------------------------------------------
// Model file I/O (JSON). Schema documented in the README.
// ---------------------------------------------------------------------------

inline ModelSpec model_from_json(const nlohmann::json& j) {
  ModelSpec m;
  try {
    m.phases.labels = j.at("phases").get<std::vector<std::string>>();
    const int n = m.phases.size();

    auto rows = j.at("generator").get<std::vector<std::vector<double>>>();
    require(static_cast<int>(rows.size()) == n, errc::config_error,
            "generator row count must match phase count");
    m.gen.T.resize(n, n);
    for (int i = 0; i < n; ++i) {
      require(static_cast<int>(rows[i].size()) == n, errc::config_error,
              "generator rows must be square");
      for (int k = 0; k < n; ++k) m.gen.T(i, k) = rows[i][k];
    }

    auto cvec = j.at("c").get<std::vector<double>>();
    require(static_cast<int>(cvec.size()) == n, errc::config_error,
            "c vector length must match phase count");
    m.c.c = Eigen::Map<Eigen::VectorXd>(cvec.data(), n);

    const auto& rf = j.at("rate_field");
    m.r.breakpoints = rf.at("breakpoints").get<std::vector<double>>();
    auto pieces = rf.at("rates").get<std::vector<std::vector<double>>>();
    require(pieces.size() == m.r.breakpoints.size() + 1, errc::config_error,
            "rate_field.rates must have one row per piece (breakpoints + 1)");
    for (auto& row : pieces) {
      require(static_cast<int>(row.size()) == n, errc::config_error,
              "rate_field rows must match phase count");
      m.r.piece_rates.push_back(Eigen::Map<Eigen::VectorXd>(row.data(), n));
    }
    if (rf.contains("at_zero")) {
      auto z = rf.at("at_zero").get<std::vector<double>>();
      require(static_cast<int>(z.size()) == n, errc::config_error,
              "rate_field.at_zero must match phase count");
      m.r.at_zero = Eigen::Map<Eigen::VectorXd>(z.data(), n);
    }

    m.truncation = j.at("truncation").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(errc::config_error, std::string("model file: ") + e.what());
  }
  return m;
}

inline nlohmann::json model_to_json(const ModelSpec& m) {
  nlohmann::json j;
  j["phases"] = m.phases.labels;
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < m.phases.size(); ++i) {
    std::vector<double> r(m.phases.size());
    for (int k = 0; k < m.phases.size(); ++k) r[k] = m.gen.T(i, k);
    rows.push_back(r);
  }
  j["generator"] = rows;
  j["c"] = std::vector<double>(m.c.c.data(), m.c.c.data() + m.c.c.size());
  j["rate_field"]["breakpoints"] = m.r.breakpoints;
  std::vector<std::vector<double>> pr;
  for (const auto& row : m.r.piece_rates)
    pr.emplace_back(row.data(), row.data() + row.size());
  j["rate_field"]["rates"] = pr;
  if (m.r.at_zero.size() > 0)
    j["rate_field"]["at_zero"] =
        std::vector<double>(m.r.at_zero.data(), m.r.at_zero.data() + m.r.at_zero.size());
  j["truncation"] = m.truncation;
  return j;
}

inline ModelSpec load_model(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), errc::io_error, "cannot open model file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(errc::config_error, "model file '" + path + "': " + e.what());
  }
  return model_from_json(j);
}

}  // namespace ffdg
