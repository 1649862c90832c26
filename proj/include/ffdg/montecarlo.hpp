#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>
#include <vector>

#include "ffdg/error.hpp"
#include "ffdg/model.hpp"
#include "ffdg/rng.hpp"

namespace ffdg {

// Exact event-driven simulation of {X_t, Y_t, phi_t}: within a phase sojourn
// X is linear and Y is piecewise linear between X-breakpoint crossings, so
// every event time is closed form and there is no time-discretisation error.
// The simulator runs the untruncated process.

struct SimInit {
  double x0 = 0.0;
  double y0 = 0.0;
  int phase0 = 0;
};

struct PathRecord {
  double tau = 0.0;   // first return time of Y to 0 (valid unless censored)
  double x_tau = 0.0;
  int phase_tau = -1;
  bool censored = false;  // Y did not return by the horizon
};

namespace detail {

struct SimStepper {
  const ModelSpec& m;
  Rng& rng;
  double x, y, t;
  int phase;

  SimStepper(const ModelSpec& model, const SimInit& init, Rng& r)
      : m(model), rng(r), x(init.x0), y(init.y0), t(0.0), phase(init.phase0) {}

  // One event step. Returns the y-rate that applied over the segment and the
  // segment length via out-parameters; advances the state.
  // kind: 0 = phase jump, 1 = X geometric event, 2 = Y hit zero.
  void step(double& seg, double& ry_out, int& kind) {
    double cv = m.c.c(phase);
    if (x <= 0.0 && cv < 0.0) cv = 0.0;

    double te = rng.exponential(-m.gen.T(phase, phase));
    kind = 0;
    if (cv < 0.0) {
      // next breakpoint below x, else the regulated boundary at 0
      double target = 0.0;
      for (double b : m.r.breakpoints)
        if (b < x - 1e-12) target = std::max(target, b);
      const double tt = (x - target) / (-cv);
      if (tt < te) {
        te = tt;
        kind = 1;
      }
    } else if (cv > 0.0) {
      for (double b : m.r.breakpoints)
        if (b > x + 1e-12) {
          const double tt = (b - x) / cv;
          if (tt < te) {
            te = tt;
            kind = 1;
          }
          break;
        }
    }

    // y-rate over the (piecewise-constant) upcoming segment
    double rv;
    if (cv == 0.0 && x <= 0.0)
      rv = m.r.rate_at_zero(phase);
    else
      rv = m.r.rate(phase, x + 0.5 * cv * te);
    double ry = rv;
    if (y <= 0.0 && ry < 0.0) ry = 0.0;  // regulated boundary for Y

    if (ry < 0.0 && y > 0.0) {
      const double tt = y / (-ry);
      if (tt < te) {
        te = tt;
        kind = 2;
      }
    }

    x += cv * te;
    y += ry * te;
    t += te;
    if (kind == 1) {
      // snap to the exact breakpoint / boundary
      double target = x;
      double best = 1e300;
      for (double b : m.r.breakpoints)
        if (std::abs(b - x) < best) {
          best = std::abs(b - x);
          target = b;
        }
      if (std::abs(x) < best) target = 0.0;
      x = target;
    }
    if (kind == 2) y = 0.0;
    if (y < 1e-14) y = 0.0;
    if (kind == 0) jump();
    seg = te;
    ry_out = ry;
  }

  void jump() {
    const double total = -m.gen.T(phase, phase);
    double u = rng.u01() * total;
    for (int j = 0; j < m.phases.size(); ++j) {
      if (j == phase) continue;
      u -= m.gen.T(phase, j);
      if (u <= 0.0) {
        phase = j;
        return;
      }
    }
    // numerical leftovers: take the last positive-rate target
    for (int j = m.phases.size() - 1; j >= 0; --j)
      if (j != phase && m.gen.T(phase, j) > 0.0) {
        phase = j;
        return;
      }
  }
};

}  // namespace detail

// Simulates until Y first returns to 0 (after its first positive excursion if
// y0 = 0) or until the horizon V, whichever comes first.
inline PathRecord simulate_first_return(const ModelSpec& model, const SimInit& init,
                                        double horizon, Rng& rng) {
  detail::SimStepper st(model, init, rng);
  bool started = st.y > 0.0;
  while (true) {
    double seg, ry;
    int kind;
    st.step(seg, ry, kind);
    if (st.t > horizon) return {horizon, 0.0, -1, true};
    if (st.y > 0.0) started = true;
    if (kind == 2 && started) return {st.t, st.x, st.phase, false};
  }
}

// Independent paths with per-path RNG streams; identical results for a fixed
// seed regardless of the thread count.
inline std::vector<PathRecord> simulate_paths(const ModelSpec& model, const SimInit& init,
                                              double horizon, int npaths,
                                              std::uint64_t seed, int threads = 0) {
  if (threads <= 0) {
    if (const char* env = std::getenv("FFDG_THREADS")) threads = std::atoi(env);
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 0) threads = 1;
  }
  threads = std::min(threads, std::max(1, npaths));
  std::vector<PathRecord> out(npaths);
  auto worker = [&](int lo, int hi) {
    for (int p = lo; p < hi; ++p) {
      Rng rng(seed, static_cast<std::uint64_t>(p));
      out[p] = simulate_first_return(model, init, horizon, rng);
    }
  };
  if (threads == 1) {
    worker(0, npaths);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (npaths + threads - 1) / threads;
    for (int tix = 0; tix < threads; ++tix) {
      const int lo = tix * chunk, hi = std::min(npaths, lo + chunk);
      if (lo < hi) pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

struct EmpiricalCdf {
  int phase;
  std::vector<double> x_sorted;  // return levels of retained paths into this phase
  int total_retained;            // across all phases

  // unnormalised sub-CDF: #(X_tau <= x, phi_tau = phase) / total_retained
  double operator()(double x) const {
    const auto it = std::upper_bound(x_sorted.begin(), x_sorted.end(), x);
    return static_cast<double>(it - x_sorted.begin()) / total_retained;
  }
  double mass() const { return static_cast<double>(x_sorted.size()) / total_retained; }
};

inline std::vector<EmpiricalCdf> empirical_return_cdf(const std::vector<PathRecord>& recs,
                                                      int nphases) {
  int retained = 0;
  for (const auto& r : recs)
    if (!r.censored) ++retained;
  require(retained > 0, errc::no_retained_paths, "all paths were censored");
  std::vector<EmpiricalCdf> out;
  for (int i = 0; i < nphases; ++i) {
    EmpiricalCdf c;
    c.phase = i;
    c.total_retained = retained;
    for (const auto& r : recs)
      if (!r.censored && r.phase_tau == i) c.x_sorted.push_back(r.x_tau);
    std::sort(c.x_sorted.begin(), c.x_sorted.end());
    out.push_back(std::move(c));
  }
  return out;
}

inline double censored_fraction(const std::vector<PathRecord>& recs) {
  int c = 0;
  for (const auto& r : recs)
    if (r.censored) ++c;
  return static_cast<double>(c) / static_cast<double>(recs.size());
}

// Long-run occupation estimates from a single trajectory with batch-means
// standard errors: P[Y = 0], P[X = 0], and the X-CDF on a grid.
struct StationaryEstimate {
  double p_y0 = 0.0, se_y0 = 0.0;
  double p_x0 = 0.0;
  std::vector<double> xgrid;
  std::vector<double> x_cdf;  // P[X <= xgrid[j]]
  double t_run = 0.0;
  int batches = 0;
};

inline StationaryEstimate estimate_stationary(const ModelSpec& model, const SimInit& init,
                                              double t_burn, double t_run,
                                              std::uint64_t seed,
                                              const std::vector<double>& xgrid = {},
                                              int nbatches = 32) {
  Rng rng(seed, 0xE57A71ULL);
  detail::SimStepper st(model, init, rng);
  StationaryEstimate est;
  est.xgrid = xgrid;
  est.x_cdf.assign(xgrid.size(), 0.0);
  est.batches = nbatches;
  std::vector<double> batch_y0(nbatches, 0.0);
  const double batch_len = t_run / nbatches;
  double tx0 = 0.0;

  while (st.t < t_burn + t_run) {
    const double x_start = st.x;
    const double y_start = st.y;
    const double cv_eff = [&] {
      double cv = model.c.c(st.phase);
      if (x_start <= 0.0 && cv < 0.0) cv = 0.0;
      return cv;
    }();
    double seg, ry;
    int kind;
    const double t0 = st.t;
    st.step(seg, ry, kind);
    const double a = std::max(t0, t_burn);
    const double b = std::min(st.t, t_burn + t_run);
    if (b <= a) continue;
    const double keep = b - a;
    est.t_run += keep;
    const bool at_y0 = (y_start <= 0.0 && ry <= 0.0);
    if (at_y0) {
      // split the kept window across batches
      double lo = a - t_burn;
      const double hi = b - t_burn;
      while (lo < hi - 1e-15) {
        int bi = std::min(nbatches - 1, static_cast<int>(lo / batch_len));
        const double bend = std::min(hi, (bi + 1) * batch_len);
        batch_y0[bi] += bend - lo;
        lo = bend;
      }
    }
    if (x_start <= 0.0 && cv_eff == 0.0) tx0 += keep;
    // exact occupation of {X <= g} along the linear segment
    if (!xgrid.empty()) {
      const double frac0 = (a - t0);
      const double xa = x_start + cv_eff * frac0;
      const double xb = x_start + cv_eff * (frac0 + keep);
      const double lo = std::min(xa, xb), hi = std::max(xa, xb);
      for (size_t j = 0; j < xgrid.size(); ++j) {
        const double g = xgrid[j];
        if (hi <= g)
          est.x_cdf[j] += keep;
        else if (lo < g && cv_eff != 0.0)
          est.x_cdf[j] += std::min(keep, (g - lo) / std::abs(cv_eff));
      }
    }
  }

  double total_y0 = 0.0;
  for (double v : batch_y0) total_y0 += v;
  est.p_y0 = total_y0 / est.t_run;
  double var = 0.0;
  for (double v : batch_y0) {
    const double d = v / batch_len - est.p_y0;
    var += d * d;
  }
  var /= (nbatches - 1);
  est.se_y0 = std::sqrt(var / nbatches);
  est.p_x0 = tx0 / est.t_run;
  for (auto& v : est.x_cdf) v /= est.t_run;
  return est;
}

}  // namespace ffdg
