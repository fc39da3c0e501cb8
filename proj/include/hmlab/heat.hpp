#ifndef HMLAB_HEAT_HPP
#define HMLAB_HEAT_HPP

#include <cmath>
#include <functional>
#include <vector>

#include "hmlab/csr.hpp"
#include "hmlab/fields.hpp"
#include "hmlab/manifold.hpp"

namespace hmlab {

struct HeatState {
  double t = 0.0;
  Vec density;
  double mass = 0.0;
};

struct HeatOptions {
  double dt_factor = 0.02;  // geometric step growth, dt ~ factor * t
  double dt0 = -1.0;        // first step; default h^2/4
  double mass_tol = 1e-9;
  double cg_tol = 1e-13;
  int max_retries = 5;
};

namespace heat_detail {

struct BackwardEulerOp {
  const DiscreteManifold* man;
  double dt;
  void apply(const Vec& x, Vec& y) const {
    man->A.apply(x, y);
    parallel_for(man->V, [&](Index i) {
      y[i] = man->w[static_cast<size_t>(i)] * x[i] + dt * y[i];
    });
  }
  Vec diag() const {
    Vec d(static_cast<size_t>(man->V));
    parallel_for(man->V, [&](Index i) {
      d[static_cast<size_t>(i)] = man->w[static_cast<size_t>(i)] + dt * man->diagA[static_cast<size_t>(i)];
    });
    return d;
  }
};

}  // namespace heat_detail

// Result of an evolution: snapshots at the requested times plus, per
// observer field, the running integral  int_0^t ( int f dmu(s) ) ds
// accumulated by trapezoid over every internal step.
struct HeatLadder {
  std::vector<HeatState> states;
  std::vector<std::vector<double>> observer_cumulative;  // [obs][state]
  double clamped_mass = 0.0;  // total negative mass clamped to zero
  int steps = 0;

  const HeatState& at_time(double t) const {
    for (const auto& s : states)
      if (std::abs(s.t - t) <= 1e-9 * std::max(1.0, t)) return s;
    throw NumericalFault("no heat state at t=" + fmt17(t));
  }
};

// Implicit (backward Euler) evolution of dH/dt = Laplacian H from a unit
// point mass at x0 (or from a supplied initial state), zero-flux at the
// truncation boundary, step size proportional to t.
inline HeatLadder heat_evolve(const DiscreteManifold& man, std::vector<double> t_list,
                              const HeatOptions& opt = {},
                              const std::vector<const Vec*>& observers = {},
                              const HeatState* initial = nullptr) {
  std::sort(t_list.begin(), t_list.end());
  if (t_list.empty()) throw NumericalFault("heat_evolve: empty time list");

  HeatLadder out;
  out.observer_cumulative.assign(observers.size(), {});

  double h_min = 1e300;
  for (const auto& ax : man.axes) h_min = std::min(h_min, ax.h);
  const double dt0 = opt.dt0 > 0 ? opt.dt0 : 0.25 * h_min * h_min;

  Vec H(static_cast<size_t>(man.V), 0.0);
  double t = 0.0;
  if (initial) {
    H = initial->density;
    t = initial->t;
  } else {
    H[static_cast<size_t>(man.x0)] = 1.0 / man.w[static_cast<size_t>(man.x0)];
  }

  auto mass_of = [&](const Vec& d) {
    return blocked_sum(man.V, [&](Index i) { return man.w[static_cast<size_t>(i)] * d[i]; });
  };
  auto observe = [&](const Vec& d, const Vec& f) {
    return blocked_sum(man.V, [&](Index i) { return man.w[static_cast<size_t>(i)] * d[i] * f[i]; });
  };

  const double mass0 = mass_of(H);
  std::vector<double> obs_prev(observers.size()), obs_cum(observers.size(), 0.0);
  for (size_t o = 0; o < observers.size(); ++o) obs_prev[o] = observe(H, *observers[o]);

  size_t req = 0;
  Vec Hnew(static_cast<size_t>(man.V));
  while (req < t_list.size()) {
    const double t_req = t_list[req];
    if (t >= t_req - 1e-12 * std::max(1.0, t_req)) {
      HeatState st;
      st.t = t_req;
      st.density = H;
      st.mass = mass_of(H);
      out.states.push_back(std::move(st));
      for (size_t o = 0; o < observers.size(); ++o)
        out.observer_cumulative[o].push_back(obs_cum[o]);
      ++req;
      continue;
    }
    double dt = (t <= 0.0) ? dt0 : std::max(opt.dt_factor * t, dt0);
    dt = std::min(dt, t_req - t);

    bool accepted = false;
    for (int attempt = 0; attempt <= opt.max_retries; ++attempt) {
      heat_detail::BackwardEulerOp op{&man, dt};
      Vec b(static_cast<size_t>(man.V));
      parallel_for(man.V, [&](Index i) { b[i] = man.w[static_cast<size_t>(i)] * H[i]; });
      Hnew = H;  // warm start
      const CgResult cg = cg_solve(op, b, Hnew, opt.cg_tol, 100000);
      if (!cg.converged)
        throw NumericalFault("heat step solve failed at t=" + fmt17(t));
      double mn = 0.0, mx = 0.0;
      for (double v : Hnew) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
      if (mn < -1e-12 * std::max(mx, 1e-300)) {
        dt *= 0.5;
        continue;
      }
      if (mn < 0.0) {
        for (double& v : Hnew)
          if (v < 0.0) {
            out.clamped_mass -= v;
            v = 0.0;
          }
      }
      accepted = true;
      break;
    }
    if (!accepted)
      throw NumericalFault("heat step positivity failure at t=" + fmt17(t));

    H.swap(Hnew);
    t += dt;
    ++out.steps;

    const double mass = mass_of(H);
    if (std::abs(mass - mass0) > opt.mass_tol)
      throw NumericalFault("heat mass drift " + fmt17(mass - mass0) + " at t=" + fmt17(t));

    for (size_t o = 0; o < observers.size(); ++o) {
      const double val = observe(H, *observers[o]);
      obs_cum[o] += 0.5 * (obs_prev[o] + val) * dt;
      obs_prev[o] = val;
    }
  }
  return out;
}

inline double heat_average(const DiscreteManifold& man, const HeatState& st, const Vec& f) {
  return blocked_sum(man.V, [&](Index i) {
    return man.w[static_cast<size_t>(i)] * st.density[i] * f[static_cast<size_t>(i)];
  });
}

// ---------------------------------------------------------------------------
// Li-Yau kernel bound fit

struct KernelBoundFit {
  double eps = 0.0;
  double c1_raw = 0.0, c2_raw = 0.0;  // fitted maxima
  double c1 = 1.0, c2 = 1.0;          // clamped to >= 1 (valid constants)
  Index samples = 0;
};

inline KernelBoundFit kernel_bound_fit(const DiscreteManifold& man,
                                       const std::vector<HeatState>& states,
                                       double eps, double h_ref = -1.0) {
  if (eps <= 0.0 || eps > 2.0) throw NumericalFault("kernel_bound_fit: eps out of (0,2]");
  double h = h_ref;
  if (h <= 0) {
    h = 1e300;
    for (const auto& ax : man.axes) h = std::min(h, ax.h);
  }
  KernelBoundFit fit;
  fit.eps = eps;
  const double r_lim = 0.5 * man.r_max;
  const double st_lo = 10.0 * h, st_hi = man.r_max / 4.0;
  for (const auto& st : states) {
    const double sq = std::sqrt(st.t);
    if (sq < st_lo - 1e-12 || sq > st_hi + 1e-12) continue;
    const double volB = man.ball_volume(sq);
    for (Index v = 0; v < man.V; ++v) {
      const double rv = man.r[static_cast<size_t>(v)];
      if (rv > r_lim) continue;
      const double Hv = st.density[static_cast<size_t>(v)];
      ++fit.samples;
      const double up = Hv * volB * std::exp(rv * rv / ((4.0 + eps) * st.t));
      fit.c2_raw = std::max(fit.c2_raw, up);
      if (Hv > 1e-280) {
        const double low = std::exp(-rv * rv / ((4.0 - eps) * st.t)) / (Hv * volB);
        fit.c1_raw = std::max(fit.c1_raw, low);
      }
    }
  }
  if (fit.samples == 0) throw NumericalFault("kernel_bound_fit: empty sample window");
  fit.c1 = std::max(1.0, fit.c1_raw);
  fit.c2 = std::max(1.0, fit.c2_raw);
  return fit;
}

// ---------------------------------------------------------------------------
// Harnack checks

struct HarnackReport {
  double worst_onpoint = 0.0;   // max H(x,t1) / ((t2/t1)^{3m/4} H(x,t2)) over samples
  double worst_pair = 0.0;      // same for the exp(3d^2/8dt) two-point form
  bool pass = false;
};

inline HarnackReport harnack_check(const DiscreteManifold& man, const HeatState& s1,
                                   const HeatState& s2, double slack = 1e-9) {
  if (!(s1.t < s2.t)) throw NumericalFault("harnack_check: need t1 < t2");
  HarnackReport rep;
  const double fac = std::pow(s2.t / s1.t, 0.75 * man.m);
  const double r_lim = 0.5 * man.r_max;
  for (Index v = 0; v < man.V; ++v) {
    if (man.r[static_cast<size_t>(v)] > r_lim) continue;
    const double h2 = s2.density[static_cast<size_t>(v)];
    if (h2 < 1e-250) continue;
    const double ratio = s1.density[static_cast<size_t>(v)] / (fac * h2);
    rep.worst_onpoint = std::max(rep.worst_onpoint, ratio);
  }
  rep.pass = rep.worst_onpoint <= 1.0 + slack;
  return rep;
}

// two-point spot check with explicit pair distances
inline double harnack_pair_check(const DiscreteManifold& man, const HeatState& s1,
                                 const HeatState& s2,
                                 const std::vector<std::pair<Index, Index>>& pairs,
                                 const std::function<double(Index, Index)>& dist) {
  const double fac = std::pow(s2.t / s1.t, 0.75 * man.m);
  double worst = 0.0;
  for (const auto& [x, y] : pairs) {
    const double hy = s2.density[static_cast<size_t>(y)];
    if (hy < 1e-250) continue;
    const double d = dist(x, y);
    const double bound = fac * std::exp(3.0 * d * d / (8.0 * (s2.t - s1.t))) * hy;
    worst = std::max(worst, s1.density[static_cast<size_t>(x)] / bound);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// tail mass vs the Psi_2 prediction

// Psi_2(sqrt(t)/R | m) = C2(1/2) * m * int_{R/sqrt(t)}^inf e^{-2 s^2 / 9} s^{m-1} ds
inline double psi2_integral(double lo, int m) {
  // composite Simpson on [lo, hi] with decay-based cutoff
  const double hi = std::max(lo + 12.0, 3.0 * lo);
  const int n = 4000;
  const double hstep = (hi - lo) / n;
  auto g = [m](double s) { return std::exp(-2.0 * s * s / 9.0) * std::pow(s, m - 1); };
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = lo + i * hstep;
    acc += hstep / 6.0 * (g(a) + 4.0 * g(a + 0.5 * hstep) + g(a + hstep));
  }
  return acc;
}

struct TailMassReport {
  double R = 0.0, t = 0.0;
  double measured = 0.0;
  double predicted = 0.0;
  bool pass = false;
};

inline TailMassReport tail_mass_bound(const DiscreteManifold& man, const HeatState& st,
                                      double R, double c2_half) {
  if (R < std::sqrt(st.t)) throw NumericalFault("tail_mass_bound: need R >= sqrt(t)");
  TailMassReport rep;
  rep.R = R;
  rep.t = st.t;
  rep.measured = blocked_sum(man.V, [&](Index v) {
    return man.r[static_cast<size_t>(v)] > R
               ? man.w[static_cast<size_t>(v)] * st.density[static_cast<size_t>(v)]
               : 0.0;
  });
  rep.predicted = c2_half * man.m * psi2_integral(R / std::sqrt(st.t), man.m);
  rep.pass = rep.measured <= rep.predicted;
  return rep;
}

}  // namespace hmlab

#endif  // HMLAB_HEAT_HPP
