#ifndef HMLAB_FIELDS_HPP
#define HMLAB_FIELDS_HPP

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "hmlab/manifold.hpp"

namespace hmlab {

// ---------------------------------------------------------------------------
// cell geometry cache (volumes, distances, inverse metric per axis)

struct CellGeometry {
  Index n = 0;
  int rk = 0;
  Vec vol;
  Vec rc;
  Vec invg;  // n * rk, 1/g_aa at cell center

  double inv_gaa(Index c, int a) const { return invg[static_cast<size_t>(c * rk + a)]; }
};

inline CellGeometry make_cell_geometry(const DiscreteManifold& man) {
  CellGeometry g;
  g.n = man.cell_count();
  g.rk = man.rank();
  g.vol.resize(static_cast<size_t>(g.n));
  g.rc.resize(static_cast<size_t>(g.n));
  g.invg.resize(static_cast<size_t>(g.n * g.rk));
  std::vector<Index> cidx;
  for (Index c = 0; c < g.n; ++c) {
    man.cell_decompose(c, cidx);
    g.vol[static_cast<size_t>(c)] = man.cell_volume(cidx);
    g.rc[static_cast<size_t>(c)] = man.cell_r(cidx);
    const double s_at = man.s_axis >= 0 ? man.cell_center(cidx, man.s_axis) : 0.0;
    for (int a = 0; a < g.rk; ++a)
      g.invg[static_cast<size_t>(c * g.rk + a)] = 1.0 / man.metric_gaa(a, s_at);
  }
  return g;
}

// ---------------------------------------------------------------------------
// gradients (cell-based covariant partials)

struct CellField {
  Index n = 0;
  int rk = 0;
  Vec comp;  // n * rk

  double at(Index c, int a) const { return comp[static_cast<size_t>(c * rk + a)]; }
  double& at(Index c, int a) { return comp[static_cast<size_t>(c * rk + a)]; }
};

inline CellField gradient(const DiscreteManifold& man, const Vec& f) {
  CellField g;
  g.n = man.cell_count();
  g.rk = man.rank();
  g.comp.assign(static_cast<size_t>(g.n * g.rk), 0.0);
  const unsigned corners = 1u << g.rk;
  std::vector<Index> cidx;
  std::vector<Index> cid(corners);
  for (Index c = 0; c < g.n; ++c) {
    man.cell_decompose(c, cidx);
    for (unsigned b = 0; b < corners; ++b) cid[b] = man.cell_corner(cidx, b);
    for (int a = 0; a < g.rk; ++a) {
      double hi = 0.0, lo = 0.0;
      for (unsigned b = 0; b < corners; ++b) {
        if ((b >> a) & 1u)
          hi += f[static_cast<size_t>(cid[b])];
        else
          lo += f[static_cast<size_t>(cid[b])];
      }
      const double half = corners / 2;
      g.at(c, a) = (hi - lo) / (half * man.axes[a].h);
    }
  }
  return g;
}

inline double grad_inner(const CellGeometry& geom, const CellField& u,
                         const CellField& v, Index c) {
  double s = 0.0;
  for (int a = 0; a < geom.rk; ++a)
    s += u.at(c, a) * v.at(c, a) * geom.inv_gaa(c, a);
  return s;
}

inline Vec grad_norm_sq(const CellGeometry& geom, const CellField& u) {
  Vec out(static_cast<size_t>(geom.n));
  for (Index c = 0; c < geom.n; ++c) out[static_cast<size_t>(c)] = grad_inner(geom, u, u, c);
  return out;
}

// cell-field averages / sups over balls
inline double cell_ball_average(const CellGeometry& geom, const Vec& cf, double rho) {
  double num = 0.0, den = 0.0;
  for (Index c = 0; c < geom.n; ++c) {
    if (geom.rc[static_cast<size_t>(c)] <= rho) {
      num += geom.vol[static_cast<size_t>(c)] * cf[static_cast<size_t>(c)];
      den += geom.vol[static_cast<size_t>(c)];
    }
  }
  return num / den;
}

inline double cell_sup_in_ball(const CellGeometry& geom, const Vec& cf, double rho) {
  double m = -1e300;
  for (Index c = 0; c < geom.n; ++c)
    if (geom.rc[static_cast<size_t>(c)] <= rho) m = std::max(m, cf[static_cast<size_t>(c)]);
  return m;
}

inline double sup_in_ball(const DiscreteManifold& man, const Vec& f, double rho) {
  double m = -1e300;
  for (Index v = 0; v < man.V; ++v)
    if (man.r[static_cast<size_t>(v)] <= rho) m = std::max(m, f[static_cast<size_t>(v)]);
  return m;
}

inline double integrate(const DiscreteManifold& man, const Vec& f) {
  return blocked_sum(man.V, [&](Index i) { return man.w[static_cast<size_t>(i)] * f[static_cast<size_t>(i)]; });
}

// ---------------------------------------------------------------------------
// Hessian: |Hess u|^2 at full-stencil interior vertices; the warped circle
// contributes H_st = u_st - (f'/f) u_t and H_tt = u_tt + f f' u_s, collapsed
// sphere directions contribute (f' u_s / f)^2 each.

inline Vec hessian_norm_sq(const DiscreteManifold& man, const Vec& f) {
  Vec out(static_cast<size_t>(man.V), 0.0);
  const int rk = man.rank();
  std::vector<Index> idx;

  for (Index v = 0; v < man.V; ++v) {
    if (!man.interior_full[static_cast<size_t>(v)]) continue;
    man.decompose(v, idx);

    double d1[3] = {0, 0, 0};
    double d2[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    Index nb[3][2];
    for (int a = 0; a < rk; ++a) {
      nb[a][0] = man.neighbor(v, a, -1, idx);
      nb[a][1] = man.neighbor(v, a, +1, idx);
    }
    const double fv = f[static_cast<size_t>(v)];
    for (int a = 0; a < rk; ++a) {
      const double ha = man.axes[a].h;
      const double fm = f[static_cast<size_t>(nb[a][0])];
      const double fp = f[static_cast<size_t>(nb[a][1])];
      d1[a] = (fp - fm) / (2.0 * ha);
      d2[a][a] = (fp - 2.0 * fv + fm) / (ha * ha);
    }
    // cross second differences
    std::vector<Index> jdx;
    for (int a = 0; a < rk; ++a) {
      for (int b = a + 1; b < rk; ++b) {
        double acc = 0.0;
        bool ok = true;
        for (int da : {-1, +1}) {
          for (int db : {-1, +1}) {
            man.decompose(v, jdx);
            const Index va = man.neighbor(v, a, da, jdx);
            if (va < 0) {
              ok = false;
              break;
            }
            if (man.is_tip(va)) {
              if (b == man.theta_axis) {
                // all theta columns meet at the tip: b-difference vanishes
                acc += da * db * f[static_cast<size_t>(va)];
              } else {
                std::vector<Index> tdx;
                man.decompose(va, tdx);
                tdx[b] += db;
                if (tdx[b] < 0 || tdx[b] >= man.dims[b]) {
                  ok = false;
                  break;
                }
                acc += da * db * f[static_cast<size_t>(man.tip_id(tdx))];
              }
              continue;
            }
            std::vector<Index> kdx;
            man.decompose(va, kdx);
            const Index vab = man.neighbor(va, b, db, kdx);
            if (vab < 0) {
              ok = false;
              break;
            }
            acc += da * db * f[static_cast<size_t>(vab)];
          }
          if (!ok) break;
        }
        if (ok) d2[a][b] = d2[b][a] = acc / (4.0 * man.axes[a].h * man.axes[b].h);
      }
    }

    double s_at = 0.0, fs = 1.0, dfs = 0.0;
    if (man.s_axis >= 0) {
      s_at = man.axes[man.s_axis].x[static_cast<size_t>(idx[man.s_axis])];
      fs = man.prof.f(s_at);
      dfs = man.prof.df(s_at);
    }

    double total = 0.0;
    for (int a = 0; a < rk; ++a) {
      for (int b = 0; b < rk; ++b) {
        double H = d2[a][b];
        if (man.theta_axis >= 0) {
          if (a == man.theta_axis && b == man.theta_axis)
            H = d2[a][b] + fs * dfs * d1[man.s_axis];
          else if ((a == man.theta_axis && b == man.s_axis) ||
                   (a == man.s_axis && b == man.theta_axis))
            H = d2[a][b] - (dfs / fs) * d1[man.theta_axis];
        }
        const double ga = man.metric_gaa(a, s_at);
        const double gb = man.metric_gaa(b, s_at);
        total += H * H / (ga * gb);
      }
    }
    if (man.reduced_sphere_dims > 0)
      total += man.reduced_sphere_dims * std::pow(dfs * d1[man.s_axis] / fs, 2);
    out[static_cast<size_t>(v)] = total;
  }
  return out;
}

// ball average of a vertex field restricted to a mask
inline double masked_ball_average(const DiscreteManifold& man, const Vec& f,
                                  const std::vector<std::uint8_t>& mask, double rho) {
  double num = 0.0, den = 0.0;
  for (Index v = 0; v < man.V; ++v) {
    if (!mask[static_cast<size_t>(v)] || man.r[static_cast<size_t>(v)] > rho) continue;
    num += man.w[static_cast<size_t>(v)] * f[static_cast<size_t>(v)];
    den += man.w[static_cast<size_t>(v)];
  }
  return num / den;
}

// interpolate a cell field to vertices (volume-weighted average of the
// incident cells); used by the det-expansion checks.
inline Vec cells_to_vertices(const DiscreteManifold& man, const CellGeometry& geom,
                             const Vec& cf) {
  Vec num(static_cast<size_t>(man.V), 0.0), den(static_cast<size_t>(man.V), 0.0);
  const int rk = man.rank();
  const unsigned corners = 1u << rk;
  std::vector<Index> cidx;
  for (Index c = 0; c < geom.n; ++c) {
    man.cell_decompose(c, cidx);
    const double vol = geom.vol[static_cast<size_t>(c)];
    for (unsigned b = 0; b < corners; ++b) {
      const Index v = man.cell_corner(cidx, b);
      num[static_cast<size_t>(v)] += vol * cf[static_cast<size_t>(c)];
      den[static_cast<size_t>(v)] += vol;
    }
  }
  for (Index v = 0; v < man.V; ++v)
    num[static_cast<size_t>(v)] /= std::max(den[static_cast<size_t>(v)], 1e-300);
  return num;
}

// centered vertex gradient squared norm (valid on interior_full)
inline Vec vertex_grad_norm_sq(const DiscreteManifold& man, const Vec& f) {
  Vec out(static_cast<size_t>(man.V), 0.0);
  std::vector<Index> idx;
  for (Index v = 0; v < man.V; ++v) {
    if (!man.interior_full[static_cast<size_t>(v)]) continue;
    man.decompose(v, idx);
    const double s_at = man.s_axis >= 0
                            ? man.axes[man.s_axis].x[static_cast<size_t>(idx[man.s_axis])]
                            : 0.0;
    double total = 0.0;
    for (int a = 0; a < man.rank(); ++a) {
      const Index vm = man.neighbor(v, a, -1, idx);
      const Index vp = man.neighbor(v, a, +1, idx);
      const double d = (f[static_cast<size_t>(vp)] - f[static_cast<size_t>(vm)]) /
                       (2.0 * man.axes[a].h);
      total += d * d / man.metric_gaa(a, s_at);
    }
    out[static_cast<size_t>(v)] = total;
  }
  return out;
}

// shrink a vertex mask by one stencil ring
inline std::vector<std::uint8_t> erode_mask(const DiscreteManifold& man,
                                            const std::vector<std::uint8_t>& mask) {
  std::vector<std::uint8_t> out(mask.size(), 0);
  std::vector<Index> idx;
  for (Index v = 0; v < man.V; ++v) {
    if (!mask[static_cast<size_t>(v)]) continue;
    man.decompose(v, idx);
    bool ok = !man.is_tip(v);
    for (int a = 0; ok && a < man.rank(); ++a) {
      for (int dir : {-1, +1}) {
        const Index n = man.neighbor(v, a, dir, idx);
        if (n < 0 || !mask[static_cast<size_t>(n)]) {
          ok = false;
          break;
        }
      }
    }
    out[static_cast<size_t>(v)] = ok ? 1 : 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// analytic field generators

inline double gudermann(double s) { return 2.0 * std::atan(std::tanh(0.5 * s)); }

// scalar generators addressed by name; axis coordinates are the reduced
// computational coordinates of the backend.
inline Vec analytic_scalar(const DiscreteManifold& man, const std::string& id,
                           double param = 0.0) {
  Vec out(static_cast<size_t>(man.V), 0.0);
  for (Index v = 0; v < man.V; ++v) {
    const double rv = man.r[static_cast<size_t>(v)];
    double val = 0.0;
    if (id == "bounded_subharmonic") {
      // max of a harmonic (1 - r^{2-m}) and 0; requires m >= 3
      if (man.m < 3) throw NumericalFault("bounded_subharmonic needs m >= 3");
      val = rv > 1e-12 ? std::max(0.0, 1.0 - std::pow(rv, 2 - man.m)) : 0.0;
    } else if (id == "log_cap") {
      const double s0 = param > 0 ? param : 2.0;
      val = rv > s0 ? 1.0 - std::log(s0) / std::log(rv) : 0.0;
    } else if (id == "gauss_bump") {
      val = std::exp(-rv * rv);
    } else if (id == "gaussian_heat") {
      const double t0 = param > 0 ? param : 1.0;
      val = std::pow(4.0 * kPi * t0, -0.5 * man.m) * std::exp(-rv * rv / (4.0 * t0));
    } else if (id == "cone_harmonic") {
      // lowest angular mode s^{1/a} cos(theta); superlinear for a < 1
      const double a = man.spec.angle_factor;
      if (man.theta_axis < 0) throw NumericalFault("cone_harmonic needs a theta axis");
      const double p = 1.0 / a;
      if (man.is_tip(v)) {
        val = 0.0;
      } else {
        const double s = man.coord(v, man.s_axis);
        const double th = man.coord(v, man.theta_axis);
        val = std::pow(s, p) * std::cos(th);
      }
    } else if (id == "saddle_harmonic") {
      const double s = man.is_tip(v) ? 0.0 : man.coord(v, man.s_axis);
      val = gudermann(s);
    } else if (id == "height") {
      const double s = man.is_tip(v) ? 0.0 : man.coord(v, man.s_axis);
      val = man.prof.height(s);
    } else if (id == "tanh_x") {
      val = std::tanh(man.coord(v, man.flat_axes.empty() ? 0 : man.flat_axes[0]));
    } else if (id == "coordinate") {
      val = man.coord(v, static_cast<int>(param));
    } else {
      throw NumericalFault("unknown analytic field: " + id);
    }
    out[static_cast<size_t>(v)] = val;
  }
  return out;
}

}  // namespace hmlab

#endif  // HMLAB_FIELDS_HPP
