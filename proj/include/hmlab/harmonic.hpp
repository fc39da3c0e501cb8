#ifndef HMLAB_HARMONIC_HPP
#define HMLAB_HARMONIC_HPP

#include <cmath>
#include <string>
#include <vector>

#include "hmlab/csr.hpp"
#include "hmlab/fields.hpp"
#include "hmlab/manifold.hpp"

namespace hmlab {

// Pointed vector-valued map: n scalar vertex fields with u(x0) = 0.
struct VectorMap {
  int n = 0;
  std::vector<Vec> comp;
  std::vector<double> residual_inf;  // harmonic residual per component
  std::vector<double> growth_comp;   // per-component growth constant
  double growth = 0.0;               // map growth constant
  bool superlinear = false;          // growth diverges with scale
  std::string provenance = "analytic";
  double r_solve = 0.0;              // 0 = globally defined

  double trusted_radius(const DiscreteManifold& man, double buffer) const {
    double rt = man.r_max - buffer;
    if (r_solve > 0.0) rt = std::min(rt, 0.5 * r_solve);
    return rt;
  }
};

// ---------------------------------------------------------------------------
// Dirichlet solve on the region {r <= R_solve}

struct DirichletSystem {
  std::vector<Index> interior;       // global ids of unknowns
  std::vector<Index> gmap;           // global -> local (-1 outside)
  Csr Aii;
  Vec diag;

  void apply(const Vec& x, Vec& y) const { Aii.apply(x, y); }
  Vec diag_vec() const { return diag; }
  const Vec& diagv() const { return diag; }
  struct Op {
    const DirichletSystem* sys;
    void apply(const Vec& x, Vec& y) const { sys->Aii.apply(x, y); }
    Vec diag() const { return sys->diag; }
  };
  Op op() const { return Op{this}; }
};

// The Dirichlet ring consists of region vertices adjacent to the outside
// plus truncation-boundary vertices.
inline DirichletSystem make_dirichlet_system(const DiscreteManifold& man,
                                             double r_solve) {
  std::vector<std::uint8_t> in_region(static_cast<size_t>(man.V), 0);
  for (Index v = 0; v < man.V; ++v)
    in_region[static_cast<size_t>(v)] =
        (r_solve <= 0.0 || man.r[static_cast<size_t>(v)] <= r_solve) ? 1 : 0;

  DirichletSystem sys;
  sys.gmap.assign(static_cast<size_t>(man.V), -1);
  for (Index v = 0; v < man.V; ++v) {
    if (!in_region[static_cast<size_t>(v)]) continue;
    if (man.is_boundary[static_cast<size_t>(v)]) continue;
    bool ring = false;
    for (Index k = man.A.rowptr[v]; k < man.A.rowptr[v + 1]; ++k) {
      const Index j = man.A.col[k];
      if (!in_region[static_cast<size_t>(j)]) {
        ring = true;
        break;
      }
    }
    if (ring) continue;
    sys.gmap[static_cast<size_t>(v)] = static_cast<Index>(sys.interior.size());
    sys.interior.push_back(v);
  }

  CsrBuilder bld(static_cast<Index>(sys.interior.size()));
  for (size_t li = 0; li < sys.interior.size(); ++li) {
    const Index v = sys.interior[li];
    for (Index k = man.A.rowptr[v]; k < man.A.rowptr[v + 1]; ++k) {
      const Index j = man.A.col[k];
      const Index lj = sys.gmap[static_cast<size_t>(j)];
      if (lj >= 0) bld.add(static_cast<Index>(li), lj, man.A.val[k]);
    }
  }
  sys.Aii = bld.build();
  sys.diag = sys.Aii.diagonal();
  return sys;
}

// Solve L u = 0 with Dirichlet data from `data` on the ring; returns the
// full-grid field (data outside the interior, solution inside).
inline Vec dirichlet_solve(const DiscreteManifold& man, const DirichletSystem& sys,
                           const Vec& data, double tol = 1e-12, int max_iter = 0) {
  const Index ni = static_cast<Index>(sys.interior.size());
  Vec b(static_cast<size_t>(ni), 0.0), x(static_cast<size_t>(ni), 0.0);
  for (Index li = 0; li < ni; ++li) {
    const Index v = sys.interior[static_cast<size_t>(li)];
    double s = 0.0;
    for (Index k = man.A.rowptr[v]; k < man.A.rowptr[v + 1]; ++k) {
      const Index j = man.A.col[k];
      if (sys.gmap[static_cast<size_t>(j)] < 0) s += man.A.val[k] * data[static_cast<size_t>(j)];
    }
    b[static_cast<size_t>(li)] = -s;
    x[static_cast<size_t>(li)] = data[static_cast<size_t>(v)];  // warm start with data
  }
  if (max_iter == 0) max_iter = static_cast<int>(40 * std::sqrt(double(ni)) + 2000);
  const CgResult res = cg_solve(sys.op(), b, x, tol, max_iter);
  if (!res.converged)
    throw NumericalFault("harmonic solve did not converge: rel residual " +
                         fmt17(res.rel_residual) + " after " +
                         std::to_string(res.iterations) + " iterations");
  Vec u = data;
  for (Index li = 0; li < ni; ++li)
    u[static_cast<size_t>(sys.interior[static_cast<size_t>(li)])] = x[static_cast<size_t>(li)];
  return u;
}

inline double harmonic_residual_inf(const DiscreteManifold& man,
                                    const DirichletSystem& sys, const Vec& u) {
  Vec Au(static_cast<size_t>(man.V));
  man.A.apply(u, Au);
  double m = 0.0;
  for (const Index v : sys.interior)
    m = std::max(m, std::abs(Au[static_cast<size_t>(v)] / man.w[static_cast<size_t>(v)]));
  return m;
}

// ---------------------------------------------------------------------------
// map assembly

inline void point_map(const DiscreteManifold& man, VectorMap& u) {
  for (auto& c : u.comp) {
    const double v0 = c[static_cast<size_t>(man.x0)];
    for (double& vv : c) vv -= v0;
  }
}

// growth constant L = max |u|/(r+1); the superlinear flag compares the
// constant on the inner half region with the full one.
inline void measure_growth(const DiscreteManifold& man, VectorMap& u) {
  u.growth_comp.assign(static_cast<size_t>(u.n), 0.0);
  const double rhalf = 0.5 * man.r_max;
  double l_half = 0.0;
  u.growth = 0.0;
  for (Index v = 0; v < man.V; ++v) {
    const double denom = man.r[static_cast<size_t>(v)] + 1.0;
    double norm2v = 0.0;
    for (int a = 0; a < u.n; ++a) {
      const double val = u.comp[static_cast<size_t>(a)][static_cast<size_t>(v)];
      norm2v += val * val;
      u.growth_comp[static_cast<size_t>(a)] =
          std::max(u.growth_comp[static_cast<size_t>(a)], std::abs(val) / denom);
    }
    const double g = std::sqrt(norm2v) / denom;
    u.growth = std::max(u.growth, g);
    if (man.r[static_cast<size_t>(v)] <= rhalf) l_half = std::max(l_half, g);
  }
  u.superlinear = u.growth > 1.2 * l_half;
}

// component from an analytic generator
inline Vec analytic_component(const DiscreteManifold& man, const std::string& id,
                              double param = 0.0) {
  return analytic_scalar(man, id, param);
}

// assemble a map from per-component descriptors:
//   "analytic:<field>[:param]"  or  "dirichlet:<field>[:param]"
inline VectorMap solve_harmonic(const DiscreteManifold& man,
                                const std::vector<std::string>& components,
                                double r_solve, double tol = 1e-12) {
  VectorMap u;
  u.n = static_cast<int>(components.size());
  bool any_solve = false;
  DirichletSystem sys;
  for (const std::string& desc : components) {
    const size_t p1 = desc.find(':');
    if (p1 == std::string::npos) throw NumericalFault("bad component: " + desc);
    const std::string mode = desc.substr(0, p1);
    std::string id = desc.substr(p1 + 1);
    double param = 0.0;
    const size_t p2 = id.find(':');
    if (p2 != std::string::npos) {
      param = std::stod(id.substr(p2 + 1));
      id = id.substr(0, p2);
    }
    Vec data = analytic_scalar(man, id, param);
    if (mode == "analytic") {
      u.comp.push_back(std::move(data));
      Vec Au(static_cast<size_t>(man.V));
      man.A.apply(u.comp.back(), Au);
      double res = 0.0;
      for (Index v = 0; v < man.V; ++v)
        if (!man.is_boundary[static_cast<size_t>(v)] && man.interior_full[static_cast<size_t>(v)])
          res = std::max(res, std::abs(Au[static_cast<size_t>(v)] / man.w[static_cast<size_t>(v)]));
      u.residual_inf.push_back(res);
    } else if (mode == "dirichlet") {
      if (!any_solve) {
        sys = make_dirichlet_system(man, r_solve);
        any_solve = true;
      }
      Vec sol = dirichlet_solve(man, sys, data, tol);
      u.residual_inf.push_back(harmonic_residual_inf(man, sys, sol));
      u.comp.push_back(std::move(sol));
      u.provenance = "dirichlet";
      u.r_solve = r_solve;
    } else {
      throw NumericalFault("bad component mode: " + mode);
    }
  }
  point_map(man, u);
  measure_growth(man, u);
  return u;
}

// ---------------------------------------------------------------------------
// checks owned by this module

struct ChengYauReport {
  std::vector<double> sup_grad;  // per component, inner half ball
  double growth = 0.0;
  double ratio = 0.0;  // max_alpha sup|grad u_a| / L
};

inline ChengYauReport cheng_yau_check(const DiscreteManifold& man, const VectorMap& u,
                                      const CellGeometry& geom) {
  ChengYauReport rep;
  rep.growth = u.growth;
  const double rho = 0.5 * (u.r_solve > 0 ? 0.5 * u.r_solve : man.r_max);
  double worst = 0.0;
  for (int a = 0; a < u.n; ++a) {
    const CellField g = gradient(man, u.comp[static_cast<size_t>(a)]);
    const Vec gn = grad_norm_sq(geom, g);
    const double sup = std::sqrt(std::max(0.0, cell_sup_in_ball(geom, gn, rho)));
    rep.sup_grad.push_back(sup);
    worst = std::max(worst, sup);
  }
  rep.ratio = worst / std::max(u.growth, 1e-300);
  return rep;
}

// Bochner residual Delta|grad u_a|^2 - 2|Hess u_a|^2 per component; on
// Ric >= 0 backends the continuum value is 2 Ric(grad u, grad u) >= 0.
struct BochnerResult {
  std::vector<Vec> residual;          // per component, vertex field
  std::vector<std::uint8_t> mask;     // where valid
  double min_residual = 0.0;          // over all components and masked vertices
};

inline BochnerResult bochner_residual(const DiscreteManifold& man, const VectorMap& u,
                                      double trust_rho = 0.0) {
  BochnerResult out;
  out.mask = erode_mask(man, man.interior_full);
  if (trust_rho > 0.0)
    for (Index v = 0; v < man.V; ++v)
      if (man.r[static_cast<size_t>(v)] > trust_rho) out.mask[static_cast<size_t>(v)] = 0;
  out.min_residual = 1e300;
  for (int a = 0; a < u.n; ++a) {
    const Vec gn = vertex_grad_norm_sq(man, u.comp[static_cast<size_t>(a)]);
    const Vec lap = man.laplacian_apply(gn);
    const Vec hn = hessian_norm_sq(man, u.comp[static_cast<size_t>(a)]);
    Vec res(static_cast<size_t>(man.V), 0.0);
    for (Index v = 0; v < man.V; ++v) {
      if (!out.mask[static_cast<size_t>(v)]) continue;
      res[static_cast<size_t>(v)] = lap[static_cast<size_t>(v)] - 2.0 * hn[static_cast<size_t>(v)];
      out.min_residual = std::min(out.min_residual, res[static_cast<size_t>(v)]);
    }
    out.residual.push_back(std::move(res));
  }
  return out;
}

// ---------------------------------------------------------------------------
// lowest Dirichlet eigenvalue (inverse power iteration), used to certify
// flat backends against the square-well gap.

inline double lowest_dirichlet_eigenvalue(const DiscreteManifold& man,
                                          int iters = 60) {
  DirichletSystem sys = make_dirichlet_system(man, 0.0);
  const Index ni = static_cast<Index>(sys.interior.size());
  Vec x(static_cast<size_t>(ni), 1.0), y(static_cast<size_t>(ni), 0.0);
  Vec wi(static_cast<size_t>(ni));
  for (Index i = 0; i < ni; ++i)
    wi[static_cast<size_t>(i)] = man.w[static_cast<size_t>(sys.interior[static_cast<size_t>(i)])];
  double lambda = 0.0;
  for (int it = 0; it < iters; ++it) {
    Vec b(static_cast<size_t>(ni));
    for (Index i = 0; i < ni; ++i) b[static_cast<size_t>(i)] = wi[static_cast<size_t>(i)] * x[static_cast<size_t>(i)];
    cg_solve(sys.op(), b, y, 1e-12, 20000);
    // Rayleigh quotient in the weighted inner product
    Vec Ay(static_cast<size_t>(ni));
    sys.Aii.apply(y, Ay);
    double num = dot(y, Ay);
    double den = blocked_sum(ni, [&](Index i) {
      return wi[static_cast<size_t>(i)] * y[static_cast<size_t>(i)] * y[static_cast<size_t>(i)];
    });
    lambda = num / den;
    const double nrm = std::sqrt(den);
    for (Index i = 0; i < ni; ++i) x[static_cast<size_t>(i)] = y[static_cast<size_t>(i)] / nrm;
  }
  return lambda;
}

}  // namespace hmlab

#endif  // HMLAB_HARMONIC_HPP
