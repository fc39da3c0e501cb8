#ifndef HMLAB_FMM_HPP
#define HMLAB_FMM_HPP

#include <limits>
#include <queue>
#include <vector>

#include "hmlab/manifold.hpp"

namespace hmlab {

namespace fmm_detail {

// physical spacing along axis a at vertex v
inline double local_spacing(const DiscreteManifold& man, Index v, int a) {
  const Axis& ax = man.axes[a];
  if (a == man.theta_axis) {
    const double s = man.is_tip(v) ? 0.5 * man.axes[man.s_axis].h : man.coord(v, man.s_axis);
    return std::max(man.prof.f(s), 1e-12) * ax.h;
  }
  return ax.h;
}

// collect neighbors of v as (vertex, axis) pairs
inline void neighbors(const DiscreteManifold& man, Index v,
                      std::vector<std::pair<Index, int>>& out) {
  out.clear();
  std::vector<Index> idx;
  man.decompose(v, idx);
  if (man.is_tip(v)) {
    // s-neighbors: ring 0 (all theta columns for warped grids)
    std::vector<Index> jdx = idx;
    jdx[man.s_axis] = 0;
    if (man.theta_axis >= 0) {
      for (Index j = 0; j < man.dims[man.theta_axis]; ++j) {
        jdx[man.theta_axis] = j;
        out.emplace_back(man.reg_id(jdx), man.s_axis);
      }
    } else {
      out.emplace_back(man.reg_id(jdx), man.s_axis);
    }
    for (int a : man.flat_axes) {
      for (int dir : {-1, +1}) {
        const Index i = idx[a] + dir;
        if (i < 0 || i >= man.dims[a]) continue;
        std::vector<Index> kdx = idx;
        kdx[a] = i;
        out.emplace_back(man.tip_id(kdx), a);
      }
    }
    return;
  }
  for (int a = 0; a < man.rank(); ++a) {
    for (int dir : {-1, +1}) {
      const Index n = man.neighbor(v, a, dir, idx);
      if (n >= 0) out.emplace_back(n, a);
    }
  }
}

}  // namespace fmm_detail

// First-order fast marching solve of |grad T| = 1 from a source vertex,
// metric-aware through the per-axis local spacings.
inline Vec fmm_distance(const DiscreteManifold& man, Index source) {
  const double inf = std::numeric_limits<double>::infinity();
  Vec dist(static_cast<size_t>(man.V), inf);
  std::vector<std::uint8_t> known(static_cast<size_t>(man.V), 0);

  using Entry = std::pair<double, Index>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;

  dist[static_cast<size_t>(source)] = 0.0;
  heap.emplace(0.0, source);

  std::vector<std::pair<Index, int>> nbrs, nbrs2;
  std::vector<Index> idx;

  auto update = [&](Index v) {
    // per-axis minimal known neighbor value and spacing
    double best[3][2];  // [axis][value, spacing]
    for (auto& b : best) {
      b[0] = inf;
      b[1] = 1.0;
    }
    fmm_detail::neighbors(man, v, nbrs2);
    for (const auto& [n, a] : nbrs2) {
      if (!known[static_cast<size_t>(n)]) continue;
      if (dist[static_cast<size_t>(n)] < best[a][0]) {
        best[a][0] = dist[static_cast<size_t>(n)];
        best[a][1] = fmm_detail::local_spacing(man, v, a);
      }
    }
    // sort candidate axes by value, add while consistent
    std::vector<std::pair<double, double>> cand;
    for (int a = 0; a < man.rank(); ++a)
      if (best[a][0] < inf) cand.emplace_back(best[a][0], best[a][1]);
    if (cand.empty()) return inf;
    std::sort(cand.begin(), cand.end());

    double T = cand[0].first + cand[0].second;
    double sa = 0.0, sb = 0.0, sc = -1.0;
    for (size_t k = 0; k < cand.size(); ++k) {
      const double Ta = cand[k].first, ha = cand[k].second;
      if (T <= Ta && k > 0) break;
      const double ih2 = 1.0 / (ha * ha);
      sa += ih2;
      sb += Ta * ih2;
      sc += Ta * Ta * ih2;
      const double disc = sb * sb - sa * sc;
      if (disc < 0.0) break;
      T = (sb + std::sqrt(disc)) / sa;
    }
    return T;
  };

  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (known[static_cast<size_t>(v)]) continue;
    known[static_cast<size_t>(v)] = 1;
    fmm_detail::neighbors(man, v, nbrs);
    for (const auto& [n, a] : nbrs) {
      (void)a;
      if (known[static_cast<size_t>(n)]) continue;
      const double T = update(n);
      if (T < dist[static_cast<size_t>(n)]) {
        dist[static_cast<size_t>(n)] = T;
        heap.emplace(T, n);
      }
    }
  }
  return dist;
}

// Exact cone distance by unrolling: points (s1,t1), (s2,t2) on a cone with
// angle factor a. Wrapped angular separation capped at pi.
inline double cone_distance(double a, double s1, double t1, double s2, double t2) {
  double dth = std::fmod(std::abs(t1 - t2), 2.0 * kPi);
  dth = std::min(dth, 2.0 * kPi - dth);
  const double phi = a * dth;
  if (phi >= kPi) return s1 + s2;  // geodesic through the tip
  return std::sqrt(std::max(0.0, s1 * s1 + s2 * s2 - 2.0 * s1 * s2 * std::cos(phi)));
}

}  // namespace hmlab

#endif  // HMLAB_FMM_HPP
