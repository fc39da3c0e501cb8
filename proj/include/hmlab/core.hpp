#ifndef HMLAB_CORE_HPP
#define HMLAB_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hmlab {

using Vec = std::vector<double>;
using Index = std::int64_t;

// Reductions are summed block by block in a fixed order so that results do
// not depend on the number of threads. Block partials are accumulated in
// parallel, the final combine is serial over block index.
inline constexpr Index kReduceBlock = 4096;

template <typename F>
double blocked_sum(Index n, F&& term) {
  const Index nblocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> partial(static_cast<size_t>(std::max<Index>(nblocks, 1)), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (Index b = 0; b < nblocks; ++b) {
    const Index lo = b * kReduceBlock;
    const Index hi = std::min(n, lo + kReduceBlock);
    double s = 0.0;
    for (Index i = lo; i < hi; ++i) s += term(i);
    partial[static_cast<size_t>(b)] = s;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

inline double dot(const Vec& a, const Vec& b) {
  return blocked_sum(static_cast<Index>(a.size()),
                     [&](Index i) { return a[i] * b[i]; });
}

inline double sum(const Vec& a) {
  return blocked_sum(static_cast<Index>(a.size()), [&](Index i) { return a[i]; });
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const Vec& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

template <typename F>
void parallel_for(Index n, F&& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (Index i = 0; i < n; ++i) body(i);
}

// y = a*x + y
inline void axpy(double a, const Vec& x, Vec& y) {
  parallel_for(static_cast<Index>(x.size()), [&](Index i) { y[i] += a * x[i]; });
}

// y = x + a*y
inline void xpay(const Vec& x, double a, Vec& y) {
  parallel_for(static_cast<Index>(x.size()), [&](Index i) { y[i] = x[i] + a * y[i]; });
}

inline void scale(double a, Vec& x) {
  parallel_for(static_cast<Index>(x.size()), [&](Index i) { x[i] *= a; });
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

// Canonical float formatting used by every report writer: 17 significant
// digits round-trips doubles exactly.
inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline bool close_rel(double a, double b, double tol) {
  const double ref = std::max(std::abs(a), std::abs(b));
  return std::abs(a - b) <= tol * std::max(ref, 1e-300);
}

struct NumericalFault : std::runtime_error {
  explicit NumericalFault(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr double kPi = 3.14159265358979323846;

// Volume of the unit ball in R^m.
inline double unit_ball_volume(int m) {
  switch (m) {
    case 1: return 2.0;
    case 2: return kPi;
    case 3: return 4.0 * kPi / 3.0;
    case 4: return kPi * kPi / 2.0;
    default: {
      double v = (m % 2 == 0) ? kPi * kPi / 2.0 : 4.0 * kPi / 3.0;
      for (int d = (m % 2 == 0) ? 4 : 3; d < m;) {
        d += 2;
        v *= 2.0 * kPi / d;
      }
      return v;
    }
  }
}

// Surface area of the unit sphere S^{m-1} in R^m.
inline double unit_sphere_area(int m) { return m * unit_ball_volume(m); }

}  // namespace hmlab

#endif  // HMLAB_CORE_HPP
