#ifndef HMLAB_CSR_HPP
#define HMLAB_CSR_HPP

#include <cstdint>
#include <tuple>
#include <vector>

#include "hmlab/core.hpp"

namespace hmlab {

// Compressed sparse row matrix. Rows are built from triplets; duplicate
// entries are summed.
struct Csr {
  Index n = 0;
  std::vector<Index> rowptr;
  std::vector<std::int32_t> col;
  Vec val;

  void apply(const Vec& x, Vec& y) const {
    parallel_for(n, [&](Index i) {
      double s = 0.0;
      for (Index k = rowptr[i]; k < rowptr[i + 1]; ++k)
        s += val[k] * x[static_cast<size_t>(col[k])];
      y[i] = s;
    });
  }

  Vec diagonal() const {
    Vec d(static_cast<size_t>(n), 0.0);
    for (Index i = 0; i < n; ++i)
      for (Index k = rowptr[i]; k < rowptr[i + 1]; ++k)
        if (col[k] == i) d[static_cast<size_t>(i)] += val[k];
    return d;
  }
};

struct CsrBuilder {
  Index n = 0;
  std::vector<std::tuple<Index, Index, double>> trip;

  explicit CsrBuilder(Index n_) : n(n_) {}

  void add(Index i, Index j, double v) { trip.emplace_back(i, j, v); }

  Csr build() {
    std::sort(trip.begin(), trip.end(), [](const auto& a, const auto& b) {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
      return std::get<1>(a) < std::get<1>(b);
    });
    Csr m;
    m.n = n;
    m.rowptr.assign(static_cast<size_t>(n + 1), 0);
    for (size_t k = 0; k < trip.size();) {
      size_t k2 = k;
      double s = 0.0;
      while (k2 < trip.size() && std::get<0>(trip[k2]) == std::get<0>(trip[k]) &&
             std::get<1>(trip[k2]) == std::get<1>(trip[k])) {
        s += std::get<2>(trip[k2]);
        ++k2;
      }
      m.col.push_back(static_cast<std::int32_t>(std::get<1>(trip[k])));
      m.val.push_back(s);
      m.rowptr[static_cast<size_t>(std::get<0>(trip[k])) + 1]++;
      k = k2;
    }
    for (Index i = 0; i < n; ++i) m.rowptr[static_cast<size_t>(i) + 1] += m.rowptr[static_cast<size_t>(i)];
    return m;
  }
};

struct CgResult {
  int iterations = 0;
  double rel_residual = 0.0;
  bool converged = false;
};

// Preconditioned conjugate gradients with Jacobi preconditioner. The
// operator supplies apply() and a positive diagonal; iteration order is
// fixed, so results are reproducible bit for bit.
template <typename Op>
CgResult cg_solve(const Op& op, const Vec& b, Vec& x, double tol_rel,
                  int max_iter) {
  const Index n = static_cast<Index>(b.size());
  Vec r(b.size()), z(b.size()), p(b.size()), q(b.size());

  op.apply(x, q);
  parallel_for(n, [&](Index i) { r[i] = b[i] - q[i]; });

  const Vec d = op.diag();
  const double bnorm = norm2(b);
  const double stop = tol_rel * std::max(bnorm, 1e-300);

  CgResult res;
  double rnorm = norm2(r);
  if (rnorm <= stop) {
    res.converged = true;
    res.rel_residual = rnorm / std::max(bnorm, 1e-300);
    return res;
  }

  parallel_for(n, [&](Index i) { z[i] = r[i] / d[i]; });
  p = z;
  double rho = dot(r, z);

  for (int it = 1; it <= max_iter; ++it) {
    op.apply(p, q);
    const double alpha = rho / dot(p, q);
    axpy(alpha, p, x);
    axpy(-alpha, q, r);
    rnorm = norm2(r);
    res.iterations = it;
    if (rnorm <= stop) {
      res.converged = true;
      break;
    }
    parallel_for(n, [&](Index i) { z[i] = r[i] / d[i]; });
    const double rho_new = dot(r, z);
    const double beta = rho_new / rho;
    rho = rho_new;
    xpay(z, beta, p);
  }
  res.rel_residual = rnorm / std::max(bnorm, 1e-300);
  return res;
}

}  // namespace hmlab

#endif  // HMLAB_CSR_HPP
