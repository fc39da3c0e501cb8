#ifndef HMLAB_PULLBACK_HPP
#define HMLAB_PULLBACK_HPP

#include <array>
#include <cmath>
#include <vector>

#include "hmlab/fields.hpp"
#include "hmlab/harmonic.hpp"

namespace hmlab {

// small dense symmetric matrices, n <= 4
struct SmallMat {
  int n = 0;
  std::array<double, 16> a{};

  double at(int i, int j) const { return a[static_cast<size_t>(i * n + j)]; }
  double& at(int i, int j) { return a[static_cast<size_t>(i * n + j)]; }

  static SmallMat identity(int n) {
    SmallMat m;
    m.n = n;
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }

  SmallMat mul(const SmallMat& o) const {
    SmallMat r;
    r.n = n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += at(i, k) * o.at(k, j);
        r.at(i, j) = s;
      }
    return r;
  }

  SmallMat transposed() const {
    SmallMat r;
    r.n = n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r.at(i, j) = at(j, i);
    return r;
  }

  double det() const {
    if (n == 1) return at(0, 0);
    if (n == 2) return at(0, 0) * at(1, 1) - at(0, 1) * at(1, 0);
    if (n == 3)
      return at(0, 0) * (at(1, 1) * at(2, 2) - at(1, 2) * at(2, 1)) -
             at(0, 1) * (at(1, 0) * at(2, 2) - at(1, 2) * at(2, 0)) +
             at(0, 2) * (at(1, 0) * at(2, 1) - at(1, 1) * at(2, 0));
    // n == 4 by cofactor expansion on the first row
    double d = 0.0;
    for (int j = 0; j < 4; ++j) {
      SmallMat m;
      m.n = 3;
      for (int r = 1, mr = 0; r < 4; ++r, ++mr)
        for (int c = 0, mc = 0; c < 4; ++c) {
          if (c == j) continue;
          m.at(mr, mc++) = at(r, c);
        }
      d += ((j % 2) ? -1.0 : 1.0) * at(0, j) * m.det();
    }
    return d;
  }

  double frob_dist(const SmallMat& o) const {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double d = at(i, j) - o.at(i, j);
        s += d * d;
      }
    return std::sqrt(s);
  }
};

// Cyclic Jacobi diagonalization of a symmetric matrix; always converges.
// Returns eigenvalues (unsorted) and the accumulated rotation with
// Q^T A Q = diag, columns of Q are eigenvectors.
inline void jacobi_eigen(const SmallMat& A, std::array<double, 4>& eval, SmallMat& Q) {
  const int n = A.n;
  SmallMat M = A;
  Q = SmallMat::identity(n);
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0, dia = 0.0;
    for (int p = 0; p < n; ++p) {
      dia += M.at(p, p) * M.at(p, p);
      for (int q = p + 1; q < n; ++q) off += M.at(p, q) * M.at(p, q);
    }
    if (off <= 1e-32 * std::max(dia, 1e-300)) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = M.at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (M.at(q, q) - M.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        const double app = M.at(p, p), aqq = M.at(q, q);
        M.at(p, q) = M.at(q, p) = 0.0;
        M.at(p, p) = app - t * apq;
        M.at(q, q) = aqq + t * apq;
        for (int r = 0; r < n; ++r) {
          if (r != p && r != q) {
            const double arp = M.at(r, p), arq = M.at(r, q);
            M.at(r, p) = M.at(p, r) = arp - s * (arq + tau * arp);
            M.at(r, q) = M.at(q, r) = arq + s * (arp - tau * arq);
          }
          const double qrp = Q.at(r, p), qrq = Q.at(r, q);
          Q.at(r, p) = qrp - s * (qrq + tau * qrp);
          Q.at(r, q) = qrq + s * (qrp - tau * qrq);
        }
      }
    }
  }
  for (int i = 0; i < n; ++i) eval[static_cast<size_t>(i)] = M.at(i, i);
}

// elementary symmetric polynomials of eigenvalues, sigma[0]=sigma_1 ...
inline std::array<double, 4> elementary_symmetric(const std::array<double, 4>& lam, int n) {
  std::array<double, 4> sig{};
  std::array<double, 5> coef{};  // prod (x + lam_i) coefficients
  coef[0] = 1.0;
  for (int i = 0; i < n; ++i)
    for (int k = i + 1; k >= 1; --k) coef[static_cast<size_t>(k)] += lam[static_cast<size_t>(i)] * coef[static_cast<size_t>(k - 1)];
  for (int k = 1; k <= n; ++k) sig[static_cast<size_t>(k - 1)] = coef[static_cast<size_t>(k)];
  return sig;
}

// ---------------------------------------------------------------------------
// Gram fields

struct GramField {
  int n = 0;
  Index cells = 0;
  std::vector<double> E;      // cells * n * n
  Vec det;                    // = |omega|^2
  Vec trace;                  // = |grad u|^2
  std::vector<Vec> sigma;     // sigma[k-1], k = 1..n
  double psd_worst = 0.0;     // most negative eigenvalue / trace seen

  double at(Index c, int i, int j) const {
    return E[static_cast<size_t>((c * n + i) * n + j)];
  }
  double& at(Index c, int i, int j) { return E[static_cast<size_t>((c * n + i) * n + j)]; }

  SmallMat cell_matrix(Index c) const {
    SmallMat m;
    m.n = n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m.at(i, j) = at(c, i, j);
    return m;
  }
};

inline GramField gram_field(const DiscreteManifold& man, const CellGeometry& geom,
                            const VectorMap& u, double psd_slack = 1e-10) {
  GramField g;
  g.n = u.n;
  g.cells = geom.n;
  g.E.assign(static_cast<size_t>(g.cells * g.n * g.n), 0.0);
  g.det.assign(static_cast<size_t>(g.cells), 0.0);
  g.trace.assign(static_cast<size_t>(g.cells), 0.0);
  g.sigma.assign(static_cast<size_t>(g.n), Vec(static_cast<size_t>(g.cells), 0.0));

  std::vector<CellField> grads;
  for (int a = 0; a < g.n; ++a) grads.push_back(gradient(man, u.comp[static_cast<size_t>(a)]));

  for (Index c = 0; c < g.cells; ++c) {
    for (int i = 0; i < g.n; ++i)
      for (int j = i; j < g.n; ++j) {
        const double e = grad_inner(geom, grads[static_cast<size_t>(i)], grads[static_cast<size_t>(j)], c);
        g.at(c, i, j) = e;
        g.at(c, j, i) = e;
      }
    SmallMat M = g.cell_matrix(c);
    std::array<double, 4> lam{};
    SmallMat Q;
    jacobi_eigen(M, lam, Q);
    double tr = 0.0, mn = 1e300;
    for (int i = 0; i < g.n; ++i) {
      tr += lam[static_cast<size_t>(i)];
      mn = std::min(mn, lam[static_cast<size_t>(i)]);
    }
    if (mn < -psd_slack * std::max(tr, 1e-30))
      throw NumericalFault("Gram matrix not PSD: min eigenvalue " + fmt17(mn));
    g.psd_worst = std::min(g.psd_worst, mn / std::max(tr, 1e-30));
    const auto sig = elementary_symmetric(lam, g.n);
    for (int k = 1; k <= g.n; ++k) g.sigma[static_cast<size_t>(k - 1)][static_cast<size_t>(c)] = sig[static_cast<size_t>(k - 1)];
    g.trace[static_cast<size_t>(c)] = tr;
    g.det[static_cast<size_t>(c)] = sig[static_cast<size_t>(g.n - 1)];
  }
  return g;
}

// ---------------------------------------------------------------------------
// linear actions

inline VectorMap transform_map(const DiscreteManifold& man, const VectorMap& u,
                               const SmallMat& A) {
  if (std::abs(A.det()) < 1e-14) throw NumericalFault("transform_map: singular matrix");
  VectorMap v;
  v.n = u.n;
  v.provenance = u.provenance;
  v.r_solve = u.r_solve;
  v.comp.assign(static_cast<size_t>(u.n), Vec(static_cast<size_t>(man.V), 0.0));
  for (int i = 0; i < u.n; ++i) {
    Vec& ci = v.comp[static_cast<size_t>(i)];
    for (int j = 0; j < u.n; ++j) {
      const double aij = A.at(i, j);
      if (aij == 0.0) continue;
      const Vec& cj = u.comp[static_cast<size_t>(j)];
      for (Index k = 0; k < man.V; ++k) ci[static_cast<size_t>(k)] += aij * cj[static_cast<size_t>(k)];
    }
  }
  v.residual_inf.assign(static_cast<size_t>(u.n), 0.0);
  for (int i = 0; i < u.n; ++i) {
    double s = 0.0;
    for (int j = 0; j < u.n; ++j)
      s += std::abs(A.at(i, j)) *
           (u.residual_inf.empty() ? 0.0 : u.residual_inf[static_cast<size_t>(j)]);
    v.residual_inf[static_cast<size_t>(i)] = s;
  }
  point_map(man, v);
  measure_growth(man, v);
  return v;
}

// ---------------------------------------------------------------------------
// averaged Gram matrices

enum class AverageMode { Ball, Heat };

inline SmallMat average_gram_ball(const CellGeometry& geom, const GramField& g,
                                  double rho) {
  SmallMat m;
  m.n = g.n;
  double den = 0.0;
  for (Index c = 0; c < g.cells; ++c) {
    if (geom.rc[static_cast<size_t>(c)] > rho) continue;
    const double vol = geom.vol[static_cast<size_t>(c)];
    den += vol;
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j) m.at(i, j) += vol * g.at(c, i, j);
  }
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) m.at(i, j) /= den;
  return m;
}

// heat-measure average: cell weight = cell volume times the mean of the
// density over the cell corners, normalized to unit mass
inline SmallMat average_gram_heat(const DiscreteManifold& man, const CellGeometry& geom,
                                  const GramField& g, const Vec& density) {
  SmallMat m;
  m.n = g.n;
  double den = 0.0;
  const unsigned corners = 1u << man.rank();
  std::vector<Index> cidx;
  for (Index c = 0; c < g.cells; ++c) {
    man.cell_decompose(c, cidx);
    double hc = 0.0;
    for (unsigned b = 0; b < corners; ++b)
      hc += density[static_cast<size_t>(man.cell_corner(cidx, b))];
    hc /= corners;
    const double wt = geom.vol[static_cast<size_t>(c)] * hc;
    den += wt;
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j) m.at(i, j) += wt * g.at(c, i, j);
  }
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) m.at(i, j) /= den;
  return m;
}

// ---------------------------------------------------------------------------
// SO(n) diagonalization with a deterministic convention: eigenvalues sorted
// descending, each eigenvector's first significant component positive, and
// a final determinant fix-up flipping the last row.

struct SoDiagonalization {
  SmallMat rotation;              // rows are eigenvectors; R * Omega * R^T diag
  std::array<double, 4> lambda{}; // descending
  double off_norm = 0.0;          // residual off-diagonal norm of R Omega R^T
};

inline SoDiagonalization so_diagonalize(const SmallMat& Omega) {
  const int n = Omega.n;
  std::array<double, 4> lam{};
  SmallMat Q;
  jacobi_eigen(Omega, lam, Q);

  std::array<int, 4> ord{};
  for (int i = 0; i < n; ++i) ord[static_cast<size_t>(i)] = i;
  std::sort(ord.begin(), ord.begin() + n,
            [&](int a, int b) { return lam[static_cast<size_t>(a)] > lam[static_cast<size_t>(b)]; });

  SoDiagonalization out;
  out.rotation.n = n;
  for (int i = 0; i < n; ++i) {
    out.lambda[static_cast<size_t>(i)] = lam[static_cast<size_t>(ord[static_cast<size_t>(i)])];
    for (int j = 0; j < n; ++j) out.rotation.at(i, j) = Q.at(j, ord[static_cast<size_t>(i)]);
  }
  // sign convention per row
  for (int i = 0; i < n; ++i) {
    double lead = 0.0;
    for (int j = 0; j < n; ++j) {
      if (std::abs(out.rotation.at(i, j)) > 1e-12) {
        lead = out.rotation.at(i, j);
        break;
      }
    }
    if (lead < 0.0)
      for (int j = 0; j < n; ++j) out.rotation.at(i, j) = -out.rotation.at(i, j);
  }
  if (out.rotation.det() < 0.0)
    for (int j = 0; j < n; ++j) out.rotation.at(n - 1, j) = -out.rotation.at(n - 1, j);

  const SmallMat D = out.rotation.mul(Omega).mul(out.rotation.transposed());
  double off = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) off += D.at(i, j) * D.at(i, j);
  out.off_norm = std::sqrt(off);
  return out;
}

inline double rotation_orthogonality_error(const SmallMat& R) {
  const SmallMat I = R.mul(R.transposed());
  return I.frob_dist(SmallMat::identity(R.n));
}

// ---------------------------------------------------------------------------
// splitting error functionals

inline double splitting_error_ball(const DiscreteManifold& man, const VectorMap& u,
                                   double rho) {
  Vec total(static_cast<size_t>(man.V), 0.0);
  for (int a = 0; a < u.n; ++a) {
    const Vec hn = hessian_norm_sq(man, u.comp[static_cast<size_t>(a)]);
    for (Index v = 0; v < man.V; ++v) total[static_cast<size_t>(v)] += hn[static_cast<size_t>(v)];
  }
  const double avg = masked_ball_average(man, total, man.interior_full, 2.0 * rho);
  return rho * rho * avg;
}

inline double heat_weighted_hessian(const DiscreteManifold& man, const VectorMap& u,
                                    const Vec& density) {
  Vec total(static_cast<size_t>(man.V), 0.0);
  for (int a = 0; a < u.n; ++a) {
    const Vec hn = hessian_norm_sq(man, u.comp[static_cast<size_t>(a)]);
    for (Index v = 0; v < man.V; ++v) total[static_cast<size_t>(v)] += hn[static_cast<size_t>(v)];
  }
  return blocked_sum(man.V, [&](Index v) {
    return man.interior_full[static_cast<size_t>(v)]
               ? man.w[static_cast<size_t>(v)] * density[static_cast<size_t>(v)] * total[static_cast<size_t>(v)]
               : 0.0;
  });
}

inline double splitting_error_heat(const DiscreteManifold& man, const VectorMap& u,
                                   const Vec& density, double t) {
  return t * heat_weighted_hessian(man, u, density);
}

}  // namespace hmlab

#endif  // HMLAB_PULLBACK_HPP
