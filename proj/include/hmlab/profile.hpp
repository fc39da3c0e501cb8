#ifndef HMLAB_PROFILE_HPP
#define HMLAB_PROFILE_HPP

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "hmlab/core.hpp"

namespace hmlab {

// Warping profile f(s) of a surface of revolution / radially symmetric
// metric ds^2 + f(s)^2 dOmega^2. Tip profiles have f(0)=0, f'(0)=1 and live
// on [0, s_max]; cylinder-type profiles have f>0 and live on [-s_max, s_max].
struct Profile {
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> df;
  std::function<double(double)> ddf;
  bool tip = true;

  // Height function z(s) of the embedding, z' = sqrt(1 - f'^2) clamped.
  double height(double s) const {
    if (name == "capped_cylinder") {
      const double sc = kPi / 2.0;
      return s <= sc ? 1.0 - std::cos(s) : 1.0 + (s - sc);
    }
    // generic cumulative quadrature (midpoint, fine step)
    const int n = 512;
    const double lo = tip ? 0.0 : 0.0;
    const double hstep = (s - lo) / n;
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
      const double sm = lo + (i + 0.5) * hstep;
      const double fp = df(sm);
      z += std::sqrt(std::max(0.0, 1.0 - fp * fp)) * hstep;
    }
    return z;
  }

  // integral of f^p over [0, b] (tip cap volumes), composite Simpson
  double int_fp(double b, int p) const {
    const int n = 256;
    const double hstep = b / n;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double a0 = i * hstep, a1 = (i + 1) * hstep, am = 0.5 * (a0 + a1);
      s += hstep / 6.0 *
           (std::pow(f(a0), p) + 4.0 * std::pow(f(am), p) + std::pow(f(a1), p));
    }
    return s;
  }
};

inline Profile make_profile(const std::string& name, double param = 1.0) {
  Profile p;
  p.name = name;
  if (name == "capped_cylinder") {
    // C^{1,1}: unit-curvature spherical cap glued to a flat cylinder.
    const double sc = kPi / 2.0;
    p.f = [sc](double s) { return s < sc ? std::sin(s) : 1.0; };
    p.df = [sc](double s) { return s < sc ? std::cos(s) : 0.0; };
    p.ddf = [sc](double s) { return s < sc ? -std::sin(s) : 0.0; };
    p.tip = true;
  } else if (name == "flat") {
    p.f = [](double s) { return s; };
    p.df = [](double) { return 1.0; };
    p.ddf = [](double) { return 0.0; };
    p.tip = true;
  } else if (name == "cone") {
    const double a = param;
    p.f = [a](double s) { return a * s; };
    p.df = [a](double) { return a; };
    p.ddf = [](double) { return 0.0; };
    p.tip = true;
  } else if (name == "cylinder") {
    p.f = [](double) { return 1.0; };
    p.df = [](double) { return 0.0; };
    p.ddf = [](double) { return 0.0; };
    p.tip = false;
  } else if (name == "cosh_saddle") {
    // K = -1 everywhere: negative-curvature control.
    p.f = [](double s) { return std::cosh(s); };
    p.df = [](double s) { return std::sinh(s); };
    p.ddf = [](double s) { return std::cosh(s); };
    p.tip = false;
  } else {
    throw NumericalFault("unknown profile: " + name);
  }
  return p;
}

// Two-column ascii file (s, f(s)); derivatives by centered differences.
inline Profile load_profile_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NumericalFault("cannot open profile file: " + path);
  std::vector<double> ss, ff;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double s, f;
    if (ls >> s >> f) {
      ss.push_back(s);
      ff.push_back(f);
    }
  }
  if (ss.size() < 4) throw NumericalFault("profile file too short: " + path);
  auto interp = [ss, ff](double s) {
    if (s <= ss.front()) return ff.front();
    if (s >= ss.back()) return ff.back();
    size_t lo = 0, hi = ss.size() - 1;
    while (hi - lo > 1) {
      size_t mid = (lo + hi) / 2;
      (ss[mid] <= s ? lo : hi) = mid;
    }
    const double t = (s - ss[lo]) / (ss[lo + 1] - ss[lo]);
    return (1.0 - t) * ff[lo] + t * ff[lo + 1];
  };
  Profile p;
  p.name = "file";
  p.tip = std::abs(ff.front()) < 1e-12;
  const double dstep = (ss.back() - ss.front()) / (double)(ss.size() - 1);
  p.f = interp;
  p.df = [interp, dstep](double s) {
    return (interp(s + dstep) - interp(s - dstep)) / (2.0 * dstep);
  };
  p.ddf = [interp, dstep](double s) {
    return (interp(s + dstep) - 2.0 * interp(s) + interp(s - dstep)) /
           (dstep * dstep);
  };
  return p;
}

// Curvature sign certificate: Gauss curvature K = -f''/f must satisfy
// K >= -kappa_tol at all interior samples. Returns the worst (largest)
// value of f''/f found.
inline double curvature_excess(const Profile& p, double s_lo, double s_hi,
                               int samples = 2048) {
  double worst = -1e300;
  for (int i = 1; i < samples; ++i) {
    const double s = s_lo + (s_hi - s_lo) * i / samples;
    const double fv = p.f(s);
    if (std::abs(fv) < 1e-9) continue;
    worst = std::max(worst, p.ddf(s) / fv);
  }
  return worst;
}

}  // namespace hmlab

#endif  // HMLAB_PROFILE_HPP
