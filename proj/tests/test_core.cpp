#include <catch2/catch_amalgamated.hpp>

#include "hmlab/core.hpp"
#include "hmlab/csr.hpp"

using namespace hmlab;

TEST_CASE("blocked reductions match serial sums") {
  Vec a(10001), b(10001);
  for (size_t i = 0; i < a.size(); ++i) {
    a[i] = std::sin(0.1 * i);
    b[i] = std::cos(0.05 * i);
  }
  double serial = 0.0;
  for (size_t i = 0; i < a.size(); ++i) serial += a[i] * b[i];
  REQUIRE(dot(a, b) == Catch::Approx(serial).epsilon(1e-13));
}

TEST_CASE("cg solves a 1d poisson system") {
  const Index n = 200;
  CsrBuilder bld(n);
  for (Index i = 0; i < n; ++i) {
    bld.add(i, i, 2.0);
    if (i > 0) bld.add(i, i - 1, -1.0);
    if (i + 1 < n) bld.add(i, i + 1, -1.0);
  }
  const Csr A = bld.build();
  struct Op {
    const Csr* A;
    void apply(const Vec& x, Vec& y) const { A->apply(x, y); }
    Vec diag() const { return A->diagonal(); }
  } op{&A};

  Vec x_true(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) x_true[static_cast<size_t>(i)] = std::sin(0.03 * i);
  Vec b(static_cast<size_t>(n));
  A.apply(x_true, b);
  Vec x(static_cast<size_t>(n), 0.0);
  const CgResult res = cg_solve(op, b, x, 1e-12, 2000);
  REQUIRE(res.converged);
  for (Index i = 0; i < n; ++i)
    REQUIRE(x[static_cast<size_t>(i)] == Catch::Approx(x_true[static_cast<size_t>(i)]).margin(1e-9));
}

TEST_CASE("unit ball volumes") {
  REQUIRE(unit_ball_volume(2) == Catch::Approx(kPi));
  REQUIRE(unit_ball_volume(3) == Catch::Approx(4.0 * kPi / 3.0));
  REQUIRE(unit_sphere_area(2) == Catch::Approx(2.0 * kPi));
  REQUIRE(unit_sphere_area(3) == Catch::Approx(4.0 * kPi));
}

TEST_CASE("fmt17 round-trips doubles") {
  const double v = 0.1234567890123456789;
  REQUIRE(std::stod(fmt17(v)) == v);
}
