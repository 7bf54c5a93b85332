#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "picone_lab/inequalities.hpp"
#include "picone_lab/linear_p2.hpp"

using namespace picone_lab;
using Catch::Approx;

namespace {

Grid unit_square(std::size_t n) { return build_grid({{0, 1}, {0, 1}}, {n, n}); }

// sin^2 bump supported on [a0,b0] x [a1,b1], zero outside.
ScalarField bump(const Grid& g, double a0, double b0, double a1, double b1) {
  return ScalarField::sample(g, [&](const Point& x) {
    if (x[0] <= a0 || x[0] >= b0 || x[1] <= a1 || x[1] >= b1) return 0.0;
    return std::pow(std::sin(M_PI * (x[0] - a0) / (b0 - a0)) * std::sin(M_PI * (x[1] - a1) / (b1 - a1)), 2.0);
  });
}

std::vector<ScalarField> random_bumps(const Grid& g, std::size_t count, std::uint64_t seed) {
  const Interval bx = g.bounds()[0], by = g.bounds()[1];
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ScalarField> out;
  while (out.size() < count) {
    double a0 = unit(rng), b0 = unit(rng), a1 = unit(rng), b1 = unit(rng);
    if (a0 > b0) std::swap(a0, b0);
    if (a1 > b1) std::swap(a1, b1);
    if (b0 - a0 < 0.2 || b1 - a1 < 0.2) continue;
    out.push_back(bump(g, bx.lo + a0 * bx.length(), bx.lo + b0 * bx.length(), by.lo + a1 * by.length(),
                       by.lo + b1 * by.length()));
  }
  return out;
}

}  // namespace

TEST_CASE("Caccioppoli constants are pinned") {
  const auto sub = caccioppoli_constants(2.0, 2.0, 2.0, 2.0, 3.0, SolutionKind::sub);
  CHECK(sub.grad == 4.0);
  CHECK(sub.weight == 6.0);
  const auto cor = caccioppoli_constants(3.0, 3.0, 3.0, 3.0, 0.0, SolutionKind::sub);
  CHECK(cor.grad == 27.0);
  CHECK(cor.weight == 0.0);
  const auto log = caccioppoli_constants(2.0, 2.5, 0.0, 0.0, 0.0, SolutionKind::sup);
  CHECK(log.grad == Approx(std::pow(2.5, 2.5)).epsilon(1e-15));
  const auto sup = caccioppoli_constants(3.0, 3.0, 0.5, 0.5, 2.0, SolutionKind::sup);
  CHECK(sup.grad == Approx(std::pow(3.0 / 1.5, 3.0)));
  CHECK(sup.weight == Approx(-2.0 * 3.0 / 1.5));
  CHECK_THROWS_AS(caccioppoli_constants(2.0, 2.0, 0.5, 0.5, 0.0, SolutionKind::sub), InvalidInput);
  CHECK_THROWS_AS(caccioppoli_constants(2.0, 2.0, 1.5, 1.5, 0.0, SolutionKind::sup), InvalidInput);
}

TEST_CASE("Hardy inequality with the principal eigenvalue") {
  const Grid g = unit_square(25);
  const DomainMask m = full_mask(g);
  const ExponentField p = ExponentField::constant(g, 2.5);
  const ScalarField a = ScalarField::sample(g, [](const Point& x) { return 1.0 + x[0]; });
  const auto r = minimize_principal(p, a, Frame::euclidean(2), m);
  REQUIRE(r.converged);
  const RayleighProblem rp(Frame::euclidean(2), m, p, a);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 30; ++k) {
    ScalarField u(g);
    const double e0 = 0.5 + 2.0 * unit(rng), e1 = 0.5 + 2.0 * unit(rng), ph = 6.0 * unit(rng);
    for (std::size_t i : m.interior_nodes()) {
      const Point x = g.point(i);
      u.values[i] = std::pow(std::sin(M_PI * x[0]), e0) * std::pow(std::sin(M_PI * x[1]), e1) *
                    (1.0 + 0.5 * std::sin(3.0 * x[0] + ph));
    }
    const auto rep = hardy_verify(u, p, a, 0.999 * r.lambda, Frame::euclidean(2), m);
    CHECK(rep.holds);
    CHECK(rep.lhs <= rep.rhs);
    CHECK(rep.case_label == "hardy");
  }
  CHECK(hardy_verify(r.eigenfunction, p, a, 0.999 * r.lambda, Frame::euclidean(2), m).holds);
  const auto bad = hardy_verify(r.eigenfunction, p, a, 1.05 * r.lambda, Frame::euclidean(2), m);
  CHECK_FALSE(bad.holds);
  CHECK(bad.slack < 0.0);
  ScalarField off = r.eigenfunction;
  off.values[0] = 1.0;
  CHECK_THROWS_AS(hardy_verify(off, p, a, r.lambda, Frame::euclidean(2), m), InvalidInput);
}

TEST_CASE("sub-solution Caccioppoli with the p = q = 2 eigenfunction") {
  const Grid g = unit_square(33);
  const DomainMask m = full_mask(g);
  const ExponentField two = ExponentField::constant(g, 2.0);
  const ScalarField one(g, 1.0);
  const auto r = minimize_principal(two, one, Frame::euclidean(2), m);
  REQUIRE(r.converged);
  for (const ScalarField& phi : random_bumps(g, 20, 3)) {
    const auto rep = caccioppoli_verify(r.eigenfunction, phi, two, two, r.lambda, one, Frame::euclidean(2), m,
                                        SolutionKind::sub);
    CHECK(rep.holds);
    CHECK(rep.constant_used == 4.0);
    CHECK(rep.case_label == "caccioppoli_sub");
  }
}

TEST_CASE("harmonic functions satisfy the classical Caccioppoli estimate") {
  const Grid g = unit_square(33);
  const DomainMask m = full_mask(g);
  const ExponentField two = ExponentField::constant(g, 2.0);
  const ScalarField zero(g, 0.0);
  const auto boundary = ScalarField::sample(g, [](const Point& x) { return 2.0 + x[0] * x[0] - x[1] + std::sin(3.0 * x[1]); });
  const ScalarField v = solve_p2_dirichlet(CornerGradient(Frame::euclidean(2), m), zero, boundary);
  const ScalarField L = p_sub_laplacian(Frame::euclidean(2), v, two, m);
  for (std::size_t i : m.interior_nodes()) CHECK(std::abs(L.values[i]) <= 1e-9);
  for (const ScalarField& phi : random_bumps(g, 20, 7)) {
    const auto rep = caccioppoli_verify(v, phi, two, two, 0.0, zero, Frame::euclidean(2), m, SolutionKind::sub);
    CHECK(rep.holds);
    CHECK(rep.constant_used == 4.0);
  }
}

TEST_CASE("log-Caccioppoli with the torsion function") {
  const Grid g = unit_square(33);
  const DomainMask m = full_mask(g);
  const ExponentField two = ExponentField::constant(g, 2.0);
  const ScalarField zero(g, 0.0);
  const ScalarField v = solve_p2_dirichlet(CornerGradient(Frame::euclidean(2), m), ScalarField(g, 1.0), zero);
  for (const ScalarField& phi : random_bumps(g, 10, 9)) {
    const auto rep = log_caccioppoli_verify(v, phi, two, Frame::euclidean(2), m, 0.0, zero);
    CHECK(rep.holds);
    CHECK(rep.constant_used == 4.0);
    CHECK(rep.case_label == "log_caccioppoli");
    const auto q0 = caccioppoli_verify(v, phi, two, zero, 0.0, zero, Frame::euclidean(2), m, SolutionKind::sup);
    CHECK(q0.lhs == Approx(rep.lhs).epsilon(1e-12));
    CHECK(q0.rhs == Approx(rep.rhs).epsilon(1e-12));
    CHECK(q0.constant_used == rep.constant_used);
  }
  const auto flat = log_caccioppoli_verify(ScalarField(g, 1.0), bump(g, 0.2, 0.8, 0.2, 0.8), two, Frame::euclidean(2), m,
                                           0.0, zero);
  CHECK(flat.lhs == 0.0);
  CHECK(flat.holds);
}

TEST_CASE("variable-exponent grushin log-Caccioppoli") {
  const Grid g = build_grid({{-1, 1}, {0, 1}}, {33, 33});
  const DomainMask m = full_mask(g);
  const ExponentField p(ScalarField::sample(g, [](const Point& x) { return 2.0 + 0.5 * x[1]; }), m);
  const ScalarField zero(g, 0.0);
  const auto v = ScalarField::sample(g, [](const Point& x) { return 0.1 + std::cos(M_PI * x[0] / 2.0); });
  for (const ScalarField& phi : random_bumps(g, 5, 13)) {
    const auto rep = log_caccioppoli_verify(v, phi, p, Frame::grushin(), m, 0.0, zero);
    CHECK(rep.holds);
    CHECK(rep.constant_used == Approx(std::pow(2.5, 2.5)).epsilon(1e-15));
  }
}

TEST_CASE("shifted variable-exponent eigenfunction is rejected as superharmonic") {
  const Grid g = build_grid({{-1, 1}, {0, 1}}, {33, 33});
  const DomainMask m = full_mask(g);
  const ExponentField p(ScalarField::sample(g, [](const Point& x) { return 2.0 + 0.5 * x[1]; }), m);
  const auto r = minimize_principal(p, ScalarField(g, 1.0), Frame::grushin(), m);
  REQUIRE(r.converged);
  ScalarField v = r.eigenfunction;
  for (double& x : v.values) x += 0.1;
  CHECK_THROWS_AS(log_caccioppoli_verify(v, bump(g, -0.5, 0.5, 0.2, 0.8), p, Frame::grushin(), m, 0.0, ScalarField(g, 0.0)),
                  InvalidInput);
}

TEST_CASE("hypothesis failures are reported") {
  const Grid g = unit_square(17);
  const DomainMask m = full_mask(g);
  const ExponentField two = ExponentField::constant(g, 2.0);
  const ScalarField zero(g, 0.0);
  const ScalarField phi = bump(g, 0.25, 0.75, 0.25, 0.75);
  // A concave bump is superharmonic, not subharmonic.
  const auto cap = ScalarField::sample(g, [](const Point& x) { return 2.0 - x[0] * x[0] - x[1] * x[1]; });
  CHECK_THROWS_AS(caccioppoli_verify(cap, phi, two, two, 0.0, zero, Frame::euclidean(2), m, SolutionKind::sub),
                  InvalidInput);
  const auto cup = ScalarField::sample(g, [](const Point& x) { return 1.0 + x[0] * x[0] + x[1] * x[1]; });
  CHECK_THROWS_AS(log_caccioppoli_verify(cup, phi, two, Frame::euclidean(2), m, 0.0, zero), InvalidInput);
  // Orthogonality: v = x with p depending on x.
  const ExponentField px(ScalarField::sample(g, [](const Point& x) { return 2.0 + 0.1 * x[0]; }), m);
  const auto lin = ScalarField::sample(g, [](const Point& x) { return 1.0 + x[0]; });
  CHECK_THROWS_AS(caccioppoli_verify(lin, phi, px, px, 0.0, zero, Frame::euclidean(2), m, SolutionKind::sub),
                  InvalidInput);
  // phi must vanish off the interior and be nonnegative.
  CHECK_THROWS_AS(caccioppoli_verify(lin, ScalarField(g, 1.0), two, two, 0.0, zero, Frame::euclidean(2), m,
                                     SolutionKind::sub),
                  InvalidInput);
  ScalarField neg = phi;
  neg.values[g.node_index({8, 8, 0})] = -1.0;
  CHECK_THROWS_AS(log_caccioppoli_verify(ScalarField(g, 1.0), neg, two, Frame::euclidean(2), m, 0.0, zero), InvalidInput);
  // v below the floor where phi > 0.
  ScalarField low(g, 1.0);
  low.values[g.node_index({8, 8, 0})] = 0.0;
  CHECK_THROWS(log_caccioppoli_verify(low, phi, two, Frame::euclidean(2), m, 0.0, zero));
}

TEST_CASE("sub-case slack is non-decreasing in lambda") {
  const Grid g = unit_square(25);
  const DomainMask m = full_mask(g);
  const ExponentField two = ExponentField::constant(g, 2.0);
  const ScalarField one(g, 1.0);
  const auto r = minimize_principal(two, one, Frame::euclidean(2), m);
  const ScalarField phi = bump(g, 0.1, 0.9, 0.2, 0.7);
  double prev = -INFINITY;
  for (double f : {1.0, 1.5, 2.0, 4.0}) {
    const auto rep = caccioppoli_verify(r.eigenfunction, phi, two, two, f * r.lambda, one, Frame::euclidean(2), m,
                                        SolutionKind::sub);
    CHECK(rep.slack >= prev);
    prev = rep.slack;
  }
}

TEST_CASE("report orientation and tolerances") {
  const Grid g = unit_square(9);
  const DomainMask m = full_mask(g);
  const ScalarField u = bump(g, 0.25, 0.75, 0.25, 0.75);
  const auto rep = hardy_verify(u, ExponentField::constant(g, 2.0), ScalarField(g, 1.0), 0.0, Frame::euclidean(2), m);
  CHECK(rep.holds);
  CHECK(rep.lhs == 0.0);
  CHECK(rep.slack == rep.rhs - rep.lhs);
  CHECK(rep.abs_tol == Approx(1e-9 * (1.0 + rep.rhs)));
  const bool by_slack = rep.slack >= -(kInequalityRelTol * std::abs(rep.rhs) + rep.abs_tol);
  CHECK(rep.holds == by_slack);
  CHECK_THROWS_AS(hardy_verify(u, ExponentField::constant(g, 2.0), ScalarField(g, 1.0), -1.0, Frame::euclidean(2), m),
                  InvalidInput);
}
