#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "picone_lab/picone.hpp"

using namespace picone_lab;
using Catch::Approx;

namespace {

const double kHalfPi = M_PI / 2.0;

Grid grushin_grid(std::size_t n = 33) { return build_grid({{-1, 1}, {0, 1}}, {n, n}); }

ScalarField positive_random(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.5, 1.5);
  const double a = unit(rng), b = unit(rng), c = unit(rng);
  return ScalarField::sample(g, [&](const Point& x) { return a + 0.3 * std::sin(b * x[0] + c * x[1]) + 0.2 * x[0] * x[1]; });
}

}  // namespace

TEST_CASE("Young inequalities on random samples") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t violations = 0;
  for (int k = 0; k < 20000; ++k) {
    const double p = 1.05 + 4.0 * unit(rng);
    const double s = 5.0 * unit(rng), t = 5.0 * unit(rng), eps = 0.01 + 3.0 * unit(rng);
    violations += young_classical(s, t, p).holds ? 0 : 1;
    violations += young_modified(s, t, eps, p).holds ? 0 : 1;
  }
  CHECK(violations == 0);
  const double p = 2.7, s = 1.3;
  const double t = std::pow(s, p - 1.0);  // s^p = t^p'
  const auto eq = young_classical(s, t, p);
  CHECK(eq.equality);
  CHECK(eq.lhs == Approx(eq.rhs).epsilon(1e-13));
  const auto eqm = young_modified(0.8, 0.4, 2.0, p);
  CHECK(eqm.equality);
  CHECK(eqm.lhs == Approx(eqm.rhs).epsilon(1e-13));
  CHECK_FALSE(young_modified(0.8, 0.5, 2.0, p).equality);
  CHECK_THROWS_AS(young_classical(1.0, 1.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(young_modified(1.0, 1.0, 0.0, 2.0), InvalidInput);
}

TEST_CASE("nonlinearities and admissibility") {
  const Grid g = build_grid({{0, 1}}, {5});
  const DomainMask m = full_mask(g);
  const ExponentField p = ExponentField::constant(g, 3.0);
  const std::vector<double> ys{0.1, 0.5, 1.0, 2.0, 10.0};
  const auto canon = admissibility_check(Nonlinearity::canonical_power(), p, m, ys);
  CHECK(canon.admissible);
  CHECK(canon.equality_everywhere);
  CHECK(admissibility_check(Nonlinearity::power_plus_power(), p, m, ys).admissible);
  const auto expo = admissibility_check(Nonlinearity::exponential(), p, m, ys);
  INFO("exponential admissible: " << expo.admissible);
  CHECK(Nonlinearity::canonical_power().f(2.0, 3.0) == Approx(4.0));
  CHECK(Nonlinearity::canonical_power().fprime(2.0, 3.0) == Approx(4.0));
  const auto tab = Nonlinearity::from_table({0.5, 1.0, 2.0}, {0.25, 1.0, 4.0}, {1.0, 2.0, 4.0});
  CHECK(tab.f(1.5, 3.0) == Approx(2.5));
  CHECK_THROWS_AS(Nonlinearity::from_table({1.0, 0.5}, {1.0, 1.0}, {1.0, 1.0}), InvalidInput);
  CHECK_THROWS_AS(admissibility_check(Nonlinearity::canonical_power(), p, m, std::vector<double>{0.0}), InvalidInput);
}

TEST_CASE("algebraic identity and decomposition on random cases") {
  std::mt19937_64 rng(33);
  const std::vector<Nonlinearity> fs{Nonlinearity::canonical_power(), Nonlinearity::power_plus_power(),
                                     Nonlinearity::exponential()};
  for (int k = 0; k < 12; ++k) {
    const bool heis = k % 4 == 3;
    const Frame frame = heis ? Frame::heisenberg() : (k % 2 ? Frame::grushin() : Frame::euclidean(2));
    const Grid g = heis ? build_grid({{-1, 1}, {-1, 1}, {-1, 1}}, {9, 9, 9}) : grushin_grid(17);
    const DomainMask m = full_mask(g);
    const ScalarField u = positive_random(g, rng), v = positive_random(g, rng);
    const ExponentField p(ScalarField::sample(g, [&](const Point& x) { return 2.0 + 0.3 * x[0] + 0.2 * x[1]; }), m);
    const auto b = picone_evaluate(u, v, p, fs[static_cast<std::size_t>(k) % 3], frame, m, PiconeMode::algebraic);
    CHECK(b.identity_residual <= 1e-12);
    CHECK(b.decomposition_residual <= 1e-12);
  }
}

TEST_CASE("nonnegativity under structural orthogonality") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Grid g = grushin_grid(33);
  const DomainMask m = full_mask(g);
  for (int k = 0; k < 10; ++k) {
    const double a = unit(rng), c = 1.2 + unit(rng);
    const auto v = ScalarField::sample(g, [&](const Point& x) { return c + std::cos(a + 2.0 * x[0]); });
    const ExponentField p(ScalarField::sample(g, [&](const Point& x) { return 1.5 + a + x[1] * x[1]; }), m);
    const ScalarField u = positive_random(g, rng);
    const auto b = picone_evaluate(u, v, p, Nonlinearity::canonical_power(), Frame::grushin(), m, PiconeMode::algebraic);
    CHECK(orthogonality_defect(Frame::grushin(), v, p, m) == 0.0);
    CHECK(b.min_L >= -1e-10);
    CHECK(b.min_L1 >= -1e-10);
    CHECK(b.min_L2 >= -1e-10);
    CHECK(b.min_L3 >= -1e-10);
    CHECK(b.max_abs_L4 <= 1e-10);
  }
}

TEST_CASE("equality characterization") {
  const Grid g = grushin_grid(33);
  const DomainMask m = full_mask(g);
  const NodalGradient op(Frame::grushin(), m);
  const auto v = ScalarField::sample(g, [](const Point& x) { return 1.5 + std::cos(kHalfPi * x[0]); });
  const ExponentField p(ScalarField::sample(g, [](const Point& x) { return 2.0 + 0.5 * x[1]; }), m);
  for (double alpha : {0.5, 1.0, 3.0}) {
    ScalarField u = v;
    for (double& x : u.values) x *= alpha;
    const auto b = picone_evaluate(u, v, p, Nonlinearity::canonical_power(), op, PiconeMode::algebraic);
    const auto eq = equality_case_detect(b, u, v, op);
    CHECK(b.equality_locus_fraction == 1.0);
    CHECK(eq.max_ratio_gradient <= 1e-10);
    CHECK(eq.consistent);

    ScalarField w = u;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = g.point(i)[0];
      w.values[i] *= 1.0 + 0.1 * x * x;
    }
    const auto bw = picone_evaluate(w, v, p, Nonlinearity::canonical_power(), op, PiconeMode::algebraic);
    const auto ew = equality_case_detect(bw, w, v, op);
    CHECK(bw.equality_locus_fraction < 1.0);
    CHECK_FALSE(ew.ratio_is_constant);
    CHECK(ew.consistent);
  }
}

TEST_CASE("constant exponent reduces to the classical identity") {
  const Grid g = build_grid({{0, 1}, {0, 1}}, {17, 17});
  const DomainMask m = full_mask(g);
  const NodalGradient op(Frame::euclidean(2), m);
  std::mt19937_64 rng(6);
  const ScalarField u = positive_random(g, rng), v = positive_random(g, rng);
  const double p = 2.5;
  const auto b = picone_evaluate(u, v, ExponentField::constant(g, p), Nonlinearity::canonical_power(), op,
                                 PiconeMode::algebraic);
  const auto gu = op.apply(u), gv = op.apply(v);
  for (std::size_t i : m.interior_nodes()) {
    const double nu = norm(gu.at(i)), nv = norm(gv.at(i)), r = u.values[i] / v.values[i];
    const double classic = std::pow(nu, p) - p * std::pow(r, p - 1.0) * std::pow(nv, p - 2.0) * dot(gv.at(i), gu.at(i)) +
                           (p - 1.0) * std::pow(r, p) * std::pow(nv, p);
    CHECK(b.L.values[i] == Approx(classic).epsilon(1e-12).margin(1e-12));
  }
}

TEST_CASE("discrete mode residual converges at second order") {
  std::vector<double> res;
  for (std::size_t n : {17, 33, 65}) {
    const Grid g = grushin_grid(n);
    const DomainMask m = full_mask(g);
    const auto u = ScalarField::sample(g, [](const Point& x) { return 1.2 + std::sin(x[0] + 2.0 * x[1]); });
    const auto v = ScalarField::sample(g, [](const Point& x) { return 1.5 + std::cos(kHalfPi * x[0]); });
    const ExponentField p(ScalarField::sample(g, [](const Point& x) { return 2.0 + 0.5 * x[1]; }), m);
    res.push_back(
        picone_evaluate(u, v, p, Nonlinearity::canonical_power(), Frame::grushin(), m, PiconeMode::discrete).identity_residual);
  }
  CHECK(std::log2(res[0] / res[1]) == Approx(2.0).margin(0.2));
  CHECK(std::log2(res[1] / res[2]) == Approx(2.0).margin(0.2));
}

TEST_CASE("picone rejects invalid fields") {
  const Grid g = grushin_grid(9);
  const DomainMask m = full_mask(g);
  const ScalarField u(g, 1.0);
  ScalarField v(g, 1.0);
  v.values[40] = 0.0;
  CHECK_THROWS_AS(picone_evaluate(u, v, ExponentField::constant(g, 2.0), Nonlinearity::canonical_power(),
                                  Frame::grushin(), m, PiconeMode::algebraic),
                  InvalidInput);
}
