#pragma once

// Variable-exponent Lebesgue machinery: modular, Luxemburg norm, the
// generalized Hoelder inequality and the norm-modular relations.

#include <algorithm>
#include <cmath>
#include <limits>

#include "picone_lab/frames.hpp"
#include "picone_lab/grid.hpp"

namespace picone_lab {

/// rho(u) = integral of |u|^p(x).
inline double modular(const ScalarField& u, const ExponentField& p, const DomainMask& mask, double scale = 1.0) {
  require_same_grid(u.grid, mask.grid(), "modular");
  require_same_grid(p.grid(), mask.grid(), "modular exponent");
  CompensatedSum s;
  for (std::size_t i : mask.domain_nodes()) {
    const double a = std::abs(u.values[i] * scale);
    if (a > 0.0) s += mask.weight(i) * std::pow(a, p[i]);
  }
  return s.value();
}

/// Luxemburg norm inf{t > 0 : rho(u/t) <= 1} by bisection on t, which is valid
/// because t -> rho(u/t) is strictly decreasing whenever u is nonzero.
/// `tol` is the relative bracket width at termination.
inline double luxemburg_norm(const ScalarField& u, const ExponentField& p, const DomainMask& mask,
                             double tol = 1e-12) {
  if (!(tol > 0.0)) throw InvalidInput("luxemburg_norm tolerance must be positive");
  require_same_grid(u.grid, mask.grid(), "luxemburg_norm");
  double umax = 0.0;
  for (std::size_t i : mask.domain_nodes()) {
    if (!std::isfinite(u.values[i])) throw InvalidInput("field has non-finite values");
    umax = std::max(umax, std::abs(u.values[i]));
  }
  if (umax == 0.0 || modular(u, p, mask) == 0.0) return 0.0;

  const auto rho_at = [&](double t) { return modular(u, p, mask, 1.0 / t); };
  double hi = umax * std::pow(mask.measure(), 1.0 / p.pminus()) + 1.0;
  double lo = hi;
  for (int k = 0; rho_at(hi) >= 1.0; ++k) {
    hi *= 2.0;
    if (k > 2000 || !std::isfinite(hi)) throw NumericError("luxemburg_norm: upper bracket overflow");
  }
  lo = std::min(lo, hi) * 0.5;
  for (int k = 0; rho_at(lo) <= 1.0; ++k) {
    lo *= 0.5;
    if (k > 2000 || lo == 0.0) throw NumericError("luxemburg_norm: lower bracket underflow");
  }
  for (int k = 0; k < 400 && hi - lo > tol * hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (rho_at(mid) > 1.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// p'(x) = p(x) / (p(x) - 1).
inline ExponentField conjugate_exponent(const ExponentField& p) {
  ScalarField q(p.grid());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double pi = p[i];
    q.values[i] = pi > 1.0 ? pi / (pi - 1.0) : 2.0;
  }
  return ExponentField(std::move(q));
}

struct HolderReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double constant = 0.0;
  bool holds = false;
};

/// int |uv| <= (1 + 1/p- - 1/p+) ||u||_p ||v||_p'.
inline HolderReport holder_check(const ScalarField& u, const ScalarField& v, const ExponentField& p,
                                 const DomainMask& mask) {
  ScalarField uv(mask.grid());
  for (std::size_t i = 0; i < uv.size(); ++i) uv.values[i] = std::abs(u.values[i] * v.values[i]);
  const ExponentField pc = conjugate_exponent(p);
  HolderReport r;
  r.constant = 1.0 + 1.0 / p.pminus() - 1.0 / p.pplus();
  r.lhs = integrate(uv, mask);
  r.rhs = r.constant * luxemburg_norm(u, p, mask) * luxemburg_norm(v, pc, mask);
  r.holds = r.lhs <= r.rhs * (1.0 + 1e-9);
  return r;
}

/// Outcome of the norm-modular relations for one field. Items 1, 2, 3 and 5
/// follow the standard numbering; item 4 (sequence convergence) is a separate
/// sequence test.
struct ModularReport {
  double modular = 0.0;
  double norm = 0.0;
  bool sign_agreement = false;  // item 1
  bool unit_ball_bounds = false;  // item 2 (vacuous when norm > 1)
  bool outside_ball_bounds = false;  // item 3 (vacuous when norm <= 1)
  bool sandwich = false;  // item 5
  [[nodiscard]] bool all_hold() const { return sign_agreement && unit_ball_bounds && outside_ball_bounds && sandwich; }
};

inline ModularReport norm_modular_relations(const ScalarField& u, const ExponentField& p, const DomainMask& mask,
                                            double slack = 1e-9) {
  ModularReport r;
  r.modular = modular(u, p, mask);
  r.norm = luxemburg_norm(u, p, mask);
  const double n = r.norm;
  const double rho = r.modular;
  const auto le = [slack](double a, double b) { return a <= b + slack * std::max(1.0, std::abs(b)); };

  const double dn = n - 1.0;
  const double dr = rho - 1.0;
  // A sign mismatch is tolerated only inside the rounding band around 1.
  r.sign_agreement = (dn > 0.0) == (dr > 0.0) || (dn == 0.0 && dr == 0.0) ||
                     std::min(std::abs(dn), std::abs(dr)) <= slack * p.pplus();
  const double lo_pow = std::pow(n, p.pminus());
  const double hi_pow = std::pow(n, p.pplus());
  r.unit_ball_bounds = n > 1.0 || (le(hi_pow, rho) && le(rho, lo_pow));
  r.outside_ball_bounds = n <= 1.0 || (le(lo_pow, rho) && le(rho, hi_pow));
  r.sandwich = le(std::min(lo_pow, hi_pow), rho) && le(rho, std::max(lo_pow, hi_pow));
  return r;
}

}  // namespace picone_lab
