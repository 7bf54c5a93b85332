#pragma once

// Young inequalities, admissible nonlinearities and the generalized
// variable-exponent Picone identity L(u, v) = R(u, v) with its four-term
// splitting L = L1 + L2 + L3 + L4:
//
//   L1 = |Xu|^p + (p-1) t^(p/(p-1)) - p t |Xu|,    t = (u |Xv|)^(p-1) / f(v)
//   L2 = u^p f'(v) / f(v)^2 |Xv|^p - (p-1) t^(p/(p-1))
//   L3 = p u^(p-1) / f(v) |Xv|^(p-2) (|Xv||Xu| - Xv.Xu)
//   L4 = -u^p ln(u) / f(v) |Xv|^(p-2) Xv.Xp
//
// L1 >= 0 is Young's inequality, L2 >= 0 is the admissibility of f, L3 >= 0
// is Cauchy-Schwarz, and L4 vanishes when Xv.Xp = 0.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "picone_lab/frames.hpp"
#include "picone_lab/grid.hpp"

namespace picone_lab {

struct YoungResult {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  bool equality = false;
};

/// s t <= s^p / p + t^p' / p', equality iff s^p = t^p'.
inline YoungResult young_classical(double s, double t, double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw InvalidInput("Young exponent must satisfy p > 1");
  if (!(s >= 0.0) || !(t >= 0.0)) throw InvalidInput("Young arguments must be nonnegative");
  const double pc = p / (p - 1.0);
  const double sp = std::pow(s, p);
  const double tq = std::pow(t, pc);
  YoungResult r;
  r.lhs = s * t;
  r.rhs = sp / p + tq / pc;
  r.holds = r.lhs <= r.rhs + 1e-12 * r.rhs;
  r.equality = std::abs(sp - tq) <= 1e-9 * std::max(1.0, sp);
  return r;
}

/// Phi Psi^(p-1) <= Phi^p / (p eps^(p-1)) + (p-1)/p eps Psi^p, equality iff
/// Phi = eps Psi.
inline YoungResult young_modified(double Phi, double Psi, double eps, double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw InvalidInput("Young exponent must satisfy p > 1");
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidInput("Young weight must be positive");
  if (!(Phi >= 0.0) || !(Psi >= 0.0)) throw InvalidInput("Young arguments must be nonnegative");
  YoungResult r;
  r.lhs = Phi * std::pow(Psi, p - 1.0);
  r.rhs = std::pow(Phi, p) / (p * std::pow(eps, p - 1.0)) + (p - 1.0) / p * eps * std::pow(Psi, p);
  r.holds = r.lhs <= r.rhs + 1e-12 * r.rhs;
  r.equality = std::abs(Phi - eps * Psi) <= 1e-9 * std::max(1.0, Phi);
  return r;
}

/// f : (0, inf) -> (0, inf), possibly depending on the local exponent p(x).
struct Nonlinearity {
  using Fn = std::function<double(double y, double p)>;

  std::string name;
  Fn f;
  Fn fprime;
  /// True for f(y) = y^(p(x)-1), the equality case of the admissibility bound.
  bool canonical = false;

  static Nonlinearity canonical_power() {
    return {"canonical", [](double y, double p) { return std::pow(y, p - 1.0); },
            [](double y, double p) { return (p - 1.0) * std::pow(y, p - 2.0); }, true};
  }

  /// y^(p-1) + y^p.
  static Nonlinearity power_plus_power() {
    return {"power+power", [](double y, double p) { return std::pow(y, p - 1.0) + std::pow(y, p); },
            [](double y, double p) { return (p - 1.0) * std::pow(y, p - 2.0) + p * std::pow(y, p - 1.0); }, false};
  }

  static Nonlinearity exponential() {
    return {"exp", [](double y, double) { return std::exp(y); }, [](double y, double) { return std::exp(y); },
            false};
  }

  /// Piecewise-linear interpolation of tabulated (y, f, f') triples; y must be
  /// strictly increasing and queries outside the table are rejected.
  static Nonlinearity from_table(std::vector<double> y, std::vector<double> f, std::vector<double> fp) {
    if (y.size() < 2 || y.size() != f.size() || y.size() != fp.size()) {
      throw InvalidInput("nonlinearity table needs at least two rows of (y, f, f')");
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (i && !(y[i] > y[i - 1])) throw InvalidInput("nonlinearity table y values must increase");
      if (!(f[i] > 0.0)) throw InvalidInput("nonlinearity table f values must be positive");
    }
    auto ys = std::make_shared<const std::vector<double>>(std::move(y));
    const auto interp = [ys](std::shared_ptr<const std::vector<double>> vals) {
      return [ys, vals](double q, double) {
        const auto& x = *ys;
        if (q < x.front() || q > x.back()) throw InvalidInput("nonlinearity table queried outside its range");
        const auto it = std::upper_bound(x.begin(), x.end(), q);
        const std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - x.begin()), x.size() - 1);
        const std::size_t lo = hi - 1;
        const double s = (q - x[lo]) / (x[hi] - x[lo]);
        return (*vals)[lo] + s * ((*vals)[hi] - (*vals)[lo]);
      };
    };
    return {"table", interp(std::make_shared<const std::vector<double>>(std::move(f))),
            interp(std::make_shared<const std::vector<double>>(std::move(fp))), false};
  }
};

struct AdmissibilityReport {
  bool admissible = true;
  /// f' = (p-1) f^((p-2)/(p-1)) at every sample, within 1e-9 relative.
  bool equality_everywhere = true;
  std::size_t checked = 0;
  /// (node, y) pairs where f'(y) < (p(x)-1) f(y)^((p(x)-2)/(p(x)-1)).
  std::vector<std::pair<std::size_t, double>> violations;
  /// min over samples of f' - (p-1) f^((p-2)/(p-1)), relative to max(1, |bound|).
  double worst_margin = std::numeric_limits<double>::infinity();
};

inline double admissibility_bound(double f, double p) { return (p - 1.0) * std::pow(f, (p - 2.0) / (p - 1.0)); }

inline AdmissibilityReport admissibility_check(const Nonlinearity& nl, const ExponentField& p, const DomainMask& mask,
                                               std::span<const double> y_samples) {
  AdmissibilityReport r;
  for (double y : y_samples) {
    if (!(y > 0.0)) throw InvalidInput("admissibility samples must be positive");
  }
  for (std::size_t i : mask.domain_nodes()) {
    const double pi = p[i];
    for (double y : y_samples) {
      const double fy = nl.f(y, pi);
      if (!(fy > 0.0)) throw InvalidInput("nonlinearity is not positive at y = " + std::to_string(y));
      const double bound = admissibility_bound(fy, pi);
      const double scale = std::max(1.0, std::abs(bound));
      const double margin = (nl.fprime(y, pi) - bound) / scale;
      ++r.checked;
      r.worst_margin = std::min(r.worst_margin, margin);
      if (margin < -1e-12) {
        r.admissible = false;
        r.violations.emplace_back(i, y);
      }
      if (std::abs(margin) > 1e-9) r.equality_everywhere = false;
    }
  }
  return r;
}

/// Pointwise terms of the identity at one node.
struct PiconeTerms {
  double L = 0.0;
  double R = 0.0;
  double L1 = 0.0;
  double L2 = 0.0;
  double L3 = 0.0;
  double L4 = 0.0;
  /// Sum of absolute values of the four summands of L; the rounding scale.
  double magnitude = 0.0;
};

/// Evaluates L, its splitting, and R at a point. When `grad_quotient` is empty
/// R expands X(u^p / f(v)) by the chain rule from the same gradients;
/// otherwise `grad_quotient` is used as X(u^p / f(v)).
inline PiconeTerms picone_terms(double u, double v, double p, const Nonlinearity& nl, std::span<const double> gu,
                                std::span<const double> gv, std::span<const double> gp,
                                std::span<const double> grad_quotient = {}) {
  const double f = nl.f(v, p);
  const double fp = nl.fprime(v, p);
  const double gu_n = norm(gu);
  const double gv_n = norm(gv);
  const double up = u > 0.0 ? std::pow(u, p) : 0.0;
  const double upm1 = u > 0.0 ? std::pow(u, p - 1.0) : 0.0;
  // u^p ln u -> 0 as u -> 0+.
  const double uplnu = u > 0.0 ? up * std::log(u) : 0.0;
  const double a = flux_factor(gv_n, p);
  const double vdp = dot(gv, gp);
  const double vdu = dot(gv, gu);
  const double gv_p = gv_n > 0.0 ? std::pow(gv_n, p) : 0.0;
  const double gu_p = gu_n > 0.0 ? std::pow(gu_n, p) : 0.0;

  const double term1 = gu_p;
  const double term2 = -(uplnu / f) * a * vdp;
  const double term3 = -p * (upm1 / f) * a * vdu;
  const double term4 = (up * fp / (f * f)) * gv_p;

  PiconeTerms r;
  r.L = term1 + term2 + term3 + term4;
  r.magnitude = std::abs(term1) + std::abs(term2) + std::abs(term3) + std::abs(term4);

  const double t = gv_n > 0.0 ? upm1 * std::pow(gv_n, p - 1.0) / f : 0.0;
  const double t_conj = t > 0.0 ? std::pow(t, p / (p - 1.0)) : 0.0;
  r.L1 = gu_p + (p - 1.0) * t_conj - p * t * gu_n;
  r.L2 = term4 - (p - 1.0) * t_conj;
  r.L3 = p * (upm1 / f) * a * (gv_n * gu_n - vdu);
  r.L4 = term2;

  double h_dot_v = 0.0;
  if (grad_quotient.empty()) {
    for (std::size_t k = 0; k < gv.size(); ++k) {
      const double hk = (uplnu * gp[k] + p * upm1 * gu[k]) / f - up * fp * gv[k] / (f * f);
      h_dot_v += hk * gv[k];
    }
  } else {
    h_dot_v = dot(grad_quotient, gv);
  }
  r.R = gu_p - a * h_dot_v;
  return r;
}

enum class PiconeMode { algebraic, discrete };

struct PiconeBreakdown {
  ScalarField L, R, L1, L2, L3, L4;
  /// max |L - R| / (1 + max |L|) over interior nodes.
  double identity_residual = 0.0;
  /// max |L - (L1 + L2 + L3 + L4)| / (1 + magnitude) over interior nodes.
  double decomposition_residual = 0.0;
  double min_L = 0.0;
  double min_L1 = 0.0;
  double min_L2 = 0.0;
  double min_L3 = 0.0;
  double max_abs_L4 = 0.0;
  /// Fraction of interior nodes with |L| <= 1e-9 * scale.
  double equality_locus_fraction = 0.0;
  /// 1 + max pointwise magnitude of the summands of L.
  double scale = 1.0;
};

inline constexpr double kDefaultVFloor = 1e-10;

inline PiconeBreakdown picone_evaluate(const ScalarField& u, const ScalarField& v, const ExponentField& p,
                                       const Nonlinearity& nl, const NodalGradient& op, PiconeMode mode,
                                       double v_floor = kDefaultVFloor) {
  const DomainMask& mask = op.mask();
  require_same_grid(u.grid, mask.grid(), "picone u");
  require_same_grid(v.grid, mask.grid(), "picone v");
  require_same_grid(p.grid(), mask.grid(), "picone exponent");
  for (std::size_t i : mask.domain_nodes()) {
    if (!(u.values[i] >= 0.0)) throw InvalidInput("picone: u must be nonnegative (node " + std::to_string(i) + ")");
    if (!(v.values[i] >= v_floor)) {
      throw InvalidInput("picone: v below floor " + std::to_string(v_floor) + " at node " + std::to_string(i));
    }
  }
  const HorizontalField gu = op.apply(u);
  const HorizontalField gv = op.apply(v);
  const HorizontalField gp = op.apply(p.field());
  HorizontalField gq;
  if (mode == PiconeMode::discrete) {
    ScalarField quotient(mask.grid());
    for (std::size_t i : mask.domain_nodes()) {
      const double ui = u.values[i];
      quotient.values[i] = (ui > 0.0 ? std::pow(ui, p[i]) : 0.0) / nl.f(v.values[i], p[i]);
    }
    gq = op.apply(quotient);
  }

  PiconeBreakdown b;
  const Grid& g = mask.grid();
  b.L = b.R = b.L1 = b.L2 = b.L3 = b.L4 = ScalarField(g);
  std::vector<double> magnitude(g.size(), 0.0);
  double max_abs_L = 0.0;
  b.min_L = b.min_L1 = b.min_L2 = b.min_L3 = std::numeric_limits<double>::infinity();
  for (std::size_t i : mask.domain_nodes()) {
    const PiconeTerms t =
        picone_terms(u.values[i], v.values[i], p[i], nl, gu.at(i), gv.at(i), gp.at(i),
                     mode == PiconeMode::discrete ? gq.at(i) : std::span<const double>{});
    b.L[i] = t.L;
    b.R[i] = t.R;
    b.L1[i] = t.L1;
    b.L2[i] = t.L2;
    b.L3[i] = t.L3;
    b.L4[i] = t.L4;
    magnitude[i] = t.magnitude;
  }
  for (std::size_t i : mask.interior_nodes()) {
    max_abs_L = std::max(max_abs_L, std::abs(b.L[i]));
    b.scale = std::max(b.scale, 1.0 + magnitude[i]);
    b.min_L = std::min(b.min_L, b.L[i]);
    b.min_L1 = std::min(b.min_L1, b.L1[i]);
    b.min_L2 = std::min(b.min_L2, b.L2[i]);
    b.min_L3 = std::min(b.min_L3, b.L3[i]);
    b.max_abs_L4 = std::max(b.max_abs_L4, std::abs(b.L4[i]));
    const double sum = b.L1[i] + b.L2[i] + b.L3[i] + b.L4[i];
    b.decomposition_residual = std::max(b.decomposition_residual, std::abs(b.L[i] - sum) / (1.0 + magnitude[i]));
  }
  std::size_t on_locus = 0;
  double max_diff = 0.0;
  for (std::size_t i : mask.interior_nodes()) {
    max_diff = std::max(max_diff, std::abs(b.L[i] - b.R[i]));
    if (std::abs(b.L[i]) <= 1e-9 * b.scale) ++on_locus;
  }
  b.identity_residual = max_diff / (1.0 + max_abs_L);
  b.equality_locus_fraction =
      static_cast<double>(on_locus) / static_cast<double>(mask.interior_nodes().size());
  return b;
}

inline PiconeBreakdown picone_evaluate(const ScalarField& u, const ScalarField& v, const ExponentField& p,
                                       const Nonlinearity& nl, const Frame& frame, const DomainMask& mask,
                                       PiconeMode mode, double v_floor = kDefaultVFloor) {
  return picone_evaluate(u, v, p, nl, NodalGradient(frame, mask), mode, v_floor);
}

struct EqualityReport {
  /// max over interior nodes of |X(u/v)|.
  double max_ratio_gradient = 0.0;
  bool locus_is_everything = false;
  bool ratio_is_constant = false;
  /// The two sides of "L = 0 everywhere iff X(u/v) = 0" agree.
  bool consistent = false;
};

inline EqualityReport equality_case_detect(const PiconeBreakdown& b, const ScalarField& u, const ScalarField& v,
                                           const NodalGradient& op, double tol = 1e-10) {
  const DomainMask& mask = op.mask();
  ScalarField ratio(mask.grid());
  for (std::size_t i : mask.domain_nodes()) ratio.values[i] = u.values[i] / v.values[i];
  const HorizontalField gr = op.apply(ratio);
  EqualityReport r;
  for (std::size_t i : mask.interior_nodes()) r.max_ratio_gradient = std::max(r.max_ratio_gradient, norm(gr.at(i)));
  r.locus_is_everything = b.equality_locus_fraction == 1.0;
  r.ratio_is_constant = r.max_ratio_gradient <= tol;
  r.consistent = r.locus_is_everything == r.ratio_is_constant;
  return r;
}

inline EqualityReport equality_case_detect(const PiconeBreakdown& b, const ScalarField& u, const ScalarField& v,
                                           const Frame& frame, const DomainMask& mask, double tol = 1e-10) {
  return equality_case_detect(b, u, v, NodalGradient(frame, mask), tol);
}

}  // namespace picone_lab
