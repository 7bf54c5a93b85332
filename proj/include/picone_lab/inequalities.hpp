#pragma once

// Hardy-type and Caccioppoli-type inequalities checked on discrete fields.
// Every report is oriented as lhs <= rhs.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "picone_lab/eigenproblem.hpp"
#include "picone_lab/errors.hpp"
#include "picone_lab/frames.hpp"
#include "picone_lab/grid.hpp"
#include "picone_lab/picone.hpp"
#include "picone_lab/summation.hpp"

namespace picone_lab {

constexpr double kInequalityRelTol = 1e-6;

struct InequalityReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double constant_used = 0.0;
  double slack = 0.0;
  double abs_tol = 0.0;
  bool holds = false;
  std::string case_label;
  std::string note;
};

namespace detail {

inline InequalityReport finish_report(double lhs, double rhs, double constant, double abs_tol, std::string label) {
  InequalityReport r;
  r.lhs = lhs;
  r.rhs = rhs;
  r.constant_used = constant;
  r.slack = rhs - lhs;
  r.abs_tol = abs_tol >= 0.0 ? abs_tol : 1e-9 * (1.0 + std::abs(rhs));
  r.holds = lhs <= rhs + kInequalityRelTol * std::abs(rhs) + r.abs_tol;
  r.case_label = std::move(label);
  return r;
}

inline double max_abs(const ScalarField& u, const std::vector<std::size_t>& nodes) {
  double m = 0.0;
  for (std::size_t i : nodes) m = std::max(m, std::abs(u.values[i]));
  return m;
}

// Throws unless u is (numerically) zero on boundary and exterior nodes.
inline void require_zero_off_interior(const ScalarField& u, const DomainMask& mask, const char* what) {
  double umax = 0.0;
  for (double x : u.values) {
    if (!std::isfinite(x)) throw InvalidInput(std::string(what) + " has non-finite values");
    umax = std::max(umax, std::abs(x));
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!mask.is_interior(i) && std::abs(u.values[i]) > 1e-12 * umax) {
      throw InvalidInput(std::string(what) + " must vanish on boundary and exterior nodes");
    }
  }
}

inline void require_nonnegative(const ScalarField& u, const DomainMask& mask, const char* what) {
  const double tol = 1e-12 * max_abs(u, mask.domain_nodes());
  for (std::size_t i : mask.domain_nodes()) {
    if (u.values[i] < -tol) throw InvalidInput(std::string(what) + " must be nonnegative");
  }
}

}  // namespace detail

/// Checks mu * int a |u|^p <= int |X u|^p.
inline InequalityReport hardy_verify(const ScalarField& u, const ExponentField& p, const ScalarField& a, double mu,
                                     const Frame& frame, const DomainMask& mask, double abs_tol = -1.0) {
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw InvalidInput("mu must be finite and nonnegative");
  require_same_grid(u.grid, mask.grid(), "hardy_verify field");
  detail::require_zero_off_interior(u, mask, "hardy test field");
  detail::require_nonnegative(u, mask, "hardy test field");
  const RayleighProblem rp(frame, mask, p, a);
  const Vector x = rp.index().gather(u.values);
  const double energy = rp.numerator(rp.expand(x));
  const double weighted = rp.denominator(x);
  return detail::finish_report(mu * weighted, energy, mu, abs_tol, "hardy");
}

enum class SolutionKind { sub, sup };

inline const char* to_string(SolutionKind k) { return k == SolutionKind::sub ? "sub" : "sup"; }

struct CaccioppoliConstants {
  double grad = 0.0;
  double weight = 0.0;
};

/// sub: (p+/(q- - p+ + 1))^p+ and lambda p+/(q- - p+ + 1);
/// sup: (p+/(p- - q+ - 1))^p+ and -lambda p+/(p- - q+ - 1).
inline CaccioppoliConstants caccioppoli_constants(double pminus, double pplus, double qminus, double qplus,
                                                  double lambda, SolutionKind kind) {
  if (!(pminus > 1.0) || !(pplus >= pminus) || !std::isfinite(pplus)) {
    throw InvalidInput("exponent bounds must satisfy 1 < p- <= p+ < inf");
  }
  if (!(qplus >= qminus)) throw InvalidInput("q bounds must satisfy q- <= q+");
  const double denom = kind == SolutionKind::sub ? qminus - pplus + 1.0 : pminus - qplus - 1.0;
  if (!(denom > 0.0)) {
    throw InvalidInput(kind == SolutionKind::sub ? "sub case needs q- - p+ + 1 > 0"
                                                 : "sup case needs p- - q+ - 1 > 0");
  }
  CaccioppoliConstants c;
  c.grad = std::pow(pplus / denom, pplus);
  c.weight = (kind == SolutionKind::sub ? 1.0 : -1.0) * lambda * pplus / denom;
  return c;
}

struct WeakInequalityCheck {
  bool ok = true;
  double worst = 0.0;  // most violating normalized residual
  std::size_t worst_node = npos;
};

/// Sign of r = L_p v - lambda g |v|^(p-2) v at every interior node, relative
/// to the largest absolute contribution over the interior. A sub-solution
/// needs r <= tol, a sup-solution r >= -tol.
inline WeakInequalityCheck check_weak_inequality(const CornerGradient& op, const ScalarField& v,
                                                 const ExponentField& p, double lambda, const ScalarField& g,
                                                 SolutionKind kind, double tol = 1e-6) {
  const DomainMask& mask = op.mask();
  const Grid& grid = mask.grid();
  const std::size_t N = op.components();
  const std::size_t m = grid.dim() + 1;
  std::vector<double> raw(grid.size(), 0.0);
  std::vector<double> mag(grid.size(), 0.0);
  std::array<double, kMaxDim> flux{};
  std::array<std::size_t, kMaxDim + 1> nodes{};
  std::array<double, kMaxDim*(kMaxDim + 1)> coef{};
  const std::span<double> fv(flux.data(), N);
  for (std::size_t q = 0; q < op.points(); ++q) {
    op.gradient_at(v.values, q, fv);
    const double factor = flux_factor(norm(fv), p[op.node(q)]);
    if (factor == 0.0) continue;
    for (double& c : fv) c *= factor;
    op.stencil_at(q, nodes, coef);
    for (std::size_t s = 0; s < m; ++s) {
      double t = 0.0;
      for (std::size_t k = 0; k < N; ++k) t += coef[k * m + s] * flux[k];
      raw[nodes[s]] += op.weight() * t;
      mag[nodes[s]] += op.weight() * std::abs(t);
    }
  }
  std::vector<double> residual(grid.size(), 0.0);
  double scale = 0.0;
  for (std::size_t i : mask.interior_nodes()) {
    const double vi = v.values[i];
    const double source = lambda * g.values[i] * std::pow(std::abs(vi), p[i] - 1.0) * (vi < 0.0 ? -1.0 : 1.0);
    residual[i] = raw[i] / mask.weight(i) - source;
    scale = std::max(scale, mag[i] / mask.weight(i) + std::abs(source));
  }
  WeakInequalityCheck out;
  if (scale == 0.0) return out;
  for (std::size_t i : mask.interior_nodes()) {
    const double defect = (kind == SolutionKind::sub ? residual[i] : -residual[i]) / scale;
    if (defect > out.worst) {
      out.worst = defect;
      out.worst_node = i;
    }
  }
  out.ok = out.worst <= tol;
  return out;
}

struct CaccioppoliOptions {
  double v_floor = kDefaultVFloor;
  double orthogonality_tol = 1e-12;
  double hypothesis_tol = 1e-6;
  bool require_orthogonality = true;
  double abs_tol = -1.0;
};

namespace detail {

inline std::string node_label(const Grid& g, std::size_t node) {
  if (node == npos) return "none";
  const Point x = g.point(node);
  std::string s = "node " + std::to_string(node) + " at (";
  for (std::size_t a = 0; a < g.dim(); ++a) s += (a ? ", " : "") + std::to_string(x[a]);
  return s + ")";
}

struct CaccioppoliSides {
  double lhs = 0.0;
  double grad_integral = 0.0;
  double weight_integral = 0.0;
};

// int v^q phi^p |X v / v|^p, int v^q |X phi|^p and int g v^q phi^p on the
// corner quadrature. Terms vanishing with phi are skipped.
inline CaccioppoliSides caccioppoli_sides(const CornerGradient& op, const ScalarField& v, const ScalarField& phi,
                                          const ExponentField& p, const ScalarField& q, const ScalarField& g,
                                          double v_floor) {
  const DomainMask& mask = op.mask();
  const Grid& grid = mask.grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(v.values[i]) || !std::isfinite(phi.values[i])) throw InvalidInput("non-finite field values");
  }
  // The floor applies where v is divided by (phi > 0) or raised to a negative
  // power; elsewhere v only needs to be nonnegative.
  const auto vq = [&](std::size_t i, bool divides) {
    const double vi = v.values[i];
    if ((divides || q.values[i] < 0.0) ? vi < v_floor : vi < 0.0) {
      throw InvalidInput("v below floor " + std::to_string(v_floor) + " at " + node_label(grid, i));
    }
    return std::pow(vi, q.values[i]);
  };
  std::array<double, kMaxDim> gv{};
  std::array<double, kMaxDim> gphi{};
  const std::span<double> gvs(gv.data(), op.components());
  const std::span<double> gphis(gphi.data(), op.components());
  CompensatedSum lhs;
  CompensatedSum grad;
  CompensatedSum weight;
  for (std::size_t k = 0; k < op.points(); ++k) {
    const std::size_t i = op.node(k);
    const double pi = p[i];
    op.gradient_at(phi.values, k, gphis);
    const double phi_i = phi.values[i];
    const double dphi = norm(gphis);
    if (phi_i == 0.0 && dphi == 0.0) continue;
    const double vqi = vq(i, phi_i > 0.0);
    if (dphi > 0.0) grad += op.weight() * vqi * std::pow(dphi, pi);
    if (phi_i > 0.0) {
      op.gradient_at(v.values, k, gvs);
      const double ratio = norm(gvs) / v.values[i];
      if (ratio > 0.0) lhs += op.weight() * vqi * std::pow(phi_i, pi) * std::pow(ratio, pi);
    }
  }
  for (std::size_t i : mask.domain_nodes()) {
    const double phi_i = phi.values[i];
    if (phi_i > 0.0) weight += mask.weight(i) * g.values[i] * vq(i, true) * std::pow(phi_i, p[i]);
  }
  return {lhs.value(), grad.value(), weight.value()};
}

inline void check_test_function(const ScalarField& phi, const DomainMask& mask) {
  require_same_grid(phi.grid, mask.grid(), "test function");
  require_zero_off_interior(phi, mask, "test function phi");
  require_nonnegative(phi, mask, "test function phi");
}

}  // namespace detail

/// int v^(q-p) phi^p |X v|^p <= C_grad int v^q |X phi|^p + C_weight int g v^q phi^p
/// for a positive sub-solution (q > p - 1) or sup-solution (q < p - 1).
/// q is any real exponent field (q = 0 is the logarithmic case).
inline InequalityReport caccioppoli_verify(const ScalarField& v, const ScalarField& phi, const ExponentField& p,
                                           const ScalarField& q, double lambda, const ScalarField& g,
                                           const Frame& frame, const DomainMask& mask, SolutionKind kind,
                                           const CaccioppoliOptions& opts = {}) {
  require_same_grid(v.grid, mask.grid(), "caccioppoli v");
  require_same_grid(g.grid, mask.grid(), "caccioppoli weight");
  require_same_grid(p.grid(), mask.grid(), "caccioppoli p");
  require_same_grid(q.grid, mask.grid(), "caccioppoli q");
  for (std::size_t i : mask.domain_nodes()) {
    if (!std::isfinite(q.values[i])) throw InvalidInput("q must be finite");
  }
  detail::check_test_function(phi, mask);
  for (std::size_t i : mask.domain_nodes()) {
    if (!(g.values[i] >= 0.0)) throw InvalidInput("weight g must be nonnegative");
  }
  double qminus = std::numeric_limits<double>::infinity();
  double qplus = -std::numeric_limits<double>::infinity();
  for (std::size_t i : mask.domain_nodes()) {
    qminus = std::min(qminus, q.values[i]);
    qplus = std::max(qplus, q.values[i]);
  }
  const auto c = caccioppoli_constants(p.pminus(), p.pplus(), qminus, qplus, lambda, kind);

  const CornerGradient op(frame, mask);
  const auto weak = check_weak_inequality(op, v, p, lambda, g, kind, opts.hypothesis_tol);
  if (!weak.ok) {
    throw InvalidInput(std::string("v is not a discrete ") + to_string(kind) + "-solution: defect " +
                       std::to_string(weak.worst) + " at " + detail::node_label(mask.grid(), weak.worst_node));
  }
  if (opts.require_orthogonality) {
    const NodalGradient nodal(frame, mask);
    const double dp = orthogonality_defect(nodal, v, p.field());
    const double dq = orthogonality_defect(nodal, v, q);
    if (dp > opts.orthogonality_tol) throw InvalidInput("orthogonality of X v and X p fails: " + std::to_string(dp));
    if (dq > opts.orthogonality_tol) throw InvalidInput("orthogonality of X v and X q fails: " + std::to_string(dq));
  }
  const auto sides = detail::caccioppoli_sides(op, v, phi, p, q, g, opts.v_floor);
  auto r = detail::finish_report(sides.lhs, c.grad * sides.grad_integral + c.weight * sides.weight_integral, c.grad,
                                 opts.abs_tol, std::string("caccioppoli_") + to_string(kind));
  if (kind == SolutionKind::sup) {
    r.note = "weight constant applied with the negative sign of the sup-solution statement";
  }
  return r;
}

inline InequalityReport caccioppoli_verify(const ScalarField& v, const ScalarField& phi, const ExponentField& p,
                                           const ExponentField& q, double lambda, const ScalarField& g,
                                           const Frame& frame, const DomainMask& mask, SolutionKind kind,
                                           const CaccioppoliOptions& opts = {}) {
  return caccioppoli_verify(v, phi, p, q.field(), lambda, g, frame, mask, kind, opts);
}

/// int |phi X log v|^p <= (p+/(p- - 1))^p+ int |X phi|^p - (lambda p+/(p- - 1)) int g phi^p
/// for a positive sup-solution v (superharmonic when lambda g = 0).
inline InequalityReport log_caccioppoli_verify(const ScalarField& v, const ScalarField& phi, const ExponentField& p,
                                               const Frame& frame, const DomainMask& mask, double lambda,
                                               const ScalarField& g, const CaccioppoliOptions& opts = {}) {
  require_same_grid(v.grid, mask.grid(), "log_caccioppoli v");
  require_same_grid(g.grid, mask.grid(), "log_caccioppoli weight");
  detail::check_test_function(phi, mask);
  const auto c = caccioppoli_constants(p.pminus(), p.pplus(), 0.0, 0.0, lambda, SolutionKind::sup);
  const CornerGradient op(frame, mask);
  const auto weak = check_weak_inequality(op, v, p, lambda, g, SolutionKind::sup, opts.hypothesis_tol);
  if (!weak.ok) {
    throw InvalidInput("v is not discretely superharmonic: defect " + std::to_string(weak.worst) + " at " +
                       detail::node_label(mask.grid(), weak.worst_node));
  }
  const ScalarField zero(mask.grid(), 0.0);
  const auto sides = detail::caccioppoli_sides(op, v, phi, p, zero, g, opts.v_floor);
  return detail::finish_report(sides.lhs, c.grad * sides.grad_integral + c.weight * sides.weight_integral, c.grad,
                               opts.abs_tol, "log_caccioppoli");
}

}  // namespace picone_lab
