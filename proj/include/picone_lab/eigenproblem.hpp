#pragma once

// Principal eigenvalue of the weighted Dirichlet p(x)-sub-Laplacian,
//
//   lambda = min  sum_q w_q |X u(q)|^p  /  sum_i w_i g_i |u_i|^p,
//
// over fields vanishing off the interior, by preconditioned projected descent
// on the normalization surface sum_i w_i g_i |u_i|^p = 1. The preconditioner is
// the p = 2 energy matrix of the same frame.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "picone_lab/errors.hpp"
#include "picone_lab/frames.hpp"
#include "picone_lab/grid.hpp"
#include "picone_lab/lebesgue.hpp"
#include "picone_lab/linear_p2.hpp"
#include "picone_lab/parallel.hpp"
#include "picone_lab/summation.hpp"

namespace picone_lab {

/// Numerator, denominator and their gradients for one (frame, mask, p, g).
class RayleighProblem {
 public:
  RayleighProblem(const Frame& frame, const DomainMask& mask, ExponentField p, ScalarField g)
      : op_(frame, mask), p_(std::move(p)), g_(std::move(g)), idx_(mask) {
    require_same_grid(p_.grid(), mask.grid(), "rayleigh exponent");
    require_same_grid(g_.grid, mask.grid(), "rayleigh weight");
    for (std::size_t i : mask.domain_nodes()) {
      if (!std::isfinite(g_.values[i]) || !(g_.values[i] > 0.0)) {
        throw InvalidInput("weight must be positive and finite on the domain");
      }
    }
    if (idx_.size() == 0) throw InvalidInput("mask has no interior nodes");
  }

  [[nodiscard]] const CornerGradient& op() const { return op_; }
  [[nodiscard]] const DomainMask& mask() const { return op_.mask(); }
  [[nodiscard]] const ExponentField& exponent() const { return p_; }
  [[nodiscard]] const ScalarField& weight() const { return g_; }
  [[nodiscard]] const InteriorIndex& index() const { return idx_; }

  /// Full-lattice field equal to x on the interior and zero elsewhere.
  [[nodiscard]] std::vector<double> expand(const Vector& x) const {
    std::vector<double> u(mask().grid().size(), 0.0);
    for (std::size_t k = 0; k < idx_.size(); ++k) u[idx_.nodes[k]] = x[static_cast<Eigen::Index>(k)];
    return u;
  }

  [[nodiscard]] double numerator(const std::vector<double>& u) const {
    CompensatedSum s;
    std::array<double, kMaxDim> gq{};
    const std::span<double> view(gq.data(), op_.components());
    for (std::size_t q = 0; q < op_.points(); ++q) {
      op_.gradient_at(u, q, view);
      const double m = norm(view);
      if (m > 0.0) s += op_.weight() * std::pow(m, p_[op_.node(q)]);
    }
    return s.value();
  }

  [[nodiscard]] double denominator(const Vector& x) const {
    CompensatedSum s;
    for (std::size_t k = 0; k < idx_.size(); ++k) {
      const std::size_t i = idx_.nodes[k];
      const double a = std::abs(x[static_cast<Eigen::Index>(k)]);
      if (a > 0.0) s += mask().weight(i) * g_.values[i] * std::pow(a, p_[i]);
    }
    return s.value();
  }

  /// d(numerator)/du at the interior unknowns.
  [[nodiscard]] Vector numerator_gradient(const std::vector<double>& u) const {
    std::vector<double> acc(u.size(), 0.0);
    std::array<double, kMaxDim> gq{};
    const std::span<double> view(gq.data(), op_.components());
    for (std::size_t q = 0; q < op_.points(); ++q) {
      op_.gradient_at(u, q, view);
      const double pq = p_[op_.node(q)];
      const double factor = pq * flux_factor(norm(view), pq);
      if (factor == 0.0) continue;
      for (double& c : view) c *= factor;
      op_.accumulate_transpose(q, view, op_.weight(), acc);
    }
    return idx_.gather(acc);
  }

  /// numerator(u + du) - numerator(u), evaluated term by term without
  /// cancellation so that it stays accurate when far below numerator(u).
  [[nodiscard]] double numerator_change(const std::vector<double>& u, const std::vector<double>& du) const {
    CompensatedSum s;
    std::array<double, kMaxDim> a{};
    std::array<double, kMaxDim> d{};
    const std::span<double> av(a.data(), op_.components());
    const std::span<double> dv(d.data(), op_.components());
    for (std::size_t q = 0; q < op_.points(); ++q) {
      op_.gradient_at(du, q, dv);
      if (norm(dv) == 0.0) continue;
      op_.gradient_at(u, q, av);
      double t = 0.0;
      for (std::size_t k = 0; k < av.size(); ++k) t += d[k] * (2.0 * a[k] + d[k]);
      s += op_.weight() * power_change(dot(av, av), t, p_[op_.node(q)]);
    }
    return s.value();
  }

  [[nodiscard]] double denominator_change(const Vector& x, const Vector& dx) const {
    CompensatedSum s;
    for (std::size_t k = 0; k < idx_.size(); ++k) {
      const auto e = static_cast<Eigen::Index>(k);
      if (dx[e] == 0.0) continue;
      const std::size_t i = idx_.nodes[k];
      s += mask().weight(i) * g_.values[i] * power_change(x[e] * x[e], dx[e] * (2.0 * x[e] + dx[e]), p_[i]);
    }
    return s.value();
  }

  [[nodiscard]] Vector denominator_gradient(const Vector& x) const {
    Vector d(idx_.rows());
    for (std::size_t k = 0; k < idx_.size(); ++k) {
      const std::size_t i = idx_.nodes[k];
      const double v = x[static_cast<Eigen::Index>(k)];
      const double a = std::abs(v);
      d[static_cast<Eigen::Index>(k)] =
          a > 0.0 ? mask().weight(i) * g_.values[i] * p_[i] * std::pow(a, p_[i] - 1.0) * (v > 0.0 ? 1.0 : -1.0) : 0.0;
    }
    return d;
  }

 private:
  // (s2 + t)^(p/2) - s2^(p/2).
  static double power_change(double s2, double t, double p) {
    if (s2 == 0.0) return std::pow(std::max(s2 + t, 0.0), 0.5 * p);
    return std::pow(s2, 0.5 * p) * std::expm1(0.5 * p * std::log1p(t / s2));
  }

  CornerGradient op_;
  ExponentField p_;
  ScalarField g_;
  InteriorIndex idx_;
};

namespace detail {

inline Vector restrict_interior(const RayleighProblem& rp, const ScalarField& u) {
  require_same_grid(u.grid, rp.mask().grid(), "rayleigh field");
  Vector x = rp.index().gather(u.values);
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (!std::isfinite(x[k])) throw InvalidInput("field has non-finite values");
  }
  return x;
}

}  // namespace detail

/// Discrete Rayleigh quotient; values of u off the interior are ignored
/// (treated as zero).
inline double rayleigh_quotient(const RayleighProblem& rp, const ScalarField& u) {
  const Vector x = detail::restrict_interior(rp, u);
  const double den = rp.denominator(x);
  if (!(den > 0.0)) throw InvalidInput("rayleigh_quotient: u vanishes on the interior");
  return rp.numerator(rp.expand(x)) / den;
}

inline double rayleigh_quotient(const ScalarField& u, const ExponentField& p, const ScalarField& g,
                                const Frame& frame, const DomainMask& mask) {
  return rayleigh_quotient(RayleighProblem(frame, mask, p, g), u);
}

/// dQ/du_i at interior nodes (zero elsewhere).
inline ScalarField quotient_gradient(const RayleighProblem& rp, const ScalarField& u) {
  const Vector x = detail::restrict_interior(rp, u);
  const double den = rp.denominator(x);
  if (!(den > 0.0)) throw InvalidInput("quotient_gradient: u vanishes on the interior");
  const std::vector<double> full = rp.expand(x);
  const double Q = rp.numerator(full) / den;
  const Vector grad = (rp.numerator_gradient(full) - Q * rp.denominator_gradient(x)) / den;
  return rp.index().scatter(grad, rp.mask().grid());
}

inline ScalarField quotient_gradient(const ScalarField& u, const ExponentField& p, const ScalarField& g,
                                     const Frame& frame, const DomainMask& mask) {
  return quotient_gradient(RayleighProblem(frame, mask, p, g), u);
}

enum class InitKind { bump, random_positive, field };

struct SolverOptions {
  InitKind init = InitKind::bump;
  std::optional<ScalarField> init_field;
  std::uint64_t seed = 0;
  double grad_tol = 1e-8;
  std::size_t max_iter = 20000;
};

struct EigenResult {
  double lambda = 0.0;
  ScalarField eigenfunction;
  std::size_t iterations = 0;
  double residual = 0.0;
  std::vector<double> quotient_history;
  bool converged = false;
  bool small_lambda = false;
  std::string status;
};

namespace detail {

// Product over axes of sin(pi t) in normalized box coordinates: positive on
// the interior of any box-shaped domain.
inline Vector bump_start(const RayleighProblem& rp) {
  const DomainMask& mask = rp.mask();
  const Grid& g = mask.grid();
  std::array<double, kMaxDim> lo{};
  std::array<double, kMaxDim> hi{};
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (std::size_t i : mask.domain_nodes()) {
    const Point x = g.point(i);
    for (std::size_t a = 0; a < g.dim(); ++a) {
      lo[a] = std::min(lo[a], x[a]);
      hi[a] = std::max(hi[a], x[a]);
    }
  }
  const InteriorIndex& idx = rp.index();
  Vector v(idx.rows());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Point x = g.point(idx.nodes[k]);
    double s = 1.0;
    for (std::size_t a = 0; a < g.dim(); ++a) {
      const double t = (x[a] - lo[a]) / (hi[a] - lo[a]);
      s *= std::max(std::sin(M_PI * t), 1e-3);
    }
    v[static_cast<Eigen::Index>(k)] = s;
  }
  return v;
}

inline Vector random_start(const RayleighProblem& rp, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.05, 1.0);
  Vector v(rp.index().rows());
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = dist(rng);
  return v;
}

// Scales x so that the denominator equals 1. For constant p this is closed
// form; otherwise s -> D(s x) is increasing and the root lies in the bracket
// between D^(-1/p-) and D^(-1/p+).
inline double normalize(const RayleighProblem& rp, Vector& x) {
  const double D = rp.denominator(x);
  if (!(D > 0.0) || !std::isfinite(D)) throw NumericError("cannot normalize a vanishing field");
  const ExponentField& p = rp.exponent();
  double s = 0.0;
  if (p.is_constant()) {
    s = std::pow(D, -1.0 / p.pminus());
  } else {
    double lo = std::pow(D, -1.0 / p.pminus());
    double hi = std::pow(D, -1.0 / p.pplus());
    if (lo > hi) std::swap(lo, hi);
    for (int k = 0; k < 200 && hi - lo > 1e-16 * hi; ++k) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      Vector y = mid * x;
      (rp.denominator(y) > 1.0 ? hi : lo) = mid;
    }
    s = 0.5 * (lo + hi);
  }
  x *= s;
  return s;
}

struct ProjectedStep {
  Vector dx;
  double dN = 0.0;
  double dD = 0.0;
  bool valid = false;
};

// Increment from x (denominator D0) to s * max(x + alpha d, 0), with s chosen
// so that the denominator stays at D0, plus the resulting changes of the
// numerator and denominator. Increments are formed directly rather than as
// differences of iterates.
inline ProjectedStep projected_step(const RayleighProblem& rp, const Vector& x, const std::vector<double>& xfull,
                                    const Vector& d, double alpha, double D0) {
  ProjectedStep st;
  const Eigen::Index n = x.size();
  Vector y(n);
  Vector dy(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double t = x[k] + alpha * d[k];
    if (t > 0.0) {
      y[k] = t;
      dy[k] = alpha * d[k];
    } else {
      y[k] = 0.0;
      dy[k] = -x[k];
    }
  }
  if (!(y.maxCoeff() > 0.0)) return st;
  const double rel = rp.denominator_change(x, dy) / D0;
  if (!(rel > -1.0) || !std::isfinite(rel)) return st;
  const ExponentField& p = rp.exponent();
  double sigma = 0.0;
  if (p.is_constant()) {
    sigma = std::expm1(-std::log1p(rel) / p.pminus());
  } else {
    double lo = std::expm1(-std::log1p(rel) / p.pminus());
    double hi = std::expm1(-std::log1p(rel) / p.pplus());
    if (lo > hi) std::swap(lo, hi);
    for (int k = 0; k < 200; ++k) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (rp.denominator_change(x, dy + mid * y) > 0.0 ? hi : lo) = mid;
    }
    sigma = 0.5 * (lo + hi);
  }
  st.dx = dy + sigma * y;
  st.dD = rp.denominator_change(x, st.dx);
  st.dN = rp.numerator_change(xfull, rp.expand(st.dx));
  st.valid = std::isfinite(st.dN) && std::isfinite(st.dD);
  return st;
}

}  // namespace detail

/// Minimizes the Rayleigh quotient over nonnegative interior fields. The
/// returned eigenfunction satisfies sum_i w_i g_i u_i^p = 1.
inline EigenResult minimize_principal(const RayleighProblem& rp, const SolverOptions& opts = {}) {
  if (!(opts.grad_tol > 0.0)) throw InvalidInput("grad_tol must be positive");
  if (opts.max_iter == 0) throw InvalidInput("max_iter must be positive");
  const InteriorIndex& idx = rp.index();
  const Grid& grid = rp.mask().grid();

  Vector x;
  switch (opts.init) {
    case InitKind::bump:
      x = detail::bump_start(rp);
      break;
    case InitKind::random_positive:
      x = detail::random_start(rp, opts.seed);
      break;
    case InitKind::field:
      if (!opts.init_field) throw InvalidInput("init field missing");
      x = detail::restrict_interior(rp, *opts.init_field).cwiseMax(0.0);
      break;
  }
  if (!(x.maxCoeff() > 0.0)) throw InvalidInput("initial field must be positive somewhere on the interior");
  x = x.cwiseMax(0.0);
  detail::normalize(rp, x);

  Factorization precond;
  factorize(precond, interior_block(assemble_energy_matrix(rp.op()), idx), "minimize_principal");

  EigenResult res;
  std::vector<double> full = rp.expand(x);
  double N = rp.numerator(full);
  double D = rp.denominator(x);
  // The history is advanced by the accurately computed change of each
  // accepted step, so it is non-increasing by construction.
  double Qtrack = N / D;
  res.quotient_history.push_back(Qtrack);
  double alpha = 1.0;
  constexpr double kArmijo = 1e-4;
  constexpr double kAlphaMax = 64.0;
  const double eps = std::numeric_limits<double>::epsilon();

  for (std::size_t it = 0;; ++it) {
    const double Q = N / D;
    const Vector gD = rp.denominator_gradient(x);
    const Vector r = (rp.numerator_gradient(full) - Q * gD) / D;
    const Vector z = precond.solve(r);
    const Vector y = precond.solve(gD);
    const double beta = gD.dot(z) / gD.dot(y);
    const Vector rT = r - beta * gD;
    Vector d = -(z - beta * y);

    // Stationarity residual, ignoring active bounds (u = 0 with an outward
    // gradient).
    double rmax = 0.0;
    double scale = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto e = static_cast<Eigen::Index>(k);
      const std::size_t i = idx.nodes[k];
      scale = std::max(scale, rp.weight().values[i] * rp.exponent()[i] *
                                  std::pow(std::abs(x[e]), rp.exponent()[i] - 1.0));
      if (x[e] == 0.0 && rT[e] >= 0.0) {
        d[e] = std::max(d[e], 0.0);
        continue;
      }
      rmax = std::max(rmax, std::abs(rT[e]) / rp.mask().weight(i));
    }
    res.residual = rmax / (std::max(Q, eps) * scale);
    res.iterations = it;
    if (res.residual <= opts.grad_tol) {
      res.converged = true;
      res.status = "converged";
      break;
    }
    if (it >= opts.max_iter) {
      res.status = "max_iter";
      break;
    }

    const double pred = -r.dot(d);
    if (!(pred > 0.0)) {
      res.status = "stalled";
      break;
    }
    bool accepted = false;
    for (int bt = 0; bt < 80; ++bt, alpha *= 0.5) {
      auto st = detail::projected_step(rp, x, full, d, alpha, D);
      if (!st.valid) continue;
      const auto change = [&](const detail::ProjectedStep& s) { return (s.dN * D - N * s.dD) / (D * (D + s.dD)); };
      double dQ = change(st);
      const bool armijo = dQ <= -kArmijo * alpha * pred;
      // Once the predicted decrease is at rounding level, any non-increase is
      // accepted so that the residual test can still be reached.
      const bool rounding = alpha * pred <= 64.0 * eps * Q && dQ <= 0.0;
      if (!armijo && !rounding) continue;
      if (armijo) {
        // One refinement at the minimizer of the quadratic through
        // (0, 0), slope -pred, and (alpha, dQ).
        const double curv = dQ + pred * alpha;
        if (curv > 0.0) {
          const double astar = std::min(kAlphaMax, 0.5 * pred * alpha * alpha / curv);
          if (std::abs(astar - alpha) > 0.1 * alpha) {
            auto st2 = detail::projected_step(rp, x, full, d, astar, D);
            if (st2.valid && change(st2) < dQ) {
              st = std::move(st2);
              dQ = change(st);
              alpha = astar;
            }
          }
        }
      }
      x += st.dx;
      full = rp.expand(x);
      N = rp.numerator(full);
      D = rp.denominator(x);
      Qtrack += dQ;
      accepted = true;
      break;
    }
    if (!accepted) {
      res.status = "line_search_failed";
      break;
    }
    res.quotient_history.push_back(Qtrack);
  }

  res.lambda = N / D;
  res.eigenfunction = idx.scatter(x, grid);
  res.small_lambda = res.lambda < 1e-6;
  return res;
}
inline EigenResult minimize_principal(const ExponentField& p, const ScalarField& g, const Frame& frame,
                                      const DomainMask& mask, const SolverOptions& opts = {}) {
  return minimize_principal(RayleighProblem(frame, mask, p, g), opts);
}

/// L_p u - lambda g |u|^(p-2) u at interior nodes (zero elsewhere).
inline ScalarField weak_residual(const RayleighProblem& rp, const ScalarField& u, double lambda) {
  ScalarField r = p_sub_laplacian(rp.op(), u, rp.exponent());
  for (std::size_t i : rp.mask().interior_nodes()) {
    const double v = u.values[i];
    const double a = std::abs(v);
    const double pi = rp.exponent()[i];
    r.values[i] -= lambda * rp.weight().values[i] * (a > 0.0 ? std::pow(a, pi - 1.0) * (v > 0.0 ? 1.0 : -1.0) : 0.0);
  }
  return r;
}

struct MonotonicityReport {
  std::vector<double> lambdas;
  std::vector<bool> converged;
  bool strictly_decreasing = false;
  double min_relative_gap = 0.0;
};

/// Principal eigenvalues on the inner masks (listed from smallest) followed by
/// the outer mask. Each mask must contain the previous one.
inline MonotonicityReport domain_monotonicity_experiment(const ExponentField& p, const ScalarField& g,
                                                         const Frame& frame, const DomainMask& outer,
                                                         const std::vector<DomainMask>& inner,
                                                         const SolverOptions& opts = {}) {
  if (inner.empty()) throw InvalidInput("monotonicity needs at least one inner mask");
  std::vector<DomainMask> masks = inner;
  masks.push_back(outer);
  for (std::size_t k = 0; k + 1 < masks.size(); ++k) {
    require_same_grid(masks[k].grid(), masks[k + 1].grid(), "monotonicity masks");
    if (!is_nested(masks[k], masks[k + 1])) {
      throw InvalidInput("mask " + std::to_string(k) + " is not contained in mask " + std::to_string(k + 1));
    }
  }
  const auto results = parallel_map<EigenResult>(
      masks.size(), [&](std::size_t k) { return minimize_principal(p, g, frame, masks[k], opts); });
  MonotonicityReport rep;
  rep.strictly_decreasing = true;
  rep.min_relative_gap = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < results.size(); ++k) {
    rep.lambdas.push_back(results[k].lambda);
    rep.converged.push_back(results[k].converged);
    if (k > 0) {
      const double gap = (results[k - 1].lambda - results[k].lambda) / results[k - 1].lambda;
      rep.min_relative_gap = std::min(rep.min_relative_gap, gap);
      if (!(gap > 0.0)) rep.strictly_decreasing = false;
    }
  }
  return rep;
}

struct SimplicityReport {
  std::vector<double> lambdas;
  double lambda_deviation = 0.0;
  double eigenfunction_deviation = 0.0;
  bool all_converged = false;
  bool simple = false;
};

/// Restarts from independent positive random fields; compares eigenvalues and
/// Luxemburg-normalized eigenfunctions in the max norm.
inline SimplicityReport simplicity_experiment(const ExponentField& p, const ScalarField& g, const Frame& frame,
                                              const DomainMask& mask, std::size_t restarts, std::uint64_t seed,
                                              SolverOptions opts = {}, double lambda_tol = 1e-3,
                                              double field_tol = 1e-3) {
  if (restarts < 1) throw InvalidInput("simplicity needs at least one restart");
  const RayleighProblem rp(frame, mask, p, g);
  std::seed_seq seq{seed};
  std::vector<std::uint64_t> seeds(restarts);
  {
    std::vector<std::uint32_t> raw(2 * restarts);
    seq.generate(raw.begin(), raw.end());
    for (std::size_t k = 0; k < restarts; ++k) seeds[k] = (std::uint64_t{raw[2 * k]} << 32) | raw[2 * k + 1];
  }
  opts.init = InitKind::random_positive;
  const auto results = parallel_map<EigenResult>(restarts, [&](std::size_t k) {
    SolverOptions o = opts;
    o.seed = seeds[k];
    return minimize_principal(rp, o);
  });
  SimplicityReport rep;
  rep.all_converged = true;
  std::vector<ScalarField> normalized;
  for (const auto& r : results) {
    rep.lambdas.push_back(r.lambda);
    rep.all_converged = rep.all_converged && r.converged;
    ScalarField u = r.eigenfunction;
    const double n = luxemburg_norm(u, p, mask);
    for (double& v : u.values) v /= n;
    normalized.push_back(std::move(u));
  }
  const auto [lo, hi] = std::minmax_element(rep.lambdas.begin(), rep.lambdas.end());
  rep.lambda_deviation = (*hi - *lo) / *lo;
  for (std::size_t a = 0; a < normalized.size(); ++a) {
    for (std::size_t b = a + 1; b < normalized.size(); ++b) {
      for (std::size_t i = 0; i < normalized[a].size(); ++i) {
        rep.eigenfunction_deviation =
            std::max(rep.eigenfunction_deviation, std::abs(normalized[a].values[i] - normalized[b].values[i]));
      }
    }
  }
  rep.simple = rep.all_converged && rep.lambda_deviation <= lambda_tol && rep.eigenfunction_deviation <= field_tol;
  return rep;
}

/// True when u takes both signs beyond 1e-9 max|u| on the interior.
inline bool sign_change_check(const ScalarField& u, const DomainMask& mask) {
  require_same_grid(u.grid, mask.grid(), "sign_change_check");
  double umax = 0.0;
  for (std::size_t i : mask.interior_nodes()) umax = std::max(umax, std::abs(u.values[i]));
  const double tol = 1e-9 * umax;
  bool pos = false;
  bool neg = false;
  for (std::size_t i : mask.interior_nodes()) {
    pos = pos || u.values[i] > tol;
    neg = neg || u.values[i] < -tol;
  }
  return pos && neg;
}

}  // namespace picone_lab
