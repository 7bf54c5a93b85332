#pragma once

// Linear (p = 2) companions of the energy: the sparse matrix of the quadratic
// form sum_q w_q |X u(q)|^2, Dirichlet solves with it, and the two smallest
// eigenpairs by inverse iteration with deflation.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "picone_lab/errors.hpp"
#include "picone_lab/frames.hpp"
#include "picone_lab/grid.hpp"

namespace picone_lab {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using Factorization = Eigen::SimplicialLDLT<SparseMatrix>;

/// Position of every interior node in the unknown vector (npos elsewhere).
struct InteriorIndex {
  std::vector<std::size_t> nodes;
  std::vector<std::size_t> slot;

  explicit InteriorIndex(const DomainMask& mask) : nodes(mask.interior_nodes()), slot(mask.grid().size(), npos) {
    for (std::size_t k = 0; k < nodes.size(); ++k) slot[nodes[k]] = k;
  }
  [[nodiscard]] std::size_t size() const { return nodes.size(); }
  [[nodiscard]] Eigen::Index rows() const { return static_cast<Eigen::Index>(nodes.size()); }

  [[nodiscard]] Vector gather(const std::vector<double>& field) const {
    Vector x(rows());
    for (std::size_t k = 0; k < size(); ++k) x[static_cast<Eigen::Index>(k)] = field[nodes[k]];
    return x;
  }
  [[nodiscard]] ScalarField scatter(const Vector& x, const Grid& g) const {
    ScalarField out(g);
    for (std::size_t k = 0; k < size(); ++k) out.values[nodes[k]] = x[static_cast<Eigen::Index>(k)];
    return out;
  }
};

/// Matrix of sum_q w_q |X u(q)|^2 over all lattice nodes.
inline SparseMatrix assemble_energy_matrix(const CornerGradient& op) {
  const Grid& g = op.mask().grid();
  const std::size_t N = op.components();
  const std::size_t m = g.dim() + 1;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(op.points() * m * m);
  std::array<std::size_t, kMaxDim + 1> nodes{};
  std::array<double, kMaxDim*(kMaxDim + 1)> coef{};
  for (std::size_t q = 0; q < op.points(); ++q) {
    op.stencil_at(q, nodes, coef);
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        double s = 0.0;
        for (std::size_t k = 0; k < N; ++k) s += coef[k * m + a] * coef[k * m + b];
        if (s != 0.0) {
          triplets.emplace_back(static_cast<Eigen::Index>(nodes[a]), static_cast<Eigen::Index>(nodes[b]),
                                op.weight() * s);
        }
      }
    }
  }
  const auto size = static_cast<Eigen::Index>(g.size());
  SparseMatrix K(size, size);
  K.setFromTriplets(triplets.begin(), triplets.end());
  return K;
}

/// Rows and columns of K restricted to the given index.
inline SparseMatrix interior_block(const SparseMatrix& K, const InteriorIndex& idx) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index col = 0; col < K.outerSize(); ++col) {
    const std::size_t cj = idx.slot[static_cast<std::size_t>(col)];
    if (cj == npos) continue;
    for (SparseMatrix::InnerIterator it(K, col); it; ++it) {
      const std::size_t ri = idx.slot[static_cast<std::size_t>(it.row())];
      if (ri != npos) {
        triplets.emplace_back(static_cast<Eigen::Index>(ri), static_cast<Eigen::Index>(cj), it.value());
      }
    }
  }
  SparseMatrix A(idx.rows(), idx.rows());
  A.setFromTriplets(triplets.begin(), triplets.end());
  return A;
}

inline void factorize(Factorization& solver, const SparseMatrix& A, const char* what) {
  solver.compute(A);
  if (solver.info() != Eigen::Success) throw NumericError(std::string(what) + ": factorization failed");
}

/// Solves L_2 v = f at interior nodes with v = b on boundary nodes.
inline ScalarField solve_p2_dirichlet(const CornerGradient& op, const ScalarField& f, const ScalarField& b) {
  const DomainMask& mask = op.mask();
  require_same_grid(f.grid, mask.grid(), "solve_p2_dirichlet rhs");
  require_same_grid(b.grid, mask.grid(), "solve_p2_dirichlet boundary data");
  const InteriorIndex idx(mask);
  const SparseMatrix K = assemble_energy_matrix(op);
  std::vector<double> lifted(mask.grid().size(), 0.0);
  for (std::size_t i : mask.domain_nodes()) {
    if (!mask.is_interior(i)) lifted[i] = b.values[i];
  }
  Vector lift(static_cast<Eigen::Index>(lifted.size()));
  for (std::size_t i = 0; i < lifted.size(); ++i) lift[static_cast<Eigen::Index>(i)] = lifted[i];
  // L_2 v = W^-1 K v at interior nodes.
  const Vector coupling = K * lift;
  Vector rhs(idx.rows());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::size_t i = idx.nodes[k];
    rhs[static_cast<Eigen::Index>(k)] = mask.weight(i) * f.values[i] - coupling[static_cast<Eigen::Index>(i)];
  }
  Factorization solver;
  factorize(solver, interior_block(K, idx), "solve_p2_dirichlet");
  const Vector vi = solver.solve(rhs);
  ScalarField v(mask.grid());
  v.values = lifted;
  for (std::size_t k = 0; k < idx.size(); ++k) v.values[idx.nodes[k]] = vi[static_cast<Eigen::Index>(k)];
  return v;
}

struct LinearEigenResult {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  ScalarField u1;
  ScalarField u2;
  double residual1 = 0.0;
  double residual2 = 0.0;
  std::size_t iterations = 0;
};

namespace detail {

struct InverseIteration {
  double lambda = 0.0;
  Vector x;
  double residual = 0.0;
  std::size_t iterations = 0;
};

// Inverse iteration for A x = lambda M x (M diagonal) kept M-orthogonal to
// `deflate`. The residual is ||A x - lambda M x||_{M^-1} / lambda.
inline InverseIteration inverse_iteration(const SparseMatrix& A, const Factorization& solver, const Vector& M,
                                          Vector x, const std::vector<Vector>& deflate, double tol,
                                          std::size_t max_iter) {
  const auto mdot = [&M](const Vector& a, const Vector& b) { return (a.array() * M.array() * b.array()).sum(); };
  const auto orthonormalize = [&](Vector& v) {
    for (int pass = 0; pass < 2; ++pass) {
      for (const Vector& d : deflate) v -= mdot(v, d) * d;
    }
    const double nrm = std::sqrt(mdot(v, v));
    if (!(nrm > 0.0) || !std::isfinite(nrm)) throw NumericError("inverse iteration collapsed");
    v /= nrm;
  };
  InverseIteration out;
  orthonormalize(x);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    Vector y = solver.solve((M.array() * x.array()).matrix());
    orthonormalize(y);
    x = std::move(y);
    const Vector Ax = A * x;
    out.lambda = x.dot(Ax);
    const Vector r = Ax - out.lambda * (M.array() * x.array()).matrix();
    out.residual = std::sqrt((r.array().square() / M.array()).sum()) / out.lambda;
    out.iterations = it;
    if (out.residual <= tol) break;
  }
  out.x = std::move(x);
  if (out.residual > tol) throw NumericError("inverse iteration did not converge");
  return out;
}

}  // namespace detail

/// Two smallest eigenpairs of the discrete p = 2 problem with weight g, both
/// normalized to sum_i w_i g_i u_i^2 = 1; u1 is made nonnegative.
inline LinearEigenResult linear_oracle_p2(const CornerGradient& op, const ScalarField& g, double tol = 1e-11,
                                          std::size_t max_iter = 20000) {
  const DomainMask& mask = op.mask();
  require_same_grid(g.grid, mask.grid(), "linear_oracle_p2 weight");
  const InteriorIndex idx(mask);
  if (idx.size() < 2) throw InvalidInput("linear_oracle_p2 needs at least two interior nodes");
  const SparseMatrix A = interior_block(assemble_energy_matrix(op), idx);
  Vector M(idx.rows());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::size_t i = idx.nodes[k];
    if (!(g.values[i] > 0.0)) throw InvalidInput("weight must be positive on the interior");
    M[static_cast<Eigen::Index>(k)] = mask.weight(i) * g.values[i];
  }
  Factorization solver;
  factorize(solver, A, "linear_oracle_p2");

  const auto first = detail::inverse_iteration(A, solver, M, Vector::Ones(idx.rows()), {}, tol, max_iter);
  Vector x1 = first.x;
  if (x1.sum() < 0.0) x1 = -x1;
  // A fixed, non-symmetric start vector so the deflated iteration is
  // deterministic and not orthogonal to any symmetry class.
  Vector start(idx.rows());
  for (Eigen::Index k = 0; k < start.size(); ++k) start[k] = std::sin(1.0 + 0.7548776662466927 * static_cast<double>(k));
  const auto second = detail::inverse_iteration(A, solver, M, start, {x1}, tol, max_iter);

  LinearEigenResult r;
  r.lambda1 = first.lambda;
  r.lambda2 = second.lambda;
  r.u1 = idx.scatter(x1.cwiseMax(0.0), mask.grid());
  r.u2 = idx.scatter(second.x, mask.grid());
  r.residual1 = first.residual;
  r.residual2 = second.residual;
  r.iterations = first.iterations + second.iterations;
  return r;
}

inline LinearEigenResult linear_oracle_p2(const Frame& frame, const ScalarField& g, const DomainMask& mask,
                                          double tol = 1e-11) {
  return linear_oracle_p2(CornerGradient(frame, mask), g, tol);
}

}  // namespace picone_lab
