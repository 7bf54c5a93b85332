#pragma once

// Independent reference computations. None of these call into the library's
// discretization code.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "picone_lab/frames.hpp"
#include "picone_lab/grid.hpp"

namespace oracle {

/// First Dirichlet eigenvalue of -(|u'|^{p-2} u')' = lambda |u|^{p-2} u on
/// (0, L) by RK4 shooting on (u, w = |u'|^{p-2} u') from u(0) = 0, w(0) = 1.
/// The eigenfunction is symmetric, so lambda is the root of w(L/2) = 0.
inline double shooting_p_laplacian_1d(double p, double L = 1.0, int steps = 20000) {
  const double pc = 1.0 / (p - 1.0);
  const auto rhs = [&](double lambda, double u, double w, double& du, double& dw) {
    du = std::copysign(std::pow(std::abs(w), pc), w);
    dw = -lambda * std::copysign(std::pow(std::abs(u), p - 1.0), u);
  };
  const auto w_at_half = [&](double lambda) {
    const double h = 0.5 * L / steps;
    double u = 0.0, w = 1.0;
    for (int s = 0; s < steps; ++s) {
      double k1u, k1w, k2u, k2w, k3u, k3w, k4u, k4w;
      rhs(lambda, u, w, k1u, k1w);
      rhs(lambda, u + 0.5 * h * k1u, w + 0.5 * h * k1w, k2u, k2w);
      rhs(lambda, u + 0.5 * h * k2u, w + 0.5 * h * k2w, k3u, k3w);
      rhs(lambda, u + h * k3u, w + h * k3w, k4u, k4w);
      u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
      w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
    }
    return w;
  };
  double lo = 1e-3, hi = 1.0;
  while (w_at_half(hi) > 0.0) hi *= 2.0;
  for (int k = 0; k < 80; ++k) {
    const double mid = 0.5 * (lo + hi);
    (w_at_half(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Closed form (p-1) (2 pi / (p sin(pi/p)))^p on the unit interval.
inline double p_laplacian_1d_closed_form(double p) {
  const double pi_p = 2.0 * M_PI / (p * std::sin(M_PI / p));
  return (p - 1.0) * std::pow(pi_p, p);
}

/// Composite Simpson rule on a box, nx x ny panels (even).
inline double simpson_2d(const std::function<double(double, double)>& f, double x0, double x1, double y0, double y1,
                         int nx = 400, int ny = 400) {
  const double hx = (x1 - x0) / nx, hy = (y1 - y0) / ny;
  const auto w = [](int i, int n) { return (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0); };
  double s = 0.0;
  for (int i = 0; i <= nx; ++i) {
    for (int j = 0; j <= ny; ++j) s += w(i, nx) * w(j, ny) * f(x0 + i * hx, y0 + j * hy);
  }
  return s * hx * hy / 9.0;
}

/// Dense matrix of the corner-quadrature energy sum over cells and corners of
/// (cell volume / 2^d) |X u(corner)|^2, with the edge difference towards the
/// opposite face of the cell, restricted to interior nodes of a full box.
/// Written from the definition with explicit loops over a 2D or 3D lattice.
struct DenseProblem {
  Eigen::MatrixXd K;
  Eigen::VectorXd M;
  std::vector<std::size_t> nodes;
};

inline DenseProblem dense_energy(const picone_lab::Frame& frame, const picone_lab::Grid& g) {
  const std::size_t d = g.dim();
  const auto& n = g.resolution();
  std::vector<long> slot(g.size(), -1);
  DenseProblem out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto k = g.multi_index(i);
    bool interior = true;
    for (std::size_t a = 0; a < d; ++a) interior = interior && k[a] > 0 && k[a] + 1 < n[a];
    if (interior) {
      slot[i] = static_cast<long>(out.nodes.size());
      out.nodes.push_back(i);
    }
  }
  const auto m = static_cast<Eigen::Index>(out.nodes.size());
  out.K = Eigen::MatrixXd::Zero(m, m);
  out.M = Eigen::VectorXd::Zero(m);
  const double vol = g.cell_volume();
  const double wq = vol / std::pow(2.0, static_cast<double>(d));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto k = g.multi_index(i);
    bool lower_corner = true;
    for (std::size_t a = 0; a < d; ++a) lower_corner = lower_corner && k[a] + 1 < n[a];
    if (!lower_corner) continue;
    for (unsigned corner = 0; corner < (1u << d); ++corner) {
      picone_lab::MultiIndex c = k;
      for (std::size_t a = 0; a < d; ++a) c[a] += (corner >> a) & 1u;
      const std::size_t cn = g.node_index(c);
      const picone_lab::Point x = g.point(cn);
      // Row of d(partial_a u)/du over (corner, neighbour_a).
      std::vector<std::vector<std::pair<std::size_t, double>>> partial(d);
      for (std::size_t a = 0; a < d; ++a) {
        picone_lab::MultiIndex nb = c;
        const bool upper = (corner >> a) & 1u;
        nb[a] = upper ? c[a] - 1 : c[a] + 1;
        const double s = (upper ? 1.0 : -1.0) / g.spacing(a);
        partial[a] = {{cn, s}, {g.node_index(nb), -s}};
      }
      for (std::size_t f = 0; f < frame.num_fields(); ++f) {
        std::vector<std::pair<std::size_t, double>> row;
        for (std::size_t a = 0; a < d; ++a) {
          const double coef = frame.coefficient(f, a, x);
          for (auto [node, v] : partial[a]) row.push_back({node, coef * v});
        }
        for (auto [ni, vi] : row) {
          if (slot[ni] < 0) continue;
          for (auto [nj, vj] : row) {
            if (slot[nj] < 0) continue;
            out.K(slot[ni], slot[nj]) += wq * vi * vj;
          }
        }
      }
    }
  }
  for (std::size_t r = 0; r < out.nodes.size(); ++r) out.M[static_cast<Eigen::Index>(r)] = vol;
  return out;
}

/// Sorted generalized eigenvalues of K x = lambda diag(M) x.
inline Eigen::VectorXd dense_eigenvalues(const DenseProblem& dp) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(dp.K, Eigen::MatrixXd(dp.M.asDiagonal()),
                                                               Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// Luxemburg norm of the constant 2 with p = 2 + x on (0,2) x (0,1):
/// rho(2/t) = a^2 (a^2 - 1) / log a with a = 2 / t, increasing on (0, 1).
inline double luxemburg_constant_two_affine_p() {
  const auto rho = [](double a) { return a * a * (a * a - 1.0) / std::log(a); };
  double lo = 1e-6, hi = 1.0 - 1e-12;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (rho(mid) > 1.0 ? hi : lo) = mid;
  }
  return 2.0 / (0.5 * (lo + hi));
}

}  // namespace oracle
