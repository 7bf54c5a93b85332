#pragma once

// Vector-field frames X_k = sum_j a_kj(x) d/dx_j, the horizontal gradient
// built from them, its discrete adjoint, and the p(x)-sub-Laplacian.
//
// Two discrete gradients live here:
//
//  * NodalGradient evaluates X_k u at every domain node from second-order
//    central differences (one-sided second-order at boundary nodes). It is the
//    pointwise gradient used by the Picone machinery.
//
//  * CornerGradient evaluates X_k u at the corners of every domain cell from
//    the differences along the cell edges meeting at that corner (the gradient
//    of the linear interpolant on the corner simplex). Its quadrature weights
//    sum to the trapezoid weights, so sum_q w_q |X u|^p is the discrete energy
//    integral. This is the variational gradient: the p-Laplacian, Rayleigh
//    quotient and weak forms are built on it. Unlike the central-difference
//    gradient it has no odd/even decoupling, and for p = 2 in the Euclidean
//    frame its adjoint is the 5-point (7-point in 3D) Laplacian.
//
// Both adjoints are defined as exact transposes with respect to the nodal
// quadrature weights, restricted to fields vanishing off the interior.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "picone_lab/grid.hpp"

namespace picone_lab {

/// A family {X_1..X_N} of vector fields on an n-dimensional box.
class Frame {
 public:
  /// Coefficient a_kj at a point (k < N, j < n).
  using Coefficient = std::function<double(std::size_t k, std::size_t j, const Point& x)>;

  Frame(std::string name, std::size_t ambient_dim, std::size_t num_fields, Coefficient coeff)
      : name_(std::move(name)), n_(ambient_dim), N_(num_fields), coeff_(std::move(coeff)) {
    if (n_ < 1 || n_ > kMaxDim) throw InvalidInput("frame ambient dimension must be 1, 2 or 3");
    if (N_ < 1 || N_ > n_) throw InvalidInput("frame must have 1 <= N <= n fields");
  }

  static Frame euclidean(std::size_t n) {
    return Frame("euclidean" + std::to_string(n), n, n,
                 [](std::size_t k, std::size_t j, const Point&) { return k == j ? 1.0 : 0.0; });
  }

  /// X1 = d/dx, X2 = x d/dy.
  static Frame grushin() {
    return Frame("grushin", 2, 2, [](std::size_t k, std::size_t j, const Point& x) {
      if (k == 0) return j == 0 ? 1.0 : 0.0;
      return j == 1 ? x[0] : 0.0;
    });
  }

  /// Coordinates (x, y, t): X1 = d/dx - (y/2) d/dt, X2 = d/dy + (x/2) d/dt.
  static Frame heisenberg() {
    return Frame("heisenberg", 3, 2, [](std::size_t k, std::size_t j, const Point& x) {
      if (k == 0) {
        if (j == 0) return 1.0;
        if (j == 2) return -0.5 * x[1];
        return 0.0;
      }
      if (j == 1) return 1.0;
      if (j == 2) return 0.5 * x[0];
      return 0.0;
    });
  }

  /// Frame whose coefficients are nodal tables; tables[k * n + j] holds a_kj.
  static Frame from_tables(std::string name, std::size_t num_fields, std::vector<ScalarField> tables) {
    if (tables.empty()) throw InvalidInput("coefficient tables are empty");
    const Grid g = tables.front().grid;
    const std::size_t n = g.dim();
    if (tables.size() != num_fields * n) throw InvalidInput("expected N*n coefficient tables");
    for (const auto& t : tables) require_same_grid(t.grid, g, "coefficient tables");
    auto shared = std::make_shared<const std::vector<ScalarField>>(std::move(tables));
    return Frame(std::move(name), n, num_fields, [shared, n](std::size_t k, std::size_t j, const Point& x) {
      const ScalarField& t = (*shared)[k * n + j];
      MultiIndex idx{};
      for (std::size_t a = 0; a < n; ++a) {
        const double r = std::round((x[a] - t.grid.bounds()[a].lo) / t.grid.spacing(a));
        if (r < 0.0 || r > static_cast<double>(t.grid.resolution()[a] - 1)) {
          throw InvalidInput("point outside coefficient table grid");
        }
        idx[a] = static_cast<std::size_t>(r);
      }
      return t.values[t.grid.node_index(idx)];
    });
  }

  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] std::size_t ambient_dim() const { return n_; }
  [[nodiscard]] std::size_t num_fields() const { return N_; }
  [[nodiscard]] double coefficient(std::size_t k, std::size_t j, const Point& x) const { return coeff_(k, j, x); }

 private:
  std::string name_;
  std::size_t n_;
  std::size_t N_;
  Coefficient coeff_;
};

/// Builtin frames by name: euclidean1, euclidean2, euclidean3, grushin, heisenberg.
inline Frame frame_by_name(const std::string& name) {
  if (name == "euclidean1") return Frame::euclidean(1);
  if (name == "euclidean2") return Frame::euclidean(2);
  if (name == "euclidean3") return Frame::euclidean(3);
  if (name == "grushin") return Frame::grushin();
  if (name == "heisenberg") return Frame::heisenberg();
  throw InvalidInput("unknown frame '" + name + "'");
}

/// N components per lattice node, stored node-major.
struct HorizontalField {
  Grid grid;
  std::size_t components = 0;
  std::vector<double> values;

  HorizontalField() = default;
  HorizontalField(Grid g, std::size_t n_components)
      : grid(std::move(g)), components(n_components), values(grid.size() * n_components, 0.0) {}

  [[nodiscard]] std::span<const double> at(std::size_t node) const {
    return {values.data() + node * components, components};
  }
  [[nodiscard]] std::span<double> at(std::size_t node) { return {values.data() + node * components, components}; }
};

/// N components per corner quadrature point of a CornerGradient.
struct QuadratureField {
  std::size_t components = 0;
  std::vector<double> values;

  [[nodiscard]] std::size_t points() const { return components ? values.size() / components : 0; }
  [[nodiscard]] std::span<const double> at(std::size_t q) const { return {values.data() + q * components, components}; }
  [[nodiscard]] std::span<double> at(std::size_t q) { return {values.data() + q * components, components}; }
};

/// Variable exponent with certified bounds 1 < p- <= p(x) <= p+ < inf over the
/// nodes it was validated on.
class ExponentField {
 public:
  ExponentField() = default;

  /// Validates over the interior and boundary nodes of `mask`.
  ExponentField(ScalarField p, const DomainMask& mask) : values_(std::move(p)) {
    require_same_grid(values_.grid, mask.grid(), "exponent field");
    certify(mask.domain_nodes());
  }

  /// Validates over every lattice node.
  explicit ExponentField(ScalarField p) : values_(std::move(p)) {
    std::vector<std::size_t> all(values_.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    certify(all);
  }

  static ExponentField constant(const Grid& g, double p) { return ExponentField(ScalarField(g, p)); }

  [[nodiscard]] const ScalarField& field() const { return values_; }
  [[nodiscard]] const Grid& grid() const { return values_.grid; }
  [[nodiscard]] double operator[](std::size_t i) const { return values_.values[i]; }
  [[nodiscard]] double pminus() const { return pminus_; }
  [[nodiscard]] double pplus() const { return pplus_; }
  [[nodiscard]] bool is_constant() const { return pminus_ == pplus_; }

 private:
  void certify(const std::vector<std::size_t>& nodes) {
    pminus_ = std::numeric_limits<double>::infinity();
    pplus_ = -std::numeric_limits<double>::infinity();
    for (std::size_t i : nodes) {
      const double p = values_.values[i];
      if (!std::isfinite(p) || !(p > 1.0)) {
        throw InvalidInput("exponent must satisfy 1 < p(x) < inf; got " + std::to_string(p) + " at node " +
                           std::to_string(i));
      }
      pminus_ = std::min(pminus_, p);
      pplus_ = std::max(pplus_, p);
    }
  }

  ScalarField values_;
  double pminus_ = 2.0;
  double pplus_ = 2.0;
};

namespace detail {

/// a_kj at every node, laid out [node][k][j].
inline std::vector<double> coefficient_table(const Frame& frame, const Grid& grid) {
  if (frame.ambient_dim() != grid.dim()) {
    throw InvalidInput("frame '" + frame.name() + "' has ambient dimension " + std::to_string(frame.ambient_dim()) +
                       " but grid has dimension " + std::to_string(grid.dim()));
  }
  const std::size_t n = grid.dim();
  const std::size_t N = frame.num_fields();
  std::vector<double> table(grid.size() * N * n);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Point x = grid.point(i);
    for (std::size_t k = 0; k < N; ++k) {
      for (std::size_t j = 0; j < n; ++j) {
        const double a = frame.coefficient(k, j, x);
        if (!std::isfinite(a)) throw InvalidInput("frame coefficient is not finite at node " + std::to_string(i));
        table[(i * N + k) * n + j] = a;
      }
    }
  }
  return table;
}

}  // namespace detail

/// Pointwise horizontal gradient at domain nodes and its exact weighted transpose.
class NodalGradient {
 public:
  NodalGradient(const Frame& frame, DomainMask mask)
      : mask_(std::move(mask)),
        n_(mask_.grid().dim()),
        N_(frame.num_fields()),
        coeff_(detail::coefficient_table(frame, mask_.grid())) {
    const Grid& g = mask_.grid();
    stencils_.resize(g.size() * n_);
    for (std::size_t i : mask_.domain_nodes()) {
      for (std::size_t a = 0; a < n_; ++a) stencils_[i * n_ + a] = make_stencil(i, a);
    }
  }

  [[nodiscard]] const DomainMask& mask() const { return mask_; }
  [[nodiscard]] std::size_t components() const { return N_; }

  /// Euclidean partial derivative along `axis` at domain node `node`.
  [[nodiscard]] double partial(const std::vector<double>& u, std::size_t node, std::size_t axis) const {
    const Stencil& s = stencils_[node * n_ + axis];
    double d = 0.0;
    for (std::size_t e = 0; e < s.count; ++e) d += s.coef[e] * u[s.node[e]];
    return d;
  }

  [[nodiscard]] HorizontalField apply(const ScalarField& u) const {
    require_same_grid(u.grid, mask_.grid(), "horizontal_gradient");
    HorizontalField out(mask_.grid(), N_);
    std::array<double, kMaxDim> d{};
    for (std::size_t i : mask_.domain_nodes()) {
      for (std::size_t a = 0; a < n_; ++a) d[a] = partial(u.values, i, a);
      auto gi = out.at(i);
      for (std::size_t k = 0; k < N_; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < n_; ++j) s += coeff_[(i * N_ + k) * n_ + j] * d[j];
        gi[k] = s;
      }
    }
    return out;
  }

  [[nodiscard]] ScalarField adjoint(const HorizontalField& F) const {
    require_same_grid(F.grid, mask_.grid(), "discrete_adjoint");
    if (F.components != N_) throw InvalidInput("horizontal field has wrong number of components");
    ScalarField out(mask_.grid());
    for (std::size_t m : mask_.domain_nodes()) {
      const double w = mask_.weight(m);
      const auto Fm = F.at(m);
      for (std::size_t j = 0; j < n_; ++j) {
        double t = 0.0;
        for (std::size_t k = 0; k < N_; ++k) t += coeff_[(m * N_ + k) * n_ + j] * Fm[k];
        t *= w;
        const Stencil& s = stencils_[m * n_ + j];
        for (std::size_t e = 0; e < s.count; ++e) out.values[s.node[e]] += s.coef[e] * t;
      }
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.values[i] = mask_.is_interior(i) ? out.values[i] / mask_.weight(i) : 0.0;
    }
    return out;
  }

 private:
  struct Stencil {
    std::array<std::size_t, 3> node{};
    std::array<double, 3> coef{};
    std::size_t count = 0;
  };

  [[nodiscard]] bool usable(std::size_t j) const { return j != npos && mask_.in_domain(j); }

  [[nodiscard]] Stencil make_stencil(std::size_t i, std::size_t a) const {
    const Grid& g = mask_.grid();
    const double h = g.spacing(a);
    const std::size_t prev = g.shift(i, a, -1);
    const std::size_t next = g.shift(i, a, 1);
    Stencil s;
    if (usable(prev) && usable(next)) {
      s.node = {prev, next, 0};
      s.coef = {-0.5 / h, 0.5 / h, 0.0};
      s.count = 2;
      return s;
    }
    const std::size_t next2 = usable(next) ? g.shift(i, a, 2) : npos;
    if (usable(next2)) {
      s.node = {i, next, next2};
      s.coef = {-1.5 / h, 2.0 / h, -0.5 / h};
      s.count = 3;
      return s;
    }
    const std::size_t prev2 = usable(prev) ? g.shift(i, a, -2) : npos;
    if (usable(prev2)) {
      s.node = {i, prev, prev2};
      s.coef = {1.5 / h, -2.0 / h, 0.5 / h};
      s.count = 3;
      return s;
    }
    if (usable(next)) {
      s.node = {i, next, 0};
      s.coef = {-1.0 / h, 1.0 / h, 0.0};
      s.count = 2;
    } else if (usable(prev)) {
      s.node = {prev, i, 0};
      s.coef = {-1.0 / h, 1.0 / h, 0.0};
      s.count = 2;
    }
    return s;
  }

  DomainMask mask_;
  std::size_t n_;
  std::size_t N_;
  std::vector<double> coeff_;
  std::vector<Stencil> stencils_;
};

/// Horizontal gradient at the corners of domain cells; see the file comment.
class CornerGradient {
 public:
  CornerGradient(const Frame& frame, DomainMask mask)
      : mask_(std::move(mask)), n_(mask_.grid().dim()), N_(frame.num_fields()) {
    const Grid& g = mask_.grid();
    const std::vector<double> table = detail::coefficient_table(frame, g);
    const unsigned corners = mask_.corners_per_cell();
    weight_ = g.cell_volume() / static_cast<double>(corners);
    const std::size_t Q = mask_.cells().size() * corners;
    node_.reserve(Q);
    neighbor_.reserve(Q * n_);
    inv_step_.reserve(Q * n_);
    coeff_.reserve(Q * N_ * n_);
    for (std::size_t c = 0; c < mask_.cells().size(); ++c) {
      for (unsigned b = 0; b < corners; ++b) {
        const std::size_t node = mask_.cell_corner(c, b);
        node_.push_back(node);
        for (std::size_t a = 0; a < n_; ++a) {
          const bool upper = (b & (1U << a)) != 0;
          neighbor_.push_back(upper ? node - g.stride(a) : node + g.stride(a));
          inv_step_.push_back((upper ? -1.0 : 1.0) / g.spacing(a));
        }
        for (std::size_t kj = 0; kj < N_ * n_; ++kj) coeff_.push_back(table[node * N_ * n_ + kj]);
      }
    }
  }

  [[nodiscard]] const DomainMask& mask() const { return mask_; }
  [[nodiscard]] std::size_t components() const { return N_; }
  [[nodiscard]] std::size_t points() const { return node_.size(); }
  /// Lattice node at which quadrature point q sits.
  [[nodiscard]] std::size_t node(std::size_t q) const { return node_[q]; }
  [[nodiscard]] double weight() const { return weight_; }

  /// Writes X u at quadrature point q into `out` (length N).
  void gradient_at(const std::vector<double>& u, std::size_t q, std::span<double> out) const {
    std::array<double, kMaxDim> d{};
    const double uq = u[node_[q]];
    for (std::size_t a = 0; a < n_; ++a) d[a] = (u[neighbor_[q * n_ + a]] - uq) * inv_step_[q * n_ + a];
    const double* c = coeff_.data() + q * N_ * n_;
    for (std::size_t k = 0; k < N_; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < n_; ++j) s += c[k * n_ + j] * d[j];
      out[k] = s;
    }
  }

  /// Support of X u(q): the corner node, then its n edge neighbours.
  /// coef[k * (n + 1) + s] = d(X_k u(q)) / d(u at nodes[s]).
  void stencil_at(std::size_t q, std::span<std::size_t> nodes, std::span<double> coef) const {
    nodes[0] = node_[q];
    const double* c = coeff_.data() + q * N_ * n_;
    for (std::size_t k = 0; k < N_; ++k) coef[k * (n_ + 1)] = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
      nodes[j + 1] = neighbor_[q * n_ + j];
      for (std::size_t k = 0; k < N_; ++k) {
        const double t = c[k * n_ + j] * inv_step_[q * n_ + j];
        coef[k * (n_ + 1) + j + 1] = t;
        coef[k * (n_ + 1)] -= t;
      }
    }
  }

  [[nodiscard]] QuadratureField apply(const ScalarField& u) const {
    require_same_grid(u.grid, mask_.grid(), "corner gradient");
    QuadratureField out{N_, std::vector<double>(points() * N_, 0.0)};
    for (std::size_t q = 0; q < points(); ++q) gradient_at(u.values, q, out.at(q));
    return out;
  }

  /// Accumulates w_q * (dX u(q)/du)^T F_q into `out` (raw, undivided by nodal
  /// weights, all nodes touched).
  void accumulate_transpose(std::size_t q, std::span<const double> Fq, double scale, std::vector<double>& out) const {
    const double* c = coeff_.data() + q * N_ * n_;
    const std::size_t self = node_[q];
    for (std::size_t j = 0; j < n_; ++j) {
      double t = 0.0;
      for (std::size_t k = 0; k < N_; ++k) t += c[k * n_ + j] * Fq[k];
      t *= scale * inv_step_[q * n_ + j];
      out[neighbor_[q * n_ + j]] += t;
      out[self] -= t;
    }
  }

  [[nodiscard]] ScalarField adjoint(const QuadratureField& F) const {
    if (F.components != N_ || F.points() != points()) throw InvalidInput("quadrature field does not match operator");
    ScalarField out(mask_.grid());
    for (std::size_t q = 0; q < points(); ++q) accumulate_transpose(q, F.at(q), weight_, out.values);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.values[i] = mask_.is_interior(i) ? out.values[i] / mask_.weight(i) : 0.0;
    }
    return out;
  }

 private:
  DomainMask mask_;
  std::size_t n_;
  std::size_t N_;
  double weight_ = 0.0;
  std::vector<std::size_t> node_;
  std::vector<std::size_t> neighbor_;
  std::vector<double> inv_step_;
  std::vector<double> coeff_;
};

inline double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// |g|^(p-2) with the removable singularity at g = 0 resolved to 0.
inline double flux_factor(double gnorm, double p) { return gnorm > 0.0 ? std::pow(gnorm, p - 2.0) : 0.0; }

inline HorizontalField horizontal_gradient(const Frame& frame, const ScalarField& u, const DomainMask& mask) {
  return NodalGradient(frame, mask).apply(u);
}

inline ScalarField discrete_adjoint(const Frame& frame, const HorizontalField& F, const DomainMask& mask) {
  return NodalGradient(frame, mask).adjoint(F);
}

/// L_p u = X^*(|X u|^(p-2) X u) on the corner gradient: the positive operator
/// whose weighted pairing with u is the energy sum_q w_q |X u|^p.
inline ScalarField p_sub_laplacian(const CornerGradient& op, const ScalarField& u, const ExponentField& p) {
  require_same_grid(u.grid, op.mask().grid(), "p_sub_laplacian");
  require_same_grid(p.grid(), op.mask().grid(), "p_sub_laplacian exponent");
  const std::size_t N = op.components();
  QuadratureField flux{N, std::vector<double>(op.points() * N, 0.0)};
  for (std::size_t q = 0; q < op.points(); ++q) {
    auto f = flux.at(q);
    op.gradient_at(u.values, q, f);
    const double factor = flux_factor(norm(f), p[op.node(q)]);
    for (double& x : f) x *= factor;
  }
  return op.adjoint(flux);
}

inline ScalarField p_sub_laplacian(const Frame& frame, const ScalarField& u, const ExponentField& p,
                                   const DomainMask& mask) {
  return p_sub_laplacian(CornerGradient(frame, mask), u, p);
}

/// max over interior nodes of |Xv . Xp| / (1 + |Xv||Xp|).
inline double orthogonality_defect(const NodalGradient& op, const ScalarField& v, const ScalarField& p) {
  const HorizontalField gv = op.apply(v);
  const HorizontalField gp = op.apply(p);
  double worst = 0.0;
  for (std::size_t i : op.mask().interior_nodes()) {
    const auto a = gv.at(i);
    const auto b = gp.at(i);
    worst = std::max(worst, std::abs(dot(a, b)) / (1.0 + norm(a) * norm(b)));
  }
  return worst;
}

inline double orthogonality_defect(const Frame& frame, const ScalarField& v, const ExponentField& p,
                                   const DomainMask& mask) {
  return orthogonality_defect(NodalGradient(frame, mask), v, p.field());
}

}  // namespace picone_lab
