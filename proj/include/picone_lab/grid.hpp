#pragma once

// Rectangular lattices, node-classified domain masks, nodal scalar fields and
// trapezoidal quadrature.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "picone_lab/errors.hpp"
#include "picone_lab/summation.hpp"

namespace picone_lab {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] double length() const { return hi - lo; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

inline constexpr std::size_t kMaxDim = 3;
inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

using Point = std::array<double, kMaxDim>;
using MultiIndex = std::array<std::size_t, kMaxDim>;

/// Tensor-product lattice over a box. Nodes are numbered row-major (the last
/// axis varies fastest).
class Grid {
 public:
  Grid() = default;

  Grid(std::vector<Interval> bounds, std::vector<std::size_t> resolution)
      : bounds_(std::move(bounds)), resolution_(std::move(resolution)) {
    if (bounds_.empty() || bounds_.size() > kMaxDim) {
      throw InvalidInput("grid dimension must be 1, 2 or 3");
    }
    if (bounds_.size() != resolution_.size()) {
      throw InvalidInput("grid bounds and resolution have different lengths");
    }
    spacing_.resize(dim());
    stride_.assign(dim(), 1);
    for (std::size_t a = 0; a < dim(); ++a) {
      const Interval& iv = bounds_[a];
      if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || !(iv.hi > iv.lo)) {
        throw InvalidInput("degenerate interval on axis " + std::to_string(a));
      }
      if (resolution_[a] < 3) {
        throw InvalidInput("resolution on axis " + std::to_string(a) + " is below 3");
      }
      spacing_[a] = iv.length() / static_cast<double>(resolution_[a] - 1);
    }
    for (std::size_t a = dim() - 1; a > 0; --a) {
      stride_[a - 1] = stride_[a] * resolution_[a];
    }
    size_ = stride_[0] * resolution_[0];
  }

  [[nodiscard]] std::size_t dim() const { return bounds_.size(); }
  [[nodiscard]] std::size_t size() const { return size_; }
  [[nodiscard]] const std::vector<Interval>& bounds() const { return bounds_; }
  [[nodiscard]] const std::vector<std::size_t>& resolution() const { return resolution_; }
  [[nodiscard]] double spacing(std::size_t axis) const { return spacing_[axis]; }
  [[nodiscard]] const std::vector<double>& spacing() const { return spacing_; }
  [[nodiscard]] std::size_t stride(std::size_t axis) const { return stride_[axis]; }

  [[nodiscard]] MultiIndex multi_index(std::size_t node) const {
    MultiIndex k{};
    for (std::size_t a = 0; a < dim(); ++a) {
      k[a] = (node / stride_[a]) % resolution_[a];
    }
    return k;
  }

  [[nodiscard]] std::size_t node_index(const MultiIndex& k) const {
    std::size_t node = 0;
    for (std::size_t a = 0; a < dim(); ++a) node += k[a] * stride_[a];
    return node;
  }

  [[nodiscard]] double coordinate(std::size_t axis, std::size_t k) const {
    return bounds_[axis].lo + static_cast<double>(k) * spacing_[axis];
  }

  [[nodiscard]] Point point(std::size_t node) const {
    Point x{};
    const MultiIndex k = multi_index(node);
    for (std::size_t a = 0; a < dim(); ++a) x[a] = coordinate(a, k[a]);
    return x;
  }

  /// Node reached by moving `step` positions along `axis`, or npos when that
  /// leaves the lattice.
  [[nodiscard]] std::size_t shift(std::size_t node, std::size_t axis, long step) const {
    const auto k = static_cast<long>((node / stride_[axis]) % resolution_[axis]);
    const long target = k + step;
    if (target < 0 || target >= static_cast<long>(resolution_[axis])) return npos;
    return static_cast<std::size_t>(static_cast<long>(node) + step * static_cast<long>(stride_[axis]));
  }

  [[nodiscard]] double cell_volume() const {
    double v = 1.0;
    for (double h : spacing_) v *= h;
    return v;
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.bounds_ == b.bounds_ && a.resolution_ == b.resolution_;
  }

 private:
  std::vector<Interval> bounds_;
  std::vector<std::size_t> resolution_;
  std::vector<double> spacing_;
  std::vector<std::size_t> stride_;
  std::size_t size_ = 0;
};

inline Grid build_grid(std::vector<Interval> bounds, std::vector<std::size_t> resolution) {
  return Grid(std::move(bounds), std::move(resolution));
}

/// Real value per lattice node. Exterior nodes hold finite placeholders
/// (0 by convention) that no operation reads.
struct ScalarField {
  Grid grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(Grid g, double fill = 0.0) : grid(std::move(g)), values(grid.size(), fill) {}
  ScalarField(Grid g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.size()) throw InvalidInput("field size does not match grid");
  }

  template <class F>
  static ScalarField sample(const Grid& g, F&& fn) {
    ScalarField out(g);
    for (std::size_t i = 0; i < g.size(); ++i) out.values[i] = fn(g.point(i));
    return out;
  }

  [[nodiscard]] std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

enum class NodeKind : std::uint8_t { exterior, boundary, interior };

/// Classification of every lattice node as interior, boundary or exterior,
/// together with the quadrature data derived from it.
///
/// A cell (lattice box between 2^d neighbouring nodes) belongs to the domain
/// when none of its corners is exterior. Quadrature weights distribute each
/// domain cell's volume equally over its corners, which is the composite
/// trapezoid rule on rectangles.
class DomainMask {
 public:
  DomainMask() = default;

  DomainMask(Grid grid, std::vector<NodeKind> kinds) : grid_(std::move(grid)), kinds_(std::move(kinds)) {
    if (kinds_.size() != grid_.size()) throw InvalidInput("mask size does not match grid");
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      if (kinds_[i] != NodeKind::interior) continue;
      for (std::size_t a = 0; a < grid_.dim(); ++a) {
        for (long s : {-1L, 1L}) {
          const std::size_t j = grid_.shift(i, a, s);
          if (j == npos || kinds_[j] == NodeKind::exterior) {
            throw InvalidInput("interior node " + std::to_string(i) + " touches the exterior");
          }
        }
      }
      interior_.push_back(i);
    }
    if (interior_.empty()) throw InvalidInput("mask has no interior nodes");
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      if (kinds_[i] != NodeKind::exterior) domain_.push_back(i);
    }
    build_cells();
  }

  [[nodiscard]] const Grid& grid() const { return grid_; }
  [[nodiscard]] NodeKind kind(std::size_t node) const { return kinds_[node]; }
  [[nodiscard]] const std::vector<NodeKind>& kinds() const { return kinds_; }
  [[nodiscard]] bool is_interior(std::size_t node) const { return kinds_[node] == NodeKind::interior; }
  [[nodiscard]] bool in_domain(std::size_t node) const { return kinds_[node] != NodeKind::exterior; }
  [[nodiscard]] const std::vector<std::size_t>& interior_nodes() const { return interior_; }
  /// Interior and boundary nodes in ascending order.
  [[nodiscard]] const std::vector<std::size_t>& domain_nodes() const { return domain_; }
  /// Lower corner node of every domain cell.
  [[nodiscard]] const std::vector<std::size_t>& cells() const { return cells_; }
  [[nodiscard]] double weight(std::size_t node) const { return weights_[node]; }
  [[nodiscard]] const std::vector<double>& weights() const { return weights_; }

  [[nodiscard]] double measure() const {
    CompensatedSum s;
    for (std::size_t i : domain_) s += weights_[i];
    return s.value();
  }

  /// Corner node of cell `c` selected by the bit pattern `corner` (bit a set
  /// means the upper node along axis a).
  [[nodiscard]] std::size_t cell_corner(std::size_t c, unsigned corner) const {
    std::size_t node = cells_[c];
    for (std::size_t a = 0; a < grid_.dim(); ++a) {
      if (corner & (1U << a)) node += grid_.stride(a);
    }
    return node;
  }

  [[nodiscard]] unsigned corners_per_cell() const { return 1U << grid_.dim(); }

  friend bool operator==(const DomainMask& a, const DomainMask& b) {
    return a.grid_ == b.grid_ && a.kinds_ == b.kinds_;
  }

 private:
  void build_cells() {
    weights_.assign(grid_.size(), 0.0);
    const double share = grid_.cell_volume() / static_cast<double>(corners_per_cell());
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      const MultiIndex k = grid_.multi_index(i);
      bool lower_corner = true;
      for (std::size_t a = 0; a < grid_.dim(); ++a) {
        if (k[a] + 1 >= grid_.resolution()[a]) lower_corner = false;
      }
      if (!lower_corner) continue;
      bool inside = true;
      for (unsigned c = 0; c < corners_per_cell() && inside; ++c) {
        std::size_t node = i;
        for (std::size_t a = 0; a < grid_.dim(); ++a) {
          if (c & (1U << a)) node += grid_.stride(a);
        }
        inside = kinds_[node] != NodeKind::exterior;
      }
      if (!inside) continue;
      cells_.push_back(i);
      for (unsigned c = 0; c < corners_per_cell(); ++c) {
        std::size_t node = i;
        for (std::size_t a = 0; a < grid_.dim(); ++a) {
          if (c & (1U << a)) node += grid_.stride(a);
        }
        weights_[node] += share;
      }
    }
  }

  Grid grid_;
  std::vector<NodeKind> kinds_;
  std::vector<std::size_t> interior_;
  std::vector<std::size_t> domain_;
  std::vector<std::size_t> cells_;
  std::vector<double> weights_;
};

/// Relative tolerance (in units of the grid spacing) within which rectangle
/// faces must coincide with lattice planes.
inline constexpr double kAlignmentTolerance = 1e-6;

/// Mask of an axis-aligned box: nodes strictly inside are interior, nodes on
/// its faces are boundary, everything else is exterior.
inline DomainMask rect_mask(const Grid& grid, const std::vector<Interval>& sub_bounds) {
  if (sub_bounds.size() != grid.dim()) throw InvalidInput("sub-bounds dimension does not match grid");
  std::array<std::size_t, kMaxDim> lo{}, hi{};
  for (std::size_t a = 0; a < grid.dim(); ++a) {
    const double h = grid.spacing(a);
    const Interval& iv = sub_bounds[a];
    const auto snap = [&](double x, std::size_t& k) {
      const double t = (x - grid.bounds()[a].lo) / h;
      const double r = std::round(t);
      if (!std::isfinite(t) || std::abs(t - r) > kAlignmentTolerance || r < 0.0 ||
          r > static_cast<double>(grid.resolution()[a] - 1)) {
        throw InvalidInput("sub-bound " + std::to_string(x) + " on axis " + std::to_string(a) +
                           " is not a lattice coordinate");
      }
      k = static_cast<std::size_t>(r);
    };
    snap(iv.lo, lo[a]);
    snap(iv.hi, hi[a]);
    if (hi[a] < lo[a] + 2) throw InvalidInput("sub-box has an empty interior");
  }
  std::vector<NodeKind> kinds(grid.size(), NodeKind::exterior);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const MultiIndex k = grid.multi_index(i);
    bool closed = true;
    bool open = true;
    for (std::size_t a = 0; a < grid.dim(); ++a) {
      if (k[a] < lo[a] || k[a] > hi[a]) closed = false;
      if (k[a] <= lo[a] || k[a] >= hi[a]) open = false;
    }
    if (open) {
      kinds[i] = NodeKind::interior;
    } else if (closed) {
      kinds[i] = NodeKind::boundary;
    }
  }
  return DomainMask(grid, std::move(kinds));
}

inline DomainMask full_mask(const Grid& grid) { return rect_mask(grid, grid.bounds()); }

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) throw InvalidInput(std::string("grid mismatch: ") + what);
}

/// Composite trapezoid quadrature over interior and boundary nodes.
inline double integrate(const ScalarField& f, const DomainMask& mask) {
  require_same_grid(f.grid, mask.grid(), "integrate");
  CompensatedSum s;
  for (std::size_t i : mask.domain_nodes()) s += mask.weight(i) * f.values[i];
  return s.value();
}

/// True when every interior node of `inner` is interior in `outer`.
inline bool is_nested(const DomainMask& inner, const DomainMask& outer) {
  if (!(inner.grid() == outer.grid())) return false;
  for (std::size_t i : inner.interior_nodes()) {
    if (!outer.is_interior(i)) return false;
  }
  return true;
}

}  // namespace picone_lab
