#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "choquard/error.hpp"
#include "choquard/quadrature.hpp"

namespace choquard {

enum class DomainKind { UnitBall, WholeSpace };

/// Composite Gauss-Legendre grid on [0,1] (ball) or on R_+ through the map
/// r = L t / (1 - t), t in (0,1) (whole space). Panels live in the parameter t
/// and are graded geometrically toward both ends of the parameter interval.
class RadialGrid {
 public:
  static constexpr int kPanelOrder = 16;

  RadialGrid(DomainKind kind, int panels, double grading, double map_scale)
      : kind_(kind), grading_(grading), scale_(map_scale) {
    if (panels < 1) throw DomainError("grid needs at least one panel");
    if (!(grading > 0.0 && grading < 1.0)) {
      std::ostringstream os;
      os << "grading must lie in (0,1), got " << grading;
      throw DomainError(os.str());
    }
    if (!(map_scale > 0.0)) throw DomainError("map scale must be positive");
    build_breaks(panels);
    build_nodes();
  }

  DomainKind kind() const { return kind_; }
  bool is_ball() const { return kind_ == DomainKind::UnitBall; }
  double grading() const { return grading_; }
  double map_scale() const { return scale_; }

  std::size_t size() const { return t_.size(); }
  int panel_count() const { return static_cast<int>(breaks_.size()) - 1; }
  int panel_of_node(std::size_t i) const { return static_cast<int>(i) / kPanelOrder; }

  /// Panel boundaries in the parameter variable t.
  const std::vector<double>& parameter_breaks() const { return breaks_; }
  /// Panel boundaries as radii (the last one is +infinity on the whole space).
  std::vector<double> radial_breaks() const {
    std::vector<double> out(breaks_.size());
    for (std::size_t k = 0; k < breaks_.size(); ++k) out[k] = radius(breaks_[k]);
    return out;
  }

  const std::vector<double>& parameters() const { return t_; }
  const std::vector<double>& nodes() const { return r_; }
  /// Weights for the integral of f(r) dr over the domain (Jacobian included).
  const std::vector<double>& weights() const { return w_; }
  const std::vector<double>& jacobians() const { return drdt_; }

  double node(std::size_t i) const { return r_[i]; }
  double weight(std::size_t i) const { return w_[i]; }

  double radius(double t) const {
    if (is_ball()) return t;
    if (t >= 1.0) return std::numeric_limits<double>::infinity();
    return scale_ * t / (1.0 - t);
  }
  double parameter(double r) const {
    if (is_ball()) return r;
    if (std::isinf(r)) return 1.0;
    return r / (scale_ + r);
  }
  double jacobian(double t) const {
    if (is_ball()) return 1.0;
    return scale_ / ((1.0 - t) * (1.0 - t));
  }
  /// radius(t + u) - radius(t) without cancellation.
  double radius_difference(double t, double u) const {
    if (is_ball()) return u;
    return scale_ * u / ((1.0 - t) * (1.0 - t - u));
  }
  double outer_radius() const {
    return is_ball() ? 1.0 : std::numeric_limits<double>::infinity();
  }

  /// Panel containing parameter t (the right panel at an interior break).
  int locate(double t) const {
    if (t <= breaks_.front()) return 0;
    if (t >= breaks_.back()) return panel_count() - 1;
    auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
    return std::min(static_cast<int>(it - breaks_.begin()) - 1, panel_count() - 1);
  }

  /// Reference Gauss-Legendre nodes on [-1,1] shared by every panel.
  const quadrature::Rule& reference_rule() const { return ref_; }
  const std::vector<double>& reference_barycentric() const { return ref_bary_; }

  /// Maps a parameter value inside panel p to the reference coordinate.
  double to_reference(int p, double t) const {
    const double a = breaks_[p], b = breaks_[p + 1];
    return (2.0 * t - a - b) / (b - a);
  }
  double panel_width(int p) const { return breaks_[p + 1] - breaks_[p]; }

 private:
  void build_breaks(int panels) {
    const double g = grading_;
    int toward_end = is_ball() ? std::max(1, panels / 8) : panels / 2;
    if (panels == 1) toward_end = 0;
    const int toward_origin = panels - toward_end;
    breaks_.clear();
    breaks_.push_back(0.0);
    const double split = toward_end == 0 ? 1.0 : 0.5;
    for (int k = toward_origin - 1; k >= 1; --k) breaks_.push_back(split * std::pow(g, k));
    breaks_.push_back(split);
    for (int k = 1; k < toward_end; ++k) breaks_.push_back(1.0 - 0.5 * std::pow(g, k));
    if (toward_end > 0) breaks_.push_back(1.0);
  }

  void build_nodes() {
    ref_ = quadrature::gauss_legendre(kPanelOrder);
    ref_bary_ = quadrature::barycentric_weights(ref_.nodes);
    const int P = panel_count();
    t_.resize(static_cast<std::size_t>(P) * kPanelOrder);
    r_.resize(t_.size());
    w_.resize(t_.size());
    drdt_.resize(t_.size());
    for (int p = 0; p < P; ++p) {
      const double a = breaks_[p], b = breaks_[p + 1];
      for (int q = 0; q < kPanelOrder; ++q) {
        const std::size_t i = static_cast<std::size_t>(p) * kPanelOrder + q;
        t_[i] = 0.5 * (a + b) + 0.5 * (b - a) * ref_.nodes[q];
        r_[i] = radius(t_[i]);
        drdt_[i] = jacobian(t_[i]);
        w_[i] = 0.5 * (b - a) * ref_.weights[q] * drdt_[i];
      }
    }
  }

  DomainKind kind_;
  double grading_;
  double scale_;
  std::vector<double> breaks_;
  std::vector<double> t_, r_, w_, drdt_;
  quadrature::Rule ref_;
  std::vector<double> ref_bary_;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

/// Builds a grid with ceil(n / 16) panels of 16 Gauss-Legendre nodes each.
inline GridPtr make_grid(DomainKind kind, int n, double grading, double map_scale = 1.0) {
  if (n < 16) {
    std::ostringstream os;
    os << "grid needs n >= 16 nodes, got " << n;
    throw DomainError(os.str());
  }
  if (!(grading > 0.0)) throw DomainError("grading must be positive");
  const int panels = (n + RadialGrid::kPanelOrder - 1) / RadialGrid::kPanelOrder;
  return std::make_shared<const RadialGrid>(kind, panels, grading, map_scale);
}

enum class BoundaryTag { Free, Dirichlet, Decaying };

/// Radial function sampled at the nodes of a grid.
class RadialField {
 public:
  RadialField() = default;
  RadialField(GridPtr grid, std::vector<double> values, BoundaryTag tag = BoundaryTag::Free,
              double boundary_value = 0.0)
      : grid_(std::move(grid)), values_(std::move(values)), tag_(tag), boundary_(boundary_value) {
    if (!grid_) throw DomainError("field without grid");
    if (values_.size() != grid_->size()) throw DomainError("field size does not match its grid");
    for (double v : values_)
      if (!std::isfinite(v)) throw DomainError("field values must be finite");
    if (tag_ == BoundaryTag::Dirichlet && boundary_ != 0.0)
      throw DomainError("a Dirichlet field must vanish on the boundary");
  }

  template <class F>
  static RadialField sample(GridPtr grid, F&& f, BoundaryTag tag = BoundaryTag::Free,
                            double boundary_value = 0.0) {
    std::vector<double> v(grid->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid->node(i));
    return RadialField(std::move(grid), std::move(v), tag, boundary_value);
  }

  static RadialField zeros(GridPtr grid, BoundaryTag tag = BoundaryTag::Free) {
    const std::size_t n = grid->size();
    return RadialField(std::move(grid), std::vector<double>(n, 0.0), tag, 0.0);
  }

  const GridPtr& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  BoundaryTag tag() const { return tag_; }
  double boundary_value() const { return boundary_; }

  /// Panel interpolant evaluated at radius r (extrapolated to r = 0 in the first panel).
  double value_at(double r) const {
    const double t = grid_->parameter(r);
    const int p = grid_->locate(t);
    const auto& ref = grid_->reference_rule();
    double basis[RadialGrid::kPanelOrder];
    quadrature::lagrange_basis(ref.nodes, grid_->reference_barycentric(), grid_->to_reference(p, t),
                               basis);
    double s = 0.0;
    for (int q = 0; q < RadialGrid::kPanelOrder; ++q)
      s += basis[q] * values_[static_cast<std::size_t>(p) * RadialGrid::kPanelOrder + q];
    return s;
  }

  template <class F>
  RadialField map(F&& f) const {
    std::vector<double> v(values_.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(values_[i]);
    return RadialField(grid_, std::move(v), BoundaryTag::Free);
  }

  RadialField with_tag(BoundaryTag tag, double boundary_value = 0.0) const {
    return RadialField(grid_, values_, tag, boundary_value);
  }

  friend RadialField operator+(const RadialField& a, const RadialField& b) {
    check_same(a, b);
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values_[i] + b.values_[i];
    return RadialField(a.grid_, std::move(v));
  }
  friend RadialField operator-(const RadialField& a, const RadialField& b) {
    check_same(a, b);
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values_[i] - b.values_[i];
    return RadialField(a.grid_, std::move(v));
  }
  friend RadialField operator*(const RadialField& a, const RadialField& b) {
    check_same(a, b);
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values_[i] * b.values_[i];
    return RadialField(a.grid_, std::move(v));
  }
  friend RadialField operator*(double c, const RadialField& a) {
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = c * a.values_[i];
    return RadialField(a.grid_, std::move(v), a.tag_, c * a.boundary_);
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  static void check_same(const RadialField& a, const RadialField& b) {
    if (a.grid_ != b.grid_) throw DomainError("fields live on different grids");
  }

  GridPtr grid_;
  std::vector<double> values_;
  BoundaryTag tag_ = BoundaryTag::Free;
  double boundary_ = 0.0;
};

/// Integral of f(r) 4 pi r^2 dr over the grid's domain; with `volume_factor`
/// false the plain integral of f(r) dr is returned instead.
inline double integrate_ball(const RadialField& f, bool volume_factor = true) {
  const auto& g = *f.grid();
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = g.node(i);
    s += g.weight(i) * f[i] * (volume_factor ? 4.0 * std::numbers::pi * r * r : 1.0);
  }
  return s;
}

/// Per-panel spectral derivative d/dr at the nodes.
inline RadialField radial_derivative(const RadialField& f) {
  const auto& g = *f.grid();
  const int order = RadialGrid::kPanelOrder;
  static const Eigen::MatrixXd d_ref =
      quadrature::differentiation_matrix(quadrature::gauss_legendre(order).nodes);
  std::vector<double> out(g.size());
  for (int p = 0; p < g.panel_count(); ++p) {
    const double half = 0.5 * g.panel_width(p);
    for (int q = 0; q < order; ++q) {
      double s = 0.0;
      for (int k = 0; k < order; ++k) s += d_ref(q, k) * f[static_cast<std::size_t>(p) * order + k];
      const std::size_t i = static_cast<std::size_t>(p) * order + q;
      out[i] = s / half / g.jacobians()[i];
    }
  }
  return RadialField(f.grid(), std::move(out));
}

/// Radial Laplacian u'' + 2u'/r at the nodes from per-panel spectral derivatives.
inline RadialField radial_laplacian(const RadialField& f) {
  const RadialField d1 = radial_derivative(f);
  const RadialField d2 = radial_derivative(d1);
  std::vector<double> out(f.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = d2[i] + 2.0 * d1[i] / f.grid()->node(i);
  return RadialField(f.grid(), std::move(out));
}

/// Integral of |u'(r)|^2 4 pi r^2 dr.
inline double dirichlet_energy(const RadialField& u) {
  const RadialField du = radial_derivative(u);
  return integrate_ball(du * du);
}

/// Largest node gap among the nodes inside r <= 1/lambda (the gap from the
/// origin to the first node included).
inline double core_spacing(const RadialGrid& g, double lambda) {
  const double core = 1.0 / lambda;
  double prev = 0.0, gap = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = g.node(i);
    gap = std::max(gap, r - prev);
    if (r > core) break;
    prev = r;
  }
  return gap;
}

/// True when the grid resolves a bubble of concentration lambda (spacing <= 1/(8 lambda)).
inline bool resolves(const RadialGrid& g, double lambda) {
  return core_spacing(g, lambda) <= 1.0 / (8.0 * lambda);
}

inline void require_resolution(const RadialGrid& g, double lambda) {
  if (!resolves(g, lambda)) {
    std::ostringstream os;
    os << "grid spacing " << core_spacing(g, lambda) << " near the origin cannot resolve a bubble"
       << " with lambda = " << lambda << " (needs <= " << 1.0 / (8.0 * lambda) << ")";
    throw ResolutionError(os.str());
  }
}

/// Largest concentration the grid resolves, found by bisection in log(lambda).
inline double resolution_capacity(const RadialGrid& g) {
  // the core r <= 1/lambda of a very flat bubble reaches the coarse tail, so search upward from 1
  double lo = 1.0, hi = 1e12;
  if (!resolves(g, lo)) return 0.0;
  for (int it = 0; it < 200 && hi / lo > 1.0 + 1e-10; ++it) {
    const double mid = std::sqrt(lo * hi);
    (resolves(g, mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace choquard
