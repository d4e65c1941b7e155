#pragma once

#include <cmath>
#include <deque>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "choquard/constants.hpp"
#include "choquard/error.hpp"
#include "choquard/parallel.hpp"
#include "choquard/quadrature.hpp"
#include "choquard/radial_grid.hpp"

namespace choquard {

/// Spherical average of |x-y|^{-e} times 4 pi, as a function of |x| = r and
/// |y| = s. The exponent e is alpha for the Riesz kernel and -alpha for the
/// reversed kernel |x-y|^{alpha}.
struct AngularKernel {
  enum class Branch { Generic, AlphaEqualsTwo };

  explicit AngularKernel(double exponent_)
      : exponent(exponent_),
        branch(std::abs(exponent_ - 2.0) > 1e-9 ? Branch::Generic : Branch::AlphaEqualsTwo) {}

  static AngularKernel riesz(Alpha alpha) { return AngularKernel(alpha.value()); }
  static AngularKernel reversed(double alpha) {
    if (!(alpha > 0.0)) throw DomainError("reversed kernel needs alpha > 0");
    return AngularKernel(-alpha);
  }

  double operator()(double r, double s) const { return evaluate(r, s, std::abs(r - s)); }

  /// Kernel value with the separation d = |r - s| supplied by the caller, which
  /// keeps full relative accuracy close to the diagonal.
  double evaluate(double r, double s, double d) const {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double m = std::min(r, s), M = std::max(r, s);
    if (m == 0.0) {
      if (M == 0.0) return exponent > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
      return 4.0 * std::numbers::pi * std::pow(M, -exponent);
    }
    const double p = 2.0 - exponent;
    if (d == 0.0) {
      if (branch == Branch::AlphaEqualsTwo || p <= 0.0) return std::numeric_limits<double>::infinity();
      return two_pi * std::pow(2.0 * r, p) / (r * r * p);
    }
    const double x = std::log1p(2.0 * m / d);
    if (branch == Branch::AlphaEqualsTwo) return two_pi * x / (r * s);
    return two_pi * std::pow(d, p) * std::expm1(p * x) / (r * s * p);
  }

  double exponent;
  Branch branch;
};

inline double angular_kernel(const AngularKernel& k, double r, double s) {
  if (!(r > 0.0 && s > 0.0)) throw DomainError("angular kernel needs r, s > 0");
  return k(r, s);
}

struct RieszOptions {
  /// Gauss-Legendre points per sub-piece of the near-field product rule.
  int near_order = 16;
  /// Dyadic refinement levels toward the singular point.
  int levels = 52;
  /// Neighbouring panels (on each side) treated with the product rule.
  int near_panels = 1;

  bool operator==(const RieszOptions&) const = default;
};

/// Discrete Riesz potential on a grid: (K f)_i approximates
/// int f(s) A(r_i, s) s^2 ds. Panels containing or adjacent to the target use
/// product integration of the panel interpolant, split at the target and refined
/// dyadically toward it; the remaining panels use the grid rule directly.
class RieszOperator {
 public:
  RieszOperator(GridPtr grid, AngularKernel kernel, RieszOptions opts = {})
      : grid_(std::move(grid)), kernel_(kernel), opts_(opts) {
    if (opts_.near_order < 2 || opts_.levels < 1 || opts_.near_panels < 0)
      throw DomainError("invalid Riesz quadrature options");
    near_rule_ = quadrature::gauss_legendre(opts_.near_order);
    const int n = static_cast<int>(grid_->size());
    K_.resize(n, n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
      const auto row = row_for(grid_->parameters()[i]);
      for (int j = 0; j < n; ++j) K_(static_cast<Eigen::Index>(i), j) = row[j];
    });
    Eigen::VectorXd W(n);
    for (int i = 0; i < n; ++i) W[i] = grid_->weight(i) * grid_->node(i) * grid_->node(i);
    const Eigen::MatrixXd WK = W.asDiagonal() * K_;
    B_ = 2.0 * std::numbers::pi * (WK + WK.transpose());
  }

  const GridPtr& grid() const { return grid_; }
  const AngularKernel& kernel() const { return kernel_; }
  const RieszOptions& options() const { return opts_; }

  /// Potential matrix K (targets by rows).
  const Eigen::MatrixXd& matrix() const { return K_; }
  /// Symmetric matrix B with D(f, g) ~ f^T B g (the 4 pi solid angle included).
  const Eigen::MatrixXd& bilinear_matrix() const { return B_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& f) const { return K_ * f; }

  /// Quadrature weights for the potential at an arbitrary radius (r = 0 allowed).
  std::vector<double> row_at(double r) const {
    if (!(r >= 0.0) || r > grid_->outer_radius() || std::isinf(r))
      throw DomainError("target radius outside the grid domain");
    return row_for(grid_->parameter(r));
  }

  /// Double integral from the upper triangle of B, so that D(f, g) == D(g, f) bit for bit.
  double bilinear(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
    const Eigen::Index n = B_.rows();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double row = B_(i, i) * (f[i] * g[i]);
      for (Eigen::Index j = i + 1; j < n; ++j) row += B_(i, j) * (f[i] * g[j] + f[j] * g[i]);
      total += row;
    }
    return total;
  }

  /// Shared operator per (grid, kernel, options); a small LRU keeps recent ones.
  static std::shared_ptr<const RieszOperator> cached(const GridPtr& grid, const AngularKernel& kernel,
                                                     const RieszOptions& opts = {}) {
    static std::mutex mutex;
    static std::deque<std::shared_ptr<const RieszOperator>> cache;
    {
      std::lock_guard lock(mutex);
      for (const auto& op : cache)
        if (op->grid_ == grid && op->kernel_.exponent == kernel.exponent && op->opts_ == opts) return op;
    }
    auto op = std::make_shared<const RieszOperator>(grid, kernel, opts);
    std::lock_guard lock(mutex);
    cache.push_front(op);
    if (cache.size() > 6) cache.pop_back();
    return op;
  }

 private:
  std::vector<double> row_for(double t0) const {
    const RadialGrid& g = *grid_;
    const int order = RadialGrid::kPanelOrder;
    std::vector<double> row(g.size(), 0.0);
    const double r0 = g.radius(t0);
    const int p0 = g.locate(t0);
    for (int p = 0; p < g.panel_count(); ++p) {
      if (std::abs(p - p0) <= opts_.near_panels) {
        near_panel(p, t0, r0, row);
        continue;
      }
      for (int q = 0; q < order; ++q) {
        const std::size_t j = static_cast<std::size_t>(p) * order + q;
        const double s = g.node(j);
        row[j] += g.weight(j) * s * s * kernel_(r0, s);
      }
    }
    return row;
  }

  void near_panel(int p, double t0, double r0, std::vector<double>& row) const {
    const double a = grid_->parameter_breaks()[p], b = grid_->parameter_breaks()[p + 1];
    if (t0 > a && t0 < b) {
      side(p, t0, r0, +1.0, 0.0, b - t0, row);
      side(p, t0, r0, -1.0, 0.0, t0 - a, row);
    } else if (t0 <= a) {
      side(p, t0, r0, +1.0, a - t0, b - t0, row);
    } else {
      side(p, t0, r0, -1.0, t0 - b, t0 - a, row);
    }
  }

  // Integrates the panel basis against the kernel over t = t0 + dir * u, u in [lo, hi].
  void side(int p, double t0, double r0, double dir, double lo, double hi, std::vector<double>& row) const {
    if (hi <= lo) return;
    double cur = hi;
    for (int level = 0; level < opts_.levels; ++level) {
      const double next = 0.5 * cur;
      if (next <= lo) {
        piece(p, t0, r0, dir, lo, cur, row);
        return;
      }
      piece(p, t0, r0, dir, next, cur, row);
      cur = next;
    }
    if (lo > 0.0) {
      piece(p, t0, r0, dir, lo, cur, row);
      return;
    }
    // Remaining [0, cur]: leading-order kernel behaviour times the basis at t0.
    const double tail = tail_integral(t0, r0, cur);
    double basis[RadialGrid::kPanelOrder];
    quadrature::lagrange_basis(grid_->reference_rule().nodes, grid_->reference_barycentric(),
                               grid_->to_reference(p, t0), basis);
    const double beta = tail_power(p);
    for (int q = 0; q < RadialGrid::kPanelOrder; ++q) {
      const std::size_t j = static_cast<std::size_t>(p) * RadialGrid::kPanelOrder + q;
      const double scale = beta == 0.0 || r0 == 0.0 ? 1.0 : std::pow(grid_->node(j) / r0, beta);
      row[j] += basis[q] * tail * scale;
    }
  }

  // On the whole-space panel that reaches t = 1 the interpolated quantity is
  // f s^beta rather than f: the weights int L_q A s^2 dr of a plain
  // interpolant diverge at infinity, while f s^beta stays bounded for fields
  // decaying like the bubble powers.
  double tail_power(int p) const {
    if (grid_->is_ball() || p != grid_->panel_count() - 1) return 0.0;
    return 5.0 - kernel_.exponent;
  }

  void piece(int p, double t0, double r0, double dir, double u0, double u1, std::vector<double>& row) const {
    const RadialGrid& g = *grid_;
    const double mid = 0.5 * (u0 + u1), half = 0.5 * (u1 - u0);
    const double beta = tail_power(p);
    const std::size_t base = static_cast<std::size_t>(p) * RadialGrid::kPanelOrder;
    double basis[RadialGrid::kPanelOrder];
    for (int k = 0; k < opts_.near_order; ++k) {
      const double u = mid + half * near_rule_.nodes[k];
      const double t = t0 + dir * u;
      const double s = g.radius(t);
      if (std::isinf(s)) continue;
      const double d = std::abs(g.radius_difference(t0, dir * u));
      const double w = half * near_rule_.weights[k] * kernel_.evaluate(r0, s, d) * s * s * g.jacobian(t);
      quadrature::lagrange_basis(g.reference_rule().nodes, g.reference_barycentric(), g.to_reference(p, t),
                                 basis);
      for (int q = 0; q < RadialGrid::kPanelOrder; ++q) {
        const double scale = beta == 0.0 ? 1.0 : std::pow(g.node(base + q) / s, beta);
        row[base + q] += w * basis[q] * scale;
      }
    }
  }

  double tail_integral(double t0, double r0, double eps) const {
    const double J = grid_->jacobian(t0);
    const double e = kernel_.exponent;
    if (r0 == 0.0) return 4.0 * std::numbers::pi * std::pow(J * eps, 3.0 - e) / (3.0 - e);
    const double two_pi = 2.0 * std::numbers::pi;
    if (kernel_.branch == AngularKernel::Branch::AlphaEqualsTwo)
      return two_pi * J * (eps * std::log(2.0 * r0) - (eps * std::log(J * eps) - eps));
    const double p = 2.0 - e;
    return two_pi * J / p *
           (std::pow(2.0 * r0, p) * eps - std::pow(J, p) * std::pow(eps, p + 1.0) / (p + 1.0));
  }

  GridPtr grid_;
  AngularKernel kernel_;
  RieszOptions opts_;
  quadrature::Rule near_rule_;
  Eigen::MatrixXd K_, B_;
};

namespace detail {

inline Eigen::VectorXd as_vector(const RadialField& f) {
  return Eigen::Map<const Eigen::VectorXd>(f.values().data(), static_cast<Eigen::Index>(f.size()));
}

inline void require_same_grid(const RadialField& f, const RadialField& g) {
  if (f.grid() != g.grid()) {
    if (f.grid()->kind() != g.grid()->kind())
      throw DomainError("double integral of fields on different domain kinds");
    throw DomainError("double integral needs both fields on the same grid");
  }
}

}  // namespace detail

/// I_alpha f at the grid nodes: int f(s) A_alpha(r, s) s^2 ds.
inline RadialField riesz_potential(const RadialField& f, Alpha alpha, const RieszOptions& opts = {}) {
  const auto op = RieszOperator::cached(f.grid(), AngularKernel::riesz(alpha), opts);
  const Eigen::VectorXd v = op->apply(detail::as_vector(f));
  return RadialField(f.grid(), std::vector<double>(v.data(), v.data() + v.size()));
}

/// I_alpha f at a single radius (r = 0 allowed).
inline double riesz_potential_at(const RadialField& f, Alpha alpha, double r, const RieszOptions& opts = {}) {
  const auto op = RieszOperator::cached(f.grid(), AngularKernel::riesz(alpha), opts);
  const auto row = op->row_at(r);
  double s = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * f[j];
  return s;
}

/// D_alpha(f, g) = int int f(x) g(y) |x - y|^{-alpha} dx dy for radial f, g.
inline double hl_double_integral(const RadialField& f, const RadialField& g, Alpha alpha,
                                 const RieszOptions& opts = {}) {
  detail::require_same_grid(f, g);
  const auto op = RieszOperator::cached(f.grid(), AngularKernel::riesz(alpha), opts);
  return op->bilinear(detail::as_vector(f), detail::as_vector(g));
}

/// ||u||_HL = D_alpha(|u|^{6-alpha}, |u|^{6-alpha})^{1/(2(6-alpha))}.
inline double hls_norm(const RadialField& u, Alpha alpha, const RieszOptions& opts = {}) {
  const double q = alpha.critical_power();
  const RadialField h = u.map([q](double v) { return std::pow(std::abs(v), q); });
  const double d = hl_double_integral(h, h, alpha, opts);
  return std::pow(std::max(d, 0.0), 1.0 / (2.0 * q));
}

/// Double integral with the kernel |x - y|^{+alpha}; ball fields only.
inline double rhls_double_integral(const RadialField& f, const RadialField& g, double alpha,
                                   const RieszOptions& opts = {}) {
  detail::require_same_grid(f, g);
  if (!f.grid()->is_ball()) throw DomainError("reversed kernel diverges on the whole space");
  const auto op = RieszOperator::cached(f.grid(), AngularKernel::reversed(alpha), opts);
  return op->bilinear(detail::as_vector(f), detail::as_vector(g));
}

}  // namespace choquard
