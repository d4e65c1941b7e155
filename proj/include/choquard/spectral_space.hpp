#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "choquard/quadrature.hpp"
#include "choquard/radial_grid.hpp"

namespace choquard {

/// Continuous piecewise polynomials of degree 15 on the panels of a grid,
/// written in the parameter t and carried by their values at the
/// Gauss-Lobatto points of each panel (shared at panel breaks). Values at the
/// Gauss-Legendre nodes of the grid are an exact interpolation of these.
class SpectralSpace {
 public:
  static constexpr int kDegree = RadialGrid::kPanelOrder - 1;
  static constexpr int kLocal = kDegree + 1;

  explicit SpectralSpace(GridPtr grid) : grid_(std::move(grid)) {
    const auto gll = quadrature::gauss_lobatto(kLocal);
    const auto& gl = grid_->reference_rule();
    ref_gll_ = gll.nodes;
    interp_ = quadrature::interpolation_matrix(gll.nodes, gl.nodes);
    d1_ = quadrature::derivative_matrix(gll.nodes, gl.nodes, 1);
    d2_ = quadrature::derivative_matrix(gll.nodes, gl.nodes, 2);
    d1_gll_ = quadrature::differentiation_matrix(gll.nodes);
    from_gl_ = quadrature::interpolation_matrix(gl.nodes, gll.nodes);
    const int P = grid_->panel_count();
    dof_t_.resize(static_cast<std::size_t>(P) * kDegree + 1);
    for (int p = 0; p < P; ++p) {
      const double a = grid_->parameter_breaks()[p], b = grid_->parameter_breaks()[p + 1];
      for (int q = 0; q < kLocal; ++q)
        dof_t_[static_cast<std::size_t>(p) * kDegree + q] = 0.5 * (a + b) + 0.5 * (b - a) * gll.nodes[q];
    }
    dof_t_.front() = grid_->parameter_breaks().front();
    dof_t_.back() = grid_->parameter_breaks().back();
    build_node_operators();
  }

  const GridPtr& grid() const { return grid_; }
  int dof_count() const { return static_cast<int>(dof_t_.size()); }
  int last_dof() const { return dof_count() - 1; }
  double dof_parameter(int k) const { return dof_t_[k]; }
  double dof_radius(int k) const { return grid_->radius(dof_t_[k]); }

  /// Values at the Gauss-Legendre nodes (n x N).
  const Eigen::MatrixXd& value_operator() const { return value_op_; }
  /// d/dr at the Gauss-Legendre nodes (n x N).
  const Eigen::MatrixXd& derivative_operator() const { return deriv_op_; }

  Eigen::VectorXd values_at_nodes(const Eigen::VectorXd& c) const { return value_op_ * c; }
  Eigen::VectorXd derivative_at_nodes(const Eigen::VectorXd& c) const { return deriv_op_ * c; }

  /// d^2/dr^2 at the Gauss-Legendre nodes.
  Eigen::VectorXd second_derivative_at_nodes(const Eigen::VectorXd& c) const {
    Eigen::VectorXd out(grid_->size());
    const int P = grid_->panel_count();
    for (int p = 0; p < P; ++p) {
      const double half = 0.5 * grid_->panel_width(p);
      const Eigen::VectorXd local = c.segment(static_cast<Eigen::Index>(p) * kDegree, kLocal);
      const Eigen::VectorXd dt = d1_ * local / half;
      const Eigen::VectorXd dtt = d2_ * local / (half * half);
      for (int q = 0; q < kLocal; ++q) {
        const std::size_t i = static_cast<std::size_t>(p) * kLocal + q;
        const double t = grid_->parameters()[i];
        const double j = grid_->jacobian(t);
        // d2u/dr2 = (u_tt - u_t * r_tt / r_t) / r_t^2
        const double jt = grid_->is_ball() ? 0.0 : 2.0 * grid_->map_scale() / std::pow(1.0 - t, 3);
        out[static_cast<Eigen::Index>(i)] = (dtt[q] - dt[q] * jt / j) / (j * j);
      }
    }
    return out;
  }

  /// Polynomial value at radius r.
  double value_at(const Eigen::VectorXd& c, double r) const { return evaluate(c, grid_->parameter(r), 0); }
  /// du/dr at radius r.
  double derivative_at(const Eigen::VectorXd& c, double r) const {
    const double t = grid_->parameter(r);
    return evaluate(c, t, 1) / grid_->jacobian(t);
  }

  /// Nodal interpolation of f at the dof radii; `at_infinity` is used for the
  /// whole-space dof at t = 1.
  template <class F>
  Eigen::VectorXd interpolate(F&& f, double at_infinity = 0.0) const {
    Eigen::VectorXd c(dof_count());
    for (int k = 0; k < dof_count(); ++k) {
      const double r = dof_radius(k);
      c[k] = std::isinf(r) ? at_infinity : f(r);
    }
    return c;
  }

  /// Projects a node-sampled field onto the space: per-panel interpolation at
  /// the Lobatto points, averaged at shared breaks.
  Eigen::VectorXd from_field(const RadialField& f) const {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(dof_count());
    Eigen::VectorXd count = Eigen::VectorXd::Zero(dof_count());
    const int P = grid_->panel_count();
    for (int p = 0; p < P; ++p) {
      Eigen::VectorXd local(kLocal);
      for (int q = 0; q < kLocal; ++q) local[q] = f[static_cast<std::size_t>(p) * kLocal + q];
      const Eigen::VectorXd at = from_gl_ * local;
      for (int q = 0; q < kLocal; ++q) {
        c[static_cast<Eigen::Index>(p) * kDegree + q] += at[q];
        count[static_cast<Eigen::Index>(p) * kDegree + q] += 1.0;
      }
    }
    return c.cwiseQuotient(count);
  }

  RadialField to_field(const Eigen::VectorXd& c, BoundaryTag tag = BoundaryTag::Free) const {
    const Eigen::VectorXd v = values_at_nodes(c);
    return RadialField(grid_, std::vector<double>(v.data(), v.data() + v.size()), tag, 0.0);
  }

  /// Gram matrix of derivatives: int phi_i'(r) phi_j'(r) rho(r) dr.
  Eigen::MatrixXd stiffness(const std::vector<double>& rho_at_nodes) const {
    return weighted_gram(deriv_op_, rho_at_nodes);
  }
  /// Gram matrix of values: int phi_i(r) phi_j(r) rho(r) dr.
  Eigen::MatrixXd mass(const std::vector<double>& rho_at_nodes) const {
    return weighted_gram(value_op_, rho_at_nodes);
  }

  /// rho(r) = 4 pi r^2 q(r) sampled at the nodes.
  std::vector<double> volume_weight(const std::function<double(double)>& q) const {
    std::vector<double> out(grid_->size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double r = grid_->node(i);
      out[i] = 4.0 * std::numbers::pi * r * r * q(r);
    }
    return out;
  }

 private:
  void build_node_operators() {
    const int n = static_cast<int>(grid_->size());
    value_op_ = Eigen::MatrixXd::Zero(n, dof_count());
    deriv_op_ = Eigen::MatrixXd::Zero(n, dof_count());
    for (int p = 0; p < grid_->panel_count(); ++p) {
      const double half = 0.5 * grid_->panel_width(p);
      for (int q = 0; q < kLocal; ++q) {
        const int i = p * kLocal + q;
        const double j = grid_->jacobians()[i];
        for (int k = 0; k < kLocal; ++k) {
          value_op_(i, p * kDegree + k) = interp_(q, k);
          deriv_op_(i, p * kDegree + k) = d1_(q, k) / half / j;
        }
      }
    }
  }

  Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& op, const std::vector<double>& rho) const {
    Eigen::VectorXd wr(grid_->size());
    for (std::size_t i = 0; i < grid_->size(); ++i) wr[static_cast<Eigen::Index>(i)] = grid_->weight(i) * rho[i];
    return op.transpose() * wr.asDiagonal() * op;
  }

  double evaluate(const Eigen::VectorXd& c, double t, int order) const {
    const int p = grid_->locate(t);
    const double x = grid_->to_reference(p, t);
    const Eigen::MatrixXd m = quadrature::derivative_matrix(ref_gll_, {x}, order);
    double s = 0.0;
    for (int k = 0; k < kLocal; ++k) s += m(0, k) * c[static_cast<Eigen::Index>(p) * kDegree + k];
    return s / std::pow(0.5 * grid_->panel_width(p), order);
  }

  GridPtr grid_;
  std::vector<double> ref_gll_;
  Eigen::MatrixXd interp_, d1_, d2_, d1_gll_, from_gl_;
  std::vector<double> dof_t_;
  Eigen::MatrixXd value_op_, deriv_op_;
};

}  // namespace choquard
