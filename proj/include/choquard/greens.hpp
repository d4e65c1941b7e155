#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "choquard/error.hpp"
#include "choquard/radial_grid.hpp"
#include "choquard/spectral_space.hpp"

namespace choquard {

/// Default discretization for ball solves that are not handed a grid.
inline GridPtr default_ball_grid() {
  static const GridPtr grid = make_grid(DomainKind::UnitBall, 256, 0.7);
  return grid;
}

/// Radial coefficient a(r) on the unit ball (also used for perturbations V):
/// a constant or a tabulated profile interpolated linearly.
class PotentialSpec {
 public:
  enum class Form { Constant, Radial };

  static PotentialSpec constant(double c) {
    if (!std::isfinite(c)) throw DomainError("potential constant must be finite");
    PotentialSpec p;
    p.form_ = Form::Constant;
    p.c_ = c;
    return p;
  }

  /// Table (r_k, v_k) with strictly increasing r_k in [0,1]; held constant
  /// outside the tabulated range.
  static PotentialSpec profile(std::vector<double> r, std::vector<double> v) {
    if (r.size() != v.size() || r.empty()) throw DomainError("profile needs matching, non-empty columns");
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (!std::isfinite(r[k]) || !std::isfinite(v[k])) throw DomainError("profile values must be finite");
      if (r[k] < 0.0 || r[k] > 1.0) throw DomainError("profile radii must lie in [0,1]");
      if (k > 0 && !(r[k] > r[k - 1])) throw DomainError("profile radii must be strictly increasing");
    }
    PotentialSpec p;
    p.form_ = Form::Radial;
    p.r_ = std::move(r);
    p.v_ = std::move(v);
    return p;
  }

  /// Samples a ball field at its nodes and at both ends of [0,1].
  static PotentialSpec from_field(const RadialField& f) {
    if (!f.grid()->is_ball()) throw DomainError("potential profile must live on the unit ball");
    std::vector<double> r{0.0}, v{f.value_at(0.0)};
    for (std::size_t i = 0; i < f.size(); ++i) {
      r.push_back(f.grid()->node(i));
      v.push_back(f[i]);
    }
    r.push_back(1.0);
    v.push_back(f.value_at(1.0));
    return profile(std::move(r), std::move(v));
  }

  /// Two-column CSV "r,value"; blank lines, '#' comments and one non-numeric header are skipped.
  static PotentialSpec from_csv(std::istream& in) {
    std::vector<double> r, v;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
      ++line_no;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream row(line);
      double a = 0.0, b = 0.0;
      std::string rest;
      if (!(row >> a >> b) || (row >> rest)) {
        if (r.empty() && !header_seen) {
          header_seen = true;
          continue;
        }
        std::ostringstream os;
        os << "malformed profile line " << line_no;
        throw DomainError(os.str());
      }
      r.push_back(a);
      v.push_back(b);
    }
    if (r.empty()) throw DomainError("profile file has no data rows");
    return profile(std::move(r), std::move(v));
  }

  static PotentialSpec from_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open profile file " + path);
    return from_csv(in);
  }

  /// a + eps b, exact for piecewise-linear profiles (sampled at the union of their breakpoints).
  static PotentialSpec combine(const PotentialSpec& a, const PotentialSpec& b, double eps) {
    if (!std::isfinite(eps)) throw DomainError("perturbation size must be finite");
    if (a.is_constant() && b.is_constant()) return constant(a.c_ + eps * b.c_);
    std::vector<double> r{0.0, 1.0};
    r.insert(r.end(), a.r_.begin(), a.r_.end());
    r.insert(r.end(), b.r_.begin(), b.r_.end());
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    std::vector<double> v(r.size());
    for (std::size_t k = 0; k < r.size(); ++k) v[k] = a(r[k]) + eps * b(r[k]);
    return profile(std::move(r), std::move(v));
  }

  Form form() const { return form_; }
  bool is_constant() const { return form_ == Form::Constant; }
  double constant_value() const { return c_; }

  double operator()(double r) const {
    if (form_ == Form::Constant) return c_;
    if (r <= r_.front()) return v_.front();
    if (r >= r_.back()) return v_.back();
    const auto it = std::upper_bound(r_.begin(), r_.end(), r);
    const std::size_t k = static_cast<std::size_t>(it - r_.begin());
    const double s = (r - r_[k - 1]) / (r_[k] - r_[k - 1]);
    return (1.0 - s) * v_[k - 1] + s * v_[k];
  }

  double at_origin() const { return (*this)(0.0); }

  double minimum() const {
    if (form_ == Form::Constant) return c_;
    return *std::min_element(v_.begin(), v_.end());
  }

  /// Samples at the nodes of a grid.
  std::vector<double> on(const RadialGrid& g) const {
    std::vector<double> out(g.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*this)(g.node(i));
    return out;
  }

  /// lambda_1(-Delta + a) on the unit ball, computed once per spec.
  double coercivity_margin() const;

  std::string describe() const {
    std::ostringstream os;
    if (form_ == Form::Constant) {
      os << "constant " << c_;
    } else {
      os << "profile with " << r_.size() << " rows";
    }
    return os.str();
  }

 private:
  struct Cache {
    std::once_flag once;
    double value = 0.0;
  };

  Form form_ = Form::Constant;
  double c_ = 0.0;
  std::vector<double> r_, v_;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

namespace detail {

// Galerkin matrices of -w'' + a w on [0,1] in the plain measure dr.
struct BallOperator {
  std::shared_ptr<const SpectralSpace> space;
  Eigen::MatrixXd stiffness, mass_a, mass;

  BallOperator(const GridPtr& grid, const PotentialSpec& a) {
    if (!grid->is_ball()) throw DomainError("Green's function solves need a unit-ball grid");
    space = std::make_shared<const SpectralSpace>(grid);
    const std::vector<double> one(grid->size(), 1.0);
    stiffness = space->stiffness(one);
    mass = space->mass(one);
    mass_a = space->mass(a.on(*grid));
  }

  Eigen::MatrixXd interior(const Eigen::MatrixXd& m) const {
    const Eigen::Index N = m.rows();
    return m.block(1, 1, N - 2, N - 2);
  }
};

}  // namespace detail

/// Smallest Dirichlet eigenvalue of -Delta + a on the unit ball (radial sector),
/// by shifted inverse iteration on w = r u.
inline double first_eigenvalue(const PotentialSpec& a, const GridPtr& grid = default_ball_grid()) {
  const detail::BallOperator op(grid, a);
  const Eigen::MatrixXd A = op.interior(op.stiffness + op.mass_a);
  const Eigen::MatrixXd M = op.interior(op.mass);
  const double shift = a.minimum() - 1.0;
  const Eigen::LLT<Eigen::MatrixXd> llt(A - shift * M);
  if (llt.info() != Eigen::Success) throw ConvergenceError("shifted operator is not positive definite");
  Eigen::VectorXd x = Eigen::VectorXd::Ones(A.rows());
  double lambda = 0.0;
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXd y = llt.solve(M * x);
    y /= std::sqrt(y.dot(M * y));
    const double next = y.dot(A * y);
    x = y;
    if (it > 0 && std::abs(next - lambda) <= 1e-15 * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

inline double PotentialSpec::coercivity_margin() const {
  std::call_once(cache_->once, [this] { cache_->value = first_eigenvalue(*this); });
  return cache_->value;
}

inline void require_coercive(const PotentialSpec& a) {
  const double margin = a.coercivity_margin();
  if (!(margin > 0.0)) {
    std::ostringstream os;
    os << "-Delta + a is not coercive: lambda_1 = " << margin << " for a = " << a.describe();
    throw CoercivityError(os.str());
  }
}

/// G_a(0, .), its regular part and the Robin value, with the spectral
/// representation of h = r G - 1/(4 pi) kept for evaluation off the nodes.
struct GreenData {
  RadialField G;
  RadialField H;
  double robin = 0.0;
  std::shared_ptr<const SpectralSpace> space;
  Eigen::VectorXd h;

  /// r G_a(0, r).
  double w_at(double r) const { return space->value_at(h, r) + 1.0 / (4.0 * std::numbers::pi); }
  double G_at(double r) const { return w_at(r) / r; }
  double H_at(double r) const { return r == 0.0 ? robin : space->value_at(h, r) / r; }
};

/// Solves -h'' + a h = -a / (4 pi), h(0) = 0, h(1) = -1/(4 pi); then
/// r G = h + 1/(4 pi), H = h / r and the Robin value is h'(0).
inline GreenData solve_green(const PotentialSpec& a, const GridPtr& grid = default_ball_grid()) {
  require_coercive(a);
  const detail::BallOperator op(grid, a);
  const double c = 1.0 / (4.0 * std::numbers::pi);
  const Eigen::Index N = op.space->dof_count();
  const Eigen::MatrixXd A = op.stiffness + op.mass_a;
  // load -a/(4 pi) tested against each basis function
  std::vector<double> a_nodes = a.on(*grid);
  Eigen::VectorXd load_nodes(grid->size());
  for (std::size_t i = 0; i < grid->size(); ++i)
    load_nodes[static_cast<Eigen::Index>(i)] = -c * a_nodes[i] * grid->weight(i);
  const Eigen::VectorXd load = op.space->value_operator().transpose() * load_nodes;
  Eigen::VectorXd h = Eigen::VectorXd::Zero(N);
  h[N - 1] = -c;
  const Eigen::VectorXd rhs = load.segment(1, N - 2) - A.block(1, N - 1, N - 2, 1) * h[N - 1];
  const Eigen::VectorXd inner = A.block(1, 1, N - 2, N - 2).llt().solve(rhs);
  if (!inner.allFinite()) throw ConvergenceError("Green's function solve failed");
  h.segment(1, N - 2) = inner;

  GreenData out;
  out.space = op.space;
  out.h = h;
  out.robin = op.space->derivative_at(h, 0.0);
  const Eigen::VectorXd hn = op.space->values_at_nodes(h);
  std::vector<double> G(grid->size()), H(grid->size());
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const double r = grid->node(i);
    H[i] = hn[static_cast<Eigen::Index>(i)] / r;
    G[i] = (hn[static_cast<Eigen::Index>(i)] + c) / r;
  }
  out.G = RadialField(grid, std::move(G), BoundaryTag::Dirichlet, 0.0);
  out.H = RadialField(grid, std::move(H), BoundaryTag::Free, -c);
  return out;
}

/// phi_a(0) = H_a(0, 0).
inline double robin_value(const PotentialSpec& a, const GridPtr& grid = default_ball_grid()) {
  return solve_green(a, grid).robin;
}

/// The constant lambda* in (0, lambda_1) with phi_{-lambda*}(0) = 0, by bisection.
inline double critical_level(double tol, const GridPtr& grid = default_ball_grid()) {
  if (!(tol > 0.0)) throw DomainError("critical_level needs tol > 0");
  const double lambda1 = first_eigenvalue(PotentialSpec::constant(0.0), grid);
  auto phi = [&](double lambda) { return robin_value(PotentialSpec::constant(-lambda), grid); };
  double lo = 1e-3, hi = lambda1 - 1e-3;
  const double f_lo = phi(lo), f_hi = phi(hi);
  if (!(f_lo < 0.0 && f_hi > 0.0)) {
    std::ostringstream os;
    os << "no sign change of the Robin value on [" << lo << ", " << hi << "]: " << f_lo << ", " << f_hi;
    throw ConvergenceError(os.str());
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (phi(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Q_V(0) = int V(y) G_a(0, y)^2 dy.
inline double q_v(const PotentialSpec& a, const PotentialSpec& V, const GridPtr& grid = default_ball_grid()) {
  const GreenData g = solve_green(a, grid);
  const double c = 1.0 / (4.0 * std::numbers::pi);
  const Eigen::VectorXd hn = g.space->values_at_nodes(g.h);
  double s = 0.0;
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const double w = hn[static_cast<Eigen::Index>(i)] + c;
    s += grid->weight(i) * V(grid->node(i)) * w * w;
  }
  return 4.0 * std::numbers::pi * s;
}

}  // namespace choquard
