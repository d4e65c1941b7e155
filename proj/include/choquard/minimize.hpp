#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "choquard/bubbles.hpp"
#include "choquard/constants.hpp"
#include "choquard/error.hpp"
#include "choquard/greens.hpp"
#include "choquard/parallel.hpp"
#include "choquard/quadrature.hpp"
#include "choquard/radial_grid.hpp"
#include "choquard/riesz.hpp"
#include "choquard/spectral_space.hpp"

namespace choquard {

enum class Concentration { Achieved, Concentrating };

inline const char* to_string(Concentration c) {
  return c == Concentration::Achieved ? "Achieved" : "Concentrating";
}

struct MinimizeOptions {
  int grid_n = 512;
  double grading = 0.7;
  /// Stationarity target for the relative Euler-Lagrange residual.
  double tolerance = 1e-8;
  /// Residual still accepted as stationary when rounding stalls the iteration above `tolerance`.
  double stationarity_floor = 1e-6;
  int max_iterations = 2000;
  int memory = 16;
  std::vector<double> restart_lambdas{4.0, 8.0, 16.0};
  /// Also restart from the best test function psi over a geometric lambda ladder.
  bool psi_scan = true;
};

struct ConcentrationDiagnostics {
  double lambda_hat = 0.0;
  double core_mass = 0.0;
  bool low_amplitude = false;
};

/// lambda_hat = (u(0) / amplitude)^2 from the height law U_{0,lambda}(0) = lambda^{1/2};
/// core_mass is the share of int u^6 inside r <= 4 / lambda_hat.
inline ConcentrationDiagnostics concentration_diagnostics(const RadialField& u, double amplitude = 1.0) {
  ConcentrationDiagnostics d;
  const double u0 = u.value_at(0.0);
  d.low_amplitude = u.max_abs() < 1e-8 * amplitude;
  d.lambda_hat = (u0 / amplitude) * (u0 / amplitude);
  const double total = integrate_ball(u.map([](double v) { return std::pow(v, 6); }));
  if (!(total > 0.0) || !(d.lambda_hat > 0.0)) return d;
  const double R = std::min(4.0 / d.lambda_hat, u.grid()->outer_radius());
  // graded rule on [0, R]: the profile varies on the scale R / 4
  const auto rule = quadrature::gauss_legendre(48);
  double core = 0.0;
  for (int piece = 0; piece < 4; ++piece) {
    const double lo = R * piece / 4.0, hi = R * (piece + 1) / 4.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      const double r = 0.5 * (lo + hi) + 0.5 * (hi - lo) * rule.nodes[k];
      core += 0.5 * (hi - lo) * rule.weights[k] * std::pow(u.value_at(r), 6) * 4.0 * std::numbers::pi * r * r;
    }
  }
  d.core_mass = core / total;
  return d;
}

struct MinimizeResult {
  /// Estimate of S_HL(a): the discrete minimum, capped by the test-function bound S_HL.
  double energy = 0.0;
  /// Raw discrete quotient at the returned minimizer.
  double discrete_energy = 0.0;
  RadialField minimizer;
  std::shared_ptr<const SpectralSpace> space;
  Eigen::VectorXd coefficients;
  int iterations = 0;
  double el_residual = 0.0;
  double pohozaev_residual = 0.0;
  Concentration concentration = Concentration::Concentrating;
  double lambda_hat = 0.0;
  double core_mass = 0.0;
  std::string start;
  Alpha alpha{1.0};
  PotentialSpec potential = PotentialSpec::constant(0.0);
};

namespace detail {

// Discrete quotient Q(c) = c^T A c / (h^T B h)^{1/q}, h = |E c|^q, q = 6 - alpha,
// over the continuous elements with the dof at r = 1 removed.
class HlProblem {
 public:
  struct Eval {
    double value = 0.0, quad = 0.0, nonlocal = 0.0;
    Eigen::VectorXd grad;
  };

  HlProblem(const GridPtr& grid, const PotentialSpec& a, Alpha alpha) : grid_(grid), a_(a), alpha_(alpha) {
    if (!grid->is_ball()) throw DomainError("the minimization runs on a unit-ball grid");
    require_coercive(a);
    space_ = std::make_shared<const SpectralSpace>(grid);
    N_ = space_->dof_count() - 1;
    E_ = space_->value_operator().leftCols(N_);
    const auto one = space_->volume_weight([](double) { return 1.0; });
    const auto av = a.on(*grid);
    std::vector<double> rho_a(grid->size());
    for (std::size_t i = 0; i < rho_a.size(); ++i) rho_a[i] = one[i] * av[i];
    A_ = (space_->stiffness(one) + space_->mass(rho_a)).topLeftCorner(N_, N_);
    A_ = 0.5 * (A_ + A_.transpose());
    M_ = space_->mass(one).topLeftCorner(N_, N_);
    llt_.compute(A_);
    if (llt_.info() != Eigen::Success) throw CoercivityError("discrete -Delta + a is not positive definite");
    op_ = RieszOperator::cached(grid, AngularKernel::riesz(alpha));
    q_ = alpha.critical_power();
  }

  const GridPtr& grid() const { return grid_; }
  const std::shared_ptr<const SpectralSpace>& space() const { return space_; }
  Eigen::Index size() const { return N_; }
  double power() const { return q_; }
  Alpha alpha() const { return alpha_; }
  const PotentialSpec& potential() const { return a_; }

  Eval evaluate(const Eigen::VectorXd& c, bool with_grad) const {
    Eval e;
    const Eigen::VectorXd u = E_ * c;
    Eigen::VectorXd h(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) h[i] = std::pow(std::abs(u[i]), q_);
    const Eigen::VectorXd Bh = op_->bilinear_matrix() * h;
    const Eigen::VectorXd Ac = A_ * c;
    e.quad = c.dot(Ac);
    e.nonlocal = h.dot(Bh);
    if (!(e.nonlocal > 0.0)) throw ConvergenceError("iterate has vanishing nonlocal norm");
    e.value = e.quad / std::pow(e.nonlocal, 1.0 / q_);
    if (with_grad) {
      Eigen::VectorXd t(u.size());
      for (Eigen::Index i = 0; i < u.size(); ++i)
        t[i] = std::pow(std::abs(u[i]), q_ - 1.0) * (u[i] < 0.0 ? -1.0 : 1.0) * Bh[i];
      e.grad = (2.0 / std::pow(e.nonlocal, 1.0 / q_)) * (Ac - (e.quad / e.nonlocal) * (E_.transpose() * t));
    }
    return e;
  }

  /// sqrt(g^T A^{-1} g) / (2 sqrt(Q)) at a point with c^T A c = Q, i.e. the A-dual norm of the
  /// Euler-Lagrange residual relative to the size of -Delta v + a v.
  double residual(const Eigen::VectorXd& c, const Eval& e) const {
    const double scale = std::pow(e.nonlocal, 1.0 / q_) / 2.0;
    const Eigen::VectorXd rho = scale * e.grad;
    return std::sqrt(std::max(rho.dot(llt_.solve(rho)), 0.0)) / std::sqrt(c.dot(A_ * c));
  }

  Eigen::VectorXd precondition(const Eigen::VectorXd& g) const { return llt_.solve(g); }

  Eigen::VectorXd normalized(const Eigen::VectorXd& c) const {
    const Eval e = evaluate(c, false);
    return c / std::pow(e.nonlocal, 1.0 / (2.0 * q_));
  }

  /// Lowest eigenvector of A relative to the volume mass matrix.
  Eigen::VectorXd ground_state() const {
    Eigen::VectorXd x = Eigen::VectorXd::Ones(N_);
    for (int it = 0; it < 200; ++it) {
      Eigen::VectorXd y = llt_.solve(M_ * x);
      y /= std::sqrt(y.dot(M_ * y));
      if ((y - x).norm() < 1e-13 * y.norm()) {
        x = y;
        break;
      }
      x = y;
    }
    return x.cwiseAbs();
  }

  Eigen::VectorXd from_function(const std::function<double(double)>& f) const {
    return space_->interpolate(f).head(N_);
  }

  RadialField field(const Eigen::VectorXd& c) const {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(N_ + 1);
    full.head(N_) = c;
    return space_->to_field(full, BoundaryTag::Dirichlet);
  }

  Eigen::VectorXd full(const Eigen::VectorXd& c) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(N_ + 1);
    out.head(N_) = c;
    return out;
  }

 private:
  GridPtr grid_;
  PotentialSpec a_;
  Alpha alpha_;
  std::shared_ptr<const SpectralSpace> space_;
  Eigen::Index N_ = 0;
  Eigen::MatrixXd E_, A_, M_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  std::shared_ptr<const RieszOperator> op_;
  double q_ = 5.0;
};

struct RunOutcome {
  Eigen::VectorXd c;
  double value = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// L-BFGS in the metric of A with Armijo backtracking. Q is invariant under scaling,
// so the iterate is renormalized only when its HL norm drifts.
inline RunOutcome lbfgs(const HlProblem& P, Eigen::VectorXd c, const MinimizeOptions& opts) {
  c = P.normalized(c.cwiseAbs());
  auto e = P.evaluate(c, true);
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> mem;
  RunOutcome out;
  double res = P.residual(c, e);
  int stalls = 0;
  int it = 0;
  double best_res = res;
  int since_best = 0;
  for (; it < opts.max_iterations && res > opts.tolerance; ++it) {
    // two-loop recursion
    Eigen::VectorXd q = e.grad;
    std::vector<double> alphas(mem.size());
    for (int k = static_cast<int>(mem.size()) - 1; k >= 0; --k) {
      const auto& [s, y] = mem[static_cast<std::size_t>(k)];
      alphas[static_cast<std::size_t>(k)] = s.dot(q) / y.dot(s);
      q -= alphas[static_cast<std::size_t>(k)] * y;
    }
    Eigen::VectorXd d = P.precondition(q);
    if (!mem.empty()) {
      const auto& [s, y] = mem.back();
      d *= y.dot(s) / y.dot(P.precondition(y));
    } else {
      // first step: move by at most 5% of |c|_A
      const double ratio = std::sqrt(d.dot(e.grad)) / std::sqrt(e.quad);
      if (ratio > 0.05) d *= 0.05 / ratio;
    }
    for (std::size_t k = 0; k < mem.size(); ++k) {
      const auto& [s, y] = mem[k];
      const double beta = y.dot(d) / y.dot(s);
      d += (alphas[k] - beta) * s;
    }
    d = -d;
    double slope = e.grad.dot(d);
    if (!(slope < 0.0)) {
      mem.clear();
      d = -P.precondition(e.grad);
      const double ratio = std::sqrt(-d.dot(e.grad)) / std::sqrt(e.quad);
      if (ratio > 0.05) d *= 0.05 / ratio;
      slope = e.grad.dot(d);
    }
    double step = 1.0;
    bool accepted = false;
    HlProblem::Eval trial;
    Eigen::VectorXd next;
    double trial_res = res;
    for (int ls = 0; ls < 40; ++ls) {
      next = c + step * d;
      trial = P.evaluate(next, true);
      if (trial.value <= e.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      // near the minimum the decrease drowns in rounding; fall back to the residual
      if (trial.value - e.value <= 1e-13 * std::abs(e.value)) {
        trial_res = P.residual(next, trial);
        if (trial_res < res) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) {
      // no decrease left at working precision
      if (mem.empty() || ++stalls > 2) break;
      mem.clear();
      continue;
    }
    stalls = 0;
    const Eigen::VectorXd s = next - c, y = trial.grad - e.grad;
    if (y.dot(s) > 1e-300) {
      mem.emplace_back(s, y);
      if (static_cast<int>(mem.size()) > opts.memory) mem.pop_front();
    }
    c = next;
    e = trial;
    if (e.nonlocal < 0.5 || e.nonlocal > 2.0) {
      c = P.normalized(c);
      e = P.evaluate(c, true);
      mem.clear();
    }
    res = P.residual(c, e);
    if (res < 0.5 * best_res) {
      best_res = res;
      since_best = 0;
    } else if (++since_best > 100 && res <= opts.stationarity_floor) {
      break;
    }
  }
  // the minimizer is |v|; keep the sign flip only if it does not raise the quotient
  const Eigen::VectorXd ca = P.normalized(c.cwiseAbs());
  const auto ea = P.evaluate(ca, true);
  if (ea.value <= e.value) {
    c = ca;
    e = ea;
  } else {
    c = P.normalized(c);
    e = P.evaluate(c, true);
  }
  out.c = c;
  out.value = e.value;
  out.residual = P.residual(c, e);
  out.iterations = it;
  out.converged = out.residual <= std::max(opts.tolerance, opts.stationarity_floor);
  return out;
}

inline std::function<double(double)> psi_profile(double lambda, Alpha alpha, const GreenData& ga,
                                                  const GreenData& g0) {
  const double cbar = constants::bubble_normalization(alpha), shift = projection_shift(lambda);
  const double coef = 4.0 * std::numbers::pi * cbar / std::sqrt(lambda);
  return [=, &ga, &g0](double r) {
    return cbar * (bubble_value(lambda, r) - shift) + coef * (ga.H_at(r) - g0.H_at(r));
  };
}

}  // namespace detail

/// Factor turning an HL-normalized minimizer with quotient `energy` into a solution.
inline double least_energy_scale(double energy, Alpha alpha) {
  return std::pow(energy, 1.0 / (2.0 * (5.0 - alpha.value())));
}

/// -(1/2) int_{dB} |grad u|^2 = int (a + r a'/2) u^2, relative mismatch; u must vanish on r = 1.
inline double pohozaev_residual(const RadialField& u, const PotentialSpec& a, double floor = 1e-300) {
  if (!u.grid()->is_ball()) throw DomainError("the Pohozaev identity is evaluated on the unit ball");
  const SpectralSpace V(u.grid());
  Eigen::VectorXd c = V.from_field(u);
  c[V.last_dof()] = 0.0;
  const double du1 = V.derivative_at(c, 1.0);
  const double lhs = -0.5 * 4.0 * std::numbers::pi * du1 * du1;
  double rhs = 0.0;
  const auto& g = *u.grid();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = g.node(i);
    double da = 0.0;
    if (!a.is_constant()) {
      const double h = 1e-6;
      const double lo = std::max(r - h, 0.0), hi = std::min(r + h, 1.0);
      da = (a(hi) - a(lo)) / (hi - lo);
    }
    rhs += g.weight(i) * (a(r) + 0.5 * r * da) * u[i] * u[i] * 4.0 * std::numbers::pi * r * r;
  }
  return std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), floor});
}

inline MinimizeResult minimize_shl(const PotentialSpec& a, Alpha alpha, const MinimizeOptions& opts = {}) {
  require_coercive(a);
  const GridPtr grid = make_grid(DomainKind::UnitBall, opts.grid_n, opts.grading);
  const detail::HlProblem P(grid, a, alpha);
  const double cbar = constants::bubble_normalization(alpha);

  struct Start {
    std::string label;
    Eigen::VectorXd c;
  };
  std::vector<Start> starts;
  for (double lambda : opts.restart_lambdas) {
    if (!resolves(*grid, lambda)) continue;
    const double shift = projection_shift(lambda);
    starts.push_back({"bubble:" + std::to_string(lambda).substr(0, std::to_string(lambda).find('.')),
                      P.from_function([=](double r) { return cbar * (bubble_value(lambda, r) - shift); })});
  }
  const Eigen::VectorXd eig = P.normalized(P.ground_state());
  starts.push_back({"eigenfunction", eig});
  for (const auto& s : std::vector<Start>(starts.begin(), starts.end() - 1)) {
    if (s.label != "bubble:4" && s.label != "bubble:16") continue;
    starts.push_back({"mixture:" + s.label.substr(7), eig + P.normalized(s.c)});
  }
  if (opts.psi_scan) {
    const GreenData ga = solve_green(a, grid), g0 = solve_green(PotentialSpec::constant(0.0), grid);
    const double top = std::min(resolution_capacity(*grid) / 4.0, 1e4);
    double best = std::numeric_limits<double>::infinity(), best_lambda = 0.0;
    for (double lambda = 2.0; lambda <= top; lambda *= 1.1) {
      const double v = P.evaluate(P.from_function(detail::psi_profile(lambda, alpha, ga, g0)), false).value;
      if (v < best) {
        best = v;
        best_lambda = lambda;
      }
    }
    if (best_lambda > 0.0)
      starts.push_back({"psi", P.from_function(detail::psi_profile(best_lambda, alpha, ga, g0))});
  }

  std::vector<detail::RunOutcome> runs(starts.size());
  parallel_for(starts.size(), [&](std::size_t k) { runs[k] = detail::lbfgs(P, starts[k].c, opts); });

  std::size_t pick = 0;
  std::vector<double> lambda_hats(runs.size());
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const double scale = least_energy_scale(runs[k].value, alpha);
    lambda_hats[k] = concentration_diagnostics(P.field(scale * runs[k].c), cbar).lambda_hat;
  }
  for (std::size_t k = 1; k < runs.size(); ++k) {
    const double diff = runs[k].value - runs[pick].value;
    if (diff < -1e-8 || (std::abs(diff) <= 1e-8 && lambda_hats[k] < lambda_hats[pick])) pick = k;
  }
  const auto& run = runs[pick];

  MinimizeResult res;
  res.alpha = alpha;
  res.potential = a;
  res.space = P.space();
  res.coefficients = P.full(run.c);
  res.minimizer = P.field(run.c);
  res.discrete_energy = run.value;
  res.energy = std::min(run.value, constants::shl_constant(alpha));
  res.iterations = run.iterations;
  res.el_residual = run.residual;
  res.start = starts[pick].label;
  const RadialField u = least_energy_scale(run.value, alpha) * res.minimizer;
  const auto diag = concentration_diagnostics(u, cbar);
  res.lambda_hat = diag.lambda_hat;
  res.core_mass = diag.core_mass;
  res.pohozaev_residual = pohozaev_residual(u, a);
  res.concentration = run.converged && diag.lambda_hat <= resolution_capacity(*grid) ? Concentration::Achieved
                                                                                       : Concentration::Concentrating;
  return res;
}

/// u_a = S_HL(a)^{1/(2(5-alpha))} |v_a|, solving -Delta u + a u = I_alpha[u^{6-alpha}] u^{5-alpha}.
inline RadialField least_energy_solution(const MinimizeResult& res) {
  if (res.concentration != Concentration::Achieved)
    throw ConvergenceError("the infimum is not achieved on this grid (concentrating minimizing sequence)");
  return least_energy_scale(res.discrete_energy, res.alpha) *
         res.minimizer.map([](double v) { return std::abs(v); }).with_tag(BoundaryTag::Dirichlet);
}

/// Max-norm residual of -Delta u + a u - I_alpha[u^{6-alpha}] u^{5-alpha} relative to max |-Delta u + a u|.
/// Measured on default_ball_grid() when it resolves the profile: per-panel second derivatives lose
/// ~eps/h^2 on the innermost panels of finer grids.
inline double euler_lagrange_residual(const RadialField& field, const PotentialSpec& a, Alpha alpha) {
  RadialField u = field;
  const auto coarse = default_ball_grid();
  if (field.grid()->size() > coarse->size()) {
    const double lambda = concentration_diagnostics(field, constants::bubble_normalization(alpha)).lambda_hat;
    if (resolves(*coarse, std::max(lambda, 1.0)))
      u = RadialField::sample(coarse, [&field](double r) { return field.value_at(r); }, BoundaryTag::Dirichlet);
  }
  const SpectralSpace V(u.grid());
  Eigen::VectorXd c = V.from_field(u);
  c[V.last_dof()] = 0.0;
  const Eigen::VectorXd d1 = V.derivative_at_nodes(c), d2 = V.second_derivative_at_nodes(c);
  const double q = alpha.critical_power();
  const auto pot = riesz_potential(u.map([q](double v) { return std::pow(std::abs(v), q); }), alpha);
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double r = u.grid()->node(i);
    const double lin = -(d2[k] + 2.0 * d1[k] / r) + a(r) * u[i];
    const double rhs = pot[i] * std::pow(std::abs(u[i]), q - 2.0) * u[i];
    worst = std::max(worst, std::abs(lin - rhs));
    scale = std::max(scale, std::abs(lin));
  }
  return worst / scale;
}

}  // namespace choquard
