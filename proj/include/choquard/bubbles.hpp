#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>

#include <Eigen/Dense>

#include "choquard/constants.hpp"
#include "choquard/error.hpp"
#include "choquard/greens.hpp"
#include "choquard/radial_grid.hpp"
#include "choquard/riesz.hpp"
#include "choquard/spectral_space.hpp"

namespace choquard {

struct BubbleParams {
  double lambda = 1.0;
  Alpha alpha{1.0};
  /// Scale by C_bar so the bubble solves the whole-space Choquard equation.
  bool normalized = false;

  BubbleParams(double lambda_, Alpha alpha_, bool normalized_ = false)
      : lambda(lambda_), alpha(alpha_), normalized(normalized_) {
    if (!(lambda > 0.0 && std::isfinite(lambda))) throw DomainError("bubble concentration must be positive");
  }

  double scale() const { return normalized ? constants::bubble_normalization(alpha) : 1.0; }
};

/// U_{0,lambda}(r) = lambda^{1/2} (1 + lambda^2 r^2)^{-1/2}.
inline double bubble_value(double lambda, double r) {
  return std::sqrt(lambda) / std::sqrt(1.0 + lambda * lambda * r * r);
}

/// dU_{0,lambda}/dlambda = (1/2) lambda^{-1/2} (1 - lambda^2 r^2) (1 + lambda^2 r^2)^{-3/2}.
inline double bubble_lambda_derivative(double lambda, double r) {
  const double q = lambda * lambda * r * r;
  return 0.5 / std::sqrt(lambda) * (1.0 - q) * std::pow(1.0 + q, -1.5);
}

/// Boundary value lambda^{1/2} (1 + lambda^2)^{-1/2} removed by the projection onto H^1_0(B_1).
inline double projection_shift(double lambda) { return bubble_value(lambda, 1.0); }

inline RadialField bubble(const BubbleParams& p, const GridPtr& grid) {
  require_resolution(*grid, p.lambda);
  const double c = p.scale();
  const auto tag = grid->is_ball() ? BoundaryTag::Free : BoundaryTag::Decaying;
  return RadialField::sample(grid, [&](double r) { return c * bubble_value(p.lambda, r); }, tag);
}

/// P U_{0,lambda} = U_{0,lambda} - U_{0,lambda}(1) on the unit ball.
inline RadialField project_bubble(const BubbleParams& p, const GridPtr& grid) {
  if (!grid->is_ball()) throw DomainError("projection targets the unit ball");
  require_resolution(*grid, p.lambda);
  const double c = p.scale(), shift = projection_shift(p.lambda);
  return RadialField::sample(grid, [&](double r) { return c * (bubble_value(p.lambda, r) - shift); },
                             BoundaryTag::Dirichlet);
}

/// psi_{0,lambda} = P Ubar + lambda^{-1/2} 4 pi C_bar (H_a(0,.) - H_0(0,.)) as a function of r.
inline std::function<double(double)> psi_function(const BubbleParams& p, const PotentialSpec& a,
                                                  const GridPtr& green_grid = default_ball_grid()) {
  const double cbar = constants::bubble_normalization(p.alpha);
  const double lambda = p.lambda, shift = projection_shift(lambda);
  const double coef = 4.0 * std::numbers::pi * cbar / std::sqrt(lambda);
  if (a.is_constant() && a.constant_value() == 0.0)
    return [=](double r) { return cbar * (bubble_value(lambda, r) - shift); };
  auto ga = std::make_shared<GreenData>(solve_green(a, green_grid));
  auto g0 = std::make_shared<GreenData>(solve_green(PotentialSpec::constant(0.0), green_grid));
  return [=](double r) {
    return cbar * (bubble_value(lambda, r) - shift) + coef * (ga->H_at(r) - g0->H_at(r));
  };
}

inline RadialField psi_test(const BubbleParams& p, const PotentialSpec& a, const GridPtr& grid) {
  if (!grid->is_ball()) throw DomainError("psi lives on the unit ball");
  require_resolution(*grid, p.lambda);
  const auto f = psi_function(p, a);
  return RadialField::sample(grid, f, BoundaryTag::Dirichlet);
}

/// int |grad u|^2 / ||u||_HL^2.
inline double hl_rayleigh_quotient(const RadialField& u, Alpha alpha) {
  const double n = hls_norm(u, alpha);
  return dirichlet_energy(u) / (n * n);
}

/// (int |grad u|^2 + a u^2) / ||u||_HL^2 on the unit ball.
inline double hl_functional(const RadialField& u, const PotentialSpec& a, Alpha alpha) {
  if (!u.grid()->is_ball()) throw DomainError("the functional with a potential lives on the unit ball");
  const auto av = a.on(*u.grid());
  double pot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double r = u.grid()->node(i);
    pot += u.grid()->weight(i) * av[i] * u[i] * u[i] * 4.0 * std::numbers::pi * r * r;
  }
  const double n = hls_norm(u, alpha);
  return (dirichlet_energy(u) + pot) / (n * n);
}

/// Max relative error of I_alpha[U^{6-alpha}] against (3 / C_bar^{2(5-alpha)}) U^alpha at the nodes.
inline double convolution_identity_error(Alpha alpha, const GridPtr& grid) {
  if (grid->is_ball()) throw DomainError("the convolution identity needs a whole-space grid");
  const double a = alpha.value();
  const auto U = bubble(BubbleParams(1.0, alpha), grid);
  const auto pot = riesz_potential(U.map([a](double u) { return std::pow(u, 6.0 - a); }), alpha);
  const double c = 3.0 / std::pow(constants::bubble_normalization(alpha), 2.0 * (5.0 - a));
  double worst = 0.0;
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const double expected = c * std::pow(U[i], a);
    worst = std::max(worst, std::abs(pot[i] - expected) / expected);
  }
  return worst;
}

/// L v = -Delta v - (6-alpha) I[Ubar^{5-alpha} v] Ubar^{5-alpha} - (5-alpha) I[Ubar^{6-alpha}] Ubar^{4-alpha} v.
inline RadialField linearized_radial_apply(const RadialField& v, const BubbleParams& p) {
  const GridPtr& grid = v.grid();
  if (grid->is_ball()) throw DomainError("the linearized operator acts on whole-space fields");
  const double a = p.alpha.value();
  const auto Ub = bubble(BubbleParams(p.lambda, p.alpha, true), grid);
  const auto u5 = Ub.map([a](double u) { return std::pow(u, 5.0 - a); });
  const auto u6 = Ub.map([a](double u) { return std::pow(u, 6.0 - a); });
  const auto u4 = Ub.map([a](double u) { return std::pow(u, 4.0 - a); });
  const auto lap = radial_laplacian(v);
  const auto nonlocal = riesz_potential(u5 * v, p.alpha);
  const auto self = riesz_potential(u6, p.alpha);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = -lap[i] - (6.0 - a) * nonlocal[i] * u5[i] - (5.0 - a) * self[i] * u4[i] * v[i];
  return RadialField(grid, std::move(out));
}

/// max_i (1 + r_i^2)^{1/2} |f_i|.
inline double weighted_max_norm(const RadialField& f) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double r = f.grid()->node(i);
    m = std::max(m, std::sqrt(1.0 + r * r) * std::abs(f[i]));
  }
  return m;
}

struct NondegeneracyReport {
  /// Weighted max norm of L[dUbar/dlambda].
  double kernel_residual = 0.0;
  /// <L v, v> / |grad v|^2 at v = dUbar/dlambda.
  double kernel_quotient = 0.0;
  /// Same quotient at Ubar (a negative direction).
  double bubble_quotient = 0.0;
  /// Smallest quotient over radial v gradient-orthogonal to dUbar/dlambda and Ubar.
  double spectral_gap_estimate = 0.0;
};

/// Radial nondegeneracy of the normalized bubble at lambda = 1 on a whole-space grid.
inline NondegeneracyReport nondegeneracy(Alpha alpha, const GridPtr& grid) {
  if (grid->is_ball()) throw DomainError("nondegeneracy is checked on a whole-space grid");
  const double a = alpha.value();
  const BubbleParams p(1.0, alpha, true);
  const double cbar = constants::bubble_normalization(alpha);
  NondegeneracyReport rep;

  const auto dU = RadialField::sample(grid, [cbar](double r) { return cbar * bubble_lambda_derivative(1.0, r); });
  rep.kernel_residual = weighted_max_norm(linearized_radial_apply(dU, p));

  // Galerkin form on continuous elements, Dirichlet at t = 1 (v(infinity) = 0).
  const SpectralSpace V(grid);
  const auto rho = V.volume_weight([](double) { return 1.0; });
  const Eigen::MatrixXd S = V.stiffness(rho);
  const auto Ub = bubble(p, grid);
  const auto self = riesz_potential(Ub.map([a](double u) { return std::pow(u, 6.0 - a); }), alpha);
  const auto op = RieszOperator::cached(grid, AngularKernel::riesz(alpha));
  const Eigen::Index n = static_cast<Eigen::Index>(grid->size());
  Eigen::VectorXd u5(n), local(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = Ub[static_cast<std::size_t>(i)], r = grid->node(static_cast<std::size_t>(i));
    u5[i] = std::pow(u, 5.0 - a);
    local[i] = (5.0 - a) * self[static_cast<std::size_t>(i)] * std::pow(u, 4.0 - a) * grid->weight(static_cast<std::size_t>(i)) *
               4.0 * std::numbers::pi * r * r;
  }
  const Eigen::MatrixXd& E = V.value_operator();
  const Eigen::MatrixXd EU = u5.asDiagonal() * E;
  Eigen::MatrixXd K = (6.0 - a) * EU.transpose() * op->bilinear_matrix() * EU + E.transpose() * local.asDiagonal() * E;
  K = 0.5 * (K + K.transpose());

  const Eigen::Index N = V.dof_count() - 1;
  const Eigen::MatrixXd Sf = S.topLeftCorner(N, N), Kf = K.topLeftCorner(N, N);
  const Eigen::VectorXd z_kernel =
      V.interpolate([cbar](double r) { return cbar * bubble_lambda_derivative(1.0, r); }).head(N);
  const Eigen::VectorXd z_bubble = V.interpolate([cbar](double r) { return cbar * bubble_value(1.0, r); }).head(N);
  auto quotient = [&](const Eigen::VectorXd& x) { return 1.0 - x.dot(Kf * x) / x.dot(Sf * x); };
  rep.kernel_quotient = quotient(z_kernel);
  rep.bubble_quotient = quotient(z_bubble);

  // With S = L L^T and y = L^T x the quotient is 1 - y^T C y / |y|^2, C = L^{-1} K L^{-T}.
  const Eigen::LLT<Eigen::MatrixXd> llt(Sf);
  if (llt.info() != Eigen::Success) throw ConvergenceError("stiffness matrix is not positive definite");
  const Eigen::MatrixXd Linv_K = llt.matrixL().solve(Kf);
  Eigen::MatrixXd C = llt.matrixL().solve(Linv_K.transpose());
  C = 0.5 * (C + C.transpose());
  Eigen::MatrixXd Z(N, 2);
  Z.col(0) = llt.matrixU() * z_kernel;
  Z.col(1) = llt.matrixU() * z_bubble;
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(Z);
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(N, 2);
  const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(N, N) - Q * Q.transpose();
  // constrained directions are pushed far up the spectrum
  const double sigma = 1e3;
  Eigen::MatrixXd R = P * (Eigen::MatrixXd::Identity(N, N) - C) * P + sigma * Q * Q.transpose();
  R = 0.5 * (R + R.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(R, Eigen::EigenvaluesOnly);
  rep.spectral_gap_estimate = eig.eigenvalues()[0];
  return rep;
}

}  // namespace choquard
