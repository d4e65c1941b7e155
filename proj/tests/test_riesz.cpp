#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "choquard/constants.hpp"
#include "choquard/quadrature.hpp"
#include "choquard/riesz.hpp"

namespace {

using namespace choquard;
constexpr double pi = std::numbers::pi;

// 2-D Gauss-Legendre quadrature over the unit square split along r = s.
double brute_force_ball(double exponent, const std::function<double(double)>& f) {
  const auto outer = quadrature::gauss_legendre(200);
  const auto inner = quadrature::gauss_legendre(60);
  const AngularKernel k(exponent);
  double total = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double r = 0.5 * (outer.nodes[i] + 1.0), wr = 0.5 * outer.weights[i];
    double row = 0.0;
    // s = r -/+ L x^4 clusters nodes at the diagonal
    for (const auto& [dir, L] : {std::pair{-1.0, r}, std::pair{1.0, 1.0 - r}}) {
      for (int j = 0; j < 60; ++j) {
        const double x = 0.5 * (inner.nodes[j] + 1.0);
        const double s = r + dir * L * std::pow(x, 4);
        row += 0.5 * inner.weights[j] * 4.0 * L * std::pow(x, 3) * f(s) * k(r, s) * s * s;
      }
    }
    total += wr * f(r) * r * r * row;
  }
  return 4.0 * pi * total;
}

// Spherical average by direct quadrature of int_{-1}^{1} (r^2 + s^2 - 2 r s t)^{-e/2} dt.
double kernel_oracle(double e, double r, double s) {
  const auto rule = quadrature::gauss_legendre(400);
  double acc = 0.0;
  for (int i = 0; i < 400; ++i) {
    const double t = rule.nodes[i];
    acc += rule.weights[i] * std::pow(r * r + s * s - 2.0 * r * s * t, -e / 2.0);
  }
  return 2.0 * pi * acc;
}

TEST(AngularKernel, ClosedFormValues) {
  const AngularKernel k1(1.0);
  EXPECT_NEAR(angular_kernel(k1, 1.0, 1.0), 4.0 * pi, 1e-13);
  EXPECT_NEAR(angular_kernel(k1, 2.0, 1.0), 2.0 * pi, 1e-13);
  EXPECT_NEAR(angular_kernel(AngularKernel(1e-9), 0.3, 2.0), 4.0 * pi, 1e-7);
  EXPECT_THROW(angular_kernel(k1, 0.0, 1.0), DomainError);
}

TEST(AngularKernel, MatchesSphericalAverage) {
  for (double e : {0.5, 1.5, 2.0, -1.0, -2.5})
    for (auto [r, s] : {std::pair{0.3, 0.9}, std::pair{2.0, 0.5}, std::pair{1.0, 3.0}})
      EXPECT_NEAR(AngularKernel(e)(r, s) / kernel_oracle(e, r, s), 1.0, 1e-10) << e << " " << r << " " << s;
}

TEST(AngularKernel, BranchSelection) {
  EXPECT_EQ(AngularKernel(2.0).branch, AngularKernel::Branch::AlphaEqualsTwo);
  EXPECT_EQ(AngularKernel(2.0 + 1e-10).branch, AngularKernel::Branch::AlphaEqualsTwo);
  EXPECT_EQ(AngularKernel(2.0 + 1e-8).branch, AngularKernel::Branch::Generic);
  // the generic branch is continuous across the switch
  EXPECT_NEAR(AngularKernel(2.0 + 1e-8)(0.4, 0.7) / AngularKernel(2.0)(0.4, 0.7), 1.0, 1e-7);
  EXPECT_TRUE(std::isinf(AngularKernel(2.5)(0.5, 0.5)));
  EXPECT_TRUE(std::isinf(AngularKernel(2.0)(0.5, 0.5)));
}

TEST(Riesz, ConvolutionIdentityAlphaOne) {
  const Alpha alpha(1.0);
  const auto g = make_grid(DomainKind::WholeSpace, 512, 0.7);
  const auto U = RadialField::sample(g, [](double r) { return 1.0 / std::sqrt(1.0 + r * r); });
  const auto pot = riesz_potential(U.map([](double u) { return std::pow(u, 5.0); }), alpha);
  const double c = 3.0 / std::pow(constants::bubble_normalization(alpha), 8.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < g->size(); ++i) worst = std::max(worst, std::abs(pot[i] / (c * U[i]) - 1.0));
  EXPECT_LT(worst, 1e-6);
}

TEST(Riesz, IndicatorPotentialAtOrigin) {
  const auto g = make_grid(DomainKind::UnitBall, 128, 0.7);
  const auto one = RadialField::sample(g, [](double) { return 1.0; });
  EXPECT_NEAR(riesz_potential_at(one, Alpha(1.0), 0.0), 2.0 * pi, 1e-10);
  // Newton: potential of the uniform ball is 2 pi (1 - r^2 / 3)
  const auto pot = riesz_potential(one, Alpha(1.0));
  for (std::size_t i = 0; i < g->size(); i += 7)
    EXPECT_NEAR(pot[i], 2.0 * pi * (1.0 - g->node(i) * g->node(i) / 3.0), 1e-10);
}

TEST(Riesz, ZeroFieldGivesZero) {
  const auto g = make_grid(DomainKind::UnitBall, 64, 0.7);
  const auto z = RadialField::zeros(g);
  EXPECT_EQ(riesz_potential(z, Alpha(1.0)).max_abs(), 0.0);
  EXPECT_EQ(hls_norm(z, Alpha(1.0)), 0.0);
  EXPECT_EQ(rhls_double_integral(z, z, 1.0), 0.0);
}

TEST(Riesz, IndicatorDoubleIntegral) {
  const auto g = make_grid(DomainKind::UnitBall, 128, 0.7);
  const auto one = RadialField::sample(g, [](double) { return 1.0; });
  const double d = hl_double_integral(one, one, Alpha(1.0));
  EXPECT_NEAR(d, 32.0 * pi * pi / 15.0, 1e-10);
  EXPECT_NEAR(brute_force_ball(1.0, [](double) { return 1.0; }) / d, 1.0, 1e-8);
}

TEST(Riesz, DoubleIntegralAgainstBruteForce) {
  const auto g = make_grid(DomainKind::UnitBall, 128, 0.7);
  const auto f = [](double r) { return std::exp(-3.0 * r * r) * (1.0 - r); };
  const auto F = RadialField::sample(g, f);
  for (double a : {0.5, 1.5}) EXPECT_NEAR(hl_double_integral(F, F, Alpha(a)) / brute_force_ball(a, f), 1.0, 1e-7) << a;
}

TEST(Riesz, SymmetryIsExact) {
  const auto g = make_grid(DomainKind::UnitBall, 256, 0.7);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  const double c0 = n(rng), c1 = n(rng), c2 = n(rng);
  const auto f = RadialField::sample(g, [&](double r) { return c0 + c1 * r + c2 * std::cos(5 * r); });
  const auto h = RadialField::sample(g, [&](double r) { return std::exp(-c1 * c1 * r) * (1 - r * r); });
  for (double a : {0.7, 2.0, 2.5}) {
    EXPECT_EQ(hl_double_integral(f, h, Alpha(a)), hl_double_integral(h, f, Alpha(a)));
  }
  EXPECT_EQ(rhls_double_integral(f, h, 1.0), rhls_double_integral(h, f, 1.0));
}

TEST(Riesz, LinearityAndPositivity) {
  const auto g = make_grid(DomainKind::UnitBall, 256, 0.7);
  const auto f = RadialField::sample(g, [](double r) { return std::exp(-10 * r); });
  const auto h = RadialField::sample(g, [](double r) { return 1.0 - r * r; });
  const Alpha a(1.3);
  const auto pf = riesz_potential(f, a), ph = riesz_potential(h, a), psum = riesz_potential(f + h, a);
  for (std::size_t i = 0; i < g->size(); ++i) {
    EXPECT_GT(pf[i], 0.0);
    EXPECT_NEAR(psum[i], pf[i] + ph[i], 1e-13 * std::abs(psum[i]));
  }
}

TEST(Riesz, HlsInequalityRandomFields) {
  const auto g = make_grid(DomainKind::UnitBall, 256, 0.7);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_real_distribution<double> alpha_dist(0.2, 2.8);
  for (int trial = 0; trial < 50; ++trial) {
    const Alpha a(alpha_dist(rng));
    double coef[6];
    for (double& c : coef) c = unif(rng);
    const double width = 0.05 + 0.5 * (unif(rng) + 1.0);
    const auto u = RadialField::sample(g, [&](double r) {
      double s = 0.0;
      for (int k = 0; k < 6; ++k) s += coef[k] * std::cos(k * r * 3.0);
      return s * std::exp(-r * r / width) * (1.0 - r);
    });
    const double q = a.critical_power();
    const auto h = u.map([q](double v) { return std::pow(std::abs(v), q); });
    const double lhs = hl_double_integral(h, h, a);
    const double l6 = std::pow(integrate_ball(u.map([](double v) { return std::pow(v, 6); })), 1.0 / 6.0);
    EXPECT_LE(lhs, constants::hls_constant(a) * std::pow(l6, 2.0 * q) + 1e-8) << trial;
  }
}

TEST(Riesz, BubbleSaturatesHlsNorm) {
  const Alpha a(1.0);
  const auto g = make_grid(DomainKind::WholeSpace, 512, 0.7);
  const double cbar = constants::bubble_normalization(a);
  const auto U = RadialField::sample(g, [cbar](double r) { return cbar / std::sqrt(1.0 + r * r); });
  const double n = hls_norm(U, a);
  EXPECT_NEAR(std::pow(n, 2.0 * 5.0) / constants::saturated_energy(a), 1.0, 1e-5);
  EXPECT_NEAR(hls_norm(2.5 * U, a) / n, 2.5, 1e-14);
}

TEST(Riesz, HlsConstantByMaximization) {
  // max over p of D(f_p, f_p) / ||f_p||_{6/(6-a)}^2 for f_p = (1 + r^2)^{-p}
  const Alpha a(2.5);
  const auto g = make_grid(DomainKind::WholeSpace, 512, 0.7);
  const double theta = 6.0 / a.critical_power();
  auto ratio = [&](double p) {
    const auto f = RadialField::sample(g, [p](double r) { return std::pow(1.0 + r * r, -p); });
    const double lt = std::pow(integrate_ball(f.map([theta](double v) { return std::pow(v, theta); })), 1.0 / theta);
    return hl_double_integral(f, f, a) / (lt * lt);
  };
  double lo = 1.5, hi = 2.5;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 40; ++it) {
    const double m1 = hi - phi * (hi - lo), m2 = lo + phi * (hi - lo);
    (ratio(m1) < ratio(m2) ? lo : hi) = (ratio(m1) < ratio(m2) ? m1 : m2);
  }
  EXPECT_NEAR(ratio(0.5 * (lo + hi)) / constants::hls_constant(a), 1.0, 1e-3);
}

TEST(Riesz, DiagonalRobustnessAtTwoAndHalf) {
  const Alpha a(2.5);
  const auto g = make_grid(DomainKind::WholeSpace, 512, 0.7);
  const auto f = RadialField::sample(g, [](double r) { return std::pow(1.0 + r * r, -1.75); });
  const double base = hl_double_integral(f, f, a);
  RieszOptions fine;
  fine.near_order = 24;
  fine.levels = 64;
  fine.near_panels = 2;
  const double refined = hl_double_integral(f, f, a, fine);
  EXPECT_LT(std::abs(refined / base - 1.0), 1e-6);
}

TEST(Riesz, ReversedKernelAgainstBruteForce) {
  const auto g = make_grid(DomainKind::UnitBall, 128, 0.7);
  const auto one = RadialField::sample(g, [](double) { return 1.0; });
  const double d = rhls_double_integral(one, one, 1.0);
  EXPECT_GT(d, 0.0);
  EXPECT_NEAR(d / brute_force_ball(-1.0, [](double) { return 1.0; }), 1.0, 1e-4);
}

TEST(Riesz, ReversedInequalityTrend) {
  const double alpha = 1.0;
  const auto g = make_grid(DomainKind::UnitBall, 256, 0.7);
  const double theta = 6.0 / (6.0 + alpha);
  double prev = std::numeric_limits<double>::infinity();
  for (double R : {1.0, 2.0, 4.0, 8.0}) {
    // (1 + |x|^2)^{-(6+alpha)/2} on B_R, rescaled onto the unit ball
    const auto f = RadialField::sample(g, [&](double r) { return std::pow(1.0 + R * R * r * r, -(6.0 + alpha) / 2.0); });
    const double lt = std::pow(integrate_ball(f.map([theta](double v) { return std::pow(v, theta); })), 1.0 / theta);
    const double ratio = rhls_double_integral(f, f, alpha) / (constants::rhls_constant(alpha) * lt * lt);
    EXPECT_GT(ratio, 1.0);
    EXPECT_LT(ratio, prev);
    prev = ratio;
  }
}

TEST(Riesz, Errors) {
  const auto ball = make_grid(DomainKind::UnitBall, 64, 0.7);
  const auto ball2 = make_grid(DomainKind::UnitBall, 64, 0.7);
  const auto ws = make_grid(DomainKind::WholeSpace, 64, 0.7);
  const auto f = RadialField::sample(ball, [](double) { return 1.0; });
  const auto f2 = RadialField::sample(ball2, [](double) { return 1.0; });
  const auto w = RadialField::sample(ws, [](double r) { return 1.0 / (1.0 + r * r); });
  EXPECT_THROW(hl_double_integral(f, w, Alpha(1.0)), DomainError);
  EXPECT_THROW(hl_double_integral(f, f2, Alpha(1.0)), DomainError);
  EXPECT_THROW(rhls_double_integral(w, w, 1.0), DomainError);
  EXPECT_THROW(rhls_double_integral(f, f, 0.0), DomainError);
}

}  // namespace
