#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "choquard/bubbles.hpp"
#include "choquard/constants.hpp"
#include "choquard/error.hpp"
#include "choquard/greens.hpp"
#include "choquard/minimize.hpp"
#include "choquard/parallel.hpp"
#include "choquard/radial_grid.hpp"
#include "choquard/riesz.hpp"

namespace choquard {

/// C_{1,alpha} = D_alpha(Ubar_{0,1}^{5-alpha}, Ubar_{0,1}^{5-alpha}) on a whole-space grid.
inline double c1_alpha(Alpha alpha, const GridPtr& grid, double lambda = 1.0) {
  if (grid->is_ball()) throw DomainError("C_1 is a whole-space integral");
  const double p = 5.0 - alpha.value();
  const auto f = bubble(BubbleParams(lambda, alpha, true), grid).map([p](double u) { return std::pow(u, p); });
  return hl_double_integral(f, f, alpha);
}

/// Cached C_{1,alpha} on WholeSpace(512, 0.7).
inline double c1_alpha(Alpha alpha) {
  static std::mutex m;
  static std::map<double, double> cache;
  std::lock_guard<std::mutex> lock(m);
  const auto it = cache.find(alpha.value());
  if (it != cache.end()) return it->second;
  const double v = c1_alpha(alpha, make_grid(DomainKind::WholeSpace, 512, 0.7));
  cache.emplace(alpha.value(), v);
  return v;
}

inline GridPtr expansion_grid() {
  static const GridPtr g = make_grid(DomainKind::UnitBall, 512, 0.7);
  return g;
}

/// Point data entering the expansions at the concentration point 0.
struct ExpansionInputs {
  Alpha alpha{1.0};
  double phi = 0.0;  // phi_a(0)
  double a0 = 0.0;   // a(0)
  double qv = 0.0;   // Q_V(0)
  double c1 = 0.0;   // C_{1,alpha}
};

inline ExpansionInputs expansion_inputs(const PotentialSpec& a, const PotentialSpec& V, Alpha alpha,
                                        const GridPtr& grid = expansion_grid()) {
  ExpansionInputs in;
  in.alpha = alpha;
  in.phi = robin_value(a, grid);
  in.a0 = a.at_origin();
  in.qv = q_v(a, V, grid);
  in.c1 = c1_alpha(alpha);
  return in;
}

using TermList = std::vector<std::pair<std::string, double>>;

struct ExpansionPart {
  double lhs = 0.0;
  double rhs_predicted = 0.0;
  TermList terms;
  double residual = 0.0;
};

struct ExpansionReport {
  double lhs_numerator = 0.0;
  double lhs_denominator = 0.0;
  double lhs_quotient = 0.0;
  double rhs_predicted = 0.0;
  TermList terms;
  double residual = 0.0;
  /// Minimizer of the truncated prediction over lambda (infinite when it has none).
  double lambda_opt = std::numeric_limits<double>::infinity();
};

inline double sum_terms(const TermList& t) {
  double s = 0.0;
  for (const auto& [name, v] : t) s += v;
  return s;
}

/// Truncated right side of the numerator expansion.
inline TermList numerator_terms(const ExpansionInputs& in, double lambda, double eps) {
  const double pi = std::numbers::pi, cb2 = std::pow(constants::bubble_normalization(in.alpha), 2);
  return {{"S_HL", constants::saturated_energy(in.alpha)},
          {"phi_a/lambda", 16.0 * pi * pi * cb2 * in.phi / lambda},
          {"a/lambda^2", 2.0 * pi * (4.0 - pi) * cb2 * in.a0 / (lambda * lambda)},
          {"Q_V eps/lambda", 16.0 * pi * pi * cb2 * eps * in.qv / lambda}};
}

/// Truncated right side of the denominator expansion.
inline TermList denominator_terms(const ExpansionInputs& in, double lambda) {
  const double pi = std::numbers::pi, cb2 = std::pow(constants::bubble_normalization(in.alpha), 2);
  const double q = in.alpha.critical_power();
  return {{"S_HL", constants::saturated_energy(in.alpha)},
          {"phi_a/lambda", 32.0 * q * pi * pi * cb2 * in.phi / lambda},
          {"a/lambda^2", 8.0 * q * pi * cb2 * in.a0 / (lambda * lambda)},
          {"phi_a^2/lambda^2", 16.0 * q * pi * pi * cb2 * in.phi * in.phi *
                                   (q * in.c1 + (5.0 - in.alpha.value()) * 3.0 * pi * pi) / (lambda * lambda)}};
}

/// Quotient coefficients as displayed: S_HL [1 + k1/lambda + ke eps/lambda + k2/lambda^2].
struct QuotientCoefficients {
  double k1 = 0.0, ke = 0.0, k2a = 0.0, k2phi = 0.0;
};

inline QuotientCoefficients quoted_quotient_coefficients(const ExpansionInputs& in) {
  const double pi = std::numbers::pi, q = in.alpha.critical_power();
  QuotientCoefficients k;
  k.k1 = -64.0 / 3.0 * in.phi;
  k.ke = 64.0 / 3.0 * in.qv;
  k.k2a = -8.0 / 3.0 * in.a0;
  k.k2phi = -64.0 / 3.0 * in.phi * in.phi * (q * in.c1 + (5.0 - in.alpha.value()) * 3.0 * pi * pi - 128.0 * q / 3.0);
  return k;
}

/// The same coefficients recomputed from the numerator and denominator expansions by
/// (1 + n)(1 + d)^{-1/q} = 1 + n - d/q + (1 + 1/q) d^2 / (2q) - n d / q + ...
inline QuotientCoefficients derived_quotient_coefficients(const ExpansionInputs& in) {
  const double q = in.alpha.critical_power();
  const double K = constants::saturated_energy(in.alpha);
  // coefficients of lambda^{-1}, eps lambda^{-1}, lambda^{-2} read off at lambda = 1, eps = 1
  const auto nt = numerator_terms(in, 1.0, 1.0);
  const auto dt = denominator_terms(in, 1.0);
  const double n1 = nt[1].second / K, ne = nt[3].second / K, n2 = nt[2].second / K;
  const double d1 = dt[1].second / K, d2a = dt[2].second / K, d2phi = dt[3].second / K;
  QuotientCoefficients k;
  k.k1 = n1 - d1 / q;
  k.ke = ne;
  k.k2a = n2 - d2a / q;
  k.k2phi = -d2phi / q + (1.0 + 1.0 / q) * d1 * d1 / (2.0 * q) - n1 * d1 / q;
  return k;
}

inline double truncated_quotient(const ExpansionInputs& in, double lambda, double eps) {
  const auto k = quoted_quotient_coefficients(in);
  const double x = 1.0 / lambda;
  return constants::shl_constant(in.alpha) * (1.0 + (k.k1 + k.ke * eps) * x + (k.k2a + k.k2phi) * x * x);
}

/// argmin over lambda of the truncated quotient; infinity when it decreases all the way to lambda = infinity.
inline double truncated_lambda_opt(const ExpansionInputs& in, double eps) {
  const auto k = quoted_quotient_coefficients(in);
  const double b = k.k1 + k.ke * eps, c = k.k2a + k.k2phi;
  if (!(b < 0.0) || !(c > 0.0)) return std::numeric_limits<double>::infinity();
  return 2.0 * c / (-b);
}

namespace detail {

inline RadialField psi_on(const PotentialSpec& a, Alpha alpha, double lambda, const GridPtr& grid) {
  return psi_test(BubbleParams(lambda, alpha, true), a, grid);
}

inline double potential_energy(const RadialField& u, const PotentialSpec& w) {
  const auto wv = w.on(*u.grid());
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double r = u.grid()->node(i);
    s += u.grid()->weight(i) * wv[i] * u[i] * u[i] * 4.0 * std::numbers::pi * r * r;
  }
  return s;
}

}  // namespace detail

/// int |grad psi|^2 + (a + eps V) psi^2 against its truncated expansion.
inline ExpansionPart expansion_numerator(const PotentialSpec& a, const PotentialSpec& V, Alpha alpha, double lambda,
                                         double eps, const GridPtr& grid = expansion_grid()) {
  const auto psi = detail::psi_on(a, alpha, lambda, grid);
  ExpansionPart part;
  part.lhs = dirichlet_energy(psi) + detail::potential_energy(psi, a) + eps * detail::potential_energy(psi, V);
  part.terms = numerator_terms(expansion_inputs(a, V, alpha, grid), lambda, eps);
  part.rhs_predicted = sum_terms(part.terms);
  part.residual = part.lhs - part.rhs_predicted;
  return part;
}

/// D_alpha(psi^{6-alpha}, psi^{6-alpha}) against its truncated expansion.
inline ExpansionPart expansion_denominator(const PotentialSpec& a, Alpha alpha, double lambda,
                                           const GridPtr& grid = expansion_grid()) {
  const auto psi = detail::psi_on(a, alpha, lambda, grid);
  const double q = alpha.critical_power();
  const auto h = psi.map([q](double v) { return std::pow(std::abs(v), q); });
  ExpansionPart part;
  part.lhs = hl_double_integral(h, h, alpha);
  ExpansionInputs in;
  in.alpha = alpha;
  in.phi = robin_value(a, grid);
  in.a0 = a.at_origin();
  in.c1 = in.phi == 0.0 ? 0.0 : c1_alpha(alpha);
  part.terms = denominator_terms(in, lambda);
  part.rhs_predicted = sum_terms(part.terms);
  part.residual = part.lhs - part.rhs_predicted;
  return part;
}

/// S_HL(a + eps V)[psi_{0,lambda}] with numerator, denominator and the truncated quotient prediction.
inline ExpansionReport test_energy(const PotentialSpec& a, const PotentialSpec& V, Alpha alpha, double lambda,
                                   double eps, const GridPtr& grid = expansion_grid()) {
  const auto in = expansion_inputs(a, V, alpha, grid);
  const auto psi = detail::psi_on(a, alpha, lambda, grid);
  const double q = alpha.critical_power();
  const auto h = psi.map([q](double v) { return std::pow(std::abs(v), q); });
  ExpansionReport rep;
  rep.lhs_numerator = dirichlet_energy(psi) + detail::potential_energy(psi, a) + eps * detail::potential_energy(psi, V);
  rep.lhs_denominator = hl_double_integral(h, h, alpha);
  rep.lhs_quotient = rep.lhs_numerator / std::pow(rep.lhs_denominator, 1.0 / q);
  const auto k = quoted_quotient_coefficients(in);
  const double shl = constants::shl_constant(alpha), x = 1.0 / lambda;
  rep.terms = {{"S_HL", shl},
               {"phi_a/lambda", shl * k.k1 * x},
               {"Q_V eps/lambda", shl * k.ke * eps * x},
               {"a/lambda^2", shl * k.k2a * x * x},
               {"phi_a^2/lambda^2", shl * k.k2phi * x * x}};
  rep.rhs_predicted = sum_terms(rep.terms);
  rep.residual = rep.lhs_quotient - rep.rhs_predicted;
  rep.lambda_opt = truncated_lambda_opt(in, eps);
  return rep;
}

/// Best fit u ~ mu P Ubar_{0,lambda} in the gradient inner product:
/// <u, P Ubar>_grad = int u (-Delta Ubar) = int u 3 C_bar U^5.
struct BubbleFit {
  double lambda = 0.0;
  double mu = 0.0;
};

inline BubbleFit fit_projected_bubble(const RadialField& u, Alpha alpha, double lambda_guess) {
  const double cbar = constants::bubble_normalization(alpha);
  auto moments = [&](double lambda) {
    const double shift = projection_shift(lambda);
    double up = 0.0, pp = 0.0;
    const auto& g = *u.grid();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double r = g.node(i), U = bubble_value(lambda, r);
      const double w = g.weight(i) * 4.0 * std::numbers::pi * r * r * 3.0 * cbar * std::pow(U, 5);
      up += w * u[i];
      pp += w * cbar * (U - shift);
    }
    return std::pair{up, pp};
  };
  auto score = [&](double log_lambda) {
    const auto [up, pp] = moments(std::exp(log_lambda));
    return up * up / pp;
  };
  // golden section on log(lambda) in [guess / 3, 3 guess]
  double lo = std::log(lambda_guess / 3.0), hi = std::log(lambda_guess * 3.0);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = score(x1), f2 = score(x2);
  for (int it = 0; it < 80 && hi - lo > 1e-10; ++it) {
    if (f1 > f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = score(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = score(x2);
    }
  }
  BubbleFit fit;
  fit.lambda = std::exp(0.5 * (lo + hi));
  const auto [up, pp] = moments(fit.lambda);
  fit.mu = up / pp;
  return fit;
}

struct SweepPoint {
  double eps = 0.0;
  double energy = 0.0;
  double discrete_energy = 0.0;
  double lambda_hat = 0.0;
  double eps_lambda = 0.0;
  double el_residual = 0.0;
  int iterations = 0;
  Concentration concentration = Concentration::Concentrating;
  /// Best-fit projected bubble (Achieved points only; zero otherwise).
  double mu_hat = 0.0;
  double lambda_fit = 0.0;
};

struct SweepReport {
  Alpha alpha{1.0};
  std::vector<double> eps_ladder;
  std::vector<double> energies;
  std::vector<SweepPoint> points;
  double fitted_c2 = 0.0;
  double fitted_c3 = 0.0;
  double predicted_c2 = 0.0;
  double predicted_eps_lambda = 0.0;
  std::vector<double> lambda_hats;
  std::vector<double> eps_lambda_products;
  double phi_a = 0.0;
  double q_v = 0.0;
  double a_at_origin = 0.0;
};

/// Minimizes S_HL(a + eps V) along a strictly decreasing ladder and fits
/// (S_HL - E) / eps^2 = c2 + c3 eps by least squares on the energy scale (weights eps^4).
inline SweepReport epsilon_sweep(const PotentialSpec& a, const PotentialSpec& V, Alpha alpha,
                                 const std::vector<double>& eps_ladder, const MinimizeOptions& opts = {}) {
  if (eps_ladder.empty()) throw DomainError("empty epsilon ladder");
  for (std::size_t k = 0; k < eps_ladder.size(); ++k) {
    if (!(eps_ladder[k] > 0.0) || !std::isfinite(eps_ladder[k])) throw DomainError("epsilon values must be positive");
    if (k > 0 && !(eps_ladder[k] < eps_ladder[k - 1])) throw DomainError("epsilon ladder must be strictly decreasing");
  }
  SweepReport rep;
  rep.alpha = alpha;
  rep.eps_ladder = eps_ladder;
  rep.phi_a = robin_value(a);
  if (std::abs(rep.phi_a) > 1e-4) {
    std::ostringstream os;
    os << "potential is not critical: phi_a(0) = " << rep.phi_a << " (needs |phi_a(0)| <= 1e-4)";
    throw DomainError(os.str());
  }
  rep.q_v = q_v(a, V);
  rep.a_at_origin = a.at_origin();
  const double shl = constants::shl_constant(alpha);
  if (rep.q_v < 0.0 && rep.a_at_origin < 0.0) {
    rep.predicted_c2 = 128.0 / 3.0 * shl * rep.q_v * rep.q_v / std::abs(rep.a_at_origin);
    rep.predicted_eps_lambda = std::abs(rep.a_at_origin) / (4.0 * std::abs(rep.q_v));
  }

  // restarts inside each point already use the workers
  rep.points.resize(eps_ladder.size());
  for (std::size_t k = 0; k < eps_ladder.size(); ++k) {
    const double eps = eps_ladder[k];
    const auto res = minimize_shl(PotentialSpec::combine(a, V, eps), alpha, opts);
    SweepPoint& p = rep.points[k];
    p.eps = eps;
    p.energy = res.energy;
    p.discrete_energy = res.discrete_energy;
    p.lambda_hat = res.lambda_hat;
    p.eps_lambda = eps * res.lambda_hat;
    p.el_residual = res.el_residual;
    p.iterations = res.iterations;
    p.concentration = res.concentration;
    if (res.concentration == Concentration::Achieved) {
      const auto fit = fit_projected_bubble(least_energy_solution(res), alpha, res.lambda_hat);
      p.mu_hat = fit.mu;
      p.lambda_fit = fit.lambda;
    }
  }
  for (const auto& p : rep.points) {
    rep.energies.push_back(p.energy);
    rep.lambda_hats.push_back(p.lambda_hat);
    rep.eps_lambda_products.push_back(p.eps_lambda);
  }

  // weighted least squares for y = c2 + c3 eps
  double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
  for (const auto& p : rep.points) {
    const double y = (shl - p.energy) / (p.eps * p.eps), w = std::pow(p.eps, 4);
    s0 += w;
    s1 += w * p.eps;
    s2 += w * p.eps * p.eps;
    t0 += w * y;
    t1 += w * y * p.eps;
  }
  const double det = s0 * s2 - s1 * s1;
  if (rep.points.size() >= 2 && det > 0.0) {
    rep.fitted_c2 = (s2 * t0 - s1 * t1) / det;
    rep.fitted_c3 = (s0 * t1 - s1 * t0) / det;
  } else {
    rep.fitted_c2 = t0 / s0;
  }
  return rep;
}

struct MuCheck {
  double intercept = 0.0;
  double slope = 0.0;
  double predicted_slope = 0.0;
  // from s = -4 pi Cbar lambda^{-1/2} Pi_T (H_a - H_0), the T-component forced by w in T-perp
  double derived_slope = 0.0;
  int points = 0;
};

/// Fits mu_hat(eps) = m0 + m1 eps over the Achieved sweep points. predicted_slope is
/// (256/3) phi_0(0) |Q_V(0)| / |a(0)| with phi_0(0) = -1/(4 pi); derived_slope is its negative.
inline MuCheck mu_expansion_check(const SweepReport& sweep) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : sweep.points)
    if (p.concentration == Concentration::Achieved) pts.emplace_back(p.eps, p.mu_hat);
  if (pts.size() < 3) throw ConvergenceError("mu fit needs at least three achieved sweep points");
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    n += 1;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  MuCheck out;
  out.points = static_cast<int>(pts.size());
  out.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  out.intercept = (sy - out.slope * sx) / n;
  const double phi0 = -1.0 / (4.0 * std::numbers::pi);
  out.predicted_slope = sweep.a_at_origin == 0.0
                            ? 0.0
                            : 256.0 / 3.0 * phi0 * std::abs(sweep.q_v) / std::abs(sweep.a_at_origin);
  out.derived_slope = -out.predicted_slope;
  return out;
}

}  // namespace choquard
