#pragma once

#include <cmath>
#include <numbers>
#include <sstream>

#include "choquard/error.hpp"

namespace choquard {

/// Riesz exponent of the kernel |x-y|^{-alpha}; validated to lie in (0,3)
/// at construction so downstream code never re-checks the domain.
class Alpha {
 public:
  explicit Alpha(double value) : value_(value) {
    if (!(value > 0.0 && value < 3.0)) {
      std::ostringstream os;
      os << "alpha must lie in (0,3), got " << value;
      throw DomainError(os.str());
    }
  }

  double value() const { return value_; }
  operator double() const { return value_; }

  /// Upper critical exponent 6 - alpha.
  double critical_power() const { return 6.0 - value_; }

 private:
  double value_;
};

namespace constants {

inline constexpr double pi = std::numbers::pi;

/// Sharp Sobolev constant 3 (pi/2)^{4/3} in R^3.
inline double sobolev_constant() { return 3.0 * std::pow(pi / 2.0, 4.0 / 3.0); }

/// Sharp Hardy-Littlewood-Sobolev constant for theta = r = 6/(6-alpha).
inline double hls_constant(Alpha alpha) {
  const double a = alpha.value();
  return std::pow(pi, a / 2.0) * std::tgamma((3.0 - a) / 2.0) / std::tgamma(3.0 - a / 2.0) *
         std::pow(std::tgamma(3.0) / std::tgamma(1.5), (3.0 - a) / 3.0);
}

/// Sharp reversed HLS constant for theta = r = 6/(6+alpha); defined for any alpha > 0.
inline double rhls_constant(double alpha) {
  if (!(alpha > 0.0)) {
    std::ostringstream os;
    os << "reversed HLS constant needs alpha > 0, got " << alpha;
    throw DomainError(os.str());
  }
  return std::pow(pi, -alpha / 2.0) * std::tgamma((3.0 + alpha) / 2.0) /
         std::tgamma(3.0 + alpha / 2.0) *
         std::pow(std::tgamma(3.0) / std::tgamma(1.5), (3.0 + alpha) / 3.0);
}

/// S_HL = S * C_alpha^{-1/(6-alpha)}.
inline double shl_constant(Alpha alpha) {
  return sobolev_constant() * std::pow(hls_constant(alpha), -1.0 / (6.0 - alpha.value()));
}

/// Normalization C_bar with C_bar * U solving the whole-space critical Choquard equation.
inline double bubble_normalization(Alpha alpha) {
  const double a = alpha.value();
  return std::pow(3.0, 0.25) * std::pow(sobolev_constant(), -(3.0 - a) / (4.0 * (5.0 - a))) *
         std::pow(hls_constant(alpha), -1.0 / (2.0 * (5.0 - a)));
}

/// S_HL^{(6-alpha)/(5-alpha)}: the Dirichlet energy (and HL double integral) of C_bar U.
inline double saturated_energy(Alpha alpha) {
  const double a = alpha.value();
  return std::pow(shl_constant(alpha), (6.0 - a) / (5.0 - a));
}

}  // namespace constants

struct ConstantsBundle {
  double alpha = 0.0;
  double S = 0.0;
  double C_alpha = 0.0;
  double C_tilde_alpha = 0.0;
  double S_HL = 0.0;
  double C_bar_alpha = 0.0;
};

inline ConstantsBundle constants_bundle(Alpha alpha) {
  return ConstantsBundle{alpha.value(),
                         constants::sobolev_constant(),
                         constants::hls_constant(alpha),
                         constants::rhls_constant(alpha.value()),
                         constants::shl_constant(alpha),
                         constants::bubble_normalization(alpha)};
}

}  // namespace choquard
