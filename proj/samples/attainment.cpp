// Walks a constant potential a across the critical level -pi^2/4 and prints the Robin value,
// the minimization level and whether it is attained.

#include <cstdio>
#include <numbers>

#include "choquard.hpp"

int main() {
  using namespace choquard;
  const Alpha alpha(1.0);
  const double shl = constants::shl_constant(alpha);
  MinimizeOptions opts;
  opts.grid_n = 256;

  std::printf("lambda* = %.10f (pi^2/4 = %.10f)\n", critical_level(1e-9), std::numbers::pi * std::numbers::pi / 4.0);
  std::printf("%8s %12s %14s %14s %12s\n", "a", "phi_a(0)", "S_HL(a)-S_HL", "lambda_hat", "status");
  for (double a : {0.0, -1.0, -2.0, -3.0, -5.0, -8.0}) {
    const auto pot = PotentialSpec::constant(a);
    const auto res = minimize_shl(pot, alpha, opts);
    std::printf("%8.2f %12.6f %14.6e %14.4g %12s\n", a, robin_value(pot), res.energy - shl, res.lambda_hat,
                to_string(res.concentration));
  }
}
