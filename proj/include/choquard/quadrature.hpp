#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "choquard/error.hpp"

namespace choquard::quadrature {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

// Legendre P_n and P_n' at x by the three-term recurrence.
inline void legendre(int n, double x, double& p, double& dp) {
  double p0 = 1.0, p1 = x;
  if (n == 0) {
    p = 1.0;
    dp = 0.0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = pk;
  }
  p = p1;
  dp = n * (x * p1 - p0) / (x * x - 1.0);
}

}  // namespace detail

/// Gauss-Legendre rule with n points on [-1, 1], nodes ascending.
inline Rule gauss_legendre(int n) {
  if (n < 1) throw DomainError("Gauss-Legendre rule needs n >= 1");
  Rule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double p = 0.0, dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      detail::legendre(n, x, p, dp);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    detail::legendre(n, x, p, dp);
    rule.nodes[n - 1 - i] = x;
    rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

/// Gauss-Lobatto-Legendre rule with n >= 2 points on [-1, 1] (endpoints included).
inline Rule gauss_lobatto(int n) {
  if (n < 2) throw DomainError("Gauss-Lobatto rule needs n >= 2");
  const int N = n - 1;
  Rule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  rule.nodes.front() = -1.0;
  rule.nodes.back() = 1.0;
  for (int i = 1; i < N; ++i) {
    // interior nodes are the roots of P_N'
    double x = -std::cos(std::numbers::pi * i / N);
    for (int it = 0; it < 100; ++it) {
      double p = 0.0, dp = 0.0;
      detail::legendre(N, x, p, dp);
      const double d2p = (2.0 * x * dp - N * (N + 1.0) * p) / (1.0 - x * x);
      const double dx = dp / d2p;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = x;
  }
  for (int i = 0; i < n; ++i) {
    double p = 0.0, dp = 0.0;
    const double x = rule.nodes[i];
    if (std::abs(std::abs(x) - 1.0) < 1e-300) {
      p = (x > 0 || N % 2 == 0) ? 1.0 : -1.0;
    } else {
      detail::legendre(N, x, p, dp);
    }
    rule.weights[i] = 2.0 / (N * (N + 1.0) * p * p);
  }
  return rule;
}

/// Barycentric weights 1 / prod_{k != j} (x_j - x_k).
inline std::vector<double> barycentric_weights(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> w(n, 1.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k)
      if (k != j) w[j] /= (x[j] - x[k]);
  return w;
}

/// Values of all Lagrange basis polynomials on nodes x at the point y.
inline void lagrange_basis(const std::vector<double>& x, const std::vector<double>& bary, double y,
                           double* out) {
  const std::size_t n = x.size();
  for (std::size_t j = 0; j < n; ++j) {
    if (y == x[j]) {
      for (std::size_t k = 0; k < n; ++k) out[k] = (k == j) ? 1.0 : 0.0;
      return;
    }
  }
  double denom = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = bary[j] / (y - x[j]);
    denom += out[j];
  }
  for (std::size_t j = 0; j < n; ++j) out[j] /= denom;
}

/// Interpolation matrix from values at nodes x to values at points y.
inline Eigen::MatrixXd interpolation_matrix(const std::vector<double>& x,
                                            const std::vector<double>& y) {
  const auto bary = barycentric_weights(x);
  Eigen::MatrixXd m(y.size(), x.size());
  std::vector<double> row(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    lagrange_basis(x, bary, y[i], row.data());
    for (std::size_t j = 0; j < x.size(); ++j) m(i, j) = row[j];
  }
  return m;
}

/// First-derivative matrix of the interpolant, evaluated at the nodes themselves.
inline Eigen::MatrixXd differentiation_matrix(const std::vector<double>& x) {
  const std::size_t n = x.size();
  const auto bary = barycentric_weights(x);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double diag = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      d(i, j) = (bary[j] / bary[i]) / (x[i] - x[j]);
      diag -= d(i, j);
    }
    d(i, i) = diag;
  }
  return d;
}

/// Matrix mapping nodal values on x to the k-th derivative of the interpolant at points y.
inline Eigen::MatrixXd derivative_matrix(const std::vector<double>& x, const std::vector<double>& y,
                                         int order) {
  Eigen::MatrixXd d = differentiation_matrix(x);
  Eigen::MatrixXd m = interpolation_matrix(x, y);
  for (int k = 0; k < order; ++k) m = m * d;
  return m;
}

}  // namespace choquard::quadrature
