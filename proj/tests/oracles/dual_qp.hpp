#pragma once

// Reference solver for the soft-margin SVM dual
//   max  e'a - 1/2 a'Qa,   Q_ij = y_i y_j K_ij,   0 <= a_i <= C_i,   y'a = 0
// by accelerated projected gradient ascent. Slow and simple on purpose; only
// meant for n <= ~20.

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace oracle {

struct DualSolution {
  Eigen::VectorXd alpha;
  double objective = 0.0;
  double bias = 0.0;  // f(x) = sum_j a_j y_j K(x_j, x) + bias
  int iterations = 0;
};

inline double dual_objective(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& K,
                             const Eigen::VectorXd& y) {
  const Eigen::VectorXd ay = alpha.cwiseProduct(y);
  return alpha.sum() - 0.5 * ay.dot(K * ay);
}

/// Euclidean projection onto {0 <= a <= C, y'a = 0}: a = clip(v - lambda y),
/// with lambda found by bisection on the monotone constraint residual.
inline Eigen::VectorXd project(const Eigen::VectorXd& v, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& C) {
  const auto at = [&](double lambda) {
    Eigen::VectorXd a(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) a[i] = std::clamp(v[i] - lambda * y[i], 0.0, C[i]);
    return a;
  };
  double lo = -(v.cwiseAbs().maxCoeff() + C.maxCoeff() + 1.0);
  double hi = -lo;
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (at(mid).dot(y) > 0.0) lo = mid; else hi = mid;
  }
  return at(0.5 * (lo + hi));
}

inline DualSolution solve_dual(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& C, int max_iterations = 200000,
                               double step_tolerance = 1e-14) {
  const Eigen::Index n = y.size();
  const Eigen::MatrixXd Q = (y * y.transpose()).cwiseProduct(K);
  const double L = std::max(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Q).eigenvalues().maxCoeff(), 1e-12);
  const double step = 1.0 / L;

  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd z = a;
  double t = 1.0;
  DualSolution out;
  for (int k = 0; k < max_iterations; ++k) {
    // Ascent on the concave dual: gradient is e - Qz.
    const Eigen::VectorXd next = project(z + step * (Eigen::VectorXd::Ones(n) - Q * z), y, C);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    Eigen::VectorXd z_next = next + ((t - 1.0) / t_next) * (next - a);
    // Adaptive restart keeps the iteration monotone.
    if (dual_objective(next, K, y) < dual_objective(a, K, y)) {
      t = 1.0;
      z = a;
      out.iterations = k + 1;
      continue;
    }
    const double moved = (next - a).norm();
    a = next;
    z = z_next;
    t = t_next;
    out.iterations = k + 1;
    if (moved < step_tolerance) break;
  }

  out.alpha = a;
  out.objective = dual_objective(a, K, y);

  // Bias from the KKT conditions: average over free multipliers, otherwise the
  // midpoint of the interval allowed by the bounded ones.
  const Eigen::VectorXd grad = Q * a - Eigen::VectorXd::Ones(n);
  const double eps = 1e-9;
  double sum = 0.0;
  int free_count = 0;
  double upper = std::numeric_limits<double>::infinity();
  double lower = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double yg = y[i] * grad[i];
    const bool at_upper = a[i] >= C[i] - eps;
    const bool at_lower = a[i] <= eps;
    if (!at_upper && !at_lower) {
      sum += yg;
      ++free_count;
    } else if ((at_upper && y[i] < 0) || (at_lower && y[i] > 0)) {
      upper = std::min(upper, yg);
    } else {
      lower = std::max(lower, yg);
    }
  }
  const double rho = free_count > 0 ? sum / free_count : 0.5 * (upper + lower);
  out.bias = -rho;
  return out;
}

inline double decision(const DualSolution& s, const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                       Eigen::Index row) {
  return (s.alpha.cwiseProduct(y)).dot(K.row(row).transpose()) + s.bias;
}

}  // namespace oracle
