#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ifyot {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Bad arguments or malformed data. Numerical outcomes (divergence, stalls)
// are reported through status fields, never through this.
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SingularInnerHessian : std::runtime_error {
  double min_eigenvalue;
  explicit SingularInnerHessian(double min_eig)
      : std::runtime_error("inner dual Hessian is singular (min eigenvalue " +
                           std::to_string(min_eig) + ")"),
        min_eigenvalue(min_eig) {}
};

struct RankDeficientTangent : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The inner transport solve did not reach its residual target; carries the
// outer parameter at which it happened so sweeps can report the cell.
struct InnerSolveDiverged : std::runtime_error {
  Vector theta;
  double residual;
  InnerSolveDiverged(Vector t, double res)
      : std::runtime_error(
            "inner transport solve did not converge (residual " +
            std::to_string(res) + ")"),
        theta(std::move(t)),
        residual(res) {}
};

// log(sum_i w_i * exp(a_i)) with max-shift; entries with w_i = 0 are skipped.
// Returns -inf for an effectively empty sum.
inline double log_sum_exp_weighted(const Vector& a, const Vector& w) {
  double amax = -kInf;
  for (Index i = 0; i < a.size(); ++i)
    if (w[i] > 0.0 && a[i] > amax) amax = a[i];
  if (amax == -kInf) return -kInf;
  double s = 0.0;
  for (Index i = 0; i < a.size(); ++i)
    if (w[i] > 0.0) s += w[i] * std::exp(a[i] - amax);
  return amax + std::log(s);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace ifyot
