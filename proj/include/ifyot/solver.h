#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ifyot/common.h"

namespace ifyot {

// Smooth objective: returns the value and fills *grad (never null here).
using Objective = std::function<double(const Vector&, Vector*)>;

struct MinimizeOptions {
  double tol = 1e-8;  // on the Euclidean gradient norm
  int max_iter = 1000;
  int memory = 10;
  double c1 = 1e-4;  // sufficient-decrease constant
  double c2 = 0.9;   // curvature constant
};

struct SolveReport {
  Vector theta_hat;
  double objective = kInf;
  double grad_norm = kInf;
  int iterations = 0;
  int inner_solves = 0;  // objective evaluations
  bool converged = false;
  bool stalled = false;  // line search exhausted its budget
  // Variational factors when a reparameterized penalty was used; empty
  // otherwise. theta_hat is always the composed parameter.
  Vector factor_u, factor_v;
  Matrix factor_x, factor_y;
};

// Limited-memory quasi-Newton descent with a strong Wolfe line search.
// Accepted objective values are monotonically nonincreasing. A trial point
// where the objective is non-finite or the inner solve diverges is treated
// as an overshoot and the step shrinks; if the search cannot make progress
// the report comes back stalled at the best iterate (never an exception).
SolveReport minimize_smooth(const Objective& objective, const Vector& x0,
                            const MinimizeOptions& opts = {});

enum class RegKind { None, L1, Nuclear, NonnegativeL1 };

// lambda * R(theta) with R one of: zero, the entrywise l1 norm, the nuclear
// norm of the (rows x cols) matrix reshape, or the l1 norm restricted to the
// nonnegative orthant. Nuclear requires rows * cols == parameter length.
struct Regularizer {
  RegKind kind = RegKind::None;
  double lambda = 0.0;
  Index rows = 0, cols = 0;  // Nuclear reshape, column-major

  void validate(Index param_len) const;
  double value(const Vector& theta) const;
};

struct RegularizedOptions {
  MinimizeOptions inner;
  std::uint64_t seed = 0;      // jitter stream for the factor initialization
  double init_scale = 1e-2;    // epsilon in u = v = epsilon * ones + jitter
  double jitter_scale = 1e-3;
};

// Penalized estimation through smooth variational reparameterizations:
//   L1:            theta = u . v,  penalty lambda/2 (|u|^2 + |v|^2)
//   NonnegativeL1: theta = u . u,  penalty lambda |u|^2
//   Nuclear:       theta = vec(X Y), penalty lambda/2 (|X|_F^2 + |Y|_F^2)
// each tight for the corresponding norm at the optimum. init seeds the
// factors (softly, through a factorization of init); null init starts at the
// epsilon-plus-jitter point. The reported objective is
// smooth(theta_hat) + lambda * R(theta_hat) with the true norm.
SolveReport solve_regularized(const Objective& smooth_loss, Index dim,
                              const Regularizer& reg, const Vector* init,
                              const RegularizedOptions& opts = {});

struct ModelDescriptor {
  std::vector<Index> support;  // entries with |theta_i| > support threshold
  Index rank = 0;
  bool rank_defined = false;
};

// Support and, when the parameter is a matrix, the count of eigenvalues of
// the symmetrized matrix with modulus >= rank_threshold. The vector overload
// interprets the length as upper-triangle packed when triangular, else as a
// square matrix when square, else leaves the rank undefined.
ModelDescriptor support_and_rank(const Matrix& theta,
                                 double support_threshold = 1e-5,
                                 double rank_threshold = 1e-4);
ModelDescriptor support_and_rank(const Vector& theta,
                                 double support_threshold = 1e-5,
                                 double rank_threshold = 1e-4);

}  // namespace ifyot
