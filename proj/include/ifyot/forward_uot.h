#pragma once

#include <vector>

#include "ifyot/common.h"
#include "ifyot/divergences.h"
#include "ifyot/measures.h"

namespace ifyot {

// Entropic unbalanced transport between two discrete measures:
//   min_pi  <c, pi> + D_phi1(pi_1 | alpha) + D_phi2(pi_2 | beta)
//           + eta KL(pi | alpha x beta).
struct UotProblem {
  DiscreteMeasure alpha;
  DiscreteMeasure beta;
  Matrix cost;  // n x m
  double eta = 0.0;
  PhiDivergence div1 = PhiDivergence::balanced();
  PhiDivergence div2 = PhiDivergence::balanced();

  Index n() const { return alpha.size(); }
  Index m() const { return beta.size(); }
  void validate() const;
};

enum class Gauge { None, AlphaMeanZero };

struct DualPotentials {
  Vector f;  // n
  Vector g;  // m
  Gauge gauge = Gauge::None;
};

// Primal coupling stored as the density p with pi = p * (alpha x beta).
struct Coupling {
  Matrix density;  // n x m, nonnegative
  double mass = 0.0;
};

// Dual objective
//   K(f,g) = <phi1*(-f), alpha> + <phi2*(-g), beta>
//          + eta <exp((f+g-c)/eta), alpha x beta>.
// The primal optimum equals -min K + eta mass(alpha) mass(beta).
double dual_objective(const UotProblem& prob, const DualPotentials& pots);

// Value plus the gradient in (f, g):
//   dK/df_i = alpha_i (-(phi1*)'(-f_i) + sum_j exp((f_i+g_j-c_ij)/eta) b_j)
// and symmetrically in g. grad_f/grad_g may be null to skip.
double dual_objective_with_grad(const UotProblem& prob,
                                const DualPotentials& pots, Vector* grad_f,
                                Vector* grad_g);

enum class SinkhornStatus { Converged, Diverged };

struct SinkhornOptions {
  double tol = 1e-9;   // on the sup-norm fixed-point residual
  int max_iter = 10000;
  const DualPotentials* warm = nullptr;
  bool record_residuals = false;
};

struct SinkhornResult {
  DualPotentials potentials;
  SinkhornStatus status = SinkhornStatus::Diverged;
  int iterations = 0;
  double residual = kInf;
  std::vector<double> residual_history;  // filled when record_residuals
};

// Alternating fixed-point iteration
//   f <- -Aprox_{phi1*}^eta(-S_beta(g)),   g <- -Aprox_{phi2*}^eta(-S_alpha(f))
// with S_beta(g)_i = -eta log sum_j exp((g_j - c_ij)/eta) beta_j (max-shifted).
// In the balanced/balanced case the result is gauge-fixed to alpha-mean-zero
// after convergence; unbalanced cases keep gauge None.
SinkhornResult solve_sinkhorn(const UotProblem& prob,
                              const SinkhornOptions& opts = {});

// Softmin operators above; exposed for the Lipschitz-inheritance checks.
Vector smooth_min_over_beta(const UotProblem& prob, const Vector& g);
Vector smooth_min_over_alpha(const UotProblem& prob, const Vector& f);

// Density p_ij = exp((f_i + g_j - c_ij)/eta), evaluated in the log domain.
Coupling primal_from_dual(const UotProblem& prob, const DualPotentials& pots);

// <h, pi> = sum_ij h_ij p_ij alpha_i beta_j.
double test_integral(const Coupling& coupling, const UotProblem& prob,
                     const Matrix& h);

// Primal objective at a coupling. Indicator divergences (Balanced, Range)
// judge marginal feasibility within marginal_tol (relative, sup-norm) instead
// of exactly, so converged-but-inexact couplings evaluate finitely.
double primal_objective(const UotProblem& prob, const Coupling& coupling,
                        double marginal_tol = 1e-7);

}  // namespace ifyot
