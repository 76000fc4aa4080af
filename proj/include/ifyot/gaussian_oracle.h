#pragma once

#include <vector>

#include "ifyot/ijko.h"
#include "ifyot/measures.h"

namespace ifyot {

// Ground truth for the linear flow x' = -grad V(x) with V(x) = x' theta x:
// a Gaussian stays Gaussian with
//   m_t = exp(-2 t theta) m_0,
//   Sigma_t = exp(-2 t theta) Sigma_0 exp(-2 t theta)'.
struct QuadraticPotentialTruth {
  Matrix theta_star;  // d x d, symmetric
  Vector m0;
  Matrix sigma0;

  Index dim() const { return m0.size(); }
  void validate() const;  // symmetry within 1e-12, PSD sigma0, shapes agree
};

// Snapshots at t = k tau for k = 0..steps (steps + 1 entries), through the
// symmetric eigendecomposition of theta_star.
std::vector<GaussianSpec> trajectory(const QuadraticPotentialTruth& truth,
                                     double tau, int steps);

// Quadratic model of a Kantorovich potential, f(x) = x'Wx + b'x + constant.
struct QuadraticKantorovich {
  Matrix w;
  Vector b;
  double constant = 0.0;
  double residual_fraction = 0.0;  // residual sum of squares over Var(f)
  bool poor_fit = false;           // residual_fraction > 0.10
};

// Least-squares fit of given potential values on the alpha atoms.
QuadraticKantorovich fit_quadratic_values(const DiscreteMeasure& alpha,
                                          const Vector& f);

// Solves balanced entropic transport with quadratic cost at scale eta, then
// fits the alpha-side potential. Requires n >= 10 d^2 so the fit is
// overdetermined. Throws InnerSolveDiverged when the transport solve fails.
QuadraticKantorovich fit_quadratic_potential(const DiscreteMeasure& alpha,
                                             const DiscreteMeasure& beta,
                                             double eta);

// Closed-form limiting losses for one step pair under alpha^{k+1} =
// N(m, Sigma) and a quadratic Kantorovich potential. With
// A = sym(theta + W / tau):
//   fy_limit  = 2 |S A S|_F^2 + |S (2 A m + b / tau)|^2,  S = Sigma^{1/2}
//               (the variance of V_theta + f / tau; half of it is the
//               variance-limit loss)
//   ijko_star = 4 |S A|_F^2 + |2 A m + b / tau|^2.
struct LimitingLosses {
  double fy_limit = 0.0;
  double ijko_star = 0.0;
};

LimitingLosses limiting_losses(const GaussianSpec& alpha_k1,
                               const GaussianSpec& alpha_k,
                               const QuadraticKantorovich& kanto, double tau,
                               const Matrix& theta);

// Symmetric PSD square root (eigenvalues clipped at zero).
Matrix psd_sqrt(const Matrix& m);

}  // namespace ifyot
