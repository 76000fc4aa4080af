#pragma once

#include <utility>

#include "ifyot/fy_loss.h"

namespace ifyot {

// One implicit-Euler step of a potential flow, observed through consecutive
// snapshots (probability measures):
//   alpha^{k+1} = argmin_a <V_theta, a> + W^2_{2,eta}(a, alpha^k) / (2 tau)
// estimated through the r-sharpened step loss. The sharpening that survives
// the entropic step term is r_prime = r - eta/tau; the reduction below is
// only valid for r_prime > 0.
struct IjkoInstance {
  DiscreteMeasure alpha_k;   // earlier snapshot, atoms x_j
  DiscreteMeasure alpha_k1;  // later snapshot, atoms y_i
  double tau = 0.0;
  double eta = 0.0;
  double r = 0.0;
  PotentialBasis basis;

  double r_prime() const { return r - eta / tau; }
  // tau, eta > 0, masses equal to 1 within 1e-10, matching dimensions.
  void validate() const;
};

// |y_i - x_j|^2 between row sets.
Matrix squared_distance_matrix(const Matrix& y, const Matrix& x);

// The sharpened step loss rewritten as an unbalanced transport gap: rows
// carry alpha^{k+1} with a KL(r_prime) marginal penalty, columns carry
// alpha^k exactly, the entropic scale is eta/tau and the cost is
// V_theta(y) + |y - x|^2 / tau. The data coupling is the product
// alpha^{k+1} x alpha^k (density one), whose offset vanishes, so the value
// is a true duality gap; it differs from the measure-level sharpened gap by
// a theta-independent constant (see ijko_sharpened_gap).
class IjkoFyLoss {
 public:
  explicit IjkoFyLoss(const IjkoInstance& inst);  // throws if r_prime <= 0

  Index dim() const { return inner_.dim(); }
  double loss_and_grad(const Vector& theta, Vector* grad) {
    return inner_.loss_and_grad(theta, grad);
  }

  FyIuotLoss& inner() { return inner_; }
  const FyIuotLoss& inner() const { return inner_; }
  const IjkoInstance& instance() const { return inst_; }

 private:
  IjkoInstance inst_;
  FyIuotLoss inner_;
};

// One-shot evaluation through a fresh IjkoFyLoss (no warm-start reuse).
double ijko_loss_and_grad(const IjkoInstance& inst, const Vector& theta,
                          Vector* grad);

// Exact semidual objective of the step loss at sharpening s = r_prime, in
// the single potential f living on the y atoms:
//   S(theta, f) = <V_theta, a> + s sum_i a_i exp(-f_i / s)
//                 + (eta/tau) sum_j b_j log sum_i a_i exp(z_ij),
//   z_ij = (tau f_i - tau V_theta(y_i) - |y_i - x_j|^2) / eta.
// Analytic gradients in theta and f; either output may be null. Its minimum
// over f equals the reduction value rebased by a fixed constant (tested).
double ijko_semidual(const IjkoInstance& inst, const Vector& theta,
                     const Vector& f, Vector* grad_theta, Vector* grad_f);

// Dense quadratic normal form value = 1/2 theta' G theta + b' theta + c.
struct QuadraticLossForm {
  Matrix G;
  Vector b;
  double c = 0.0;

  Index dim() const { return b.size(); }
  double value(const Vector& theta) const;
  Vector gradient(const Vector& theta) const;
  double value_and_grad(const Vector& theta, Vector* grad) const;
};

// First-order (vanishing-eta, large-r) loss: with a transport plan gamma
// between the snapshots given as a density w.r.t. alpha^{k+1} x alpha^k,
//   F(theta) = sum_ij gamma_ij |grad V_theta(y_i) + (y_i - x_j) / tau|^2.
// Exactly quadratic in theta; the plan enters only through per-row moments.
// Throws InvalidInput when the plan's marginals miss the snapshot weights by
// more than marginal_tol (relative sup-norm).
QuadraticLossForm ijko_star_form(const IjkoInstance& inst,
                                 const Coupling& plan,
                                 double marginal_tol = 1e-6);

double ijko_star_loss(const IjkoInstance& inst, const Vector& theta,
                      const Coupling& plan, Vector* grad);

// Large-r limit of r times the sharpened gap:
//   1/2 Var_{alpha^{k+1}}[V_theta + f / tau]
// with f the Kantorovich potential values on the y atoms. Exactly quadratic
// in theta.
QuadraticLossForm variance_limit_form(const IjkoInstance& inst,
                                      const Vector& kantorovich_f);

double variance_limit_loss(const IjkoInstance& inst, const Vector& theta,
                           const Vector& kantorovich_f, Vector* grad);

// KL(p_t | q) for p_t proportional to exp(-t g) q against the small-t
// expansion (t^2 / 2) Var_q[g]; returns {kl, expansion}. q_weights must be
// strictly positive and is normalized internally.
std::pair<double, double> kl_expansion_probe(const Vector& q_weights,
                                             const Vector& g, double t);

// Balanced entropic transport with cost |y - x|^2 at scale eta; value is the
// primal optimum <c, pi> + eta KL(pi | a x b) over couplings of (a, b).
struct QuadOtSolution {
  DualPotentials potentials;
  double value = 0.0;
  SinkhornStatus status = SinkhornStatus::Diverged;
  int iterations = 0;
  double residual = kInf;
};

QuadOtSolution quadratic_entropic_ot(const DiscreteMeasure& a,
                                     const DiscreteMeasure& b, double eta,
                                     double tol = 1e-9, int max_iter = 20000);

// Measure-level sharpened gap of the step at theta: the reduction value with
// the product-coupling cost constant removed and the step objective at the
// data added back,
//   gap_r = value_red - Q / tau + W^2_{2,eta}(alpha^{k+1}, alpha^k) / tau,
// Q = <|y - x|^2, alpha^{k+1} x alpha^k>. Nonnegative, zero when alpha^{k+1}
// solves the step, and r * gap_r tends to variance_limit_loss as r grows.
double ijko_sharpened_gap(const IjkoInstance& inst, const Vector& theta);

}  // namespace ifyot
