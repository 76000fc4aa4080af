#pragma once

#include <functional>

#include "ifyot/cost_basis.h"
#include "ifyot/forward_uot.h"

namespace ifyot {

// Loss in the cost parameter theta:
//   F(theta) = Omega(pi_hat) + <c_theta, pi_hat> + min_{f,g} K(f,g; c_theta)
//              - eta mass(alpha) mass(beta),
// the duality gap between the data coupling and the transport optimum for
// c_theta. It is convex, nonnegative whenever the data offset Omega(pi_hat)
// is available, zero exactly when pi_hat solves the transport problem, and
// its gradient is <phi, pi_hat> - <phi, pi(theta)> (envelope theorem; no
// differentiation through the inner iterations).
//
// Owns a warm-start cache for the inner solves, so instances are not
// shareable across threads; clone per thread instead.
class FyIuotLoss {
 public:
  // Density-form data: pi_hat = data_density * (alpha x beta) on the given
  // grids. Omega(pi_hat) is computed exactly; indicator marginal penalties
  // are judged within marginal_tol.
  FyIuotLoss(const CostBasis& basis, DiscreteMeasure alpha,
             DiscreteMeasure beta, const Matrix& data_density, double eta,
             PhiDivergence div1, PhiDivergence div2,
             double marginal_tol = 1e-6);

  // Pairs-form data. alpha/beta are the marginal references of the inner
  // problem; pairs need not sit on their grids. When the pair atoms coincide
  // with the grids row-for-row with uniform weights (the empirical setup),
  // Omega(pi_hat) has a closed form and is included; otherwise the offset is
  // dropped and offset_available() is false (the loss is then the gap minus
  // an unknown theta-independent constant).
  FyIuotLoss(const CostBasis& basis, DiscreteMeasure alpha,
             DiscreteMeasure beta, const CoupledSample& pairs, double eta,
             PhiDivergence div1, PhiDivergence div2);

  Index dim() const { return matrices_.size(); }

  // Value and (optionally) the S-gradient. Throws InnerSolveDiverged when
  // the inner solver exhausts its iteration budget.
  double loss_and_grad(const Vector& theta, Vector* grad);

  // <phi_s, pi_hat> and <phi0, pi_hat>, fixed per dataset.
  const Vector& data_features() const { return data_features_; }
  double data_phi0() const { return data_phi0_; }
  double data_offset() const { return data_offset_; }
  bool offset_available() const { return offset_available_; }

  const BasisMatrices& matrices() const { return matrices_; }
  const DiscreteMeasure& alpha() const { return alpha_; }
  const DiscreteMeasure& beta() const { return beta_; }
  double eta() const { return eta_; }
  const PhiDivergence& div1() const { return div1_; }
  const PhiDivergence& div2() const { return div2_; }

  UotProblem problem_at(const Vector& theta) const;

  // Inner solve at theta reusing (and refreshing) the warm cache. tol <= 0
  // picks the current scheduled tolerance.
  SinkhornResult solve_inner(const Vector& theta, double tol = -1.0);

  double inner_tolerance() const;
  void reset_warm_start() { has_warm_ = false; }

  // Iteration budget for each inner transport solve. Slowly mixing marginal
  // penalties (KL with a large weight) need budgets far above the default.
  void set_inner_max_iter(int budget);
  int inner_max_iter() const { return inner_max_iter_; }

 private:
  void init_matrices(const CostBasis& basis);

  DiscreteMeasure alpha_;
  DiscreteMeasure beta_;
  double eta_;
  PhiDivergence div1_;
  PhiDivergence div2_;
  BasisMatrices matrices_;
  Vector data_features_;
  double data_phi0_ = 0.0;
  double data_offset_ = 0.0;
  bool offset_available_ = false;
  DualPotentials warm_;
  bool has_warm_ = false;
  double last_grad_norm_ = kInf;
  int inner_max_iter_ = 10000;
};

// The finite-dimensional sharpened loss on a vector space with
// Omega(y) = 1/2 <Ay, y> and discrepancy (r/2)|y - y_hat|^2. Both evaluation
// routes are returned: the inner maximization solved as a linear system, and
// the direct closed form 1/2 |(A+rI)^{-1/2}(x + r y_hat) - (A+rI)^{1/2} y_hat|^2.
struct QuadraticSharpenedInstance {
  Matrix A;  // symmetric positive definite
  double r = 0.0;
  Vector y_hat;

  void validate() const;
};

struct QuadraticLossPair {
  double max_form = 0.0;
  double closed_form = 0.0;
};

QuadraticLossPair quadratic_sharpened_loss(
    const QuadraticSharpenedInstance& inst, const Vector& x);

// True iff the less-sharpened loss dominates: weaker(f) >= sharper(f) - tol.
bool sharpening_monotonicity_probe(
    const std::function<double(const Vector&)>& weaker,
    const std::function<double(const Vector&)>& sharper, const Vector& f,
    double tol = 1e-9);

// Same probe on two quadratic instances sharing (A, y_hat) with
// weaker.r <= sharper.r; throws InvalidInput when they do not share data.
bool sharpening_monotonicity_probe(const QuadraticSharpenedInstance& weaker,
                                   const QuadraticSharpenedInstance& sharper,
                                   const Vector& x);

}  // namespace ifyot
