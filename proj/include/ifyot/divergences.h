#pragma once

#include <string>
#include <utility>

#include "ifyot/common.h"
#include "ifyot/measures.h"

namespace ifyot {

enum class DivKind { Balanced, KL, ChiSquared, Hellinger, JensenShannon, RangeConstraint };

// A marginal-discrepancy specification: the generator phi, its conjugate
// phi*, and the Aprox operator
//   Aprox_h^eta(p) = argmin_q  eta * exp((p-q)/eta) + h(q),   h = phi*.
// Balanced and KL have closed forms; the rest go through a safeguarded
// Newton/bisection solve on the (convex) Aprox objective.
class PhiDivergence {
 public:
  static PhiDivergence balanced();
  static PhiDivergence kl(double tau);
  static PhiDivergence chi_squared(double tau);
  static PhiDivergence hellinger(double tau);
  static PhiDivergence jensen_shannon(double tau);
  static PhiDivergence range_constraint(double a, double b);

  // Config names: "balanced", "kl:1.5", "chi2:1", "hellinger:2", "js:1",
  // "range:0.5:2".
  static PhiDivergence parse(const std::string& name);
  std::string name() const;

  DivKind kind() const { return kind_; }
  double tau() const { return tau_; }
  std::pair<double, double> range() const { return {a_, b_}; }

  // Generator phi(x) on x >= 0; +inf outside dom phi.
  double phi(double x) const;
  // Recession slope phi'_inf weighting the singular part of the divergence.
  double phi_prime_inf() const;

  double conjugate_value(double y) const;              // phi*(y), may be +inf
  double conjugate_derivative(double y) const;         // (phi*)'(y)
  double conjugate_second_derivative(double y) const;  // (phi*)''(y)

  double aprox(double p, double eta) const;

  // D_phi(rho | base) = sum phi(rho_i/base_i) base_i + phi'_inf * mass(rho off
  // base). Supports must coincide pointwise; rows with base weight 0 form the
  // singular part.
  double divergence_value(const DiscreteMeasure& rho,
                          const DiscreteMeasure& base) const;
  // Same on aligned weight vectors.
  double divergence_value(const Vector& rho_weights,
                          const Vector& base_weights) const;

  // True when the conjugate is linear (Balanced): the dual objective then has
  // a translation gauge on that side.
  bool conjugate_is_linear() const { return kind_ == DivKind::Balanced; }

 private:
  PhiDivergence(DivKind k, double tau, double a, double b)
      : kind_(k), tau_(tau), a_(a), b_(b) {}

  double aprox_numeric(double p, double eta) const;

  DivKind kind_;
  double tau_;
  double a_, b_;  // RangeConstraint bounds
};

// Scans dom(phi) grids for witnesses making the dual objective coercive in
// both mass directions: (a, b) with b*m_beta > a*m_alpha and (a', b') with
// a'*m_alpha > b'*m_beta. Returns {found_first, found_second}. KL and
// chi-squared (full rays as domains) always admit both.
std::pair<bool, bool> assumption_bounded_witnesses(const PhiDivergence& div1,
                                                   const PhiDivergence& div2,
                                                   double mass_alpha,
                                                   double mass_beta);

}  // namespace ifyot
