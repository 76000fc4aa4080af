#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ifyot/common.h"
#include "ifyot/measures.h"

namespace ifyot {

// One pairwise feature phi_s(x, y). grad_x is optional; it is required only
// by consumers that differentiate the potential in space (the quadratic
// first-order loss), not by the transport solvers. A tabulated feature
// carries its dense value table instead of a closed form and is only
// evaluable on the grid the table was built for.
struct Feature {
  std::string name;
  std::function<double(const Vector&, const Vector&)> eval;
  std::function<Vector(const Vector&, const Vector&)> grad_x;
  std::shared_ptr<const Matrix> table;
};

enum class BasisStructure { Generic, SymmetricQuadratic, PotentialPlusSqDist };

// Basis of functions of a single point, V_theta(x) = sum_s theta_s * phi_s(x).
// The symmetric-quadratic family enumerates the upper triangle (row-major,
// i <= j) with phi_(ii) = x_i^2, phi_(i<j) = 2 x_i x_j, so that
// theta' phi(x) = x' symmetric_embed(theta) x.
struct PotentialBasis {
  std::vector<Feature> phis;  // evaluated with the second argument ignored
  int dim = 0;                // ambient dimension d when known

  Index size() const { return static_cast<Index>(phis.size()); }
  double value(const Vector& theta, const Vector& x) const;
  Vector gradient_x(const Vector& theta, const Vector& x) const;

  static PotentialBasis symmetric_quadratic(int d);
  // Column-major full-matrix family: phi_(i + j*d) = x_i x_j, so that
  // theta' phi(x) = x' M x for theta = vec(M) with M an arbitrary d x d
  // matrix. Used when the parameter is regularized as a full matrix.
  static PotentialBasis full_quadratic(int d);
};

// Linear cost parameterization c_theta = phi0 + theta' phi on pairs.
class CostBasis {
 public:
  static CostBasis generic(Feature phi0, std::vector<Feature> phis);
  // c_V(x, x') = V(x) + |x - x'|^2 / tau with V drawn from a potential basis.
  static CostBasis potential_plus_sqdist(PotentialBasis potential, double tau);

  BasisStructure structure() const { return structure_; }
  Index size() const { return static_cast<Index>(phis_.size()); }
  const Feature& phi0() const { return phi0_; }
  const std::vector<Feature>& phis() const { return phis_; }
  double tau() const { return tau_; }
  const PotentialBasis& potential() const;  // PotentialPlusSqDist only

 private:
  CostBasis() = default;
  Feature phi0_;
  std::vector<Feature> phis_;
  BasisStructure structure_ = BasisStructure::Generic;
  PotentialBasis potential_;
  double tau_ = 0.0;
};

// Feature matrices on a sample grid plus centered variants and Grams.
// Centered variants subtract normalized (probability) conditional means, so
// the zero-mean identities hold for any masses; the Gram pairings keep the
// unnormalized alpha (x) beta weights.
struct BasisMatrices {
  Matrix Phi0;               // n x m
  std::vector<Matrix> Phi;   // S matrices, n x m
  std::vector<Matrix> Phi_bar0, Phi_bar1, Phi_bar2;
  Matrix gram0, gram1, gram2, gram_raw;  // S x S

  Index rows() const { return Phi0.rows(); }
  Index cols() const { return Phi0.cols(); }
  Index size() const { return static_cast<Index>(Phi.size()); }

  // c_theta as a dense matrix.
  Matrix cost(const Vector& theta) const;
};

BasisMatrices evaluate(const CostBasis& basis, const DiscreteMeasure& alpha,
                       const DiscreteMeasure& beta);

enum class GramKind { Centered0, Centered1, Centered2, Raw };

// Smallest eigenvalue of the requested Gram matrix.
double rho_min(const BasisMatrices& matrices, GramKind which);

// Upper-triangle packing (row-major, i <= j) <-> symmetric matrices.
// symmetric_embed(theta)_{ij} = theta_{(ij)} for i <= j and symmetrically;
// symmetric_adjoint satisfies <embed(u), A>_F = <u, adjoint(A)>.
Matrix symmetric_embed(const Vector& theta_upper);
Vector symmetric_flatten(const Matrix& sym);
Vector symmetric_adjoint(const Matrix& a);
Index symmetric_dim_from_packed(Index packed_len);

// Named closed-form feature families (used by the config layer).
Feature make_constant_feature();
Feature make_coordinate_product_feature(int i, int j);    // x_i * y_j
Feature make_squared_distance_feature();                  // |x - y|^2
Feature make_tabulated_feature(const Matrix& table, const std::string& name);

}  // namespace ifyot
