#pragma once

#include <vector>

#include "ifyot/fy_loss.h"
#include "ifyot/measures.h"

namespace ifyot {

enum class TangentKind { L1, Nuclear };

// Model tangent data at theta_star: for l1 models the support and signs, for
// nuclear models the singular factors (U, V). When a nuclear theta_star is
// symmetric, the tangent basis is restricted to symmetric matrices — the
// quadratic-potential Hessians annihilate skew directions, so the
// unrestricted tangent block would be singular there.
class ModelTangent {
 public:
  static ModelTangent l1(const Vector& theta_star,
                         double support_threshold = 1e-5);
  static ModelTangent nuclear(const Matrix& theta_star,
                              double rank_threshold = 1e-4);

  TangentKind kind() const { return kind_; }
  Index ambient_dim() const { return ambient_dim_; }
  const std::vector<Index>& support() const { return support_; }
  const Matrix& factor_u() const { return u_; }
  const Matrix& factor_v() const { return v_; }
  bool symmetric() const { return symmetric_; }
  Index rows() const { return rows_; }
  Index cols() const { return cols_; }

  // Orthonormal bases, columns in ambient coordinates (matrices vectorized
  // column-major): the tangent space and its complement within the working
  // space (full space for l1 and nonsymmetric nuclear, symmetric matrices
  // for symmetric nuclear).
  const Matrix& tangent_basis() const { return tangent_basis_; }
  const Matrix& off_basis() const { return off_basis_; }

  // S_T(theta_star) in ambient coordinates: signs on the support, vec(U V').
  const Vector& sign_vector() const { return sign_; }

  Vector project(const Vector& z) const;      // P_T z
  Vector project_off(const Vector& z) const;  // z - P_T z
  // Dual-norm size of the off-model part: sup-norm off the support (l1) or
  // spectral norm of P_T^perp z (nuclear).
  double off_model_norm(const Vector& z) const;
  // Clip the off-model block of z into the dual-norm unit ball (coordinate
  // clamp / singular-value clip); the on-model part is left untouched.
  Vector clip_off_model(const Vector& z) const;

  // Dense P_T on the ambient space; for nuclear models this is
  // I x UU' + VV' x I - VV' x UU' (Kronecker), used by the invariant tests.
  Matrix dense_projector() const;

 private:
  ModelTangent() = default;

  TangentKind kind_ = TangentKind::L1;
  Index ambient_dim_ = 0;
  std::vector<Index> support_;
  Matrix u_, v_;          // d1 x k, d2 x k
  Matrix uc_, vc_;        // orthonormal complements
  bool symmetric_ = false;
  Index rows_ = 0, cols_ = 0;
  Matrix tangent_basis_;
  Matrix off_basis_;
  Vector sign_;
};

enum class CertificateKind { Precertificate, MinimalNorm };

struct Certificate {
  Vector z;
  double margin = 0.0;  // 1 - off-model norm; nondegenerate iff > 0
  CertificateKind kind = CertificateKind::Precertificate;
};

// z_hat = H P_T (P_T H P_T)^{-1} S_T(theta_star), with the inverse taken on
// the tangent space. Throws RankDeficientTangent when the restricted block
// is numerically singular.
Certificate precertificate(const Matrix& h, const ModelTangent& tangent);

// argmin { z' H^{-1} z : z in the subdifferential of R at theta_star },
// solved by accelerated projected gradient over the off-model block. When
// the precertificate is nondegenerate it is returned directly (the two
// coincide there); force_iterative runs the projected-gradient solve
// unconditionally so that identity can be validated numerically.
Certificate minimal_norm_certificate(const Matrix& h,
                                     const ModelTangent& tangent,
                                     double tol = 1e-10,
                                     bool force_iterative = false);

// Curvature of the transport loss at theta: the Schur complement of the
// inner dual Hessian,
//   H = K_tt - K_tz K_zz^{-1} K_zt
// at the inner optimum. With both marginals balanced the inner block has the
// known translation gauge; the solve is then done on the gauge-fixed
// subspace (f alpha-mean-zero) through a bordered system. Throws
// SingularInnerHessian when the inner block is singular beyond the gauge.
Matrix hessian_at(FyIuotLoss& loss, const Vector& theta,
                  double inner_tol = 1e-10);

// Commutation matrix: K vec(M) = vec(M') for d x d matrices.
Matrix commutation_matrix(Index d);

Matrix kronecker(const Matrix& a, const Matrix& b);

// Closed-form curvatures of the limiting Gaussian losses, on the full
// d^2-dimensional matrix parameter (snapshots are the later measure of each
// step pair, k = 1..T):
//   fy:        2 sum_k (S x S + (mm') x S + S x (mm')) (I + K)
//   ijko_star: 2 sum_k ((S + mm') x I + I x (S + mm')) (I + K)
// with S the covariance, m the mean, K the commutation matrix. Both
// annihilate skew-symmetric matrices.
Matrix gaussian_fy_hessian(const std::vector<GaussianSpec>& snapshots);
Matrix gaussian_ijko_star_hessian(const std::vector<GaussianSpec>& snapshots);

// Restriction of a d^2 x d^2 operator to the symmetric subspace in packed
// upper-triangle coordinates: D' H D with D the differential of
// symmetric_embed (columns vec(E_ii), vec(E_ij + E_ji)).
Matrix restrict_to_symmetric(const Matrix& h_full, Index d);

}  // namespace ifyot
