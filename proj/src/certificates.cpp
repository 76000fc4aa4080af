#include "ifyot/certificates.h"

#include <algorithm>
#include <cmath>

#include "ifyot/cost_basis.h"
#include "ifyot/forward_uot.h"

namespace ifyot {

namespace {

// Deterministic orthonormal complement of the k columns of u inside R^d.
Matrix orthonormal_complement(const Matrix& u) {
  const Index d = u.rows();
  const Index k = u.cols();
  if (k == 0) return Matrix::Identity(d, d);
  Eigen::HouseholderQR<Matrix> qr(u);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  return q.rightCols(d - k);
}

Vector vec_of(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

Matrix mat_of(const Vector& v, Index rows, Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

// Orthonormal basis of symmetric d x d matrices in vec coordinates,
// upper-triangle order (i <= j): E_ii, (E_ij + E_ji)/sqrt(2).
Matrix symmetric_basis(Index d) {
  Matrix b = Matrix::Zero(d * d, d * (d + 1) / 2);
  Index k = 0;
  const double inv_rt2 = 1.0 / std::sqrt(2.0);
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j, ++k) {
      if (i == j) {
        b(i + i * d, k) = 1.0;
      } else {
        b(i + j * d, k) = inv_rt2;
        b(j + i * d, k) = inv_rt2;
      }
    }
  return b;
}

}  // namespace

ModelTangent ModelTangent::l1(const Vector& theta_star,
                              double support_threshold) {
  ModelTangent t;
  t.kind_ = TangentKind::L1;
  t.ambient_dim_ = theta_star.size();
  t.sign_ = Vector::Zero(t.ambient_dim_);
  for (Index i = 0; i < theta_star.size(); ++i)
    if (std::abs(theta_star[i]) > support_threshold) {
      t.support_.push_back(i);
      t.sign_[i] = theta_star[i] > 0.0 ? 1.0 : -1.0;
    }
  const Index s = static_cast<Index>(t.support_.size());
  t.tangent_basis_ = Matrix::Zero(t.ambient_dim_, s);
  t.off_basis_ = Matrix::Zero(t.ambient_dim_, t.ambient_dim_ - s);
  Index on = 0, off = 0;
  for (Index i = 0; i < t.ambient_dim_; ++i) {
    if (t.sign_[i] != 0.0)
      t.tangent_basis_(i, on++) = 1.0;
    else
      t.off_basis_(i, off++) = 1.0;
  }
  return t;
}

ModelTangent ModelTangent::nuclear(const Matrix& theta_star,
                                   double rank_threshold) {
  ModelTangent t;
  t.kind_ = TangentKind::Nuclear;
  t.rows_ = theta_star.rows();
  t.cols_ = theta_star.cols();
  t.ambient_dim_ = t.rows_ * t.cols_;
  if (t.ambient_dim_ == 0) throw InvalidInput("tangent: empty matrix");
  t.symmetric_ =
      t.rows_ == t.cols_ &&
      (theta_star - theta_star.transpose()).cwiseAbs().maxCoeff() <= 1e-10;

  if (t.symmetric_) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(
        0.5 * (theta_star + theta_star.transpose()));
    std::vector<Index> keep;
    for (Index i = 0; i < t.rows_; ++i)
      if (std::abs(es.eigenvalues()[i]) >= rank_threshold) keep.push_back(i);
    const Index k = static_cast<Index>(keep.size());
    t.u_.resize(t.rows_, k);
    Vector signs(k);
    for (Index c = 0; c < k; ++c) {
      t.u_.col(c) = es.eigenvectors().col(keep[static_cast<std::size_t>(c)]);
      signs[c] =
          es.eigenvalues()[keep[static_cast<std::size_t>(c)]] > 0.0 ? 1.0 : -1.0;
    }
    t.v_ = t.u_ * signs.asDiagonal();
  } else {
    Eigen::JacobiSVD<Matrix> svd(theta_star,
                                 Eigen::ComputeThinU | Eigen::ComputeThinV);
    std::vector<Index> keep;
    for (Index i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()[i] >= rank_threshold) keep.push_back(i);
    const Index k = static_cast<Index>(keep.size());
    t.u_.resize(t.rows_, k);
    t.v_.resize(t.cols_, k);
    for (Index c = 0; c < k; ++c) {
      t.u_.col(c) = svd.matrixU().col(keep[static_cast<std::size_t>(c)]);
      t.v_.col(c) = svd.matrixV().col(keep[static_cast<std::size_t>(c)]);
    }
  }
  t.uc_ = orthonormal_complement(t.u_);
  t.vc_ = t.symmetric_ ? t.uc_ : orthonormal_complement(t.v_);
  t.sign_ = vec_of(t.u_ * t.v_.transpose());

  const Index k = t.u_.cols();
  const double inv_rt2 = 1.0 / std::sqrt(2.0);
  if (t.symmetric_) {
    const Index d = t.rows_;
    const Index q = d - k;
    // span{u_a u_b' + u_b u_a'} + span{u_a q' + q u_a'}: the symmetric part
    // of the tangent space; the Gaussian curvature operators vanish on the
    // skew part, so only this block carries information.
    t.tangent_basis_.resize(d * d, k * (k + 1) / 2 + k * q);
    Index col = 0;
    for (Index a = 0; a < k; ++a)
      for (Index b = a; b < k; ++b) {
        Matrix e = t.u_.col(a) * t.u_.col(b).transpose();
        t.tangent_basis_.col(col++) =
            a == b ? vec_of(e) : vec_of(Matrix(inv_rt2 * (e + e.transpose())));
      }
    for (Index a = 0; a < k; ++a)
      for (Index j = 0; j < q; ++j) {
        Matrix e = t.u_.col(a) * t.uc_.col(j).transpose();
        t.tangent_basis_.col(col++) = vec_of(Matrix(inv_rt2 * (e + e.transpose())));
      }
    t.off_basis_.resize(d * d, q * (q + 1) / 2);
    col = 0;
    for (Index i = 0; i < q; ++i)
      for (Index j = i; j < q; ++j) {
        Matrix e = t.uc_.col(i) * t.uc_.col(j).transpose();
        t.off_basis_.col(col++) =
            i == j ? vec_of(e) : vec_of(Matrix(inv_rt2 * (e + e.transpose())));
      }
  } else {
    const Index q1 = t.rows_ - k, q2 = t.cols_ - k;
    t.tangent_basis_.resize(t.ambient_dim_, k * k + k * q2 + q1 * k);
    Index col = 0;
    for (Index a = 0; a < k; ++a)
      for (Index b = 0; b < k; ++b)
        t.tangent_basis_.col(col++) =
            vec_of(t.u_.col(a) * t.v_.col(b).transpose());
    for (Index a = 0; a < k; ++a)
      for (Index j = 0; j < q2; ++j)
        t.tangent_basis_.col(col++) =
            vec_of(t.u_.col(a) * t.vc_.col(j).transpose());
    for (Index i = 0; i < q1; ++i)
      for (Index b = 0; b < k; ++b)
        t.tangent_basis_.col(col++) =
            vec_of(t.uc_.col(i) * t.v_.col(b).transpose());
    t.off_basis_.resize(t.ambient_dim_, q1 * q2);
    col = 0;
    for (Index j = 0; j < q2; ++j)
      for (Index i = 0; i < q1; ++i)
        t.off_basis_.col(col++) = vec_of(t.uc_.col(i) * t.vc_.col(j).transpose());
  }
  return t;
}

Vector ModelTangent::project(const Vector& z) const {
  if (z.size() != ambient_dim_)
    throw InvalidInput("tangent: vector size mismatch");
  if (kind_ == TangentKind::L1) {
    Vector out = Vector::Zero(ambient_dim_);
    for (Index i : support_) out[i] = z[i];
    return out;
  }
  if (u_.cols() == 0) return Vector::Zero(ambient_dim_);
  Matrix zm = mat_of(z, rows_, cols_);
  Matrix pu = u_ * u_.transpose();
  Matrix pv = v_ * v_.transpose();
  Matrix proj = pu * zm + zm * pv - pu * zm * pv;
  return vec_of(proj);
}

Vector ModelTangent::project_off(const Vector& z) const {
  return z - project(z);
}

double ModelTangent::off_model_norm(const Vector& z) const {
  if (kind_ == TangentKind::L1) {
    double m = 0.0;
    Vector off = project_off(z);
    for (Index i = 0; i < off.size(); ++i) m = std::max(m, std::abs(off[i]));
    return m;
  }
  Matrix off = mat_of(project_off(z), rows_, cols_);
  if (off.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(off);
  return svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;
}

Vector ModelTangent::clip_off_model(const Vector& z) const {
  if (kind_ == TangentKind::L1) {
    Vector out = z;
    for (Index i = 0; i < out.size(); ++i)
      if (sign_[i] == 0.0) out[i] = std::clamp(out[i], -1.0, 1.0);
    return out;
  }
  Vector on = project(z);
  Matrix off = mat_of(project_off(z), rows_, cols_);
  Eigen::JacobiSVD<Matrix> svd(off, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector sv = svd.singularValues().cwiseMin(1.0);
  Matrix clipped =
      svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
  return on + vec_of(clipped);
}

Matrix ModelTangent::dense_projector() const {
  if (kind_ == TangentKind::L1) {
    Matrix p = Matrix::Zero(ambient_dim_, ambient_dim_);
    for (Index i : support_) p(i, i) = 1.0;
    return p;
  }
  Matrix pu = u_ * u_.transpose();
  Matrix pv = v_ * v_.transpose();
  Matrix id1 = Matrix::Identity(rows_, rows_);
  Matrix id2 = Matrix::Identity(cols_, cols_);
  return kronecker(id2, pu) + kronecker(pv, id1) - kronecker(pv, pu);
}

Certificate precertificate(const Matrix& h, const ModelTangent& tangent) {
  if (h.rows() != tangent.ambient_dim() || h.cols() != tangent.ambient_dim())
    throw InvalidInput("precertificate: hessian size mismatch");
  Matrix hs = 0.5 * (h + h.transpose());
  const Matrix& tb = tangent.tangent_basis();
  Certificate cert;
  cert.kind = CertificateKind::Precertificate;
  if (tb.cols() == 0) {
    cert.z = Vector::Zero(tangent.ambient_dim());
    cert.margin = 1.0 - tangent.off_model_norm(cert.z);
    return cert;
  }
  Matrix block = tb.transpose() * hs * tb;
  Eigen::SelfAdjointEigenSolver<Matrix> es(block);
  double lam_max = es.eigenvalues().cwiseAbs().maxCoeff();
  double lam_min = es.eigenvalues().minCoeff();
  if (!(lam_min > 1e-12 * std::max(1.0, lam_max)))
    throw RankDeficientTangent(
        "tangent-restricted curvature block is singular (min eigenvalue " +
        std::to_string(lam_min) + ")");
  Vector rhs = tb.transpose() * tangent.sign_vector();
  Vector w = es.eigenvectors() *
             (es.eigenvalues().cwiseInverse().asDiagonal() *
              (es.eigenvectors().transpose() * rhs));
  cert.z = hs * (tb * w);
  cert.margin = 1.0 - tangent.off_model_norm(cert.z);
  return cert;
}

namespace {

// Reconstructs the off-model block from its orthonormal coordinates, clips
// it into the dual-norm unit ball, and maps back.
Vector clip_off_coords(const ModelTangent& tangent, const Vector& w) {
  if (tangent.kind() == TangentKind::L1)
    return w.cwiseMax(-1.0).cwiseMin(1.0);
  if (tangent.symmetric()) {
    const Index q = tangent.factor_u().rows() - tangent.factor_u().cols();
    Matrix m = Matrix::Zero(q, q);
    const double rt2 = std::sqrt(2.0);
    Index k = 0;
    for (Index i = 0; i < q; ++i)
      for (Index j = i; j < q; ++j, ++k) {
        m(i, j) = i == j ? w[k] : w[k] / rt2;
        m(j, i) = m(i, j);
      }
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    Vector lam = es.eigenvalues().cwiseMax(-1.0).cwiseMin(1.0);
    Matrix clipped =
        es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    Vector out(w.size());
    k = 0;
    for (Index i = 0; i < q; ++i)
      for (Index j = i; j < q; ++j, ++k)
        out[k] = i == j ? clipped(i, i) : rt2 * clipped(i, j);
    return out;
  }
  const Index q1 = tangent.rows() - tangent.factor_u().cols();
  const Index q2 = tangent.cols() - tangent.factor_v().cols();
  Matrix m = Eigen::Map<const Matrix>(w.data(), q1, q2);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector sv = svd.singularValues().cwiseMin(1.0);
  Matrix clipped = svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
  return Eigen::Map<const Vector>(clipped.data(), w.size());
}

}  // namespace

Certificate minimal_norm_certificate(const Matrix& h,
                                     const ModelTangent& tangent, double tol,
                                     bool force_iterative) {
  if (h.rows() != tangent.ambient_dim() || h.cols() != tangent.ambient_dim())
    throw InvalidInput("minimal_norm: hessian size mismatch");
  if (!force_iterative) {
    try {
      Certificate pre = precertificate(h, tangent);
      if (pre.margin > 0.0) {
        pre.kind = CertificateKind::MinimalNorm;
        return pre;
      }
    } catch (const RankDeficientTangent&) {
      // fall through to the projected-gradient solve
    }
  }

  Matrix hs = 0.5 * (h + h.transpose());
  const bool sym_mode =
      tangent.kind() == TangentKind::Nuclear && tangent.symmetric();
  Matrix a;       // curvature on the working subspace
  Vector s_work;  // S_T coordinates
  Matrix c_work;  // off-model basis coordinates
  if (sym_mode) {
    Matrix b = symmetric_basis(tangent.rows());
    a = b.transpose() * hs * b;
    s_work = b.transpose() * tangent.sign_vector();
    c_work = b.transpose() * tangent.off_basis();
  } else {
    a = hs;
    s_work = tangent.sign_vector();
    c_work = tangent.off_basis();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  double lam_min = es.eigenvalues().minCoeff();
  double lam_max = es.eigenvalues().maxCoeff();
  if (!(lam_min > 1e-12 * std::max(1.0, lam_max)))
    throw InvalidInput(
        "minimal_norm: curvature not positive definite on the working space");
  Matrix a_inv = es.eigenvectors() *
                 es.eigenvalues().cwiseInverse().asDiagonal() *
                 es.eigenvectors().transpose();

  const Index q = c_work.cols();
  Certificate cert;
  cert.kind = CertificateKind::MinimalNorm;
  if (q == 0) {
    cert.z = tangent.sign_vector();
    cert.margin = 1.0 - tangent.off_model_norm(cert.z);
    return cert;
  }

  Matrix quad = c_work.transpose() * a_inv * c_work;  // q x q, PSD
  Vector lin = c_work.transpose() * (a_inv * s_work);
  Eigen::SelfAdjointEigenSolver<Matrix> esq(quad);
  double lips = 2.0 * std::max(esq.eigenvalues().maxCoeff(), 1e-30);
  double step = 1.0 / lips;
  auto grad = [&](const Vector& w) { return 2.0 * (quad * w + lin); };

  Vector w = Vector::Zero(q);
  Vector w_prev = w;
  double t_acc = 1.0;
  const int max_iter = 200000;
  for (int it = 0; it < max_iter; ++it) {
    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_acc * t_acc));
    Vector y = w + ((t_acc - 1.0) / t_next) * (w - w_prev);
    Vector w_new = clip_off_coords(tangent, y - step * grad(y));
    w_prev = w;
    w = w_new;
    t_acc = t_next;
    if (it % 10 == 0) {
      double res = (w - clip_off_coords(tangent, w - step * grad(w))).norm();
      if (res <= tol) break;
    }
  }
  cert.z = tangent.sign_vector() + tangent.off_basis() * w;
  cert.margin = 1.0 - tangent.off_model_norm(cert.z);
  return cert;
}

Matrix hessian_at(FyIuotLoss& loss, const Vector& theta, double inner_tol) {
  SinkhornResult res = loss.solve_inner(theta, inner_tol);
  if (res.status != SinkhornStatus::Converged)
    throw InnerSolveDiverged(theta, res.residual);
  UotProblem prob = loss.problem_at(theta);
  Coupling coup = primal_from_dual(prob, res.potentials);

  // Active atoms only: zero-weight rows carry no curvature and would make
  // the inner block singular for free.
  std::vector<Index> ia, jb;
  for (Index i = 0; i < prob.n(); ++i)
    if (prob.alpha.weights[i] > 0.0) ia.push_back(i);
  for (Index j = 0; j < prob.m(); ++j)
    if (prob.beta.weights[j] > 0.0) jb.push_back(j);
  const Index n = static_cast<Index>(ia.size());
  const Index m = static_cast<Index>(jb.size());
  const Index s_dim = loss.dim();
  const double eta = prob.eta;

  Matrix wmat(n, m);  // coupling weights pi_ij on the active grid
  for (Index jj = 0; jj < m; ++jj)
    for (Index ii = 0; ii < n; ++ii)
      wmat(ii, jj) = coup.density(ia[static_cast<std::size_t>(ii)],
                                  jb[static_cast<std::size_t>(jj)]) *
                     prob.alpha.weights[ia[static_cast<std::size_t>(ii)]] *
                     prob.beta.weights[jb[static_cast<std::size_t>(jj)]];
  Vector row_sum = wmat.rowwise().sum();
  Vector col_sum = wmat.colwise().sum().transpose();

  std::vector<Matrix> phi_active(static_cast<std::size_t>(s_dim));
  for (Index s = 0; s < s_dim; ++s) {
    const Matrix& full = loss.matrices().Phi[static_cast<std::size_t>(s)];
    Matrix red(n, m);
    for (Index jj = 0; jj < m; ++jj)
      for (Index ii = 0; ii < n; ++ii)
        red(ii, jj) = full(ia[static_cast<std::size_t>(ii)],
                           jb[static_cast<std::size_t>(jj)]);
    phi_active[static_cast<std::size_t>(s)] = std::move(red);
  }

  Matrix k_tt(s_dim, s_dim);
  for (Index s = 0; s < s_dim; ++s)
    for (Index t = s; t < s_dim; ++t) {
      double acc = (phi_active[static_cast<std::size_t>(s)].array() *
                    phi_active[static_cast<std::size_t>(t)].array() *
                    wmat.array())
                       .sum() /
                   eta;
      k_tt(s, t) = acc;
      k_tt(t, s) = acc;
    }

  Matrix k_zt = Matrix::Zero(n + m, s_dim);
  for (Index s = 0; s < s_dim; ++s) {
    const Matrix& phi = phi_active[static_cast<std::size_t>(s)];
    k_zt.col(s).head(n) = -(phi.array() * wmat.array()).rowwise().sum() / eta;
    k_zt.col(s).tail(m) =
        -(phi.array() * wmat.array()).colwise().sum().transpose() / eta;
  }

  Matrix k_zz = Matrix::Zero(n + m, n + m);
  for (Index ii = 0; ii < n; ++ii) {
    Index i = ia[static_cast<std::size_t>(ii)];
    k_zz(ii, ii) = prob.alpha.weights[i] * prob.div1.conjugate_second_derivative(
                                               -res.potentials.f[i]) +
                   row_sum[ii] / eta;
  }
  for (Index jj = 0; jj < m; ++jj) {
    Index j = jb[static_cast<std::size_t>(jj)];
    k_zz(n + jj, n + jj) =
        prob.beta.weights[j] *
            prob.div2.conjugate_second_derivative(-res.potentials.g[j]) +
        col_sum[jj] / eta;
  }
  k_zz.block(0, n, n, m) = wmat / eta;
  k_zz.block(n, 0, m, n) = wmat.transpose() / eta;

  const bool both_balanced =
      prob.div1.conjugate_is_linear() && prob.div2.conjugate_is_linear();
  Matrix x;
  if (!both_balanced) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(k_zz);
    double lam_min = es.eigenvalues().minCoeff();
    double lam_max = es.eigenvalues().cwiseAbs().maxCoeff();
    if (!(lam_min > 1e-12 * std::max(1.0, lam_max)))
      throw SingularInnerHessian(lam_min);
    x = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
        (es.eigenvectors().transpose() * k_zt);
  } else {
    // Gauge-fixed solve: constrain the f-block to alpha-mean zero through a
    // bordered system; the multiplier row is discarded.
    Matrix bordered = Matrix::Zero(n + m + 1, n + m + 1);
    bordered.topLeftCorner(n + m, n + m) = k_zz;
    for (Index ii = 0; ii < n; ++ii) {
      double w = prob.alpha.weights[ia[static_cast<std::size_t>(ii)]];
      bordered(n + m, ii) = w;
      bordered(ii, n + m) = w;
    }
    Matrix rhs = Matrix::Zero(n + m + 1, s_dim);
    rhs.topRows(n + m) = k_zt;
    Eigen::FullPivLU<Matrix> lu(bordered);
    if (!lu.isInvertible()) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(bordered);
      throw SingularInnerHessian(es.eigenvalues().cwiseAbs().minCoeff());
    }
    x = lu.solve(rhs).topRows(n + m);
  }
  Matrix h = k_tt - k_zt.transpose() * x;
  return 0.5 * (h + h.transpose());
}

Matrix commutation_matrix(Index d) {
  Matrix k = Matrix::Zero(d * d, d * d);
  for (Index p = 0; p < d; ++p)
    for (Index q = 0; q < d; ++q) k(p + q * d, q + p * d) = 1.0;
  return k;
}

Matrix kronecker(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

namespace {

Matrix gaussian_hessian_sum(const std::vector<GaussianSpec>& snapshots,
                            bool fy) {
  if (snapshots.empty()) throw InvalidInput("gaussian hessian: no snapshots");
  const Index d = snapshots.front().dim();
  Matrix id = Matrix::Identity(d, d);
  Matrix total = Matrix::Zero(d * d, d * d);
  for (const GaussianSpec& spec : snapshots) {
    spec.validate();
    if (spec.dim() != d)
      throw InvalidInput("gaussian hessian: dimension mismatch");
    Matrix mm = spec.mean * spec.mean.transpose();
    if (fy) {
      total += kronecker(spec.covariance, spec.covariance) +
               kronecker(mm, spec.covariance) + kronecker(spec.covariance, mm);
    } else {
      Matrix second = spec.covariance + mm;
      total += kronecker(second, id) + kronecker(id, second);
    }
  }
  Matrix sym_part = Matrix::Identity(d * d, d * d) + commutation_matrix(d);
  return 2.0 * total * sym_part;
}

}  // namespace

Matrix gaussian_fy_hessian(const std::vector<GaussianSpec>& snapshots) {
  return gaussian_hessian_sum(snapshots, true);
}

Matrix gaussian_ijko_star_hessian(const std::vector<GaussianSpec>& snapshots) {
  return gaussian_hessian_sum(snapshots, false);
}

Matrix restrict_to_symmetric(const Matrix& h_full, Index d) {
  if (h_full.rows() != d * d || h_full.cols() != d * d)
    throw InvalidInput("restrict_to_symmetric: size mismatch");
  const Index packed = d * (d + 1) / 2;
  Matrix diff = Matrix::Zero(d * d, packed);
  Index k = 0;
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j, ++k) {
      diff(i + j * d, k) += 1.0;
      if (i != j) diff(j + i * d, k) += 1.0;
    }
  return diff.transpose() * h_full * diff;
}

}  // namespace ifyot
