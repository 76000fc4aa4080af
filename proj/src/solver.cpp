#include "ifyot/solver.h"

#include <algorithm>
#include <cmath>
#include <deque>

#include "ifyot/cost_basis.h"
#include "ifyot/rng.h"

namespace ifyot {

namespace {

struct Eval {
  double f = kInf;
  Vector g;
  bool ok = false;
};

// Non-finite values and diverged inner solves read as +inf so the line
// search backs off instead of aborting the outer solve.
Eval safe_eval(const Objective& obj, const Vector& x, int* evals) {
  ++*evals;
  Eval e;
  e.g = Vector::Zero(x.size());
  try {
    e.f = obj(x, &e.g);
  } catch (const InnerSolveDiverged&) {
    e.f = kInf;
  }
  e.ok = std::isfinite(e.f) && e.g.allFinite();
  if (!e.ok) e.f = kInf;
  return e;
}

struct LsOut {
  double alpha = 0.0;
  Eval e;
  bool ok = false;
};

// Strong Wolfe search: bracketing with doubling steps, then bisection zoom.
// Falls back to the best sufficient-decrease point when the curvature
// condition cannot be met inside the budget. Near the optimum the objective
// decrease drops below double roundoff while the slope is still informative,
// so a point whose value is flat to within roundoff is accepted on the
// curvature condition alone (approximate Wolfe).
LsOut wolfe_search(const Objective& obj, const Vector& x, const Vector& p,
                   const Eval& at_zero, double c1, double c2, int* evals) {
  const int kMaxExpand = 20;
  const int kMaxZoom = 50;
  const double f0 = at_zero.f;
  const double dphi0 = at_zero.g.dot(p);
  const double f_flat = f0 + 1e-13 * (1.0 + std::abs(f0));

  struct Pt {
    double a = 0.0;
    Eval e;
    double d = 0.0;
  };
  Pt lo{0.0, at_zero, dphi0};
  Pt hi;
  bool bracket = false;

  Pt prev = lo;
  double a = 1.0;
  for (int it = 0; it < kMaxExpand; ++it) {
    Pt cur;
    cur.a = a;
    cur.e = safe_eval(obj, x + a * p, evals);
    cur.d = cur.e.ok ? cur.e.g.dot(p) : 0.0;
    if (cur.e.ok && std::abs(cur.d) <= -c2 * dphi0 && cur.e.f <= f_flat)
      return {a, cur.e, true};
    if (!cur.e.ok || cur.e.f > f0 + c1 * a * dphi0 ||
        (it > 0 && cur.e.f >= prev.e.f)) {
      lo = prev;
      hi = cur;
      bracket = true;
      break;
    }
    if (std::abs(cur.d) <= -c2 * dphi0) return {a, cur.e, true};
    if (cur.d >= 0.0) {
      lo = cur;
      hi = prev;
      bracket = true;
      break;
    }
    prev = cur;
    a *= 2.0;
  }
  if (!bracket) return {};

  for (int it = 0; it < kMaxZoom; ++it) {
    double am = 0.5 * (lo.a + hi.a);
    Pt mid;
    mid.a = am;
    mid.e = safe_eval(obj, x + am * p, evals);
    mid.d = mid.e.ok ? mid.e.g.dot(p) : 0.0;
    if (mid.e.ok && std::abs(mid.d) <= -c2 * dphi0 && mid.e.f <= f_flat)
      return {am, mid.e, true};
    if (!mid.e.ok || mid.e.f > f0 + c1 * am * dphi0 || mid.e.f >= lo.e.f) {
      hi = mid;
    } else {
      if (std::abs(mid.d) <= -c2 * dphi0) return {am, mid.e, true};
      if (mid.d * (hi.a - lo.a) >= 0.0) hi = lo;
      lo = mid;
    }
    if (std::abs(hi.a - lo.a) <= 1e-16 * std::max(1.0, std::abs(lo.a))) break;
  }
  // Armijo-only fallback keeps the accepted values monotone.
  if (lo.a > 0.0 && lo.e.ok && lo.e.f < f0) return {lo.a, lo.e, true};
  return {};
}

Vector two_loop_direction(const Vector& g, const std::deque<Vector>& s_hist,
                          const std::deque<Vector>& y_hist,
                          const std::deque<double>& rho_hist) {
  Vector q = g;
  const int k = static_cast<int>(s_hist.size());
  std::vector<double> alpha(static_cast<std::size_t>(k));
  for (int i = k - 1; i >= 0; --i) {
    alpha[static_cast<std::size_t>(i)] =
        rho_hist[static_cast<std::size_t>(i)] *
        s_hist[static_cast<std::size_t>(i)].dot(q);
    q -= alpha[static_cast<std::size_t>(i)] * y_hist[static_cast<std::size_t>(i)];
  }
  if (k > 0) {
    const Vector& sl = s_hist.back();
    const Vector& yl = y_hist.back();
    q *= sl.dot(yl) / yl.squaredNorm();
  }
  for (int i = 0; i < k; ++i) {
    double beta = rho_hist[static_cast<std::size_t>(i)] *
                  y_hist[static_cast<std::size_t>(i)].dot(q);
    q += (alpha[static_cast<std::size_t>(i)] - beta) *
         s_hist[static_cast<std::size_t>(i)];
  }
  return q;
}

}  // namespace

SolveReport minimize_smooth(const Objective& objective, const Vector& x0,
                            const MinimizeOptions& opts) {
  SolveReport rep;
  int evals = 0;
  Vector x = x0;
  Eval e = safe_eval(objective, x, &evals);
  if (!e.ok) {
    rep.theta_hat = x;
    rep.inner_solves = evals;
    rep.stalled = true;
    return rep;
  }

  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;
  for (int it = 0; it < opts.max_iter; ++it) {
    if (e.g.norm() <= opts.tol) {
      rep.converged = true;
      break;
    }
    Vector p = -two_loop_direction(e.g, s_hist, y_hist, rho_hist);
    if (!(p.dot(e.g) < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      p = -e.g;
    }
    LsOut ls = wolfe_search(objective, x, p, e, opts.c1, opts.c2, &evals);
    if (!ls.ok && !s_hist.empty()) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      p = -e.g;
      ls = wolfe_search(objective, x, p, e, opts.c1, opts.c2, &evals);
    }
    if (!ls.ok) {
      rep.stalled = true;
      break;
    }
    Vector s = ls.alpha * p;
    Vector y = ls.e.g - e.g;
    x += s;
    double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    e = std::move(ls.e);
    rep.iterations = it + 1;
  }

  rep.theta_hat = std::move(x);
  rep.objective = e.f;
  rep.grad_norm = e.g.norm();
  rep.inner_solves = evals;
  return rep;
}

void Regularizer::validate(Index param_len) const {
  if (!(lambda >= 0.0)) throw InvalidInput("regularizer: lambda must be >= 0");
  if (kind == RegKind::Nuclear) {
    if (rows <= 0 || cols <= 0 || rows * cols != param_len)
      throw InvalidInput("regularizer: nuclear reshape does not match length");
  }
}

double Regularizer::value(const Vector& theta) const {
  switch (kind) {
    case RegKind::None:
      return 0.0;
    case RegKind::L1:
      return lambda * theta.lpNorm<1>();
    case RegKind::NonnegativeL1: {
      if ((theta.array() < -1e-12).any()) return kInf;
      return lambda * theta.cwiseMax(0.0).sum();
    }
    case RegKind::Nuclear: {
      Eigen::Map<const Matrix> m(theta.data(), rows, cols);
      Eigen::JacobiSVD<Matrix> svd(m);
      return lambda * svd.singularValues().sum();
    }
  }
  return 0.0;
}

SolveReport solve_regularized(const Objective& smooth_loss, Index dim,
                              const Regularizer& reg, const Vector* init,
                              const RegularizedOptions& opts) {
  reg.validate(dim);
  if (init != nullptr && init->size() != dim)
    throw InvalidInput("solve_regularized: init size mismatch");
  Rng rng(opts.seed);
  const double lambda = reg.lambda;

  if (reg.kind == RegKind::None) {
    Vector x0 = init != nullptr ? *init : Vector::Zero(dim);
    return minimize_smooth(smooth_loss, x0, opts.inner);
  }

  if (reg.kind == RegKind::L1 || reg.kind == RegKind::NonnegativeL1) {
    const bool nonneg = reg.kind == RegKind::NonnegativeL1;
    Vector u(dim), v(dim);
    if (init != nullptr) {
      for (Index i = 0; i < dim; ++i) {
        double m = std::sqrt(std::abs((*init)[i]));
        u[i] = !nonneg && (*init)[i] < 0.0 ? -m : m;
        v[i] = m;
      }
    } else {
      u.setConstant(opts.init_scale);
      v.setConstant(opts.init_scale);
    }
    for (Index i = 0; i < dim; ++i) u[i] += opts.jitter_scale * rng.normal();
    if (!nonneg)
      for (Index i = 0; i < dim; ++i) v[i] += opts.jitter_scale * rng.normal();

    Vector gtheta(dim);
    SolveReport rep;
    if (nonneg) {
      Objective over_u = [&](const Vector& z, Vector* g) {
        Vector theta = z.cwiseProduct(z);
        double f = smooth_loss(theta, &gtheta);
        *g = 2.0 * (gtheta.cwiseProduct(z) + lambda * z);
        return f + lambda * z.squaredNorm();
      };
      rep = minimize_smooth(over_u, u, opts.inner);
      rep.factor_u = rep.theta_hat;
      rep.theta_hat = rep.factor_u.cwiseProduct(rep.factor_u);
    } else {
      Vector z0(2 * dim);
      z0 << u, v;
      Objective over_uv = [&](const Vector& z, Vector* g) {
        Vector zu = z.head(dim), zv = z.tail(dim);
        Vector theta = zu.cwiseProduct(zv);
        double f = smooth_loss(theta, &gtheta);
        g->head(dim) = gtheta.cwiseProduct(zv) + lambda * zu;
        g->tail(dim) = gtheta.cwiseProduct(zu) + lambda * zv;
        return f + 0.5 * lambda * (zu.squaredNorm() + zv.squaredNorm());
      };
      rep = minimize_smooth(over_uv, z0, opts.inner);
      rep.factor_u = rep.theta_hat.head(dim);
      rep.factor_v = rep.theta_hat.tail(dim);
      rep.theta_hat = rep.factor_u.cwiseProduct(rep.factor_v);
    }
    int extra = 0;
    Eval at = safe_eval(smooth_loss, rep.theta_hat, &extra);
    rep.inner_solves += extra;
    rep.objective = at.f + reg.value(rep.theta_hat);
    return rep;
  }

  // Nuclear.
  const Index d1 = reg.rows, d2 = reg.cols;
  const Index k = std::min(d1, d2);
  Matrix x_fac(d1, k), y_fac(k, d2);
  if (init != nullptr) {
    Eigen::Map<const Matrix> m(init->data(), d1, d2);
    Eigen::JacobiSVD<Matrix> svd(m,
                                 Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector root = svd.singularValues().cwiseSqrt();
    x_fac = svd.matrixU() * root.asDiagonal();
    y_fac = root.asDiagonal() * svd.matrixV().transpose();
  } else {
    x_fac.setConstant(opts.init_scale);
    y_fac.setConstant(opts.init_scale);
  }
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < d1; ++i)
      x_fac(i, j) += opts.jitter_scale * rng.normal();
  for (Index j = 0; j < d2; ++j)
    for (Index i = 0; i < k; ++i)
      y_fac(i, j) += opts.jitter_scale * rng.normal();

  const Index nx = d1 * k, ny = k * d2;
  Vector z0(nx + ny);
  Eigen::Map<Matrix>(z0.data(), d1, k) = x_fac;
  Eigen::Map<Matrix>(z0.data() + nx, k, d2) = y_fac;

  Vector gtheta(dim);
  Objective over_xy = [&](const Vector& z, Vector* g) {
    Eigen::Map<const Matrix> xm(z.data(), d1, k);
    Eigen::Map<const Matrix> ym(z.data() + nx, k, d2);
    Matrix prod = xm * ym;
    Eigen::Map<const Vector> theta(prod.data(), d1 * d2);
    double f = smooth_loss(theta, &gtheta);
    Eigen::Map<const Matrix> gm(gtheta.data(), d1, d2);
    Eigen::Map<Matrix>(g->data(), d1, k) = gm * ym.transpose() + lambda * xm;
    Eigen::Map<Matrix>(g->data() + nx, k, d2) =
        xm.transpose() * gm + lambda * ym;
    return f + 0.5 * lambda * (xm.squaredNorm() + ym.squaredNorm());
  };
  SolveReport rep = minimize_smooth(over_xy, z0, opts.inner);
  rep.factor_x = Eigen::Map<const Matrix>(rep.theta_hat.data(), d1, k);
  rep.factor_y = Eigen::Map<const Matrix>(rep.theta_hat.data() + nx, k, d2);
  Matrix prod = rep.factor_x * rep.factor_y;
  rep.theta_hat = Eigen::Map<const Vector>(prod.data(), d1 * d2);
  int extra = 0;
  Eval at = safe_eval(smooth_loss, rep.theta_hat, &extra);
  rep.inner_solves += extra;
  rep.objective = at.f + reg.value(rep.theta_hat);
  return rep;
}

ModelDescriptor support_and_rank(const Matrix& theta, double support_threshold,
                                 double rank_threshold) {
  ModelDescriptor d;
  for (Index j = 0; j < theta.cols(); ++j)
    for (Index i = 0; i < theta.rows(); ++i)
      if (std::abs(theta(i, j)) > support_threshold)
        d.support.push_back(i + j * theta.rows());
  d.rank_defined = true;
  if (theta.rows() == theta.cols()) {
    Matrix sym = 0.5 * (theta + theta.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    d.rank = (es.eigenvalues().array().abs() >= rank_threshold).count();
  } else {
    Eigen::JacobiSVD<Matrix> svd(theta);
    d.rank = (svd.singularValues().array() >= rank_threshold).count();
  }
  return d;
}

ModelDescriptor support_and_rank(const Vector& theta, double support_threshold,
                                 double rank_threshold) {
  ModelDescriptor d;
  for (Index i = 0; i < theta.size(); ++i)
    if (std::abs(theta[i]) > support_threshold) d.support.push_back(i);

  const Index len = theta.size();
  const Index tri =
      static_cast<Index>(std::llround((std::sqrt(8.0 * len + 1.0) - 1.0) / 2.0));
  const Index sq = static_cast<Index>(std::llround(std::sqrt(double(len))));
  if (tri * (tri + 1) / 2 == len) {
    ModelDescriptor m =
        support_and_rank(symmetric_embed(theta), support_threshold, rank_threshold);
    d.rank = m.rank;
    d.rank_defined = true;
  } else if (sq * sq == len) {
    Eigen::Map<const Matrix> m(theta.data(), sq, sq);
    ModelDescriptor md = support_and_rank(Matrix(m), support_threshold, rank_threshold);
    d.rank = md.rank;
    d.rank_defined = true;
  }
  return d;
}

}  // namespace ifyot
