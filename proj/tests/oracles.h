#pragma once

// Reference implementations used only by the tests. Everything here is
// written against the mathematical definitions with the slowest robust
// method available (finite differences, golden-section scans, coordinate
// descent, plain ISTA, dense KKT solves), deliberately avoiding the
// library's own algorithmic routes.

#include <cmath>
#include <functional>
#include <utility>

#include "ifyot/certificates.h"
#include "ifyot/common.h"
#include "ifyot/divergences.h"
#include "ifyot/forward_uot.h"

namespace oracle {

using ifyot::Index;
using ifyot::Matrix;
using ifyot::Vector;

using ScalarFn = std::function<double(const Vector&)>;

inline Vector fd_gradient(const ScalarFn& f, const Vector& x,
                          double h = 1e-5) {
  Vector g(x.size());
  Vector xp = x, xm = x;
  for (Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return g;
}

inline Matrix fd_hessian(const ScalarFn& f, const Vector& x,
                         double h = 1e-4) {
  const Index n = x.size();
  Matrix out(n, n);
  Vector p = x;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) {
      auto at = [&](double di, double dj) {
        p[i] += di;
        p[j] += dj;
        double v = f(p);
        p[i] = x[i];
        p[j] = x[j];
        return v;
      };
      double v;
      if (i == j) {
        v = (at(h, 0) - 2.0 * f(x) + at(-h, 0)) / (h * h);
      } else {
        v = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
      }
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

// Golden-section minimizer over [lo, hi]; f must be unimodal there.
inline double golden_argmin(const std::function<double(double)>& f, double lo,
                            double hi, int iters = 300) {
  const double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int k = 0; k < iters && b - a > 1e-15 * (1.0 + std::abs(a) + std::abs(b));
       ++k) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

inline double golden_min(const std::function<double(double)>& f, double lo,
                         double hi, int iters = 300) {
  return f(golden_argmin(f, lo, hi, iters));
}

// phi*(y) = sup_{x in [0, xmax]} x y - phi(x), by scan + golden refinement.
// xmax must be large enough that the supremum is interior (or the conjugate
// is +inf beyond the scanned slope range, which the caller avoids).
inline double conjugate_numeric(const ifyot::PhiDivergence& div, double y,
                                double xmax = 64.0) {
  auto neg = [&](double x) { return -(x * y - div.phi(x)); };
  double best_x = 0.0, best = neg(0.0);
  const int coarse = 4096;
  for (int i = 1; i <= coarse; ++i) {
    double x = xmax * static_cast<double>(i) / coarse;
    double v = neg(x);
    if (v < best) {
      best = v;
      best_x = x;
    }
  }
  double lo = std::max(0.0, best_x - xmax / coarse);
  double hi = std::min(xmax, best_x + xmax / coarse);
  return -golden_min(neg, lo, hi);
}

// argmin_q eta exp((p - q)/eta) + phi*(q) over q in [qlo, qhi].
inline double aprox_numeric(const ifyot::PhiDivergence& div, double p,
                            double eta, double qlo, double qhi) {
  auto obj = [&](double q) {
    return eta * std::exp((p - q) / eta) + div.conjugate_value(q);
  };
  // Coarse scan first: phi* may be +inf on part of the interval.
  const int coarse = 4096;
  double best_q = qhi, best = obj(qhi);
  for (int i = 0; i <= coarse; ++i) {
    double q = qlo + (qhi - qlo) * static_cast<double>(i) / coarse;
    double v = obj(q);
    if (v < best) {
      best = v;
      best_q = q;
    }
  }
  double step = (qhi - qlo) / coarse;
  double q_gold = golden_argmin(obj, std::max(qlo, best_q - step),
                                std::min(qhi, best_q + step));
  // Value-only search cannot localize an argmin past sqrt(machine eps); a
  // sign bisection on the central-difference slope recovers the rest. The
  // objective is convex, so the slope is monotone wherever it is finite.
  auto slope = [&](double q) {
    double h = 1e-6 * std::max(1.0, std::abs(q));
    return (obj(q + h) - obj(q - h)) / (2.0 * h);
  };
  double a = std::max(qlo, q_gold - step);
  double b = std::min(qhi, q_gold + step);
  if (!(std::isfinite(slope(a)) && slope(a) < 0.0 && std::isfinite(slope(b)) &&
        slope(b) > 0.0))
    return q_gold;
  for (int it = 0; it < 120; ++it) {
    double mid = 0.5 * (a + b);
    double gm = slope(mid);
    if (!std::isfinite(gm)) return q_gold;
    (gm < 0.0 ? a : b) = mid;
    if (b - a <= 1e-14 * std::max(1.0, std::abs(a))) break;
  }
  return 0.5 * (a + b);
}

// Entropic unbalanced primal objective at an entrywise coupling pi:
//   <c, pi> + D1(pi 1 | alpha) + D2(pi' 1 | beta) + eta KL(pi | alpha x beta).
inline double uot_primal(const ifyot::UotProblem& prob, const Matrix& pi) {
  Vector rows = pi.rowwise().sum();
  Vector cols = pi.colwise().sum().transpose();
  double v = (prob.cost.array() * pi.array()).sum();
  v += prob.div1.divergence_value(rows, prob.alpha.weights);
  v += prob.div2.divergence_value(cols, prob.beta.weights);
  double kl = 0.0;
  for (Index i = 0; i < pi.rows(); ++i)
    for (Index j = 0; j < pi.cols(); ++j) {
      double base = prob.alpha.weights[i] * prob.beta.weights[j];
      double p = pi(i, j);
      if (p > 0.0)
        kl += p * std::log(p / base) - p + base;
      else
        kl += base;
    }
  return v + prob.eta * kl;
}

// Cyclic golden-section coordinate descent on the coupling density
// q_ij = pi_ij / (alpha_i beta_j), for divergences finite off the marginal
// constraint (KL and friends). Returns the primal value reached.
inline double uot_primal_cd(const ifyot::UotProblem& prob, int sweeps = 200,
                            double density_cap = 64.0) {
  Matrix q = Matrix::Ones(prob.n(), prob.m());
  auto value = [&]() {
    Matrix pi = q.array() *
                (prob.alpha.weights * prob.beta.weights.transpose()).array();
    return uot_primal(prob, pi);
  };
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (Index i = 0; i < q.rows(); ++i)
      for (Index j = 0; j < q.cols(); ++j) {
        auto line = [&](double t) {
          double keep = q(i, j);
          q(i, j) = t;
          double v = value();
          q(i, j) = keep;
          return v;
        };
        q(i, j) = golden_argmin(line, 0.0, density_cap, 120);
      }
  }
  return value();
}

// Balanced/balanced 2x2 problem reduced to its single free parameter:
//   pi = [[t, a1 - t], [b1 - t, a2 - b1 + t]].
inline double balanced_2x2_primal(const ifyot::UotProblem& prob) {
  double a1 = prob.alpha.weights[0], a2 = prob.alpha.weights[1];
  double b1 = prob.beta.weights[0];
  double lo = std::max(0.0, b1 - a2);
  double hi = std::min(a1, b1);
  auto value = [&](double t) {
    Matrix pi(2, 2);
    pi << t, a1 - t, b1 - t, a2 - b1 + t;
    double v = (prob.cost.array() * pi.array()).sum();
    for (Index i = 0; i < 2; ++i)
      for (Index j = 0; j < 2; ++j) {
        double base = prob.alpha.weights[i] * prob.beta.weights[j];
        double p = pi(i, j);
        if (p > 0.0)
          v += prob.eta * (p * std::log(p / base) - p + base);
        else
          v += prob.eta * base;
      }
    return v;
  };
  return golden_min(value, lo, hi);
}

enum class PenKind { L1, NonnegL1, Nuclear };

inline Vector prox_penalty(const Vector& x, double shrink, PenKind kind,
                           Index rows, Index cols) {
  if (kind == PenKind::L1) {
    Vector out(x.size());
    for (Index i = 0; i < x.size(); ++i)
      out[i] = x[i] > shrink ? x[i] - shrink
                             : (x[i] < -shrink ? x[i] + shrink : 0.0);
    return out;
  }
  if (kind == PenKind::NonnegL1) {
    Vector out(x.size());
    for (Index i = 0; i < x.size(); ++i)
      out[i] = std::max(0.0, x[i] - shrink);
    return out;
  }
  Matrix m = Eigen::Map<const Matrix>(x.data(), rows, cols);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector s = svd.singularValues();
  for (Index i = 0; i < s.size(); ++i) s[i] = std::max(0.0, s[i] - shrink);
  Matrix shrunk = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  return Eigen::Map<const Vector>(shrunk.data(), rows * cols);
}

// Plain proximal gradient with a fixed step 1/lipschitz.
inline Vector ista_reference(
    const std::function<double(const Vector&, Vector*)>& smooth, Vector x,
    double lipschitz, double lambda, PenKind kind, Index rows, Index cols,
    int iters = 50000) {
  Vector grad(x.size());
  const double step = 1.0 / lipschitz;
  for (int k = 0; k < iters; ++k) {
    smooth(x, &grad);
    Vector next = prox_penalty(x - step * grad, step * lambda, kind, rows, cols);
    if ((next - x).norm() <= 1e-14 * (1.0 + x.norm())) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

// Precertificate through a dense LU solve of the tangent-restricted system
// (T' H T) w = T' s, z = H T w.
inline Vector precertificate_kkt(const Matrix& h,
                                 const ifyot::ModelTangent& tangent) {
  Matrix hs = 0.5 * (h + h.transpose());
  const Matrix& t = tangent.tangent_basis();
  if (t.cols() == 0) return Vector::Zero(hs.rows());
  Matrix block = t.transpose() * hs * t;
  Vector rhs = t.transpose() * tangent.sign_vector();
  Vector w = Eigen::FullPivLU<Matrix>(block).solve(rhs);
  return hs * (t * w);
}

// Forward-Euler integration of the Gaussian flow under V(x) = x'Qx:
//   dm/dt = -2 Q m,   dS/dt = -2 Q S - 2 S Q.
inline std::pair<Vector, Matrix> euler_gaussian_flow(const Matrix& q, Vector m,
                                                     Matrix s, double t,
                                                     int steps = 200000) {
  const double dt = t / steps;
  for (int k = 0; k < steps; ++k) {
    Vector dm = -2.0 * (q * m);
    Matrix ds = -2.0 * (q * s) - 2.0 * (s * q);
    m += dt * dm;
    s += dt * ds;
  }
  return {m, s};
}

}  // namespace oracle
