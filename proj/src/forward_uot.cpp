#include "ifyot/forward_uot.h"

#include <algorithm>
#include <cmath>

namespace ifyot {

namespace {

// Row reductions s_i = -eta log sum_j exp((v_j - c_ij)/eta) w_j, computed as
// a two-pass column sweep (column-major friendly) with the log-weight shift
// u_j = v_j + eta log w_j so zero weights drop out of max and sum alike.
Vector softmin_over_cols(const Matrix& c, const Vector& v, const Vector& w,
                         double eta) {
  const Index n = c.rows();
  const Index m = c.cols();
  Eigen::ArrayXd u = v.array() + eta * w.array().log();
  Eigen::ArrayXd rowmax = Eigen::ArrayXd::Constant(n, -kInf);
  for (Index j = 0; j < m; ++j) {
    if (u[j] == -kInf) continue;
    rowmax = rowmax.max((u[j] - c.col(j).array()) / eta);
  }
  Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(n);
  for (Index j = 0; j < m; ++j) {
    if (u[j] == -kInf) continue;
    acc += ((u[j] - c.col(j).array()) / eta - rowmax).exp();
  }
  Vector out(n);
  for (Index i = 0; i < n; ++i)
    out[i] = rowmax[i] == -kInf ? kInf : -eta * (rowmax[i] + std::log(acc[i]));
  return out;
}

// Column reductions s_j = -eta log sum_i exp((v_i - c_ij)/eta) w_i.
Vector softmin_over_rows(const Matrix& c, const Vector& v, const Vector& w,
                         double eta) {
  const Index m = c.cols();
  Eigen::ArrayXd u = v.array() + eta * w.array().log();
  Vector out(m);
  for (Index j = 0; j < m; ++j) {
    Eigen::ArrayXd a = (u - c.col(j).array()) / eta;
    double shift = a.maxCoeff();
    out[j] = shift == -kInf
                 ? kInf
                 : -eta * (shift + std::log((a - shift).exp().sum()));
  }
  return out;
}

// r_i = sum_j exp((f_i + g_j - c_ij)/eta) w_j; may overflow to +inf, which is
// the honest value of the dual exp term far from the optimum.
Vector weighted_row_expsums(const Matrix& c, const Vector& f, const Vector& g,
                            const Vector& w, double eta) {
  Vector s = softmin_over_cols(c, g, w, eta);
  Vector r(f.size());
  for (Index i = 0; i < f.size(); ++i)
    r[i] = s[i] == kInf ? 0.0 : std::exp((f[i] - s[i]) / eta);
  return r;
}

Vector weighted_col_expsums(const Matrix& c, const Vector& f, const Vector& g,
                            const Vector& w, double eta) {
  Vector s = softmin_over_rows(c, f, w, eta);
  Vector r(g.size());
  for (Index j = 0; j < g.size(); ++j)
    r[j] = s[j] == kInf ? 0.0 : std::exp((g[j] - s[j]) / eta);
  return r;
}

void check_potentials(const UotProblem& prob, const DualPotentials& pots) {
  if (pots.f.size() != prob.n() || pots.g.size() != prob.m())
    throw InvalidInput("potential sizes do not match the problem");
  if (!pots.f.allFinite() || !pots.g.allFinite())
    throw InvalidInput("potentials must be finite");
}

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

// D_phi(q alpha | alpha) on densities q, with indicator divergences relaxed
// to marginal_tol so converged-but-inexact couplings evaluate finitely.
double marginal_penalty(const PhiDivergence& div, const Vector& q,
                        const Vector& base_weights, double marginal_tol) {
  switch (div.kind()) {
    case DivKind::Balanced: {
      double dev = 0.0;
      for (Index i = 0; i < q.size(); ++i)
        if (base_weights[i] > 0.0) dev = std::max(dev, std::abs(q[i] - 1.0));
      return dev <= marginal_tol ? 0.0 : kInf;
    }
    case DivKind::RangeConstraint: {
      auto [a, b] = div.range();
      for (Index i = 0; i < q.size(); ++i)
        if (base_weights[i] > 0.0 &&
            (q[i] < a - marginal_tol || q[i] > b + marginal_tol))
          return kInf;
      return 0.0;
    }
    default: {
      double total = 0.0;
      for (Index i = 0; i < q.size(); ++i)
        if (base_weights[i] > 0.0) total += div.phi(q[i]) * base_weights[i];
      return total;
    }
  }
}

}  // namespace

void UotProblem::validate() const {
  alpha.validate();
  beta.validate();
  if (cost.rows() != alpha.size() || cost.cols() != beta.size())
    throw InvalidInput("cost matrix shape does not match the measures");
  if (!all_finite(cost)) throw InvalidInput("cost matrix must be finite");
  if (!(eta > 0.0) || !std::isfinite(eta))
    throw InvalidInput("eta must be positive and finite");
}

double dual_objective(const UotProblem& prob, const DualPotentials& pots) {
  return dual_objective_with_grad(prob, pots, nullptr, nullptr);
}

double dual_objective_with_grad(const UotProblem& prob,
                                const DualPotentials& pots, Vector* grad_f,
                                Vector* grad_g) {
  check_potentials(prob, pots);
  const Vector& aw = prob.alpha.weights;
  const Vector& bw = prob.beta.weights;
  const Index n = prob.n();
  const Index m = prob.m();

  double value = 0.0;
  for (Index i = 0; i < n; ++i)
    if (aw[i] > 0.0) value += prob.div1.conjugate_value(-pots.f[i]) * aw[i];
  for (Index j = 0; j < m; ++j)
    if (bw[j] > 0.0) value += prob.div2.conjugate_value(-pots.g[j]) * bw[j];

  Vector r = weighted_row_expsums(prob.cost, pots.f, pots.g, bw, prob.eta);
  double expterm = 0.0;
  for (Index i = 0; i < n; ++i)
    if (aw[i] > 0.0) expterm += aw[i] * r[i];
  value += prob.eta * expterm;

  if (grad_f) {
    grad_f->setZero(n);
    for (Index i = 0; i < n; ++i)
      if (aw[i] > 0.0)
        (*grad_f)[i] =
            aw[i] * (-prob.div1.conjugate_derivative(-pots.f[i]) + r[i]);
  }
  if (grad_g) {
    Vector cs = weighted_col_expsums(prob.cost, pots.f, pots.g, aw, prob.eta);
    grad_g->setZero(m);
    for (Index j = 0; j < m; ++j)
      if (bw[j] > 0.0)
        (*grad_g)[j] =
            bw[j] * (-prob.div2.conjugate_derivative(-pots.g[j]) + cs[j]);
  }
  return value;
}

Vector smooth_min_over_beta(const UotProblem& prob, const Vector& g) {
  if (g.size() != prob.m()) throw InvalidInput("g size mismatch");
  return softmin_over_cols(prob.cost, g, prob.beta.weights, prob.eta);
}

Vector smooth_min_over_alpha(const UotProblem& prob, const Vector& f) {
  if (f.size() != prob.n()) throw InvalidInput("f size mismatch");
  return softmin_over_rows(prob.cost, f, prob.alpha.weights, prob.eta);
}

SinkhornResult solve_sinkhorn(const UotProblem& prob,
                              const SinkhornOptions& opts) {
  prob.validate();
  if (!(opts.tol > 0.0)) throw InvalidInput("sinkhorn tol must be positive");
  if (opts.max_iter < 1) throw InvalidInput("max_iter must be at least 1");
  const Index n = prob.n();
  const Index m = prob.m();

  Vector f = Vector::Zero(n);
  Vector g = Vector::Zero(m);
  if (opts.warm) {
    if (opts.warm->f.size() != n || opts.warm->g.size() != m)
      throw InvalidInput("warm-start potential sizes do not match");
    f = opts.warm->f;
    g = opts.warm->g;
  }

  auto update_f = [&](const Vector& gg) {
    Vector s = smooth_min_over_beta(prob, gg);
    Vector out(n);
    for (Index i = 0; i < n; ++i) out[i] = -prob.div1.aprox(-s[i], prob.eta);
    return out;
  };
  auto update_g = [&](const Vector& ff) {
    Vector s = smooth_min_over_alpha(prob, ff);
    Vector out(m);
    for (Index j = 0; j < m; ++j) out[j] = -prob.div2.aprox(-s[j], prob.eta);
    return out;
  };

  SinkhornResult res;
  // Align the g half once so every measured residual is the true fixed-point
  // residual of the current pair (the g equation holds exactly throughout).
  g = update_g(f);
  double r = kInf;
  for (int it = 1; it <= opts.max_iter; ++it) {
    Vector f_next = update_f(g);
    r = (f_next - f).lpNorm<Eigen::Infinity>();
    if (opts.record_residuals) res.residual_history.push_back(r);
    res.iterations = it;
    if (r <= opts.tol) {
      res.status = SinkhornStatus::Converged;
      break;
    }
    f = f_next;
    g = update_g(f);
  }
  res.residual = r;

  Gauge gauge = Gauge::None;
  if (prob.div1.conjugate_is_linear() && prob.div2.conjugate_is_linear()) {
    double lambda = f.dot(prob.alpha.weights) / prob.alpha.mass;
    f.array() -= lambda;
    g.array() += lambda;
    gauge = Gauge::AlphaMeanZero;
  }
  res.potentials = DualPotentials{std::move(f), std::move(g), gauge};
  return res;
}

Coupling primal_from_dual(const UotProblem& prob, const DualPotentials& pots) {
  check_potentials(prob, pots);
  const Index n = prob.n();
  const Index m = prob.m();
  Matrix p(n, m);
  for (Index j = 0; j < m; ++j)
    p.col(j) = ((pots.f.array() + pots.g[j] - prob.cost.col(j).array()) /
                prob.eta)
                   .exp();
  double mass = prob.alpha.weights.transpose() * p * prob.beta.weights;
  return Coupling{std::move(p), mass};
}

double test_integral(const Coupling& coupling, const UotProblem& prob,
                     const Matrix& h) {
  if (coupling.density.rows() != prob.n() ||
      coupling.density.cols() != prob.m())
    throw InvalidInput("coupling density shape does not match the problem");
  if (h.rows() != prob.n() || h.cols() != prob.m())
    throw InvalidInput("test function shape does not match the problem");
  return prob.alpha.weights.transpose() * h.cwiseProduct(coupling.density) *
         prob.beta.weights;
}

double primal_objective(const UotProblem& prob, const Coupling& coupling,
                        double marginal_tol) {
  if (coupling.density.rows() != prob.n() ||
      coupling.density.cols() != prob.m())
    throw InvalidInput("coupling density shape does not match the problem");
  const Matrix& p = coupling.density;
  const Vector& aw = prob.alpha.weights;
  const Vector& bw = prob.beta.weights;

  double total = test_integral(coupling, prob, prob.cost);
  Vector q1 = p * bw;              // first-marginal density against alpha
  Vector q2 = p.transpose() * aw;  // second-marginal density against beta
  total += marginal_penalty(prob.div1, q1, aw, marginal_tol);
  total += marginal_penalty(prob.div2, q2, bw, marginal_tol);

  double entropy = 0.0;
  for (Index j = 0; j < prob.m(); ++j) {
    if (bw[j] <= 0.0) continue;
    double col = 0.0;
    for (Index i = 0; i < prob.n(); ++i) {
      if (aw[i] <= 0.0) continue;
      double x = p(i, j);
      col += (xlogx(x) - x + 1.0) * aw[i];
    }
    entropy += col * bw[j];
  }
  total += prob.eta * entropy;
  return total;
}

}  // namespace ifyot
