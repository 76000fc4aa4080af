#include "ifyot/ijko.h"

#include <cmath>

namespace ifyot {

namespace {

// Potential feature values on the y atoms, one column per feature.
Matrix feature_values(const PotentialBasis& basis, const DiscreteMeasure& m) {
  static const Vector kNoY;
  Matrix phi(m.size(), basis.size());
  for (Index s = 0; s < basis.size(); ++s) {
    const auto& f = basis.phis[static_cast<std::size_t>(s)];
    if (!f.eval) throw InvalidInput("ijko: potential feature lacks eval");
    for (Index i = 0; i < m.size(); ++i)
      phi(i, s) = f.eval(m.point(i), kNoY);
  }
  return phi;
}

FyIuotLoss make_reduction(const IjkoInstance& inst) {
  inst.validate();
  if (!(inst.r_prime() > 0.0))
    throw InvalidInput("ijko: reduction needs r > eta / tau");
  CostBasis cost = CostBasis::potential_plus_sqdist(inst.basis, inst.tau);
  Matrix ones = Matrix::Ones(inst.alpha_k1.size(), inst.alpha_k.size());
  return FyIuotLoss(cost, inst.alpha_k1, inst.alpha_k, ones,
                    inst.eta / inst.tau, PhiDivergence::kl(inst.r_prime()),
                    PhiDivergence::balanced());
}

}  // namespace

void IjkoInstance::validate() const {
  alpha_k.validate();
  alpha_k1.validate();
  if (alpha_k.dim() != alpha_k1.dim())
    throw InvalidInput("ijko: snapshot dimensions differ");
  if (!(tau > 0.0)) throw InvalidInput("ijko: tau must be positive");
  if (!(eta > 0.0)) throw InvalidInput("ijko: eta must be positive");
  if (std::abs(alpha_k.mass - 1.0) > 1e-10 ||
      std::abs(alpha_k1.mass - 1.0) > 1e-10)
    throw InvalidInput("ijko: snapshots must be probability measures");
  if (basis.phis.empty()) throw InvalidInput("ijko: empty potential basis");
}

Matrix squared_distance_matrix(const Matrix& y, const Matrix& x) {
  if (y.cols() != x.cols())
    throw InvalidInput("squared_distance_matrix: dimension mismatch");
  Vector ny = y.rowwise().squaredNorm();
  Vector nx = x.rowwise().squaredNorm();
  Matrix d = (-2.0) * (y * x.transpose());
  d.colwise() += ny;
  d.rowwise() += nx.transpose();
  return d.cwiseMax(0.0);
}

IjkoFyLoss::IjkoFyLoss(const IjkoInstance& inst)
    : inst_(inst), inner_(make_reduction(inst_)) {}

double ijko_loss_and_grad(const IjkoInstance& inst, const Vector& theta,
                          Vector* grad) {
  IjkoFyLoss loss(inst);
  return loss.loss_and_grad(theta, grad);
}

double ijko_semidual(const IjkoInstance& inst, const Vector& theta,
                     const Vector& f, Vector* grad_theta, Vector* grad_f) {
  inst.validate();
  const Index n1 = inst.alpha_k1.size();
  const Index n0 = inst.alpha_k.size();
  if (f.size() != n1) throw InvalidInput("ijko_semidual: f size mismatch");
  if (theta.size() != inst.basis.size())
    throw InvalidInput("ijko_semidual: theta size mismatch");
  const double s = inst.r_prime();
  const double tau = inst.tau;
  const double eta = inst.eta;
  const Vector& a = inst.alpha_k1.weights;
  const Vector& b = inst.alpha_k.weights;

  Matrix phi = feature_values(inst.basis, inst.alpha_k1);
  Vector v = phi * theta;
  Matrix sq = squared_distance_matrix(inst.alpha_k1.points, inst.alpha_k.points);

  double term1 = a.dot(v);
  Vector decay = (-f / s).array().exp().matrix().cwiseProduct(a);
  double term2 = s * decay.sum();

  // z_ij = (tau f_i - tau v_i - |y_i - x_j|^2) / eta, column log-sum-exp with
  // the log a_i shift folded in; omega_i collects the softmax row weights.
  Vector base = (tau / eta) * (f - v);
  Vector omega = Vector::Zero(n1);
  double term3 = 0.0;
  Vector col(n1);
  for (Index j = 0; j < n0; ++j) {
    double zmax = -kInf;
    for (Index i = 0; i < n1; ++i) {
      col[i] = a[i] > 0.0 ? base[i] - sq(i, j) / eta : -kInf;
      if (col[i] > zmax) zmax = col[i];
    }
    double acc = 0.0;
    for (Index i = 0; i < n1; ++i) {
      col[i] = a[i] > 0.0 ? a[i] * std::exp(col[i] - zmax) : 0.0;
      acc += col[i];
    }
    term3 += (eta / tau) * b[j] * (zmax + std::log(acc));
    if (grad_theta != nullptr || grad_f != nullptr)
      omega += (b[j] / acc) * col;
  }

  if (grad_f != nullptr) *grad_f = omega - decay;
  if (grad_theta != nullptr) *grad_theta = phi.transpose() * (a - omega);
  return term1 + term2 + term3;
}

double QuadraticLossForm::value(const Vector& theta) const {
  return 0.5 * theta.dot(G * theta) + b.dot(theta) + c;
}

Vector QuadraticLossForm::gradient(const Vector& theta) const {
  return G * theta + b;
}

double QuadraticLossForm::value_and_grad(const Vector& theta,
                                         Vector* grad) const {
  Vector gtheta = G * theta;
  if (grad != nullptr) *grad = gtheta + b;
  return 0.5 * theta.dot(gtheta) + b.dot(theta) + c;
}

QuadraticLossForm ijko_star_form(const IjkoInstance& inst,
                                 const Coupling& plan, double marginal_tol) {
  inst.validate();
  const Index n1 = inst.alpha_k1.size();
  const Index n0 = inst.alpha_k.size();
  if (plan.density.rows() != n1 || plan.density.cols() != n0)
    throw InvalidInput("ijko_star: plan shape mismatch");
  const Vector& a = inst.alpha_k1.weights;
  const Vector& b = inst.alpha_k.weights;

  Vector q1 = plan.density * b;            // target 1 on every y atom
  Vector q2 = plan.density.transpose() * a;  // target 1 on every x atom
  for (Index i = 0; i < n1; ++i)
    if (a[i] > 0.0 && std::abs(q1[i] - 1.0) > marginal_tol)
      throw InvalidInput("ijko_star: plan first marginal off the snapshot");
  for (Index j = 0; j < n0; ++j)
    if (b[j] > 0.0 && std::abs(q2[j] - 1.0) > marginal_tol)
      throw InvalidInput("ijko_star: plan second marginal off the snapshot");

  const Index S = inst.basis.size();
  const double tau = inst.tau;
  static const Vector kNoY;
  const Index d = inst.alpha_k1.dim();

  QuadraticLossForm form;
  form.G = Matrix::Zero(S, S);
  form.b = Vector::Zero(S);
  form.c = 0.0;

  Matrix jac(d, S);
  for (Index i = 0; i < n1; ++i) {
    if (!(a[i] > 0.0)) continue;
    Vector y = inst.alpha_k1.point(i);
    for (Index t = 0; t < S; ++t) {
      const auto& feat = inst.basis.phis[static_cast<std::size_t>(t)];
      if (!feat.grad_x)
        throw InvalidInput("ijko_star: potential feature lacks grad_x");
      jac.col(t) = feat.grad_x(y, kNoY);
    }
    double wi = 0.0, s2 = 0.0;
    Vector s1 = Vector::Zero(d);
    for (Index j = 0; j < n0; ++j) {
      double g = plan.density(i, j) * a[i] * b[j];
      if (g == 0.0) continue;
      wi += g;
      s1 += g * inst.alpha_k.point(j);
      s2 += g * inst.alpha_k.point(j).squaredNorm();
    }
    Vector u = y / tau;
    form.G += 2.0 * wi * (jac.transpose() * jac);
    form.b += 2.0 * (jac.transpose() * (wi * u - s1 / tau));
    form.c += wi * u.squaredNorm() - (2.0 / tau) * u.dot(s1) + s2 / (tau * tau);
  }
  return form;
}

double ijko_star_loss(const IjkoInstance& inst, const Vector& theta,
                      const Coupling& plan, Vector* grad) {
  QuadraticLossForm form = ijko_star_form(inst, plan);
  if (theta.size() != form.dim())
    throw InvalidInput("ijko_star: theta size mismatch");
  return form.value_and_grad(theta, grad);
}

QuadraticLossForm variance_limit_form(const IjkoInstance& inst,
                                      const Vector& kantorovich_f) {
  inst.validate();
  const Index n1 = inst.alpha_k1.size();
  if (kantorovich_f.size() != n1)
    throw InvalidInput("variance_limit: potential size mismatch");
  const Vector& a = inst.alpha_k1.weights;
  Matrix phi = feature_values(inst.basis, inst.alpha_k1);
  Vector u = kantorovich_f / inst.tau;

  Vector mean_phi = phi.transpose() * a;
  double mean_u = a.dot(u);
  Matrix centered = phi;
  centered.rowwise() -= mean_phi.transpose();
  Vector ubar = u.array() - mean_u;

  QuadraticLossForm form;
  form.G = centered.transpose() * a.asDiagonal() * centered;
  form.b = centered.transpose() * a.cwiseProduct(ubar);
  form.c = 0.5 * a.dot(ubar.cwiseProduct(ubar));
  return form;
}

double variance_limit_loss(const IjkoInstance& inst, const Vector& theta,
                           const Vector& kantorovich_f, Vector* grad) {
  inst.validate();
  const Index n1 = inst.alpha_k1.size();
  if (kantorovich_f.size() != n1)
    throw InvalidInput("variance_limit: potential size mismatch");
  if (theta.size() != inst.basis.size())
    throw InvalidInput("variance_limit: theta size mismatch");
  const Vector& a = inst.alpha_k1.weights;
  Matrix phi = feature_values(inst.basis, inst.alpha_k1);
  Vector w = phi * theta + kantorovich_f / inst.tau;
  double mean = a.dot(w);
  Vector wbar = w.array() - mean;
  if (grad != nullptr) {
    Vector mean_phi = phi.transpose() * a;
    Matrix centered = phi;
    centered.rowwise() -= mean_phi.transpose();
    *grad = centered.transpose() * a.cwiseProduct(wbar);
  }
  return 0.5 * a.dot(wbar.cwiseProduct(wbar));
}

std::pair<double, double> kl_expansion_probe(const Vector& q_weights,
                                             const Vector& g, double t) {
  if (q_weights.size() != g.size() || q_weights.size() == 0)
    throw InvalidInput("kl_expansion_probe: size mismatch");
  if ((q_weights.array() <= 0.0).any())
    throw InvalidInput("kl_expansion_probe: weights must be positive");
  Vector q = q_weights / q_weights.sum();
  Vector logits = -t * g;
  double log_z = log_sum_exp_weighted(logits, q);
  double kl = 0.0;
  for (Index i = 0; i < q.size(); ++i)
    kl += q[i] * std::exp(logits[i] - log_z) * (logits[i] - log_z);
  double mean = q.dot(g);
  double var = q.dot((g.array() - mean).square().matrix());
  return {kl, 0.5 * t * t * var};
}

QuadOtSolution quadratic_entropic_ot(const DiscreteMeasure& a,
                                     const DiscreteMeasure& b, double eta,
                                     double tol, int max_iter) {
  a.validate();
  b.validate();
  if (!(eta > 0.0))
    throw InvalidInput("quadratic_entropic_ot: eta must be positive");
  UotProblem prob;
  prob.alpha = a;
  prob.beta = b;
  prob.cost = squared_distance_matrix(a.points, b.points);
  prob.eta = eta;
  prob.div1 = PhiDivergence::balanced();
  prob.div2 = PhiDivergence::balanced();
  SinkhornOptions opts;
  opts.tol = tol;
  opts.max_iter = max_iter;
  SinkhornResult res = solve_sinkhorn(prob, opts);
  QuadOtSolution sol;
  sol.potentials = res.potentials;
  sol.status = res.status;
  sol.iterations = res.iterations;
  sol.residual = res.residual;
  sol.value = -dual_objective(prob, sol.potentials) + eta * a.mass * b.mass;
  return sol;
}

double ijko_sharpened_gap(const IjkoInstance& inst, const Vector& theta) {
  IjkoFyLoss loss(inst);
  // The row-marginal Aprox damps the fixed-point update by a factor
  // r' / (r' + eta/tau), so the iteration count grows linearly in r'; scale
  // the budget accordingly.
  double scaled = 40.0 * inst.r_prime() * inst.tau / inst.eta;
  int budget = scaled > 2e6 ? 2000000 : (scaled < 1e4 ? 10000
                                                      : static_cast<int>(scaled));
  loss.inner().set_inner_max_iter(budget);
  double value = loss.loss_and_grad(theta, nullptr);
  Matrix sq = squared_distance_matrix(inst.alpha_k1.points, inst.alpha_k.points);
  double q = inst.alpha_k1.weights.dot(sq * inst.alpha_k.weights);
  QuadOtSolution ot =
      quadratic_entropic_ot(inst.alpha_k1, inst.alpha_k, inst.eta);
  if (ot.status != SinkhornStatus::Converged)
    throw InnerSolveDiverged(theta, ot.residual);
  return value - q / inst.tau + ot.value / inst.tau;
}

}  // namespace ifyot
