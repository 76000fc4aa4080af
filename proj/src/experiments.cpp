#include "ifyot/experiments.h"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <utility>

#include "ifyot/certificates.h"
#include "ifyot/cost_basis.h"
#include "ifyot/forward_uot.h"
#include "ifyot/fy_loss.h"
#include "ifyot/gaussian_oracle.h"
#include "ifyot/ijko.h"
#include "ifyot/plot.h"
#include "ifyot/rng.h"
#include "ifyot/solver.h"

namespace ifyot {

int thread_budget() {
  if (const char* env = std::getenv("IFYOT_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1)
      return static_cast<int>(std::min<long>(v, 512));
    return 1;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(Index count, const std::function<void(Index)>& body) {
  if (count <= 0) return;
  int workers = std::min<Index>(thread_budget(), count);
  if (workers <= 1) {
    for (Index i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto work = [&]() {
    while (true) {
      Index i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

Vector log_lambda_grid(double lo, double hi, int points_per_decade) {
  if (!(lo > 0.0) || !(hi > lo) || points_per_decade < 1)
    throw InvalidInput("log_lambda_grid: need 0 < lo < hi, points >= 1");
  double llo = std::log10(lo), lhi = std::log10(hi);
  Index count = static_cast<Index>(
                    std::ceil((lhi - llo) * points_per_decade - 1e-9)) +
                1;
  Vector grid(count);
  for (Index i = 0; i < count; ++i) {
    double t = llo + static_cast<double>(i) / points_per_decade;
    grid[i] = std::pow(10.0, std::min(t, lhi));
  }
  grid[count - 1] = hi;
  return grid;
}

LambdaSearch grid_search_lambda(const Vector& lambdas,
                                const std::function<double(double)>& metric) {
  if (lambdas.size() == 0) throw InvalidInput("grid_search_lambda: empty grid");
  LambdaSearch out;
  out.lambdas = lambdas;
  out.metrics.resize(lambdas.size());
  for (Index i = 0; i < lambdas.size(); ++i) {
    double m = metric(lambdas[i]);
    out.metrics[i] = m;
    if (i == 0 || m <= out.best_metric) {
      out.best_metric = m;
      out.best_lambda = lambdas[i];
    }
  }
  return out;
}

double fitted_loglog_slope(const std::vector<double>& x,
                           const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  Index n = 0;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) throw InvalidInput("fitted_loglog_slope: need >= 2 usable points");
  double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-14)
    throw InvalidInput("fitted_loglog_slope: degenerate abscissae");
  return (n * sxy - sx * sy) / denom;
}

CoupledSample sample_pairs_from_coupling(const UotProblem& prob,
                                         const Coupling& coupling, Index n,
                                         Rng& rng) {
  const Index rows = prob.n(), cols = prob.m();
  Vector cumulative(rows * cols);
  double total = 0.0;
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) {
      total += coupling.density(i, j) * prob.alpha.weights[i] *
               prob.beta.weights[j];
      cumulative[i + j * rows] = total;
    }
  if (!(total > 0.0))
    throw InvalidInput("sample_pairs_from_coupling: zero-mass coupling");
  CoupledSample out;
  out.x.resize(n, prob.alpha.dim());
  out.y.resize(n, prob.beta.dim());
  out.mass = total;
  for (Index k = 0; k < n; ++k) {
    double u = rng.uniform01() * total;
    Index lo = 0, hi = cumulative.size() - 1;
    while (lo < hi) {
      Index mid = (lo + hi) / 2;
      if (cumulative[mid] < u)
        lo = mid + 1;
      else
        hi = mid;
    }
    out.x.row(k) = prob.alpha.points.row(lo % rows);
    out.y.row(k) = prob.beta.points.row(lo / rows);
  }
  return out;
}

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fd(double v) { return format_double(v); }
std::string fi(long long v) { return std::to_string(v); }

using LossForms =
    std::array<std::pair<const char*, const QuadraticLossForm*>, 2>;

// Multinomial draws aggregated back onto the population atoms; zero-count
// atoms are dropped so downstream solvers see only the observed support.
DiscreteMeasure empirical_marginal(const DiscreteMeasure& population, Index n,
                                   Rng& rng) {
  Vector cumulative(population.size());
  double total = 0.0;
  for (Index i = 0; i < population.size(); ++i) {
    total += population.weights[i];
    cumulative[i] = total;
  }
  std::vector<Index> counts(static_cast<std::size_t>(population.size()), 0);
  for (Index k = 0; k < n; ++k) {
    double u = rng.uniform01() * total;
    Index lo = 0, hi = population.size() - 1;
    while (lo < hi) {
      Index mid = (lo + hi) / 2;
      if (cumulative[mid] < u)
        lo = mid + 1;
      else
        hi = mid;
    }
    counts[static_cast<std::size_t>(lo)]++;
  }
  Index kept = 0;
  for (Index i = 0; i < population.size(); ++i)
    if (counts[static_cast<std::size_t>(i)] > 0) ++kept;
  Matrix points(kept, population.dim());
  Vector weights(kept);
  Index at = 0;
  for (Index i = 0; i < population.size(); ++i) {
    if (counts[static_cast<std::size_t>(i)] == 0) continue;
    points.row(at) = population.points.row(i);
    weights[at] = population.mass *
                  static_cast<double>(counts[static_cast<std::size_t>(i)]) /
                  static_cast<double>(n);
    ++at;
  }
  return DiscreteMeasure(std::move(points), std::move(weights),
                         population.mass);
}

DiscreteMeasure gaussian_cloud(const GaussianSpec& spec, Index n,
                               std::uint64_t seed) {
  return empirical_from_samples(sample_gaussian(spec, n, seed), 1.0);
}

Matrix circular_adjacency(int d) {
  Matrix a = Matrix::Zero(d, d);
  for (int i = 0; i + 1 < d; ++i) {
    a(i, i + 1) = 1.0;
    a(i + 1, i) = 1.0;
  }
  return a;
}

Vector pack_upper(const Matrix& m) {
  const Index d = m.rows();
  Vector out(d * (d + 1) / 2);
  Index k = 0;
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j, ++k) out[k] = m(i, j);
  return out;
}

void add_form(QuadraticLossForm& acc, const QuadraticLossForm& term) {
  if (acc.b.size() == 0) {
    acc = term;
  } else {
    acc.G += term.G;
    acc.b += term.b;
    acc.c += term.c;
  }
}

// The 1-D two-feature transport family shared by the iuot and sample-sweep
// runners: smooth unbalanced marginals on a uniform grid, cost
// c_theta(x, y) = theta_1 (x-y)^2 + theta_2 |x-y|.
struct LinkSetting {
  DiscreteMeasure alpha, beta;
  CostBasis basis;
  Vector theta_star;
  double eta;
  PhiDivergence div1, div2;

  Matrix cost_at(const Vector& theta, const DiscreteMeasure& a,
                 const DiscreteMeasure& b) const {
    Matrix c(a.size(), b.size());
    for (Index i = 0; i < a.size(); ++i)
      for (Index j = 0; j < b.size(); ++j) {
        double diff = a.points(i, 0) - b.points(j, 0);
        c(i, j) = theta[0] * diff * diff + theta[1] * std::abs(diff);
      }
    return c;
  }

  UotProblem problem(const Vector& theta, DiscreteMeasure a,
                     DiscreteMeasure b) const {
    UotProblem prob;
    prob.cost = cost_at(theta, a, b);
    prob.alpha = std::move(a);
    prob.beta = std::move(b);
    prob.eta = eta;
    prob.div1 = div1;
    prob.div2 = div2;
    return prob;
  }
};

LinkSetting make_link_setting(Index grid_size, double eta,
                              const std::string& div1, const std::string& div2,
                              const std::vector<double>& theta_star) {
  if (grid_size < 2) throw InvalidInput("link setting: grid_size must be >= 2");
  if (theta_star.size() != 2)
    throw InvalidInput("link setting: theta_star must have 2 entries");
  Matrix grid(grid_size, 1);
  for (Index i = 0; i < grid_size; ++i)
    grid(i, 0) = (static_cast<double>(i) + 0.5) / static_cast<double>(grid_size);
  Vector wa(grid_size), wb(grid_size);
  for (Index i = 0; i < grid_size; ++i) {
    wa[i] = std::exp(-2.0 * std::pow(grid(i, 0) - 0.35, 2));
    wb[i] = std::exp(-3.0 * std::pow(grid(i, 0) - 0.6, 2));
  }
  wa *= 1.15 / wa.sum();
  wb *= 0.9 / wb.sum();
  Feature phi0;
  phi0.name = "zero";
  phi0.eval = [](const Vector&, const Vector&) { return 0.0; };
  Feature phi1;
  phi1.name = "sq_diff";
  phi1.eval = [](const Vector& x, const Vector& y) {
    double d = x[0] - y[0];
    return d * d;
  };
  Feature phi2;
  phi2.name = "abs_diff";
  phi2.eval = [](const Vector& x, const Vector& y) {
    return std::abs(x[0] - y[0]);
  };
  return LinkSetting{DiscreteMeasure(grid, wa, 1.15),
                     DiscreteMeasure(grid, wb, 0.9),
                     CostBasis::generic(phi0, {phi1, phi2}),
                     Eigen::Map<const Vector>(theta_star.data(), 2),
                     eta,
                     PhiDivergence::parse(div1),
                     PhiDivergence::parse(div2)};
}

Matrix bounded_test_function(const DiscreteMeasure& a,
                             const DiscreteMeasure& b) {
  Matrix h(a.size(), b.size());
  for (Index i = 0; i < a.size(); ++i)
    for (Index j = 0; j < b.size(); ++j)
      h(i, j) = std::exp(-std::abs(a.points(i, 0) - b.points(j, 0)));
  return h;
}

// One empirical iJKO transition turned into the two quadratic recovery
// losses. eta is small relative to the squared displacement, so the balanced
// solve gets a generous budget; a diverged solve marks the cell stalled.
struct TransitionForms {
  QuadraticLossForm fy, star;
  bool ok = false;
  int iterations = 0;
};

TransitionForms transition_forms(const GaussianSpec& from,
                                 const GaussianSpec& to, Index n, double tau,
                                 double eta, double r,
                                 const PotentialBasis& basis,
                                 std::uint64_t seed_from,
                                 std::uint64_t seed_to) {
  TransitionForms out;
  DiscreteMeasure x_cloud = gaussian_cloud(from, n, seed_from);
  DiscreteMeasure y_cloud = gaussian_cloud(to, n, seed_to);
  IjkoInstance inst;
  inst.alpha_k = x_cloud;
  inst.alpha_k1 = y_cloud;
  inst.tau = tau;
  inst.eta = eta;
  inst.r = r;
  inst.basis = basis;
  QuadOtSolution ot =
      quadratic_entropic_ot(y_cloud, x_cloud, eta, 1e-8, 500000);
  out.iterations = ot.iterations;
  if (ot.status != SinkhornStatus::Converged) return out;
  out.fy = variance_limit_form(inst, ot.potentials.f);
  UotProblem prob;
  prob.alpha = y_cloud;
  prob.beta = x_cloud;
  prob.cost = squared_distance_matrix(y_cloud.points, x_cloud.points);
  prob.eta = eta;
  Coupling plan = primal_from_dual(prob, ot.potentials);
  out.star = ijko_star_form(inst, plan, 1e-2);
  out.ok = true;
  return out;
}

// The step objective <V, a> + W^2 / tau is the implicit scheme for the flow
// of V at half pace (its penalty weight is 1/(2 (tau/2))), so consecutive
// observations of the generating flow x' = -grad V are one step apart when
// taken at time increments tau / 2. Every estimation experiment generates
// its snapshots at that pace; otherwise no parameter reproduces the data and
// the estimate is biased toward twice the truth.
std::vector<GaussianSpec> step_snapshots(const QuadraticPotentialTruth& truth,
                                         double tau, int steps) {
  return trajectory(truth, 0.5 * tau, steps);
}

std::vector<GaussianSpec> snapshot_tail(const QuadraticPotentialTruth& truth,
                                        double tau, int steps) {
  std::vector<GaussianSpec> all = step_snapshots(truth, tau, steps);
  return std::vector<GaussianSpec>(all.begin() + 1, all.end());
}

double support_error_fraction(const Vector& theta,
                              const std::vector<bool>& on_support,
                              double threshold) {
  Index wrong = 0;
  for (Index i = 0; i < theta.size(); ++i) {
    bool active = std::abs(theta[i]) > threshold;
    if (active != on_support[static_cast<std::size_t>(i)]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(theta.size());
}

struct RankError {
  double error = kInf;
  Index rank = 0;
};

RankError lowrank_error(const Matrix& theta_hat, const Matrix& proj_star,
                        Index rank_star, double threshold) {
  Matrix sym = 0.5 * (theta_hat + theta_hat.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  RankError out;
  Matrix proj = Matrix::Zero(sym.rows(), sym.cols());
  for (Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (std::abs(es.eigenvalues()[i]) < threshold) continue;
    proj += es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose();
    out.rank++;
  }
  Eigen::JacobiSVD<Matrix> svd(proj - proj_star);
  double spectral =
      svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;
  out.error =
      spectral + std::abs(static_cast<double>(out.rank - rank_star));
  return out;
}

}  // namespace

ExperimentOutput run_forward_uot(const ForwardUotParams& params) {
  if (params.n < 2 || params.dim < 1)
    throw InvalidInput("forward-uot: need n >= 2, dim >= 1");
  GaussianSpec sa, sb;
  sa.mean = Vector::Zero(params.dim);
  sa.covariance = Matrix::Identity(params.dim, params.dim);
  sb.mean = Vector::Constant(params.dim, 0.5);
  sb.covariance = 0.8 * Matrix::Identity(params.dim, params.dim);
  DiscreteMeasure a = gaussian_cloud(sa, params.n, Rng::task_seed(params.seed, 0));
  DiscreteMeasure b = gaussian_cloud(sb, params.n, Rng::task_seed(params.seed, 1));
  Matrix cost = squared_distance_matrix(a.points, b.points);
  PhiDivergence d1 = PhiDivergence::parse(params.div1);
  PhiDivergence d2 = PhiDivergence::parse(params.div2);

  ExperimentOutput out;
  out.results.columns = {"eta",        "value",    "coupling_mass",
                         "iterations", "residual", "status"};
  std::vector<std::vector<std::string>> rows(params.etas.size());
  parallel_for(static_cast<Index>(params.etas.size()), [&](Index i) {
    double eta = params.etas[static_cast<std::size_t>(i)];
    if (!(eta > 0.0)) throw InvalidInput("forward-uot: eta must be > 0");
    UotProblem prob{a, b, cost, eta, d1, d2};
    SinkhornOptions opts;
    opts.tol = 1e-9;
    opts.max_iter = 200000;
    SinkhornResult res = solve_sinkhorn(prob, opts);
    bool ok = res.status == SinkhornStatus::Converged;
    double value = 0.0, mass = 0.0;
    if (ok) {
      Coupling coup = primal_from_dual(prob, res.potentials);
      value = -dual_objective(prob, res.potentials) + eta * a.mass * b.mass;
      mass = coup.mass;
    }
    rows[static_cast<std::size_t>(i)] = {
        fd(eta),           fd(value),        fd(mass),
        fi(res.iterations), fd(res.residual), ok ? "ok" : "stalled"};
  });
  bool all_ok = true;
  for (auto& r : rows) {
    all_ok = all_ok && r.back() == "ok";
    out.results.add_row(std::move(r));
  }
  out.summary["observed"] = {{"all_converged", all_ok}};
  return out;
}

ExperimentOutput run_iuot(const IuotFitParams& params) {
  LinkSetting s = make_link_setting(params.grid_size, params.eta, params.div1,
                                    params.div2, params.theta_star);
  UotProblem pop = s.problem(s.theta_star, s.alpha, s.beta);
  SinkhornOptions opts;
  opts.tol = 1e-11;
  opts.max_iter = 200000;
  SinkhornResult res = solve_sinkhorn(pop, opts);
  if (res.status != SinkhornStatus::Converged)
    throw InnerSolveDiverged(s.theta_star, res.residual);
  Coupling coup = primal_from_dual(pop, res.potentials);

  std::unique_ptr<FyIuotLoss> loss;
  if (params.n_pairs == 0) {
    loss = std::make_unique<FyIuotLoss>(s.basis, s.alpha, s.beta, coup.density,
                                        s.eta, s.div1, s.div2);
  } else {
    Rng rng(params.seed);
    CoupledSample pairs =
        sample_pairs_from_coupling(pop, coup, params.n_pairs, rng);
    loss = std::make_unique<FyIuotLoss>(s.basis, s.alpha, s.beta, pairs, s.eta,
                                        s.div1, s.div2);
  }
  double lambda = params.lambda;
  Objective objective = [&](const Vector& theta, Vector* grad) {
    double v = loss->loss_and_grad(theta, grad);
    if (grad) *grad += lambda * theta;
    return v + 0.5 * lambda * theta.squaredNorm();
  };
  MinimizeOptions mopts;
  mopts.tol = 1e-9;
  mopts.max_iter = 500;
  SolveReport rep = minimize_smooth(objective, Vector::Zero(2), mopts);

  ExperimentOutput out;
  out.results.columns = {"coefficient", "estimate", "truth"};
  out.results.add_row({"sq_diff", fd(rep.theta_hat[0]), fd(s.theta_star[0])});
  out.results.add_row({"abs_diff", fd(rep.theta_hat[1]), fd(s.theta_star[1])});
  double err = (rep.theta_hat - s.theta_star).norm();
  out.summary["observed"] = {
      {"error", err},
      {"objective", rep.objective},
      {"iterations", rep.iterations},
      {"converged", rep.converged},
  };
  return out;
}

ExperimentOutput run_ijko(const IjkoFitParams& params) {
  if (params.d < 1 || params.steps < 1 || params.n < 2)
    throw InvalidInput("ijko: need d >= 1, steps >= 1, n >= 2");
  const int d = params.d;
  QuadraticPotentialTruth truth;
  truth.theta_star =
      0.6 * Matrix::Identity(d, d) + 0.2 * circular_adjacency(d);
  truth.m0 = Vector::Zero(d);
  for (int i = 0; i < d; ++i) truth.m0[i] = 1.5 - static_cast<double>(i);
  truth.sigma0 = 0.4 * Matrix::Identity(d, d);
  std::vector<GaussianSpec> snaps =
      step_snapshots(truth, params.tau, params.steps);
  PotentialBasis basis = PotentialBasis::symmetric_quadratic(d);

  std::vector<std::unique_ptr<IjkoFyLoss>> losses;
  for (int k = 0; k < params.steps; ++k) {
    IjkoInstance inst;
    inst.alpha_k = gaussian_cloud(snaps[static_cast<std::size_t>(k)], params.n,
                                  Rng::task_seed(params.seed, 2 * k));
    inst.alpha_k1 =
        gaussian_cloud(snaps[static_cast<std::size_t>(k) + 1], params.n,
                       Rng::task_seed(params.seed, 2 * k + 1));
    inst.tau = params.tau;
    inst.eta = params.eta;
    inst.r = params.r;
    inst.basis = basis;
    losses.push_back(std::make_unique<IjkoFyLoss>(inst));
  }
  Objective objective = [&](const Vector& theta, Vector* grad) {
    double total = 0.0;
    if (grad) grad->setZero();
    Vector g;
    for (auto& loss : losses) {
      total += loss->loss_and_grad(theta, grad ? &g : nullptr);
      if (grad) *grad += g;
    }
    return total;
  };
  const Index packed = static_cast<Index>(d) * (d + 1) / 2;
  MinimizeOptions mopts;
  mopts.tol = 1e-8;
  mopts.max_iter = 300;
  SolveReport rep = minimize_smooth(objective, Vector::Zero(packed), mopts);

  Vector theta_star_packed = pack_upper(truth.theta_star);
  ExperimentOutput out;
  out.results.columns = {"coefficient", "estimate", "truth"};
  Index k = 0;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j, ++k)
      out.results.add_row({"quad_" + std::to_string(i) + "_" + std::to_string(j),
                           fd(rep.theta_hat[k]), fd(theta_star_packed[k])});
  double rel = (rep.theta_hat - theta_star_packed).norm() /
               std::max(theta_star_packed.norm(), 1e-12);
  out.summary["observed"] = {
      {"relative_error", rel},
      {"objective", rep.objective},
      {"iterations", rep.iterations},
      {"converged", rep.converged},
  };
  return out;
}

ExperimentOutput run_sample_sweep(const SampleSweepParams& params) {
  if (params.seeds < 1) throw InvalidInput("sample-sweep: seeds must be >= 1");
  LinkSetting s = make_link_setting(params.grid_size, params.eta, params.div1,
                                    params.div2, params.theta_star);
  UotProblem pop = s.problem(s.theta_star, s.alpha, s.beta);
  SinkhornOptions pop_opts;
  pop_opts.tol = 1e-11;
  pop_opts.max_iter = 200000;
  SinkhornResult pop_res = solve_sinkhorn(pop, pop_opts);
  if (pop_res.status != SinkhornStatus::Converged)
    throw InnerSolveDiverged(s.theta_star, pop_res.residual);
  Coupling pop_coup = primal_from_dual(pop, pop_res.potentials);
  double integral_pop =
      test_integral(pop_coup, pop, bounded_test_function(pop.alpha, pop.beta));

  struct Cell {
    Index n = 0;
    int seed = 0;
    double err_forward = std::nan("");
    double err_theta = std::nan("");
    bool ok = false;
  };
  const Index n_count = static_cast<Index>(params.n_values.size());
  const Index cells = n_count * params.seeds;
  std::vector<Cell> results(static_cast<std::size_t>(cells));

  parallel_for(cells, [&](Index idx) {
    Cell& cell = results[static_cast<std::size_t>(idx)];
    cell.n = params.n_values[static_cast<std::size_t>(idx / params.seeds)];
    cell.seed = static_cast<int>(idx % params.seeds);
    Rng rng(Rng::task_seed(params.base_seed, static_cast<std::uint64_t>(idx)));

    CoupledSample pairs = sample_pairs_from_coupling(pop, pop_coup, cell.n, rng);
    DiscreteMeasure alpha_n = empirical_marginal(s.alpha, cell.n, rng);
    DiscreteMeasure beta_n = empirical_marginal(s.beta, cell.n, rng);

    UotProblem emp = s.problem(s.theta_star, alpha_n, beta_n);
    SinkhornOptions opts;
    opts.tol = 1e-10;
    opts.max_iter = 200000;
    SinkhornResult res = solve_sinkhorn(emp, opts);
    if (res.status != SinkhornStatus::Converged) return;
    Coupling coup = primal_from_dual(emp, res.potentials);
    double integral_emp =
        test_integral(coup, emp, bounded_test_function(emp.alpha, emp.beta));
    cell.err_forward = std::abs(integral_pop - integral_emp);

    FyIuotLoss loss(s.basis, alpha_n, beta_n, pairs, s.eta, s.div1, s.div2);
    double lambda = params.lambda_coeff / std::sqrt(static_cast<double>(cell.n));
    Objective objective = [&](const Vector& theta, Vector* grad) {
      double v = loss.loss_and_grad(theta, grad);
      if (grad) *grad += lambda * theta;
      return v + 0.5 * lambda * theta.squaredNorm();
    };
    MinimizeOptions mopts;
    mopts.tol = 1e-9;
    mopts.max_iter = 500;
    SolveReport rep = minimize_smooth(objective, Vector::Zero(2), mopts);
    cell.err_theta = (rep.theta_hat - s.theta_star).norm();
    cell.ok = true;
  });

  ExperimentOutput out;
  out.results.columns = {"metric", "n", "seed", "value", "status"};
  for (const Cell& cell : results) {
    const char* status = cell.ok ? "ok" : "stalled";
    out.results.add_row({"forward", fi(cell.n), fi(cell.seed),
                         fd(cell.err_forward), status});
    out.results.add_row(
        {"theta", fi(cell.n), fi(cell.seed), fd(cell.err_theta), status});
  }

  std::vector<double> ns, mean_fwd, mean_theta;
  for (Index i = 0; i < n_count; ++i) {
    double sf = 0, st = 0;
    int ok = 0;
    for (int seed = 0; seed < params.seeds; ++seed) {
      const Cell& cell = results[static_cast<std::size_t>(i * params.seeds + seed)];
      if (!cell.ok) continue;
      sf += cell.err_forward;
      st += cell.err_theta;
      ++ok;
    }
    if (ok == 0) continue;
    ns.push_back(static_cast<double>(params.n_values[static_cast<std::size_t>(i)]));
    mean_fwd.push_back(sf / ok);
    mean_theta.push_back(st / ok);
  }
  double slope_forward = fitted_loglog_slope(ns, mean_fwd);
  double slope_theta = fitted_loglog_slope(ns, mean_theta);
  out.summary["observed"] = {
      {"slope_forward", slope_forward},
      {"slope_theta", slope_theta},
      {"slope_forward_in_range",
       slope_forward >= -0.7 && slope_forward <= -0.3},
      {"slope_theta_in_range", slope_theta >= -0.7 && slope_theta <= -0.3},
  };
  return out;
}

ExperimentOutput run_certificate_sweep(const CertificateSweepParams& params) {
  if (params.d < 2) throw InvalidInput("certificate-sweep: d must be >= 2");
  if (params.steps_values.empty())
    throw InvalidInput("certificate-sweep: steps_values must be nonempty");
  const int d = params.d;
  const bool sparse = params.kind == "sparse";
  if (!sparse && params.kind != "low-rank")
    throw InvalidInput("certificate-sweep: kind must be sparse or low-rank");

  ExperimentOutput out;
  out.results.columns = {"loss",   "setting", "steps",
                         "z_max",  "margin",  "status"};

  std::vector<double> settings = sparse ? params.sigmas : params.omegas;
  if (settings.empty())
    throw InvalidInput("certificate-sweep: empty setting list");

  Matrix theta_star;
  Vector u = Vector::Ones(d) / std::sqrt(static_cast<double>(d));
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = (i % 2 == 0) ? 1.0 : -1.0;
  if (d % 2 == 1) v[d - 1] = 0.0;  // keep v orthogonal to the ones vector
  v /= v.norm();
  if (sparse) {
    theta_star = circular_adjacency(d);
  } else {
    theta_star = u * u.transpose();
  }

  std::vector<bool> on_support;
  ModelTangent l1_tangent = ModelTangent::l1(pack_upper(theta_star));
  ModelTangent nuc_tangent = ModelTangent::nuclear(theta_star);
  if (sparse) {
    Vector packed = pack_upper(theta_star);
    for (Index i = 0; i < packed.size(); ++i)
      on_support.push_back(std::abs(packed[i]) > 1e-5);
  }

  // observed[loss][setting index][steps index] = z_max
  std::map<std::string, Matrix> z_tables;
  z_tables["fy"] = Matrix::Constant(static_cast<Index>(settings.size()),
                                    static_cast<Index>(params.steps_values.size()),
                                    std::nan(""));
  z_tables["ijko-star"] = z_tables["fy"];

  for (std::size_t si = 0; si < settings.size(); ++si) {
    for (std::size_t ti = 0; ti < params.steps_values.size(); ++ti) {
      int steps = params.steps_values[ti];
      if (steps < 1) throw InvalidInput("certificate-sweep: steps must be >= 1");
      QuadraticPotentialTruth truth;
      truth.theta_star = theta_star;
      if (sparse) {
        truth.m0 = Vector::Constant(d, params.mean_shift);
        truth.sigma0 =
            settings[si] * settings[si] * Matrix::Identity(d, d);
      } else {
        truth.m0 = Vector::Zero(d);
        double w = settings[si] * kPi;
        Vector uw = std::cos(w) * u + std::sin(w) * v;
        truth.sigma0 = params.delta * Matrix::Identity(d, d) +
                       uw * uw.transpose();
      }
      std::vector<GaussianSpec> tail = snapshot_tail(truth, params.tau, steps);
      for (const std::string& loss : {std::string("fy"), std::string("ijko-star")}) {
        Matrix h_full = loss == "fy" ? gaussian_fy_hessian(tail)
                                     : gaussian_ijko_star_hessian(tail);
        std::string status = "ok";
        double z_max = std::nan(""), margin = std::nan("");
        try {
          if (sparse) {
            Matrix h = restrict_to_symmetric(h_full, d);
            Certificate cert = precertificate(h, l1_tangent);
            margin = cert.margin;
            z_max = -kInf;
            for (Index i = 0; i < cert.z.size(); ++i)
              if (!on_support[static_cast<std::size_t>(i)])
                z_max = std::max(z_max, cert.z[i]);
          } else {
            Certificate cert = precertificate(h_full, nuc_tangent);
            margin = cert.margin;
            z_max = nuc_tangent.off_model_norm(cert.z);
          }
        } catch (const RankDeficientTangent&) {
          status = "singular";
        }
        z_tables[loss](static_cast<Index>(si), static_cast<Index>(ti)) = z_max;
        out.results.add_row({loss, fd(settings[si]), fi(steps), fd(z_max),
                             fd(margin), status});
      }
    }
  }

  nlohmann::json observed;
  const Matrix& zfy = z_tables["fy"];
  if (sparse) {
    observed["crossing_in_sigma"] =
        zfy(0, 0) > 1.0 && zfy(zfy.rows() - 1, 0) < 1.0;
    observed["crossing_in_steps"] =
        zfy(0, 0) > 1.0 && zfy(0, zfy.cols() - 1) < 1.0;
  } else {
    observed["nondegenerate_at_first"] = zfy(0, 0) < 1.0;
    observed["degenerate_at_last"] = zfy(zfy.rows() - 1, 0) > 1.0;
  }
  out.summary["observed"] = observed;
  return out;
}

ExperimentOutput run_sparse_graph(const SparseGraphParams& params) {
  if (params.d < 2 || params.steps < 1 || params.seeds < 1)
    throw InvalidInput("sparse-graph: need d >= 2, steps >= 1, seeds >= 1");
  const int d = params.d;
  Matrix theta_star = circular_adjacency(d);
  Vector packed_star = pack_upper(theta_star);
  std::vector<bool> on_support;
  for (Index i = 0; i < packed_star.size(); ++i)
    on_support.push_back(std::abs(packed_star[i]) > 1e-5);
  const Index packed = packed_star.size();

  QuadraticPotentialTruth truth;
  truth.theta_star = theta_star;
  truth.m0 = Vector::Constant(d, params.mean_shift);
  truth.sigma0 = params.sigma * params.sigma * Matrix::Identity(d, d);
  std::vector<GaussianSpec> snaps =
      step_snapshots(truth, params.tau, params.steps);
  PotentialBasis basis = PotentialBasis::symmetric_quadratic(d);
  Vector grid = params.lambda_grid.size() > 0 ? params.lambda_grid
                                              : log_lambda_grid();

  struct Cell {
    Index n = 0;
    int seed = 0;
    bool ok = false;
    // per loss, per lambda
    std::map<std::string, std::vector<double>> frac;
    std::map<std::string, std::vector<std::string>> status;
  };
  const Index n_count = static_cast<Index>(params.n_values.size());
  const Index cells = n_count * params.seeds;
  std::vector<Cell> results(static_cast<std::size_t>(cells));

  parallel_for(cells, [&](Index idx) {
    Cell& cell = results[static_cast<std::size_t>(idx)];
    cell.n = params.n_values[static_cast<std::size_t>(idx / params.seeds)];
    cell.seed = static_cast<int>(idx % params.seeds);
    std::uint64_t cell_seed =
        Rng::task_seed(params.base_seed, static_cast<std::uint64_t>(idx));

    QuadraticLossForm fy_form, star_form;
    for (int k = 0; k < params.steps; ++k) {
      TransitionForms forms = transition_forms(
          snaps[static_cast<std::size_t>(k)],
          snaps[static_cast<std::size_t>(k) + 1], cell.n, params.tau,
          params.eta, params.r, basis,
          Rng::task_seed(cell_seed, static_cast<std::uint64_t>(2 * k)),
          Rng::task_seed(cell_seed, static_cast<std::uint64_t>(2 * k + 1)));
      if (!forms.ok) return;  // stalled cell
      add_form(fy_form, forms.fy);
      add_form(star_form, forms.star);
    }
    cell.ok = true;

    const LossForms loss_forms = {{{"fy", &fy_form}, {"ijko-star", &star_form}}};
    for (const auto& [name, form] : loss_forms) {
      Objective smooth = [form](const Vector& theta, Vector* grad) {
        return form->value_and_grad(theta, grad);
      };
      Vector warm;
      std::vector<double>& frac = cell.frac[name];
      std::vector<std::string>& status = cell.status[name];
      for (Index li = 0; li < grid.size(); ++li) {
        Regularizer reg;
        reg.kind = RegKind::NonnegativeL1;
        reg.lambda = grid[li];
        RegularizedOptions opts;
        opts.inner.tol = 1e-10;
        opts.inner.max_iter = 2000;
        opts.seed = cell_seed;
        SolveReport rep = solve_regularized(
            smooth, packed, reg, warm.size() > 0 ? &warm : nullptr, opts);
        warm = rep.theta_hat;
        frac.push_back(support_error_fraction(rep.theta_hat, on_support,
                                              params.support_threshold));
        status.push_back(rep.stalled ? "stalled" : "ok");
      }
    }
  });

  ExperimentOutput out;
  out.results.columns = {"loss",   "sigma", "steps",         "n",
                         "seed",   "lambda", "frac_incorrect", "status"};
  for (const Cell& cell : results) {
    if (!cell.ok) {
      out.results.add_row({"fy", fd(params.sigma), fi(params.steps),
                           fi(cell.n), fi(cell.seed), "nan", "nan",
                           "stalled"});
      continue;
    }
    for (const auto& [name, frac] : cell.frac) {
      const auto& status = cell.status.at(name);
      for (Index li = 0; li < grid.size(); ++li) {
        out.results.add_row({name, fd(params.sigma), fi(params.steps),
                             fi(cell.n), fi(cell.seed), fd(grid[li]),
                             fd(frac[static_cast<std::size_t>(li)]),
                             status[static_cast<std::size_t>(li)]});
      }
    }
  }

  // Mean over seeds at the largest n, then the grid search over lambda.
  nlohmann::json observed;
  for (const std::string& name : {std::string("fy"), std::string("ijko-star")}) {
    Vector mean = Vector::Zero(grid.size());
    int ok = 0;
    for (int seed = 0; seed < params.seeds; ++seed) {
      const Cell& cell = results[static_cast<std::size_t>(
          (n_count - 1) * params.seeds + seed)];
      if (!cell.ok) continue;
      ++ok;
      for (Index li = 0; li < grid.size(); ++li)
        mean[li] += cell.frac.at(name)[static_cast<std::size_t>(li)];
    }
    nlohmann::json block;
    if (ok > 0) {
      mean /= ok;
      Index at = 0;
      LambdaSearch search = grid_search_lambda(
          grid, [&](double) { return mean[at++]; });
      block["best_lambda"] = search.best_lambda;
      block["min_frac_incorrect"] = search.best_metric;
      block["zero_achieved"] = search.best_metric == 0.0;
    } else {
      block["zero_achieved"] = false;
      block["stalled"] = true;
    }
    observed[name] = block;
  }
  observed["zero_achieved"] = observed["fy"]["zero_achieved"];
  out.summary["observed"] = observed;
  return out;
}

ExperimentOutput run_low_rank(const LowRankParams& params) {
  if (params.d < 2 || params.steps < 1 || params.seeds < 1)
    throw InvalidInput("low-rank: need d >= 2, steps >= 1, seeds >= 1");
  if (params.omegas.empty()) throw InvalidInput("low-rank: empty omega list");
  const int d = params.d;
  Vector u = Vector::Ones(d) / std::sqrt(static_cast<double>(d));
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = (i % 2 == 0) ? 1.0 : -1.0;
  if (d % 2 == 1) v[d - 1] = 0.0;
  v /= v.norm();
  Matrix theta_star = u * u.transpose();
  Matrix proj_star = theta_star;  // orthogonal projector for a unit vector
  const Index rank_star = 1;

  PotentialBasis basis = PotentialBasis::full_quadratic(d);
  const Index dim = static_cast<Index>(d) * d;
  Vector grid = params.lambda_grid.size() > 0 ? params.lambda_grid
                                              : log_lambda_grid();

  struct Cell {
    double omega = 0.0;  // units of pi
    Index n = 0;
    int seed = 0;
    bool ok = false;
    std::map<std::string, std::vector<double>> error;
    std::map<std::string, std::vector<long long>> rank;
    std::map<std::string, std::vector<std::string>> status;
  };
  const Index n_count = static_cast<Index>(params.n_values.size());
  const Index per_omega = n_count * params.seeds;
  const Index cells = static_cast<Index>(params.omegas.size()) * per_omega;
  std::vector<Cell> results(static_cast<std::size_t>(cells));

  parallel_for(cells, [&](Index idx) {
    Cell& cell = results[static_cast<std::size_t>(idx)];
    Index oi = idx / per_omega;
    Index rem = idx % per_omega;
    cell.omega = params.omegas[static_cast<std::size_t>(oi)];
    cell.n = params.n_values[static_cast<std::size_t>(rem / params.seeds)];
    cell.seed = static_cast<int>(rem % params.seeds);
    std::uint64_t cell_seed =
        Rng::task_seed(params.base_seed, static_cast<std::uint64_t>(idx));

    QuadraticPotentialTruth truth;
    truth.theta_star = theta_star;
    truth.m0 = Vector::Zero(d);
    double w = cell.omega * kPi;
    Vector uw = std::cos(w) * u + std::sin(w) * v;
    truth.sigma0 =
        params.delta * Matrix::Identity(d, d) + uw * uw.transpose();
    std::vector<GaussianSpec> snaps =
        step_snapshots(truth, params.tau, params.steps);

    QuadraticLossForm fy_form, star_form;
    for (int k = 0; k < params.steps; ++k) {
      TransitionForms forms = transition_forms(
          snaps[static_cast<std::size_t>(k)],
          snaps[static_cast<std::size_t>(k) + 1], cell.n, params.tau,
          params.eta, params.r, basis,
          Rng::task_seed(cell_seed, static_cast<std::uint64_t>(2 * k)),
          Rng::task_seed(cell_seed, static_cast<std::uint64_t>(2 * k + 1)));
      if (!forms.ok) return;
      add_form(fy_form, forms.fy);
      add_form(star_form, forms.star);
    }
    cell.ok = true;

    const LossForms loss_forms = {{{"fy", &fy_form}, {"ijko-star", &star_form}}};
    for (const auto& [name, form] : loss_forms) {
      Objective smooth = [form](const Vector& theta, Vector* grad) {
        return form->value_and_grad(theta, grad);
      };
      Vector warm;
      for (Index li = 0; li < grid.size(); ++li) {
        Regularizer reg;
        reg.kind = RegKind::Nuclear;
        reg.lambda = grid[li];
        reg.rows = d;
        reg.cols = d;
        RegularizedOptions opts;
        opts.inner.tol = 1e-10;
        opts.inner.max_iter = 3000;
        opts.seed = cell_seed;
        SolveReport rep = solve_regularized(
            smooth, dim, reg, warm.size() > 0 ? &warm : nullptr, opts);
        warm = rep.theta_hat;
        Matrix theta_mat =
            Eigen::Map<const Matrix>(rep.theta_hat.data(), d, d);
        RankError re =
            lowrank_error(theta_mat, proj_star, rank_star, params.rank_threshold);
        cell.error[name].push_back(re.error);
        cell.rank[name].push_back(re.rank);
        cell.status[name].push_back(rep.stalled ? "stalled" : "ok");
      }
    }
  });

  ExperimentOutput out;
  out.results.columns = {"loss", "omega", "n",     "seed",
                         "lambda", "error", "rank", "status"};
  for (const Cell& cell : results) {
    if (!cell.ok) {
      out.results.add_row({"fy", fd(cell.omega), fi(cell.n), fi(cell.seed),
                           "nan", "nan", "nan", "stalled"});
      continue;
    }
    for (const auto& [name, error] : cell.error) {
      for (Index li = 0; li < grid.size(); ++li) {
        out.results.add_row(
            {name, fd(cell.omega), fi(cell.n), fi(cell.seed), fd(grid[li]),
             fd(error[static_cast<std::size_t>(li)]),
             fi(cell.rank.at(name)[static_cast<std::size_t>(li)]),
             cell.status.at(name)[static_cast<std::size_t>(li)]});
      }
    }
  }

  nlohmann::json observed;
  for (const std::string& name : {std::string("fy"), std::string("ijko-star")}) {
    std::vector<bool> recovered;
    std::vector<double> best_errors;
    for (std::size_t oi = 0; oi < params.omegas.size(); ++oi) {
      Vector mean = Vector::Zero(grid.size());
      int ok = 0;
      for (int seed = 0; seed < params.seeds; ++seed) {
        Index idx = static_cast<Index>(oi) * per_omega +
                    (n_count - 1) * params.seeds + seed;
        const Cell& cell = results[static_cast<std::size_t>(idx)];
        if (!cell.ok) continue;
        ++ok;
        for (Index li = 0; li < grid.size(); ++li)
          mean[li] += cell.error.at(name)[static_cast<std::size_t>(li)];
      }
      if (ok == 0) {
        recovered.push_back(false);
        best_errors.push_back(std::nan(""));
        continue;
      }
      mean /= ok;
      Index best = 0;
      for (Index li = 0; li < grid.size(); ++li)
        if (mean[li] <= mean[best]) best = li;
      best_errors.push_back(mean[best]);
      recovered.push_back(mean[best] < 1.0);
    }
    observed[name] = {{"best_error", best_errors},
                      {"rank_recovered", recovered}};
  }
  observed["rank_recovered"] = observed["fy"]["rank_recovered"];
  out.summary["observed"] = observed;
  return out;
}

// ---------------------------------------------------------------------------
// Config-driven dispatch.

namespace {

struct ParsedConfig {
  std::string experiment;
  std::string output_dir;
  bool plots = false;
  nlohmann::json expect;  // null when absent
  std::function<ExperimentOutput()> run;
};

std::vector<Index> to_index_list(const std::vector<long long>& in,
                                 const std::string& where) {
  std::vector<Index> out;
  for (long long v : in) {
    if (v < 1) throw ConfigError(where + ": entries must be >= 1");
    out.push_back(static_cast<Index>(v));
  }
  return out;
}

Vector lambda_grid_from(const ConfigView& view) {
  if (view.has("lambdas")) {
    std::vector<double> vals = view.number_list("lambdas");
    if (vals.empty()) throw ConfigError(view.path() + "/lambdas: empty");
    Vector grid(static_cast<Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (!(vals[i] > 0.0))
        throw ConfigError(view.path() + "/lambdas: entries must be > 0");
      grid[static_cast<Index>(i)] = vals[i];
    }
    std::sort(grid.data(), grid.data() + grid.size());
    return grid;
  }
  double lo = view.number_or("lambda_min", 1e-6);
  double hi = view.number_or("lambda_max", 1.0);
  long long per = view.integer_or("lambda_per_decade", 20);
  if (!(lo > 0.0) || !(hi > lo) || per < 1)
    throw ConfigError(view.path() +
                      ": need 0 < lambda_min < lambda_max, per_decade >= 1");
  return log_lambda_grid(lo, hi, static_cast<int>(per));
}

void require_positive(double v, const std::string& where) {
  if (!(v > 0.0)) throw ConfigError(where + ": must be > 0");
}

ParsedConfig parse_config(const nlohmann::json& root,
                          const std::string& origin) {
  ConfigView view(root, origin);
  ParsedConfig parsed;
  parsed.experiment = view.text("experiment");
  parsed.output_dir = view.text_or("output_dir", "out");
  parsed.plots = view.boolean_or("plots", false);
  parsed.expect = view.has("expect") ? view.raw("expect") : nlohmann::json();
  std::uint64_t seed =
      static_cast<std::uint64_t>(view.integer_or("seed", 0));

  const std::string& exp = parsed.experiment;
  if (exp == "forward-uot") {
    ForwardUotParams p;
    p.n = static_cast<Index>(view.integer_or("n", p.n));
    p.dim = static_cast<int>(view.integer_or("dim", p.dim));
    if (view.has("etas")) p.etas = view.number_list("etas");
    for (double e : p.etas) require_positive(e, origin + "/etas");
    p.div1 = view.text_or("div1", p.div1);
    p.div2 = view.text_or("div2", p.div2);
    p.seed = seed;
    parsed.run = [p]() { return run_forward_uot(p); };
  } else if (exp == "iuot") {
    IuotFitParams p;
    p.grid_size = static_cast<Index>(view.integer_or("grid_size", p.grid_size));
    p.eta = view.number_or("eta", p.eta);
    require_positive(p.eta, origin + "/eta");
    p.div1 = view.text_or("div1", p.div1);
    p.div2 = view.text_or("div2", p.div2);
    if (view.has("theta_star")) p.theta_star = view.number_list("theta_star");
    p.n_pairs = static_cast<Index>(view.integer_or("n_pairs", p.n_pairs));
    p.lambda = view.number_or("lambda", p.lambda);
    p.seed = seed;
    parsed.run = [p]() { return run_iuot(p); };
  } else if (exp == "ijko") {
    IjkoFitParams p;
    p.d = static_cast<int>(view.integer_or("d", p.d));
    p.tau = view.number_or("tau", p.tau);
    p.eta = view.number_or("eta", p.eta);
    p.r = view.number_or("r", p.r);
    require_positive(p.tau, origin + "/tau");
    require_positive(p.eta, origin + "/eta");
    if (!(p.r > p.eta / p.tau))
      throw ConfigError(origin + "/r: need r > eta/tau for the step loss");
    p.steps = static_cast<int>(view.integer_or("steps", p.steps));
    p.n = static_cast<Index>(view.integer_or("n", p.n));
    p.seed = seed;
    parsed.run = [p]() { return run_ijko(p); };
  } else if (exp == "sample-sweep") {
    SampleSweepParams p;
    p.grid_size = static_cast<Index>(view.integer_or("grid_size", p.grid_size));
    p.eta = view.number_or("eta", p.eta);
    require_positive(p.eta, origin + "/eta");
    p.div1 = view.text_or("div1", p.div1);
    p.div2 = view.text_or("div2", p.div2);
    if (view.has("theta_star")) p.theta_star = view.number_list("theta_star");
    if (view.has("n_values"))
      p.n_values = to_index_list(view.integer_list("n_values"),
                                 origin + "/n_values");
    p.seeds = static_cast<int>(view.integer_or("seeds", p.seeds));
    p.lambda_coeff = view.number_or("lambda_coeff", p.lambda_coeff);
    require_positive(p.lambda_coeff, origin + "/lambda_coeff");
    p.base_seed = seed;
    parsed.run = [p]() { return run_sample_sweep(p); };
  } else if (exp == "certificate-sweep") {
    CertificateSweepParams p;
    p.kind = view.text_or("kind", p.kind);
    p.d = static_cast<int>(view.integer_or("d", p.d));
    p.tau = view.number_or("tau", p.tau);
    require_positive(p.tau, origin + "/tau");
    if (view.has("steps_values")) {
      p.steps_values.clear();
      for (long long v : view.integer_list("steps_values"))
        p.steps_values.push_back(static_cast<int>(v));
    }
    if (view.has("sigmas")) p.sigmas = view.number_list("sigmas");
    if (view.has("omegas")) p.omegas = view.number_list("omegas");
    if (p.kind == "low-rank" && p.omegas.empty())
      for (int i = 0; i <= 10; ++i) p.omegas.push_back(0.05 * i);
    p.delta = view.number_or("delta", p.delta);
    p.mean_shift = view.number_or("mean_shift", p.mean_shift);
    parsed.run = [p]() { return run_certificate_sweep(p); };
  } else if (exp == "sparse-graph") {
    SparseGraphParams p;
    p.d = static_cast<int>(view.integer_or("d", p.d));
    p.sigma = view.number_or("sigma", p.sigma);
    require_positive(p.sigma, origin + "/sigma");
    p.steps = static_cast<int>(view.integer_or("steps", p.steps));
    p.tau = view.number_or("tau", p.tau);
    p.eta = view.number_or("eta", p.eta);
    require_positive(p.tau, origin + "/tau");
    require_positive(p.eta, origin + "/eta");
    p.r = view.number_or("r", p.r);
    if (view.has("n_values"))
      p.n_values = to_index_list(view.integer_list("n_values"),
                                 origin + "/n_values");
    p.seeds = static_cast<int>(view.integer_or("seeds", p.seeds));
    p.lambda_grid = lambda_grid_from(view);
    p.support_threshold =
        view.number_or("support_threshold", p.support_threshold);
    p.mean_shift = view.number_or("mean_shift", p.mean_shift);
    p.base_seed = seed;
    parsed.run = [p]() { return run_sparse_graph(p); };
  } else if (exp == "low-rank") {
    LowRankParams p;
    p.d = static_cast<int>(view.integer_or("d", p.d));
    if (view.has("omegas")) p.omegas = view.number_list("omegas");
    p.steps = static_cast<int>(view.integer_or("steps", p.steps));
    p.tau = view.number_or("tau", p.tau);
    p.eta = view.number_or("eta", p.eta);
    require_positive(p.tau, origin + "/tau");
    require_positive(p.eta, origin + "/eta");
    p.r = view.number_or("r", p.r);
    p.delta = view.number_or("delta", p.delta);
    require_positive(p.delta, origin + "/delta");
    if (view.has("n_values"))
      p.n_values = to_index_list(view.integer_list("n_values"),
                                 origin + "/n_values");
    p.seeds = static_cast<int>(view.integer_or("seeds", p.seeds));
    p.lambda_grid = lambda_grid_from(view);
    p.rank_threshold = view.number_or("rank_threshold", p.rank_threshold);
    p.base_seed = seed;
    parsed.run = [p]() { return run_low_rank(p); };
  } else {
    throw ConfigError(origin + "/experiment: unknown experiment " + exp);
  }
  view.close();
  return parsed;
}

CsvTable filter_rows(const CsvTable& table, const std::string& column,
                     const std::string& value) {
  CsvTable out;
  out.columns = table.columns;
  Index c = table.column_index(column);
  for (const auto& row : table.rows)
    if (row[static_cast<std::size_t>(c)] == value) out.rows.push_back(row);
  return out;
}

std::vector<std::string> distinct_values(const CsvTable& table,
                                         const std::string& column) {
  Index c = table.column_index(column);
  std::vector<std::string> out;
  for (const auto& row : table.rows) {
    const std::string& v = row[static_cast<std::size_t>(c)];
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  return out;
}

void write_experiment_plots(const ParsedConfig& parsed,
                            const ExperimentOutput& out) {
  namespace fs = std::filesystem;
  std::string dir = parsed.output_dir + "/plots";
  fs::create_directories(dir);
  const CsvTable& table = out.results;
  const std::string& exp = parsed.experiment;
  if (exp == "forward-uot") {
    PlotOptions opt;
    opt.title = "transport value vs entropic scale";
    opt.xlabel = "eta";
    opt.ylabel = "value";
    opt.logx = true;
    write_plot(dir + "/forward.svg",
               series_from_table(table, "eta", "value", ""), opt);
  } else if (exp == "sample-sweep") {
    PlotOptions opt;
    opt.title = "estimation error vs sample size";
    opt.xlabel = "n";
    opt.ylabel = "error";
    opt.logx = true;
    opt.logy = true;
    opt.scatter = true;
    write_plot(dir + "/rates.svg",
               series_from_table(table, "n", "value", "metric"), opt);
  } else if (exp == "certificate-sweep") {
    PlotOptions opt;
    opt.title = "certificate sup-norm outside the model";
    opt.xlabel = "setting";
    opt.ylabel = "z_max";
    opt.has_hline = true;
    opt.hline = 1.0;
    for (const std::string& loss : distinct_values(table, "loss")) {
      CsvTable sub = filter_rows(table, "loss", loss);
      write_plot(dir + "/certificate_" + loss + ".svg",
                 series_from_table(sub, "setting", "z_max", "steps"), opt);
    }
  } else if (exp == "sparse-graph") {
    PlotOptions opt;
    opt.title = "support recovery vs regularization";
    opt.xlabel = "lambda";
    opt.ylabel = "fraction incorrect";
    opt.logx = true;
    for (const std::string& loss : distinct_values(table, "loss")) {
      CsvTable sub = filter_rows(table, "loss", loss);
      write_plot(dir + "/recovery_" + loss + ".svg",
                 series_from_table(sub, "lambda", "frac_incorrect", "n"), opt);
    }
  } else if (exp == "low-rank") {
    PlotOptions opt;
    opt.title = "rank recovery vs regularization";
    opt.xlabel = "lambda";
    opt.ylabel = "error";
    opt.logx = true;
    opt.has_hline = true;
    opt.hline = 1.0;
    for (const std::string& loss : distinct_values(table, "loss")) {
      CsvTable by_loss = filter_rows(table, "loss", loss);
      std::vector<std::string> omegas = distinct_values(by_loss, "omega");
      for (std::size_t i = 0; i < omegas.size(); ++i) {
        CsvTable sub = filter_rows(by_loss, "omega", omegas[i]);
        write_plot(dir + "/recovery_" + loss + "_w" + std::to_string(i) +
                       ".svg",
                   series_from_table(sub, "lambda", "error", "n"), opt);
      }
    }
  }
}

}  // namespace

int run_config_file(const std::string& path, std::string* error) {
  try {
    nlohmann::json root = load_json_file(path);
    ParsedConfig parsed = parse_config(root, path);
    ExperimentOutput out = parsed.run();

    nlohmann::json summary = out.summary;
    summary["experiment"] = parsed.experiment;
    summary["config"] = root;
    if (!parsed.expect.is_null()) {
      summary["expect"] = parsed.expect;
      bool pass = true;
      for (auto it = parsed.expect.begin(); it != parsed.expect.end(); ++it) {
        if (!summary.contains("observed") ||
            !summary["observed"].contains(it.key()) ||
            summary["observed"][it.key()] != it.value())
          pass = false;
      }
      summary["pass"] = pass;
    } else {
      summary["pass"] = nullptr;
    }

    std::filesystem::create_directories(parsed.output_dir);
    write_csv(parsed.output_dir + "/results.csv", out.results);
    write_text_file(parsed.output_dir + "/summary.json", summary.dump(2) + "\n");
    if (parsed.plots) write_experiment_plots(parsed, out);
    return 0;
  } catch (const ConfigError& e) {
    if (error) *error = e.what();
    return 2;
  } catch (const InvalidInput& e) {
    if (error) *error = e.what();
    return 2;
  } catch (const IoError& e) {
    if (error) *error = e.what();
    return 3;
  } catch (const std::exception& e) {
    if (error) *error = e.what();
    return 3;
  }
}

int validate_config_file(const std::string& path, std::string* error) {
  try {
    nlohmann::json root = load_json_file(path);
    parse_config(root, path);
    return 0;
  } catch (const ConfigError& e) {
    if (error) *error = e.what();
    return 2;
  } catch (const InvalidInput& e) {
    if (error) *error = e.what();
    return 2;
  } catch (const IoError& e) {
    if (error) *error = e.what();
    return 3;
  } catch (const std::exception& e) {
    if (error) *error = e.what();
    return 3;
  }
}

int plot_file(const std::string& csv_path, const std::string& spec_path,
              std::string* error) {
  try {
    CsvTable table = read_csv(csv_path);
    nlohmann::json spec_json = load_json_file(spec_path);
    ConfigView spec(spec_json, spec_path);
    std::string x = spec.text("x");
    std::string y = spec.text("y");
    std::string group_by = spec.text_or("group_by", "");
    std::string out_path = spec.text("out");
    PlotOptions opt;
    opt.title = spec.text_or("title", "");
    opt.xlabel = spec.text_or("xlabel", x);
    opt.ylabel = spec.text_or("ylabel", y);
    opt.logx = spec.boolean_or("logx", false);
    opt.logy = spec.boolean_or("logy", false);
    opt.scatter = spec.boolean_or("scatter", false);
    if (spec.has("hline")) {
      opt.has_hline = true;
      opt.hline = spec.number("hline");
    }
    spec.close();
    write_plot(out_path, series_from_table(table, x, y, group_by), opt);
    return 0;
  } catch (const ConfigError& e) {
    if (error) *error = e.what();
    return 2;
  } catch (const IoError& e) {
    if (error) *error = e.what();
    return 3;
  } catch (const std::exception& e) {
    if (error) *error = e.what();
    return 3;
  }
}

}  // namespace ifyot
