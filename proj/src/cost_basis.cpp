#include "ifyot/cost_basis.h"

#include <cmath>

namespace ifyot {

double PotentialBasis::value(const Vector& theta, const Vector& x) const {
  if (theta.size() != size()) throw InvalidInput("potential: theta length");
  double v = 0.0;
  static const Vector kNoY;
  for (Index s = 0; s < size(); ++s) v += theta[s] * phis[s].eval(x, kNoY);
  return v;
}

Vector PotentialBasis::gradient_x(const Vector& theta, const Vector& x) const {
  if (theta.size() != size()) throw InvalidInput("potential: theta length");
  Vector g = Vector::Zero(x.size());
  static const Vector kNoY;
  for (Index s = 0; s < size(); ++s) {
    if (!phis[s].grad_x)
      throw InvalidInput("potential feature lacks a spatial gradient: " +
                         phis[s].name);
    g += theta[s] * phis[s].grad_x(x, kNoY);
  }
  return g;
}

PotentialBasis PotentialBasis::symmetric_quadratic(int d) {
  if (d < 1) throw InvalidInput("symmetric_quadratic: d must be >= 1");
  PotentialBasis b;
  b.dim = d;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      Feature f;
      f.name = "quad_" + std::to_string(i) + "_" + std::to_string(j);
      if (i == j) {
        f.eval = [i](const Vector& x, const Vector&) { return x[i] * x[i]; };
        f.grad_x = [i](const Vector& x, const Vector&) {
          Vector g = Vector::Zero(x.size());
          g[i] = 2.0 * x[i];
          return g;
        };
      } else {
        f.eval = [i, j](const Vector& x, const Vector&) {
          return 2.0 * x[i] * x[j];
        };
        f.grad_x = [i, j](const Vector& x, const Vector&) {
          Vector g = Vector::Zero(x.size());
          g[i] = 2.0 * x[j];
          g[j] = 2.0 * x[i];
          return g;
        };
      }
      b.phis.push_back(std::move(f));
    }
  }
  return b;
}

PotentialBasis PotentialBasis::full_quadratic(int d) {
  if (d < 1) throw InvalidInput("full_quadratic: d must be >= 1");
  PotentialBasis b;
  b.dim = d;
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < d; ++i) {
      Feature f;
      f.name = "entry_" + std::to_string(i) + "_" + std::to_string(j);
      f.eval = [i, j](const Vector& x, const Vector&) { return x[i] * x[j]; };
      f.grad_x = [i, j](const Vector& x, const Vector&) {
        Vector g = Vector::Zero(x.size());
        g[i] += x[j];
        g[j] += x[i];
        return g;
      };
      b.phis.push_back(std::move(f));
    }
  }
  return b;
}

CostBasis CostBasis::generic(Feature phi0, std::vector<Feature> phis) {
  if (phis.empty()) throw InvalidInput("cost basis: need at least one feature");
  CostBasis b;
  b.phi0_ = std::move(phi0);
  b.phis_ = std::move(phis);
  b.structure_ = BasisStructure::Generic;
  return b;
}

CostBasis CostBasis::potential_plus_sqdist(PotentialBasis potential, double tau) {
  if (!(tau > 0.0)) throw InvalidInput("cost basis: tau must be positive");
  if (potential.phis.empty())
    throw InvalidInput("cost basis: empty potential basis");
  CostBasis b;
  b.structure_ = BasisStructure::PotentialPlusSqDist;
  b.tau_ = tau;
  b.phi0_ = Feature{
      "sqdist_over_tau",
      [tau](const Vector& x, const Vector& y) {
        return (x - y).squaredNorm() / tau;
      },
      nullptr, nullptr};
  for (const auto& pf : potential.phis) {
    Feature f;
    f.name = pf.name;
    auto eval = pf.eval;
    f.eval = [eval](const Vector& x, const Vector&) {
      static const Vector kNoY;
      return eval(x, kNoY);
    };
    f.grad_x = pf.grad_x;
    b.phis_.push_back(std::move(f));
  }
  b.potential_ = std::move(potential);
  return b;
}

const PotentialBasis& CostBasis::potential() const {
  if (structure_ != BasisStructure::PotentialPlusSqDist)
    throw InvalidInput("cost basis: no potential component");
  return potential_;
}

Matrix BasisMatrices::cost(const Vector& theta) const {
  if (theta.size() != size()) throw InvalidInput("cost: theta length mismatch");
  Matrix c = Phi0;
  for (Index s = 0; s < size(); ++s) c += theta[s] * Phi[s];
  return c;
}

BasisMatrices evaluate(const CostBasis& basis, const DiscreteMeasure& alpha,
                       const DiscreteMeasure& beta) {
  alpha.validate();
  beta.validate();
  const Index n = alpha.size(), m = beta.size(), S = basis.size();
  BasisMatrices out;
  out.Phi0.resize(n, m);
  out.Phi.assign(static_cast<size_t>(S), Matrix(n, m));
  auto eval_one = [&](const Feature& f, const Vector& xi, const Vector& yj,
                      Index i, Index j) {
    if (f.table) {
      if (f.table->rows() != n || f.table->cols() != m)
        throw InvalidInput("tabulated feature shape does not match the grid: " +
                           f.name);
      return (*f.table)(i, j);
    }
    return f.eval(xi, yj);
  };
  for (Index i = 0; i < n; ++i) {
    const Vector xi = alpha.point(i);
    for (Index j = 0; j < m; ++j) {
      const Vector yj = beta.point(j);
      out.Phi0(i, j) = eval_one(basis.phi0(), xi, yj, i, j);
      for (Index s = 0; s < S; ++s)
        out.Phi[static_cast<size_t>(s)](i, j) =
            eval_one(basis.phis()[static_cast<size_t>(s)], xi, yj, i, j);
    }
  }
  if (!out.Phi0.allFinite()) throw InvalidInput("basis: phi0 produced NaN/Inf");
  for (const auto& M : out.Phi)
    if (!M.allFinite()) throw InvalidInput("basis: feature produced NaN/Inf");

  const Vector wa = alpha.weights / alpha.mass;  // probability weights
  const Vector wb = beta.weights / beta.mass;
  out.Phi_bar0.reserve(static_cast<size_t>(S));
  out.Phi_bar1.reserve(static_cast<size_t>(S));
  out.Phi_bar2.reserve(static_cast<size_t>(S));
  for (Index s = 0; s < S; ++s) {
    const Matrix& P = out.Phi[static_cast<size_t>(s)];
    const Vector e1 = P * wb;               // conditional mean over y, per x_i
    const Vector e2 = P.transpose() * wa;   // conditional mean over x, per y_j
    const double e12 = wa.dot(P * wb);
    out.Phi_bar1.push_back(P - e1 * Eigen::RowVectorXd::Ones(m));
    out.Phi_bar2.push_back(P - Vector::Ones(n) * e2.transpose());
    out.Phi_bar0.push_back(P - e1 * Eigen::RowVectorXd::Ones(m) -
                           Vector::Ones(n) * e2.transpose() +
                           Matrix::Constant(n, m, e12));
  }

  auto gram = [&](const std::vector<Matrix>& F) {
    Matrix G(S, S);
    for (Index s = 0; s < S; ++s)
      for (Index t = s; t < S; ++t) {
        const double v =
            alpha.weights.dot((F[static_cast<size_t>(s)].cwiseProduct(
                                   F[static_cast<size_t>(t)])) *
                              beta.weights);
        G(s, t) = v;
        G(t, s) = v;
      }
    return G;
  };
  out.gram0 = gram(out.Phi_bar0);
  out.gram1 = gram(out.Phi_bar1);
  out.gram2 = gram(out.Phi_bar2);
  out.gram_raw = gram(out.Phi);
  return out;
}

double rho_min(const BasisMatrices& matrices, GramKind which) {
  const Matrix* G = nullptr;
  switch (which) {
    case GramKind::Centered0: G = &matrices.gram0; break;
    case GramKind::Centered1: G = &matrices.gram1; break;
    case GramKind::Centered2: G = &matrices.gram2; break;
    case GramKind::Raw: G = &matrices.gram_raw; break;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(*G, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Index symmetric_dim_from_packed(Index packed_len) {
  const Index d = static_cast<Index>(
      std::llround((std::sqrt(8.0 * static_cast<double>(packed_len) + 1.0) - 1.0) / 2.0));
  if (d * (d + 1) / 2 != packed_len)
    throw InvalidInput("packed length is not d(d+1)/2 for any d");
  return d;
}

Matrix symmetric_embed(const Vector& theta_upper) {
  const Index d = symmetric_dim_from_packed(theta_upper.size());
  Matrix s(d, d);
  Index k = 0;
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j) {
      s(i, j) = theta_upper[k];
      s(j, i) = theta_upper[k];
      ++k;
    }
  return s;
}

Vector symmetric_flatten(const Matrix& sym) {
  if (sym.rows() != sym.cols()) throw InvalidInput("flatten: not square");
  const Index d = sym.rows();
  Vector v(d * (d + 1) / 2);
  Index k = 0;
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j) v[k++] = sym(i, j);
  return v;
}

Vector symmetric_adjoint(const Matrix& a) {
  if (a.rows() != a.cols()) throw InvalidInput("adjoint: not square");
  const Index d = a.rows();
  Vector v(d * (d + 1) / 2);
  Index k = 0;
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j) v[k++] = (i == j) ? a(i, i) : a(i, j) + a(j, i);
  return v;
}

Feature make_constant_feature() {
  return {"constant", [](const Vector&, const Vector&) { return 1.0; }, nullptr,
          nullptr};
}

Feature make_coordinate_product_feature(int i, int j) {
  return {"xy_" + std::to_string(i) + "_" + std::to_string(j),
          [i, j](const Vector& x, const Vector& y) { return x[i] * y[j]; },
          nullptr, nullptr};
}

Feature make_squared_distance_feature() {
  return {"sqdist",
          [](const Vector& x, const Vector& y) { return (x - y).squaredNorm(); },
          nullptr, nullptr};
}

Feature make_tabulated_feature(const Matrix& table, const std::string& name) {
  Feature f;
  f.name = name;
  f.table = std::make_shared<const Matrix>(table);
  return f;
}

}  // namespace ifyot
