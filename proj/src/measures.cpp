#include "ifyot/measures.h"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "ifyot/rng.h"

namespace ifyot {

DiscreteMeasure::DiscreteMeasure(Matrix pts, Vector w, double m)
    : points(std::move(pts)), weights(std::move(w)), mass(m) {}

void DiscreteMeasure::validate() const {
  if (points.rows() != weights.size())
    throw InvalidInput("measure: |points| != |weights|");
  if (points.rows() == 0) throw InvalidInput("measure: empty support");
  if (!points.allFinite()) throw InvalidInput("measure: non-finite point");
  if (!weights.allFinite() || weights.minCoeff() < 0.0)
    throw InvalidInput("measure: negative or non-finite weight");
  if (!(mass > 0.0)) throw InvalidInput("measure: mass must be positive");
  const double s = weights.sum();
  if (std::abs(s - mass) > 1e-12 * std::max(1.0, std::abs(mass)))
    throw InvalidInput("measure: mass does not match sum of weights");
}

void CoupledSample::validate() const {
  if (x.rows() == 0) throw InvalidInput("coupled sample: empty");
  if (x.rows() != y.rows()) throw InvalidInput("coupled sample: |x| != |y|");
  if (!x.allFinite() || !y.allFinite())
    throw InvalidInput("coupled sample: non-finite point");
  if (!(mass > 0.0)) throw InvalidInput("coupled sample: mass must be positive");
}

void GaussianSpec::validate() const {
  if (covariance.rows() != covariance.cols() || covariance.rows() != mean.size())
    throw InvalidInput("gaussian: shape mismatch");
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw InvalidInput("gaussian: covariance not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(covariance, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-12)
    throw InvalidInput("gaussian: covariance not PSD");
}

DiscreteMeasure empirical_from_samples(const Matrix& samples, double mass) {
  if (samples.rows() == 0) throw InvalidInput("empirical: empty sample list");
  if (!(mass > 0.0)) throw InvalidInput("empirical: mass must be positive");
  const Index n = samples.rows();
  return DiscreteMeasure(samples, Vector::Constant(n, mass / n), mass);
}

Matrix sample_gaussian(const GaussianSpec& spec, Index n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw InvalidInput("sample_gaussian: n must be >= 1");
  const Index d = spec.dim();
  Eigen::SelfAdjointEigenSolver<Matrix> es(spec.covariance);
  Vector lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Matrix L = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  Rng rng(seed);
  Matrix out(n, d);
  Vector xi(d);
  for (Index k = 0; k < n; ++k) {
    for (Index i = 0; i < d; ++i) xi[i] = rng.normal();
    out.row(k) = (spec.mean + L * xi).transpose();
  }
  return out;
}

DiscreteMeasure load_measure_csv(const std::string& path, double mass) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open measure CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("empty measure CSV: " + path);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const bool has_weight = !header.empty() && header.back() == "weight";
  const Index d = static_cast<Index>(header.size()) - (has_weight ? 1 : 0);
  if (d < 1) throw InvalidInput("measure CSV has no coordinate columns: " + path);
  std::vector<double> coords;
  std::vector<double> ws;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Index col = 0;
    while (std::getline(ss, cell, ',')) {
      const double v = std::stod(cell);
      if (col < d)
        coords.push_back(v);
      else
        ws.push_back(v);
      ++col;
    }
    if (col != d + (has_weight ? 1 : 0))
      throw InvalidInput("measure CSV row has wrong arity: " + path);
  }
  const Index n = static_cast<Index>(coords.size()) / d;
  if (n == 0) throw InvalidInput("measure CSV has no rows: " + path);
  Matrix pts(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) pts(i, j) = coords[i * d + j];
  if (has_weight) {
    Vector w = Eigen::Map<Vector>(ws.data(), n);
    return DiscreteMeasure(pts, w, w.sum());
  }
  return empirical_from_samples(pts, mass);
}

void save_measure_csv(const DiscreteMeasure& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write measure CSV: " + path);
  out.precision(17);
  for (Index j = 0; j < m.dim(); ++j) out << "x" << (j + 1) << ",";
  out << "weight\n";
  for (Index i = 0; i < m.size(); ++i) {
    for (Index j = 0; j < m.dim(); ++j) out << m.points(i, j) << ",";
    out << m.weights[i] << "\n";
  }
}

}  // namespace ifyot
