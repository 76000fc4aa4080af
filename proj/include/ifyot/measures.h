#pragma once

#include <cstdint>
#include <string>

#include "ifyot/common.h"

namespace ifyot {

// Weighted point cloud with an explicit total mass. Masses are always given
// by the caller, never inferred from data.
struct DiscreteMeasure {
  Matrix points;   // n x d
  Vector weights;  // n, nonnegative
  double mass = 0.0;

  DiscreteMeasure() = default;
  DiscreteMeasure(Matrix pts, Vector w, double m);

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }
  Vector point(Index i) const { return points.row(i).transpose(); }

  // Checks the type invariants; throws InvalidInput on violation.
  void validate() const;
};

// Paired samples (x_i, y_i) carrying a total mass.
struct CoupledSample {
  Matrix x;  // n x dx
  Matrix y;  // n x dy
  double mass = 0.0;

  Index size() const { return x.rows(); }
  void validate() const;
};

struct GaussianSpec {
  Vector mean;
  Matrix covariance;

  Index dim() const { return mean.size(); }
  void validate() const;  // symmetry within 1e-12, eigenvalues >= -1e-12
};

// Uniform weights mass/n on the given points.
DiscreteMeasure empirical_from_samples(const Matrix& samples, double mass);

// Deterministic Gaussian draws: mean + L*xi with L the symmetric PSD square
// root of the covariance (eigenvalues clipped at 0, so rank-deficient
// covariances are accepted).
Matrix sample_gaussian(const GaussianSpec& spec, Index n, std::uint64_t seed);

// CSV exchange format: header x1..xd plus an optional trailing weight column.
DiscreteMeasure load_measure_csv(const std::string& path, double mass);
void save_measure_csv(const DiscreteMeasure& m, const std::string& path);

}  // namespace ifyot
