#include "ifyot/divergences.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace ifyot {

namespace {

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace

PhiDivergence PhiDivergence::balanced() {
  return PhiDivergence(DivKind::Balanced, 1.0, 1.0, 1.0);
}
PhiDivergence PhiDivergence::kl(double tau) {
  if (!(tau > 0.0)) throw InvalidInput("kl: tau must be positive");
  return PhiDivergence(DivKind::KL, tau, 0.0, 0.0);
}
PhiDivergence PhiDivergence::chi_squared(double tau) {
  if (!(tau > 0.0)) throw InvalidInput("chi2: tau must be positive");
  return PhiDivergence(DivKind::ChiSquared, tau, 0.0, 0.0);
}
PhiDivergence PhiDivergence::hellinger(double tau) {
  if (!(tau > 0.0)) throw InvalidInput("hellinger: tau must be positive");
  return PhiDivergence(DivKind::Hellinger, tau, 0.0, 0.0);
}
PhiDivergence PhiDivergence::jensen_shannon(double tau) {
  if (!(tau > 0.0)) throw InvalidInput("js: tau must be positive");
  return PhiDivergence(DivKind::JensenShannon, tau, 0.0, 0.0);
}
PhiDivergence PhiDivergence::range_constraint(double a, double b) {
  if (!(a >= 0.0) || !(b >= a) || !(b > 0.0))
    throw InvalidInput("range: need 0 <= a <= b, b > 0");
  return PhiDivergence(DivKind::RangeConstraint, 1.0, a, b);
}

PhiDivergence PhiDivergence::parse(const std::string& name) {
  std::vector<std::string> parts;
  std::stringstream ss(name);
  std::string cell;
  while (std::getline(ss, cell, ':')) parts.push_back(cell);
  if (parts.empty()) throw InvalidInput("divergence: empty name");
  const std::string& head = parts[0];
  const double tau = parts.size() > 1 ? std::stod(parts[1]) : 1.0;
  if (head == "balanced") return balanced();
  if (head == "kl") return kl(tau);
  if (head == "chi2") return chi_squared(tau);
  if (head == "hellinger") return hellinger(tau);
  if (head == "js") return jensen_shannon(tau);
  if (head == "range") {
    if (parts.size() != 3) throw InvalidInput("range: expected range:a:b");
    return range_constraint(std::stod(parts[1]), std::stod(parts[2]));
  }
  throw InvalidInput("unknown divergence: " + name);
}

std::string PhiDivergence::name() const {
  std::ostringstream os;
  switch (kind_) {
    case DivKind::Balanced: return "balanced";
    case DivKind::KL: os << "kl:" << tau_; break;
    case DivKind::ChiSquared: os << "chi2:" << tau_; break;
    case DivKind::Hellinger: os << "hellinger:" << tau_; break;
    case DivKind::JensenShannon: os << "js:" << tau_; break;
    case DivKind::RangeConstraint: os << "range:" << a_ << ":" << b_; break;
  }
  return os.str();
}

double PhiDivergence::phi(double x) const {
  if (x < 0.0) return kInf;
  switch (kind_) {
    case DivKind::Balanced:
      return std::abs(x - 1.0) <= 1e-12 ? 0.0 : kInf;
    case DivKind::KL:
      return tau_ * (xlogx(x) - x + 1.0);
    case DivKind::ChiSquared:
      return tau_ * (x - 1.0) * (x - 1.0);
    case DivKind::Hellinger: {
      const double s = std::sqrt(x) - 1.0;
      return tau_ * s * s;
    }
    case DivKind::JensenShannon:
      return tau_ * (xlogx(x) - (1.0 + x) * std::log(0.5 * (1.0 + x)));
    case DivKind::RangeConstraint:
      return (x >= a_ - 1e-12 && x <= b_ + 1e-12) ? 0.0 : kInf;
  }
  return kInf;
}

double PhiDivergence::phi_prime_inf() const {
  switch (kind_) {
    case DivKind::Balanced: return kInf;
    case DivKind::KL: return kInf;
    case DivKind::ChiSquared: return kInf;
    case DivKind::Hellinger: return tau_;
    case DivKind::JensenShannon: return tau_ * std::log(2.0);
    case DivKind::RangeConstraint: return std::isfinite(b_) ? kInf : 0.0;
  }
  return kInf;
}

double PhiDivergence::conjugate_value(double y) const {
  switch (kind_) {
    case DivKind::Balanced:
      return y;
    case DivKind::KL:
      return tau_ * std::expm1(y / tau_);
    case DivKind::ChiSquared:
      return y >= -2.0 * tau_ ? y + y * y / (4.0 * tau_) : -tau_;
    case DivKind::Hellinger:
      return y < tau_ ? tau_ * y / (tau_ - y) : kInf;
    case DivKind::JensenShannon: {
      const double u = std::exp(y / tau_);
      return u < 2.0 ? -tau_ * std::log(2.0 - u) : kInf;
    }
    case DivKind::RangeConstraint:
      if (y >= 0.0) return std::isfinite(b_) ? b_ * y : (y == 0.0 ? 0.0 : kInf);
      return a_ * y;
  }
  return kInf;
}

double PhiDivergence::conjugate_derivative(double y) const {
  switch (kind_) {
    case DivKind::Balanced:
      return 1.0;
    case DivKind::KL:
      return std::exp(y / tau_);
    case DivKind::ChiSquared:
      return y >= -2.0 * tau_ ? 1.0 + y / (2.0 * tau_) : 0.0;
    case DivKind::Hellinger: {
      const double d = tau_ - y;
      return d > 0.0 ? tau_ * tau_ / (d * d) : kInf;
    }
    case DivKind::JensenShannon: {
      const double u = std::exp(y / tau_);
      return u < 2.0 ? u / (2.0 - u) : kInf;
    }
    case DivKind::RangeConstraint:
      // Kink at 0; the midpoint slope is the minimal-norm subgradient proxy.
      if (y > 0.0) return b_;
      if (y < 0.0) return a_;
      return 0.5 * (a_ + b_);
  }
  return kInf;
}

double PhiDivergence::conjugate_second_derivative(double y) const {
  switch (kind_) {
    case DivKind::Balanced:
      return 0.0;
    case DivKind::KL:
      return std::exp(y / tau_) / tau_;
    case DivKind::ChiSquared:
      return y >= -2.0 * tau_ ? 1.0 / (2.0 * tau_) : 0.0;
    case DivKind::Hellinger: {
      const double d = tau_ - y;
      return d > 0.0 ? 2.0 * tau_ * tau_ / (d * d * d) : kInf;
    }
    case DivKind::JensenShannon: {
      const double u = std::exp(y / tau_);
      const double d = 2.0 - u;
      return d > 0.0 ? 2.0 * u / (tau_ * d * d) : kInf;
    }
    case DivKind::RangeConstraint:
      return 0.0;
  }
  return kInf;
}

double PhiDivergence::aprox(double p, double eta) const {
  if (!(eta > 0.0)) throw InvalidInput("aprox: eta must be positive");
  switch (kind_) {
    case DivKind::Balanced:
      return p;
    case DivKind::KL:
      return tau_ * p / (tau_ + eta);
    case DivKind::RangeConstraint: {
      // Stationarity exp((p-q)/eta) = (phi*)'(q) solved on each linear piece
      // of the support-function conjugate; the kink at 0 absorbs the rest.
      if (std::isfinite(b_)) {
        const double qb = p - eta * std::log(b_);
        if (qb > 0.0) return qb;
      }
      if (a_ > 0.0) {
        const double qa = p - eta * std::log(a_);
        if (qa < 0.0) return qa;
      }
      return 0.0;
    }
    default:
      return aprox_numeric(p, eta);
  }
}

// Minimizes h(q) = eta*exp((p-q)/eta) + phi*(q). Sign of h' is evaluated in
// log domain so huge exponents cannot overflow the bracketing phase.
double PhiDivergence::aprox_numeric(double p, double eta) const {
  double dom_hi = kInf;  // upper end of dom phi*
  if (kind_ == DivKind::Hellinger) dom_hi = tau_;
  if (kind_ == DivKind::JensenShannon) dom_hi = tau_ * std::log(2.0);

  auto hprime_sign = [&](double q) -> int {
    const double dphi = conjugate_derivative(q);
    if (dphi <= 0.0) return -1;  // -exp(...) dominates
    const double diff = std::log(dphi) - (p - q) / eta;
    return diff > 0.0 ? 1 : (diff < 0.0 ? -1 : 0);
  };

  double q0 = std::isfinite(dom_hi) ? std::min(p, dom_hi - 1.0) : p;
  double lo = q0, hi = q0;
  double step = std::max(1.0, eta);
  while (hprime_sign(lo) >= 0) {
    lo -= step;
    step *= 2.0;
    if (step > 1e18) throw InvalidInput("aprox: bracketing failed (low side)");
  }
  if (std::isfinite(dom_hi)) {
    double gap = dom_hi - hi;
    while (hprime_sign(hi) <= 0) {
      gap *= 0.5;
      hi = dom_hi - gap;
      if (gap < 1e-300) return dom_hi;
    }
  } else {
    step = std::max(1.0, eta);
    while (hprime_sign(hi) <= 0) {
      hi += step;
      step *= 2.0;
      if (step > 1e18) throw InvalidInput("aprox: bracketing failed (high side)");
    }
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= 1e-14 * std::max({1.0, std::abs(lo), std::abs(hi)})) break;
    const int s = hprime_sign(mid);
    if (s == 0) return mid;
    (s < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double PhiDivergence::divergence_value(const Vector& rho_weights,
                                       const Vector& base_weights) const {
  if (rho_weights.size() != base_weights.size())
    throw InvalidInput("divergence_value: length mismatch");
  if (kind_ == DivKind::Balanced) {
    const double scale = std::max(1.0, base_weights.cwiseAbs().maxCoeff());
    return ((rho_weights - base_weights).cwiseAbs().maxCoeff() <= 1e-12 * scale)
               ? 0.0
               : kInf;
  }
  double total = 0.0;
  double singular = 0.0;
  for (Index i = 0; i < rho_weights.size(); ++i) {
    if (base_weights[i] > 0.0) {
      total += phi(rho_weights[i] / base_weights[i]) * base_weights[i];
    } else {
      singular += rho_weights[i];
    }
    if (!std::isfinite(total)) return kInf;
  }
  if (singular > 0.0) {
    const double slope = phi_prime_inf();
    if (slope == kInf) return kInf;
    total += slope * singular;
  }
  return total;
}

double PhiDivergence::divergence_value(const DiscreteMeasure& rho,
                                       const DiscreteMeasure& base) const {
  rho.validate();
  base.validate();
  if (rho.dim() != base.dim())
    throw InvalidInput("divergence_value: dimension mismatch");
  if (rho.points.rows() == base.points.rows() && rho.points == base.points)
    return divergence_value(rho.weights, base.weights);
  // General supports: match rho atoms to base atoms by exact position.
  double total = 0.0;
  double singular = 0.0;
  std::vector<bool> base_seen(base.size(), false);
  for (Index i = 0; i < rho.size(); ++i) {
    Index match = -1;
    for (Index j = 0; j < base.size(); ++j) {
      if (rho.points.row(i) == base.points.row(j)) {
        match = j;
        break;
      }
    }
    if (match >= 0 && base.weights[match] > 0.0) {
      total += phi(rho.weights[i] / base.weights[match]) * base.weights[match];
      base_seen[static_cast<size_t>(match)] = true;
    } else {
      singular += rho.weights[i];
    }
    if (!std::isfinite(total)) return kInf;
  }
  for (Index j = 0; j < base.size(); ++j)
    if (!base_seen[static_cast<size_t>(j)] && base.weights[j] > 0.0)
      total += phi(0.0) * base.weights[j];
  if (!std::isfinite(total)) return kInf;
  if (singular > 0.0) {
    const double slope = phi_prime_inf();
    if (slope == kInf) return kInf;
    total += slope * singular;
  }
  return total;
}

namespace {

// Truncated grid over dom(phi).
std::vector<double> domain_grid(const PhiDivergence& d) {
  switch (d.kind()) {
    case DivKind::Balanced:
      return {1.0};
    case DivKind::RangeConstraint: {
      auto [a, b] = d.range();
      const double hi = std::isfinite(b) ? b : 10.0;
      std::vector<double> g;
      for (int k = 0; k <= 20; ++k) g.push_back(a + (hi - a) * k / 20.0);
      return g;
    }
    default: {
      std::vector<double> g;
      for (int k = 0; k <= 20; ++k) g.push_back(10.0 * k / 20.0);
      return g;
    }
  }
}

}  // namespace

std::pair<bool, bool> assumption_bounded_witnesses(const PhiDivergence& div1,
                                                   const PhiDivergence& div2,
                                                   double mass_alpha,
                                                   double mass_beta) {
  const auto g1 = domain_grid(div1);
  const auto g2 = domain_grid(div2);
  bool first = false, second = false;
  for (double a : g1)
    for (double b : g2) {
      if (b * mass_beta > a * mass_alpha) first = true;
      if (a * mass_alpha > b * mass_beta) second = true;
    }
  return {first, second};
}

}  // namespace ifyot
