#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <ostream>
#include <vector>

#include "specrecon/detail/text.hpp"
#include "specrecon/error.hpp"

namespace specrecon {

/// Marchenko-Pastur law of X^T X / n for identity population covariance, with
/// ratio lambda = p / n = 1 / c.
class MPLaw {
 public:
  explicit MPLaw(double ratio) : ratio_(ratio) {
    if (!(ratio > 0.0) || !std::isfinite(ratio)) throw Error(ErrorKind::InvalidArgument, "MP ratio must be > 0");
    const double r = std::sqrt(ratio);
    lower_ = (1.0 - r) * (1.0 - r);
    upper_ = (1.0 + r) * (1.0 + r);
  }

  /// From the aspect ratio c = n / p.
  static MPLaw from_aspect_ratio(double c) {
    if (!(c > 0.0)) throw Error(ErrorKind::InvalidArgument, "aspect ratio must be > 0");
    return MPLaw(1.0 / c);
  }

  double ratio() const noexcept { return ratio_; }
  double lower_edge() const noexcept { return lower_; }
  double upper_edge() const noexcept { return upper_; }
  double point_mass_at_zero() const noexcept { return std::max(0.0, 1.0 - 1.0 / ratio_); }

 private:
  double ratio_;
  double lower_;
  double upper_;
};

/// Absolutely continuous part: sqrt((b - x)(x - a)) / (2 pi lambda x) on [a, b].
inline double mp_density(double x, const MPLaw& law) {
  const double a = law.lower_edge();
  const double b = law.upper_edge();
  if (x <= a || x >= b || x <= 0.0) return 0.0;
  return std::sqrt((b - x) * (x - a)) / (2.0 * std::numbers::pi * law.ratio() * x);
}

namespace detail {

template <typename F>
double adaptive_simpson_step(F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                             int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  if (depth <= 0) throw Error(ErrorKind::QuadratureFailure, "adaptive Simpson exceeded its depth limit");
  return adaptive_simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance tol.
template <typename F>
double adaptive_simpson(F f, double a, double b, double tol = 1e-12, int max_depth = 48) {
  if (a == b) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

}  // namespace detail

/// Point mass at zero plus the integral of mp_density from a to x. The substitution
/// x = a + (b - a)(1 - cos phi)/2 removes the square-root edge singularities.
inline double mp_cdf(double x, const MPLaw& law) {
  if (x < 0.0) return 0.0;
  const double a = law.lower_edge();
  const double b = law.upper_edge();
  const double mass0 = law.point_mass_at_zero();
  if (x <= a) return mass0;
  if (x >= b) return 1.0;
  const double half = 0.5 * (b - a);
  const double scale = 1.0 / (2.0 * std::numbers::pi * law.ratio());
  const auto integrand = [&](double phi) {
    const double xs = a + half * (1.0 - std::cos(phi));
    const double s = std::sin(phi);
    if (xs <= 0.0) return scale * (b - a);  // limit at phi = 0 when a = 0
    return scale * half * half * s * s / xs;
  };
  const double phi_x = std::acos(std::clamp(1.0 - (x - a) / half, -1.0, 1.0));
  const double value = mass0 + detail::adaptive_simpson(integrand, 0.0, phi_x);
  return std::clamp(value, 0.0, 1.0);
}

/// Discrete population spectral measure: atoms t_k with weights summing to one.
struct PopulationMeasure {
  std::vector<double> atoms;
  std::vector<double> weights;

  static PopulationMeasure point_mass(double t) { return {{t}, {1.0}}; }

  /// Equal weights on the given eigenvalues.
  static PopulationMeasure uniform(const std::vector<double>& atoms) {
    if (atoms.empty()) throw Error(ErrorKind::InvalidArgument, "population measure needs atoms");
    return {atoms, std::vector<double>(atoms.size(), 1.0 / static_cast<double>(atoms.size()))};
  }

  void validate() const {
    if (atoms.empty() || atoms.size() != weights.size()) {
      throw Error(ErrorKind::InvalidArgument, "population measure needs matching atoms and weights");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      if (!(atoms[k] >= 0.0) || !(weights[k] >= 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "atoms and weights must be non-negative");
      }
      total += weights[k];
    }
    if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorKind::InvalidArgument, "weights must sum to one");
  }
};

struct FixedPointOptions {
  double damping = 0.5;
  double step_tolerance = 1e-12;
  double residual_tolerance = 1e-11;
  int max_iterations = 10000;
  std::optional<std::complex<double>> initial;  // companion transform; defaults to -1/z
};

struct FixedPointResult {
  /// Stieltjes transform of the n x n companion X Sigma X^T / n, the unknown of the
  /// fixed-point equation.
  std::complex<double> companion;
  /// Stieltjes transform of the p x p sample covariance law F^W.
  std::complex<double> m;
  double density = 0.0;  // Im(m) / pi
  double residual = 0.0;
  int iterations = 0;
};

/// Residual of  -1/m = z - (p/n) * sum_k w_k t_k / (1 + t_k m).
inline std::complex<double> fixed_point_rhs(std::complex<double> m, std::complex<double> z, double ratio,
                                            const PopulationMeasure& pop) {
  std::complex<double> acc = 0.0;
  for (std::size_t k = 0; k < pop.atoms.size(); ++k) acc += pop.weights[k] * pop.atoms[k] / (1.0 + pop.atoms[k] * m);
  return z - ratio * acc;
}

/// Solves the limiting-spectrum equation at z = x + i eta by damped fixed-point
/// iteration m <- (1 - w) m + w * (-1 / (z - (p/n) int t / (1 + t m) dF(t))), then
/// converts the companion transform to the transform of F^W and reads the density as
/// Im(m) / pi.
inline FixedPointResult stieltjes_fixed_point(double z_real, double eta, const PopulationMeasure& pop, double c,
                                              const FixedPointOptions& opt = {}) {
  if (!(eta > 0.0)) throw Error(ErrorKind::InvalidArgument, "eta must be > 0");
  if (!(c > 0.0)) throw Error(ErrorKind::InvalidArgument, "c must be > 0");
  pop.validate();
  const double ratio = 1.0 / c;
  const std::complex<double> z(z_real, eta);
  std::complex<double> m = opt.initial.value_or(-1.0 / z);
  FixedPointResult out;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    const std::complex<double> next = -1.0 / fixed_point_rhs(m, z, ratio, pop);
    const double step = std::abs(next - m);
    m = (1.0 - opt.damping) * m + opt.damping * next;
    if (step < opt.step_tolerance) {
      const double residual = std::abs(-1.0 / m - fixed_point_rhs(m, z, ratio, pop));
      if (residual < opt.residual_tolerance) {
        out.iterations = it;
        out.residual = residual;
        out.companion = m;
        if (m.imag() < 0.0) {
          throw Error(ErrorKind::NegativeDensity, "fixed point converged to a branch with Im(m) < 0");
        }
        out.m = (m + (1.0 - ratio) / z) / ratio;
        const double density = out.m.imag() / std::numbers::pi;
        if (density < -1e-9) {
          throw Error(ErrorKind::NegativeDensity, "extracted density " + detail::format_double(density));
        }
        out.density = std::max(0.0, density);
        return out;
      }
    }
  }
  throw Error(ErrorKind::NoConvergence, "fixed point did not converge at x = " + detail::format_double(z_real));
}

/// Limiting density of the sample covariance spectrum on a grid.
struct LimitSpectrum {
  PopulationMeasure population;
  double c = 1.0;
  double eta = 1e-3;
  std::vector<double> grid;
  std::vector<double> density_values;
};

inline LimitSpectrum limit_density(const PopulationMeasure& pop, double c, std::vector<double> grid,
                                   double eta = 1e-3, const FixedPointOptions& opt = {}) {
  LimitSpectrum out{pop, c, eta, std::move(grid), {}};
  out.density_values.reserve(out.grid.size());
  for (double x : out.grid) out.density_values.push_back(stieltjes_fixed_point(x, eta, pop, c, opt).density);
  return out;
}

/// Two-column CSV `x,density`.
inline void write_density_csv(std::ostream& os, const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw Error(ErrorKind::SizeMismatch, "density columns differ in length");
  os << "x,density\n";
  for (std::size_t k = 0; k < xs.size(); ++k) {
    os << detail::format_double(xs[k]) << ',' << detail::format_double(ys[k]) << '\n';
  }
}

}  // namespace specrecon
