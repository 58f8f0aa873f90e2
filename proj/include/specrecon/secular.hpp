#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "specrecon/error.hpp"
#include "specrecon/gaussian_lab.hpp"
#include "specrecon/spectrum.hpp"

namespace specrecon {

/// One-column insertion problem: eigenvalues of the arrowhead matrix
///
///     [ diag(nu)   e_off ]
///     [ e_off^T   e_diag ]
///
/// are the roots y of  e_diag - sum_s e_off[s]^2 / (nu[s] - y) - y = 0.
struct SecularProblem {
  Spectrum nu;                  // restricted spectrum, length p - 1
  double e_diag = 0.0;          // E_ii
  std::vector<double> e_off;    // E_si aligned with nu
  std::size_t slot = 0;         // row/column of the inserted coordinate in the dense form

  std::size_t p() const noexcept { return nu.size() + 1; }

  /// Common scale for every tolerance: max(nu_1, |E_ii|, max |E_si|).
  double scale() const noexcept {
    double s = std::max(nu.empty() ? 0.0 : nu[0], std::abs(e_diag));
    for (double e : e_off) s = std::max(s, std::abs(e));
    return s;
  }

  /// Gershgorin floor for the smallest root.
  double lower_bound() const noexcept {
    double radius = 0.0;
    for (double e : e_off) radius += std::abs(e);
    const double bottom = nu.empty() ? e_diag : std::min(nu[nu.size() - 1], e_diag);
    return bottom - radius;
  }

  /// Bound above the largest root.
  double upper_bound() const noexcept {
    double radius = 0.0;
    for (double e : e_off) radius += std::abs(e);
    return (nu.empty() ? 0.0 : nu[0]) + std::abs(e_diag) + radius;
  }

  void validate() const {
    if (e_off.size() != nu.size()) {
      throw Error(ErrorKind::SizeMismatch, "e_off has " + std::to_string(e_off.size()) + " entries, nu has " +
                                               std::to_string(nu.size()));
    }
    if (!std::isfinite(e_diag)) throw Error(ErrorKind::NonFinite, "e_diag is not finite");
    for (double e : e_off) {
      if (!std::isfinite(e)) throw Error(ErrorKind::NonFinite, "e_off entry is not finite");
    }
    if (slot >= p()) throw Error(ErrorKind::IndexOutOfRange, "slot " + std::to_string(slot));
  }
};

inline SecularProblem make_secular_problem(const PerturbationColumn& col) {
  SecularProblem prob{col.nu, col.diag_entry, col.off_entries, col.i};
  prob.validate();
  return prob;
}

/// f(y) = E_ii - sum_s E_si^2 / (nu_s - y) - y; strictly decreasing between poles.
inline double secular_function(double y, const SecularProblem& prob) {
  double acc = prob.e_diag - y;
  for (std::size_t s = 0; s < prob.nu.size(); ++s) {
    const double e = prob.e_off[s];
    if (e == 0.0) continue;
    const double d = prob.nu[s] - y;
    if (d == 0.0) {
      throw Error(ErrorKind::PoleHit, "secular function evaluated at pole nu[" + std::to_string(s) + "]");
    }
    acc -= e * e / d;
  }
  return acc;
}

namespace detail {

struct Pole {
  double d;
  double w;  // squared weight
};

// f and f' over the reduced pole set.
inline void secular_eval(const std::vector<Pole>& poles, double e_diag, double y, double& f, double& fp) {
  f = e_diag - y;
  fp = -1.0;
  for (const auto& pole : poles) {
    const double inv = 1.0 / (pole.d - y);
    f -= pole.w * inv;
    fp -= pole.w * inv * inv;
  }
}

// Root of the decreasing function on (lo, hi) where f(lo+) > 0 > f(hi-).
inline double secular_bracket_root(const std::vector<Pole>& poles, double e_diag, double lo, double hi,
                                   double scale) {
  constexpr int kMaxIterations = 200;
  const double f_tol = 1e-12 * scale;
  const double w_tol = 1e-14 * scale;
  double x = 0.5 * (lo + hi);
  double width_two_back = std::numeric_limits<double>::infinity();
  double width_one_back = hi - lo;
  for (int it = 0; it < kMaxIterations; ++it) {
    double f = 0.0;
    double fp = 0.0;
    secular_eval(poles, e_diag, x, f, fp);
    if (std::abs(f) <= f_tol) return x;
    if (f > 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double width = hi - lo;
    const double ulps = 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi));
    if (width <= std::max(w_tol, ulps)) return 0.5 * (lo + hi);
    const double newton = x - f / fp;
    // Newton while it stays inside the bracket and the bracket keeps halving
    // every two steps; bisection otherwise.
    const bool stalled = width > 0.5 * width_two_back;
    if (!stalled && newton > lo && newton < hi) {
      x = newton;
    } else {
      x = 0.5 * (lo + hi);
    }
    width_two_back = width_one_back;
    width_one_back = width;
  }
  throw Error(ErrorKind::NoConvergence, "secular root did not converge in 200 iterations");
}

}  // namespace detail

/// All p roots, descending. Tiny weights (|E_si| < 1e-14 * scale) and tied poles are
/// deflated exactly; every remaining root is bracketed by consecutive poles and found
/// by safeguarded Newton/bisection.
inline std::vector<double> secular_roots(const SecularProblem& prob) {
  prob.validate();
  const double scale = prob.scale();
  const std::size_t p = prob.p();
  if (scale == 0.0) return std::vector<double>(p, 0.0);
  const double defl = 1e-14 * scale;

  std::vector<double> roots;
  roots.reserve(p);
  std::vector<detail::Pole> poles;
  for (std::size_t s = 0; s < prob.nu.size(); ++s) {
    const double d = prob.nu[s];
    const double e = prob.e_off[s];
    if (std::abs(e) < defl) {
      roots.push_back(d);
      continue;
    }
    if (!poles.empty() && poles.back().d - d <= defl) {
      // Tied pole: rotate its weight into the existing pole; d itself is a root.
      poles.back().w += e * e;
      roots.push_back(d);
      continue;
    }
    poles.push_back({d, e * e});
  }

  if (poles.empty()) {
    roots.push_back(prob.e_diag);
  } else {
    double radius = 0.0;
    for (const auto& pole : poles) radius += std::sqrt(pole.w);
    const double margin = 1e-12 * scale;
    double upper = poles.front().d + std::abs(prob.e_diag) + radius + margin;
    double lower = std::min(poles.back().d, prob.e_diag) - radius - margin;
    double f = 0.0;
    double fp = 0.0;
    detail::secular_eval(poles, prob.e_diag, upper, f, fp);
    if (!(f < 0.0)) throw Error(ErrorKind::BracketFailure, "no sign change above the largest pole");
    detail::secular_eval(poles, prob.e_diag, lower, f, fp);
    if (!(f > 0.0)) throw Error(ErrorKind::BracketFailure, "no sign change below the smallest pole");

    roots.push_back(detail::secular_bracket_root(poles, prob.e_diag, poles.front().d, upper, scale));
    for (std::size_t k = 1; k < poles.size(); ++k) {
      roots.push_back(detail::secular_bracket_root(poles, prob.e_diag, poles[k].d, poles[k - 1].d, scale));
    }
    roots.push_back(detail::secular_bracket_root(poles, prob.e_diag, lower, poles.back().d, scale));
  }
  std::sort(roots.begin(), roots.end(), std::greater<>());
  return roots;
}

/// Full spectrum after inserting the column (round-off negatives clamped).
inline Spectrum secular_solve(const SecularProblem& prob) {
  return sort_spectrum(secular_roots(prob), Role::Sample);
}

/// Dense arrowhead matrix: nu on the diagonal except at `slot`, which holds E_ii and
/// the E_si entries along its row and column.
inline Matrix arrowhead_oracle(const SecularProblem& prob) {
  prob.validate();
  const auto p = static_cast<Eigen::Index>(prob.p());
  const auto slot = static_cast<Eigen::Index>(prob.slot);
  Matrix m = Matrix::Zero(p, p);
  Eigen::Index s = 0;
  for (Eigen::Index k = 0; k < p; ++k) {
    if (k == slot) continue;
    m(k, k) = prob.nu[static_cast<std::size_t>(s)];
    m(k, slot) = prob.e_off[static_cast<std::size_t>(s)];
    m(slot, k) = prob.e_off[static_cast<std::size_t>(s)];
    ++s;
  }
  m(slot, slot) = prob.e_diag;
  return m;
}

/// full_1 >= nu_1 >= full_2 >= ... >= nu_{p-1} >= full_p, ties tolerated at 1e-12
/// relative.
inline bool interlacing_check(const Spectrum& full, const Spectrum& restricted) {
  if (full.size() != restricted.size() + 1) {
    throw Error(ErrorKind::SizeMismatch, "interlacing needs |full| = |restricted| + 1");
  }
  if (restricted.empty()) return true;
  const double tol = 1e-12 * std::max(full[0], restricted[0]);
  for (std::size_t k = 0; k < restricted.size(); ++k) {
    if (full[k] < restricted[k] - tol) return false;
    if (restricted[k] < full[k + 1] - tol) return false;
  }
  return true;
}

/// How far each full eigenvalue moved away from the restricted ones, in units of the
/// local restricted gap.
struct LocalityProfile {
  std::size_t center = 0;
  /// min(|full_j - nu_j|, |full_j - nu_{j-1}|) / (nu_{j-1} - nu_j); at the two ends the
  /// single neighbour and adjacent gap are used, capped at 1/2. NaN where no gap exists.
  std::vector<double> ratios;
  std::size_t insertion_index = 0;  // argmax of ratios

  /// Share of defined ratios below 1/l among indices with |j - center| > min_distance.
  double fraction_below(double l, std::size_t min_distance) const {
    std::size_t total = 0;
    std::size_t below = 0;
    for (std::size_t j = 0; j < ratios.size(); ++j) {
      const std::size_t dist = j > center ? j - center : center - j;
      if (dist <= min_distance || std::isnan(ratios[j])) continue;
      ++total;
      if (ratios[j] < 1.0 / l) ++below;
    }
    return total == 0 ? 1.0 : static_cast<double>(below) / static_cast<double>(total);
  }
};

inline LocalityProfile locality_profile(const Spectrum& full, const Spectrum& restricted, std::size_t i) {
  if (!interlacing_check(full, restricted)) {
    throw Error(ErrorKind::InterlacingViolation, "locality profile needs interlaced spectra");
  }
  const std::size_t p = full.size();
  if (i >= p) throw Error(ErrorKind::IndexOutOfRange, "insertion index " + std::to_string(i));
  LocalityProfile out;
  out.center = i;
  out.ratios.assign(p, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t j = 1; j + 1 < p; ++j) {
    const double gap = restricted[j - 1] - restricted[j];
    if (gap <= 0.0) continue;
    const double move = std::min(std::abs(full[j] - restricted[j]), std::abs(full[j] - restricted[j - 1]));
    out.ratios[j] = std::min(move / gap, 0.5);
  }
  if (p >= 3) {
    const double top_gap = restricted[0] - restricted[1];
    if (top_gap > 0.0) out.ratios[0] = std::min(std::abs(full[0] - restricted[0]) / top_gap, 0.5);
    const double bottom_gap = restricted[p - 3] - restricted[p - 2];
    if (bottom_gap > 0.0) {
      out.ratios[p - 1] = std::min(std::abs(full[p - 1] - restricted[p - 2]) / bottom_gap, 0.5);
    }
  }
  double best = -1.0;
  for (std::size_t j = 0; j < p; ++j) {
    if (!std::isnan(out.ratios[j]) && out.ratios[j] > best) {
      best = out.ratios[j];
      out.insertion_index = j;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON fixture form: {"nu": [...], "e_diag": x, "e_off": [...], "slot": k}.

inline nlohmann::json to_json(const SecularProblem& prob) {
  return {{"nu", prob.nu.vector()}, {"e_diag", prob.e_diag}, {"e_off", prob.e_off}, {"slot", prob.slot}};
}

inline SecularProblem secular_problem_from_json(const nlohmann::json& j) {
  try {
    SecularProblem prob;
    prob.nu = Spectrum(j.at("nu").get<std::vector<double>>(), Role::Restricted);
    prob.e_diag = j.at("e_diag").get<double>();
    prob.e_off = j.at("e_off").get<std::vector<double>>();
    prob.slot = j.contains("slot") ? j.at("slot").get<std::size_t>() : prob.nu.size();
    prob.validate();
    return prob;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, std::string("malformed secular problem: ") + e.what());
  }
}

}  // namespace specrecon
