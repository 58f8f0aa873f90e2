#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "specrecon/detail/text.hpp"
#include "specrecon/error.hpp"

namespace specrecon {

/// Which matrix an eigenvalue sequence came from.
enum class Role { GroundTruth, Sample, Restricted };

inline std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::GroundTruth: return "ground_truth";
    case Role::Sample: return "sample";
    case Role::Restricted: return "restricted";
  }
  return "unknown";
}

/// Relative threshold separating an exact atom (skipped) from a value dangerously
/// close to a pole (rejected).
inline constexpr double kPoleGuard = 1e-14;

/// Non-negative eigenvalues in non-increasing order, tagged with their origin.
///
/// Indices are 0-based: operator[](0) is the largest eigenvalue.
class Spectrum {
 public:
  Spectrum() = default;

  /// Takes values that are already descending and non-negative; throws otherwise.
  /// Use sort_spectrum() for raw solver output.
  Spectrum(std::vector<double> descending, Role role) : values_(std::move(descending)), role_(role) {
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (!std::isfinite(values_[k])) {
        throw Error(ErrorKind::NonFinite, "spectrum entry " + std::to_string(k) + " is not finite");
      }
      if (values_[k] < 0.0) {
        throw Error(ErrorKind::NegativeEigenvalue,
                    "spectrum entry " + std::to_string(k) + " = " + detail::format_double(values_[k]));
      }
      if (k > 0 && values_[k] > values_[k - 1]) {
        throw Error(ErrorKind::InvalidArgument, "spectrum is not in descending order at entry " +
                                                    std::to_string(k));
      }
    }
  }

  std::span<const double> values() const noexcept { return values_; }
  const std::vector<double>& vector() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  Role role() const noexcept { return role_; }
  double operator[](std::size_t k) const { return values_[k]; }

  double at(std::size_t k) const {
    if (k >= values_.size()) {
      throw Error(ErrorKind::IndexOutOfRange,
                  "index " + std::to_string(k) + " outside spectrum of size " + std::to_string(size()));
    }
    return values_[k];
  }

  double sum() const noexcept { return std::accumulate(values_.begin(), values_.end(), 0.0); }

  /// Every eigenvalue multiplied by t > 0.
  Spectrum scaled(double t) const {
    std::vector<double> out(values_);
    for (double& v : out) v *= t;
    return Spectrum(std::move(out), role_);
  }

  Spectrum with_role(Role role) const { return Spectrum(values_, role); }

  friend bool operator==(const Spectrum&, const Spectrum&) = default;

 private:
  std::vector<double> values_;
  Role role_ = Role::Sample;
};

/// Canonicalizes raw eigenvalues: descending, stable on ties, entries in
/// [-tol, 0) clamped to zero where tol = 1e-10 * max|raw|.
inline Spectrum sort_spectrum(std::span<const double> raw, Role role) {
  double max_abs = 0.0;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    if (!std::isfinite(raw[k])) {
      throw Error(ErrorKind::NonFinite, "raw eigenvalue " + std::to_string(k) + " is not finite");
    }
    max_abs = std::max(max_abs, std::abs(raw[k]));
  }
  const double tol = 1e-10 * max_abs;
  std::vector<std::pair<double, std::size_t>> keyed;
  keyed.reserve(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    double v = raw[k];
    if (v < -tol) {
      throw Error(ErrorKind::NegativeEigenvalue,
                  "raw eigenvalue " + std::to_string(k) + " = " + detail::format_double(v) +
                      " is below -" + detail::format_double(tol));
    }
    if (v < 0.0) v = 0.0;
    keyed.emplace_back(v, k);
  }
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<double> out;
  out.reserve(keyed.size());
  for (const auto& [v, k] : keyed) out.push_back(v);
  return Spectrum(std::move(out), role);
}

inline Spectrum sort_spectrum(std::initializer_list<double> raw, Role role) {
  return sort_spectrum(std::span<const double>(raw.begin(), raw.size()), role);
}

/// Smallest distance from eigenvalue i to a neighbour; one-sided at the ends.
inline double spectral_gap(const Spectrum& spec, std::size_t i) {
  if (spec.size() < 2) {
    throw Error(ErrorKind::SingletonSpectrum, "spectral gap needs at least two eigenvalues");
  }
  if (i >= spec.size()) {
    throw Error(ErrorKind::IndexOutOfRange, "gap index " + std::to_string(i));
  }
  const double above = i > 0 ? spec[i - 1] - spec[i] : std::numeric_limits<double>::infinity();
  const double below =
      i + 1 < spec.size() ? spec[i] - spec[i + 1] : std::numeric_limits<double>::infinity();
  return std::min(above, below);
}

/// Index of the sample eigenvalue nearest to sigma2; ties go to the smaller index.
inline std::size_t match_index(double sigma2, const Spectrum& sample) {
  if (sample.empty()) throw Error(ErrorKind::EmptySpectrum, "match_index on empty spectrum");
  std::size_t best = 0;
  double best_dist = std::abs(sigma2 - sample[0]);
  for (std::size_t j = 1; j < sample.size(); ++j) {
    const double d = std::abs(sigma2 - sample[j]);
    if (d < best_dist) {
      best = j;
      best_dist = d;
    }
  }
  return best;
}

/// Contiguous block of indices removed from Stieltjes-type sums.
struct ExclusionWindow {
  std::size_t center = 0;
  std::size_t first = 0;  // inclusive
  std::size_t last = 0;   // inclusive

  /// [center - K, center + K] clipped to [0, p).
  static ExclusionWindow centered(std::size_t center, std::size_t half_width, std::size_t p) {
    if (p == 0 || center >= p) {
      throw Error(ErrorKind::IndexOutOfRange, "window center " + std::to_string(center));
    }
    ExclusionWindow w;
    w.center = center;
    w.first = center >= half_width ? center - half_width : 0;
    w.last = std::min(p - 1, center + half_width);
    return w;
  }

  /// [lo, hi] clipped to [0, p); an empty result is encoded with first > last.
  static ExclusionWindow span(std::size_t center, std::ptrdiff_t lo, std::ptrdiff_t hi, std::size_t p) {
    ExclusionWindow w;
    w.center = center;
    const auto plast = static_cast<std::ptrdiff_t>(p) - 1;
    lo = std::max<std::ptrdiff_t>(lo, 0);
    hi = std::min<std::ptrdiff_t>(hi, plast);
    if (lo > hi) {
      w.first = 1;
      w.last = 0;
    } else {
      w.first = static_cast<std::size_t>(lo);
      w.last = static_cast<std::size_t>(hi);
    }
    return w;
  }

  bool contains(std::size_t s) const noexcept { return s >= first && s <= last; }
  std::size_t excluded_count() const noexcept { return first > last ? 0 : last - first + 1; }
};

namespace detail {

// Shared loop for (1/p) sum g(x_s, z) with the atom-skip and pole-guard rules.
template <typename Term>
double guarded_mean(const Spectrum& spec, double z, const std::optional<ExclusionWindow>& window,
                    Term term, std::size_t* used = nullptr) {
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t s = 0; s < spec.size(); ++s) {
    if (window && window->contains(s)) continue;
    const double x = spec[s];
    const double diff = x - z;
    if (diff == 0.0) continue;  // the atom at z itself is left out
    if (std::abs(diff) < kPoleGuard * std::abs(x)) {
      throw Error(ErrorKind::PoleHit, "eigenvalue " + std::to_string(s) + " = " + format_double(x) +
                                          " is within the pole guard of z = " + format_double(z));
    }
    acc += term(x, diff);
    ++count;
  }
  if (used) *used = count;
  return spec.empty() ? 0.0 : acc / static_cast<double>(spec.size());
}

}  // namespace detail

/// (1/p) * sum over s outside the window of x_s / (x_s - z).
inline double stieltjes_sum(const Spectrum& spec, double z,
                            const std::optional<ExclusionWindow>& window = std::nullopt) {
  return detail::guarded_mean(spec, z, window, [](double x, double diff) { return x / diff; });
}

/// Number of terms that contribute to stieltjes_sum / empirical_stieltjes at z.
inline std::size_t stieltjes_term_count(const Spectrum& spec, double z,
                                        const std::optional<ExclusionWindow>& window = std::nullopt) {
  std::size_t used = 0;
  detail::guarded_mean(spec, z, window, [](double, double) { return 0.0; }, &used);
  return used;
}

/// (1/p) * sum over s outside the window of 1 / (x_s - z): the Stieltjes transform
/// of the empirical spectral distribution with the atom at z left out.
inline double empirical_stieltjes(const Spectrum& spec, double z,
                                  const std::optional<ExclusionWindow>& window = std::nullopt) {
  return detail::guarded_mean(spec, z, window, [](double, double diff) { return 1.0 / diff; });
}

/// The step function p*F_full - (p-1)*F_restricted: at any x it counts full
/// eigenvalues <= x minus restricted eigenvalues <= x.
class SignedSpectralShift {
 public:
  SignedSpectralShift(const Spectrum& full, const Spectrum& restricted)
      : full_(full.vector()), restricted_(restricted.vector()) {
    if (full.size() != restricted.size() + 1) {
      throw Error(ErrorKind::SizeMismatch, "signed shift needs |full| = |restricted| + 1, got " +
                                               std::to_string(full.size()) + " and " +
                                               std::to_string(restricted.size()));
    }
    std::reverse(full_.begin(), full_.end());
    std::reverse(restricted_.begin(), restricted_.end());
    breakpoints_.reserve(full_.size() + restricted_.size());
    std::merge(full_.begin(), full_.end(), restricted_.begin(), restricted_.end(),
               std::back_inserter(breakpoints_));
    breakpoints_.erase(std::unique(breakpoints_.begin(), breakpoints_.end()), breakpoints_.end());
    steps_.reserve(breakpoints_.size() + 1);
    steps_.push_back(0);
    for (double b : breakpoints_) steps_.push_back(eval(b));
  }

  /// Value of the step function at x (right-continuous).
  int eval(double x) const {
    const auto nf = std::upper_bound(full_.begin(), full_.end(), x) - full_.begin();
    const auto nr = std::upper_bound(restricted_.begin(), restricted_.end(), x) - restricted_.begin();
    return static_cast<int>(nf - nr);
  }

  /// Distinct jump locations, ascending.
  std::span<const double> breakpoints() const noexcept { return breakpoints_; }

  /// steps()[0] is the value on (-inf, breakpoints()[0]); steps()[k + 1] the value on
  /// [breakpoints()[k], breakpoints()[k + 1]).
  std::span<const int> steps() const noexcept { return steps_; }

  /// True when every step is 0 or 1 and consecutive steps differ.
  bool alternates() const noexcept {
    for (std::size_t k = 0; k < steps_.size(); ++k) {
      if (steps_[k] != 0 && steps_[k] != 1) return false;
      if (k > 0 && steps_[k] == steps_[k - 1]) return false;
    }
    return true;
  }

  /// G(+inf) - G(-inf); equals 1 for every valid pair.
  int total_mass() const noexcept { return steps_.back() - steps_.front(); }

 private:
  std::vector<double> full_;        // ascending
  std::vector<double> restricted_;  // ascending
  std::vector<double> breakpoints_;
  std::vector<int> steps_;
};

inline SignedSpectralShift signed_shift(const Spectrum& full, const Spectrum& restricted) {
  return SignedSpectralShift(full, restricted);
}

/// Orientation of the within-gap position ratio.
enum class RatioConvention {
  /// (full_j - nu_j) / (nu_{j-1} - nu_j) with descending indices.
  Descending,
  /// Same numbers read with ascending indices, i.e. measured from the upper
  /// neighbour: (full_j - nu_{j-1}) / (nu_j - nu_{j-1}).
  Ascending,
};

/// Relative position of full_j inside its interlacing interval [nu_j, nu_{j-1}].
/// j is 0-based and must satisfy 1 <= j <= p - 2 so both neighbours exist.
inline double shift_ratio(const Spectrum& full, const Spectrum& restricted, std::size_t j,
                          RatioConvention convention = RatioConvention::Descending) {
  if (full.size() != restricted.size() + 1) {
    throw Error(ErrorKind::SizeMismatch, "shift_ratio needs |full| = |restricted| + 1");
  }
  if (j < 1 || j + 1 >= full.size()) {
    throw Error(ErrorKind::IndexOutOfRange,
                "shift_ratio index " + std::to_string(j) + " needs both restricted neighbours");
  }
  const double upper = restricted[j - 1];
  const double lower = restricted[j];
  const double x = full[j];
  const double tol = 1e-12 * std::max(full[0], restricted[0]);
  if (x > upper + tol || x < lower - tol) {
    throw Error(ErrorKind::InterlacingViolation,
                "full eigenvalue " + std::to_string(j) + " outside its restricted interval");
  }
  if (upper == lower) throw Error(ErrorKind::ZeroGap, "restricted gap at " + std::to_string(j));
  if (convention == RatioConvention::Descending) return (x - lower) / (upper - lower);
  return (x - upper) / (lower - upper);
}

/// Kolmogorov-Smirnov distance between the spectrum's empirical CDF and a reference
/// CDF. Both one-sided limits are checked at every atom, so references with atoms of
/// their own (e.g. a point mass at zero) are handled.
template <typename Cdf>
  requires std::invocable<Cdf, double>
double ks_distance(const Spectrum& spec, Cdf&& reference_cdf) {
  if (spec.empty()) throw Error(ErrorKind::EmptySpectrum, "ks_distance on empty spectrum");
  const auto p = static_cast<double>(spec.size());
  double worst = 0.0;
  // Walk ascending over distinct atoms.
  std::size_t below = 0;
  std::size_t k = spec.size();
  while (k > 0) {
    const double x = spec[k - 1];
    std::size_t at = 0;
    while (k > 0 && spec[k - 1] == x) {
      ++at;
      --k;
    }
    const double left_emp = static_cast<double>(below) / p;
    const double right_emp = static_cast<double>(below + at) / p;
    const double left_ref = static_cast<double>(
        reference_cdf(std::nextafter(x, -std::numeric_limits<double>::infinity())));
    const double right_ref = static_cast<double>(reference_cdf(x));
    worst = std::max({worst, std::abs(left_emp - left_ref), std::abs(right_emp - right_ref)});
    below += at;
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Serialization: one-column CSV with header `eigenvalue`, or a JSON array.

inline void write_spectrum_csv(std::ostream& os, const Spectrum& spec) {
  os << "eigenvalue\n";
  for (double v : spec.values()) os << detail::format_double(v) << '\n';
}

inline Spectrum read_spectrum_csv(std::istream& is, Role role) {
  std::string line;
  if (!std::getline(is, line) || detail::trim(line) != "eigenvalue") {
    throw Error(ErrorKind::Io, "spectrum CSV must start with header 'eigenvalue'");
  }
  std::vector<double> raw;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    const auto cell = detail::trim(line);
    if (cell.empty()) continue;
    try {
      std::size_t used = 0;
      const std::string s(cell);
      raw.push_back(std::stod(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Io, "line " + std::to_string(lineno) + ": not a number: " + std::string(cell));
    }
  }
  return sort_spectrum(raw, role);
}

inline nlohmann::json spectrum_to_json(const Spectrum& spec) { return nlohmann::json(spec.vector()); }

inline Spectrum spectrum_from_json(const nlohmann::json& j, Role role) {
  if (!j.is_array()) throw Error(ErrorKind::Io, "spectrum JSON must be an array");
  return sort_spectrum(j.get<std::vector<double>>(), role);
}

}  // namespace specrecon
