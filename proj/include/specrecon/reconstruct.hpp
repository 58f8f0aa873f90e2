#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "specrecon/detail/text.hpp"
#include "specrecon/ensemble.hpp"
#include "specrecon/error.hpp"
#include "specrecon/spectrum.hpp"

namespace specrecon {

/// Default half-width K of the exclusion window J^K.
inline constexpr std::size_t kDefaultHalfWidth = 2;

/// When 1 - sum/n falls to this value the inverse correction would amplify the sample
/// value twentyfold; such indices are reported invalid instead.
inline constexpr double kDenominatorFloor = 0.05;

/// Interior band [ceil(0.05 p), floor(0.95 p)] in 1-based indices, returned as a
/// 0-based half-open range.
inline std::pair<std::size_t, std::size_t> interior_range(std::size_t p) {
  const auto lo = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(p)));
  const auto hi = static_cast<std::size_t>(std::floor(0.95 * static_cast<double>(p)));
  const std::size_t first = lo == 0 ? 0 : lo - 1;
  return {first, std::max(first, hi)};
}

namespace detail {

inline void require_pole_free(double x, double z, std::size_t j) {
  if (std::abs(x - z) < kPoleGuard * std::abs(x) || x == z) {
    throw Error(ErrorKind::PoleHit, "eigenvalue " + std::to_string(j) + " = " + format_double(x) +
                                        " collides with " + format_double(z) +
                                        "; the spectral gap is too small for the formula");
  }
}

}  // namespace detail

/// Predicted sample-minus-truth shift of eigenvalue i from the ground truth:
///   -(sigma_i^2 / n) * sum_{j != i} sigma_j^2 / (sigma_j^2 - sample_{i*}),
/// where i* is the sample eigenvalue nearest sigma_i^2.
inline double forward_shift(const Spectrum& truth, const Spectrum& sample, std::size_t i, double n) {
  if (truth.size() != sample.size()) throw Error(ErrorKind::SizeMismatch, "truth and sample differ in length");
  if (i >= truth.size()) throw Error(ErrorKind::IndexOutOfRange, "index " + std::to_string(i));
  if (!(n >= 1.0)) throw Error(ErrorKind::InvalidArgument, "n must be >= 1");
  const double matched = sample[match_index(truth[i], sample)];
  double acc = 0.0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    if (j == i) continue;
    detail::require_pole_free(truth[j], matched, j);
    acc += truth[j] / (truth[j] - matched);
  }
  return -(truth[i] / n) * acc;
}

/// Large-c prediction of sample_i - sigma_i^2, with the sample spectrum standing in for
/// the restricted one and the window J^K_i = [i-K, i+K] removed from the sum.
inline double large_c_forward(double sigma2_i, const Spectrum& sample, std::size_t i, double n,
                              std::size_t half_width) {
  const std::size_t p = sample.size();
  if (2 * half_width + 1 >= p) {
    throw Error(ErrorKind::WindowTooWide, "2K+1 = " + std::to_string(2 * half_width + 1) +
                                              " leaves nothing of p = " + std::to_string(p));
  }
  if (i >= p) throw Error(ErrorKind::IndexOutOfRange, "index " + std::to_string(i));
  const auto window = ExclusionWindow::centered(i, half_width, p);
  const double sum = static_cast<double>(p) * stieltjes_sum(sample, sample[i], window);
  return -(sigma2_i / n) * sum;
}

/// Both sides of  -(1/p) sum_{j!=i} x_j/(x_j - x_i) = -(m/p) - x_i * (1/p) sum_{j!=i} 1/(x_j - x_i),
/// where m counts the contributing terms (m = p - 1 without ties).
inline std::pair<double, double> relative_error_identity(const Spectrum& sample, std::size_t i) {
  const double z = sample.at(i);
  const double lhs = -stieltjes_sum(sample, z);
  const double m = static_cast<double>(stieltjes_term_count(sample, z));
  const double rhs = -(m / static_cast<double>(sample.size())) - z * empirical_stieltjes(sample, z);
  return {lhs, rhs};
}

struct ReconstructionRecord {
  std::size_t index = 0;  // 0-based
  double sample = 0.0;
  double estimate = 0.0;
  std::optional<double> truth;
  std::optional<double> raw_rel_err;
  std::optional<double> recon_rel_err;
  bool valid = true;
};

struct ReconstructionReport {
  std::size_t p = 0;
  double c = 0.0;
  std::size_t half_width = kDefaultHalfWidth;
  double denominator_floor = kDenominatorFloor;
  std::vector<ReconstructionRecord> records;

  // Interior aggregates; error statistics are only present with ground truth.
  std::size_t interior_first = 0;  // 0-based, inclusive
  std::size_t interior_last = 0;   // 0-based, exclusive
  double valid_fraction = 0.0;
  std::optional<double> median_raw_rel_err;
  std::optional<double> median_recon_rel_err;
  std::optional<double> mean_raw_rel_err;
  std::optional<double> mean_recon_rel_err;
  std::optional<double> beat_fraction;  // share of interior indices where the estimate is closer
};

/// Fills the interior aggregates of a report whose records are complete.
inline void summarize_report(ReconstructionReport& report) {
  const auto [first, last] = interior_range(report.p);
  report.interior_first = first;
  report.interior_last = last;
  std::vector<double> raw;
  std::vector<double> recon;
  std::size_t valid = 0;
  std::size_t beat = 0;
  for (std::size_t k = first; k < last; ++k) {
    const auto& r = report.records[k];
    if (r.valid) ++valid;
    if (r.raw_rel_err && r.recon_rel_err) {
      raw.push_back(*r.raw_rel_err);
      recon.push_back(*r.recon_rel_err);
      if (*r.recon_rel_err < *r.raw_rel_err) ++beat;
    }
  }
  const auto count = static_cast<double>(last - first);
  report.valid_fraction = count > 0 ? static_cast<double>(valid) / count : 0.0;
  if (!raw.empty()) {
    const auto mean = [](const std::vector<double>& v) {
      double acc = 0.0;
      for (double x : v) acc += x;
      return acc / static_cast<double>(v.size());
    };
    report.mean_raw_rel_err = mean(raw);
    report.mean_recon_rel_err = mean(recon);
    report.median_raw_rel_err = median_of(raw);
    report.median_recon_rel_err = median_of(recon);
    report.beat_fraction = static_cast<double>(beat) / static_cast<double>(raw.size());
  }
}

/// Inverts the sample-to-truth relation index by index:
///   sigma_i^2 = sample_i / (1 - (1/n) sum_{j not in J^K_i} sample_j / (sample_j - sample_i)),
/// with n = c p. Indices whose denominator is <= the floor, whose sum has no terms, or
/// whose estimate would be negative keep the raw sample value and are marked invalid.
inline ReconstructionReport invert_spectrum(const Spectrum& sample, double c,
                                            std::size_t half_width = kDefaultHalfWidth,
                                            const std::optional<Spectrum>& truth = std::nullopt) {
  const std::size_t p = sample.size();
  if (p < 3) throw Error(ErrorKind::InvalidArgument, "reconstruction needs p >= 3");
  if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorKind::InvalidArgument, "c must be > 0");
  if (truth && truth->size() != p) throw Error(ErrorKind::SizeMismatch, "truth and sample differ in length");
  const double n = c * static_cast<double>(p);

  ReconstructionReport report;
  report.p = p;
  report.c = c;
  report.half_width = half_width;
  report.records.resize(p);
  for (std::size_t i = 0; i < p; ++i) {
    auto& rec = report.records[i];
    rec.index = i;
    rec.sample = sample[i];
    const auto window = ExclusionWindow::centered(i, half_width, p);
    std::size_t used = 0;
    double sum = 0.0;
    try {
      used = stieltjes_term_count(sample, sample[i], window);
      sum = static_cast<double>(p) * stieltjes_sum(sample, sample[i], window);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::PoleHit) throw;
      used = 0;
    }
    const double denom = 1.0 - sum / n;
    if (used == 0 || !(denom > report.denominator_floor)) {
      rec.estimate = sample[i];
      rec.valid = false;
    } else {
      rec.estimate = sample[i] / denom;
      if (rec.estimate < 0.0) {
        rec.estimate = 0.0;
        rec.valid = false;
      }
    }
    if (truth) {
      const double t = (*truth)[i];
      rec.truth = t;
      rec.raw_rel_err = std::abs(rec.sample - t) / t;
      rec.recon_rel_err = std::abs(rec.estimate - t) / t;
    }
  }
  summarize_report(report);
  return report;
}

/// CSV with header index,sample,estimate,truth,raw_rel_err,recon_rel_err,valid;
/// index is 1-based and absent ground truth leaves empty cells.
inline void write_report_csv(std::ostream& os, const ReconstructionReport& report) {
  using detail::format_double;
  os << "index,sample,estimate,truth,raw_rel_err,recon_rel_err,valid\n";
  const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& r : report.records) {
    os << (r.index + 1) << ',' << format_double(r.sample) << ',' << format_double(r.estimate) << ','
       << opt(r.truth) << ',' << opt(r.raw_rel_err) << ',' << opt(r.recon_rel_err) << ',' << (r.valid ? 1 : 0)
       << '\n';
  }
}

inline nlohmann::json to_json(const ReconstructionReport& report) {
  const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : report.records) {
    records.push_back({{"index", r.index + 1},
                       {"sample", r.sample},
                       {"estimate", r.estimate},
                       {"truth", opt(r.truth)},
                       {"raw_rel_err", opt(r.raw_rel_err)},
                       {"recon_rel_err", opt(r.recon_rel_err)},
                       {"valid", r.valid}});
  }
  return {{"config",
           {{"p", report.p},
            {"c", report.c},
            {"K", report.half_width},
            {"denominator_floor", report.denominator_floor}}},
          {"interior", {{"first", report.interior_first + 1}, {"last", report.interior_last}}},
          {"aggregate",
           {{"valid_fraction", report.valid_fraction},
            {"median_raw_rel_err", opt(report.median_raw_rel_err)},
            {"median_recon_rel_err", opt(report.median_recon_rel_err)},
            {"mean_raw_rel_err", opt(report.mean_raw_rel_err)},
            {"mean_recon_rel_err", opt(report.mean_recon_rel_err)},
            {"beat_fraction", opt(report.beat_fraction)}}},
          {"records", std::move(records)}};
}

/// h_j for every sample index j, plus the first index where h turns from positive to
/// non-positive.
struct HVector {
  std::vector<double> values;
  std::optional<std::size_t> sign_change;
};

/// h_j = sample_j - sigma_i^2 + (1/c)(sigma_i^2/p) sum_{s not in J_j} nu_s / (nu_s - sample_j).
/// J_j = [j-K, j+K-1] over restricted indices: the K restricted eigenvalues on either
/// side of the interval that holds sample_j.
inline HVector h_vector(const Spectrum& sample, double sigma2_i, const Spectrum& restricted, double c,
                        std::size_t half_width = kDefaultHalfWidth) {
  const std::size_t p = sample.size();
  if (restricted.size() + 1 != p) throw Error(ErrorKind::SizeMismatch, "restricted must have p - 1 values");
  if (!(c > 0.0)) throw Error(ErrorKind::InvalidArgument, "c must be > 0");
  const auto k = static_cast<std::ptrdiff_t>(half_width);
  HVector out;
  out.values.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    const auto jj = static_cast<std::ptrdiff_t>(j);
    const auto window = ExclusionWindow::span(j, jj - k, jj + k - 1, restricted.size());
    double sum = 0.0;
    for (std::size_t s = 0; s < restricted.size(); ++s) {
      if (window.contains(s)) continue;
      detail::require_pole_free(restricted[s], sample[j], s);
      sum += restricted[s] / (restricted[s] - sample[j]);
    }
    out.values[j] = sample[j] - sigma2_i + (sigma2_i / (c * static_cast<double>(p))) * sum;
  }
  for (std::size_t j = 1; j < p; ++j) {
    if (out.values[j - 1] > 0.0 && out.values[j] <= 0.0) {
      out.sign_change = j;
      break;
    }
  }
  return out;
}

/// a = c * (sample - truth).
inline double rescaled_a(double sigma2_hat, double sigma2_true, double c) {
  if (!(c > 0.0)) throw Error(ErrorKind::InvalidArgument, "c must be > 0");
  return c * (sigma2_hat - sigma2_true);
}

/// Sample-size condition for the forward approximation at eigenvalue i.
struct ConditionCheck {
  std::size_t i = 0;
  std::size_t i_star = 0;
  double gap = 0.0;
  double rhs = 0.0;          // lower bound on sqrt(n)
  double rhs_squared = 0.0;  // lower bound on n
  std::size_t n_required = 0;
  std::optional<std::size_t> n;
  bool satisfied = false;
  double C_universal = 1.0;
  double epsilon = 0.5;
};

/// sqrt(n) >= C * sigma_i / (eps * sqrt(gap_{i*})) * sqrt(sum_{j != i} sigma_j^2 / |sigma_j^2 - hint|),
/// with `hint` standing in for the matched sample eigenvalue and i* the ground-truth
/// index nearest to it.
inline ConditionCheck kl_condition(const Spectrum& truth, std::size_t i, double sample_hint, double C_universal,
                                   double epsilon, std::optional<std::size_t> n = std::nullopt) {
  if (truth.size() < 2) throw Error(ErrorKind::SingletonSpectrum, "condition needs p >= 2");
  if (i >= truth.size()) throw Error(ErrorKind::IndexOutOfRange, "index " + std::to_string(i));
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must lie in (0,1)");
  if (!(C_universal > 0.0)) throw Error(ErrorKind::InvalidArgument, "C must be > 0");
  ConditionCheck out;
  out.i = i;
  out.C_universal = C_universal;
  out.epsilon = epsilon;
  out.n = n;
  out.i_star = match_index(sample_hint, truth);
  out.gap = spectral_gap(truth, out.i_star);
  if (!(out.gap > 0.0)) throw Error(ErrorKind::ZeroGap, "spectral gap at " + std::to_string(out.i_star) + " is 0");
  double acc = 0.0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    if (j == i) continue;
    detail::require_pole_free(truth[j], sample_hint, j);
    acc += truth[j] / std::abs(truth[j] - sample_hint);
  }
  out.rhs = C_universal * std::sqrt(truth[i]) / (epsilon * std::sqrt(out.gap)) * std::sqrt(acc);
  out.rhs_squared = out.rhs * out.rhs;
  out.n_required = static_cast<std::size_t>(std::ceil(out.rhs_squared));
  if (n) out.satisfied = *n >= out.n_required;
  return out;
}

inline nlohmann::json to_json(const ConditionCheck& c) {
  return {{"i", c.i + 1},
          {"i_star", c.i_star + 1},
          {"gap", c.gap},
          {"rhs", c.rhs},
          {"n_required", c.n_required},
          {"n", c.n ? nlohmann::json(*c.n) : nlohmann::json(nullptr)},
          {"satisfied", c.satisfied},
          {"C_universal", c.C_universal},
          {"epsilon", c.epsilon}};
}

}  // namespace specrecon
