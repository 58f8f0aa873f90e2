#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "specrecon/config.hpp"
#include "specrecon/ensemble.hpp"
#include "specrecon/error.hpp"
#include "specrecon/gaussian_lab.hpp"
#include "specrecon/mp_reference.hpp"
#include "specrecon/reconstruct.hpp"
#include "specrecon/secular.hpp"
#include "specrecon/spectrum.hpp"
#include "specrecon/svg_plot.hpp"

namespace specrecon {

namespace exit_code {
inline constexpr int kSuccess = 0;
inline constexpr int kConfig = 2;
inline constexpr int kNumeric = 3;
inline constexpr int kIo = 4;
}  // namespace exit_code

inline int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ConfigParse: return exit_code::kConfig;
    case ErrorKind::Io: return exit_code::kIo;
    default: return exit_code::kNumeric;
  }
}

/// Lowercase hex SHA-256 of a byte string.
inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::Io, "SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int k = 0; k < len; ++k) {
    out += hex[digest[k] >> 4];
    out += hex[digest[k] & 0xF];
  }
  return out;
}

struct ExperimentResult {
  int exit_code = exit_code::kSuccess;
  std::filesystem::path output_dir;
  std::vector<std::string> files;  // relative to output_dir, sorted, manifest last
  nlohmann::json summary;
};

namespace detail {

/// Collects artifacts in memory, then writes them and the manifest in one serialized
/// pass.
class ArtifactSink {
 public:
  ArtifactSink(const ExperimentConfig& cfg, std::filesystem::path dir) : cfg_(cfg), dir_(std::move(dir)) {}

  void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

  void add_csv(const std::string& name, const std::string& content) {
    if (cfg_.wants(OutputFormat::Csv)) add(name, content);
  }
  void add_json(const std::string& name, const nlohmann::json& j) {
    if (cfg_.wants(OutputFormat::Json)) add(name, j.dump(2) + "\n");
  }
  void add_svg(const std::string& name, const std::vector<Series>& series, PlotKind kind, const PlotOptions& opt) {
    if (cfg_.wants(OutputFormat::Svg)) add(name, render_svg(series, kind, opt));
  }

  std::vector<std::string> flush() {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + dir_.string() + ": " + ec.message());
    std::sort(files_.begin(), files_.end());
    nlohmann::json listing = nlohmann::json::array();
    std::vector<std::string> names;
    for (const auto& [name, content] : files_) {
      write(name, content);
      listing.push_back({{"path", name}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
      names.push_back(name);
    }
    const nlohmann::json manifest = {{"tool", "specrecon"},
                                     {"command", std::string(to_string(cfg_.command))},
                                     {"config", to_json(cfg_)},
                                     {"files", listing}};
    write("manifest.json", manifest.dump(2) + "\n");
    names.push_back("manifest.json");
    return names;
  }

 private:
  void write(const std::string& name, const std::string& content) const {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string());
    out << content;
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
  }

  const ExperimentConfig& cfg_;
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

inline Centering centering_of(const ExperimentConfig& cfg) {
  return cfg.center ? Centering::SubtractColumnMeans : Centering::None;
}

inline Spectrum trial_spectrum(const ExperimentConfig& cfg, const ExperimentShape& shape,
                               const GroundTruthModel& model) {
  return sym_eigen(sample_covariance(gen_data_matrix(shape, model), centering_of(cfg))).spectrum(Role::Sample);
}

inline std::string spectrum_csv(const Spectrum& s) {
  std::ostringstream os;
  write_spectrum_csv(os, s);
  return os.str();
}

inline std::vector<double> index_axis(std::size_t p) {
  std::vector<double> x(p);
  for (std::size_t k = 0; k < p; ++k) x[k] = static_cast<double>(k + 1);
  return x;
}

inline double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

/// max_k |a_k - b_k| / max_k |a_k|.
inline double normwise_deviation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::SizeMismatch, "deviation needs equal lengths");
  double worst = 0.0;
  double norm = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    worst = std::max(worst, std::abs(a[k] - b[k]));
    norm = std::max(norm, std::abs(a[k]));
  }
  return norm > 0.0 ? worst / norm : worst;
}

/// Eigenvalues that are zero up to round-off (below 1e-8 of the mean eigenvalue) are
/// set to exactly zero, so a rank-deficient spectrum carries an exact atom at 0.
inline Spectrum snap_zeros(const Spectrum& s) {
  const double cut = 1e-8 * s.sum() / static_cast<double>(s.size());
  auto v = s.vector();
  for (double& x : v) {
    if (x < cut) x = 0.0;
  }
  return Spectrum(std::move(v), s.role());
}

// ---------------------------------------------------------------------------

inline nlohmann::json run_simulate(const ExperimentConfig& cfg, ArtifactSink& sink) {
  const auto shape = cfg.shape();
  const auto model = cfg.ground_truth();
  const auto data = gen_data_matrix(shape.with_seed(derive_seed(cfg.seed, 0)), model);
  const auto sample = sym_eigen(sample_covariance(data, centering_of(cfg))).spectrum(Role::Sample);

  std::ostringstream bin;
  write_data_binary(bin, data);
  sink.add("data.bin", bin.str());
  if (shape.p() * shape.n() <= 100000) {
    std::ostringstream csv;
    write_data_csv(csv, data);
    sink.add_csv("data.csv", csv.str());
  }
  sink.add_csv("spectrum.csv", spectrum_csv(sample));
  sink.add_csv("truth.csv", spectrum_csv(model.realized()));

  nlohmann::json statistics;
  for (const auto& [name, fn] : statistic_registry()) {
    const auto rec = mc_ensemble(shape, model, cfg.trials, name);
    statistics[name] = to_json(rec.summary);
    if (name == "top_eigenvalue") sink.add_json("ensemble.json", to_json(rec));
  }
  const auto x = index_axis(shape.p());
  sink.add_svg("spectrum.svg", {{"truth", x, model.realized().vector()}, {"sample", x, sample.vector()}},
               PlotKind::SpectrumOverlay, {"Sample vs ground truth spectrum", "index", "eigenvalue", false});
  return {{"p", shape.p()},
          {"n", shape.n()},
          {"c", shape.c()},
          {"model", describe(model.kind())},
          {"trials", cfg.trials},
          {"statistics", statistics}};
}

// ---------------------------------------------------------------------------

inline nlohmann::json run_reconstruct(const ExperimentConfig& cfg, ArtifactSink& sink) {
  const auto shape = cfg.shape();
  const auto model = cfg.ground_truth();
  const auto& truth = model.realized();
  const std::size_t p = shape.p();
  const auto reports = run_trials(cfg.trials, cfg.seed, [&](std::size_t, std::uint64_t seed) {
    return invert_spectrum(trial_spectrum(cfg, shape.with_seed(seed), model), shape.c(), cfg.K, truth);
  });

  // Index-wise medians across trials.
  ReconstructionReport agg;
  agg.p = p;
  agg.c = shape.c();
  agg.half_width = cfg.K;
  agg.records.resize(p);
  std::vector<double> buf(reports.size());
  const auto median_at = [&](std::size_t i, auto field) {
    for (std::size_t t = 0; t < reports.size(); ++t) buf[t] = field(reports[t].records[i]);
    return median_of(buf);
  };
  for (std::size_t i = 0; i < p; ++i) {
    auto& r = agg.records[i];
    r.index = i;
    r.sample = median_at(i, [](const ReconstructionRecord& x) { return x.sample; });
    r.estimate = median_at(i, [](const ReconstructionRecord& x) { return x.estimate; });
    r.truth = truth[i];
    r.raw_rel_err = median_at(i, [](const ReconstructionRecord& x) { return *x.raw_rel_err; });
    r.recon_rel_err = median_at(i, [](const ReconstructionRecord& x) { return *x.recon_rel_err; });
    std::size_t valid = 0;
    for (const auto& rep : reports) valid += rep.records[i].valid ? 1 : 0;
    r.valid = 2 * valid >= reports.size();
  }
  summarize_report(agg);

  std::vector<double> per_trial_beat;
  for (const auto& rep : reports) per_trial_beat.push_back(rep.beat_fraction.value_or(0.0));

  std::ostringstream csv;
  write_report_csv(csv, agg);
  sink.add_csv("report.csv", csv.str());
  sink.add_json("report.json", to_json(agg));

  std::vector<double> samples, estimates;
  for (const auto& r : agg.records) {
    samples.push_back(r.sample);
    estimates.push_back(r.estimate);
  }
  const auto x = index_axis(p);
  sink.add_svg("spectrum.svg",
               {{"truth", x, truth.vector()}, {"sample", x, samples}, {"reconstructed", x, estimates}},
               PlotKind::SpectrumOverlay, {"Covariance spectrum vs ground truth", "index", "eigenvalue", false});
  return {{"p", p},
          {"n", shape.n()},
          {"c", shape.c()},
          {"K", cfg.K},
          {"model", describe(model.kind())},
          {"trials", cfg.trials},
          {"interior", {{"first", agg.interior_first + 1}, {"last", agg.interior_last}}},
          {"median_raw_rel_err", *agg.median_raw_rel_err},
          {"median_recon_rel_err", *agg.median_recon_rel_err},
          {"mean_raw_rel_err", *agg.mean_raw_rel_err},
          {"mean_recon_rel_err", *agg.mean_recon_rel_err},
          {"beat_fraction", *agg.beat_fraction},
          {"valid_fraction", agg.valid_fraction},
          {"per_trial_beat_fraction", to_json(summarize(per_trial_beat))}};
}

// ---------------------------------------------------------------------------

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
};

inline nlohmann::json run_validate(const ExperimentConfig& cfg, ArtifactSink& sink, bool& all_passed) {
  const auto shape = cfg.shape();
  const auto model = cfg.ground_truth();
  const std::size_t p = shape.p();
  if (p < 3) throw Error(ErrorKind::InvalidArgument, "validate needs p >= 3");

  struct TrialChecks {
    bool interlaced = true;
    bool alternates = true;
    int total_mass = 1;
    double secular_vs_arrowhead = 0.0;
    double secular_vs_covariance = 0.0;
    double trace_error = 0.0;
    double identity_error = 0.0;
    std::size_t self_match_failures = 0;
    double scale_error = 0.0;
  };
  const auto trials = run_trials(cfg.trials, cfg.seed, [&](std::size_t t, std::uint64_t seed) {
    TrialChecks out;
    const auto cov = sample_covariance(gen_data_matrix(shape.with_seed(seed), model), centering_of(cfg));
    const auto full = sym_eigen(cov).spectrum(Role::Sample);
    const std::size_t i = t % p;
    const auto col = perturbation_column(cov, i);
    out.interlaced = interlacing_check(full, col.nu);
    const auto shift = signed_shift(full, col.nu);
    out.alternates = shift.alternates();
    out.total_mass = shift.total_mass();

    const auto prob = make_secular_problem(col);
    const auto roots = secular_roots(prob);
    const auto dense = sym_eigen(arrowhead_oracle(prob)).values;
    out.secular_vs_arrowhead = normwise_deviation(dense, roots);
    out.secular_vs_covariance = normwise_deviation(full.vector(), roots);
    double trace = prob.e_diag;
    for (double v : prob.nu.values()) trace += v;
    double root_sum = 0.0;
    for (double r : roots) root_sum += r;
    out.trace_error = std::abs(root_sum - trace) / std::max(1.0, std::abs(trace));

    for (std::size_t k = 0; k < p; ++k) {
      const auto [lhs, rhs] = relative_error_identity(full, k);
      out.identity_error = std::max(out.identity_error, std::abs(lhs - rhs) / (1.0 + std::abs(lhs)));
      if (match_index(full[k], full) != k && (k == 0 || full[k - 1] != full[k])) ++out.self_match_failures;
    }
    const auto base = invert_spectrum(full, shape.c(), cfg.K);
    const auto scaled = invert_spectrum(full.scaled(3.0), shape.c(), cfg.K);
    for (std::size_t k = 0; k < p; ++k) {
      const double a = 3.0 * base.records[k].estimate;
      const double b = scaled.records[k].estimate;
      out.scale_error = std::max(out.scale_error, std::abs(a - b) / std::max(std::abs(a), 1e-300));
    }
    return out;
  });

  std::vector<CheckResult> checks;
  const auto add = [&](std::string name, double value, double threshold, bool passed) {
    checks.push_back({std::move(name), passed, value, threshold});
  };
  double interlace_fail = 0, alt_fail = 0, mass_fail = 0, sec_arrow = 0, sec_cov = 0, trace_err = 0, ident = 0,
         match_fail = 0, scale_err = 0;
  for (const auto& t : trials) {
    interlace_fail += t.interlaced ? 0 : 1;
    alt_fail += t.alternates ? 0 : 1;
    mass_fail += t.total_mass == 1 ? 0 : 1;
    sec_arrow = std::max(sec_arrow, t.secular_vs_arrowhead);
    sec_cov = std::max(sec_cov, t.secular_vs_covariance);
    trace_err = std::max(trace_err, t.trace_error);
    ident = std::max(ident, t.identity_error);
    match_fail += static_cast<double>(t.self_match_failures);
    scale_err = std::max(scale_err, t.scale_error);
  }
  add("interlacing_failures", interlace_fail, 0.0, interlace_fail == 0);
  add("signed_shift_alternation_failures", alt_fail, 0.0, alt_fail == 0);
  add("signed_shift_mass_failures", mass_fail, 0.0, mass_fail == 0);
  add("secular_vs_arrowhead_rel_dev", sec_arrow, 1e-8, sec_arrow <= 1e-8);
  add("secular_vs_covariance_rel_dev", sec_cov, 1e-8, sec_cov <= 1e-8);
  add("secular_trace_rel_err", trace_err, 1e-10, trace_err <= 1e-10);
  add("stieltjes_identity_err", ident, 1e-12, ident <= 1e-12);
  add("self_match_failures", match_fail, 0.0, match_fail == 0);
  add("reconstruction_scale_equivariance_err", scale_err, 1e-12, scale_err <= 1e-12);
  double mp_norm = 0.0;
  for (double lambda : {0.1, 0.5, 1.0, 2.0}) {
    const MPLaw law(lambda);
    const double mass = mp_cdf(std::nextafter(law.upper_edge(), 0.0), law);
    mp_norm = std::max(mp_norm, std::abs(mass - 1.0));
  }
  add("mp_normalization_err", mp_norm, 1e-6, mp_norm <= 1e-6);

  all_passed = std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  std::ostringstream csv;
  csv << "check,passed,value,threshold\n";
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : checks) {
    csv << c.name << ',' << (c.passed ? 1 : 0) << ',' << format_double(c.value) << ',' << format_double(c.threshold)
        << '\n';
    list.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"threshold", c.threshold}});
  }
  sink.add_csv("checks.csv", csv.str());
  return {{"p", p}, {"n", shape.n()}, {"trials", cfg.trials}, {"passed", all_passed}, {"checks", list}};
}

// ---------------------------------------------------------------------------

struct ScalingPoint {
  double c = 0.0;
  std::size_t n = 0;
  double mean_abs_diff = 0.0;
  std::vector<double> a;  // c * trial-mean (sample - truth), per index
};

/// Trial-averaged bias sample_i - truth_i per index at one aspect ratio.
inline ScalingPoint scaling_point(const ExperimentConfig& cfg, const GroundTruthModel& model, double c) {
  const auto shape = ExperimentShape::from_ratio(cfg.p, c, cfg.seed);
  const auto& truth = model.realized();
  const std::size_t p = shape.p();
  const auto spectra = run_trials(cfg.trials, cfg.seed, [&](std::size_t, std::uint64_t seed) {
    return trial_spectrum(cfg, shape.with_seed(seed), model).vector();
  });
  std::vector<double> diff(p, 0.0);
  for (const auto& s : spectra) {
    for (std::size_t i = 0; i < p; ++i) diff[i] += s[i] - truth[i];
  }
  ScalingPoint pt;
  pt.c = shape.c();
  pt.n = shape.n();
  const auto [first, last] = interior_range(p);
  double acc = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    diff[i] /= static_cast<double>(spectra.size());
    pt.a.push_back(pt.c * diff[i]);
    if (i >= first && i < last) acc += std::abs(diff[i]);
  }
  pt.mean_abs_diff = acc / static_cast<double>(last - first);
  return pt;
}

/// Interior median of |a_i(c2) - a_i(c1)| / |a_i(c1)|.
inline double a_stability(const ScalingPoint& c1, const ScalingPoint& c2) {
  const auto [first, last] = interior_range(c1.a.size());
  std::vector<double> rel;
  for (std::size_t i = first; i < last; ++i) {
    if (c1.a[i] != 0.0) rel.push_back(std::abs(c2.a[i] - c1.a[i]) / std::abs(c1.a[i]));
  }
  if (rel.empty()) throw Error(ErrorKind::InvalidArgument, "no interior index with nonzero a");
  return median_of(rel);
}

inline nlohmann::json run_scaling(const ExperimentConfig& cfg, ArtifactSink& sink) {
  const auto model = cfg.ground_truth();
  std::vector<ScalingPoint> points;
  for (double c : cfg.c_values) points.push_back(scaling_point(cfg, model, c));
  std::vector<double> cs, errs;
  std::ostringstream csv;
  csv << "c,n,mean_abs_diff,median_a\n";
  nlohmann::json rows = nlohmann::json::array();
  const auto [first, last] = interior_range(cfg.p);
  for (const auto& pt : points) {
    const double med_a = median_of(std::vector<double>(pt.a.begin() + static_cast<std::ptrdiff_t>(first),
                                                       pt.a.begin() + static_cast<std::ptrdiff_t>(last)));
    cs.push_back(pt.c);
    errs.push_back(pt.mean_abs_diff);
    csv << format_double(pt.c) << ',' << pt.n << ',' << format_double(pt.mean_abs_diff) << ','
        << format_double(med_a) << '\n';
    rows.push_back({{"c", pt.c}, {"n", pt.n}, {"mean_abs_diff", pt.mean_abs_diff}, {"median_a", med_a}});
  }
  const double slope = loglog_slope(cs, errs);
  const double stability = a_stability(points[points.size() - 2], points.back());
  sink.add_csv("scaling.csv", csv.str());
  sink.add_svg("error_vs_c.svg", {{"mean interior |sample - truth|", cs, errs}}, PlotKind::ErrorVsC,
               {"Interior bias vs aspect ratio", "c", "mean |sample - truth|", true});
  return {{"p", cfg.p},
          {"trials", cfg.trials},
          {"model", describe(model.kind())},
          {"points", rows},
          {"loglog_slope", slope},
          {"a_stability", stability}};
}

// ---------------------------------------------------------------------------

/// CDF of the limiting spectrum for a general population, by trapezoid integration of
/// the fixed-point density on `grid` plus the atom at zero when c < 1.
struct NumericCdf {
  std::vector<double> grid;
  std::vector<double> cumulative;
  double zero_mass = 0.0;

  double operator()(double x) const {
    if (x < 0.0) return 0.0;
    if (x < grid.front()) return zero_mass;
    if (x >= grid.back()) return std::min(1.0, zero_mass + cumulative.back());
    const auto it = std::upper_bound(grid.begin(), grid.end(), x);
    const auto k = static_cast<std::size_t>(it - grid.begin()) - 1;
    const double t = (x - grid[k]) / (grid[k + 1] - grid[k]);
    return std::min(1.0, zero_mass + cumulative[k] + t * (cumulative[k + 1] - cumulative[k]));
  }
};

inline nlohmann::json run_mp_compare(const ExperimentConfig& cfg, ArtifactSink& sink) {
  const auto shape = cfg.shape();
  const auto model = cfg.ground_truth();
  const double c = shape.c();
  const bool null_case = std::holds_alternative<IdentityModel>(model.kind());
  const MPLaw law = MPLaw::from_aspect_ratio(c);
  const auto pop = PopulationMeasure::uniform(model.realized().vector());

  const double top = model.realized()[0] * law.upper_edge();
  constexpr std::size_t kGrid = 400;
  std::vector<double> grid(kGrid);
  for (std::size_t k = 0; k < kGrid; ++k) grid[k] = 1.15 * top * (static_cast<double>(k) + 0.5) / kGrid;
  const auto limit = limit_density(pop, c, grid, cfg.eta);

  NumericCdf numeric{grid, std::vector<double>(kGrid, 0.0), law.point_mass_at_zero()};
  for (std::size_t k = 1; k < kGrid; ++k) {
    numeric.cumulative[k] = numeric.cumulative[k - 1] + 0.5 * (grid[k] - grid[k - 1]) *
                                                            (limit.density_values[k] + limit.density_values[k - 1]);
  }

  const auto spectra = run_trials(cfg.trials, cfg.seed, [&](std::size_t, std::uint64_t seed) {
    return snap_zeros(trial_spectrum(cfg, shape.with_seed(seed), model));
  });
  std::vector<double> ks;
  std::vector<double> zero_counts;
  for (const auto& s : spectra) {
    ks.push_back(null_case ? ks_distance(s, [&](double x) { return mp_cdf(x, law); }) : ks_distance(s, numeric));
    zero_counts.push_back(static_cast<double>(std::count(s.values().begin(), s.values().end(), 0.0)));
  }

  std::vector<double> reference(kGrid);
  for (std::size_t k = 0; k < kGrid; ++k) reference[k] = null_case ? mp_density(grid[k], law) : limit.density_values[k];
  std::ostringstream dens;
  write_density_csv(dens, grid, reference);
  sink.add_csv("density.csv", dens.str());
  std::ostringstream fp;
  write_density_csv(fp, grid, limit.density_values);
  sink.add_csv("fixed_point_density.csv", fp.str());

  // Histogram of the first trial's non-zero eigenvalues, scaled to the continuous part.
  constexpr std::size_t kBins = 50;
  const double width = grid.back() / kBins;
  std::vector<double> hx(kBins), hy(kBins, 0.0);
  for (std::size_t b = 0; b < kBins; ++b) hx[b] = (static_cast<double>(b) + 0.5) * width;
  for (double v : spectra.front().values()) {
    if (v <= 0.0) continue;
    const auto b = std::min(kBins - 1, static_cast<std::size_t>(v / width));
    hy[b] += 1.0 / (static_cast<double>(shape.p()) * width);
  }
  sink.add_svg("density.svg",
               {{null_case ? "Marchenko-Pastur" : "limit (fixed point)", grid, reference},
                {"fixed point", grid, limit.density_values},
                {"sample histogram", hx, hy}},
               PlotKind::DensityOverlay, {"Sample spectrum vs limiting density", "x", "density", false});

  const double expected_zeros = static_cast<double>(shape.p() > shape.n() ? shape.p() - shape.n() : 0);
  return {{"p", shape.p()},
          {"n", shape.n()},
          {"c", c},
          {"model", describe(model.kind())},
          {"reference", null_case ? "marchenko_pastur" : "fixed_point"},
          {"trials", cfg.trials},
          {"eta", cfg.eta},
          {"ks", to_json(summarize(ks))},
          {"ks_median", median_of(ks)},
          {"ks_max", *std::max_element(ks.begin(), ks.end())},
          {"zero_eigenvalues", to_json(summarize(zero_counts))},
          {"expected_zero_eigenvalues", expected_zeros},
          {"mp_lower_edge", law.lower_edge()},
          {"mp_upper_edge", law.upper_edge()}};
}

// ---------------------------------------------------------------------------

struct InsertTrial {
  std::vector<double> ratios;
  double fraction_below = 0.0;
  std::optional<std::size_t> sign_change;
  std::size_t insertion_index = 0;
  double secular_dev = 0.0;
  bool interlaced = true;
};

inline InsertTrial insert_trial(const ExperimentConfig& cfg, const ExperimentShape& shape,
                                const GroundTruthModel& model, std::size_t i) {
  const auto cov = sample_covariance(gen_data_matrix(shape, model), centering_of(cfg));
  const auto full = sym_eigen(cov).spectrum(Role::Sample);
  const auto col = perturbation_column(cov, i);
  InsertTrial out;
  out.interlaced = interlacing_check(full, col.nu);
  out.secular_dev = normwise_deviation(full.vector(), secular_roots(make_secular_problem(col)));
  const auto profile = locality_profile(full, col.nu, i);
  out.ratios = profile.ratios;
  out.insertion_index = profile.insertion_index;
  out.fraction_below = profile.fraction_below(10.0, 10);
  out.sign_change = h_vector(full, model.realized()[i], col.nu, shape.c(), cfg.K).sign_change;
  return out;
}

inline nlohmann::json run_insert(const ExperimentConfig& cfg, ArtifactSink& sink) {
  const auto shape = cfg.shape();
  const auto model = cfg.ground_truth();
  const std::size_t p = shape.p();
  if (p < 3) throw Error(ErrorKind::InvalidArgument, "insert needs p >= 3");
  const std::size_t i1 = cfg.insert_index == 0 ? p / 2 : cfg.insert_index;
  if (i1 > p) throw Error(ErrorKind::IndexOutOfRange, "insert_index " + std::to_string(i1) + " exceeds p");
  const std::size_t i = i1 - 1;
  const auto trials = run_trials(cfg.trials, cfg.seed, [&](std::size_t, std::uint64_t seed) {
    return insert_trial(cfg, shape.with_seed(seed), model, i);
  });

  std::vector<double> fractions, offsets, sec;
  std::size_t missing = 0, violations = 0;
  for (const auto& t : trials) {
    fractions.push_back(t.fraction_below);
    sec.push_back(t.secular_dev);
    if (!t.interlaced) ++violations;
    if (t.sign_change) {
      offsets.push_back(static_cast<double>(*t.sign_change) - static_cast<double>(i));
    } else {
      ++missing;
    }
  }
  std::ostringstream csv;
  csv << "index,mean_ratio,median_ratio\n";
  std::vector<double> mean_ratio(p), x = index_axis(p);
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> col;
    for (const auto& t : trials) {
      if (!std::isnan(t.ratios[j])) col.push_back(t.ratios[j]);
    }
    mean_ratio[j] = col.empty() ? std::nan("") : mean_of(col);
    const double med = col.empty() ? std::nan("") : median_of(col);
    csv << (j + 1) << ',' << (col.empty() ? std::string() : format_double(mean_ratio[j])) << ','
        << (col.empty() ? std::string() : format_double(med)) << '\n';
  }
  sink.add_csv("locality.csv", csv.str());
  sink.add_svg("locality.svg", {{"mean movement ratio", x, mean_ratio}}, PlotKind::SpectrumOverlay,
               {"Eigenvalue movement after one insertion", "index", "ratio", false});

  nlohmann::json offset_json = nullptr;
  if (!offsets.empty()) offset_json = median_of(offsets);
  return {{"p", p},
          {"n", shape.n()},
          {"c", shape.c()},
          {"insert_index", i1},
          {"trials", cfg.trials},
          {"interlacing_violations", violations},
          {"fraction_below_0.1", to_json(summarize(fractions))},
          {"median_fraction_below_0.1", median_of(fractions)},
          {"sign_change_median_offset", offset_json},
          {"sign_change_missing", missing},
          {"secular_max_rel_dev", *std::max_element(sec.begin(), sec.end())}};
}

}  // namespace detail

/// Runs one configured study and writes its artifacts plus manifest.json into
/// `out` (or cfg.output_dir). Numeric and I/O failures propagate as Error; a
/// validate run with failing checks still writes its files and reports exit code 3.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       const std::optional<std::filesystem::path>& out = std::nullopt) {
  ExperimentResult result;
  result.output_dir = out.value_or(std::filesystem::path(cfg.output_dir));
  detail::ArtifactSink sink(cfg, result.output_dir);
  sink.add("config.txt", serialize_config(cfg));
  nlohmann::json body;
  switch (cfg.command) {
    case Command::Simulate: body = detail::run_simulate(cfg, sink); break;
    case Command::Reconstruct: body = detail::run_reconstruct(cfg, sink); break;
    case Command::Validate: {
      bool passed = true;
      body = detail::run_validate(cfg, sink, passed);
      if (!passed) result.exit_code = exit_code::kNumeric;
      break;
    }
    case Command::Scaling: body = detail::run_scaling(cfg, sink); break;
    case Command::MpCompare: body = detail::run_mp_compare(cfg, sink); break;
    case Command::Insert: body = detail::run_insert(cfg, sink); break;
  }
  result.summary = {{"command", std::string(to_string(cfg.command))},
                    {"seed", cfg.seed},
                    {"config", to_json(cfg)},
                    {"result", body}};
  sink.add_json("summary.json", result.summary);
  result.files = sink.flush();
  return result;
}

}  // namespace specrecon
