#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "specrecon/error.hpp"
#include "specrecon/gaussian_lab.hpp"
#include "specrecon/parallel.hpp"
#include "specrecon/random.hpp"

namespace specrecon {

/// Order-free summary of a sample of trial values.
struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double q05 = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double q95 = 0.0;
  double max = 0.0;
};

/// Linear-interpolation quantile of an ascending range (Hyndman-Fan type 7).
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::nan("");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, 0.5);
}

inline Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  // Sum in sorted order so the result is independent of trial scheduling.
  double acc = 0.0;
  for (double v : sorted) acc += v;
  s.mean = acc / static_cast<double>(sorted.size());
  double ss = 0.0;
  for (double v : sorted) ss += (v - s.mean) * (v - s.mean);
  s.sd = sorted.size() > 1 ? std::sqrt(ss / static_cast<double>(sorted.size() - 1)) : 0.0;
  s.min = sorted.front();
  s.max = sorted.back();
  s.q05 = quantile_sorted(sorted, 0.05);
  s.q25 = quantile_sorted(sorted, 0.25);
  s.median = quantile_sorted(sorted, 0.5);
  s.q75 = quantile_sorted(sorted, 0.75);
  s.q95 = quantile_sorted(sorted, 0.95);
  return s;
}

inline nlohmann::json to_json(const Summary& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"sd", s.sd},       {"min", s.min},
          {"q05", s.q05},     {"q25", s.q25},   {"median", s.median}, {"q75", s.q75},
          {"q95", s.q95},     {"max", s.max}};
}

/// Runs fn(trial, trial_seed) for every trial on the worker pool and returns the
/// results in trial order.
template <typename Fn>
auto run_trials(std::size_t trials, std::uint64_t master_seed, Fn&& fn, std::size_t threads = 0) {
  using Result = std::invoke_result_t<Fn&, std::size_t, std::uint64_t>;
  std::vector<Result> out(trials);
  parallel_for(
      trials, [&](std::size_t t) { out[t] = fn(t, derive_seed(master_seed, t)); }, threads);
  return out;
}

using SpectrumStatistic = std::function<double(const Spectrum&)>;

/// Built-in per-trial reductions of the sample spectrum.
inline const std::map<std::string, SpectrumStatistic>& statistic_registry() {
  static const std::map<std::string, SpectrumStatistic> registry = {
      {"top_eigenvalue", [](const Spectrum& s) { return s[0]; }},
      {"bottom_eigenvalue", [](const Spectrum& s) { return s[s.size() - 1]; }},
      {"trace", [](const Spectrum& s) { return s.sum(); }},
      {"mean_eigenvalue", [](const Spectrum& s) { return s.sum() / static_cast<double>(s.size()); }},
  };
  return registry;
}

struct EnsembleRecord {
  ExperimentShape shape;
  std::string model;
  std::string statistic;
  std::vector<double> values;  // one per trial, in trial order
  Summary summary;
};

/// Simulates `trials` independent data sets (trial t uses derive_seed(master, t)) and
/// reduces each sample spectrum with the named statistic.
inline EnsembleRecord mc_ensemble(const ExperimentShape& shape, const GroundTruthModel& model, std::size_t trials,
                                  const std::string& statistic, std::size_t threads = 0) {
  if (trials == 0) throw Error(ErrorKind::InvalidArgument, "trials must be >= 1");
  const auto& registry = statistic_registry();
  const auto it = registry.find(statistic);
  if (it == registry.end()) throw Error(ErrorKind::UnknownStatistic, statistic);
  const auto& reduce = it->second;
  auto values = run_trials(
      trials, shape.master_seed(),
      [&](std::size_t, std::uint64_t seed) { return reduce(simulate_sample_spectrum(shape.with_seed(seed), model)); },
      threads);
  EnsembleRecord rec{shape, describe(model.kind()), statistic, std::move(values), {}};
  rec.summary = summarize(rec.values);
  return rec;
}

inline nlohmann::json to_json(const EnsembleRecord& rec) {
  return {{"config",
           {{"p", rec.shape.p()},
            {"n", rec.shape.n()},
            {"c", rec.shape.c()},
            {"master_seed", rec.shape.master_seed()},
            {"model", rec.model},
            {"statistic", rec.statistic}}},
          {"trials", rec.values.size()},
          {"statistics", to_json(rec.summary)}};
}

}  // namespace specrecon
