#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "specrecon/ensemble.hpp"
#include "specrecon/gaussian_lab.hpp"
#include "specrecon/reconstruct.hpp"
#include "specrecon/secular.hpp"

using namespace specrecon;

namespace {

Spectrum S(std::initializer_list<double> v, Role r = Role::Sample) { return sort_spectrum(v, r); }

}  // namespace

TEST(InteriorRange, Bounds) {
  EXPECT_EQ(interior_range(200), (std::pair<std::size_t, std::size_t>{9, 190}));
  EXPECT_EQ(interior_range(20), (std::pair<std::size_t, std::size_t>{0, 19}));
}

TEST(ForwardShift, HandValues) {
  EXPECT_DOUBLE_EQ(forward_shift(S({4, 1}, Role::GroundTruth), S({2, 0.5}), 0, 10.0), 0.4);
  const auto t = S({5, 3, 2}, Role::GroundTruth);
  const double expect = -(3.0 / 7.0) * (5.0 / 2.0 + 2.0 / -1.0);
  EXPECT_DOUBLE_EQ(forward_shift(t, t.with_role(Role::Sample), 1, 7.0), expect);
}

TEST(ForwardShift, PredictsSimulatedSpectrum) {
  // First-order formulas: the truth-based one needs large c, the sample-based one
  // already halves the raw error at c = 16.
  const std::size_t p = 200;
  const auto model = GroundTruthModel::make(LinearModel{1, 10}, p);
  const auto [first, last] = interior_range(p);
  for (double c : {16.0, 64.0}) {
    const auto shape = ExperimentShape::from_ratio(p, c, 21);
    const auto sample = simulate_sample_spectrum(shape, model);
    std::vector<double> fwd, large, raw;
    for (std::size_t i = first; i < last; ++i) {
      const double diff = sample[i] - model.realized()[i];
      fwd.push_back(std::abs(forward_shift(model.realized(), sample, i, shape.n()) - diff) / sample[i]);
      large.push_back(std::abs(large_c_forward(model.realized()[i], sample, i, shape.n(), 2) - diff) / sample[i]);
      raw.push_back(std::abs(diff) / sample[i]);
    }
    EXPECT_LT(median_of(fwd), 0.7 * median_of(raw)) << "c = " << c;
    EXPECT_LT(median_of(large), 0.5 * median_of(raw)) << "c = " << c;
  }
}

TEST(LargeCForward, SignsAndWindow) {
  const auto s = S({3, 2, 1});
  // sigma2 above everything: all denominators negative, predicted difference positive.
  EXPECT_GT(large_c_forward(10.0, s, 0, 30.0, 0), 0.0);
  // Window {0,1,2} leaves the terms at 2 and 1.
  EXPECT_DOUBLE_EQ(large_c_forward(2.0, S({5, 4, 3, 2, 1}), 1, 10.0, 1), -(2.0 / 10.0) * (2.0 / (2.0 - 4.0) + 1.0 / (1.0 - 4.0)));
  try {
    large_c_forward(1.0, s, 1, 10.0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::WindowTooWide);
  }
}

TEST(LargeCForward, IdentityModelMeanDifferenceSign) {
  // A flat population has no gaps, so only the direction of the bias is first-order.
  const std::size_t p = 400;
  const auto model = GroundTruthModel::make(IdentityModel{}, p);
  const auto shape = ExperimentShape::from_ratio(p, 8.0, 5);
  const int trials = 8;
  std::vector<double> mean_diff(p, 0.0), mean_pred(p, 0.0);
  for (int t = 0; t < trials; ++t) {
    const auto s = simulate_sample_spectrum(shape.with_seed(derive_seed(5, static_cast<std::uint64_t>(t))), model);
    for (std::size_t i = 0; i < p; ++i) {
      mean_diff[i] += (s[i] - 1.0) / trials;
      mean_pred[i] += large_c_forward(1.0, s, i, shape.n(), kDefaultHalfWidth) / trials;
    }
  }
  const auto [first, last] = interior_range(p);
  std::size_t checked = 0, agree = 0;
  for (std::size_t i = first; i < last; ++i) {
    if (std::abs(mean_diff[i]) < 0.2) continue;
    ++checked;
    if (mean_pred[i] * mean_diff[i] > 0 && std::abs(mean_pred[i]) < std::abs(mean_diff[i])) ++agree;
  }
  ASSERT_GT(checked, 100u);
  EXPECT_EQ(agree, checked);
}

TEST(StieltjesIdentity, ExactAgreement) {
  const auto s = S({9.5, 7, 6.2, 3, 1.5, 0.25});
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto [lhs, rhs] = relative_error_identity(s, i);
    EXPECT_NEAR(lhs, rhs, 1e-14 * (1 + std::abs(lhs)));
  }
}

TEST(InvertSpectrum, FlatSpectrumFallsBack) {
  const auto flat = Spectrum(std::vector<double>(10, 2.0), Role::Sample);
  const auto rep = invert_spectrum(flat, 2.0);
  for (const auto& r : rep.records) {
    EXPECT_EQ(r.estimate, 2.0);
    EXPECT_FALSE(r.valid);
  }
}

TEST(InvertSpectrum, TopEigenvalueCorrectedDownward) {
  const auto s = S({50, 1.2, 1.1, 1.0, 0.9, 0.8, 0.7});
  const auto rep = invert_spectrum(s, 4.0, 1);
  EXPECT_LT(rep.records[0].estimate, 50.0);
  EXPECT_GT(rep.records[0].estimate, 45.0);
  EXPECT_TRUE(rep.records[0].valid);
}

TEST(InvertSpectrum, ScaleEquivariant) {
  const auto s = simulate_sample_spectrum(ExperimentShape(60, 120, 9), GroundTruthModel::make(LinearModel{1, 10}, 60));
  const auto a = invert_spectrum(s, 2.0);
  const auto b = invert_spectrum(s.scaled(7.5), 2.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_NEAR(b.records[i].estimate, 7.5 * a.records[i].estimate, 1e-12 * b.records[i].estimate);
    EXPECT_EQ(a.records[i].valid, b.records[i].valid);
  }
}

TEST(InvertSpectrum, ReportCsvHeaderAndCells) {
  const auto truth = S({4, 2, 1}, Role::GroundTruth);
  const auto rep = invert_spectrum(S({5, 2, 0.8}), 3.0, 0, truth);
  std::ostringstream os;
  write_report_csv(os, rep);
  const auto text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "index,sample,estimate,truth,raw_rel_err,recon_rel_err,valid");
  EXPECT_NE(text.find("\n1,5,"), std::string::npos);
  std::ostringstream bare;
  write_report_csv(bare, invert_spectrum(S({5, 2, 0.8}), 3.0, 0));
  EXPECT_NE(bare.str().find(",,,"), std::string::npos);
  const auto j = to_json(rep);
  EXPECT_EQ(j["records"][0]["index"], 1);
  EXPECT_EQ(j["config"]["K"], 0);
}

TEST(InvertSpectrum, BeatsRawOnSimulatedData) {
  const std::size_t p = 200;
  const auto model = GroundTruthModel::make(LinearModel{1, 10}, p);
  const auto rep = invert_spectrum(simulate_sample_spectrum(ExperimentShape::from_ratio(p, 2.0, 1), model), 2.0,
                                   kDefaultHalfWidth, model.realized());
  ASSERT_TRUE(rep.beat_fraction.has_value());
  EXPECT_GT(*rep.beat_fraction, 0.6);
  EXPECT_LT(*rep.median_recon_rel_err, *rep.median_raw_rel_err);
}

TEST(HVector, ZeroAndDominantInsertions) {
  const auto full = S({5.2, 4.2, 3.3, 2.5, 1.9, 0.9});
  const auto nu = S({5, 4, 3, 2, 1}, Role::Restricted);
  const auto zero = h_vector(full, 0.0, nu, 10.0, 1);
  for (std::size_t j = 0; j < full.size(); ++j) EXPECT_DOUBLE_EQ(zero.values[j], full[j]);
  EXPECT_FALSE(zero.sign_change.has_value());
  const auto big = h_vector(full, 100.0, nu, 1000.0, 1);
  for (double h : big.values) EXPECT_LT(h, 0.0);
}

TEST(HVector, SignChangeNearInsertion) {
  const std::size_t p = 200;
  const auto model = GroundTruthModel::make(LinearModel{1, 10}, p);
  const auto shape = ExperimentShape::from_ratio(p, 16.0, 2);
  const Matrix cov = sample_covariance(gen_data_matrix(shape, model));
  const std::size_t i = 99;
  const auto col = perturbation_column(cov, i);
  const auto h = h_vector(sym_eigen(cov).spectrum(), model.realized()[i], col.nu, 16.0);
  ASSERT_TRUE(h.sign_change.has_value());
  EXPECT_LE(std::abs(static_cast<long>(*h.sign_change) - static_cast<long>(i)), 4);
}

TEST(RescaledA, Values) {
  EXPECT_DOUBLE_EQ(rescaled_a(1.0, 1.0, 3.0), 0.0);
  EXPECT_NEAR(rescaled_a(1.1, 1.0, 2.0), 0.2, 1e-15);
  EXPECT_THROW(rescaled_a(1, 1, 0), Error);
}

TEST(KlCondition, HandValueAndScaling) {
  const auto truth = S({4, 1}, Role::GroundTruth);
  const auto c1 = kl_condition(truth, 0, 4.0, 1.0, 0.5, 2);
  EXPECT_NEAR(c1.rhs, 4.0 / 3.0, 1e-15);
  EXPECT_EQ(c1.n_required, 2u);
  EXPECT_TRUE(c1.satisfied);
  const auto c2 = kl_condition(truth, 0, 4.0, 2.0, 0.5);
  EXPECT_DOUBLE_EQ(c2.rhs_squared, 4.0 * c1.rhs_squared);
  EXPECT_EQ(c2.n_required, 8u);
}

TEST(KlCondition, GapMonotoneAndErrors) {
  const auto narrow = kl_condition(S({5, 3, 2.9, 1}, Role::GroundTruth), 1, 3.0, 1.0, 0.5);
  const auto wide = kl_condition(S({5, 3, 2.0, 1}, Role::GroundTruth), 1, 3.0, 1.0, 0.5);
  EXPECT_LE(wide.n_required, narrow.n_required);
  try {
    kl_condition(S({3, 3}, Role::GroundTruth), 0, 3.0, 1.0, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroGap);
  }
  EXPECT_THROW(kl_condition(S({4, 1}, Role::GroundTruth), 0, 4.0, 1.0, 1.5), Error);
}
