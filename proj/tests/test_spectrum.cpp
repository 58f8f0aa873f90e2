#include <gtest/gtest.h>

#include <sstream>

#include "specrecon/spectrum.hpp"

using namespace specrecon;

namespace {

Spectrum S(std::initializer_list<double> v, Role r = Role::Sample) { return sort_spectrum(v, r); }

// Six full eigenvalues interlacing five restricted ones.
const std::initializer_list<double> kFull = {5.2, 4.2, 3.3, 2.5, 1.9, 0.9};
const std::initializer_list<double> kNu = {5, 4, 3, 2, 1};

}  // namespace

TEST(SortSpectrum, SortsDescending) {
  const auto s = S({3, 1, 2});
  EXPECT_EQ(s.vector(), (std::vector<double>{3, 2, 1}));
  EXPECT_EQ(s.size(), 3u);
}

TEST(SortSpectrum, EmptyIsAllowed) { EXPECT_EQ(S({}).size(), 0u); }

TEST(SortSpectrum, ClampsRoundoffNegatives) {
  const auto s = S({1e-17, 1, -1e-12});
  EXPECT_EQ(s.vector(), (std::vector<double>{1, 1e-17, 0}));
}

TEST(SortSpectrum, RejectsNegativeAndNonFinite) {
  try {
    S({1, -0.5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NegativeEigenvalue);
  }
  try {
    S({1, std::nan("")});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFinite);
  }
}

TEST(SpectrumType, ConstructorEnforcesOrder) {
  EXPECT_THROW(Spectrum({1, 2}, Role::Sample), Error);
  EXPECT_NO_THROW(Spectrum({2, 2, 1}, Role::Sample));
}

TEST(SpectralGap, Examples) {
  EXPECT_DOUBLE_EQ(spectral_gap(S({5, 4, 3, 2, 1}), 2), 1.0);
  EXPECT_DOUBLE_EQ(spectral_gap(S({5, 4.5, 3, 2, 1}), 1), 0.5);
  EXPECT_DOUBLE_EQ(spectral_gap(S({5, 4, 3, 2, 1}), 0), 1.0);
}

TEST(SpectralGap, Errors) {
  try {
    spectral_gap(S({1}), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingletonSpectrum);
  }
  try {
    spectral_gap(S({2, 1}), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IndexOutOfRange);
  }
}

TEST(MatchIndex, InsertedPointExample) {
  EXPECT_EQ(match_index(4.4, S({7, 6, 5, 4.5, 4, 3, 2})), 3u);
}

TEST(MatchIndex, SingleAndTies) {
  EXPECT_EQ(match_index(4.0, S({4})), 0u);
  EXPECT_EQ(match_index(4.5, S({5, 4})), 0u);
  EXPECT_THROW(match_index(1.0, S({})), Error);
}

TEST(MatchIndex, SelfMatching) {
  const auto s = S({9, 7.5, 7, 3, 2.2, 0.1});
  for (std::size_t j = 0; j < s.size(); ++j) EXPECT_EQ(match_index(s[j], s), j);
}

TEST(StieltjesSum, HandValues) {
  EXPECT_DOUBLE_EQ(stieltjes_sum(S({2}), 1.0), 2.0);
  EXPECT_DOUBLE_EQ(stieltjes_sum(S({4, 2, 1}), 3.0), 0.5);
  EXPECT_DOUBLE_EQ(stieltjes_sum(S({9, 4, 2, 0.5}), 0.0), 1.0);
}

TEST(StieltjesSum, SkipsExactAtomButRejectsNearPole) {
  const auto s = S({4, 2, 1});
  // The atom at z is left out: (1/3)(4/2 + 1/(-1)).
  EXPECT_DOUBLE_EQ(stieltjes_sum(s, 2.0), 1.0 / 3.0);
  EXPECT_EQ(stieltjes_term_count(s, 2.0), 2u);
  try {
    stieltjes_sum(s, 2.0 * (1 + 1e-16) + 1e-15);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::PoleHit);
  }
}

TEST(StieltjesSum, WindowExcludesNeighbours) {
  const auto s = S({5, 4, 3, 2, 1});
  const auto w = ExclusionWindow::centered(2, 1, 5);
  EXPECT_EQ(w.first, 1u);
  EXPECT_EQ(w.last, 3u);
  EXPECT_DOUBLE_EQ(stieltjes_sum(s, 3.0, w), (5.0 / 2.0 + 1.0 / -2.0) / 5.0);
}

TEST(StieltjesSum, IncreasingBetweenEigenvalues) {
  const auto s = S({6, 3, 1});
  double prev = stieltjes_sum(s, 1.1);
  for (double z = 1.2; z < 2.95; z += 0.1) {
    const double v = stieltjes_sum(s, z);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(ExclusionWindow, ClippedAndEmpty) {
  const auto w = ExclusionWindow::centered(0, 2, 10);
  EXPECT_EQ(w.first, 0u);
  EXPECT_EQ(w.last, 2u);
  const auto e = ExclusionWindow::span(0, -3, -1, 10);
  EXPECT_EQ(e.excluded_count(), 0u);
  EXPECT_FALSE(e.contains(0));
}

TEST(SignedShift, ExampleTableValues) {
  const auto g = signed_shift(S(kFull), S(kNu, Role::Restricted));
  const std::vector<std::pair<double, int>> table = {
      {-1.0, 0}, {0.9, 1}, {0.95, 1}, {1.0, 0}, {1.5, 0}, {1.9, 1}, {2.0, 0}, {2.5, 1}, {2.7, 1},
      {3.0, 0},  {3.3, 1}, {3.9, 1},  {4.0, 0}, {4.2, 1}, {4.9, 1}, {5.0, 0}, {5.2, 1}, {100.0, 1}};
  for (const auto& [x, v] : table) EXPECT_EQ(g.eval(x), v) << "x = " << x;
  EXPECT_TRUE(g.alternates());
  EXPECT_EQ(g.total_mass(), 1);
  EXPECT_EQ(g.breakpoints().size(), 11u);
}

TEST(SignedShift, PureInsertionIsIndicator) {
  const auto g = signed_shift(S({3, 2, 0.5}), S({3, 2}, Role::Restricted));
  EXPECT_EQ(g.eval(0.4), 0);
  EXPECT_EQ(g.eval(0.5), 1);
  EXPECT_EQ(g.eval(2.5), 1);
  EXPECT_EQ(g.eval(10), 1);
}

TEST(SignedShift, SizeMismatch) { EXPECT_THROW(signed_shift(S({3, 2}), S({3, 2})), Error); }

TEST(ShiftRatio, DescendingAndAscendingForms) {
  const auto full = S(kFull);
  const auto nu = S(kNu, Role::Restricted);
  EXPECT_NEAR(shift_ratio(full, nu, 4), 0.9, 1e-12);
  EXPECT_NEAR(shift_ratio(full, nu, 4, RatioConvention::Ascending), 0.1, 1e-12);
}

TEST(ShiftRatio, EndpointAndErrors) {
  const auto nu = S({3, 2, 1}, Role::Restricted);
  EXPECT_DOUBLE_EQ(shift_ratio(S({3.5, 2, 1.5, 0.5}), nu, 1), 0.0);
  EXPECT_THROW(shift_ratio(S({3.5, 2, 1.5, 0.5}), nu, 0), Error);
  try {
    shift_ratio(S({3.5, 3.2, 1.5, 0.5}), nu, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InterlacingViolation);
  }
}

TEST(KsDistance, Basics) {
  const auto s = S({3, 2, 1});
  const auto self = [&](double x) {
    double k = 0;
    for (double v : s.values()) k += v <= x ? 1 : 0;
    return k / 3.0;
  };
  EXPECT_DOUBLE_EQ(ks_distance(s, self), 0.0);
  EXPECT_DOUBLE_EQ(ks_distance(S({1}), [](double x) { return x >= 2.0 ? 1.0 : 0.0; }), 1.0);
  // Atoms at the uniform quantiles k/p.
  const auto q = S({1.0, 0.75, 0.5, 0.25});
  const auto uniform = [](double x) { return std::clamp(x, 0.0, 1.0); };
  EXPECT_LE(ks_distance(q, uniform), 0.25 + 1e-15);
  EXPECT_THROW(ks_distance(S({}), uniform), Error);
}

TEST(KsDistance, ReferenceAtomAtZero) {
  // Half the mass at 0 in both: the jump itself must not count as a discrepancy.
  const auto s = S({1, 0});
  const auto ref = [](double x) { return x < 0 ? 0.0 : (x < 1 ? 0.5 : 1.0); };
  EXPECT_DOUBLE_EQ(ks_distance(s, ref), 0.0);
}

TEST(SpectrumIo, CsvAndJsonRoundTrip) {
  const auto s = S({3.25, 1.0 / 3.0, 0});
  std::stringstream ss;
  write_spectrum_csv(ss, s);
  EXPECT_EQ(ss.str().substr(0, 11), "eigenvalue\n");
  EXPECT_EQ(read_spectrum_csv(ss, Role::Sample), s);
  EXPECT_EQ(spectrum_from_json(spectrum_to_json(s), Role::Sample), s);
}
