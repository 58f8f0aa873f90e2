#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "specrecon/ensemble.hpp"
#include "specrecon/gaussian_lab.hpp"

using namespace specrecon;

namespace {

double column_variance(const DataMatrix& d, Eigen::Index j) { return d.entries.col(j).squaredNorm() / d.entries.rows(); }

}  // namespace

TEST(Shape, FromRatio) {
  const auto s = ExperimentShape::from_ratio(200, 2.5, 9);
  EXPECT_EQ(s.n(), 500u);
  EXPECT_DOUBLE_EQ(s.c(), 2.5);
  EXPECT_EQ(s.master_seed(), 9u);
  EXPECT_THROW(ExperimentShape(0, 3), Error);
  EXPECT_THROW(ExperimentShape::from_ratio(10, -1.0), Error);
}

TEST(Models, Realizations) {
  EXPECT_EQ(GroundTruthModel::make(IdentityModel{}, 4).realized().vector(), (std::vector<double>{1, 1, 1, 1}));
  const auto lin = GroundTruthModel::make(LinearModel{1, 10}, 10).realized();
  EXPECT_DOUBLE_EQ(lin[0], 10.0);
  EXPECT_DOUBLE_EQ(lin[9], 1.0);
  EXPECT_DOUBLE_EQ(lin[1] - lin[2], 1.0);
  const auto geo = GroundTruthModel::make(GeometricModel{1, 8}, 4).realized();
  EXPECT_NEAR(geo[1], 4.0, 1e-12);
  const auto two = GroundTruthModel::make(TwoClusterModel{5, 1, 0.25}, 8).realized();
  EXPECT_EQ(two.vector(), (std::vector<double>{5, 5, 1, 1, 1, 1, 1, 1}));
  const auto iid = GroundTruthModel::make(LinearModel{1, 10}, 50, Sampling::Iid, 3).realized();
  EXPECT_GE(iid[49], 1.0);
  EXPECT_LE(iid[0], 10.0);
  EXPECT_EQ(iid, GroundTruthModel::make(LinearModel{1, 10}, 50, Sampling::Iid, 3).realized());
  try {
    GroundTruthModel::make(ExplicitModel{{3, 2}}, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
}

TEST(DataMatrixGen, DeterministicAndAddressable) {
  const auto shape = ExperimentShape(7, 11, 123);
  const auto model = GroundTruthModel::make(LinearModel{1, 4}, 7);
  const auto a = gen_data_matrix(shape, model);
  const auto b = gen_data_matrix(shape, model);
  EXPECT_TRUE((a.entries.array() == b.entries.array()).all());
  EXPECT_DOUBLE_EQ(a.entries(4, 5), normal_at(123, 4, 5) * std::sqrt(model.realized()[5]));
  EXPECT_THROW(gen_data_matrix(ExperimentShape(6, 11), model), Error);
}

TEST(DataMatrixGen, ColumnVariances) {
  const auto id = gen_data_matrix(ExperimentShape(2, 100000, 1), GroundTruthModel::make(IdentityModel{}, 2));
  for (Eigen::Index j = 0; j < 2; ++j) {
    EXPECT_GE(column_variance(id, j), 0.98);
    EXPECT_LE(column_variance(id, j), 1.02);
  }
  const auto lin = gen_data_matrix(ExperimentShape(10, 100000, 2), GroundTruthModel::make(LinearModel{1, 10}, 10));
  EXPECT_NEAR(column_variance(lin, 0), 10.0, 0.3);
  EXPECT_NEAR(column_variance(lin, 9), 1.0, 0.03);
}

TEST(SampleCovariance, HandCases) {
  DataMatrix d{Matrix::Zero(1, 3), ExperimentShape(3, 1)};
  d.entries(0, 0) = 1.0;
  const Matrix m = sample_covariance(d);
  EXPECT_EQ(m(0, 0), 1.0);
  EXPECT_EQ(m.cwiseAbs().sum(), 1.0);
  DataMatrix z{Matrix::Zero(4, 3), ExperimentShape(3, 4)};
  EXPECT_EQ(sample_covariance(z).cwiseAbs().sum(), 0.0);
}

TEST(SampleCovariance, SymmetricAndPsd) {
  const auto d = gen_data_matrix(ExperimentShape(30, 20, 5), GroundTruthModel::make(LinearModel{1, 3}, 30));
  const Matrix m = sample_covariance(d);
  EXPECT_TRUE((m.array() == m.transpose().array()).all());
  const auto eig = sym_eigen(m);
  EXPECT_GE(eig.values.back(), -1e-10 * m.trace());
  // Rank deficiency: exactly p - n eigenvalues are numerically zero.
  std::size_t zeros = 0;
  for (double v : eig.values) zeros += std::abs(v) < 1e-8 * m.trace() / 30 ? 1 : 0;
  EXPECT_EQ(zeros, 10u);
}

TEST(SampleCovariance, ProductOrderInvariance) {
  // X^T X / n and Sigma^{1/2} N^T N Sigma^{1/2} / n share their spectrum with N^T N Sigma / n.
  const std::size_t p = 6;
  const auto model = GroundTruthModel::make(LinearModel{1, 5}, p);
  const auto d = gen_data_matrix(ExperimentShape(p, 9, 3), model);
  Matrix n_mat = d.entries;
  Vector sd(p);
  for (std::size_t j = 0; j < p; ++j) sd[static_cast<Eigen::Index>(j)] = std::sqrt(model.realized()[j]);
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(p); ++j) n_mat.col(j) /= sd[j];
  const Matrix ntn_sigma = n_mat.transpose() * n_mat * sd.array().square().matrix().asDiagonal() / 9.0;
  Eigen::EigenSolver<Matrix> es(ntn_sigma);
  std::vector<double> other;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) other.push_back(es.eigenvalues()[k].real());
  std::sort(other.begin(), other.end(), std::greater<>());
  const auto direct = sym_eigen(sample_covariance(d)).values;
  for (std::size_t k = 0; k < p; ++k) EXPECT_NEAR(direct[k], other[k], 1e-9);
}

TEST(SymEigen, SimpleCases) {
  Matrix m = Matrix::Zero(3, 3);
  m.diagonal() << 3, 1, 2;
  EXPECT_EQ(sym_eigen(m).values, (std::vector<double>{3, 2, 1}));
  const auto id = sym_eigen(Matrix::Identity(5, 5)).values;
  for (double v : id) EXPECT_NEAR(v, 1.0, 1e-15);
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 1) = 1e-3;
  EXPECT_THROW(sym_eigen(bad), Error);
}

TEST(SymEigen, ReconstructsRandomMatrix) {
  NormalStream rng(11, 0);
  Matrix a(8, 8);
  for (Eigen::Index r = 0; r < 8; ++r)
    for (Eigen::Index c = 0; c < 8; ++c) a(r, c) = rng.normal();
  const Matrix m = (a + a.transpose()) / 2;
  const auto eig = sym_eigen(m, true);
  const Matrix& v = *eig.vectors;
  Vector lam(8);
  for (int k = 0; k < 8; ++k) lam[k] = eig.values[static_cast<std::size_t>(k)];
  EXPECT_LE((v * lam.asDiagonal() * v.transpose() - m).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((v.transpose() * v - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-10);
  for (int k = 0; k < 8; ++k) EXPECT_LE((m * v.col(k) - lam[k] * v.col(k)).norm(), 1e-10 * m.norm());
}

TEST(PerturbationColumn, DecoupledColumns) {
  DataMatrix d{Matrix::Zero(5, 2), ExperimentShape(2, 5)};
  d.entries.col(0) << 1, -2, 0.5, 3, -1;
  const auto col = perturbation_column(d, 0);
  EXPECT_EQ(col.nu.vector(), (std::vector<double>{0}));
  EXPECT_EQ(col.off_entries, (std::vector<double>{0}));
  EXPECT_DOUBLE_EQ(col.diag_entry, (1 + 4 + 0.25 + 9 + 1) / 5.0);
  EXPECT_THROW(perturbation_column(d, 2), Error);
}

TEST(PerturbationColumn, RebuildsFullSpectrum) {
  const auto d = gen_data_matrix(ExperimentShape(12, 40, 8), GroundTruthModel::make(LinearModel{1, 10}, 12));
  const Matrix cov = sample_covariance(d);
  const auto col = perturbation_column(cov, 4);
  EXPECT_EQ(col.nu.size(), 11u);
  EXPECT_DOUBLE_EQ(col.diag_entry, cov(4, 4));
  // Row norm is invariant under the rotation.
  double norm2 = 0;
  for (double e : col.off_entries) norm2 += e * e;
  double direct = 0;
  for (Eigen::Index s = 0; s < 12; ++s) direct += s == 4 ? 0 : cov(s, 4) * cov(s, 4);
  EXPECT_NEAR(norm2, direct, 1e-12 * direct);
}

TEST(DataIo, BinaryRoundTripAndHeader) {
  const auto d = gen_data_matrix(ExperimentShape(3, 4, 1), GroundTruthModel::make(IdentityModel{}, 3));
  std::stringstream ss;
  write_data_binary(ss, d);
  const auto bytes = ss.str();
  ASSERT_EQ(bytes.size(), 16u + 12u * 8u);
  EXPECT_EQ(bytes.substr(0, 4), "SPRC");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 4u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 3u);
  const auto back = read_data_binary(ss);
  EXPECT_TRUE((back.entries.array() == d.entries.array()).all());
  std::stringstream bad("XXXX");
  EXPECT_THROW(read_data_binary(bad), Error);
}

TEST(Ensemble, DegenerateAndDeterministic) {
  const auto shape = ExperimentShape(20, 40, 77);
  const auto model = GroundTruthModel::make(IdentityModel{}, 20);
  const auto one = mc_ensemble(shape, model, 1, "top_eigenvalue");
  EXPECT_DOUBLE_EQ(one.summary.mean,
                   simulate_sample_spectrum(shape.with_seed(derive_seed(77, 0)), model)[0]);
  const auto a = mc_ensemble(shape, model, 9, "trace", 1);
  const auto b = mc_ensemble(shape, model, 9, "trace", 4);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  try {
    mc_ensemble(shape, model, 2, "nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownStatistic);
  }
}

TEST(Ensemble, TopEigenvalueNearMpEdge) {
  const auto rec = mc_ensemble(ExperimentShape(200, 200, 3), GroundTruthModel::make(IdentityModel{}, 200), 10,
                               "top_eigenvalue");
  EXPECT_NEAR(rec.summary.mean, 4.0, 0.4);
}

TEST(Ensemble, SummaryQuantiles) {
  const auto s = summarize({4, 1, 3, 2, 5});
  EXPECT_DOUBLE_EQ(s.median, 3.0);
  EXPECT_DOUBLE_EQ(s.q25, 2.0);
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_DOUBLE_EQ(s.min, 1.0);
  EXPECT_DOUBLE_EQ(s.max, 5.0);
}
