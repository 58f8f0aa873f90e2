#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "specrecon/detail/text.hpp"
#include "specrecon/error.hpp"
#include "specrecon/random.hpp"
#include "specrecon/spectrum.hpp"

namespace specrecon {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dimensions of one simulated data set: n samples of a p-dimensional vector.
class ExperimentShape {
 public:
  ExperimentShape(std::size_t p, std::size_t n, std::uint64_t master_seed = 0)
      : p_(p), n_(n), seed_(master_seed) {
    if (p == 0 || n == 0) {
      throw Error(ErrorKind::InvalidArgument, "experiment needs p >= 1 and n >= 1");
    }
  }

  /// n = round(c * p), at least 1.
  static ExperimentShape from_ratio(std::size_t p, double c, std::uint64_t master_seed = 0) {
    if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorKind::InvalidArgument, "aspect ratio c must be > 0");
    const auto n = static_cast<std::size_t>(std::llround(c * static_cast<double>(p)));
    return ExperimentShape(p, std::max<std::size_t>(n, 1), master_seed);
  }

  std::size_t p() const noexcept { return p_; }
  std::size_t n() const noexcept { return n_; }
  double c() const noexcept { return static_cast<double>(n_) / static_cast<double>(p_); }
  std::uint64_t master_seed() const noexcept { return seed_; }

  ExperimentShape with_seed(std::uint64_t seed) const { return ExperimentShape(p_, n_, seed); }

  friend bool operator==(const ExperimentShape&, const ExperimentShape&) = default;

 private:
  std::size_t p_;
  std::size_t n_;
  std::uint64_t seed_;
};

struct IdentityModel {
  friend bool operator==(const IdentityModel&, const IdentityModel&) = default;
};
struct LinearModel {
  double lo = 1.0;
  double hi = 10.0;
  friend bool operator==(const LinearModel&, const LinearModel&) = default;
};
struct GeometricModel {
  double lo = 1.0;
  double hi = 10.0;
  friend bool operator==(const GeometricModel&, const GeometricModel&) = default;
};
struct TwoClusterModel {
  double v1 = 4.0;
  double v2 = 1.0;
  double fraction = 0.5;  // share of eigenvalues equal to v1
  friend bool operator==(const TwoClusterModel&, const TwoClusterModel&) = default;
};
struct ExplicitModel {
  std::vector<double> values;
  friend bool operator==(const ExplicitModel&, const ExplicitModel&) = default;
};

using ModelKind = std::variant<IdentityModel, LinearModel, GeometricModel, TwoClusterModel, ExplicitModel>;

/// Regular: deterministic quantile placement. Iid: each eigenvalue drawn
/// independently from the model's population law.
enum class Sampling { Regular, Iid };

inline std::string describe(const ModelKind& kind) {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        using detail::format_double;
        if constexpr (std::is_same_v<T, IdentityModel>) {
          return "identity";
        } else if constexpr (std::is_same_v<T, LinearModel>) {
          return "linear(" + format_double(m.lo, 6) + "," + format_double(m.hi, 6) + ")";
        } else if constexpr (std::is_same_v<T, GeometricModel>) {
          return "geometric(" + format_double(m.lo, 6) + "," + format_double(m.hi, 6) + ")";
        } else if constexpr (std::is_same_v<T, TwoClusterModel>) {
          return "two_cluster(" + format_double(m.v1, 6) + "," + format_double(m.v2, 6) + "," +
                 format_double(m.fraction, 6) + ")";
        } else {
          return "explicit(" + std::to_string(m.values.size()) + ")";
        }
      },
      kind);
}

/// Diagonal population covariance: a model recipe plus its realization for one p.
class GroundTruthModel {
 public:
  static GroundTruthModel make(const ModelKind& kind, std::size_t p, Sampling sampling = Sampling::Regular,
                               std::uint64_t seed = 0) {
    if (p == 0) throw Error(ErrorKind::InvalidArgument, "model needs p >= 1");
    std::vector<double> v(p);
    NormalStream rng(seed, 0x4d4f444cu);
    const auto pos = [p](std::size_t j) {
      return p == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(p - 1);
    };
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, IdentityModel>) {
            std::fill(v.begin(), v.end(), 1.0);
          } else if constexpr (std::is_same_v<T, LinearModel> || std::is_same_v<T, GeometricModel>) {
            if (!(m.lo > 0.0) || !(m.hi >= m.lo)) {
              throw Error(ErrorKind::InvalidArgument, "model range needs 0 < lo <= hi");
            }
            for (std::size_t j = 0; j < p; ++j) {
              const double t = sampling == Sampling::Regular ? pos(j) : rng.uniform();
              if constexpr (std::is_same_v<T, LinearModel>) {
                v[j] = m.hi - (m.hi - m.lo) * t;
              } else {
                v[j] = m.hi * std::pow(m.lo / m.hi, t);
              }
            }
          } else if constexpr (std::is_same_v<T, TwoClusterModel>) {
            if (!(m.v1 > 0.0) || !(m.v2 > 0.0) || !(m.fraction >= 0.0 && m.fraction <= 1.0)) {
              throw Error(ErrorKind::InvalidArgument, "two_cluster needs positive values and fraction in [0,1]");
            }
            const auto count1 = static_cast<std::size_t>(std::llround(m.fraction * static_cast<double>(p)));
            for (std::size_t j = 0; j < p; ++j) {
              const bool first = sampling == Sampling::Regular ? j < count1 : rng.uniform() < m.fraction;
              v[j] = first ? m.v1 : m.v2;
            }
          } else {
            if (m.values.size() != p) {
              throw Error(ErrorKind::ShapeMismatch, "explicit model has " + std::to_string(m.values.size()) +
                                                        " values for p = " + std::to_string(p));
            }
            v = m.values;
          }
        },
        kind);
    for (double x : v) {
      if (!(x > 0.0) || !std::isfinite(x)) {
        throw Error(ErrorKind::InvalidArgument, "ground-truth eigenvalues must be finite and > 0");
      }
    }
    return GroundTruthModel(kind, sampling, sort_spectrum(v, Role::GroundTruth));
  }

  const ModelKind& kind() const noexcept { return kind_; }
  Sampling sampling() const noexcept { return sampling_; }
  const Spectrum& realized() const noexcept { return realized_; }
  std::size_t p() const noexcept { return realized_.size(); }

 private:
  GroundTruthModel(ModelKind kind, Sampling sampling, Spectrum realized)
      : kind_(std::move(kind)), sampling_(sampling), realized_(std::move(realized)) {}

  ModelKind kind_;
  Sampling sampling_;
  Spectrum realized_;
};

/// n x p data with independent N(0, sigma_j^2) columns; column j carries the j-th
/// (descending) ground-truth eigenvalue.
struct DataMatrix {
  Matrix entries;
  ExperimentShape shape;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(entries.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(entries.cols()); }
};

/// Entry (r, j) is normal_at(master_seed, r, j) * sigma_j, so any entry can be
/// regenerated from the seed and its coordinates. No centering.
inline DataMatrix gen_data_matrix(const ExperimentShape& shape, const GroundTruthModel& model) {
  if (model.p() != shape.p()) {
    throw Error(ErrorKind::ShapeMismatch, "model has p = " + std::to_string(model.p()) + ", shape has p = " +
                                              std::to_string(shape.p()));
  }
  const auto n = shape.n();
  const auto p = shape.p();
  Vector sd(p);
  for (std::size_t j = 0; j < p; ++j) sd[static_cast<Eigen::Index>(j)] = std::sqrt(model.realized()[j]);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  const auto seed = shape.master_seed();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; 2 * k < p; ++k) {
      const auto [a, b] = normal_pair(seed, r, static_cast<std::uint32_t>(k));
      const auto j = static_cast<Eigen::Index>(2 * k);
      const auto ri = static_cast<Eigen::Index>(r);
      x(ri, j) = a * sd[j];
      if (2 * k + 1 < p) x(ri, j + 1) = b * sd[j + 1];
    }
  }
  return DataMatrix{std::move(x), shape};
}

enum class Centering { None, SubtractColumnMeans };

/// X^T X / n. Only the lower triangle is accumulated and then mirrored, so the
/// result is exactly symmetric.
inline Matrix sample_covariance(const DataMatrix& data, Centering centering = Centering::None) {
  const auto p = static_cast<Eigen::Index>(data.cols());
  const auto n = static_cast<double>(data.rows());
  Matrix m = Matrix::Zero(p, p);
  if (centering == Centering::SubtractColumnMeans) {
    const Matrix centered = data.entries.rowwise() - data.entries.colwise().mean();
    m.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), 1.0 / n);
  } else {
    m.selfadjointView<Eigen::Lower>().rankUpdate(data.entries.transpose(), 1.0 / n);
  }
  m.triangularView<Eigen::StrictlyUpper>() = m.transpose();
  return m;
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending; column k of `vectors`
/// belongs to values[k].
struct SymEigen {
  std::vector<double> values;
  std::optional<Matrix> vectors;

  /// Wraps the eigenvalues as a Spectrum (round-off negatives clamped).
  Spectrum spectrum(Role role = Role::Sample) const { return sort_spectrum(values, role); }
};

/// Dense symmetric eigensolver (Householder tridiagonalization + implicit QR via Eigen).
inline SymEigen sym_eigen(const Matrix& m, bool want_vectors = false) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::NotSymmetric, "matrix is not square");
  const double norm = m.cwiseAbs().maxCoeff();
  if (m.size() > 0 && (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * norm) {
    throw Error(ErrorKind::NotSymmetric, "matrix asymmetry exceeds 1e-12 relative");
  }
  if (!m.allFinite()) throw Error(ErrorKind::NonFinite, "matrix has non-finite entries");
  SymEigen out;
  if (m.rows() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, want_vectors ? Eigen::ComputeEigenvectors
                                                               : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::NoConvergence, "symmetric eigensolver did not converge");
  }
  const auto p = m.rows();
  out.values.resize(static_cast<std::size_t>(p));
  for (Eigen::Index k = 0; k < p; ++k) out.values[static_cast<std::size_t>(k)] = solver.eigenvalues()[p - 1 - k];
  if (want_vectors) out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

/// Row/column i of the sample covariance seen from the principal components of the
/// covariance with column i of the data zeroed.
struct PerturbationColumn {
  std::size_t i = 0;
  double diag_entry = 0.0;               // E_ii
  std::vector<double> off_entries;       // E_si, aligned with nu
  Spectrum nu;                           // restricted spectrum, structural zero removed
};

/// Works on a precomputed sample covariance. The structural zero eigenpair of the
/// restricted matrix is the canonical vector e_i, so it is removed by deleting row and
/// column i before the eigendecomposition rather than by thresholding.
inline PerturbationColumn perturbation_column(const Matrix& covariance, std::size_t i) {
  const auto p = static_cast<std::size_t>(covariance.rows());
  if (p < 2) throw Error(ErrorKind::IndexOutOfRange, "perturbation column needs p >= 2");
  if (i >= p) throw Error(ErrorKind::IndexOutOfRange, "column index " + std::to_string(i));
  std::vector<Eigen::Index> keep;
  keep.reserve(p - 1);
  for (std::size_t s = 0; s < p; ++s) {
    if (s != i) keep.push_back(static_cast<Eigen::Index>(s));
  }
  const auto ii = static_cast<Eigen::Index>(i);
  const Matrix reduced = covariance(keep, keep);
  const Vector column = covariance(keep, ii);
  const SymEigen eig = sym_eigen(reduced, true);
  const Vector rotated = eig.vectors->transpose() * column;

  PerturbationColumn out;
  out.i = i;
  out.diag_entry = covariance(ii, ii);
  out.off_entries.assign(rotated.data(), rotated.data() + rotated.size());
  // Already descending; sort_spectrum is stable so alignment with off_entries holds.
  out.nu = sort_spectrum(eig.values, Role::Restricted);
  return out;
}

inline PerturbationColumn perturbation_column(const DataMatrix& data, std::size_t i) {
  if (i >= data.cols()) throw Error(ErrorKind::IndexOutOfRange, "column index " + std::to_string(i));
  return perturbation_column(sample_covariance(data), i);
}

// ---------------------------------------------------------------------------
// DataMatrix export. Binary layout: "SPRC", u32 n, u32 p, u32 reserved (= 0), then
// n * p little-endian IEEE-754 doubles in row-major order.

namespace detail {

inline void put_u32le(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b, 4);
}

inline std::uint32_t get_u32le(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorKind::Io, "truncated data matrix header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

inline void write_data_binary(std::ostream& os, const DataMatrix& data) {
  os.write("SPRC", 4);
  detail::put_u32le(os, static_cast<std::uint32_t>(data.rows()));
  detail::put_u32le(os, static_cast<std::uint32_t>(data.cols()));
  detail::put_u32le(os, 0);
  for (Eigen::Index r = 0; r < data.entries.rows(); ++r) {
    for (Eigen::Index j = 0; j < data.entries.cols(); ++j) {
      std::uint64_t bits;
      const double v = data.entries(r, j);
      std::memcpy(&bits, &v, sizeof bits);
      char b[8];
      for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((bits >> (8 * k)) & 0xFF);
      os.write(b, 8);
    }
  }
  if (!os) throw Error(ErrorKind::Io, "failed writing data matrix");
}

/// Reads the binary layout back. The seed is not stored, so the returned shape has
/// master_seed 0.
inline DataMatrix read_data_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "SPRC", 4) != 0) {
    throw Error(ErrorKind::Io, "not a data matrix file (bad magic)");
  }
  const auto n = detail::get_u32le(is);
  const auto p = detail::get_u32le(is);
  (void)detail::get_u32le(is);
  Matrix x(n, p);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      unsigned char b[8];
      if (!is.read(reinterpret_cast<char*>(b), 8)) throw Error(ErrorKind::Io, "truncated data matrix body");
      std::uint64_t bits = 0;
      for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
      double v;
      std::memcpy(&v, &bits, sizeof v);
      x(r, j) = v;
    }
  }
  return DataMatrix{std::move(x), ExperimentShape(p, n, 0)};
}

/// CSV with header x1,...,xp and one row per sample.
inline void write_data_csv(std::ostream& os, const DataMatrix& data) {
  for (std::size_t j = 0; j < data.cols(); ++j) os << (j ? "," : "") << 'x' << (j + 1);
  os << '\n';
  for (Eigen::Index r = 0; r < data.entries.rows(); ++r) {
    for (Eigen::Index j = 0; j < data.entries.cols(); ++j) {
      os << (j ? "," : "") << detail::format_double(data.entries(r, j));
    }
    os << '\n';
  }
}

/// Sample spectrum of one simulated data set.
inline Spectrum simulate_sample_spectrum(const ExperimentShape& shape, const GroundTruthModel& model) {
  return sym_eigen(sample_covariance(gen_data_matrix(shape, model))).spectrum(Role::Sample);
}

}  // namespace specrecon
