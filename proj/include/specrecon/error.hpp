#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace specrecon {

enum class ErrorKind {
  NonFinite,
  NegativeEigenvalue,
  IndexOutOfRange,
  SingletonSpectrum,
  EmptySpectrum,
  PoleHit,
  SizeMismatch,
  InterlacingViolation,
  ZeroGap,
  ShapeMismatch,
  NotSymmetric,
  NoConvergence,
  UnknownStatistic,
  BracketFailure,
  WindowTooWide,
  InvalidArgument,
  QuadratureFailure,
  NegativeDensity,
  ConfigParse,
  Io,
  EmptySeries,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::NegativeEigenvalue: return "NegativeEigenvalue";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::SingletonSpectrum: return "SingletonSpectrum";
    case ErrorKind::EmptySpectrum: return "EmptySpectrum";
    case ErrorKind::PoleHit: return "PoleHit";
    case ErrorKind::SizeMismatch: return "SizeMismatch";
    case ErrorKind::InterlacingViolation: return "InterlacingViolation";
    case ErrorKind::ZeroGap: return "ZeroGap";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::UnknownStatistic: return "UnknownStatistic";
    case ErrorKind::BracketFailure: return "BracketFailure";
    case ErrorKind::WindowTooWide: return "WindowTooWide";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::NegativeDensity: return "NegativeDensity";
    case ErrorKind::ConfigParse: return "ConfigParse";
    case ErrorKind::Io: return "Io";
    case ErrorKind::EmptySeries: return "EmptySeries";
  }
  return "Unknown";
}

/// Single exception type for the library; callers switch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace specrecon
