#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lfgnss {

/// Failure categories surfaced by the library. Recoverable per-epoch
/// conditions (near-singular geodetic inversion, zenith azimuth, filter
/// pass-through) are reported through result flags instead.
enum class Errc {
  MissingCorrection,
  FormatError,
  VersionError,
  OrderError,
  EmptySplit,
  IoError,
  TooFewSatellites,
  RankDeficient,
  SingularGeometry,
  GraphCycle,
  NonScalarSeed,
  ShapeMismatch,
  GapTooLarge,
  SingularS,
  NotSPD,
  NoGroundTruth,
  DivergedLoss,
  ConfigError,
  LengthMismatch,
  NoValidEpochs,
  ModelFormatError,
  ChecksumMismatch,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Dataset parse failure carrying the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(Errc code, std::size_t line, const std::string& reason)
      : Error(code, "line " + std::to_string(line) + ": " + reason), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace lfgnss
