#include "lfgnss/error.hpp"

namespace lfgnss {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MissingCorrection: return "MissingCorrection";
    case Errc::FormatError: return "FormatError";
    case Errc::VersionError: return "VersionError";
    case Errc::OrderError: return "OrderError";
    case Errc::EmptySplit: return "EmptySplit";
    case Errc::IoError: return "IoError";
    case Errc::TooFewSatellites: return "TooFewSatellites";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::SingularGeometry: return "SingularGeometry";
    case Errc::GraphCycle: return "GraphCycle";
    case Errc::NonScalarSeed: return "NonScalarSeed";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::GapTooLarge: return "GapTooLarge";
    case Errc::SingularS: return "SingularS";
    case Errc::NotSPD: return "NotSPD";
    case Errc::NoGroundTruth: return "NoGroundTruth";
    case Errc::DivergedLoss: return "DivergedLoss";
    case Errc::ConfigError: return "ConfigError";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::NoValidEpochs: return "NoValidEpochs";
    case Errc::ModelFormatError: return "ModelFormatError";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
  }
  return "Unknown";
}

}  // namespace lfgnss
