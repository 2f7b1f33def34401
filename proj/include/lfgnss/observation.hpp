#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "lfgnss/frames.hpp"

namespace lfgnss {

enum class System : std::uint8_t { GPS = 0, BDS = 1, GAL = 2, GLO = 3 };

inline constexpr std::array<System, 4> kAllSystems = {System::GPS, System::BDS, System::GAL, System::GLO};

std::string_view to_string(System s) noexcept;
std::optional<System> parse_system(std::string_view name) noexcept;

/// Column of the inter-system bias for `s`, or -1 for the GPS reference.
constexpr int isb_index(System s) noexcept { return static_cast<int>(s) - 1; }

/// One satellite's pseudorange measurement at one epoch.
struct SatObservation {
  System system = System::GPS;
  int sat_id = 0;
  double pseudorange = 0.0;      // m
  double snr = 0.0;              // dB-Hz
  EcefPos sat_pos;               // m
  double sat_clock_bias = 0.0;   // s
  double tgd = 0.0;              // s
  std::optional<double> iono_delay;   // m, when precomputed
  std::optional<double> tropo_delay;  // m, when precomputed

  bool operator==(const SatObservation&) const = default;
};

/// A timestamped set of observations plus optional pre-aligned ground truth.
struct EpochRecord {
  double t = 0.0;
  std::vector<SatObservation> observations;
  std::optional<EcefPos> truth;
  std::optional<double> truth_clock;  // m

  bool operator==(const EpochRecord&) const = default;
};

}  // namespace lfgnss
