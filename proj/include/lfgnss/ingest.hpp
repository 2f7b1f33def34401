#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lfgnss/observation.hpp"

namespace lfgnss::ingest {

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kDatasetFormat = "lfgnss-dataset";

enum class Source { Simulated, Imported };

struct DatasetManifest {
  std::string name;
  std::size_t epoch_count = 0;
  std::vector<System> systems;  // ascending, unique
  bool has_truth = false;
  Source source = Source::Simulated;
  std::optional<std::uint64_t> seed;
  std::optional<EcefPos> approx_position;  // optional ILS warm start for the first epoch

  bool operator==(const DatasetManifest&) const = default;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<EpochRecord> epochs;
};

/// Throws FormatError if the observation violates its field invariants.
void validate_observation(const SatObservation& obs);
/// Throws FormatError / OrderError if records violate epoch invariants.
void validate_records(const std::vector<EpochRecord>& records);

/// Builds a manifest matching `records` (epoch count, systems, truth flag).
DatasetManifest manifest_for(const std::string& name, const std::vector<EpochRecord>& records, Source source,
                             std::optional<std::uint64_t> seed = std::nullopt);

Dataset parse_dataset(std::istream& in);
Dataset parse_dataset(const std::filesystem::path& path);

void emit_dataset(const DatasetManifest& manifest, const std::vector<EpochRecord>& records, std::ostream& out);
void emit_dataset(const DatasetManifest& manifest, const std::vector<EpochRecord>& records,
                  const std::filesystem::path& path);

struct Split {
  std::string name;
  std::size_t first = 0;  // index of the first epoch in the parent sequence
  std::vector<EpochRecord> epochs;
};

/// Contiguous order-preserving slices; boundaries at round(cumulative fraction * N).
std::vector<Split> split_dataset(const std::vector<EpochRecord>& records, const std::vector<double>& fractions,
                                 const std::vector<std::string>& names = {});

/// Parses "0.6,0.2,0.2".
std::vector<double> parse_fractions(const std::string& text);

/// printf("%.17g") formatting shared by every text emitter in the project.
std::string format_double(double v);

}  // namespace lfgnss::ingest
