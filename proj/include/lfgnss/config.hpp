#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "lfgnss/pipeline.hpp"
#include "lfgnss/sim.hpp"
#include "lfgnss/train.hpp"

namespace lfgnss::config {

struct BaselineConfig {
  double a = 0.3;
  double b = 0.3;
};

struct Paths {
  std::string data;
  std::string model;
  std::string output;
};

/// Every setting of every subcommand. All fields have defaults; files may set any subset.
struct RunConfig {
  std::uint64_t seed = 1;
  pipeline::PrepConfig prep;
  pipeline::FilterConfig filter;
  BaselineConfig baseline;
  train::TrainConfig train;
  train::DhemConfig dhem;
  sim::ScenarioConfig scenario = sim::ScenarioConfig::urban_default();
  Paths paths;

  /// Throws ConfigError on any out-of-range field.
  void validate() const;
  /// Scenario and training seeds follow the top-level seed.
  void apply_seed(std::uint64_t s);
};

/// Strict parse: unknown keys and wrong types raise ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Full config, every field written, as pretty JSON.
std::string dump_config(const RunConfig& cfg);

}  // namespace lfgnss::config
