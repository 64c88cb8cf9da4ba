#pragma once

// Run configuration: JSON documents, named presets and strict validation.
//
// A config may name a "preset"; the preset document is loaded first and the
// remaining keys are merged over it (objects recursively). Unknown keys are
// rejected with their full path.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vebm/data.hpp"
#include "vebm/energy_model.hpp"
#include "vebm/generator.hpp"
#include "vebm/training.hpp"

namespace vebm {

enum class RunMode { kTrain, kRecover, kSuperRes, kMultiGrid, kCoop };

std::string_view run_mode_name(RunMode m);
std::optional<RunMode> parse_run_mode(std::string_view name);

struct DataSource {
  std::optional<std::string> path;  // dataset directory; otherwise procedural
  std::vector<std::string> categories = {"block-table", "block-chair", "block-sofa"};
  std::size_t per_category = 20;
  std::size_t resolution = 16;
  std::uint64_t seed = 1;
};

struct RunConfig {
  RunMode mode = RunMode::kTrain;
  DescriptorArchitecture descriptor;                 // all modes but multigrid
  std::vector<DescriptorArchitecture> grid_descriptors;  // multigrid, coarse to fine
  std::optional<GeneratorArchitecture> generator;    // coop
  double ref_std = 0.5;
  double generator_noise_std = 0.3;
  ValueConvention convention = ValueConvention::kMeanSubtracted;
  DataSource data;
  TrainConfig train;
  /// Langevin settings for sampling, recovery and super-resolution outputs.
  LangevinConfig sampling{0.01, 20, false};
  std::uint64_t init_seed = 0;
  std::size_t output_count = 4;

  /// Throws ConfigError on anything physically invalid or inconsistent.
  void validate() const;
};

std::vector<std::string> config_preset_names();
/// The preset as a JSON document.
std::string config_preset_json(std::string_view name);

/// Parses a JSON document (with optional "preset" key) and validates it.
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig preset_config(std::string_view name);

/// Canonical JSON with explicit architectures; parse_run_config of the
/// result reproduces the config.
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace vebm
