#pragma once

// Command implementations behind the `vebm` executable.
//
// Every command takes a CommandOptions, writes its artifacts under the output
// directory (guarded by a lock file) and returns an exit code; errors are
// reported on the error stream and mapped to a code per category.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vebm/checkpoint.hpp"
#include "vebm/config.hpp"
#include "vebm/data.hpp"
#include "vebm/training.hpp"

namespace vebm {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,      // usage, invalid config, mode mismatch, missing inputs
  kExitIo = 3,          // unreadable or unwritable files, locked output directory
  kExitFormat = 4,      // malformed .vgrid, checkpoint, OBJ or dataset manifest
  kExitDivergence = 5,  // Langevin divergence or non-finite values
  kExitShape = 6,       // tensor / grid extent mismatches
};

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::string> preset;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> count;
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> threads;

  // sample
  bool write_obj = false;
  // eval
  std::vector<std::string> metrics;
  std::optional<std::filesystem::path> data;     // real set
  std::optional<std::filesystem::path> samples;  // synthetic set
  std::optional<std::string> target;             // category for softmax/error metrics
  // dataset
  std::vector<std::string> categories;
  std::optional<std::size_t> resolution;
  // voxelize / export
  std::optional<std::filesystem::path> input;
  double threshold = 0.5;
  bool cull = false;
};

std::vector<std::string> command_names();
std::vector<std::string> metric_names();

/// Runs `name` and maps exceptions to exit codes, printing "error: ..." to `err`.
int run_command(const std::string& name, const CommandOptions& opts, std::ostream& out,
                std::ostream& err);

/// --threads, else VEBM_THREADS, else the OpenMP default.
void apply_thread_count(std::optional<std::size_t> threads);

/// Holds `<dir>/.vebm.lock` for its lifetime; IoError if another holder exists.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path file_;
};

// Building blocks, shared with the tests.

/// Binary training data described by the config.
Dataset load_run_data(const RunConfig& cfg);
/// Data in the value convention the models see.
Dataset to_model_space(const Dataset& binary, ValueConvention convention);
std::unique_ptr<Trainer> make_trainer(const RunConfig& cfg, const Dataset& model_space);
Checkpoint make_checkpoint(const RunConfig& cfg, double data_mean, const Trainer& trainer);

/// `count` binary grids sampled from a train, coop or multigrid checkpoint.
std::vector<VoxelGrid> sample_checkpoint(const Checkpoint& ckpt, std::size_t count,
                                         std::uint64_t seed);

}  // namespace vebm
