// vebm: train, sample and evaluate energy-based voxel models.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "vebm/commands.hpp"
#include "vebm/config.hpp"

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (const auto& i : items) s += (s.empty() ? "" : ", ") + i;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative VoxelNet: energy-based models over 3D voxel grids"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "vebm 0.1.0");

  vebm::CommandOptions opts;
  std::string config, checkpoint, out, input;
  std::uint64_t seed = 0;
  std::size_t count = 0, iterations = 0, threads = 0, resolution = 0;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--threads", threads, "Worker threads (falls back to VEBM_THREADS)");
  };
  auto training = [&](CLI::App* cmd, const std::string& what) {
    cmd->add_option("--config", config, "Run config JSON");
    cmd->add_option("--preset", opts.preset,
                    "Named config preset: " + join(vebm::config_preset_names()));
    cmd->add_option("--checkpoint", checkpoint, "Resume from this checkpoint");
    cmd->add_option("--seed", seed, "Training seed (overrides the config)");
    cmd->add_option("--iterations", iterations, "Total iterations (overrides the config)");
    cmd->add_option("--count", count, "Number of " + what + " written after training");
    cmd->add_option("--out", out, "Output directory")->required();
    common(cmd);
  };

  training(app.add_subcommand("train", "Maximum-likelihood training with Langevin sampling"),
           "samples");
  training(app.add_subcommand("recover", "Train a model for recovering corrupted shapes"),
           "recoveries");
  training(app.add_subcommand("superres", "Train a model for super-resolution"),
           "super-resolved grids");
  training(app.add_subcommand("multigrid", "Train a coarse-to-fine ladder of models"), "samples");
  training(app.add_subcommand("coop", "Cooperative training of descriptor and generator"),
           "samples");

  auto* sample = app.add_subcommand("sample", "Sample binary grids from a checkpoint");
  sample->add_option("--checkpoint", checkpoint, "Checkpoint")->required();
  sample->add_option("--count", count, "Number of samples");
  sample->add_option("--seed", seed, "Sampling seed");
  sample->add_option("--out", out, "Output directory")->required();
  sample->add_flag("--obj", opts.write_obj, "Also write an OBJ mesh per sample");
  common(sample);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint; prints a JSON report");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint")->required();
  eval->add_option("--metrics", opts.metrics, "Metrics: " + join(vebm::metric_names()))
      ->delimiter(',')
      ->required();
  eval->add_option("--data", opts.data, "Real dataset directory (default: the run's data)");
  eval->add_option("--samples", opts.samples,
                   "Directory of synthetic .vgrid files (default: sample the checkpoint)");
  eval->add_option("--target", opts.target, "Category for softmax_prob / classification_error");
  eval->add_option("--count", count, "Synthetic samples to draw, or shapes to recover");
  eval->add_option("--seed", seed, "Sampling and corruption seed");
  eval->add_option("--out", out, "Directory for report.json");
  common(eval);

  auto* dataset = app.add_subcommand("dataset", "Generate a procedural dataset");
  dataset->add_option("--categories", opts.categories, "Comma-separated categories")
      ->delimiter(',');
  dataset->add_option("--count", count, "Total number of shapes (default 60)");
  dataset->add_option("--resolution", resolution, "Grid edge length (default 16)");
  dataset->add_option("--seed", seed, "Generation seed");
  dataset->add_option("--out", out, "Dataset directory")->required();
  common(dataset);

  auto* voxelize = app.add_subcommand("voxelize", "Voxelize a closed OBJ mesh");
  voxelize->add_option("mesh", input, "OBJ file")->required();
  voxelize->add_option("--resolution", resolution, "Grid edge length (default 32)");
  voxelize->add_option("--out", out, ".vgrid output (default: next to the mesh)");
  common(voxelize);

  auto* exporter = app.add_subcommand("export", "Export a .vgrid as an OBJ cube mesh");
  exporter->add_option("grid", input, ".vgrid file")->required();
  exporter->add_option("--threshold", opts.threshold, "Occupancy threshold (default 0.5)");
  exporter->add_flag("--cull", opts.cull, "Drop faces shared by two occupied voxels");
  exporter->add_option("--out", out, ".obj output (default: next to the grid)");
  common(exporter);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : vebm::kExitConfig;
  }

  CLI::App* cmd = app.get_subcommands().front();
  auto given = [&](const char* flag) {
    const CLI::Option* o = cmd->get_option_no_throw(flag);
    return o != nullptr && o->count() > 0;
  };
  if (given("--config")) opts.config = config;
  if (given("--checkpoint")) opts.checkpoint = checkpoint;
  if (given("--out")) opts.out = out;
  if (given("--seed")) opts.seed = seed;
  if (given("--count")) opts.count = count;
  if (given("--iterations")) opts.iterations = iterations;
  if (given("--threads")) opts.threads = threads;
  if (given("--resolution")) opts.resolution = resolution;
  if (!input.empty()) opts.input = input;

  return vebm::run_command(cmd->get_name(), opts, std::cout, std::cerr);
}
