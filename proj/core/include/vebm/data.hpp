#pragma once

// Datasets and file formats.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vebm/rng.hpp"
#include "vebm/voxel.hpp"

namespace vebm {

enum class ValueConvention { kBinary01, kMeanSubtracted, kSignedUnit };

std::string_view convention_name(ValueConvention c);
std::optional<ValueConvention> parse_convention(std::string_view name);

struct Dataset {
  std::vector<VoxelGrid> grids;
  std::vector<std::string> labels;  // category name per grid
  double mean = 0.0;                // subtracted by preprocess
  ValueConvention convention = ValueConvention::kBinary01;

  std::size_t size() const { return grids.size(); }
  /// Distinct labels in first-seen order.
  std::vector<std::string> categories() const;
  /// Index into categories() per grid.
  std::vector<std::size_t> label_ids() const;
  /// Throws ShapeError unless every grid shares the first grid's extents.
  void check_extents() const;
  /// Sub-dataset of the listed indices (same mean and convention).
  Dataset subset(std::span<const std::size_t> indices) const;
};

/// "block-table", "block-chair", "block-sofa", and "box" (a single random cuboid).
std::vector<std::string> procedural_categories();
/// One shape; `resolution` >= 8.
VoxelGrid procedural_shape(std::string_view category, std::size_t resolution, Rng& rng);
/// `count` shapes of one category, deterministic per seed.
Dataset gen_procedural(std::string_view category, std::size_t count,
                       std::size_t resolution, std::uint64_t seed);
/// `per_category` shapes of every listed category, interleaved
/// (table, chair, sofa, table, ...).
Dataset gen_procedural_mix(std::span<const std::string> categories,
                           std::size_t per_category, std::size_t resolution,
                           std::uint64_t seed);

/// Mean over every voxel of every grid.
double dataset_mean(const Dataset& data);
/// Subtracts the dataset mean from binary data.
Dataset preprocess(const Dataset& data);
/// Maps binary data to {-1, 1} (2Y - 1).
Dataset to_signed_unit(const Dataset& data);
/// Adds `mean` back and thresholds at 0.5; exactly 0.5 maps to 1.
VoxelGrid postprocess(const VoxelGrid& grid, double mean);
/// Inverse of the chosen convention followed by thresholding.
VoxelGrid postprocess(const VoxelGrid& grid, ValueConvention convention, double mean);

/// Selects round(fraction · voxels) voxels uniformly without replacement,
/// overwrites them with N(0, fill_std²) noise and marks them in the mask.
std::pair<VoxelGrid, CorruptionMask> corrupt(const VoxelGrid& grid, double fraction,
                                             Rng& rng, double fill_std);

struct Vec3 {
  double x = 0, y = 0, z = 0;
};
using Triangle = std::array<Vec3, 3>;

struct VoxelizeReport {
  VoxelGrid grid;
  std::size_t disagreements = 0;  // voxels where the three axis votes differ
};

/// Inside test of every voxel centre of an n³ grid over the unit cube.
/// Grid axis order is (z, y, x). Parity is counted along +x, +y and +z and
/// the majority wins.
VoxelizeReport voxelize_mesh(std::span<const Triangle> triangles, std::size_t resolution);

/// Triangles from Wavefront OBJ "v"/"f" records; polygons are fan-triangulated.
std::vector<Triangle> parse_obj(std::istream& in);

/// Axis-aligned cube [lo, hi]³ as 12 outward-facing triangles.
std::vector<Triangle> cube_mesh(double lo, double hi);

/// .vgrid: "VGRD", u32 version 1, u32 D, H, W, u8 dtype 0 (f32), 3 padding
/// bytes, then little-endian f32 voxels with x fastest.
inline constexpr std::size_t kGridHeaderBytes = 24;
void save_grid(const std::filesystem::path& path, const VoxelGrid& grid);
VoxelGrid load_grid(const std::filesystem::path& path);
std::string encode_grid(const VoxelGrid& grid);
VoxelGrid decode_grid(std::string_view bytes);

/// One cube per voxel >= threshold. Vertices are shared between cubes;
/// with `cull_shared_faces`, faces between two occupied voxels are dropped.
std::string export_obj(const VoxelGrid& grid, double threshold,
                       bool cull_shared_faces = false);

/// Whole-file binary IO; IoError on failure.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// Directory with one .vgrid per shape plus labels.json.
void save_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace vebm
