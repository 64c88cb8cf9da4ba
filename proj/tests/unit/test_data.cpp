#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "vebm/data.hpp"
#include "vebm/errors.hpp"

using namespace vebm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vebm_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// Independent point-in-box test for the voxel centres of an n³ grid.
VoxelGrid box_oracle(std::size_t n, double lo, double hi) {
  VoxelGrid g({n, n, n});
  for (std::size_t z = 0; z < n; ++z)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const double cz = (z + 0.5) / n, cy = (y + 0.5) / n, cx = (x + 0.5) / n;
        const bool in = cz > lo && cz < hi && cy > lo && cy < hi && cx > lo && cx < hi;
        g.at(z, y, x) = in ? 1.0f : 0.0f;
      }
  return g;
}

std::size_t count_lines(const std::string& text, const std::string& prefix) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) n += line.rfind(prefix, 0) == 0;
  return n;
}

}  // namespace

TEST(Voxelize, CentralCubeFillsCentralBlock) {
  const auto report = voxelize_mesh(cube_mesh(0.25, 0.75), 8);
  EXPECT_EQ(report.grid, box_oracle(8, 0.25, 0.75));
  EXPECT_EQ(report.disagreements, 0u);
  std::size_t filled = 0;
  for (float v : report.grid.values()) filled += v == 1.0f;
  EXPECT_EQ(filled, 64u);
}

TEST(Voxelize, EmptyMeshIsEmptyGrid) {
  const auto report = voxelize_mesh({}, 6);
  EXPECT_EQ(report.grid, VoxelGrid({6, 6, 6}));
}

TEST(Voxelize, TranslationByOnePitchShiftsGrid) {
  const std::size_t n = 16;
  const double pitch = 1.0 / n;
  const VoxelGrid a = voxelize_mesh(cube_mesh(0.2, 0.6), n).grid;
  auto moved = cube_mesh(0.2, 0.6);
  for (auto& t : moved)
    for (auto& v : t) v.x += pitch;
  const VoxelGrid b = voxelize_mesh(moved, n).grid;
  for (std::size_t z = 0; z < n; ++z)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x + 1 < n; ++x) EXPECT_EQ(b.at(z, y, x + 1), a.at(z, y, x));
}

TEST(Voxelize, OccupancyStableAcrossResolution) {
  const auto mesh = cube_mesh(0.13, 0.71);
  // Needs a pitch well below the shape size; at 16³ this cube is already off
  // by one voxel layer per face.
  const double a = voxelize_mesh(mesh, 32).grid.mean();
  const double b = voxelize_mesh(mesh, 64).grid.mean();
  EXPECT_NEAR(b, a, 0.1 * a);
}

TEST(Obj, ParsesFacesAndFans) {
  std::istringstream in(
      "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\n");
  const auto tris = parse_obj(in);
  ASSERT_EQ(tris.size(), 2u);
  EXPECT_EQ(tris[1][2].y, 1.0);
  std::istringstream bad("v 0 0 0\nf 1 2 3\n");
  EXPECT_THROW(parse_obj(bad), FormatError);
}

TEST(Obj, CubeMeshRoundTripsThroughText) {
  const VoxelGrid g = voxelize_mesh(cube_mesh(0.25, 0.75), 4).grid;
  const std::string text = export_obj(g, 0.5);
  std::istringstream in(text);
  const auto tris = parse_obj(in);
  EXPECT_EQ(tris.size(), 12u * 8u);
}

TEST(Procedural, SeededBinaryAndNonEmpty) {
  for (const auto& c : procedural_categories()) {
    const Dataset a = gen_procedural(c, 4, 16, 7);
    const Dataset b = gen_procedural(c, 4, 16, 7);
    ASSERT_EQ(a.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_EQ(a.grids[i], b.grids[i]) << c;
      EXPECT_TRUE(a.grids[i].is_binary()) << c;
      EXPECT_GT(a.grids[i].mean(), 0.0) << c;
      EXPECT_EQ(a.labels[i], c);
    }
  }
  EXPECT_THROW(gen_procedural("teapot", 1, 16, 1), ConfigError);
}

TEST(Procedural, SofasAreBulkierThanTables) {
  const double sofa = dataset_mean(gen_procedural("block-sofa", 20, 16, 1));
  const double table = dataset_mean(gen_procedural("block-table", 20, 16, 1));
  EXPECT_GT(sofa, table);
}

TEST(Procedural, MixInterleavesCategories) {
  const std::vector<std::string> cats = {"block-table", "block-chair", "block-sofa"};
  const Dataset d = gen_procedural_mix(cats, 2, 16, 3);
  ASSERT_EQ(d.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(d.labels[i], cats[i % 3]);
  EXPECT_EQ(d.categories(), cats);
  EXPECT_EQ(d.label_ids(), (std::vector<std::size_t>{0, 1, 2, 0, 1, 2}));
}

TEST(Preprocess, MeanAndRoundTrip) {
  Dataset d;
  d.grids = {VoxelGrid({2, 2, 2}, 0.0f), VoxelGrid({2, 2, 2}, 1.0f)};
  d.labels = {"a", "b"};
  EXPECT_DOUBLE_EQ(dataset_mean(d), 0.5);

  const Dataset shapes = gen_procedural("block-chair", 3, 16, 2);
  const Dataset pre = preprocess(shapes);
  EXPECT_EQ(pre.convention, ValueConvention::kMeanSubtracted);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(postprocess(pre.grids[i], pre.mean), shapes.grids[i]);
  }
  const Dataset signed_unit = to_signed_unit(shapes);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(postprocess(signed_unit.grids[i], ValueConvention::kSignedUnit, 0.0),
              shapes.grids[i]);
  }
}

TEST(Preprocess, HalfRoundsUp) {
  const VoxelGrid g({1, 1, 1}, 0.25f);
  EXPECT_EQ(postprocess(g, 0.25).values()[0], 1.0f);
  EXPECT_EQ(postprocess(VoxelGrid({1, 1, 1}, 0.24f), 0.25).values()[0], 0.0f);
}

TEST(Corrupt, Boundaries) {
  const VoxelGrid g = gen_procedural("block-table", 1, 8, 1).grids[0];
  Rng rng(1);
  const auto [same, none] = corrupt(g, 0.0, rng, 0.5);
  EXPECT_EQ(same, g);
  EXPECT_EQ(none.free_count(), 0u);
  const auto [all_noise, all] = corrupt(g, 1.0, rng, 0.5);
  EXPECT_EQ(all.free_count(), g.size());
  EXPECT_THROW(corrupt(g, 1.2, rng, 0.5), ConfigError);
}

TEST(Corrupt, CardinalityAndObservedValues) {
  const VoxelGrid g = gen_procedural("block-sofa", 1, 8, 2).grids[0];
  Rng rng(3);
  for (double f : {0.1, 0.33, 0.7, 0.95}) {
    const auto [c, mask] = corrupt(g, f, rng, 0.5);
    EXPECT_EQ(mask.free_count(), static_cast<std::size_t>(std::llround(f * g.size())));
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (!mask.is_free(k)) EXPECT_EQ(c.values()[k], g.values()[k]);
    }
  }
}

TEST(GridFile, RoundTripAndSize) {
  const fs::path dir = scratch("grid");
  VoxelGrid g({16, 16, 16});
  Rng rng(4);
  for (auto& v : g.values()) v = static_cast<float>(rng.normal());
  save_grid(dir / "a.vgrid", g);
  EXPECT_EQ(fs::file_size(dir / "a.vgrid"), 16408u);
  EXPECT_EQ(load_grid(dir / "a.vgrid"), g);

  const VoxelGrid odd({2, 3, 5}, 0.5f);
  EXPECT_EQ(decode_grid(encode_grid(odd)), odd);
}

TEST(GridFile, MalformedInputsAreRejected) {
  const std::string bytes = encode_grid(VoxelGrid({4, 4, 4}, 1.0f));
  EXPECT_THROW(decode_grid(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(decode_grid(bytes.substr(0, 10)), FormatError);
  EXPECT_THROW(decode_grid(bytes + "x"), FormatError);
  std::string wrong = bytes;
  wrong[0] = 'X';
  EXPECT_THROW(decode_grid(wrong), FormatError);
  EXPECT_THROW(load_grid("/nonexistent/file.vgrid"), IoError);
}

TEST(Export, FaceCounts) {
  const std::string empty = export_obj(VoxelGrid({3, 3, 3}), 0.5);
  EXPECT_EQ(count_lines(empty, "f "), 0u);
  EXPECT_EQ(count_lines(empty, "v "), 0u);

  VoxelGrid one({3, 3, 3});
  one.at(1, 1, 1) = 1.0f;
  const std::string single = export_obj(one, 0.5);
  EXPECT_EQ(count_lines(single, "v "), 8u);
  EXPECT_EQ(count_lines(single, "f "), 12u);

  VoxelGrid pair({3, 3, 3});
  pair.at(0, 0, 0) = 1.0f;
  pair.at(0, 0, 1) = 1.0f;
  pair.at(2, 2, 2) = 0.7f;
  EXPECT_EQ(count_lines(export_obj(pair, 0.5), "f "), 36u);
  EXPECT_EQ(count_lines(export_obj(pair, 0.5, true), "f "), 36u - 4u);
}

TEST(DatasetDir, RoundTrip) {
  const fs::path dir = scratch("set");
  const std::vector<std::string> cats = {"block-table", "box"};
  const Dataset d = gen_procedural_mix(cats, 3, 8, 5);
  save_dataset(dir, d);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir)) files += e.path().extension() == ".vgrid";
  EXPECT_EQ(files, 6u);
  EXPECT_TRUE(fs::exists(dir / "labels.json"));
  const Dataset back = load_dataset(dir);
  ASSERT_EQ(back.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(back.grids[i], d.grids[i]);
    EXPECT_EQ(back.labels[i], d.labels[i]);
  }
  EXPECT_THROW(load_dataset(dir / "missing"), IoError);
}
