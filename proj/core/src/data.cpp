#include "vebm/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace vebm {

namespace fs = std::filesystem;

std::string_view convention_name(ValueConvention c) {
  switch (c) {
    case ValueConvention::kBinary01: return "binary01";
    case ValueConvention::kMeanSubtracted: return "mean-subtracted";
    case ValueConvention::kSignedUnit: return "signed-unit";
  }
  return "binary01";
}

std::optional<ValueConvention> parse_convention(std::string_view name) {
  for (auto c : {ValueConvention::kBinary01, ValueConvention::kMeanSubtracted,
                 ValueConvention::kSignedUnit}) {
    if (convention_name(c) == name) return c;
  }
  return std::nullopt;
}

std::vector<std::string> Dataset::categories() const {
  std::vector<std::string> out;
  for (const std::string& l : labels) {
    if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
  }
  return out;
}

std::vector<std::size_t> Dataset::label_ids() const {
  const std::vector<std::string> cats = categories();
  std::vector<std::size_t> ids;
  ids.reserve(labels.size());
  for (const std::string& l : labels) {
    ids.push_back(static_cast<std::size_t>(
        std::find(cats.begin(), cats.end(), l) - cats.begin()));
  }
  return ids;
}

void Dataset::check_extents() const {
  if (!labels.empty() && labels.size() != grids.size()) {
    throw ShapeError("dataset has " + std::to_string(grids.size()) + " grids but " +
                     std::to_string(labels.size()) + " labels");
  }
  for (const VoxelGrid& g : grids) {
    if (!(g.extents() == grids.front().extents())) {
      throw ShapeError("dataset grids have differing extents");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.mean = mean;
  out.convention = convention;
  for (std::size_t i : indices) {
    out.grids.push_back(grids.at(i));
    if (!labels.empty()) out.labels.push_back(labels.at(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Procedural shapes. Dimensions are drawn for a 16³ grid and scaled to n.

namespace {

struct Box {
  long z0, z1, y0, y1, x0, x1;  // half-open
};

void fill(VoxelGrid& g, const Box& b) {
  const Extent3 e = g.extents();
  auto clamp = [](long v, std::size_t hi) {
    return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(hi)));
  };
  for (std::size_t z = clamp(b.z0, e.d); z < clamp(b.z1, e.d); ++z)
    for (std::size_t y = clamp(b.y0, e.h); y < clamp(b.y1, e.h); ++y)
      for (std::size_t x = clamp(b.x0, e.w); x < clamp(b.x1, e.w); ++x) g.at(z, y, x) = 1.0f;
}

class Scaled {
 public:
  Scaled(std::size_t n, Rng& rng) : n_(n), rng_(rng) {}
  /// Uniform integer in [lo, hi] on the 16-voxel scale, mapped to n.
  long pick(long lo, long hi) {
    const long v = lo + static_cast<long>(rng_.below(static_cast<std::size_t>(hi - lo + 1)));
    return scale(v);
  }
  long scale(long v) const {
    return std::max<long>(1, std::lround(static_cast<double>(v) * static_cast<double>(n_) / 16.0));
  }
  long n() const { return static_cast<long>(n_); }

 private:
  std::size_t n_;
  Rng& rng_;
};

// z is the vertical axis; shapes stand on z = 0.
VoxelGrid block_table(std::size_t n, Rng& rng) {
  VoxelGrid g({n, n, n});
  Scaled s(n, rng);
  const long w = s.pick(10, 14), depth = s.pick(8, 12);
  const long top = s.pick(6, 10), thick = s.pick(1, 2), leg = s.scale(2);
  const long y0 = (s.n() - depth) / 2, x0 = (s.n() - w) / 2;
  fill(g, {top, top + thick, y0, y0 + depth, x0, x0 + w});
  for (long cy : {y0, y0 + depth - leg}) {
    for (long cx : {x0, x0 + w - leg}) fill(g, {0, top, cy, cy + leg, cx, cx + leg});
  }
  return g;
}

VoxelGrid block_chair(std::size_t n, Rng& rng) {
  VoxelGrid g({n, n, n});
  Scaled s(n, rng);
  const long w = s.pick(7, 10), depth = s.pick(7, 10);
  const long seat = s.pick(4, 7), thick = s.pick(1, 2), leg = s.scale(1);
  const long back_h = s.pick(5, 8), back_t = s.pick(1, 2);
  const long y0 = (s.n() - depth) / 2, x0 = (s.n() - w) / 2;
  fill(g, {seat, seat + thick, y0, y0 + depth, x0, x0 + w});
  for (long cy : {y0, y0 + depth - leg}) {
    for (long cx : {x0, x0 + w - leg}) fill(g, {0, seat, cy, cy + leg, cx, cx + leg});
  }
  fill(g, {seat + thick, std::min(s.n(), seat + thick + back_h), y0, y0 + back_t, x0, x0 + w});
  return g;
}

VoxelGrid block_sofa(std::size_t n, Rng& rng) {
  VoxelGrid g({n, n, n});
  Scaled s(n, rng);
  const long w = s.pick(12, 15), depth = s.pick(8, 11);
  const long base = s.pick(3, 5), back_h = s.pick(4, 6), back_t = s.pick(2, 3);
  const long arm_w = s.pick(1, 2), arm_h = s.pick(2, 3);
  const long y0 = (s.n() - depth) / 2, x0 = (s.n() - w) / 2;
  fill(g, {0, base, y0, y0 + depth, x0, x0 + w});
  fill(g, {base, base + back_h, y0, y0 + back_t, x0, x0 + w});
  fill(g, {base, base + arm_h, y0, y0 + depth, x0, x0 + arm_w});
  fill(g, {base, base + arm_h, y0, y0 + depth, x0 + w - arm_w, x0 + w});
  return g;
}

VoxelGrid random_box(std::size_t n, Rng& rng) {
  VoxelGrid g({n, n, n});
  Scaled s(n, rng);
  Box b{};
  long* lo[] = {&b.z0, &b.y0, &b.x0};
  long* hi[] = {&b.z1, &b.y1, &b.x1};
  for (int a = 0; a < 3; ++a) {
    const long extent = s.pick(4, 11);
    const long offset = static_cast<long>(rng.below(static_cast<std::size_t>(s.n() - extent + 1)));
    *lo[a] = offset;
    *hi[a] = offset + extent;
  }
  fill(g, b);
  return g;
}

}  // namespace

std::vector<std::string> procedural_categories() {
  return {"block-table", "block-chair", "block-sofa", "box"};
}

VoxelGrid procedural_shape(std::string_view category, std::size_t resolution, Rng& rng) {
  if (resolution < 8) throw ConfigError("procedural shapes need resolution >= 8");
  if (category == "block-table") return block_table(resolution, rng);
  if (category == "block-chair") return block_chair(resolution, rng);
  if (category == "block-sofa") return block_sofa(resolution, rng);
  if (category == "box") return random_box(resolution, rng);
  throw ConfigError("unknown procedural category '" + std::string(category) + "'");
}

Dataset gen_procedural(std::string_view category, std::size_t count,
                       std::size_t resolution, std::uint64_t seed) {
  const std::string cat(category);
  return gen_procedural_mix(std::span<const std::string>(&cat, 1), count, resolution, seed);
}

Dataset gen_procedural_mix(std::span<const std::string> categories,
                           std::size_t per_category, std::size_t resolution,
                           std::uint64_t seed) {
  Dataset d;
  std::vector<Rng> rngs;
  for (std::size_t c = 0; c < categories.size(); ++c) {
    rngs.push_back(Rng::stream(seed, c));
  }
  for (std::size_t i = 0; i < per_category; ++i) {
    for (std::size_t c = 0; c < categories.size(); ++c) {
      d.grids.push_back(procedural_shape(categories[c], resolution, rngs[c]));
      d.labels.push_back(categories[c]);
    }
  }
  return d;
}

// ---------------------------------------------------------------------------

double dataset_mean(const Dataset& data) {
  double acc = 0.0;
  std::size_t count = 0;
  for (const VoxelGrid& g : data.grids) {
    for (float v : g.values()) acc += v;
    count += g.size();
  }
  return count == 0 ? 0.0 : acc / static_cast<double>(count);
}

Dataset preprocess(const Dataset& data) {
  if (data.convention != ValueConvention::kBinary01) {
    throw ConfigError("preprocess expects binary data, got " +
                      std::string(convention_name(data.convention)));
  }
  Dataset out = data;
  out.mean = dataset_mean(data);
  for (VoxelGrid& g : out.grids) {
    for (float& v : g.values()) v = static_cast<float>(v - out.mean);
  }
  out.convention = ValueConvention::kMeanSubtracted;
  return out;
}

Dataset to_signed_unit(const Dataset& data) {
  if (data.convention != ValueConvention::kBinary01) {
    throw ConfigError("signed-unit conversion expects binary data");
  }
  Dataset out = data;
  out.mean = 0.0;
  for (VoxelGrid& g : out.grids) {
    for (float& v : g.values()) v = 2.0f * v - 1.0f;
  }
  out.convention = ValueConvention::kSignedUnit;
  return out;
}

VoxelGrid postprocess(const VoxelGrid& grid, double mean) {
  VoxelGrid out = grid;
  for (float& v : out.values()) v = (static_cast<double>(v) + mean >= 0.5) ? 1.0f : 0.0f;
  return out;
}

VoxelGrid postprocess(const VoxelGrid& grid, ValueConvention convention, double mean) {
  switch (convention) {
    case ValueConvention::kBinary01: return postprocess(grid, 0.0);
    case ValueConvention::kMeanSubtracted: return postprocess(grid, mean);
    case ValueConvention::kSignedUnit: {
      VoxelGrid out = grid;
      for (float& v : out.values()) v = (static_cast<double>(v) >= 0.0) ? 1.0f : 0.0f;
      return out;
    }
  }
  return postprocess(grid, mean);
}

std::pair<VoxelGrid, CorruptionMask> corrupt(const VoxelGrid& grid, double fraction,
                                             Rng& rng, double fill_std) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ConfigError("corruption fraction must lie in [0, 1]");
  }
  const std::size_t total = grid.size();
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
  // Partial Fisher-Yates: the first `count` entries are the chosen voxels.
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(order[i], order[i + rng.below(total - i)]);
  }
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  VoxelGrid out = grid;
  CorruptionMask mask(grid.extents(), false);
  for (std::size_t i = 0; i < count; ++i) {
    mask.set_free(order[i], true);
    out.values()[order[i]] = static_cast<float>(fill_std * rng.normal());
  }
  return {std::move(out), std::move(mask)};
}

// ---------------------------------------------------------------------------
// Voxelization.

namespace {

double coord(const Vec3& p, int axis) { return axis == 0 ? p.x : axis == 1 ? p.y : p.z; }

// Offsets applied to every ray so that rays through voxel centres do not pass
// exactly through mesh edges or vertices of grid-aligned meshes.
constexpr double kRayJitterU = 1.0e-7 * 1.4142135623730951;
constexpr double kRayJitterV = 1.0e-7 * 1.7320508075688772;

// Crossing coordinates along `axis` of the line through (pu, pv) in the other
// two axes, where (u, v) = ((axis+1)%3, (axis+2)%3).
std::vector<double> crossings(std::span<const Triangle> tris, int axis, double pu, double pv) {
  const int au = (axis + 1) % 3, av = (axis + 2) % 3;
  std::vector<double> hits;
  for (const Triangle& t : tris) {
    const double u0 = coord(t[0], au), v0 = coord(t[0], av);
    const double u1 = coord(t[1], au), v1 = coord(t[1], av);
    const double u2 = coord(t[2], au), v2 = coord(t[2], av);
    const double area = (u1 - u0) * (v2 - v0) - (u2 - u0) * (v1 - v0);
    if (area == 0.0) continue;  // parallel to the ray
    const double w0 = ((u1 - pu) * (v2 - pv) - (u2 - pu) * (v1 - pv)) / area;
    const double w1 = ((u2 - pu) * (v0 - pv) - (u0 - pu) * (v2 - pv)) / area;
    const double w2 = 1.0 - w0 - w1;
    if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
    hits.push_back(w0 * coord(t[0], axis) + w1 * coord(t[1], axis) + w2 * coord(t[2], axis));
  }
  std::sort(hits.begin(), hits.end());
  return hits;
}

}  // namespace

VoxelizeReport voxelize_mesh(std::span<const Triangle> triangles, std::size_t resolution) {
  if (resolution < 1) throw ConfigError("voxelization resolution must be >= 1");
  const std::size_t n = resolution;
  const double pitch = 1.0 / static_cast<double>(n);
  auto centre = [&](std::size_t i) { return (static_cast<double>(i) + 0.5) * pitch; };
  std::vector<unsigned char> votes(n * n * n, 0);
  auto index = [&](std::size_t x, std::size_t y, std::size_t z) { return (z * n + y) * n + x; };

  for (int axis = 0; axis < 3; ++axis) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        // (a, b) are the indices along axes u = axis+1 and v = axis+2.
        const std::vector<double> hits =
            crossings(triangles, axis, centre(a) + kRayJitterU, centre(b) + kRayJitterV);
        if (hits.empty()) continue;
        for (std::size_t k = 0; k < n; ++k) {
          const double c = centre(k);
          const auto beyond = hits.end() - std::upper_bound(hits.begin(), hits.end(), c);
          if (beyond % 2 == 0) continue;
          std::size_t p[3];
          p[axis] = k;
          p[(axis + 1) % 3] = a;
          p[(axis + 2) % 3] = b;
          ++votes[index(p[0], p[1], p[2])];
        }
      }
    }
  }

  VoxelizeReport r{VoxelGrid({n, n, n}), 0};
  for (std::size_t i = 0; i < votes.size(); ++i) {
    r.grid.values()[i] = votes[i] >= 2 ? 1.0f : 0.0f;
    if (votes[i] != 0 && votes[i] != 3) ++r.disagreements;
  }
  return r;
}

std::vector<Triangle> parse_obj(std::istream& in) {
  std::vector<Vec3> verts;
  std::vector<Triangle> tris;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x >> v.y >> v.z)) {
        throw FormatError("OBJ line " + std::to_string(lineno) + ": bad vertex");
      }
      verts.push_back(v);
    } else if (tag == "f") {
      std::vector<std::size_t> idx;
      std::string tok;
      while (ls >> tok) {
        const long i = std::stol(tok.substr(0, tok.find('/')));
        const long resolved = i < 0 ? static_cast<long>(verts.size()) + i : i - 1;
        if (resolved < 0 || resolved >= static_cast<long>(verts.size())) {
          throw FormatError("OBJ line " + std::to_string(lineno) + ": vertex index out of range");
        }
        idx.push_back(static_cast<std::size_t>(resolved));
      }
      if (idx.size() < 3) throw FormatError("OBJ line " + std::to_string(lineno) + ": face needs 3 vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        tris.push_back({verts[idx[0]], verts[idx[k]], verts[idx[k + 1]]});
      }
    }
  }
  return tris;
}

std::vector<Triangle> cube_mesh(double lo, double hi) {
  const Vec3 c[8] = {{lo, lo, lo}, {hi, lo, lo}, {hi, hi, lo}, {lo, hi, lo},
                     {lo, lo, hi}, {hi, lo, hi}, {hi, hi, hi}, {lo, hi, hi}};
  const int faces[6][4] = {{0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4},
                           {2, 3, 7, 6}, {1, 2, 6, 5}, {0, 4, 7, 3}};
  std::vector<Triangle> out;
  for (const auto& f : faces) {
    out.push_back({c[f[0]], c[f[1]], c[f[2]]});
    out.push_back({c[f[0]], c[f[2]], c[f[3]]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// .vgrid

namespace {

constexpr char kGridMagic[4] = {'V', 'G', 'R', 'D'};
constexpr std::uint32_t kGridVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string encode_grid(const VoxelGrid& grid) {
  std::string out(kGridMagic, 4);
  put_u32(out, kGridVersion);
  const Extent3 e = grid.extents();
  put_u32(out, static_cast<std::uint32_t>(e.d));
  put_u32(out, static_cast<std::uint32_t>(e.h));
  put_u32(out, static_cast<std::uint32_t>(e.w));
  out.push_back(0);  // dtype f32
  out.append(3, '\0');
  out.reserve(kGridHeaderBytes + 4 * grid.size());
  for (float v : grid.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

VoxelGrid decode_grid(std::string_view bytes) {
  if (bytes.size() < kGridHeaderBytes) throw FormatError("vgrid: truncated header");
  if (bytes.substr(0, 4) != std::string_view(kGridMagic, 4)) {
    throw FormatError("vgrid: bad magic");
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kGridVersion) {
    throw FormatError("vgrid: unsupported version " + std::to_string(version));
  }
  const Extent3 e{get_u32(bytes, 8), get_u32(bytes, 12), get_u32(bytes, 16)};
  if (static_cast<unsigned char>(bytes[20]) != 0) throw FormatError("vgrid: unknown dtype");
  if (e.d == 0 || e.h == 0 || e.w == 0) throw FormatError("vgrid: zero extent");
  const std::size_t expected = kGridHeaderBytes + 4 * e.volume();
  if (bytes.size() != expected) {
    throw FormatError("vgrid: expected " + std::to_string(expected) + " bytes, found " +
                      std::to_string(bytes.size()));
  }
  std::vector<float> values(e.volume());
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(get_u32(bytes, kGridHeaderBytes + 4 * i));
  }
  return VoxelGrid(e, std::move(values));
}

void save_grid(const fs::path& path, const VoxelGrid& grid) {
  write_file(path, encode_grid(grid));
}

VoxelGrid load_grid(const fs::path& path) {
  try {
    return decode_grid(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

std::string export_obj(const VoxelGrid& grid, double threshold, bool cull_shared_faces) {
  const Extent3 e = grid.extents();
  auto occupied = [&](long z, long y, long x) {
    if (z < 0 || y < 0 || x < 0 || z >= static_cast<long>(e.d) ||
        y >= static_cast<long>(e.h) || x >= static_cast<long>(e.w)) {
      return false;
    }
    return grid.at(static_cast<std::size_t>(z), static_cast<std::size_t>(y),
                   static_cast<std::size_t>(x)) >= threshold;
  };

  std::map<std::size_t, std::size_t> vertex_ids;  // lattice key -> 1-based id
  std::ostringstream verts, faces;
  std::size_t voxels = 0, face_count = 0;
  auto vertex = [&](std::size_t z, std::size_t y, std::size_t x) {
    const std::size_t key = (z * (e.h + 1) + y) * (e.w + 1) + x;
    auto [it, inserted] = vertex_ids.try_emplace(key, vertex_ids.size() + 1);
    if (inserted) verts << "v " << x << ' ' << y << ' ' << z << '\n';
    return it->second;
  };
  // Corner offsets (dx, dy, dz) of each face, counter-clockwise seen from outside.
  struct Face {
    int nx, ny, nz;
    int c[4][3];
  };
  static const Face kFaces[6] = {
      {-1, 0, 0, {{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {0, 1, 0}}},
      {1, 0, 0, {{1, 0, 0}, {1, 1, 0}, {1, 1, 1}, {1, 0, 1}}},
      {0, -1, 0, {{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1}}},
      {0, 1, 0, {{0, 1, 0}, {0, 1, 1}, {1, 1, 1}, {1, 1, 0}}},
      {0, 0, -1, {{0, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, 0, 0}}},
      {0, 0, 1, {{0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}},
  };
  for (std::size_t z = 0; z < e.d; ++z) {
    for (std::size_t y = 0; y < e.h; ++y) {
      for (std::size_t x = 0; x < e.w; ++x) {
        if (!occupied(static_cast<long>(z), static_cast<long>(y), static_cast<long>(x))) continue;
        ++voxels;
        for (const Face& f : kFaces) {
          if (cull_shared_faces && occupied(static_cast<long>(z) + f.nz,
                                            static_cast<long>(y) + f.ny,
                                            static_cast<long>(x) + f.nx)) {
            continue;
          }
          std::size_t id[4];
          for (int k = 0; k < 4; ++k) {
            id[k] = vertex(z + f.c[k][2], y + f.c[k][1], x + f.c[k][0]);
          }
          faces << "f " << id[0] << ' ' << id[1] << ' ' << id[2] << '\n';
          faces << "f " << id[0] << ' ' << id[2] << ' ' << id[3] << '\n';
          face_count += 2;
        }
      }
    }
  }
  std::ostringstream out;
  out << "# vebm voxel export\n# voxels " << voxels << "\n# faces " << face_count << '\n';
  out << verts.str() << faces.str();
  return out.str();
}

// ---------------------------------------------------------------------------

void save_dataset(const fs::path& dir, const Dataset& data) {
  data.check_extents();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  nlohmann::json manifest;
  manifest["convention"] = std::string(convention_name(data.convention));
  manifest["mean"] = data.mean;
  manifest["shapes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "shape_%05zu.vgrid", i);
    save_grid(dir / name, data.grids[i]);
    manifest["shapes"].push_back(
        {{"file", name}, {"label", data.labels.empty() ? std::string() : data.labels[i]}});
  }
  write_file(dir / "labels.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "labels.json"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir.string() + "/labels.json: " + e.what());
  }
  Dataset d;
  try {
    const auto conv = parse_convention(manifest.at("convention").get<std::string>());
    if (!conv) throw FormatError("labels.json: unknown convention");
    d.convention = *conv;
    d.mean = manifest.at("mean").get<double>();
    for (const auto& entry : manifest.at("shapes")) {
      d.grids.push_back(load_grid(dir / entry.at("file").get<std::string>()));
      d.labels.push_back(entry.at("label").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir.string() + "/labels.json: " + e.what());
  }
  d.check_extents();
  return d;
}

}  // namespace vebm
