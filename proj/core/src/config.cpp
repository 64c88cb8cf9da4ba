#include "vebm/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "vebm/errors.hpp"

namespace vebm {

using nlohmann::json;

std::string_view run_mode_name(RunMode m) {
  switch (m) {
    case RunMode::kTrain: return "train";
    case RunMode::kRecover: return "recover";
    case RunMode::kSuperRes: return "superres";
    case RunMode::kMultiGrid: return "multigrid";
    case RunMode::kCoop: return "coop";
  }
  return "train";
}

std::optional<RunMode> parse_run_mode(std::string_view name) {
  for (RunMode m : {RunMode::kTrain, RunMode::kRecover, RunMode::kSuperRes,
                    RunMode::kMultiGrid, RunMode::kCoop}) {
    if (run_mode_name(m) == name) return m;
  }
  return std::nullopt;
}

namespace {

bool is_count(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

// ---------------------------------------------------------------------------
// Presets

json train_block(std::size_t iterations, std::size_t batch, std::size_t chains, double dt,
                 std::size_t steps, double lr, double beta1) {
  return json{{"iterations", iterations},
              {"batch_size", batch},
              {"chains", chains},
              {"step_size", dt},
              {"steps", steps},
              {"learning_rate", lr},
              {"beta1", beta1}};
}

json sampling_block(double dt, std::size_t steps) {
  return json{{"step_size", dt}, {"steps", steps}, {"noise", false}};
}

const std::map<std::string, json, std::less<>>& preset_table() {
  static const std::map<std::string, json, std::less<>> table = [] {
    std::map<std::string, json, std::less<>> t;
    const json desk_mix = {{"categories", {"block-table", "block-chair", "block-sofa"}},
                           {"per_category", 20},
                           {"resolution", 16},
                           {"seed", 1}};

    t["paper-synthesis-32"] = {
        {"mode", "train"},
        {"descriptor", "paper-synthesis-32"},
        {"data", {{"path", "data/modelnet10-32/chair"}}},
        {"train", train_block(3000, 20, 25, 0.01, 20, 0.001, 0.5)},
        {"sampling", sampling_block(0.01, 20)}};
    t["paper-recovery"] = {
        {"mode", "recover"},
        {"descriptor", "paper-recovery-32"},
        {"data", {{"path", "data/modelnet10-32/chair"}}},
        {"train", train_block(1000, 50, 50, 0.0049, 90, 0.001, 0.5)},
        {"sampling", sampling_block(0.0049, 90)}};
    t["paper-recovery"]["train"]["corruption"] = 0.7;
    t["paper-superres"] = {
        {"mode", "superres"},
        {"descriptor", "paper-superres-64"},
        {"data", {{"path", "data/modelnet10-64/chair"}}},
        {"train", train_block(1000, 20, 20, 0.0001, 90, 0.001, 0.5)},
        {"sampling", sampling_block(0.0001, 90)}};
    t["paper-superres"]["train"]["scale_factor"] = 2;
    t["paper-coop"] = {
        {"mode", "coop"},
        {"descriptor", "paper-coop-32"},
        {"generator", "paper-coop-32"},
        {"convention", "signed-unit"},
        {"data", {{"path", "data/modelnet10-32/sofa"}}},
        {"train", train_block(3000, 50, 50, 0.09, 20, 0.001, 0.4)},
        {"sampling", sampling_block(0.09, 20)}};
    t["paper-coop"]["train"]["chain_init"] = "generator";
    t["paper-coop"]["train"]["generator_learning_rate"] = 0.0003;
    t["paper-coop"]["train"]["generator_beta1"] = 0.6;
    t["paper-multigrid-128"] = {
        {"mode", "multigrid"},
        {"grid_descriptors",
         {"paper-multigrid-4", "paper-multigrid-16", "paper-multigrid-32",
          "paper-multigrid-64", "paper-multigrid-128"}},
        {"data", {{"path", "data/modelnet10-128/toilet"}}},
        {"train", train_block(3000, 40, 40, 0.01, 20, 0.001, 0.5)},
        {"sampling", sampling_block(0.01, 20)}};
    t["paper-multigrid-128"]["train"]["ladder"] = {4, 4, 2, 2, 2};

    t["desk-synthesis"] = {{"mode", "train"},
                           {"descriptor", "desk-synthesis-16"},
                           {"data", desk_mix},
                           {"train", train_block(200, 8, 8, 0.01, 20, 0.001, 0.5)},
                           {"sampling", sampling_block(0.01, 20)}};
    t["desk-recovery"] = {{"mode", "recover"},
                          {"descriptor", "desk-recovery-16"},
                          {"data", desk_mix},
                          {"train", train_block(100, 8, 8, 0.0049, 30, 0.001, 0.5)},
                          {"sampling", sampling_block(0.0049, 90)}};
    t["desk-recovery"]["train"]["corruption"] = 0.7;
    json boxes = desk_mix;
    boxes["categories"] = {"box"};
    boxes["per_category"] = 60;
    t["desk-superres"] = {{"mode", "superres"},
                          {"descriptor", "desk-superres-16"},
                          {"data", boxes},
                          {"train", train_block(100, 8, 8, 0.01, 30, 0.001, 0.5)},
                          {"sampling", sampling_block(0.01, 90)}};
    t["desk-superres"]["train"]["scale_factor"] = 2;
    json single = desk_mix;
    single["categories"] = {"block-table"};
    single["per_category"] = 1;
    t["desk-coop"] = {{"mode", "coop"},
                      {"descriptor", "desk-coop-16"},
                      {"generator", "desk-coop-16"},
                      {"convention", "signed-unit"},
                      {"data", single},
                      {"train", train_block(200, 1, 8, 0.01, 20, 0.001, 0.4)},
                      {"sampling", sampling_block(0.01, 20)}};
    t["desk-coop"]["train"]["chain_init"] = "generator";
    t["desk-coop"]["train"]["generator_learning_rate"] = 0.001;
    t["desk-coop"]["train"]["generator_beta1"] = 0.6;
    t["desk-multigrid"] = {
        {"mode", "multigrid"},
        {"grid_descriptors", {"desk-multigrid-4", "desk-multigrid-8", "desk-multigrid-16"}},
        {"data", desk_mix},
        {"train", train_block(100, 8, 8, 0.01, 20, 0.001, 0.5)},
        {"sampling", sampling_block(0.01, 20)}};
    t["desk-multigrid"]["train"]["ladder"] = {4, 2, 2};
    return t;
  }();
  return table;
}

const json& preset_document(std::string_view name) {
  const auto& t = preset_table();
  auto it = t.find(name);
  if (it == t.end()) throw ConfigError("unknown config preset '" + std::string(name) + "'");
  return it->second;
}

void merge_into(json& base, const json& over) {
  for (auto it = over.begin(); it != over.end(); ++it) {
    if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object()) {
      merge_into(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

// ---------------------------------------------------------------------------
// Strict reader: every key must be consumed, else the leftover is reported.

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    try {
      if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
        if (!is_count(v)) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key_path(key) + "' has the wrong type");
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError("unknown config key '" + key_path(it.key()) + "'");
      }
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<std::size_t> read_sizes(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError("config key '" + path + "' must be an array");
  std::vector<std::size_t> out;
  for (const auto& e : v) {
    if (!is_count(e)) {
      throw ConfigError("config key '" + path + "' must hold non-negative integers");
    }
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

LayerSpec read_layer(const json& j, const std::string& path) {
  Reader r(j, path);
  std::string kind_name;
  if (!r.has("kind")) throw ConfigError("config key '" + path + ".kind' is required");
  r.get("kind", kind_name);
  auto kind = parse_layer_kind(kind_name);
  if (!kind) throw ConfigError("config key '" + path + ".kind' names unknown layer '" + kind_name + "'");
  LayerSpec s = LayerSpec::with_kind(*kind);
  r.get("kernel", s.kernel);
  r.get("stride", s.stride);
  r.get("channels", s.channels);
  r.get("bias", s.bias);
  if (r.has("reshape")) s.reshape_to = read_sizes(r.raw("reshape"), r.key_path("reshape"));
  r.finish();
  s.validate();
  return s;
}

std::vector<LayerSpec> read_layers(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError("config key '" + path + "' must be an array");
  std::vector<LayerSpec> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(read_layer(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Extent3 read_extent(const json& v, const std::string& path) {
  if (is_count(v)) {
    auto n = v.get<std::size_t>();
    return {n, n, n};
  }
  auto e = read_sizes(v, path);
  if (e.size() != 3) throw ConfigError("config key '" + path + "' must hold 3 extents");
  return {e[0], e[1], e[2]};
}

DescriptorArchitecture read_descriptor(const json& v, const std::string& path) {
  if (v.is_string()) {
    try {
      return descriptor_preset(v.get<std::string>());
    } catch (const ConfigError& e) {
      throw ConfigError("config key '" + path + "': " + e.what());
    }
  }
  Reader r(v, path);
  DescriptorArchitecture a;
  if (!r.has("grid") || !r.has("layers")) {
    throw ConfigError("config key '" + path + "' needs 'grid' and 'layers'");
  }
  a.grid = read_extent(r.raw("grid"), r.key_path("grid"));
  a.layers = read_layers(r.raw("layers"), r.key_path("layers"));
  r.finish();
  return a;
}

GeneratorArchitecture read_generator(const json& v, const std::string& path) {
  if (v.is_string()) {
    try {
      return generator_preset(v.get<std::string>());
    } catch (const ConfigError& e) {
      throw ConfigError("config key '" + path + "': " + e.what());
    }
  }
  Reader r(v, path);
  GeneratorArchitecture a;
  if (!r.has("grid") || !r.has("layers") || !r.has("latent_dim")) {
    throw ConfigError("config key '" + path + "' needs 'latent_dim', 'grid' and 'layers'");
  }
  r.get("latent_dim", a.latent_dim);
  a.grid = read_extent(r.raw("grid"), r.key_path("grid"));
  a.layers = read_layers(r.raw("layers"), r.key_path("layers"));
  r.finish();
  return a;
}

void read_train(const json& v, TrainConfig& t) {
  Reader r(v, "train");
  r.get("iterations", t.iterations);
  r.get("batch_size", t.batch_size);
  r.get("chains", t.chains);
  r.get("step_size", t.langevin.step_size);
  r.get("steps", t.langevin.steps);
  r.get("noise", t.langevin.noise);
  if (r.has("noise_off_after")) {
    const json& n = r.raw("noise_off_after");
    if (n.is_null()) {
      t.noise_off_after.reset();
    } else if (is_count(n)) {
      t.noise_off_after = n.get<std::size_t>();
    } else {
      throw ConfigError("config key 'train.noise_off_after' must be an integer or null");
    }
  }
  r.get("learning_rate", t.adam.learning_rate);
  r.get("beta1", t.adam.beta1);
  r.get("beta2", t.adam.beta2);
  r.get("epsilon", t.adam.epsilon);
  if (r.has("chain_init")) {
    std::string name;
    r.get("chain_init", name);
    auto c = parse_chain_init(name);
    if (!c) throw ConfigError("config key 'train.chain_init' has unknown value '" + name + "'");
    t.chain_init = *c;
  }
  r.get("seed", t.seed);
  r.get("corruption", t.corruption);
  r.get("refresh_masks", t.refresh_masks);
  r.get("scale_factor", t.scale_factor);
  if (r.has("ladder")) t.ladder = read_sizes(r.raw("ladder"), "train.ladder");
  r.get("histogram_bins", t.histogram_bins);
  r.get("generator_learning_rate", t.generator_adam.learning_rate);
  r.get("generator_beta1", t.generator_adam.beta1);
  r.get("generator_beta2", t.generator_adam.beta2);
  r.get("generator_epsilon", t.generator_adam.epsilon);
  r.get("generator_noise", t.generator_noise);
  r.finish();
}

RunConfig from_json(const json& doc) {
  Reader r(doc, "");
  RunConfig cfg;
  if (r.has("preset")) r.raw("preset");  // already merged
  if (r.has("mode")) {
    std::string m;
    r.get("mode", m);
    auto mode = parse_run_mode(m);
    if (!mode) throw ConfigError("config key 'mode' has unknown value '" + m + "'");
    cfg.mode = *mode;
  }
  if (r.has("descriptor")) cfg.descriptor = read_descriptor(r.raw("descriptor"), "descriptor");
  if (r.has("grid_descriptors")) {
    const json& g = r.raw("grid_descriptors");
    if (!g.is_array()) throw ConfigError("config key 'grid_descriptors' must be an array");
    for (std::size_t i = 0; i < g.size(); ++i) {
      cfg.grid_descriptors.push_back(
          read_descriptor(g[i], "grid_descriptors[" + std::to_string(i) + "]"));
    }
  }
  if (r.has("generator")) cfg.generator = read_generator(r.raw("generator"), "generator");
  r.get("ref_std", cfg.ref_std);
  r.get("generator_noise_std", cfg.generator_noise_std);
  if (r.has("convention")) {
    std::string c;
    r.get("convention", c);
    auto conv = parse_convention(c);
    if (!conv || *conv == ValueConvention::kBinary01) {
      throw ConfigError("config key 'convention' must be 'mean-subtracted' or 'signed-unit'");
    }
    cfg.convention = *conv;
  }
  if (r.has("data")) {
    Reader d(r.raw("data"), "data");
    if (d.has("path")) {
      std::string p;
      d.get("path", p);
      cfg.data.path = p;
    }
    if (d.has("categories")) {
      const json& c = d.raw("categories");
      if (!c.is_array()) throw ConfigError("config key 'data.categories' must be an array");
      cfg.data.categories.clear();
      for (const auto& e : c) {
        if (!e.is_string()) throw ConfigError("config key 'data.categories' must hold strings");
        cfg.data.categories.push_back(e.get<std::string>());
      }
    }
    d.get("per_category", cfg.data.per_category);
    d.get("resolution", cfg.data.resolution);
    d.get("seed", cfg.data.seed);
    d.finish();
  }
  if (r.has("train")) read_train(r.raw("train"), cfg.train);
  if (r.has("sampling")) {
    Reader s(r.raw("sampling"), "sampling");
    s.get("step_size", cfg.sampling.step_size);
    s.get("steps", cfg.sampling.steps);
    s.get("noise", cfg.sampling.noise);
    s.finish();
  }
  r.get("init_seed", cfg.init_seed);
  r.get("output_count", cfg.output_count);
  r.finish();
  return cfg;
}

json layer_to_json(const LayerSpec& s) {
  json j{{"kind", std::string(layer_kind_name(s.kind))}};
  switch (s.kind) {
    case LayerKind::kConv3d:
    case LayerKind::kDeconv3d:
      j["channels"] = s.channels;
      j["kernel"] = s.kernel;
      j["stride"] = s.stride;
      j["bias"] = s.bias;
      break;
    case LayerKind::kFullyConnected:
      j["channels"] = s.channels;
      j["bias"] = s.bias;
      if (!s.reshape_to.empty()) j["reshape"] = s.reshape_to;
      break;
    case LayerKind::kMaxPool3d:
      j["kernel"] = s.kernel;
      break;
    default:
      break;
  }
  return j;
}

json layers_to_json(const std::vector<LayerSpec>& layers) {
  json a = json::array();
  for (const auto& l : layers) a.push_back(layer_to_json(l));
  return a;
}

json extent_to_json(Extent3 e) { return json{e.d, e.h, e.w}; }

json descriptor_to_json(const DescriptorArchitecture& a) {
  return json{{"grid", extent_to_json(a.grid)}, {"layers", layers_to_json(a.layers)}};
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  sampling.validate();
  if (!(ref_std > 0.0)) throw ConfigError("config key 'ref_std' must be positive");
  if (generator_noise_std < 0.0) {
    throw ConfigError("config key 'generator_noise_std' must be non-negative");
  }
  if (!data.path && data.categories.empty()) {
    throw ConfigError("config key 'data' needs a 'path' or procedural 'categories'");
  }
  if (!data.path) {
    for (const auto& c : data.categories) {
      bool known = false;
      for (const auto& k : procedural_categories()) known = known || k == c;
      if (!known) throw ConfigError("config key 'data.categories' names unknown category '" + c + "'");
    }
    if (data.per_category == 0) throw ConfigError("config key 'data.per_category' must be >= 1");
    if (data.resolution < 8) throw ConfigError("config key 'data.resolution' must be >= 8");
  }
  if (mode == RunMode::kMultiGrid) {
    if (grid_descriptors.size() != train.ladder.size()) {
      throw ConfigError("config key 'grid_descriptors' needs one entry per 'train.ladder' step");
    }
    std::size_t edge = 1;
    for (std::size_t s = 0; s < grid_descriptors.size(); ++s) {
      if (grid_descriptors[s].layers.empty()) {
        throw ConfigError("config key 'grid_descriptors[" + std::to_string(s) + "]' has no layers");
      }
      edge *= train.ladder[s];
      Extent3 g = grid_descriptors[s].grid;
      if (g.d != edge || g.h != edge || g.w != edge) {
        throw ConfigError("config key 'grid_descriptors[" + std::to_string(s) +
                          "]' must act on a " + std::to_string(edge) + "^3 grid");
      }
    }
    if (!data.path && data.resolution != edge) {
      throw ConfigError("config key 'data.resolution' must equal the finest ladder grid");
    }
  } else {
    if (descriptor.layers.empty()) throw ConfigError("config key 'descriptor' is required");
    if (!data.path) {
      Extent3 g = descriptor.grid;
      if (g.d != data.resolution || g.h != data.resolution || g.w != data.resolution) {
        throw ConfigError("config key 'data.resolution' must match the descriptor grid");
      }
    }
  }
  if (mode == RunMode::kCoop) {
    if (!generator) throw ConfigError("config key 'generator' is required in coop mode");
    if (generator->latent_dim < 1) {
      throw ConfigError("config key 'generator.latent_dim' must be >= 1");
    }
    if (generator->layers.empty()) throw ConfigError("config key 'generator.layers' is empty");
    if (!(generator->grid == descriptor.grid)) {
      throw ConfigError("config key 'generator' must produce the descriptor grid");
    }
    if (train.chains < 2) throw ConfigError("config key 'train.chains' must be >= 2 in coop mode");
  }
  if (mode == RunMode::kSuperRes) {
    Extent3 g = descriptor.grid;
    std::size_t f = train.scale_factor;
    if (g.d % f || g.h % f || g.w % f) {
      throw ConfigError("config key 'train.scale_factor' must divide the descriptor grid");
    }
  }
}

std::vector<std::string> config_preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : preset_table()) names.push_back(name);
  return names;
}

std::string config_preset_json(std::string_view name) { return preset_document(name).dump(2); }

RunConfig parse_run_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  if (doc.contains("preset")) {
    if (!doc["preset"].is_string()) throw ConfigError("config key 'preset' must be a string");
    json base = preset_document(doc["preset"].get<std::string>());
    json over = doc;
    over.erase("preset");
    merge_into(base, over);
    doc = std::move(base);
  }
  RunConfig cfg = from_json(doc);
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

RunConfig preset_config(std::string_view name) {
  return parse_run_config(json{{"preset", std::string(name)}}.dump());
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["mode"] = std::string(run_mode_name(cfg.mode));
  if (!cfg.descriptor.layers.empty()) j["descriptor"] = descriptor_to_json(cfg.descriptor);
  if (!cfg.grid_descriptors.empty()) {
    json g = json::array();
    for (const auto& a : cfg.grid_descriptors) g.push_back(descriptor_to_json(a));
    j["grid_descriptors"] = g;
  }
  if (cfg.generator) {
    j["generator"] = {{"latent_dim", cfg.generator->latent_dim},
                      {"grid", extent_to_json(cfg.generator->grid)},
                      {"layers", layers_to_json(cfg.generator->layers)}};
  }
  j["ref_std"] = cfg.ref_std;
  j["generator_noise_std"] = cfg.generator_noise_std;
  j["convention"] = std::string(convention_name(cfg.convention));
  json d{{"categories", cfg.data.categories},
         {"per_category", cfg.data.per_category},
         {"resolution", cfg.data.resolution},
         {"seed", cfg.data.seed}};
  if (cfg.data.path) d["path"] = *cfg.data.path;
  j["data"] = d;
  const TrainConfig& t = cfg.train;
  j["train"] = {{"iterations", t.iterations},
                {"batch_size", t.batch_size},
                {"chains", t.chains},
                {"step_size", t.langevin.step_size},
                {"steps", t.langevin.steps},
                {"noise", t.langevin.noise},
                {"noise_off_after", t.noise_off_after ? json(*t.noise_off_after) : json(nullptr)},
                {"learning_rate", t.adam.learning_rate},
                {"beta1", t.adam.beta1},
                {"beta2", t.adam.beta2},
                {"epsilon", t.adam.epsilon},
                {"chain_init", std::string(chain_init_name(t.chain_init))},
                {"seed", t.seed},
                {"corruption", t.corruption},
                {"refresh_masks", t.refresh_masks},
                {"scale_factor", t.scale_factor},
                {"ladder", t.ladder},
                {"histogram_bins", t.histogram_bins},
                {"generator_learning_rate", t.generator_adam.learning_rate},
                {"generator_beta1", t.generator_adam.beta1},
                {"generator_beta2", t.generator_adam.beta2},
                {"generator_epsilon", t.generator_adam.epsilon},
                {"generator_noise", t.generator_noise}};
  j["sampling"] = {{"step_size", cfg.sampling.step_size},
                   {"steps", cfg.sampling.steps},
                   {"noise", cfg.sampling.noise}};
  j["init_seed"] = cfg.init_seed;
  j["output_count"] = cfg.output_count;
  return j.dump(2);
}

}  // namespace vebm
