#include "vebm/checkpoint.hpp"

#include <bit>

#include "json.hpp"

#include "vebm/data.hpp"
#include "vebm/errors.hpp"

namespace vebm {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'V', 'E', 'B', 'M'};

template <class U>
void put(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

class Cursor {
 public:
  explicit Cursor(std::string_view bytes) : bytes_(bytes) {}

  template <class U>
  U take() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[at_ + i])) << (8 * i);
    }
    at_ += sizeof(U);
    return v;
  }

  std::string_view take_bytes(std::size_t n) {
    need(n);
    auto s = bytes_.substr(at_, n);
    at_ += n;
    return s;
  }

  bool done() const { return at_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - at_ < n) throw FormatError("checkpoint: truncated");
  }

  std::string_view bytes_;
  std::size_t at_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  json header;
  header["config"] = json::parse(run_config_to_json(ckpt.config));
  header["data_mean"] = ckpt.data_mean;
  header["counters"] = ckpt.state.counters;
  header["reals"] = ckpt.state.reals;
  const std::string text = header.dump(2);

  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.state.tensors.size()));
  for (const auto& [name, t] : ckpt.state.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) put<std::uint64_t>(out, e);
    for (float v : t.data()) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Cursor c(bytes);
  if (c.take_bytes(4) != std::string_view(kMagic, 4)) throw FormatError("checkpoint: bad magic");
  const auto version = c.take<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto header_len = c.take<std::uint64_t>();
  if (header_len > bytes.size()) throw FormatError("checkpoint: truncated");
  const std::string_view text = c.take_bytes(static_cast<std::size_t>(header_len));

  Checkpoint ckpt;
  json header;
  try {
    header = json::parse(text);
    ckpt.data_mean = header.at("data_mean").get<double>();
    ckpt.state.counters = header.at("counters").get<std::map<std::string, std::uint64_t>>();
    ckpt.state.reals = header.at("reals").get<std::map<std::string, std::vector<double>>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
  }
  try {
    ckpt.config = parse_run_config(header.at("config").dump());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: stored config invalid: ") + e.what());
  }

  const auto count = c.take<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = c.take<std::uint32_t>();
    std::string name(c.take_bytes(name_len));
    const auto rank = c.take<std::uint32_t>();
    if (rank > 8) throw FormatError("checkpoint: tensor '" + name + "' has rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t volume = 1;
    for (auto& e : shape) {
      e = static_cast<std::size_t>(c.take<std::uint64_t>());
      if (e != 0 && volume > bytes.size() / e) throw FormatError("checkpoint: truncated");
      volume *= e;
    }
    if (volume > bytes.size() / 4) throw FormatError("checkpoint: truncated");
    std::vector<float> values(volume);
    for (auto& v : values) v = std::bit_cast<float>(c.take<std::uint32_t>());
    ckpt.state.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (!c.done()) throw FormatError("checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace vebm
