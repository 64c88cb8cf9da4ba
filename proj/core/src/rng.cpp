#include "vebm/rng.hpp"

#include <sstream>

#include "vebm/errors.hpp"

namespace vebm {

std::string Rng::serialize() const {
  std::ostringstream os;
  os << engine_ << ' ' << normal_ << ' ' << uniform_;
  return os.str();
}

Rng Rng::deserialize(std::string_view text) {
  Rng rng;
  std::istringstream is{std::string(text)};
  is >> rng.engine_ >> rng.normal_ >> rng.uniform_;
  if (!is) throw FormatError("corrupt RNG state");
  return rng;
}

}  // namespace vebm
