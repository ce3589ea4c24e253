#include "amrl/rng.hpp"

#include <sstream>
#include <stdexcept>

namespace amrl {

std::string rng_state(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void set_rng_state(Rng& rng, const std::string& state) {
  std::istringstream in(state);
  in >> rng;
  if (!in) throw std::runtime_error("malformed RNG state");
}

}  // namespace amrl
