// SPDX-License-Identifier: Apache-2.0
#include "gim/rng.hpp"

#include <cmath>
#include <numbers>

namespace gim {

double Rng::next_normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Box-Muller; u clamped away from 0 so log stays finite.
  double u = next_double();
  if (u < 0x1.0p-60) u = 0x1.0p-60;
  double v = next_double();
  double r = std::sqrt(-2.0 * std::log(u));
  double theta = 2.0 * std::numbers::pi * v;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

uint64_t sub_seed(uint64_t root, std::string_view name) {
  // FNV-1a over the name, folded into the root seed.
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
    h *= 0x100000001b3ULL;
  }
  Rng mix(root ^ h);
  return mix.next_u64();
}

}  // namespace gim
