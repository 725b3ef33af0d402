// SPDX-License-Identifier: MIT
#pragma once

#include <random>

#include "smoothsel/rational.hpp"

namespace testutil {

inline smoothsel::Rat rand_rat(std::mt19937_64& rng, int lo, int hi, int max_den = 4) {
  std::uniform_int_distribution<int> num(lo * max_den, hi * max_den);
  std::uniform_int_distribution<int> den(1, max_den);
  smoothsel::Rat r(num(rng), den(rng));
  r.canonicalize();
  return r;
}

inline smoothsel::Rat R(const char* s) { return smoothsel::parse_rat(s); }

}  // namespace testutil
