// SPDX-License-Identifier: MIT
#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace smoothsel {

using Rat = mpq_class;
using Point = std::vector<Rat>;
using RatVec = std::vector<Rat>;

/// num/den in lowest terms; mpq_class(num, den) alone does not reduce.
inline Rat make_rat(long num, long den) {
  Rat r(num, den);
  r.canonicalize();
  return r;
}

/// Parses "p/q", "p" or a finite decimal such as "-0.125".
Rat parse_rat(const std::string& s);
/// Canonical "p/q" form; integers are written as "p/1".
std::string rat_to_string(const Rat& r);

inline Rat rabs(const Rat& r) { return r < 0 ? Rat(-r) : r; }

Rat rpow(const Rat& base, int exp);

/// 2^k for any integer k.
Rat pow2(int k);

/// Squared Euclidean distance, always exact.
Rat dist2(const Point& x, const Point& y);

/// Certified rational bounds lo <= sqrt(q) <= hi; exact when q is a rational square.
struct SqrtEnclosure {
  Rat lo;
  Rat hi;
  bool exact = false;
};
SqrtEnclosure sqrt_enclosure(const Rat& q, int bits = 64);

/// Bounds on |x-y|^k; exact whenever n == 1 or the distance is rational.
SqrtEnclosure dist_pow(const Point& x, const Point& y, int k, int bits = 64);

double to_double(const Rat& r);

class Error : public std::runtime_error {
 public:
  Error(std::string tag, const std::string& what)
      : std::runtime_error(tag + ": " + what), tag_(std::move(tag)) {}
  const std::string& tag() const { return tag_; }

 private:
  std::string tag_;
};

}  // namespace smoothsel
