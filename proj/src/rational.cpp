// SPDX-License-Identifier: MIT
#include "smoothsel/rational.hpp"

#include <cctype>

namespace smoothsel {

Rat parse_rat(const std::string& raw) {
  std::string s;
  for (char ch : raw)
    if (!std::isspace(static_cast<unsigned char>(ch))) s.push_back(ch);
  if (s.empty()) throw Error("parse", "empty rational");
  auto dot = s.find('.');
  if (dot != std::string::npos) {
    if (s.find('/') != std::string::npos) throw Error("parse", "bad rational '" + raw + "'");
    bool neg = s[0] == '-';
    std::string body = (s[0] == '-' || s[0] == '+') ? s.substr(1) : s;
    dot = body.find('.');
    std::string digits = body.substr(0, dot) + body.substr(dot + 1);
    if (digits.empty()) throw Error("parse", "bad rational '" + raw + "'");
    for (char ch : digits)
      if (!std::isdigit(static_cast<unsigned char>(ch))) throw Error("parse", "bad rational '" + raw + "'");
    mpz_class num(digits, 10);
    mpz_class den;
    mpz_ui_pow_ui(den.get_mpz_t(), 10, body.size() - dot - 1);
    Rat r(num, den);
    r.canonicalize();
    return neg ? Rat(-r) : r;
  }
  Rat r;
  if (r.set_str(s, 10) != 0) throw Error("parse", "bad rational '" + raw + "'");
  if (r.get_den() == 0) throw Error("parse", "zero denominator in '" + raw + "'");
  r.canonicalize();
  return r;
}

std::string rat_to_string(const Rat& r) {
  return r.get_num().get_str() + "/" + r.get_den().get_str();
}

Rat rpow(const Rat& base, int exp) {
  if (exp < 0) {
    if (base == 0) throw Error("domain", "zero to a negative power");
    return Rat(1) / rpow(base, -exp);
  }
  Rat out(1);
  mpz_pow_ui(out.get_num_mpz_t(), base.get_num_mpz_t(), static_cast<unsigned long>(exp));
  mpz_pow_ui(out.get_den_mpz_t(), base.get_den_mpz_t(), static_cast<unsigned long>(exp));
  return out;
}

Rat pow2(int k) {
  Rat r(1);
  if (k >= 0)
    mpq_mul_2exp(r.get_mpq_t(), r.get_mpq_t(), static_cast<unsigned long>(k));
  else
    mpq_div_2exp(r.get_mpq_t(), r.get_mpq_t(), static_cast<unsigned long>(-k));
  return r;
}

Rat dist2(const Point& x, const Point& y) {
  Rat s(0);
  for (size_t i = 0; i < x.size(); ++i) {
    Rat d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

static bool mpz_square_root(const mpz_class& v, mpz_class& root) {
  if (v < 0) return false;
  mpz_class rem;
  mpz_sqrtrem(root.get_mpz_t(), rem.get_mpz_t(), v.get_mpz_t());
  return rem == 0;
}

SqrtEnclosure sqrt_enclosure(const Rat& q, int bits) {
  if (q < 0) throw Error("domain", "square root of a negative rational");
  mpz_class rn, rd;
  if (mpz_square_root(q.get_num(), rn) && mpz_square_root(q.get_den(), rd)) {
    Rat r(rn, rd);
    r.canonicalize();
    return {r, r, true};
  }
  // floor(sqrt(q * 4^bits)) / 2^bits
  Rat scaled = q * pow2(2 * bits);
  mpz_class fl = scaled.get_num() / scaled.get_den();
  mpz_class root;
  mpz_sqrt(root.get_mpz_t(), fl.get_mpz_t());
  Rat lo = Rat(root) * pow2(-bits);
  Rat hi = Rat(root + 1) * pow2(-bits);
  return {lo, hi, false};
}

SqrtEnclosure dist_pow(const Point& x, const Point& y, int k, int bits) {
  Rat d2 = dist2(x, y);
  if (k % 2 == 0) {
    Rat v = rpow(d2, k / 2);
    return {v, v, true};
  }
  SqrtEnclosure d = sqrt_enclosure(d2, bits);
  if (d.exact) {
    Rat v = rpow(d.lo, k);
    return {v, v, true};
  }
  Rat even = rpow(d2, (k - 1) / 2);
  return {d.lo * even, d.hi * even, false};
}

double to_double(const Rat& r) { return r.get_d(); }

}  // namespace smoothsel
