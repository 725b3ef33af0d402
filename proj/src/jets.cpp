// SPDX-License-Identifier: MIT
#include "smoothsel/jets.hpp"

#include <algorithm>
#include <mutex>

namespace smoothsel {

int order(const MultiIndex& a) {
  int s = 0;
  for (int v : a) s += v;
  return s;
}

MultiIndex mi_add(const MultiIndex& a, const MultiIndex& b) {
  MultiIndex c(a.size());
  for (size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
  return c;
}

bool mi_leq(const MultiIndex& a, const MultiIndex& b) {
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] > b[i]) return false;
  return true;
}

mpz_class mi_factorial(const MultiIndex& a) {
  mpz_class out(1);
  for (int v : a) {
    mpz_class f;
    mpz_fac_ui(f.get_mpz_t(), static_cast<unsigned long>(v));
    out *= f;
  }
  return out;
}

bool mi_less(const MultiIndex& a, const MultiIndex& b) {
  int sa = 0, sb = 0;
  int k_last = -1;
  bool a_smaller = false;
  for (size_t k = 0; k < a.size(); ++k) {
    sa += a[k];
    sb += b[k];
    if (sa != sb) {
      k_last = static_cast<int>(k);
      a_smaller = sa < sb;
    }
  }
  return k_last >= 0 && a_smaller;
}

bool multiindex_less(const MultiIndex& a, const MultiIndex& b) {
  if (a.size() != b.size()) throw Error("domain", "multiindices of different length");
  if (a == b) throw Error("domain", "multiindex_less needs distinct arguments");
  return mi_less(a, b);
}

std::vector<MultiIndex> enumerate_multiindices(int m, int n) {
  if (m < 1 || n < 1) throw Error("domain", "enumerate_multiindices needs m >= 1 and n >= 1");
  std::vector<MultiIndex> out;
  MultiIndex cur(n, 0);
  // odometer over the box [0, m-1]^n, keeping the simplex
  while (true) {
    if (order(cur) <= m - 1) out.push_back(cur);
    int i = 0;
    while (i < n) {
      if (++cur[i] <= m - 1) break;
      cur[i] = 0;
      ++i;
    }
    if (i == n) break;
  }
  std::sort(out.begin(), out.end(), mi_less);
  return out;
}

static IndexSet sorted_unique(IndexSet a) {
  std::sort(a.begin(), a.end(), mi_less);
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

bool subset_less(const IndexSet& a_in, const IndexSet& b_in) {
  IndexSet a = sorted_unique(a_in), b = sorted_unique(b_in);
  if (a == b) throw Error("domain", "subset_less needs distinct sets");
  IndexSet sym;
  std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(sym), mi_less);
  const MultiIndex& least = sym.front();
  return std::binary_search(a.begin(), a.end(), least, mi_less);
}

JetSpace::JetSpace(int m_, int n_) : m(m_), n(n_), indices(enumerate_multiindices(m_, n_)) {
  const size_t d = indices.size();
  for (size_t i = 0; i < d; ++i) {
    pos_[indices[i]] = static_cast<int>(i);
    orders_.push_back(order(indices[i]));
    fact_.emplace_back(mi_factorial(indices[i]));
  }
  sum_.assign(d * d, -1);
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < d; ++j) sum_[i * d + j] = index_of(mi_add(indices[i], indices[j]));
  for (int c = 0; c < n; ++c) {
    MultiIndex e(n, 0);
    e[c] = 1;
    units_.push_back(e);
  }
}

JetSpacePtr JetSpace::make(int m, int n) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, JetSpacePtr> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(m, n);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto sp = std::make_shared<const JetSpace>(m, n);
  cache[key] = sp;
  return sp;
}

int JetSpace::index_of(const MultiIndex& a) const {
  auto it = pos_.find(a);
  return it == pos_.end() ? -1 : it->second;
}

const MultiIndex& JetSpace::unit(int coord) const { return units_.at(static_cast<size_t>(coord)); }

IndexSet JetSpace::normalize(IndexSet a) const {
  for (const auto& x : a)
    if (index_of(x) < 0) throw Error("domain", "multiindex outside the jet space");
  return sorted_unique(std::move(a));
}

uint64_t JetSpace::mask_of(const IndexSet& a) const {
  if (dim() > 64) throw Error("budget", "jet space too large for a bitmask");
  uint64_t m_ = 0;
  for (const auto& x : a) {
    int i = index_of(x);
    if (i < 0) throw Error("domain", "multiindex outside the jet space");
    m_ |= uint64_t(1) << i;
  }
  return m_;
}

IndexSet JetSpace::set_of(uint64_t mask) const {
  IndexSet out;
  for (size_t i = 0; i < dim(); ++i)
    if (mask & (uint64_t(1) << i)) out.push_back(indices[i]);
  return out;
}

bool same_space(const JetSpace& a, const JetSpace& b) { return a.m == b.m && a.n == b.n; }

static std::vector<uint64_t> closure_masks(const JetSpace& s) {
  std::vector<uint64_t> cl(s.dim(), 0);
  for (size_t i = 0; i < s.dim(); ++i)
    for (size_t j = 0; j < s.dim(); ++j) {
      int k = s.sum_index(i, j);
      if (k >= 0) cl[i] |= uint64_t(1) << k;
    }
  return cl;
}

static bool monotonic_mask(uint64_t a, const std::vector<uint64_t>& cl) {
  for (size_t i = 0; i < cl.size(); ++i)
    if ((a >> i) & 1)
      if ((cl[i] & ~a) != 0) return false;
  return true;
}

bool is_monotonic(const IndexSet& a, const JetSpace& space) {
  IndexSet s = space.normalize(a);
  for (const auto& alpha : s)
    for (const auto& gamma : space.indices) {
      MultiIndex sum = mi_add(alpha, gamma);
      if (space.index_of(sum) >= 0 && !std::binary_search(s.begin(), s.end(), sum, mi_less)) return false;
    }
  return true;
}

int label_depth(const IndexSet& a, const JetSpace& space) {
  if (space.dim() > 12) throw Error("budget", "label_depth limited to jet dimension 12");
  if (!is_monotonic(a, space)) throw Error("domain", "label_depth needs a monotonic set");
  auto cl = closure_masks(space);
  uint64_t am = space.mask_of(a);
  const uint64_t total = uint64_t(1) << space.dim();
  int count = 0;
  for (uint64_t b = 0; b < total; ++b) {
    if (b == am || !monotonic_mask(b, cl)) continue;
    uint64_t sym = b ^ am;
    uint64_t low = sym & (~sym + 1);
    if (b & low) ++count;  // b < a
  }
  return 1 + 3 * count;
}

IndexSet monotonic_span(const IndexSet& a, const JetSpace& space) {
  IndexSet out;
  for (const auto& alpha : space.normalize(a))
    for (const auto& gamma : space.indices) {
      MultiIndex sum = mi_add(alpha, gamma);
      if (space.index_of(sum) >= 0) out.push_back(sum);
    }
  return sorted_unique(std::move(out));
}

Jet::Jet(JetSpacePtr s, Point b) : space(std::move(s)), base(std::move(b)), coeffs(space->dim(), Rat(0)) {}
Jet::Jet(JetSpacePtr s, Point b, RatVec c) : space(std::move(s)), base(std::move(b)), coeffs(std::move(c)) {
  if (coeffs.size() != space->dim()) throw Error("domain", "jet coefficient count does not match the space");
}

const Rat& Jet::at(const MultiIndex& a) const {
  int i = space->index_of(a);
  if (i < 0) throw Error("domain", "multiindex outside the jet space");
  return coeffs[static_cast<size_t>(i)];
}
Rat& Jet::at(const MultiIndex& a) {
  int i = space->index_of(a);
  if (i < 0) throw Error("domain", "multiindex outside the jet space");
  return coeffs[static_cast<size_t>(i)];
}

Jet jet_zero(const JetSpacePtr& space, const Point& base) { return Jet(space, base); }

Jet jet_constant(const JetSpacePtr& space, const Point& base, const Rat& c) {
  Jet j(space, base);
  j.coeffs[0] = c;
  return j;
}

Jet jet_monomial(const JetSpacePtr& space, const Point& base, const MultiIndex& omega, const Rat& coef) {
  Jet j(space, base);
  int i = space->index_of(omega);
  if (i >= 0) j.coeffs[static_cast<size_t>(i)] = coef * space->factorial(static_cast<size_t>(i));
  return j;
}

static void check_compatible(const Jet& a, const Jet& b) {
  if (!same_space(*a.space, *b.space)) throw Error("domain", "jets from different spaces");
  if (a.base != b.base) throw Error("domain", "jets anchored at different points");
}

Jet operator+(const Jet& a, const Jet& b) {
  check_compatible(a, b);
  Jet c = a;
  for (size_t i = 0; i < c.coeffs.size(); ++i) c.coeffs[i] += b.coeffs[i];
  return c;
}

Jet operator-(const Jet& a, const Jet& b) {
  check_compatible(a, b);
  Jet c = a;
  for (size_t i = 0; i < c.coeffs.size(); ++i) c.coeffs[i] -= b.coeffs[i];
  return c;
}

Jet operator*(const Rat& s, const Jet& a) {
  Jet c = a;
  for (auto& v : c.coeffs) v *= s;
  return c;
}

bool operator==(const Jet& a, const Jet& b) {
  return same_space(*a.space, *b.space) && a.base == b.base && a.coeffs == b.coeffs;
}

Rat mono_pow(const RatVec& lambda, const MultiIndex& beta) {
  Rat out(1);
  for (size_t i = 0; i < beta.size(); ++i) out *= rpow(lambda[i], beta[i]);
  return out;
}

Rat eval_jet_derivative(const Jet& p, const MultiIndex& beta, const Point& y) {
  const JetSpace& s = *p.space;
  int ob = order(beta);
  if (ob > s.m) throw Error("domain", "derivative order exceeds m");
  if (ob == s.m) return Rat(0);
  RatVec h(y.size());
  for (size_t i = 0; i < y.size(); ++i) h[i] = y[i] - p.base[i];
  Rat total(0);
  int bi = s.index_of(beta);
  for (size_t g = 0; g < s.dim(); ++g) {
    int k = s.sum_index(static_cast<size_t>(bi), g);
    if (k < 0) continue;
    const Rat& c = p.coeffs[static_cast<size_t>(k)];
    if (c == 0) continue;
    total += c * mono_pow(h, s.indices[g]) / s.factorial(g);
  }
  return total;
}

Jet recenter_jet(const Jet& p, const Point& y) {
  if (p.base == y) return p;
  Jet out(p.space, y);
  for (size_t i = 0; i < p.space->dim(); ++i) out.coeffs[i] = eval_jet_derivative(p, p.space->indices[i], y);
  return out;
}

RatMatrix recenter_matrix(const JetSpace& s, const Point& from, const Point& to) {
  const size_t d = s.dim();
  RatMatrix r(d, RatVec(d, Rat(0)));
  RatVec h(from.size());
  for (size_t i = 0; i < from.size(); ++i) h[i] = to[i] - from[i];
  for (size_t a = 0; a < d; ++a)
    for (size_t g = 0; g < d; ++g) {
      int k = s.sum_index(a, g);
      if (k < 0) continue;
      r[a][static_cast<size_t>(k)] += mono_pow(h, s.indices[g]) / s.factorial(g);
    }
  return r;
}

Jet jet_multiply(const Jet& p_in, const Jet& q_in, const Point& x) {
  if (!same_space(*p_in.space, *q_in.space)) throw Error("domain", "jets from different spaces");
  Jet p = recenter_jet(p_in, x), q = recenter_jet(q_in, x);
  const JetSpace& s = *p.space;
  Jet out(p.space, x);
  // d^(g+h)(PQ) picks up binom(g+h, g) d^g P d^h Q
  for (size_t g = 0; g < s.dim(); ++g) {
    if (p.coeffs[g] == 0) continue;
    for (size_t h = 0; h < s.dim(); ++h) {
      int k = s.sum_index(g, h);
      if (k < 0 || q.coeffs[h] == 0) continue;
      Rat binom = s.factorial(static_cast<size_t>(k)) / (s.factorial(g) * s.factorial(h));
      out.coeffs[static_cast<size_t>(k)] += binom * p.coeffs[g] * q.coeffs[h];
    }
  }
  return out;
}

Jet jet_inverse(const Jet& p) {
  const Rat& c = p.coeffs[0];
  if (c == 0) throw Error("domain", "jet_inverse of a jet vanishing at its base");
  // 1/P = (1/c) * sum_k (-N/c)^k with N = P - c nilpotent
  Jet n = p;
  n.coeffs[0] = 0;
  Jet step = (Rat(-1) / c) * n;
  Jet term = jet_constant(p.space, p.base, Rat(1));
  Jet acc = term;
  for (int k = 1; k < p.space->m; ++k) {
    term = jet_multiply(term, step, p.base);
    acc = acc + term;
  }
  return (Rat(1) / c) * acc;
}

Jet jet_compose_diag(const Jet& p, const RatVec& lambda) {
  Jet out = p;
  for (size_t i = 0; i < p.space->dim(); ++i) out.coeffs[i] *= mono_pow(lambda, p.space->indices[i]);
  return out;
}

std::optional<RatVec> solve_linear(RatMatrix a, RatVec b) {
  const size_t n = a.size();
  for (size_t col = 0; col < n; ++col) {
    size_t piv = col;
    while (piv < n && sgn(a[piv][col]) == 0) ++piv;
    if (piv == n) return std::nullopt;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (size_t r = 0; r < n; ++r) {
      if (r == col || sgn(a[r][col]) == 0) continue;
      const Rat f = a[r][col] / a[col][col];
      for (size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (size_t i = 0; i < n; ++i) b[i] /= a[i][i];
  return b;
}

std::optional<RatMatrix> invert_matrix(const RatMatrix& a) {
  const size_t n = a.size();
  RatMatrix inv(n, RatVec(n, Rat(0)));
  for (size_t j = 0; j < n; ++j) {
    RatVec e(n, Rat(0));
    e[j] = 1;
    auto col = solve_linear(a, e);
    if (!col) return std::nullopt;
    for (size_t i = 0; i < n; ++i) inv[i][j] = (*col)[i];
  }
  return inv;
}

}  // namespace smoothsel
