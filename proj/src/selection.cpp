// SPDX-License-Identifier: MIT
#include "smoothsel/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace smoothsel {

namespace {

using i128 = __int128;

std::string cube_str(const DyadicCube& q) {
  std::ostringstream os;
  os << "level " << q.level << " corner (";
  for (size_t i = 0; i < q.corner.size(); ++i) os << (i ? "," : "") << q.corner[i];
  os << ")";
  return os.str();
}

long floor_div2(long v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); }

Rat binom_rat(int n, int k) {
  mpz_class r;
  mpz_bin_uiui(r.get_mpz_t(), static_cast<unsigned long>(n), static_cast<unsigned long>(k));
  return Rat(r);
}

// squared distance from x to the closed box
Rat box_dist2(const RatBox& b, const Point& x) {
  Rat s(0);
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i] < b.lo[i]) s += (b.lo[i] - x[i]) * (b.lo[i] - x[i]);
    else if (x[i] > b.hi[i]) s += (x[i] - b.hi[i]) * (x[i] - b.hi[i]);
  }
  return s;
}

}  // namespace

DyadicCube DyadicCube::parent() const {
  DyadicCube p{level + 1, corner};
  for (auto& c : p.corner) c = floor_div2(c);
  return p;
}

std::vector<DyadicCube> DyadicCube::children() const {
  const size_t n = corner.size();
  std::vector<DyadicCube> out;
  for (size_t mask = 0; mask < (size_t{1} << n); ++mask) {
    DyadicCube c{level - 1, corner};
    for (size_t i = 0; i < n; ++i) c.corner[i] = 2 * corner[i] + static_cast<long>((mask >> i) & 1);
    out.push_back(std::move(c));
  }
  return out;
}

bool cube_less(const DyadicCube& a, const DyadicCube& b) {
  if (a.level != b.level) return a.level < b.level;
  return a.corner < b.corner;
}

bool RatBox::contains(const Point& x) const {
  for (size_t i = 0; i < lo.size(); ++i)
    if (x[i] < lo[i] || x[i] > hi[i]) return false;
  return true;
}

bool RatBox::contains(const RatBox& b) const {
  for (size_t i = 0; i < lo.size(); ++i)
    if (b.lo[i] < lo[i] || b.hi[i] > hi[i]) return false;
  return true;
}

bool RatBox::meets(const RatBox& b) const {
  for (size_t i = 0; i < lo.size(); ++i)
    if (b.hi[i] < lo[i] || b.lo[i] > hi[i]) return false;
  return true;
}

RatBox dilate(const DyadicCube& q, const Rat& r) {
  const Rat s = q.side();
  const Rat half = r * s / 2;
  RatBox b;
  for (long c : q.corner) {
    Rat centre = (Rat(c) + Rat(1, 2)) * s;
    b.lo.push_back(centre - half);
    b.hi.push_back(centre + half);
  }
  return b;
}

CZPredicate simplified_predicate(std::vector<Point> E) {
  return {"simplified", [E = std::move(E)](const DyadicCube& q) {
            RatBox b = dilate(q, Rat(5));
            int count = 0;
            for (const auto& x : E)
              if (b.contains(x) && ++count > 1) return false;
            return true;
          }};
}

CZDecomposition cz_decompose(const DyadicCube& Q0, const std::vector<Point>& E, const CZPredicate* predicate,
                             const CZConfig& cfg) {
  const size_t n = Q0.corner.size();
  if (n == 0) throw Error("domain", "cz_decompose needs n >= 1");
  for (const auto& x : E)
    if (x.size() != n) throw Error("domain", "point dimension differs from the cube");
  CZPredicate simple;
  if (!predicate) {
    simple = simplified_predicate(E);
    predicate = &simple;
  }
  const Rat r65(65, 64);
  const RatBox five0 = dilate(Q0, Rat(5));
  const RatBox near0 = dilate(Q0, r65);
  CZDecomposition dec{Q0, {}, predicate->tag};

  std::vector<DyadicCube> stack;
  size_t roots = 1;
  for (size_t i = 0; i < n; ++i) roots *= 5;
  for (size_t r = 0; r < roots; ++r) {
    DyadicCube c{Q0.level, Q0.corner};
    size_t t = r;
    for (size_t i = 0; i < n; ++i) {
      c.corner[i] += static_cast<long>(t % 5) - 2;
      t /= 5;
    }
    stack.push_back(std::move(c));
  }
  while (!stack.empty()) {
    DyadicCube q = std::move(stack.back());
    stack.pop_back();
    if (!dilate(q, r65).meets(near0)) continue;
    if (five0.contains(dilate(q, Rat(5))) && predicate->ok(q)) {
      dec.leaves.push_back(std::move(q));
      continue;
    }
    if (q.level <= Q0.level - cfg.max_depth)
      throw Error("budget", "CZ descent reached the minimum level at cube " + cube_str(q));
    for (auto& c : q.children()) stack.push_back(std::move(c));
  }
  std::sort(dec.leaves.begin(), dec.leaves.end(), cube_less);
  return dec;
}

// ---------------------------------------------------------------------------

namespace {

// Integer geometry in units of 2^(kmin - 7), so every 65/64 margin is an integer.
struct IntGeom {
  int kmin;
  const DyadicCube& root;
  i128 scale(int level) const { return static_cast<i128>(1) << (level - kmin + 7); }
  i128 lo(const DyadicCube& q, size_t i) const {
    return static_cast<i128>(q.corner[i]) * scale(q.level) -
           static_cast<i128>(root.corner[i]) * scale(root.level);
  }
  i128 margin(int level) const { return static_cast<i128>(1) << (level - kmin); }
};

mpz_class to_mpz(i128 v) {
  bool neg = v < 0;
  unsigned __int128 u = neg ? static_cast<unsigned __int128>(-v) : static_cast<unsigned __int128>(v);
  mpz_class hi(static_cast<unsigned long>(u >> 64)), lo(static_cast<unsigned long>(u & ~0UL));
  mpz_class r = (hi << 64) + lo;
  return neg ? mpz_class(-r) : r;
}

}  // namespace

CZReport check_cz_geometry(const CZDecomposition& dec) {
  CZReport rep;
  const auto& L = dec.leaves;
  const size_t n = dec.root.corner.size();
  if (L.empty()) {
    rep.violations.push_back("coverage: no leaves");
    return rep;
  }
  int kmin = dec.root.level;
  for (const auto& q : L) {
    if (q.corner.size() != n) {
      rep.violations.push_back("dimension mismatch at " + cube_str(q));
      return rep;
    }
    kmin = std::min(kmin, q.level);
  }
  if (dec.root.level - kmin > 60) {
    rep.violations.push_back("levels span too wide to check");
    return rep;
  }
  IntGeom g{kmin, dec.root};
  struct B {
    std::vector<i128> lo, hi;
    i128 m;
  };
  std::vector<B> boxes;
  for (const auto& q : L) {
    B b;
    for (size_t i = 0; i < n; ++i) {
      b.lo.push_back(g.lo(q, i));
      b.hi.push_back(b.lo.back() + g.scale(q.level));
    }
    b.m = g.margin(q.level);
    boxes.push_back(std::move(b));
  }
  B root;
  for (size_t i = 0; i < n; ++i) {
    root.lo.push_back(-g.margin(dec.root.level));
    root.hi.push_back(g.scale(dec.root.level) + g.margin(dec.root.level));
  }

  for (size_t a = 0; a < L.size(); ++a)
    for (size_t b = a + 1; b < L.size(); ++b) {
      ++rep.pairs_checked;
      bool overlap = true, touch = true;
      for (size_t i = 0; i < n; ++i) {
        const B &p = boxes[a], &q = boxes[b];
        if (!(p.lo[i] < q.hi[i] && q.lo[i] < p.hi[i])) overlap = false;
        if (p.lo[i] - p.m > q.hi[i] + q.m || q.lo[i] - q.m > p.hi[i] + p.m) touch = false;
      }
      if (overlap) rep.violations.push_back("disjointness: " + cube_str(L[a]) + " meets " + cube_str(L[b]));
      if (touch && std::abs(L[a].level - L[b].level) > 1)
        rep.violations.push_back("neighbour ratio: " + cube_str(L[a]) + " touches " + cube_str(L[b]));
    }

  mpz_class want(1), got(0);
  for (size_t i = 0; i < n; ++i) want *= to_mpz(root.hi[i] - root.lo[i]);
  for (const auto& b : boxes) {
    mpz_class v(1);
    for (size_t i = 0; i < n; ++i) {
      i128 w = std::min(b.hi[i], root.hi[i]) - std::max(b.lo[i], root.lo[i]);
      if (w <= 0) {
        v = 0;
        break;
      }
      v *= to_mpz(w);
    }
    got += v;
  }
  if (got != want) {
    std::ostringstream os;
    os << "coverage: leaves cover " << Rat(got, want).get_str() << " of the 65/64-dilate of the root";
    // locate one uncovered dyadic cube
    std::function<bool(const DyadicCube&)> find = [&](const DyadicCube& q) -> bool {
      bool inside_any = false, meets_any = false;
      std::vector<i128> lo(n), hi(n);
      for (size_t i = 0; i < n; ++i) {
        lo[i] = g.lo(q, i);
        hi[i] = lo[i] + g.scale(q.level);
        if (!(lo[i] < root.hi[i] && root.lo[i] < hi[i])) return false;
      }
      for (const auto& b : boxes) {
        bool in = true, meet = true;
        for (size_t i = 0; i < n; ++i) {
          if (!(b.lo[i] <= lo[i] && hi[i] <= b.hi[i])) in = false;
          if (!(b.lo[i] < hi[i] && lo[i] < b.hi[i])) meet = false;
        }
        inside_any = inside_any || in;
        meets_any = meets_any || meet;
        if (in) break;
      }
      if (inside_any) return false;
      if (!meets_any) {
        os << "; uncovered " << cube_str(q);
        return true;
      }
      if (q.level <= kmin) return false;
      for (const auto& c : q.children())
        if (find(c)) return true;
      return false;
    };
    size_t roots = 1;
    for (size_t i = 0; i < n; ++i) roots *= 3;
    for (size_t r = 0; r < roots; ++r) {
      DyadicCube c = dec.root;
      size_t t = r;
      for (size_t i = 0; i < n; ++i) {
        c.corner[i] += static_cast<long>(t % 3) - 1;
        t /= 3;
      }
      if (find(c)) break;
    }
    rep.violations.push_back(os.str());
  }
  return rep;
}

// ---------------------------------------------------------------------------

Rat bump_margin() { return Rat(1, 128); }

namespace {

std::vector<Rat> smoothstep_coeffs(int m) {
  // S(t) = t^(m+1) sum_k C(m+k, k) (1-t)^k
  std::vector<Rat> c(static_cast<size_t>(2 * m + 2), Rat(0));
  for (int k = 0; k <= m; ++k) {
    Rat w = binom_rat(m + k, k);
    for (int j = 0; j <= k; ++j) {
      Rat term = w * binom_rat(k, j);
      if (j % 2) term = -term;
      c[static_cast<size_t>(m + 1 + j)] += term;
    }
  }
  return c;
}

std::vector<Rat> poly_derivative(const std::vector<Rat>& c) {
  std::vector<Rat> d;
  for (size_t i = 1; i < c.size(); ++i) d.push_back(c[i] * static_cast<long>(i));
  return d;
}

template <class T>
T horner(const std::vector<Rat>& c, const T& t) {
  T acc = T(0);
  for (size_t i = c.size(); i-- > 0;) acc = acc * t + T(c[i].get_d());
  return acc;
}

Rat horner_rat(const std::vector<Rat>& c, const Rat& t) {
  Rat acc(0);
  for (size_t i = c.size(); i-- > 0;) acc = acc * t + c[i];
  return acc;
}

// d^j/dx^j of the 1-D bump on [a, a+s], j = 0..m.
std::vector<Rat> bump1d(const std::vector<std::vector<Rat>>& ders, const Rat& a, const Rat& s, const Rat& x, int m) {
  std::vector<Rat> out(static_cast<size_t>(m + 1), Rat(0));
  const Rat eta = s * bump_margin();
  if (x < a - eta || x > a + s + eta) return out;
  if (x >= a && x <= a + s) {
    out[0] = 1;
    return out;
  }
  const bool left = x < a;
  Rat t = left ? Rat((x - (a - eta)) / eta) : Rat((a + s + eta - x) / eta);
  Rat scale(1);
  for (int j = 0; j <= m; ++j) {
    Rat v = horner_rat(ders[static_cast<size_t>(j)], t) * scale;
    out[static_cast<size_t>(j)] = (!left && j % 2) ? Rat(-v) : v;
    scale /= eta;
  }
  return out;
}

std::vector<double> bump1d_d(const std::vector<std::vector<Rat>>& ders, double a, double s, double x, int m) {
  std::vector<double> out(static_cast<size_t>(m + 1), 0.0);
  const double eta = s / 128.0;
  if (x < a - eta || x > a + s + eta) return out;
  if (x >= a && x <= a + s) {
    out[0] = 1;
    return out;
  }
  const bool left = x < a;
  double t = left ? (x - (a - eta)) / eta : (a + s + eta - x) / eta;
  double scale = 1;
  for (int j = 0; j <= m; ++j) {
    double v = horner(ders[static_cast<size_t>(j)], t) * scale;
    out[static_cast<size_t>(j)] = (!left && j % 2) ? -v : v;
    scale /= eta;
  }
  return out;
}

std::vector<double> dmul(const std::vector<PartitionOfUnity::MulTerm>& tab, const std::vector<double>& a,
                         const std::vector<double>& b) {
  std::vector<double> out(a.size(), 0.0);
  for (const auto& t : tab) out[t.k] += t.binom * a[t.g] * b[t.h];
  return out;
}

// f(u) composed with D, given c_j = f^(j)(D0) / j!.
std::vector<double> dcompose(const std::vector<PartitionOfUnity::MulTerm>& tab, const std::vector<double>& D,
                             const std::vector<double>& c) {
  std::vector<double> d = D;
  d[0] = 0;
  std::vector<double> acc(D.size(), 0.0), pw(D.size(), 0.0);
  pw[0] = 1;
  for (size_t j = 0; j < c.size(); ++j) {
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += c[j] * pw[i];
    pw = dmul(tab, pw, d);
  }
  return acc;
}

}  // namespace

PartitionOfUnity::PartitionOfUnity(CZDecomposition dec, int m) : dec_(std::move(dec)), m_(m) {
  if (m < 1) throw Error("domain", "partition of unity needs m >= 1");
  const size_t n = dec_.root.corner.size();
  w_ = JetSpace::make(m + 1, static_cast<int>(n));
  for (const auto& q : dec_.leaves) {
    boxes_.push_back(dilate(q, Rat(65, 64)));
    std::vector<double> lo, hi;
    for (size_t i = 0; i < n; ++i) {
      lo.push_back(boxes_.back().lo[i].get_d());
      hi.push_back(boxes_.back().hi[i].get_d());
    }
    dlo_.push_back(std::move(lo));
    dhi_.push_back(std::move(hi));
  }
  smooth_ = smoothstep_coeffs(m);
  const JetSpace& w = *w_;
  for (size_t g = 0; g < w.dim(); ++g)
    for (size_t h = 0; h < w.dim(); ++h) {
      int k = w.sum_index(g, h);
      if (k < 0) continue;
      Rat b = w.factorial(static_cast<size_t>(k)) / (w.factorial(g) * w.factorial(h));
      mul_.push_back({g, h, static_cast<size_t>(k), b.get_d()});
    }

  // Certified derivative bounds; see bound_by_order().
  std::vector<std::vector<Rat>> ders{smooth_};
  for (int j = 1; j <= m; ++j) ders.push_back(poly_derivative(ders.back()));
  std::vector<Rat> T(static_cast<size_t>(m + 1));
  for (int j = 0; j <= m; ++j) {
    Rat r(0);
    for (const auto& c : ders[static_cast<size_t>(j)]) r += rabs(c);
    T[static_cast<size_t>(j)] = (j == 0 ? Rat(1) : r) * rpow(Rat(128), j);
  }
  std::vector<Rat> That(static_cast<size_t>(m + 1), Rat(0));
  for (size_t i = 0; i < w.dim(); ++i) {
    Rat p(1);
    for (int b : w.indices[i]) p *= T[static_cast<size_t>(b)];
    size_t k = static_cast<size_t>(w.order_of(i));
    if (p > That[k]) That[k] = p;
  }
  const Rat N = Rat(3) * pow2(static_cast<int>(n));
  std::vector<Rat> A(static_cast<size_t>(m + 1), Rat(0));
  for (int k = 1; k <= m; ++k) {
    Rat d(0);
    for (int j = 0; j <= k; ++j)
      d += binom_rat(k, j) * That[static_cast<size_t>(j)] * That[static_cast<size_t>(k - j)];
    A[static_cast<size_t>(k)] = N * pow2(k) * d;
  }
  // partial Bell polynomials B[k][j] in A
  std::vector<std::vector<Rat>> Bell(static_cast<size_t>(m + 1), std::vector<Rat>(static_cast<size_t>(m + 1), Rat(0)));
  Bell[0][0] = 1;
  for (int k = 1; k <= m; ++k)
    for (int j = 1; j <= k; ++j) {
      Rat s(0);
      for (int i = 1; i <= k - j + 1; ++i)
        s += binom_rat(k - 1, i - 1) * A[static_cast<size_t>(i)] * Bell[static_cast<size_t>(k - i)][static_cast<size_t>(j - 1)];
      Bell[static_cast<size_t>(k)][static_cast<size_t>(j)] = s;
    }
  std::vector<Rat> H(static_cast<size_t>(m + 1), Rat(0));
  H[0] = 1;
  Rat hj(1);
  std::vector<Rat> hs{Rat(1)};
  for (int j = 1; j <= m; ++j) {
    hj = hj * Rat(2 * j - 1, 2);  // (2j-1)!! / 2^j
    hs.push_back(hj);
  }
  for (int k = 1; k <= m; ++k)
    for (int j = 1; j <= k; ++j)
      H[static_cast<size_t>(k)] += hs[static_cast<size_t>(j)] * Bell[static_cast<size_t>(k)][static_cast<size_t>(j)];
  for (int k = 0; k <= m; ++k) {
    Rat c(0);
    for (int j = 0; j <= k; ++j)
      c += binom_rat(k, j) * That[static_cast<size_t>(j)] * H[static_cast<size_t>(k - j)];
    bounds_.push_back(c);
  }
}

Rat PartitionOfUnity::derivative_bound() const { return *std::max_element(bounds_.begin(), bounds_.end()); }

std::vector<size_t> PartitionOfUnity::active(const Point& x) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < boxes_.size(); ++i) {
    bool in = true;
    for (size_t k = 0; k < x.size() && in; ++k) {
      double v = x[k].get_d();
      if (v < dlo_[i][k] - 1e-9 * (1 + std::abs(v)) || v > dhi_[i][k] + 1e-9 * (1 + std::abs(v))) in = false;
    }
    if (in && boxes_[i].contains(x)) out.push_back(i);
  }
  return out;
}

std::vector<size_t> PartitionOfUnity::active(const std::vector<double>& x) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < boxes_.size(); ++i) {
    bool in = true;
    for (size_t k = 0; k < x.size() && in; ++k)
      if (x[k] < dlo_[i][k] || x[k] > dhi_[i][k]) in = false;
    if (in) out.push_back(i);
  }
  return out;
}

namespace {

std::vector<std::vector<Rat>> ders_of(const std::vector<Rat>& c, int m) {
  std::vector<std::vector<Rat>> d{c};
  for (int j = 1; j <= m; ++j) d.push_back(poly_derivative(d.back()));
  return d;
}

}  // namespace

Rat PartitionOfUnity::bump(size_t leaf, const Point& x) const {
  const DyadicCube& q = dec_.leaves[leaf];
  const Rat s = q.side();
  static thread_local std::map<int, std::vector<std::vector<Rat>>> cache;
  auto it = cache.find(m_);
  if (it == cache.end()) it = cache.emplace(m_, ders_of(smooth_, m_)).first;
  Rat v(1);
  for (size_t i = 0; i < x.size(); ++i) {
    v *= bump1d(it->second, Rat(q.corner[i]) * s, s, x[i], 0)[0];
    if (v == 0) break;
  }
  return v;
}

Jet PartitionOfUnity::bump_jet(size_t leaf, const Point& x) const {
  const DyadicCube& q = dec_.leaves[leaf];
  const Rat s = q.side();
  auto ders = ders_of(smooth_, m_);
  std::vector<std::vector<Rat>> per;
  for (size_t i = 0; i < x.size(); ++i) per.push_back(bump1d(ders, Rat(q.corner[i]) * s, s, x[i], m_));
  Jet out(w_, x);
  for (size_t k = 0; k < w_->dim(); ++k) {
    Rat v(1);
    for (size_t i = 0; i < x.size(); ++i) v *= per[i][static_cast<size_t>(w_->indices[k][i])];
    out.coeffs[k] = v;
  }
  return out;
}

std::vector<double> PartitionOfUnity::bump_derivs(size_t leaf, const std::vector<double>& x) const {
  const DyadicCube& q = dec_.leaves[leaf];
  const double s = q.side().get_d();
  static thread_local std::map<int, std::vector<std::vector<Rat>>> cache;
  auto it = cache.find(m_);
  if (it == cache.end()) it = cache.emplace(m_, ders_of(smooth_, m_)).first;
  std::vector<std::vector<double>> per;
  for (size_t i = 0; i < x.size(); ++i)
    per.push_back(bump1d_d(it->second, static_cast<double>(q.corner[i]) * s, s, x[i], m_));
  std::vector<double> out(w_->dim());
  for (size_t k = 0; k < w_->dim(); ++k) {
    double v = 1;
    for (size_t i = 0; i < x.size(); ++i) v *= per[i][static_cast<size_t>(w_->indices[k][i])];
    out[k] = v;
  }
  return out;
}

std::vector<double> PartitionOfUnity::theta_derivs(size_t leaf, const std::vector<double>& x) const {
  auto act = active(x);
  std::vector<double> D(w_->dim(), 0.0);
  for (size_t i : act) {
    auto t = bump_derivs(i, x);
    auto t2 = dmul(mul_, t, t);
    for (size_t k = 0; k < D.size(); ++k) D[k] += t2[k];
  }
  std::vector<double> self = bump_derivs(leaf, x);
  if (D[0] <= 0) return std::vector<double>(w_->dim(), 0.0);
  // c_j = binom(-1/2, j) D0^(-1/2 - j)
  std::vector<double> c;
  double coef = 1;
  for (int j = 0; j <= m_; ++j) {
    c.push_back(coef * std::pow(D[0], -0.5 - j));
    coef *= (-0.5 - j) / (j + 1);
  }
  return dmul(mul_, self, dcompose(mul_, D, c));
}

double PartitionOfUnity::sum_theta_sq(const std::vector<double>& x) const {
  auto act = active(x);
  double D = 0;
  std::vector<double> t;
  for (size_t i : act) {
    double b = bump_derivs(i, x)[0];
    t.push_back(b);
    D += b * b;
  }
  if (D <= 0) return 0;
  double s = 0;
  for (double b : t) {
    double th = b / std::sqrt(D);
    s += th * th;
  }
  return s;
}

Rat PartitionOfUnity::sum_theta_sq(const Point& x) const {
  auto act = active(x);
  Rat D(0);
  std::vector<Rat> t2;
  for (size_t i : act) {
    Rat b = bump(i, x);
    t2.push_back(b * b);
    D += b * b;
  }
  if (D == 0) return Rat(0);
  Rat s(0);
  for (const auto& v : t2) s += v / D;
  return s;
}

PartitionOfUnity build_pou(const CZDecomposition& dec, int m) { return PartitionOfUnity(dec, m); }

// ---------------------------------------------------------------------------

namespace {

Jet lift_local(const JetSpacePtr& w, const Jet& p, const Point& x) {
  Jet out(w, x);
  for (size_t k = 0; k < w->dim(); ++k)
    if (w->order_of(k) < p.space->m) out.coeffs[k] = eval_jet_derivative(p, w->indices[k], x);
  return out;
}

std::vector<double> local_derivs_d(const JetSpace& w, const Jet& p, const std::vector<double>& x) {
  const JetSpace& s = *p.space;
  std::vector<double> h(x.size());
  for (size_t i = 0; i < x.size(); ++i) h[i] = x[i] - p.base[i].get_d();
  std::vector<double> out(w.dim(), 0.0);
  for (size_t k = 0; k < w.dim(); ++k) {
    const MultiIndex& g = w.indices[k];
    if (order(g) >= s.m) continue;
    double acc = 0;
    for (size_t a = 0; a < s.dim(); ++a) {
      const MultiIndex& al = s.indices[a];
      if (!mi_leq(g, al)) continue;
      double term = p.coeffs[a].get_d();
      for (size_t i = 0; i < x.size(); ++i) {
        int e = al[i] - g[i];
        double f = 1;
        for (int t = 2; t <= e; ++t) f *= t;
        term *= std::pow(h[i], e) / f;
      }
      acc += term;
    }
    out[k] = acc;
  }
  return out;
}

Point sub(const Point& a, const Point& b) {
  Point r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

}  // namespace

Rat GluedFunction::value_frame(const Point& u) const {
  auto act = pou->active(u);
  if (act.empty()) throw Error("domain", "point outside the glued region");
  Rat num(0), den(0);
  for (size_t i : act) {
    Rat b = pou->bump(i, u);
    if (b == 0) continue;
    Rat b2 = b * b;
    const LocalPiece& lp = locals[i];
    Rat v = lp.child ? lp.child->value_frame(u) : eval_jet_derivative(lp.poly, MultiIndex(u.size(), 0), u);
    num += b2 * v;
    den += b2;
  }
  if (den == 0) throw Error("domain", "point outside the glued region");
  return num / den;
}

Jet GluedFunction::jet_frame(const Point& u) const {
  auto act = pou->active(u);
  const JetSpacePtr& w = pou->deriv_space();
  std::vector<std::pair<size_t, Jet>> parts;
  for (size_t i : act) {
    Jet t = pou->bump_jet(i, u);
    bool zero = std::all_of(t.coeffs.begin(), t.coeffs.end(), [](const Rat& c) { return sgn(c) == 0; });
    if (!zero) parts.emplace_back(i, std::move(t));
  }
  if (parts.empty()) throw Error("domain", "point outside the glued region");
  auto local = [&](size_t i) {
    const LocalPiece& lp = locals[i];
    return lp.child ? lp.child->jet_frame(u) : lift_local(w, lp.poly, u);
  };
  if (parts.size() == 1) return local(parts[0].first);
  Jet num = jet_zero(w, u), den = jet_zero(w, u);
  for (auto& [i, t] : parts) {
    Jet t2 = jet_multiply(t, t, u);
    den = den + t2;
    num = num + jet_multiply(t2, local(i), u);
  }
  return jet_multiply(num, jet_inverse(den), u);
}

std::vector<double> GluedFunction::derivatives_frame(const std::vector<double>& u) const {
  auto act = pou->active(u);
  const JetSpace& w = *pou->deriv_space();
  const auto& tab = pou->mul_table();
  std::vector<double> num(w.dim(), 0.0), den(w.dim(), 0.0);
  for (size_t i : act) {
    auto t = pou->bump_derivs(i, u);
    auto t2 = dmul(tab, t, t);
    const LocalPiece& lp = locals[i];
    auto loc = lp.child ? lp.child->derivatives_frame(u) : local_derivs_d(w, lp.poly, u);
    auto pr = dmul(tab, t2, loc);
    for (size_t k = 0; k < w.dim(); ++k) {
      num[k] += pr[k];
      den[k] += t2[k];
    }
  }
  if (den[0] <= 0) throw Error("domain", "point outside the glued region");
  std::vector<double> c;
  for (int j = 0; j <= w.m; ++j) c.push_back((j % 2 ? -1.0 : 1.0) * std::pow(den[0], -1.0 - j));
  return dmul(tab, num, dcompose(tab, den, c));
}

Rat GluedFunction::value(const Point& x) const { return value_frame(sub(x, origin)); }

Jet GluedFunction::jet(const Point& x) const {
  Jet j = jet_frame(sub(x, origin));
  j.base = x;
  return j;
}

Jet GluedFunction::jet_truncated(const Point& x) const {
  Jet full = jet(x);
  Jet out(space, x);
  for (size_t k = 0; k < space->dim(); ++k) out.coeffs[k] = full.at(space->indices[k]);
  return out;
}

std::vector<double> GluedFunction::derivatives(const std::vector<double>& x) const {
  std::vector<double> u(x.size());
  for (size_t i = 0; i < x.size(); ++i) u[i] = x[i] - origin[i].get_d();
  return derivatives_frame(u);
}

GluedFunction whitney_extend(const WhitneyField& field, const CZDecomposition& dec, const Jet& P0_far) {
  const RatBox root = dilate(dec.root, Rat(1));
  for (const auto& x : field.points) {
    bool in = root.contains(x);
    for (size_t i = 0; i < x.size() && in; ++i)
      if (x[i] == root.hi[i]) in = false;
    if (!in) throw Error("domain", "whitney_extend: field point outside the root cube");
  }
  GluedFunction F;
  F.space = field.space;
  F.origin = Point(dec.root.corner.size(), Rat(0));
  F.pou = std::make_shared<PartitionOfUnity>(dec, field.space->m);
  for (const auto& q : dec.leaves) {
    RatBox five_parent = dilate(q.parent(), Rat(5));
    RatBox cube = dilate(q, Rat(1));
    std::optional<size_t> best;
    Rat best_d;
    for (size_t i = 0; i < field.points.size(); ++i) {
      if (!five_parent.contains(field.points[i])) continue;
      Rat d = box_dist2(cube, field.points[i]);
      if (!best || d < best_d) {
        best = i;
        best_d = d;
      }
    }
    F.locals.push_back({best ? field.jets[*best] : P0_far, nullptr});
  }
  return F;
}

std::map<MultiIndex, double> achieved_norm(const GluedFunction& F, int grid_density) {
  if (grid_density < 2) throw Error("domain", "achieved_norm needs grid_density >= 2");
  const DyadicCube& q = F.decomposition().root;
  const size_t n = q.corner.size();
  const Rat s = q.side();
  const JetSpace& w = *F.pou->deriv_space();
  std::map<MultiIndex, double> sup;
  for (const auto& a : w.indices) sup[a] = 0;
  size_t total = 1;
  for (size_t i = 0; i < n; ++i) total *= static_cast<size_t>(grid_density);
  for (size_t t = 0; t < total; ++t) {
    Point u(n);
    size_t r = t;
    for (size_t i = 0; i < n; ++i) {
      long idx = static_cast<long>(r % static_cast<size_t>(grid_density));
      r /= static_cast<size_t>(grid_density);
      u[i] = Rat(q.corner[i]) * s + s * make_rat(idx, grid_density - 1);
    }
    Jet j = F.jet_frame(u);
    for (size_t k = 0; k < w.dim(); ++k) sup[w.indices[k]] = std::max(sup[w.indices[k]], std::abs(j.coeffs[k].get_d()));
  }
  return sup;
}

// ---------------------------------------------------------------------------

ShapeField SelectionProblem::field() const {
  if (target_dim != 1) throw Error("domain", "vector-valued problems go through lift_problem");
  return ShapeField::make(space, E, constraints);
}

SelectionProblem interval_problem(const JetSpacePtr& space, const std::vector<Point>& E, const RatVec& lo,
                                  const RatVec& hi) {
  ShapeField f = interval_field(space, E, lo, hi);
  return {space, f.points, f.gammas, 1};
}

Frame frame_for(const std::vector<Point>& E) {
  if (E.empty()) throw Error("domain", "frame_for needs a point");
  const size_t n = E[0].size();
  Frame fr;
  fr.origin = E[0];
  Rat extent(0);
  for (const auto& x : E)
    for (size_t i = 0; i < n; ++i) fr.origin[i] = std::min(fr.origin[i], x[i]);
  for (const auto& x : E)
    for (size_t i = 0; i < n; ++i) extent = std::max(extent, Rat(x[i] - fr.origin[i]));
  int k = 0;
  if (extent > 0) {
    while (pow2(k) <= extent) ++k;
    while (pow2(k - 1) > extent) --k;
  }
  fr.Q0 = {k, std::vector<long>(n, 0)};
  return fr;
}

std::vector<size_t> minimal_infeasible_subset(const ShapeField& field, const FiniteConfig& cfg) {
  std::vector<size_t> found;
  for_each_subset(field.size(), field.size(), cfg.subset_budget, [&](const std::vector<size_t>& S) {
    try {
      min_whitney_M(field, S, cfg);
      return true;
    } catch (const Error& e) {
      if (e.tag() != "infeasible") throw;
      found = S;
      return false;
    }
  });
  return found;
}

VerificationReport verify_selection(const ShapeField& field, const GluedFunction& F, const Rat& M, int grid_density) {
  VerificationReport rep;
  rep.constraints_ok = true;
  for (size_t i = 0; i < field.size(); ++i) {
    PointCheck pc;
    pc.point = i;
    Jet j = F.jet_truncated(field.points[i]);
    pc.ok = field.gammas[i].contains(j.coeffs, M);
    pc.min_M = min_M_containing(field.gammas[i], j.coeffs);
    if (!pc.ok) {
      rep.constraints_ok = false;
      rep.failures.push_back("point " + std::to_string(i) + ": jet of F leaves gamma(z, M)");
    }
    rep.points.push_back(std::move(pc));
  }
  rep.derivative_sup = achieved_norm(F, grid_density);
  return rep;
}

SelectionResult select(const SelectionProblem& problem, size_t k, const SelectConfig& cfg) {
  ShapeField field = problem.field();
  SelectionResult res;
  res.frame = frame_for(field.points);
  FunctionalResult fr = finiteness_functional(field, k, cfg.finite);
  if (!fr.feasible) {
    res.infeasible_subset = fr.subset;
    return res;
  }
  res.M0 = fr.value;
  res.argmax_subset = fr.subset;
  std::vector<size_t> all(field.size());
  std::iota(all.begin(), all.end(), 0);
  MinWhitney mw;
  try {
    mw = min_whitney_M(field, all, cfg.finite);
  } catch (const Error& e) {
    if (e.tag() != "infeasible") throw;
    res.infeasible_subset = minimal_infeasible_subset(field, cfg.finite);
    res.notes.push_back("every subset of size <= k is feasible but E is not");
    return res;
  }
  res.feasible = true;
  res.M_full = mw.M;
  if (res.M0 > 0) res.ratio = Rat(res.M_full / res.M0);
  else if (res.M_full == 0) res.ratio = Rat(1);

  WhitneyField shifted = mw.field;
  for (size_t i = 0; i < shifted.points.size(); ++i) {
    shifted.points[i] = sub(shifted.points[i], res.frame.origin);
    shifted.jets[i].base = shifted.points[i];
  }
  CZDecomposition dec = cz_decompose(res.frame.Q0, shifted.points);
  GluedFunction F = whitney_extend(shifted, dec, shifted.jets[0]);
  F.origin = res.frame.origin;
  res.verification = verify_selection(field, F, res.M_full, cfg.grid_density);
  res.field = std::move(mw.field);
  res.F = std::move(F);
  return res;
}

// ---------------------------------------------------------------------------

LiftedProblem lift_problem(const SelectionProblem& problem, const LiftConfig& cfg) {
  const JetSpace& base = *problem.space;
  const int D = problem.target_dim;
  if (D < 1) throw Error("domain", "target_dim must be positive");
  const int n = base.n;
  JetSpacePtr w = JetSpace::make(base.m + 1, n + D);
  if (w->dim() > cfg.max_dim)
    throw Error("budget", "lifted jet dimension " + std::to_string(w->dim()) + " exceeds the cap");
  std::vector<Point> pts;
  std::vector<ParamPolyhedron> gs;
  for (size_t p = 0; p < problem.E.size(); ++p) {
    Point x = problem.E[p];
    x.resize(static_cast<size_t>(n + D), Rat(0));
    pts.push_back(x);
    const ParamPolyhedron& K = problem.constraints.at(p);
    if (K.num_vars != base.dim() * static_cast<size_t>(D)) throw Error("domain", "constraint width differs from dim * target_dim");
    ParamPolyhedron g = jet_polyhedron(*w, static_cast<int>(p));
    RatVec e(w->dim(), Rat(0));
    e[0] = 1;
    g.add_row(e, Rat(0));
    e[0] = -1;
    g.add_row(e, Rat(0));
    for (const auto& row : K.rows) {
      RatVec a(w->dim(), Rat(0));
      for (size_t v = 0; v < row.a.size(); ++v) {
        if (sgn(row.a[v]) == 0) continue;
        if (v % base.dim() != 0) throw Error("domain", "lift_problem needs constraints on values only");
        int comp = static_cast<int>(v / base.dim());
        a[static_cast<size_t>(w->index_of(w->unit(n + comp)))] += row.a[v];
      }
      g.add_row(a, row.b, row.c);
    }
    for (size_t k = 0; k < w->dim(); ++k)
      for (int s : {1, -1}) {
        RatVec b(w->dim(), Rat(0));
        b[k] = s;
        g.add_row(b, Rat(0), Rat(1));
      }
    gs.push_back(std::move(g));
  }
  return {ShapeField::make(w, pts, gs), problem.space, D};
}

Jet lift_jet(const LiftedProblem& lifted, const std::vector<Jet>& comps) {
  const JetSpacePtr& w = lifted.field.space;
  const JetSpace& base = *lifted.base_space;
  if (comps.size() != static_cast<size_t>(lifted.target_dim)) throw Error("domain", "one jet per component");
  const int n = base.n;
  Point x = comps[0].base;
  x.resize(static_cast<size_t>(n + lifted.target_dim), Rat(0));
  Jet out(w, x);
  for (size_t c = 0; c < comps.size(); ++c) {
    if (comps[c].base != comps[0].base) throw Error("domain", "component jets must share a base");
    for (size_t k = 0; k < base.dim(); ++k) {
      MultiIndex g = base.indices[k];
      g.resize(static_cast<size_t>(n + lifted.target_dim), 0);
      g[static_cast<size_t>(n) + c] = 1;
      int idx = w->index_of(g);
      if (idx >= 0) out.coeffs[static_cast<size_t>(idx)] = comps[c].coeffs[k];
    }
  }
  return out;
}

std::vector<Jet> unlift_jet(const LiftedProblem& lifted, const Jet& P) {
  const JetSpace& base = *lifted.base_space;
  const int n = base.n;
  Point x(P.base.begin(), P.base.begin() + n);
  std::vector<Jet> out;
  for (int c = 0; c < lifted.target_dim; ++c) {
    Jet j(lifted.base_space, x);
    for (size_t k = 0; k < base.dim(); ++k) {
      MultiIndex g = base.indices[k];
      g.resize(static_cast<size_t>(n + lifted.target_dim), 0);
      g[static_cast<size_t>(n + c)] = 1;
      j.coeffs[k] = P.at(g);
    }
    out.push_back(std::move(j));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experimental induction solver.

namespace {

struct WeakWitness {
  IndexSet A_hat;
  Jet P_hat;
  std::vector<Jet> basis;
};

bool same_polys(const ParamPolyhedron& a, const ParamPolyhedron& b) {
  ParamPolyhedron x = canonicalize(a), y = canonicalize(b);
  if (x.rows.size() != y.rows.size()) return false;
  for (size_t i = 0; i < x.rows.size(); ++i)
    if (x.rows[i].a != y.rows[i].a || x.rows[i].b != y.rows[i].b || x.rows[i].c != y.rows[i].c) return false;
  return true;
}

class Induction {
 public:
  Induction(const ShapeField& base, const RecursiveConfig& cfg, RecursiveStats& stats)
      : cfg_(cfg), stats_(stats), sp_(base.space) {
    levels_.push_back(base);
    const IndexSet empty;
    top_ = cfg.max_refine_level >= 0 ? cfg.max_refine_level : label_depth(empty, *sp_);
  }

  const ShapeField& gamma(int l) {
    l = std::max(l, 0);
    if (l > top_) {
      stats_.refine_capped = true;
      l = top_;
    }
    while (static_cast<int>(levels_.size()) <= l) {
      if (stable_) {
        levels_.push_back(levels_.back());
        continue;
      }
      ShapeField next = first_refinement(levels_.back());
      bool same = true;
      for (size_t i = 0; i < next.size() && same; ++i) same = same_polys(next.gammas[i], levels_.back().gammas[i]);
      stable_ = same;
      levels_.push_back(std::move(next));
    }
    return levels_[static_cast<size_t>(l)];
  }

  const std::vector<Point>& E() const { return levels_[0].points; }
  const JetSpacePtr& space() const { return sp_; }

  std::shared_ptr<GluedFunction> solve(const BasisCertificate& cert, const DyadicCube& Q0, int depth);
  CZDecomposition decompose(const BasisCertificate& cert, const DyadicCube& Q0,
                            std::map<std::vector<long>, std::map<int, WeakWitness>>* store);

 private:
  std::optional<WeakWitness> weak_lp(const BasisCertificate& cert, const DyadicCube& Q0, const IndexSet& A_hat,
                                     size_t y, const Rat& delta);

  const RecursiveConfig& cfg_;
  RecursiveStats& stats_;
  JetSpacePtr sp_;
  std::vector<ShapeField> levels_;
  int top_;
  bool stable_ = false;
};

std::vector<long> cube_key(const DyadicCube& q) {
  std::vector<long> k{q.level};
  k.insert(k.end(), q.corner.begin(), q.corner.end());
  return k;
}

// LP for a weak (A_hat, delta, A)-basis at y plus the anchoring conditions against (x0, P0).
std::optional<WeakWitness> Induction::weak_lp(const BasisCertificate& cert, const DyadicCube& Q0, const IndexSet& A_hat,
                                              size_t y, const Rat& delta) {
  const JetSpace& sp = *sp_;
  const size_t d = sp.dim();
  const int l = label_depth(cert.A, sp);
  const ShapeField& g = gamma(l - 3);
  const ParamPolyhedron& G = g.gammas[y];
  const Point& yp = g.points[y];
  const Rat& A = cfg_.A_const;
  const Rat& M0 = cert.M0;
  const Rat MA = A * M0;
  const Rat delta0 = Q0.side() / cfg_.eps;
  const size_t h = A_hat.size();
  const size_t nv = d * (1 + h);
  std::vector<RatVec> rows;
  RatVec rhs;
  auto add = [&](RatVec a, const Rat& b) {
    rows.push_back(std::move(a));
    rhs.push_back(b);
  };
  for (const auto& r : G.rows) {
    RatVec a(nv, Rat(0));
    for (size_t k = 0; k < d; ++k) a[k] = r.a[k];
    add(a, r.b + MA * r.c);
    for (size_t i = 0; i < h; ++i) {
      Rat s = M0 * rpow(delta, sp.m - order(A_hat[i])) / A;
      for (int sg : {1, -1}) {
        RatVec b = a;
        for (size_t k = 0; k < d; ++k) b[d * (1 + i) + k] = Rat(sg) * s * r.a[k];
        add(b, r.b + MA * r.c);
      }
    }
  }
  for (size_t i = 0; i < h; ++i) {
    const MultiIndex& al = A_hat[i];
    for (size_t k = 0; k < d; ++k) {
      const MultiIndex& be = sp.indices[k];
      size_t var = d * (1 + i) + k;
      bool in_hat = std::find(A_hat.begin(), A_hat.end(), be) != A_hat.end();
      if (in_hat) {
        Rat want = be == al ? Rat(1) : Rat(0);
        RatVec a(nv, Rat(0));
        a[var] = 1;
        add(a, want);
        a[var] = -1;
        add(a, -want);
      } else if (be == al || mi_less(al, be)) {
        Rat bound = A * rpow(delta, order(al) - order(be));
        RatVec a(nv, Rat(0));
        a[var] = 1;
        add(a, bound);
        a[var] = -1;
        add(a, bound);
      }
    }
  }
  // anchoring at x0
  RatMatrix R = recenter_matrix(sp, yp, cert.x0);
  Jet P0x = recenter_jet(cert.P0, cert.x0);
  for (size_t b = 0; b < d; ++b) {
    Rat bound = MA * rpow(delta0, sp.m - sp.order_of(b));
    RatVec a(nv, Rat(0));
    for (size_t k = 0; k < d; ++k) a[k] = R[b][k];
    add(a, bound + P0x.coeffs[b]);
    for (size_t k = 0; k < d; ++k) a[k] = -R[b][k];
    add(a, bound - P0x.coeffs[b]);
  }
  Jet P0y = recenter_jet(cert.P0, yp);
  for (const auto& be : cert.A) {
    size_t bi = static_cast<size_t>(sp.index_of(be));
    for (size_t gi = 0; gi < d; ++gi) {
      int k = sp.sum_index(bi, gi);
      if (k < 0) continue;
      RatVec a(nv, Rat(0));
      a[static_cast<size_t>(k)] = 1;
      add(a, P0y.coeffs[static_cast<size_t>(k)]);
      a[static_cast<size_t>(k)] = -1;
      add(a, -P0y.coeffs[static_cast<size_t>(k)]);
    }
  }
  LPResult lp = solve_lp_rows(rows, rhs, nv, nullptr);
  if (lp.status == LPStatus::Infeasible) return std::nullopt;
  WeakWitness w;
  w.A_hat = A_hat;
  w.P_hat = Jet(sp_, yp, RatVec(lp.witness.begin(), lp.witness.begin() + static_cast<long>(d)));
  for (size_t i = 0; i < h; ++i)
    w.basis.emplace_back(sp_, yp,
                         RatVec(lp.witness.begin() + static_cast<long>(d * (1 + i)),
                                lp.witness.begin() + static_cast<long>(d * (2 + i))));
  return w;
}

CZDecomposition Induction::decompose(const BasisCertificate& cert, const DyadicCube& Q0,
                                     std::map<std::vector<long>, std::map<int, WeakWitness>>* store) {
  const JetSpace& sp = *sp_;
  if (sp.dim() > 6) throw Error("budget", "induction predicate enumerates subsets of M; dim > 6");
  const IndexSet A = sp.normalize(cert.A);
  std::vector<IndexSet> candidates;
  for (uint64_t mask = 1; mask < (uint64_t{1} << sp.dim()); ++mask) {
    IndexSet s = sp.set_of(mask);
    if (s != A && subset_less(s, A)) candidates.push_back(s);
  }
  CZPredicate pred{"induction_ok", [&](const DyadicCube& q) {
                     RatBox five = dilate(q, Rat(5));
                     std::vector<size_t> pts;
                     for (size_t i = 0; i < E().size(); ++i)
                       if (five.contains(E()[i])) pts.push_back(i);
                     if (pts.size() <= 1) return true;
                     const Rat delta = q.side() / cfg_.eps;
                     for (const auto& Ah : candidates) {
                       std::map<int, WeakWitness> found;
                       bool all = true;
                       for (size_t y : pts) {
                         auto w = weak_lp(cert, Q0, Ah, y, delta);
                         if (!w) {
                           all = false;
                           break;
                         }
                         found.emplace(static_cast<int>(y), std::move(*w));
                       }
                       if (all) {
                         if (store) (*store)[cube_key(q)] = std::move(found);
                         return true;
                       }
                     }
                     return false;
                   }};
  return cz_decompose(Q0, E(), &pred, cfg_.cz);
}

std::shared_ptr<GluedFunction> Induction::solve(const BasisCertificate& cert, const DyadicCube& Q0, int depth) {
  const JetSpace& sp = *sp_;
  stats_.max_depth = std::max(stats_.max_depth, depth);
  if (depth > cfg_.max_recursion) throw Error("recursion-budget", "induction exceeded the recursion budget");
  const IndexSet A = sp.normalize(cert.A);
  const Rat& M0 = cert.M0;
  const Rat delta0 = Q0.side() / cfg_.eps;
  const RatBox near0 = dilate(Q0, Rat(65, 64));
  auto glued = std::make_shared<GluedFunction>();
  glued->space = sp_;
  glued->origin = Point(Q0.corner.size(), Rat(0));

  auto check_c2 = [&](const GluedFunction& F, const std::string& where) {
    for (size_t z = 0; z < E().size(); ++z) {
      if (!near0.contains(E()[z])) continue;
      Jet j = F.jet_frame(E()[z]);
      Jet t(sp_, E()[z]);
      for (size_t k = 0; k < sp.dim(); ++k) t.coeffs[k] = j.at(sp.indices[k]);
      auto mm = min_M_containing(gamma(0).gammas[z], t.coeffs);
      if (!mm) throw Error("(C2)", where + ": J_z(F) is in no gamma_0(z, M) at point " + std::to_string(z));
      std::ostringstream os;
      os << where << ": point " << z << " needs M = " << mm->get_str();
      if (M0 > 0) os << " = " << Rat(*mm / M0).get_str() << " M0";
      stats_.log.push_back(os.str());
    }
  };

  if (A.size() == sp.dim()) {
    CZDecomposition dec{Q0, {Q0}, "base"};
    glued->pou = std::make_shared<PartitionOfUnity>(dec, sp.m);
    glued->locals.push_back({recenter_jet(cert.P0, cert.x0), nullptr});
    stats_.log.push_back("depth " + std::to_string(depth) + ": A = M, F = P0");
    check_c2(*glued, "base case");
    return glued;
  }

  const int l = label_depth(A, sp);
  std::map<std::vector<long>, std::map<int, WeakWitness>> store;
  CZDecomposition dec = decompose(cert, Q0, &store);
  ++stats_.cz_levels;
  glued->pou = std::make_shared<PartitionOfUnity>(dec, sp.m);

  std::map<size_t, TransportResult> aux;
  auto aux_at = [&](size_t y) -> const TransportResult& {
    auto it = aux.find(y);
    if (it != aux.end()) return it->second;
    try {
      TransportResult tr = transport(cert, cert, E()[y], gamma(l), gamma(l - 1), cfg_.lemma);
      return aux.emplace(y, std::move(tr)).first->second;
    } catch (const Error& e) {
      throw Error("(ap1)", std::string("auxiliary polynomial via transport: ") + e.what());
    }
  };

  const RatBox five0 = dilate(Q0, Rat(5));
  for (const auto& q : dec.leaves) {
    RatBox five = dilate(q, Rat(5));
    std::vector<size_t> pts;
    for (size_t i = 0; i < E().size(); ++i)
      if (five.contains(E()[i])) pts.push_back(i);
    LocalPiece piece;
    if (pts.size() >= 2) {
      ++stats_.leaf_types[1];
      size_t y = pts[0];
      auto sit = store.find(cube_key(q));
      if (sit == store.end() || !sit->second.count(static_cast<int>(y)))
        throw Error("(cz3)", "no stored weak basis for a Type 1 cube " + cube_str(q));
      const WeakWitness& ww = sit->second.at(static_cast<int>(y));
      const TransportResult& tr = aux_at(y);
      const Rat delta = q.side() / cfg_.eps;
      Jet Py = tr.P_hash;
      bool case1 = true;
      Jet diff = ww.P_hat - recenter_jet(Py, E()[y]);
      for (size_t k = 0; k < sp.dim() && case1; ++k)
        if (rabs(diff.coeffs[k]) > M0 * rpow(delta, sp.m - sp.order_of(k))) case1 = false;
      BasisCertificate next;
      const ShapeField& g3 = gamma(l - 3);
      try {
        if (case1) {
          BasisCertificate weak{ww.A_hat, E()[y], M0, ww.P_hat, delta, cfg_.A_const, ww.basis, true};
          RelabelResult rr = relabel(weak, g3, cfg_.lemma);
          next = rr.cert;
        } else {
          BasisCertificate cy = tr.cert_A;
          cy.delta = delta;
          auto cb = achieved_basis_constant(cy, g3);
          if (!cb) throw Error("(ap6)", "auxiliary basis does not rescale to the cube");
          // P hat sits in gamma(y, A M0), so the basis constant must reach A as well
          cy.CB = std::max(*cb, cfg_.A_const);
          ControlResult cr = control_gamma(cy, ww.P_hat, g3, cfg_.lemma);
          next = cr.cert;
        }
      } catch (const Error& e) {
        throw Error("(gn1)", std::string(case1 ? "relabel: " : "control_gamma: ") + e.what());
      }
      IndexSet An = sp.normalize(next.A);
      if (!is_monotonic(An, sp) || An == A || !subset_less(An, A))
        throw Error("(gn5)", "new label set is not a strictly smaller monotonic set");
      if (!verify_basis(next, gamma(label_depth(An, sp))))
        throw Error("(gn6)", "basis for the smaller label set fails to verify");
      stats_.log.push_back("depth " + std::to_string(depth) + ": Type 1 at " + cube_str(q) + (case1 ? " (case 1)" : " (case 2)"));
      piece.child = solve(next, q, depth + 1);
    } else if (pts.size() == 1) {
      ++stats_.leaf_types[2];
      piece.poly = aux_at(pts[0]).P_hash;
    } else if (q.side() * 1024 <= Q0.side()) {
      ++stats_.leaf_types[3];
      RatBox fp = dilate(q.parent(), Rat(5));
      std::optional<size_t> y;
      for (size_t i = 0; i < E().size() && !y; ++i)
        if (fp.contains(E()[i]) && five0.contains(E()[i])) y = i;
      if (!y) throw Error("(li3)", "Type 3 cube without a point of E in 5Q+ " + cube_str(q));
      piece.poly = aux_at(*y).P_hash;
    } else {
      ++stats_.leaf_types[4];
      piece.poly = recenter_jet(cert.P0, cert.x0);
    }
    glued->locals.push_back(std::move(piece));
  }
  check_c2(*glued, "depth " + std::to_string(depth));
  return glued;
}

struct Setup {
  ShapeField base;
  Frame frame;
  ShapeField shifted;
};

Setup make_setup(const SelectionProblem& problem, const RecursiveConfig& cfg) {
  ShapeField f = problem.field();
  const JetSpace& sp = *f.space;
  if (cfg.derivative_box) {
    for (auto& g : f.gammas)
      for (size_t k = 0; k < sp.dim(); ++k) {
        if (sp.order_of(k) == 0) continue;
        for (int s : {1, -1}) {
          RatVec a(sp.dim(), Rat(0));
          a[k] = s;
          g.add_row(a, Rat(0), Rat(1));
        }
      }
  }
  Frame fr = frame_for(f.points);
  std::vector<Point> pts;
  for (const auto& x : f.points) pts.push_back(sub(x, fr.origin));
  ShapeField shifted = ShapeField::make(f.space, pts, f.gammas);
  return {f, fr, shifted};
}

}  // namespace

RecursiveResult recursive_select(const SelectionProblem& problem, const RecursiveConfig& cfg) {
  RecursiveResult out;
  Setup st = make_setup(problem, cfg);
  SelectionResult& res = out.result;
  res.frame = st.frame;
  Induction ind(st.shifted, cfg, out.stats);
  const JetSpacePtr& sp = st.shifted.space;
  const IndexSet empty;
  const int l0 = label_depth(empty, *sp);
  MinMResult mm = lp_min_M(ind.gamma(l0).gammas[0]);
  if (!mm.feasible) {
    res.infeasible_subset = minimal_infeasible_subset(st.base);
    return out;
  }
  BasisCertificate cert{{}, st.shifted.points[0], mm.M, Jet(sp, st.shifted.points[0], mm.witness),
                        st.frame.Q0.side() / cfg.eps, Rat(1), {}, false};
  auto F = ind.solve(cert, st.frame.Q0, 0);
  F->origin = st.frame.origin;
  res.feasible = true;
  res.M0 = mm.M;
  std::vector<size_t> all(st.base.size());
  std::iota(all.begin(), all.end(), 0);
  try {
    res.M_full = min_whitney_M(st.base, all).M;
  } catch (const Error& e) {
    if (e.tag() != "infeasible") throw;
    res.notes.push_back("min_whitney_M found no admissible field");
  }
  if (res.M0 > 0) res.ratio = Rat(res.M_full / res.M0);
  else if (res.M_full == 0) res.ratio = Rat(1);
  Rat need(0);
  for (size_t z = 0; z < st.base.size(); ++z) {
    auto m = min_M_containing(st.base.gammas[z], F->jet_truncated(st.base.points[z]).coeffs);
    if (!m) throw Error("(C2)", "final check: J_z(F) is in no gamma_0(z, M) at point " + std::to_string(z));
    need = std::max(need, *m);
  }
  res.verification = verify_selection(st.base, *F, need, cfg.grid_density);
  if (!res.verification.constraints_ok) throw Error("(C2)", "final verification failed");
  res.notes.push_back("constraints hold at M = " + need.get_str());
  if (out.stats.refine_capped) res.notes.push_back("refinement depth was capped; no guarantee applies");
  res.F = *F;
  return out;
}

std::shared_ptr<GluedFunction> main_lemma(const ShapeField& field, const BasisCertificate& cert, const DyadicCube& Q0,
                                          const RecursiveConfig& cfg, RecursiveStats& stats) {
  BasisCheck bc = verify_basis(cert, field);
  if (!bc) throw Error("precondition", "main_lemma: supplied basis fails: " + bc.failure);
  Induction ind(field, cfg, stats);
  if (!is_monotonic(cert.A, *field.space)) throw Error("precondition", "main_lemma: A must be monotonic");
  BasisCheck top = verify_basis(cert, ind.gamma(label_depth(cert.A, *field.space)));
  if (!top) throw Error("precondition", "main_lemma: basis fails on the refined field: " + top.failure);
  return ind.solve(cert, Q0, 0);
}

CZDecomposition induction_decomposition(const SelectionProblem& problem, const RecursiveConfig& cfg) {
  RecursiveStats stats;
  Setup st = make_setup(problem, cfg);
  Induction ind(st.shifted, cfg, stats);
  const JetSpacePtr& sp = st.shifted.space;
  const IndexSet empty;
  MinMResult mm = lp_min_M(ind.gamma(label_depth(empty, *sp)).gammas[0]);
  if (!mm.feasible) throw Error("infeasible", "no M makes the refined set at the first point nonempty");
  BasisCertificate cert{{}, st.shifted.points[0], mm.M, Jet(sp, st.shifted.points[0], mm.witness),
                        st.frame.Q0.side() / cfg.eps, Rat(1), {}, false};
  return ind.decompose(cert, st.frame.Q0, nullptr);
}

}  // namespace smoothsel
