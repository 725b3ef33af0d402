// SPDX-License-Identifier: MIT
#include "smoothsel/polyhedra.hpp"

#include <algorithm>
#include <numeric>

namespace smoothsel {

void ParamPolyhedron::add_row(RatVec a, Rat b, Rat c) {
  if (a.size() != num_vars) throw Error("domain", "row width does not match the polyhedron");
  rows.push_back({std::move(a), std::move(b), std::move(c)});
}

bool ParamPolyhedron::contains(const RatVec& v, const Rat& M) const {
  if (v.size() != num_vars) throw Error("domain", "point dimension does not match the polyhedron");
  for (const auto& r : rows) {
    Rat lhs(0);
    for (size_t i = 0; i < num_vars; ++i)
      if (sgn(r.a[i]) != 0) lhs += r.a[i] * v[i];
    if (lhs > r.b + M * r.c) return false;
  }
  return true;
}

bool ParamPolyhedron::all_c_nonnegative() const {
  return std::all_of(rows.begin(), rows.end(), [](const Row& r) { return r.c >= 0; });
}

ParamPolyhedron jet_polyhedron(const JetSpace& space, int point_tag) {
  ParamPolyhedron p(space.dim());
  for (size_t i = 0; i < space.dim(); ++i) p.labels[i] = {point_tag, space.indices[i]};
  return p;
}

// ---------------------------------------------------------------------------
// Exact simplex on the dual: min rhs.y  s.t.  A^T y = obj, y >= 0.
// The simplex multipliers at the optimum are the primal solution.

namespace {

class DualTableau {
 public:
  DualTableau(const std::vector<RatVec>& rows, const RatVec& obj, size_t n)
      : n_(n), N_(rows.size()), W_(rows.size() + n + 1), t_(n, RatVec(W_, Rat(0))), basis_(n), sign_(n, 1) {
    for (size_t i = 0; i < n_; ++i) {
      sign_[i] = obj[i] < 0 ? -1 : 1;
      for (size_t j = 0; j < N_; ++j)
        if (sgn(rows[j][i]) != 0) t_[i][j] = sign_[i] > 0 ? rows[j][i] : Rat(-rows[j][i]);
      t_[i][N_ + i] = 1;
      t_[i][W_ - 1] = sign_[i] > 0 ? obj[i] : Rat(-obj[i]);
      basis_[i] = N_ + i;
    }
  }

  // Returns false when phase one proves A^T y = obj has no nonnegative solution.
  bool phase_one() {
    bool all_zero = true;
    for (size_t i = 0; i < n_; ++i)
      if (sgn(t_[i][W_ - 1]) != 0) all_zero = false;
    if (!all_zero) {
      RatVec r(W_, Rat(0));
      for (size_t i = 0; i < n_; ++i)
        for (size_t j = 0; j < W_; ++j)
          if (j < N_ || j == W_ - 1) r[j] -= t_[i][j];
      if (!run(r)) return false;  // cannot be unbounded; treated as failure
      if (sgn(r[W_ - 1]) != 0) return false;
    }
    drive_out_artificials();
    return true;
  }

  // Returns false when the dual is unbounded (primal infeasible).
  bool phase_two(const RatVec& cost) {
    cost_ = cost;
    RatVec r(W_, Rat(0));
    for (size_t j = 0; j < N_; ++j) r[j] = cost[j];
    for (size_t i = 0; i < n_; ++i) {
      const Rat cb = basic_cost(i);
      if (sgn(cb) == 0) continue;
      for (size_t j = 0; j < W_; ++j)
        if (sgn(t_[i][j]) != 0) r[j] -= cb * t_[i][j];
    }
    return run(r);
  }

  RatVec primal() const {
    RatVec x(n_, Rat(0));
    for (size_t i = 0; i < n_; ++i) {
      Rat pi(0);
      for (size_t k = 0; k < n_; ++k) {
        const Rat cb = basic_cost(k);
        if (sgn(cb) != 0 && sgn(t_[k][N_ + i]) != 0) pi += cb * t_[k][N_ + i];
      }
      x[i] = sign_[i] > 0 ? pi : Rat(-pi);
    }
    return x;
  }

 private:
  Rat basic_cost(size_t row) const { return basis_[row] < N_ ? cost_[basis_[row]] : Rat(0); }

  // Bland's rule on the reduced-cost row r (minimization); only structural columns enter.
  bool run(RatVec& r) {
    while (true) {
      size_t q = W_;
      for (size_t j = 0; j < N_; ++j)
        if (sgn(r[j]) < 0) {
          q = j;
          break;
        }
      if (q == W_) return true;
      size_t p = n_;
      Rat best;
      for (size_t i = 0; i < n_; ++i) {
        if (sgn(t_[i][q]) <= 0) continue;
        Rat ratio = t_[i][W_ - 1] / t_[i][q];
        if (p == n_ || ratio < best || (ratio == best && basis_[i] < basis_[p])) {
          p = i;
          best = ratio;
        }
      }
      if (p == n_) return false;
      pivot(p, q, &r);
    }
  }

  void pivot(size_t p, size_t q, RatVec* r) {
    const Rat piv = t_[p][q];
    std::vector<size_t> nz;
    for (size_t j = 0; j < W_; ++j)
      if (sgn(t_[p][j]) != 0) {
        t_[p][j] /= piv;
        nz.push_back(j);
      }
    auto eliminate = [&](RatVec& row) {
      if (sgn(row[q]) == 0) return;
      const Rat f = row[q];
      for (size_t j : nz) row[j] -= f * t_[p][j];
    };
    for (size_t i = 0; i < n_; ++i)
      if (i != p) eliminate(t_[i]);
    if (r) eliminate(*r);
    basis_[p] = q;
  }

  void drive_out_artificials() {
    for (size_t i = 0; i < n_; ++i) {
      if (basis_[i] < N_) continue;
      for (size_t j = 0; j < N_; ++j)
        if (sgn(t_[i][j]) != 0) {
          pivot(i, j, nullptr);
          break;
        }
      // a row without structural entries is redundant; its artificial stays at zero
    }
  }

  size_t n_, N_, W_;
  std::vector<RatVec> t_;
  std::vector<size_t> basis_;
  std::vector<int> sign_;
  RatVec cost_;
};

LPResult feasibility(const std::vector<RatVec>& rows, const RatVec& rhs, size_t n) {
  LPResult res;
  RatVec zero(n, Rat(0));
  DualTableau tab(rows, zero, n);
  tab.phase_one();
  if (!tab.phase_two(rhs)) {
    res.status = LPStatus::Infeasible;
    return res;
  }
  res.status = LPStatus::Feasible;
  res.witness = tab.primal();
  return res;
}

}  // namespace

LPResult solve_lp_rows(const std::vector<RatVec>& rows, const RatVec& rhs, size_t nvars, const RatVec* obj) {
  LPResult res;
  if (nvars == 0) {
    bool ok = std::all_of(rhs.begin(), rhs.end(), [](const Rat& v) { return v >= 0; });
    res.status = ok ? LPStatus::Feasible : LPStatus::Infeasible;
    if (ok && obj) res.objective = Rat(0);
    return res;
  }
  if (!obj || std::all_of(obj->begin(), obj->end(), [](const Rat& v) { return sgn(v) == 0; })) {
    res = feasibility(rows, rhs, nvars);
    if (res.status == LPStatus::Feasible && obj) res.objective = Rat(0);
    return res;
  }
  DualTableau tab(rows, *obj, nvars);
  if (!tab.phase_one()) {
    // dual infeasible: primal is unbounded or infeasible
    res = feasibility(rows, rhs, nvars);
    if (res.status == LPStatus::Feasible) res.status = LPStatus::Unbounded;
    return res;
  }
  if (!tab.phase_two(rhs)) {
    res.status = LPStatus::Infeasible;
    return res;
  }
  res.status = LPStatus::Feasible;
  res.witness = tab.primal();
  Rat val(0);
  for (size_t i = 0; i < nvars; ++i) val += (*obj)[i] * res.witness[i];
  res.objective = val;
  return res;
}

LPResult lp_solve(const ParamPolyhedron& poly, const Rat& M, const std::optional<RatVec>& objective) {
  if (M < 0) throw Error("domain", "lp_solve needs M >= 0");
  std::vector<RatVec> rows;
  RatVec rhs;
  rows.reserve(poly.rows.size());
  for (const auto& r : poly.rows) {
    rows.push_back(r.a);
    rhs.push_back(r.b + M * r.c);
  }
  if (objective && objective->size() != poly.num_vars) throw Error("domain", "objective width mismatch");
  return solve_lp_rows(rows, rhs, poly.num_vars, objective ? &*objective : nullptr);
}

bool is_empty(const ParamPolyhedron& poly, const Rat& M) {
  return lp_solve(poly, M, std::nullopt).status == LPStatus::Infeasible;
}

MinMResult lp_min_M(const ParamPolyhedron& poly) {
  const size_t nv = poly.num_vars;
  std::vector<RatVec> rows;
  RatVec rhs;
  for (const auto& r : poly.rows) {
    RatVec a = r.a;
    a.push_back(-r.c);
    rows.push_back(std::move(a));
    rhs.push_back(r.b);
  }
  RatVec mrow(nv + 1, Rat(0));
  mrow[nv] = -1;
  rows.push_back(mrow);
  rhs.push_back(Rat(0));
  RatVec obj(nv + 1, Rat(0));
  obj[nv] = -1;
  LPResult res = solve_lp_rows(rows, rhs, nv + 1, &obj);
  MinMResult out;
  if (res.status != LPStatus::Feasible) return out;
  out.feasible = true;
  out.M = res.witness[nv];
  out.witness.assign(res.witness.begin(), res.witness.begin() + static_cast<long>(nv));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

int cmp_vec(const RatVec& a, const RatVec& b) {
  for (size_t i = 0; i < a.size(); ++i) {
    int c = cmp(a[i], b[i]);
    if (c != 0) return c;
  }
  return 0;
}

bool row_less(const Row& x, const Row& y) {
  int c = cmp_vec(x.a, y.a);
  if (c != 0) return c < 0;
  c = cmp(x.b, y.b);
  if (c != 0) return c < 0;
  return x.c < y.c;
}

bool is_zero(const RatVec& a) {
  return std::all_of(a.begin(), a.end(), [](const Rat& v) { return sgn(v) == 0; });
}

void normalize_row(Row& r) {
  Rat s(0);
  for (const auto& v : r.a)
    if (sgn(v) != 0) {
      s = rabs(v);
      break;
    }
  if (sgn(s) == 0) s = std::max(rabs(r.b), rabs(r.c));
  if (sgn(s) == 0 || s == 1) return;
  for (auto& v : r.a) v /= s;
  r.b /= s;
  r.c /= s;
}

Row infeasible_row(size_t nv) { return {RatVec(nv, Rat(0)), Rat(-1), Rat(0)}; }

// Normalizes, drops duplicates, trivially true rows and rows dominated by one with the same normal.
std::vector<Row> tidy_rows(std::vector<Row> rows, size_t nv) {
  for (auto& r : rows) normalize_row(r);
  std::vector<Row> out;
  for (auto& r : rows) {
    if (is_zero(r.a)) {
      if (r.b >= 0 && r.c >= 0) continue;
      if (r.b < 0 && r.c <= 0) return {infeasible_row(nv)};
    }
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), row_less);
  std::vector<Row> kept;
  for (size_t i = 0; i < out.size(); ++i) {
    bool dominated = false;
    // rows with equal normals are adjacent; a row is dropped when an earlier one is at least as strong
    for (size_t j = kept.size(); j-- > 0;) {
      if (cmp_vec(kept[j].a, out[i].a) != 0) break;
      if (kept[j].b <= out[i].b && kept[j].c <= out[i].c) {
        dominated = true;
        break;
      }
    }
    if (!dominated) kept.push_back(std::move(out[i]));
  }
  return kept;
}

// max a.v - c M over the rows (with M >= 0 appended); returns nullopt when unbounded or infeasible.
struct RedundancyLP {
  std::vector<RatVec> rows;
  RatVec rhs;
  size_t nv;
};

RedundancyLP joint_system(const std::vector<Row>& rows, size_t nv, const std::vector<bool>& active, size_t skip) {
  RedundancyLP s;
  s.nv = nv + 1;
  for (size_t i = 0; i < rows.size(); ++i) {
    if (!active[i] || i == skip) continue;
    RatVec a = rows[i].a;
    a.push_back(-rows[i].c);
    s.rows.push_back(std::move(a));
    s.rhs.push_back(rows[i].b);
  }
  RatVec m(nv + 1, Rat(0));
  m[nv] = -1;
  s.rows.push_back(m);
  s.rhs.push_back(Rat(0));
  return s;
}

std::vector<Row> prune_rows_exact(std::vector<Row> rows, size_t nv) {
  rows = tidy_rows(std::move(rows), nv);
  if (rows.size() == 1 && is_zero(rows[0].a) && rows[0].b < 0 && rows[0].c <= 0) return rows;
  std::vector<bool> active(rows.size(), true);
  {
    RedundancyLP all = joint_system(rows, nv, active, rows.size());
    if (solve_lp_rows(all.rows, all.rhs, all.nv, nullptr).status == LPStatus::Infeasible)
      return {infeasible_row(nv)};
  }
  for (size_t i = 0; i < rows.size(); ++i) {
    RedundancyLP sys = joint_system(rows, nv, active, i);
    RatVec obj = rows[i].a;
    obj.push_back(-rows[i].c);
    LPResult res = solve_lp_rows(sys.rows, sys.rhs, sys.nv, &obj);
    if (res.status == LPStatus::Feasible && *res.objective <= rows[i].b) active[i] = false;
  }
  std::vector<Row> out;
  for (size_t i = 0; i < rows.size(); ++i)
    if (active[i]) out.push_back(std::move(rows[i]));
  return out;
}

}  // namespace

ParamPolyhedron canonicalize(const ParamPolyhedron& poly) {
  ParamPolyhedron out = poly;
  out.rows = tidy_rows(poly.rows, poly.num_vars);
  return out;
}

ParamPolyhedron prune_exact(const ParamPolyhedron& poly) {
  ParamPolyhedron out = poly;
  out.rows = prune_rows_exact(poly.rows, poly.num_vars);
  return out;
}

ParamPolyhedron prune_redundant(const ParamPolyhedron& poly, const std::vector<Rat>& M_samples) {
  std::vector<bool> active(poly.rows.size(), true);
  for (size_t i = 0; i < poly.rows.size(); ++i) {
    bool redundant = true;
    for (const Rat& M : M_samples) {
      std::vector<RatVec> rows;
      RatVec rhs;
      for (size_t j = 0; j < poly.rows.size(); ++j) {
        if (!active[j] || j == i) continue;
        rows.push_back(poly.rows[j].a);
        rhs.push_back(poly.rows[j].b + M * poly.rows[j].c);
      }
      LPResult res = solve_lp_rows(rows, rhs, poly.num_vars, &poly.rows[i].a);
      if (res.status == LPStatus::Infeasible) continue;
      if (res.status == LPStatus::Unbounded || *res.objective > poly.rows[i].b + M * poly.rows[i].c) {
        redundant = false;
        break;
      }
    }
    if (redundant) active[i] = false;
  }
  ParamPolyhedron out = poly;
  out.rows.clear();
  for (size_t i = 0; i < poly.rows.size(); ++i)
    if (active[i]) out.rows.push_back(poly.rows[i]);
  return out;
}

ParamPolyhedron fm_project(const ParamPolyhedron& poly, const std::vector<size_t>& keep, const FMConfig& cfg) {
  std::vector<size_t> vars(poly.num_vars);
  std::iota(vars.begin(), vars.end(), 0);
  std::vector<bool> keep_mask(poly.num_vars, false);
  for (size_t k : keep) {
    if (k >= poly.num_vars) throw Error("domain", "fm_project keep index out of range");
    keep_mask[k] = true;
  }
  std::vector<Row> rows = cfg.prune ? prune_rows_exact(poly.rows, poly.num_vars) : tidy_rows(poly.rows, poly.num_vars);
  while (true) {
    // choose the eliminated variable with the smallest Fourier-Motzkin product
    size_t best = vars.size();
    size_t best_cost = 0;
    for (size_t p = 0; p < vars.size(); ++p) {
      if (keep_mask[vars[p]]) continue;
      size_t pos = 0, neg = 0;
      for (const auto& r : rows) {
        int s = sgn(r.a[p]);
        pos += s > 0;
        neg += s < 0;
      }
      size_t cost = pos * neg;
      if (best == vars.size() || cost < best_cost) {
        best = p;
        best_cost = cost;
      }
    }
    if (best == vars.size()) break;
    std::vector<Row> zero, pos, neg;
    for (auto& r : rows) {
      int s = sgn(r.a[best]);
      (s > 0 ? pos : s < 0 ? neg : zero).push_back(std::move(r));
    }
    if (zero.size() + pos.size() * neg.size() > cfg.row_cap)
      throw Error("budget", "Fourier-Motzkin row cap exceeded (" + std::to_string(zero.size() + pos.size() * neg.size()) +
                                " > " + std::to_string(cfg.row_cap) + ")");
    std::vector<Row> next = std::move(zero);
    for (const auto& p : pos)
      for (const auto& q : neg) {
        const Rat fp = -q.a[best];
        const Rat fq = p.a[best];
        Row r;
        r.a.resize(vars.size());
        for (size_t i = 0; i < vars.size(); ++i) r.a[i] = fp * p.a[i] + fq * q.a[i];
        r.b = fp * p.b + fq * q.b;
        r.c = fp * p.c + fq * q.c;
        next.push_back(std::move(r));
      }
    for (auto& r : next) r.a.erase(r.a.begin() + static_cast<long>(best));
    vars.erase(vars.begin() + static_cast<long>(best));
    rows = cfg.prune ? prune_rows_exact(std::move(next), vars.size()) : tidy_rows(std::move(next), vars.size());
  }
  // reorder columns to match keep
  ParamPolyhedron out(keep.size());
  for (size_t i = 0; i < keep.size(); ++i) out.labels[i] = poly.labels[keep[i]];
  for (const auto& r : rows) {
    RatVec a(keep.size());
    for (size_t i = 0; i < keep.size(); ++i) {
      auto it = std::find(vars.begin(), vars.end(), keep[i]);
      a[i] = r.a[static_cast<size_t>(it - vars.begin())];
    }
    out.rows.push_back({std::move(a), r.b, r.c});
  }
  return out;
}

ParamPolyhedron intersect(const std::vector<ParamPolyhedron>& polys) {
  if (polys.empty()) throw Error("domain", "intersect needs at least one polyhedron");
  ParamPolyhedron out = polys.front();
  for (size_t i = 1; i < polys.size(); ++i) {
    if (polys[i].num_vars != out.num_vars || !(polys[i].labels == out.labels))
      throw Error("domain", "intersect: variable labels differ");
    out.rows.insert(out.rows.end(), polys[i].rows.begin(), polys[i].rows.end());
  }
  return out;
}

ParamPolyhedron minkowski_box_sum(const ParamPolyhedron& poly, const std::vector<BoxRadius>& radii,
                                  const FMConfig& cfg) {
  const size_t d = poly.num_vars;
  if (radii.size() != d) throw Error("domain", "minkowski_box_sum needs one radius per variable");
  ParamPolyhedron joint(2 * d);
  for (size_t i = 0; i < d; ++i) {
    joint.labels[i] = poly.labels[i];
    joint.labels[d + i] = poly.labels[i];
  }
  for (size_t i = 0; i < d; ++i) {
    RatVec a(2 * d, Rat(0));
    a[i] = 1;
    a[d + i] = -1;
    joint.add_row(a, radii[i].r, radii[i].s);
    for (auto& v : a) v = -v;
    joint.add_row(a, radii[i].r, radii[i].s);
  }
  for (const auto& r : poly.rows) {
    RatVec a(2 * d, Rat(0));
    for (size_t i = 0; i < d; ++i) a[d + i] = r.a[i];
    joint.add_row(a, r.b, r.c);
  }
  std::vector<size_t> keep(d);
  std::iota(keep.begin(), keep.end(), 0);
  return fm_project(joint, keep, cfg);
}

bool helly_family_check(const std::vector<ParamPolyhedron>& family, size_t dim, const Rat& M) {
  if (family.empty()) return true;
  for (const auto& p : family)
    if (p.num_vars != dim) throw Error("domain", "helly_family_check: dimension mismatch");
  const size_t k = std::min(family.size(), dim + 1);
  std::vector<size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    std::vector<ParamPolyhedron> sub;
    for (size_t i : idx) sub.push_back(family[i]);
    // labels are irrelevant for the check; align them
    for (auto& p : sub) p.labels = family.front().labels;
    if (is_empty(intersect(sub), M)) return false;
    size_t i = k;
    while (i > 0 && idx[i - 1] == family.size() - k + i - 1) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return true;
}

ParamPolyhedron substitute(const ParamPolyhedron& poly, const RatMatrix& T) {
  ParamPolyhedron out = poly;
  for (auto& r : out.rows) {
    RatVec a(poly.num_vars, Rat(0));
    for (size_t i = 0; i < poly.num_vars; ++i) {
      if (sgn(r.a[i]) == 0) continue;
      for (size_t j = 0; j < poly.num_vars; ++j)
        if (sgn(T[i][j]) != 0) a[j] += r.a[i] * T[i][j];
    }
    r.a = std::move(a);
  }
  return out;
}

}  // namespace smoothsel
