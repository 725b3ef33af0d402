// SPDX-License-Identifier: MIT
#include "smoothsel/finiteness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace smoothsel {

WhitneyField WhitneyField::make(JetSpacePtr space, std::vector<Point> points, std::vector<Jet> jets) {
  if (points.size() != jets.size()) throw Error("domain", "one jet per point is required");
  for (size_t i = 0; i < points.size(); ++i) {
    if (jets[i].base != points[i]) throw Error("domain", "jet base differs from its point");
    if (!same_space(*jets[i].space, *space)) throw Error("domain", "jet space mismatch");
    for (size_t j = 0; j < i; ++j)
      if (points[i] == points[j]) throw Error("domain", "duplicate point in Whitney field");
  }
  return {std::move(space), std::move(points), std::move(jets)};
}

ShapeField interval_field(const JetSpacePtr& space, const std::vector<Point>& points, const RatVec& lo,
                          const RatVec& hi) {
  if (lo.size() != points.size() || hi.size() != points.size()) throw Error("domain", "one interval per point");
  std::vector<ParamPolyhedron> gs;
  for (size_t i = 0; i < points.size(); ++i) {
    if (lo[i] > hi[i]) throw Error("domain", "empty interval");
    ParamPolyhedron g = jet_polyhedron(*space, static_cast<int>(i));
    RatVec e(space->dim(), Rat(0));
    e[0] = 1;
    g.add_row(e, hi[i]);
    e[0] = -1;
    g.add_row(e, -lo[i]);
    gs.push_back(std::move(g));
  }
  return ShapeField::make(space, points, std::move(gs));
}

Rat whitney_seminorm(const WhitneyField& f, int sqrt_bits) {
  const JetSpace& sp = *f.space;
  Rat best(0);
  for (size_t i = 0; i < f.points.size(); ++i)
    for (size_t j = 0; j < f.points.size(); ++j) {
      if (i == j) continue;
      Jet diff = f.jets[i] - recenter_jet(f.jets[j], f.points[i]);
      for (size_t k = 0; k < sp.dim(); ++k) {
        if (sgn(diff.coeffs[k]) == 0) continue;
        SqrtEnclosure d = dist_pow(f.points[i], f.points[j], sp.m - sp.order_of(k), sqrt_bits);
        best = std::max(best, Rat(rabs(diff.coeffs[k]) / d.lo));
      }
    }
  return best;
}

bool seminorm_at_most(const WhitneyField& f, const Rat& M) {
  if (M < 0) return false;
  const JetSpace& sp = *f.space;
  for (size_t i = 0; i < f.points.size(); ++i)
    for (size_t j = 0; j < f.points.size(); ++j) {
      if (i == j) continue;
      Jet diff = f.jets[i] - recenter_jet(f.jets[j], f.points[i]);
      Rat d2 = dist2(f.points[i], f.points[j]);
      for (size_t k = 0; k < sp.dim(); ++k) {
        Rat lhs = diff.coeffs[k] * diff.coeffs[k];
        if (lhs > M * M * rpow(d2, sp.m - sp.order_of(k))) return false;
      }
    }
  return true;
}

std::optional<Rat> min_M_containing(const ParamPolyhedron& poly, const RatVec& p) {
  Rat lo(0);
  for (const auto& r : poly.rows) {
    Rat s = -r.b;
    for (size_t i = 0; i < p.size(); ++i) s += r.a[i] * p[i];
    if (sgn(r.c) == 0) {
      if (s > 0) return std::nullopt;
    } else if (s / r.c > lo) {
      lo = s / r.c;
    }
  }
  return lo;
}

namespace {

// Rows a . v <= b + M c over the joint jets of pts (blocks of width d), in the field's frame.
// Seminorm rows use the lower distance enclosure, which can only shrink the feasible set.
std::vector<Row> joint_rows(const ShapeField& field, const std::vector<size_t>& pts, int sqrt_bits) {
  const JetSpace& sp = *field.space;
  const size_t d = sp.dim();
  const size_t w = pts.size() * d;
  std::vector<Row> rows;
  for (size_t p = 0; p < pts.size(); ++p)
    for (const auto& r : field.gammas[pts[p]].rows) {
      RatVec a(w, Rat(0));
      std::copy(r.a.begin(), r.a.end(), a.begin() + static_cast<long>(p * d));
      rows.push_back({std::move(a), r.b, r.c});
    }
  for (size_t p = 0; p < pts.size(); ++p)
    for (size_t q = 0; q < pts.size(); ++q) {
      if (p == q) continue;
      const Point& x = field.points[pts[p]];
      const Point& y = field.points[pts[q]];
      RatMatrix R = recenter_matrix(sp, y, x);
      for (size_t b = 0; b < d; ++b) {
        Rat rad = dist_pow(x, y, sp.m - sp.order_of(b), sqrt_bits).lo;
        RatVec a(w, Rat(0));
        a[p * d + b] = 1;
        for (size_t k = 0; k < d; ++k) a[q * d + k] = -R[b][k];
        rows.push_back({a, Rat(0), rad});
        for (auto& v : a) v = -v;
        rows.push_back({std::move(a), Rat(0), rad});
      }
    }
  return rows;
}

}  // namespace

MinWhitney min_whitney_M(const ShapeField& field, const std::vector<size_t>& S, const FiniteConfig& cfg) {
  if (S.empty()) throw Error("domain", "min_whitney_M needs a nonempty set");
  const JetSpacePtr& sp = field.space;
  const size_t d = sp->dim();
  const size_t w = S.size() * d;
  std::vector<RatVec> rows;
  RatVec rhs;
  for (const auto& r : joint_rows(field, S, cfg.sqrt_bits)) {
    RatVec a = r.a;
    a.push_back(-r.c);
    rows.push_back(std::move(a));
    rhs.push_back(r.b);
  }
  RatVec neg(w + 1, Rat(0));
  neg[w] = -1;
  rows.push_back(neg);
  rhs.push_back(Rat(0));
  LPResult res = solve_lp_rows(rows, rhs, w + 1, &neg);
  if (res.status != LPStatus::Feasible) throw Error("infeasible", "no Whitney field satisfies the constraints");
  MinWhitney out;
  out.M = res.witness[w];
  std::vector<Point> pts;
  std::vector<Jet> jets;
  for (size_t p = 0; p < S.size(); ++p) {
    pts.push_back(field.points[S[p]]);
    RatVec c(res.witness.begin() + static_cast<long>(p * d), res.witness.begin() + static_cast<long>((p + 1) * d));
    jets.emplace_back(sp, pts.back(), std::move(c));
  }
  out.field = WhitneyField::make(sp, std::move(pts), std::move(jets));
  return out;
}

ParamPolyhedron gamma_x_S(const ShapeField& field, size_t x, const std::vector<size_t>& S, const FiniteConfig& cfg) {
  const size_t d = field.space->dim();
  std::vector<size_t> pts{x};
  for (size_t s : S)
    if (s != x && std::find(pts.begin(), pts.end(), s) == pts.end()) pts.push_back(s);
  if (pts.size() == 1) return field.gammas[x];
  ParamPolyhedron joint(pts.size() * d);
  for (size_t p = 0; p < pts.size(); ++p)
    for (size_t k = 0; k < d; ++k) joint.labels[p * d + k] = field.gammas[pts[p]].labels[k];
  joint.rows = joint_rows(field, pts, cfg.sqrt_bits);
  std::vector<size_t> keep(d);
  std::iota(keep.begin(), keep.end(), 0);
  return fm_project(joint, keep, cfg.fm);
}

void for_each_subset(size_t n, size_t k, size_t budget, const std::function<bool(const std::vector<size_t>&)>& visit) {
  size_t count = 0;
  for (size_t size = 1; size <= std::min(n, k); ++size) {
    std::vector<size_t> idx(size);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
      if (++count > budget) throw Error("budget", "subset enumeration budget exceeded");
      if (!visit(idx)) return;
      // next combination in lexicographic order
      size_t i = size;
      while (i > 0 && idx[i - 1] == n - size + i - 1) --i;
      if (i == 0) break;
      ++idx[i - 1];
      for (size_t j = i; j < size; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
}

ParamPolyhedron gamma_fp(const ShapeField& field, size_t x, int l, size_t subset_cap, const FiniteConfig& cfg) {
  if (subset_cap < 1) throw Error("domain", "gamma_fp needs subset_cap >= 1");
  if (l < 0) throw Error("domain", "gamma_fp needs l >= 0");
  size_t bound = 1;
  for (int i = 0; i < l && bound < field.size(); ++i) bound *= field.space->dim() + 2;
  const size_t k = std::min(subset_cap, bound);
  std::vector<ParamPolyhedron> parts{field.gammas[x]};
  for_each_subset(field.size(), k, cfg.subset_budget, [&](const std::vector<size_t>& S) {
    parts.push_back(gamma_x_S(field, x, S, cfg));
    return true;
  });
  return prune_exact(intersect(parts));
}

FunctionalResult finiteness_functional(const ShapeField& field, size_t k, const FiniteConfig& cfg) {
  if (k < 1) throw Error("domain", "finiteness_functional needs k >= 1");
  FunctionalResult out;
  out.value = -1;
  for_each_subset(field.size(), k, cfg.subset_budget, [&](const std::vector<size_t>& S) {
    try {
      MinWhitney mw = min_whitney_M(field, S, cfg);
      if (mw.M > out.value) {
        out.value = mw.M;
        out.subset = S;
      }
      return true;
    } catch (const Error& e) {
      if (e.tag() != "infeasible") throw;
      out.feasible = false;
      out.subset = S;
      return false;
    }
  });
  return out;
}

Clustering cluster(const std::vector<Point>& S) {
  const size_t n = S.size();
  if (n < 2) throw Error("domain", "cluster needs at least two points");
  // Kruskal on squared distances
  struct Edge {
    Rat d2;
    size_t i, j;
  };
  std::vector<Edge> edges;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      if (S[i] == S[j]) throw Error("domain", "cluster: duplicate point");
      edges.push_back({dist2(S[i], S[j]), i, j});
    }
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return a.d2 < b.d2; });
  std::vector<size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<size_t(size_t)> find = [&](size_t v) { return parent[v] == v ? v : parent[v] = find(parent[v]); };
  Rat longest(0);
  std::vector<Edge> tree;
  for (const auto& e : edges) {
    size_t a = find(e.i), b = find(e.j);
    if (a == b) continue;
    parent[a] = b;
    tree.push_back(e);
    longest = std::max(longest, e.d2);
  }
  std::iota(parent.begin(), parent.end(), 0);
  for (const auto& e : tree)
    if (e.d2 < longest) parent[find(e.i)] = find(e.j);
  std::map<size_t, std::vector<size_t>> groups;
  std::vector<size_t> order;
  for (size_t i = 0; i < n; ++i) {
    size_t r = find(i);
    if (!groups.count(r)) order.push_back(r);
    groups[r].push_back(i);
  }
  Clustering out;
  for (size_t r : order) out.parts.push_back(groups[r]);
  out.c = Rat(1, static_cast<long>(n - 1));
  return out;
}

namespace {

struct RefineChain {
  std::vector<ShapeField> levels;
};

void build_refined(const RefineChain& chain, size_t x, const Jet& P, const Rat& M0, int l, std::vector<size_t> S,
                   std::map<size_t, Jet>& out, const FiniteConfig& cfg) {
  if (S.size() == 1) {
    out[x] = P;
    return;
  }
  if (static_cast<int>(S.size()) <= l - 1) return build_refined(chain, x, P, M0, l - 1, std::move(S), out, cfg);
  const ShapeField& f = chain.levels.front();
  std::vector<Point> pts;
  for (size_t s : S) pts.push_back(f.points[s]);
  Clustering cl = cluster(pts);
  for (const auto& part : cl.parts) {
    std::vector<size_t> sub;
    for (size_t p : part) sub.push_back(S[p]);
    if (std::find(sub.begin(), sub.end(), x) != sub.end()) {
      build_refined(chain, x, P, M0, l - 1, sub, out, cfg);
      continue;
    }
    size_t xv = sub.front();
    auto w = refinement_witness(chain.levels[static_cast<size_t>(l - 1)], xv, P, M0, cfg.sqrt_bits);
    if (!w) throw Error("infeasible", "no refinement witness at a cluster representative");
    build_refined(chain, xv, Jet(f.space, f.points[xv], *w), M0, l - 1, sub, out, cfg);
  }
}

}  // namespace

RefinedField field_from_refined_jet(const ShapeField& base, size_t x0, const Jet& P0_in, const Rat& M0, int l_star,
                                    const std::vector<size_t>& S, const FiniteConfig& cfg) {
  if (M0 <= 0) throw Error("domain", "field_from_refined_jet needs M0 > 0");
  if (l_star < 1) throw Error("domain", "field_from_refined_jet needs l_star >= 1");
  if (std::find(S.begin(), S.end(), x0) == S.end()) throw Error("domain", "S must contain x0");
  if (static_cast<int>(S.size()) > l_star) throw Error("domain", "S has more than l_star points");
  RefineChain chain;
  chain.levels.push_back(base);
  RefineConfig rc{cfg.fm, cfg.sqrt_bits};
  for (int l = 1; l <= l_star; ++l) chain.levels.push_back(first_refinement(chain.levels.back(), rc));
  Jet P0 = P0_in.base == base.points[x0] ? P0_in : recenter_jet(P0_in, base.points[x0]);
  if (!chain.levels.back().gammas[x0].contains(P0.coeffs, M0))
    throw Error("precondition", "P0 is not in the refined set at M0");
  std::map<size_t, Jet> jets;
  build_refined(chain, x0, P0, M0, l_star, S, jets, cfg);
  std::vector<Point> pts;
  std::vector<Jet> js;
  Rat C(0);
  for (size_t s : S) {
    pts.push_back(base.points[s]);
    js.push_back(jets.at(s));
    auto mm = min_M_containing(base.gammas[s], js.back().coeffs);
    if (!mm) throw Error("verification", "constructed jet is outside gamma_0 at every M");
    C = std::max(C, Rat(*mm / M0));
  }
  RefinedField out{WhitneyField::make(base.space, std::move(pts), std::move(js)), Rat(0)};
  out.C_star = std::max(C, Rat(whitney_seminorm(out.field, cfg.sqrt_bits) / M0));
  return out;
}

// ---------------------------------------------------------------------------

void check_metric(const RatMatrix& dist) {
  const size_t n = dist.size();
  for (size_t i = 0; i < n; ++i) {
    if (dist[i].size() != n) throw Error("domain", "distance matrix is not square");
    if (sgn(dist[i][i]) != 0) throw Error("domain", "distance matrix needs a zero diagonal");
  }
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      if (dist[i][j] != dist[j][i]) throw Error("domain", "distance matrix is not symmetric");
      if (i != j && dist[i][j] <= 0) throw Error("domain", "distinct points need positive distance");
      for (size_t k = 0; k < n; ++k)
        if (dist[i][k] > dist[i][j] + dist[j][k]) throw Error("domain", "triangle inequality fails");
    }
}

namespace {

// Rational unit vectors spread over the circle, via t -> ((1 - t^2), 2t) / (1 + t^2).
std::vector<RatVec> circle_directions(int count) {
  std::vector<RatVec> out;
  const double pi = std::acos(-1.0);
  for (int j = 0; j < count; ++j) {
    double theta = 2 * pi * j / count;
    if (std::abs(theta - pi) < 1e-9) {
      out.push_back({Rat(-1), Rat(0)});
      continue;
    }
    Rat t = make_rat(std::lround(std::tan(theta / 2) * 4096), 4096);
    Rat den = 1 + t * t;
    out.push_back({Rat((1 - t * t) / den), Rat(2 * t / den)});
  }
  return out;
}

struct SubLip {
  Rat L;
  std::vector<RatVec> F;
};

SubLip solve_lip(const MetricSelectionProblem& pr, const std::vector<size_t>& X, LipNorm norm) {
  const size_t D = pr.flats[X[0]].offset.size();
  std::vector<size_t> start;
  size_t w = 0;
  for (size_t x : X) {
    start.push_back(w);
    w += pr.flats[x].basis.size();
  }
  const size_t Lvar = w;
  std::vector<RatVec> dirs;
  if (norm == LipNorm::Sup || D == 1) {
    for (size_t i = 0; i < D; ++i) {
      RatVec e(D, Rat(0));
      e[i] = 1;
      dirs.push_back(e);
      e[i] = -1;
      dirs.push_back(e);
    }
  } else if (D == 2) {
    dirs = circle_directions(64);
  } else {
    throw Error("domain", "euclidean Lipschitz selection supports D <= 2");
  }
  std::vector<RatVec> rows;
  RatVec rhs;
  for (size_t p = 0; p < X.size(); ++p)
    for (size_t q = p + 1; q < X.size(); ++q) {
      const Flat& fp = pr.flats[X[p]];
      const Flat& fq = pr.flats[X[q]];
      for (const auto& u : dirs) {
        // u . (o_p + B_p t_p - o_q - B_q t_q) <= L dist
        RatVec a(w + 1, Rat(0));
        Rat c(0);
        for (size_t i = 0; i < D; ++i) c += u[i] * (fp.offset[i] - fq.offset[i]);
        for (size_t b = 0; b < fp.basis.size(); ++b)
          for (size_t i = 0; i < D; ++i) a[start[p] + b] += u[i] * fp.basis[b][i];
        for (size_t b = 0; b < fq.basis.size(); ++b)
          for (size_t i = 0; i < D; ++i) a[start[q] + b] -= u[i] * fq.basis[b][i];
        a[Lvar] = -pr.dist[X[p]][X[q]];
        rows.push_back(std::move(a));
        rhs.push_back(-c);
      }
    }
  RatVec obj(w + 1, Rat(0));
  obj[Lvar] = -1;
  rows.push_back(obj);
  rhs.push_back(Rat(0));
  LPResult res = solve_lp_rows(rows, rhs, w + 1, &obj);
  if (res.status != LPStatus::Feasible) throw Error("infeasible", "Lipschitz LP failed");
  SubLip out;
  out.L = res.witness[Lvar];
  for (size_t p = 0; p < X.size(); ++p) {
    const Flat& f = pr.flats[X[p]];
    RatVec v = f.offset;
    for (size_t b = 0; b < f.basis.size(); ++b)
      for (size_t i = 0; i < D; ++i) v[i] += res.witness[start[p] + b] * f.basis[b][i];
    out.F.push_back(std::move(v));
  }
  return out;
}

double euclid_constant(const MetricSelectionProblem& pr, const std::vector<RatVec>& F) {
  double best = 0;
  for (size_t p = 0; p < F.size(); ++p)
    for (size_t q = p + 1; q < F.size(); ++q) {
      double s = 0;
      for (size_t i = 0; i < F[p].size(); ++i) {
        double d = to_double(F[p][i] - F[q][i]);
        s += d * d;
      }
      best = std::max(best, std::sqrt(s) / to_double(pr.dist[p][q]));
    }
  return best;
}

}  // namespace

LipschitzResult lipschitz_select(const MetricSelectionProblem& problem, LipNorm norm, size_t k,
                                 const FiniteConfig& cfg) {
  if (k < 1) throw Error("domain", "lipschitz_select needs k >= 1");
  check_metric(problem.dist);
  const size_t n = problem.dist.size();
  if (problem.flats.size() != n || n == 0) throw Error("domain", "one flat per point is required");
  const size_t D = problem.flats[0].offset.size();
  for (const auto& f : problem.flats) {
    if (f.offset.size() != D) throw Error("domain", "flats live in different dimensions");
    for (const auto& b : f.basis)
      if (b.size() != D) throw Error("domain", "flat basis vector has the wrong length");
  }
  std::vector<size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  SubLip full = solve_lip(problem, all, norm);
  LipschitzResult out;
  out.F = full.F;
  out.L = full.L;
  out.L_upper = norm == LipNorm::Sup ? to_double(full.L) : euclid_constant(problem, full.F);
  out.subset_L = -1;
  for_each_subset(n, k, cfg.subset_budget, [&](const std::vector<size_t>& S) {
    Rat v = S.size() == 1 ? Rat(0) : solve_lip(problem, S, norm).L;
    if (v > out.subset_L) {
      out.subset_L = v;
      out.subset = S;
    }
    return true;
  });
  return out;
}

}  // namespace smoothsel
