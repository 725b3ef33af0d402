// SPDX-License-Identifier: MIT
#include "smoothsel/shapefields.hpp"

#include <algorithm>
#include <functional>
#include <random>

namespace smoothsel {

namespace {

Rat dpow(const Rat& delta, int k) { return rpow(delta, k); }

Jet at_base(const Jet& p, const Point& x) { return p.base == x ? p : recenter_jet(p, x); }

bool contains_set(const IndexSet& s, const MultiIndex& a) { return std::find(s.begin(), s.end(), a) != s.end(); }

// beta >= alpha in the total order on multiindices
bool mi_geq(const MultiIndex& beta, const MultiIndex& alpha) { return beta == alpha || mi_less(alpha, beta); }

}  // namespace

ShapeField ShapeField::make(JetSpacePtr space, std::vector<Point> points, std::vector<ParamPolyhedron> gammas) {
  if (!space) throw Error("domain", "shape field without a jet space");
  if (points.size() != gammas.size()) throw Error("domain", "one polyhedron per point is required");
  for (size_t i = 0; i < points.size(); ++i) {
    if (static_cast<int>(points[i].size()) != space->n) throw Error("domain", "point dimension mismatch");
    for (size_t j = 0; j < i; ++j)
      if (points[i] == points[j]) throw Error("domain", "duplicate point in shape field");
    auto& g = gammas[i];
    if (g.num_vars != space->dim()) throw Error("domain", "polyhedron width does not match the jet space");
    if (!g.all_c_nonnegative()) throw Error("domain", "shape field rows need c >= 0");
    g.labels.resize(g.num_vars);
    for (size_t k = 0; k < g.num_vars; ++k) g.labels[k] = {static_cast<int>(i), space->indices[k]};
  }
  ShapeField f;
  f.space = std::move(space);
  f.points = std::move(points);
  f.gammas = std::move(gammas);
  return f;
}

size_t ShapeField::index_of(const Point& x) const {
  for (size_t i = 0; i < points.size(); ++i)
    if (points[i] == x) return i;
  throw Error("domain", "point is not in the shape field");
}

ShapeField box_field(const JetSpacePtr& space, const std::vector<Point>& points, const std::vector<RatVec>& centers,
                     const std::vector<RatVec>& weights) {
  const size_t d = space->dim();
  std::vector<ParamPolyhedron> gammas;
  for (size_t i = 0; i < points.size(); ++i) {
    ParamPolyhedron g = jet_polyhedron(*space, static_cast<int>(i));
    for (size_t k = 0; k < d; ++k) {
      RatVec e(d, Rat(0));
      e[k] = 1;
      g.add_row(e, centers[i][k], weights[i][k]);
      e[k] = -1;
      g.add_row(e, -centers[i][k], weights[i][k]);
    }
    gammas.push_back(std::move(g));
  }
  return ShapeField::make(space, points, std::move(gammas));
}

RatVec taylor_radii(const JetSpace& space, const Point& x, const Point& y, int sqrt_bits) {
  RatVec out(space.dim());
  for (size_t i = 0; i < space.dim(); ++i) out[i] = dist_pow(x, y, space.m - space.order_of(i), sqrt_bits).hi;
  return out;
}

ShapeField first_refinement(const ShapeField& field, const RefineConfig& cfg) {
  const JetSpace& sp = *field.space;
  std::vector<ParamPolyhedron> out;
  for (size_t i = 0; i < field.size(); ++i) {
    std::vector<ParamPolyhedron> parts;
    parts.push_back(field.gammas[i]);
    for (size_t j = 0; j < field.size(); ++j) {
      if (j == i) continue;
      // rows of gamma(y) rewritten over the derivatives at x
      ParamPolyhedron moved = substitute(field.gammas[j], recenter_matrix(sp, field.points[i], field.points[j]));
      moved.labels = field.gammas[i].labels;
      RatVec rad = taylor_radii(sp, field.points[i], field.points[j], cfg.sqrt_bits);
      std::vector<BoxRadius> radii;
      for (const auto& r : rad) radii.push_back({Rat(0), r});
      ParamPolyhedron sum = minkowski_box_sum(moved, radii, cfg.fm);
      sum.labels = field.gammas[i].labels;
      parts.push_back(std::move(sum));
    }
    ParamPolyhedron g = prune_exact(intersect(parts));
    out.push_back(std::move(g));
  }
  return ShapeField::make(field.space, field.points, std::move(out));
}

ShapeField refine(const ShapeField& field, int l, const RefineConfig& cfg) {
  if (l < 0) throw Error("domain", "refine needs l >= 0");
  ShapeField cur = field;
  for (int k = 0; k < l; ++k) cur = first_refinement(cur, cfg);
  return cur;
}

std::optional<RatVec> refinement_witness(const ShapeField& field, size_t y_index, const Jet& p_in, const Rat& M,
                                         int sqrt_bits) {
  const JetSpace& sp = *field.space;
  const size_t d = sp.dim();
  const Point& x = p_in.base;
  const Point& y = field.points.at(y_index);
  RatMatrix R = recenter_matrix(sp, y, x);
  RatVec rad = taylor_radii(sp, x, y, sqrt_bits);
  std::vector<RatVec> rows;
  RatVec rhs;
  for (const auto& r : field.gammas[y_index].rows) {
    RatVec a = r.a;
    a.push_back(Rat(0));
    rows.push_back(std::move(a));
    rhs.push_back(r.b + M * r.c);
  }
  for (size_t b = 0; b < d; ++b) {
    RatVec a(d + 1, Rat(0));
    for (size_t k = 0; k < d; ++k) a[k] = R[b][k];
    a[d] = -M * rad[b];
    rows.push_back(a);
    rhs.push_back(p_in.coeffs[b]);
    for (size_t k = 0; k < d; ++k) a[k] = -a[k];
    rows.push_back(a);
    rhs.push_back(-p_in.coeffs[b]);
  }
  RatVec t(d + 1, Rat(0));
  t[d] = 1;
  rows.push_back(t);
  rhs.push_back(Rat(1));
  t[d] = -1;
  rows.push_back(t);
  rhs.push_back(Rat(0));
  RatVec obj(d + 1, Rat(0));
  obj[d] = -1;
  LPResult res = solve_lp_rows(rows, rhs, d + 1, &obj);
  if (res.status != LPStatus::Feasible) return std::nullopt;
  res.witness.pop_back();
  return res.witness;
}

// ---------------------------------------------------------------------------

namespace {

Rat random_rat(std::mt19937_64& rng, int lo, int hi, int den) {
  std::uniform_int_distribution<int> d(lo * den, hi * den);
  return make_rat(d(rng), den);
}

RatVec random_objective(std::mt19937_64& rng, size_t d) {
  RatVec obj(d);
  for (auto& v : obj) v = random_rat(rng, -3, 3, 1);
  return obj;
}

// Q1 = (1 - t^2) / (1 + t^2), Q2 = 2t / (1 + t^2) with t affine, scaled until |d^beta Q_i| <= delta^-|beta|.
std::pair<Jet, Jet> circle_pair(const JetSpacePtr& sp, const Point& x, const Rat& delta, std::mt19937_64& rng) {
  Rat t0 = random_rat(rng, -2, 2, 4);
  RatVec dir(sp->n);
  for (auto& v : dir) v = random_rat(rng, -2, 2, 1);
  Rat s(1);
  for (int iter = 0; iter < 400; ++iter) {
    Jet t(sp, x);
    t.coeffs[0] = t0;
    for (int i = 0; i < sp->n; ++i) {
      int k = sp->index_of(sp->unit(i));
      if (k >= 0) t.coeffs[static_cast<size_t>(k)] = s * dir[static_cast<size_t>(i)];
    }
    Jet one = jet_constant(sp, x, Rat(1));
    Jet tt = jet_multiply(t, t, x);
    Jet inv = jet_inverse(one + tt);
    Jet q1 = jet_multiply(one - tt, inv, x);
    Jet q2 = jet_multiply(Rat(2) * t, inv, x);
    bool ok = true;
    for (size_t k = 0; k < sp->dim() && ok; ++k) {
      Rat bound = dpow(delta, -sp->order_of(k));
      ok = rabs(q1.coeffs[k]) <= bound && rabs(q2.coeffs[k]) <= bound;
    }
    if (ok) return {q1, q2};
    s /= 2;
  }
  throw Error("budget", "could not scale the circle pair");
}

}  // namespace

ConvexityReport sample_convexity(const ShapeField& field, const Rat& Cw, const Rat& delta_max, int trials,
                                 uint64_t seed) {
  if (trials < 1) throw Error("domain", "sample_convexity needs trials >= 1");
  const JetSpacePtr& sp = field.space;
  const size_t d = sp->dim();
  std::mt19937_64 rng(seed);
  ConvexityReport rep;
  for (int tr = 0; tr < trials; ++tr) {
    ++rep.trials;
    size_t i = std::uniform_int_distribution<size_t>(0, field.size() - 1)(rng);
    const Point& x = field.points[i];
    const ParamPolyhedron& g = field.gammas[i];
    Rat delta = delta_max * make_rat(std::uniform_int_distribution<int>(1, 8)(rng), 8);
    MinMResult mm = lp_min_M(g);
    if (!mm.feasible) {
      ++rep.skipped;
      continue;
    }
    Rat r = random_rat(rng, 0, 2, 8) + Rat(1, 8);
    Rat M = mm.M * (1 + r) + r;
    // a bounding box keeps the random objectives bounded
    ParamPolyhedron boxed = g;
    LPResult w0 = lp_solve(g, M, std::nullopt);
    for (size_t k = 0; k < d; ++k) {
      Rat rad = 4 * M * dpow(delta, sp->m - sp->order_of(k));
      RatVec e(d, Rat(0));
      e[k] = 1;
      boxed.add_row(e, w0.witness[k] + rad);
      e[k] = -1;
      boxed.add_row(e, -w0.witness[k] + rad);
    }
    LPResult p1 = lp_solve(boxed, M, random_objective(rng, d));
    ParamPolyhedron near = g;
    for (size_t k = 0; k < d; ++k) {
      Rat rad = M * dpow(delta, sp->m - sp->order_of(k));
      RatVec e(d, Rat(0));
      e[k] = 1;
      near.add_row(e, p1.witness[k] + rad);
      e[k] = -1;
      near.add_row(e, -p1.witness[k] + rad);
    }
    LPResult p2 = lp_solve(near, M, random_objective(rng, d));
    Jet P1(sp, x, p1.witness), P2(sp, x, p2.witness);
    auto [q1, q2] = circle_pair(sp, x, delta, rng);
    Jet P = jet_multiply(jet_multiply(q1, q1, x), P1, x) + jet_multiply(jet_multiply(q2, q2, x), P2, x);
    if (!g.contains(P.coeffs, Cw * M)) rep.violations.push_back({i, delta, M, P1, P2, q1, q2, P});
  }
  return rep;
}

// ---------------------------------------------------------------------------

BasisCheck verify_basis(const BasisCertificate& cert, const ShapeField& field) {
  auto fail = [](std::string why) { return BasisCheck{false, std::move(why)}; };
  const JetSpace& sp = *field.space;
  size_t idx;
  try {
    idx = field.index_of(cert.x0);
  } catch (const Error&) {
    return fail("base point not in E");
  }
  if (cert.basis.size() != cert.A.size()) return fail("basis size differs from A");
  if (cert.delta <= 0) return fail("delta must be positive");
  if (cert.CB <= 0) return fail("C_B must be positive");
  for (size_t i = 0; i < cert.A.size(); ++i) {
    if (sp.index_of(cert.A[i]) < 0) return fail("A is not inside M");
    for (size_t j = 0; j < i; ++j)
      if (cert.A[i] == cert.A[j]) return fail("A has a repeated element");
  }
  const ParamPolyhedron& g = field.gammas[idx];
  const Rat Mbig = cert.CB * cert.M0;
  Jet p0 = at_base(cert.P0, cert.x0);
  if (!g.contains(p0.coeffs, Mbig)) return fail("(pb1) P0 not in gamma(x0, C_B M0)");
  for (size_t i = 0; i < cert.A.size(); ++i) {
    const MultiIndex& alpha = cert.A[i];
    Jet pa = at_base(cert.basis[i], cert.x0);
    Rat step = cert.M0 * dpow(cert.delta, sp.m - order(alpha)) / cert.CB;
    if (!g.contains((p0 + step * pa).coeffs, Mbig) || !g.contains((p0 - step * pa).coeffs, Mbig))
      return fail("(pb2) P0 +- step P_alpha leaves gamma");
    for (size_t j = 0; j < cert.A.size(); ++j) {
      Rat want = i == j ? Rat(1) : Rat(0);
      if (pa.at(cert.A[j]) != want) return fail("(pb3) Kronecker condition fails");
    }
    for (size_t k = 0; k < sp.dim(); ++k) {
      const MultiIndex& beta = sp.indices[k];
      if (cert.weak && !mi_geq(beta, alpha)) continue;
      if (rabs(pa.coeffs[k]) > cert.CB * dpow(cert.delta, order(alpha) - order(beta)))
        return fail("(pb4) derivative bound fails");
    }
  }
  return {};
}

std::optional<Rat> achieved_basis_constant(BasisCertificate cert, const ShapeField& field, int max_exp) {
  for (int e = 0; e <= max_exp; ++e) {
    cert.CB = pow2(e);
    if (verify_basis(cert, field)) return cert.CB;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

void check_rescale_input(const RescaleInput& in) {
  const JetSpace& sp = *in.space;
  if (in.F.size() != in.A.size()) throw Error("domain", "rescale: one row of F per element of A");
  if (in.a <= 0 || in.C <= 0) throw Error("domain", "rescale: C and a must be positive");
  for (size_t i = 0; i < in.A.size(); ++i) {
    if (in.F[i].size() != sp.dim()) throw Error("domain", "rescale: F row width");
    const MultiIndex& alpha = in.A[i];
    const Rat& faa = in.F[i][static_cast<size_t>(sp.index_of(alpha))];
    if (sgn(faa) == 0) throw Error("domain", "rescale: F_aa must be nonzero");
    for (size_t k = 0; k < sp.dim(); ++k) {
      const MultiIndex& beta = sp.indices[k];
      if (mi_geq(beta, alpha) && rabs(in.F[i][k]) > in.C * rabs(faa))
        throw Error("domain", "rescale: |F_ab| <= C |F_aa| fails for b >= a");
      if (beta != alpha && contains_set(in.A, beta) && sgn(in.F[i][k]) != 0)
        throw Error("domain", "rescale: F_ab must vanish for distinct a, b in A");
    }
  }
}

// Tries one lambda; fills phi on success.
bool try_lambda(const RescaleInput& in, const std::vector<int>& expo, std::vector<MultiIndex>& phi) {
  const JetSpace& sp = *in.space;
  phi.assign(in.A.size(), {});
  for (size_t i = 0; i < in.A.size(); ++i) {
    size_t best = sp.dim();
    Rat best_v;
    std::vector<Rat> vals(sp.dim());
    for (size_t k = 0; k < sp.dim(); ++k) {
      int e = 0;
      for (int c = 0; c < sp.n; ++c) e += expo[static_cast<size_t>(c)] * sp.indices[k][static_cast<size_t>(c)];
      vals[k] = rabs(in.F[i][k]) * pow2(-e);
      if (best == sp.dim() || vals[k] > best_v) {
        best = k;
        best_v = vals[k];
      }
    }
    const MultiIndex& target = sp.indices[best];
    const MultiIndex& alpha = in.A[i];
    if (!(target == alpha || mi_less(target, alpha))) return false;
    if (target != alpha && contains_set(in.A, target)) return false;
    Rat lim = in.a * best_v;
    for (size_t k = 0; k < sp.dim(); ++k)
      if (k != best && vals[k] > lim) return false;
    phi[i] = target;
  }
  return true;
}

}  // namespace

RescaleOutput rescale(const RescaleInput& in, const RescaleConfig& cfg) {
  check_rescale_input(in);
  const int n = in.space->n;
  std::vector<MultiIndex> phi;
  for (int total = 0; total <= cfg.max_total_exponent; ++total) {
    // all exponent vectors with the given sum, in lexicographic order
    std::vector<int> expo(static_cast<size_t>(n), 0);
    std::vector<std::vector<int>> todo;
    std::function<void(int, int)> gen = [&](int pos, int left) {
      if (pos == n - 1) {
        expo[static_cast<size_t>(pos)] = left;
        todo.push_back(expo);
        return;
      }
      for (int v = 0; v <= left; ++v) {
        expo[static_cast<size_t>(pos)] = v;
        gen(pos + 1, left - v);
      }
    };
    gen(0, total);
    for (const auto& e : todo)
      if (try_lambda(in, e, phi)) {
        RescaleOutput out;
        for (int v : e) out.lambda.push_back(pow2(-v));
        out.phi = phi;
        return out;
      }
  }
  throw Error("not-found", "rescale: search grid exhausted");
}

BasisCheck verify_rescale(const RescaleInput& in, const RescaleOutput& out) {
  const JetSpace& sp = *in.space;
  if (static_cast<int>(out.lambda.size()) != sp.n) return {false, "lambda has the wrong length"};
  for (const auto& l : out.lambda)
    if (l <= 0 || l > 1) return {false, "lambda outside (0, 1]"};
  if (out.phi.size() != in.A.size()) return {false, "phi has the wrong length"};
  for (size_t i = 0; i < in.A.size(); ++i) {
    const MultiIndex& alpha = in.A[i];
    const MultiIndex& f = out.phi[i];
    int fk = sp.index_of(f);
    if (fk < 0) return {false, "phi leaves M"};
    if (!(f == alpha || mi_less(f, alpha))) return {false, "phi(alpha) > alpha"};
    if (f != alpha && contains_set(in.A, f)) return {false, "phi(alpha) in A but not alpha"};
    Rat top = rabs(mono_pow(out.lambda, f) * in.F[i][static_cast<size_t>(fk)]);
    for (size_t k = 0; k < sp.dim(); ++k) {
      if (static_cast<int>(k) == fk) continue;
      if (rabs(mono_pow(out.lambda, sp.indices[k]) * in.F[i][k]) > in.a * top) return {false, "dominance fails"};
    }
  }
  return {};
}

// ---------------------------------------------------------------------------

RelabelResult relabel(const BasisCertificate& weak_cert, const ShapeField& field, const LemmaConfig& cfg) {
  const JetSpacePtr& spp = field.space;
  const JetSpace& sp = *spp;
  BasisCertificate in = weak_cert;
  in.weak = true;
  if (!verify_basis(in, field)) throw Error("domain", "relabel needs a verified weak basis");
  RelabelResult res;
  if (in.A.empty()) {
    res.cert = in;
    res.cert.weak = false;
    res.achieved_C = achieved_basis_constant(res.cert, field).value_or(res.cert.CB);
    return res;
  }
  const Point& x0 = in.x0;
  const Rat& delta = in.delta;
  std::vector<Jet> P00;
  for (const auto& j : in.basis) P00.push_back(at_base(j, x0));

  RescaleInput rin{spp, in.A, {}, in.CB, cfg.a};
  Rat biggest(0);
  for (size_t i = 0; i < in.A.size(); ++i) {
    RatVec row(sp.dim());
    for (size_t k = 0; k < sp.dim(); ++k) {
      row[k] = dpow(delta, sp.order_of(k) - order(in.A[i])) * P00[i].coeffs[k];
      biggest = std::max(biggest, rabs(row[k]));
    }
    rin.F.push_back(std::move(row));
  }
  RescaleOutput ro = rescale(rin, cfg.rescale);
  const RatVec& lam = ro.lambda;

  // A bar = phi(A), psi picks the least preimage
  IndexSet Abar;
  std::vector<size_t> psi;
  for (const auto& beta : sp.indices)
    for (size_t i = 0; i < in.A.size(); ++i)
      if (ro.phi[i] == beta) {
        Abar.push_back(beta);
        psi.push_back(i);
        break;
      }
  std::vector<Jet> Pbar;
  for (size_t j = 0; j < Abar.size(); ++j) {
    const Jet& p = P00[psi[j]];
    int gap = order(Abar[j]) - order(in.A[psi[j]]);
    Rat denom = dpow(delta, gap) * mono_pow(lam, Abar[j]) * p.at(Abar[j]);
    if (sgn(denom) == 0) throw Error("threshold-ambiguous", "relabel: vanishing pivot");
    Rat b = 1 / denom;
    Pbar.push_back((b * dpow(delta, gap)) * p);
  }

  IndexSet Ahat = monotonic_span(Abar, sp);
  std::vector<Jet> Q;
  for (const auto& ah : Ahat) {
    size_t chi = Abar.size();
    for (size_t j = 0; j < Abar.size(); ++j)
      if (mi_leq(Abar[j], ah)) {
        chi = j;
        break;
      }
    MultiIndex omega(ah.size());
    for (size_t c = 0; c < ah.size(); ++c) omega[c] = ah[c] - Abar[chi][c];
    Rat coef = Rat(mi_factorial(Abar[chi])) / Rat(mi_factorial(ah)) / mono_pow(lam, omega);
    Jet S = jet_monomial(spp, x0, omega, coef);
    Q.push_back(jet_multiply(S, Pbar[chi], x0));
  }
  const size_t h = Ahat.size();
  RatMatrix G(h, RatVec(h));
  for (size_t r = 0; r < h; ++r)
    for (size_t c = 0; c < h; ++c)
      G[r][c] = dpow(delta, order(Ahat[c]) - order(Ahat[r])) * mono_pow(lam, Ahat[c]) * Q[r].at(Ahat[c]);
  auto Binv = invert_matrix(G);
  if (!Binv) throw Error("threshold-ambiguous", "relabel: singular matrix; the small-a condition fails");
  std::vector<Jet> Pnew;
  for (size_t g = 0; g < h; ++g) {
    Jet acc = jet_zero(spp, x0);
    for (size_t r = 0; r < h; ++r)
      if (sgn((*Binv)[g][r]) != 0) acc = acc + ((*Binv)[g][r] * dpow(delta, order(Ahat[g]) - order(Ahat[r]))) * Q[r];
    Pnew.push_back(mono_pow(lam, Ahat[g]) * acc);
  }
  res.A_hat = Ahat;
  res.cert = in;
  res.cert.A = Ahat;
  res.cert.basis = Pnew;
  res.cert.weak = false;
  res.cert.CB = cfg.cb_factor * in.CB;
  res.strict = Ahat != sp.normalize(in.A) && subset_less(Ahat, in.A);
  res.achieved_C = achieved_basis_constant(res.cert, field).value_or(Rat(0));
  BasisCheck chk = verify_basis(res.cert, field);
  if (!chk) throw Error("threshold-ambiguous", "relabel: constructed basis fails verification: " + chk.failure);
  if (biggest > cfg.threshold && !res.strict)
    throw Error("threshold-ambiguous", "relabel: large entries but no strict decrease");
  return res;
}

// ---------------------------------------------------------------------------

ControlResult control_gamma(const BasisCertificate& cert, const Jet& P_in, const ShapeField& field,
                            const LemmaConfig& cfg) {
  const JetSpacePtr& spp = field.space;
  const JetSpace& sp = *spp;
  if (cert.weak) throw Error("domain", "control_gamma needs a full basis");
  if (!verify_basis(cert, field)) throw Error("domain", "control_gamma needs a verified basis");
  const Point& x0 = cert.x0;
  const Rat& delta = cert.delta;
  const ParamPolyhedron& g = field.gammas[field.index_of(x0)];
  Jet P0 = at_base(cert.P0, x0);
  Jet P = at_base(P_in, x0);
  if (!g.contains(P.coeffs, cert.CB * cert.M0)) throw Error("precondition", "control_gamma: P not in gamma(x0, C_B M0)");
  Jet D = P - P0;
  for (const auto& b : cert.A)
    if (sgn(D.at(b)) != 0) throw Error("precondition", "control_gamma: P - P0 has a nonzero derivative on A");
  Rat mx(0);
  size_t gi = 0;
  for (size_t k = 0; k < sp.dim(); ++k) {
    Rat v = dpow(delta, sp.order_of(k)) * rabs(D.coeffs[k]);
    if (v > mx) {
      mx = v;
      gi = k;
    }
  }
  Rat target = cert.M0 * dpow(delta, sp.m);
  if (mx < target || sgn(mx) == 0) throw Error("precondition", "control_gamma: P is too close to P0");
  // move P toward P0 so the maximum is attained with equality
  Rat t = target / mx;
  D = t * D;
  P = P0 + D;
  const MultiIndex gamma = sp.indices[gi];
  Jet P0hat = Rat(1, 2) * (P0 + P);
  Jet Pg = (1 / D.coeffs[gi]) * D;

  IndexSet Aplus = sp.normalize([&] {
    IndexSet s = cert.A;
    s.push_back(gamma);
    return s;
  }());
  std::vector<Jet> basis;
  for (const auto& a : Aplus) {
    if (a == gamma) {
      basis.push_back(Pg);
      continue;
    }
    size_t i = static_cast<size_t>(std::find(cert.A.begin(), cert.A.end(), a) - cert.A.begin());
    Jet pa = at_base(cert.basis[i], x0);
    basis.push_back(pa - pa.coeffs[gi] * Pg);
  }
  BasisCertificate mid{Aplus, x0, cert.M0, P0hat, delta, Rat(1), basis, false};
  auto C = achieved_basis_constant(mid, field);
  if (!C) throw Error("verification", "control_gamma: intermediate basis does not verify");
  mid.CB = *C;
  RelabelResult rr = relabel(mid, field, cfg);
  if (rr.A_hat == sp.normalize(cert.A) || !subset_less(rr.A_hat, cert.A)) throw Error("verification", "control_gamma: no strict decrease");
  Jet diff = P0hat - P0;
  for (const auto& b : cert.A)
    if (sgn(diff.at(b)) != 0) throw Error("verification", "control_gamma: difference not zero on A");
  for (size_t k = 0; k < sp.dim(); ++k)
    if (rabs(diff.coeffs[k]) > cert.M0 * dpow(delta, sp.m - sp.order_of(k)))
      throw Error("verification", "control_gamma: difference bound fails");
  return {rr.A_hat, P0hat, rr.cert};
}

// ---------------------------------------------------------------------------

namespace {

struct WitnessSet {
  std::vector<Jet> plus, minus;  // refined witnesses, recentered to x0
};

Jet witness_at_x0(const ShapeField& prev, size_t y_idx, const Jet& target, const Rat& M, int bits) {
  auto w = refinement_witness(prev, y_idx, target, M, bits);
  if (!w) throw Error("infeasible", "transport: no refinement witness at y0");
  return recenter_jet(Jet(prev.space, prev.points[y_idx], *w), target.base);
}

// Dual basis at y0: P#_g = sum_a b_ga delta^(|g|-|a|) P'_a with b the inverse of the matrix at y0.
std::vector<Jet> basis_at(const IndexSet& A, const std::vector<Jet>& Pp, const Point& y0, const Rat& delta) {
  std::vector<Jet> at_y;
  for (const auto& p : Pp) at_y.push_back(recenter_jet(p, y0));
  const size_t h = A.size();
  RatMatrix H(h, RatVec(h));
  for (size_t a = 0; a < h; ++a)
    for (size_t b = 0; b < h; ++b) H[a][b] = dpow(delta, order(A[b]) - order(A[a])) * at_y[a].at(A[b]);
  auto B = invert_matrix(H);
  if (!B) throw Error("ill-conditioned", "transport: basis matrix at y0 is singular");
  std::vector<Jet> out;
  for (size_t g = 0; g < h; ++g) {
    Jet acc = jet_zero(at_y[0].space, y0);
    for (size_t a = 0; a < h; ++a) acc = acc + ((*B)[g][a] * dpow(delta, order(A[g]) - order(A[a]))) * at_y[a];
    out.push_back(acc);
  }
  return out;
}

}  // namespace

TransportResult transport(const BasisCertificate& cert_A, const BasisCertificate& cert_A_hat, const Point& y0,
                          const ShapeField& field_l0, const ShapeField& field_prev, const LemmaConfig& cfg) {
  const JetSpacePtr& spp = field_l0.space;
  const JetSpace& sp = *spp;
  if (cert_A.x0 != cert_A_hat.x0 || cert_A.M0 != cert_A_hat.M0 || cert_A.delta != cert_A_hat.delta)
    throw Error("domain", "transport: certificates disagree on x0, M0 or delta");
  if (cert_A.weak || cert_A_hat.weak) throw Error("domain", "transport needs full bases");
  if (!is_monotonic(cert_A.A, sp)) throw Error("precondition", "transport: A must be monotonic");
  if (!verify_basis(cert_A, field_l0) || !verify_basis(cert_A_hat, field_l0))
    throw Error("precondition", "transport: input bases do not verify");
  const Point& x0 = cert_A.x0;
  const Rat& M0 = cert_A.M0;
  const Rat& delta = cert_A.delta;
  Jet P0 = at_base(cert_A.P0, x0);
  Jet P0h = at_base(cert_A_hat.P0, x0);
  for (const auto& b : cert_A.A)
    if (P0.at(b) != P0h.at(b)) throw Error("precondition", "transport: P0 and P0 hat differ on A");
  if (dist2(x0, y0) > cfg.eps0 * cfg.eps0 * delta * delta) throw Error("precondition", "transport: |x0 - y0| > eps0 delta");
  const size_t y_idx = field_prev.index_of(y0);
  const Rat CBp = cfg.cb_factor * std::max(cert_A.CB, cert_A_hat.CB);

  Jet Phash(spp, x0);
  std::vector<Jet> Pp, Pph;
  if (cert_A.A.empty() && cert_A_hat.A.empty()) {
    Phash = witness_at_x0(field_prev, y_idx, P0, cert_A.CB * M0, cfg.sqrt_bits);
  } else {
    auto corrected = [&](const BasisCertificate& c, const Jet& base, std::vector<Jet>& sum_witness) {
      std::vector<Jet> out;
      const Rat c0 = 1 / c.CB;
      for (size_t i = 0; i < c.A.size(); ++i) {
        Jet pa = at_base(c.basis[i], x0);
        Rat scale = c0 * M0 * dpow(delta, sp.m - order(c.A[i]));
        Jet E[2];
        for (int s = 0; s < 2; ++s) {
          Rat sig = s == 0 ? Rat(1) : Rat(-1);
          Jet target = base + (sig * scale) * pa;
          Jet w = witness_at_x0(field_prev, y_idx, target, c.CB * M0, cfg.sqrt_bits);
          sum_witness.push_back(w);
          E[s] = (1 / (sig * scale)) * (w - target);
        }
        out.push_back(pa + Rat(1, 2) * (E[0] + E[1]));
      }
      return out;
    };
    std::vector<Jet> all;
    Pp = corrected(cert_A, P0, all);
    Pph = corrected(cert_A_hat, P0h, all);
    Jet Pprime = jet_zero(spp, x0);
    for (const auto& w : all) Pprime = Pprime + w;
    Pprime = Rat(1, static_cast<long>(all.size())) * Pprime;
    Phash = Pprime;
    const IndexSet& A = cert_A.A;
    if (!A.empty()) {
      const size_t h = A.size();
      RatMatrix G(h, RatVec(h));
      RatVec rhs(h);
      Jet dev = Pprime - P0;
      for (size_t b = 0; b < h; ++b) {
        for (size_t a = 0; a < h; ++a) G[b][a] = dpow(delta, order(A[b]) - order(A[a])) * Pp[a].at(A[b]);
        rhs[b] = -dpow(delta, order(A[b]) - sp.m) * dev.at(A[b]) / M0;
      }
      auto s = solve_linear(G, rhs);
      if (!s) throw Error("ill-conditioned", "transport: correction system is singular");
      for (size_t a = 0; a < h; ++a) Phash = Phash + ((*s)[a] * M0 * dpow(delta, sp.m - order(A[a]))) * Pp[a];
    }
  }

  TransportResult out;
  out.P_hash = recenter_jet(Phash, y0);
  out.cert_A = {cert_A.A, y0, M0, out.P_hash, delta, CBp, {}, false};
  out.cert_A_hat = {cert_A_hat.A, y0, M0, out.P_hash, delta, CBp, {}, false};
  if (!cert_A.A.empty()) out.cert_A.basis = basis_at(cert_A.A, Pp, y0, delta);
  if (!cert_A_hat.A.empty()) out.cert_A_hat.basis = basis_at(cert_A_hat.A, Pph, y0, delta);
  BasisCheck c1 = verify_basis(out.cert_A, field_prev);
  if (!c1) throw Error("verification", "transport: basis for A fails: " + c1.failure);
  BasisCheck c2 = verify_basis(out.cert_A_hat, field_prev);
  if (!c2) throw Error("verification", "transport: basis for A hat fails: " + c2.failure);
  Jet diff = Phash - P0;
  for (const auto& b : cert_A.A)
    if (sgn(diff.at(b)) != 0) throw Error("verification", "transport: P# - P0 is not zero on A");
  for (size_t k = 0; k < sp.dim(); ++k)
    if (rabs(diff.coeffs[k]) > CBp * M0 * dpow(delta, sp.m - sp.order_of(k)))
      throw Error("verification", "transport: difference bound fails");
  return out;
}

}  // namespace smoothsel
