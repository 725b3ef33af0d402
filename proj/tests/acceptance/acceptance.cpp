// SPDX-License-Identifier: MIT
// Acceptance harness: one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "smoothsel/io.hpp"

using namespace smoothsel;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

Rat rnd(std::mt19937_64& rng, int lo, int hi, int den = 4) {
  std::uniform_int_distribution<int> num(lo * den, hi * den);
  std::uniform_int_distribution<int> d(1, den);
  Rat r(num(rng), d(rng));
  r.canonicalize();
  return r;
}

std::vector<Point> distinct_points(std::mt19937_64& rng, size_t count, int n, int lo, int hi, int den) {
  std::vector<Point> pts;
  while (pts.size() < count) {
    Point p;
    for (int i = 0; i < n; ++i) p.push_back(rnd(rng, lo, hi, den));
    if (std::find(pts.begin(), pts.end(), p) == pts.end()) pts.push_back(p);
  }
  return pts;
}

ShapeField random_box(std::mt19937_64& rng, const JetSpacePtr& sp, size_t npts, int n) {
  auto pts = distinct_points(rng, npts, n, -2, 2, 4);
  std::vector<RatVec> c(npts), w(npts);
  for (size_t i = 0; i < npts; ++i)
    for (size_t k = 0; k < sp->dim(); ++k) {
      c[i].push_back(rnd(rng, -2, 2));
      w[i].push_back(rnd(rng, 0, 1) + Rat(1, 8));
    }
  return box_field(sp, pts, c, w);
}

// Box rows plus one slanted row per point.
ShapeField random_slanted(std::mt19937_64& rng, const JetSpacePtr& sp, size_t npts) {
  auto pts = distinct_points(rng, npts, 1, -2, 2, 4);
  std::vector<ParamPolyhedron> gs;
  for (size_t i = 0; i < npts; ++i) {
    ParamPolyhedron g = jet_polyhedron(*sp, static_cast<int>(i));
    for (size_t k = 0; k < sp->dim(); ++k) {
      Rat c = rnd(rng, -2, 2), w = rnd(rng, 0, 2) + Rat(1, 4);
      RatVec e(sp->dim(), Rat(0));
      e[k] = 1;
      g.add_row(e, c, w);
      e[k] = -1;
      g.add_row(e, Rat(-c), w);
    }
    RatVec a(sp->dim());
    for (auto& v : a) v = rnd(rng, -2, 2, 1);
    g.add_row(a, rnd(rng, -1, 2), rnd(rng, 0, 1));
    gs.push_back(std::move(g));
  }
  return ShapeField::make(sp, pts, gs);
}

Rat factorial(int k) {
  Rat f(1);
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

// n = 1 reading of the first refinement: some P' in gamma(y, M) has
// |d^k (P - P')(x)| <= M |x - y|^(m - k) for every k < m.
bool refinement_oracle(const ShapeField& f, size_t i, const RatVec& p, const Rat& M) {
  if (!f.gammas[i].contains(p, M)) return false;
  const JetSpace& sp = *f.space;
  const size_t d = sp.dim();
  for (size_t j = 0; j < f.size(); ++j) {
    if (j == i) continue;
    Rat h = f.points[i][0] - f.points[j][0];
    std::vector<RatVec> rows;
    RatVec rhs;
    for (const auto& r : f.gammas[j].rows) {
      rows.push_back(r.a);
      rhs.push_back(r.b + M * r.c);
    }
    for (size_t k = 0; k < d; ++k) {
      int ok = sp.order_of(k);
      RatVec a(d, Rat(0));
      for (size_t t = 0; t < d; ++t) {
        int ot = sp.order_of(t);
        if (ot >= ok) a[t] = rpow(h, ot - ok) / factorial(ot - ok);
      }
      Rat bound = M * rpow(rabs(h), sp.m - ok);
      rows.push_back(a);
      rhs.push_back(bound + p[k]);
      RatVec na = a;
      for (auto& v : na) v = -v;
      rows.push_back(na);
      rhs.push_back(bound - p[k]);
    }
    if (solve_lp_rows(rows, rhs, d, nullptr).status != LPStatus::Feasible) return false;
  }
  return true;
}

Outcome criterion1() {
  std::mt19937_64 rng(1001);
  int agree = 0, disagree = 0, inside = 0;
  for (int t = 0; t < 500; ++t) {
    int m = 1 + t % 2;
    auto sp = JetSpace::make(m, 1);
    auto f = random_slanted(rng, sp, 2 + static_cast<size_t>(t / 2) % 3);
    ShapeField r = first_refinement(f);
    for (int s = 0; s < 20; ++s) {
      size_t i = static_cast<size_t>(rng() % f.size());
      Rat M = rnd(rng, 0, 3) + Rat(1, 8);
      RatVec p(sp->dim());
      LPResult w = lp_solve(f.gammas[i], M, std::nullopt);
      for (size_t k = 0; k < p.size(); ++k)
        p[k] = (w.status == LPStatus::Feasible ? w.witness[k] : Rat(0)) + rnd(rng, -1, 1, 8);
      bool direct = refinement_oracle(f, i, p, M);
      inside += direct;
      (r.gammas[i].contains(p, M) == direct ? agree : disagree)++;
    }
  }
  std::ostringstream s;
  s << agree << "/" << agree + disagree << " pairs agree (" << inside << " inside the refinement)";
  return {disagree == 0 && inside > 0, s.str()};
}

Outcome criterion2() {
  std::mt19937_64 rng(1002);
  auto sp = JetSpace::make(2, 1);
  int checked = 0, violations = 0;
  for (int t = 0; t < 100; ++t) {
    auto f = random_box(rng, sp, 3 + static_cast<size_t>(t % 2), 1);
    int l = t % 3;
    ParamPolyhedron fp = gamma_fp(f, 0, l, 1000);
    ShapeField ref = refine(f, l);
    MinMResult mm = lp_min_M(fp);
    if (!mm.feasible) continue;
    for (int s = 0; s < 5; ++s) {
      Rat M = s == 0 ? mm.M : Rat(mm.M + rnd(rng, 0, 1));
      RatVec obj{rnd(rng, -2, 2, 1), rnd(rng, -2, 2, 1)};
      LPResult w = lp_solve(fp, M, obj);
      if (w.status != LPStatus::Feasible) {
        ++violations;
        continue;
      }
      ++checked;
      if (!ref.gammas[0].contains(w.witness, M)) ++violations;
    }
  }
  std::ostringstream s;
  s << checked << " sampled members of gamma_fp, " << violations << " outside the refinement";
  return {violations == 0 && checked >= 100, s.str()};
}

Outcome criterion3() {
  std::mt19937_64 rng(1003);
  int instances = 0, violations = 0;
  for (int t = 0; t < 100; ++t) {
    int m = 2 + (t % 3 == 2), n = t % 3 == 1 ? 2 : 1;
    auto sp = JetSpace::make(m, n);
    const size_t D = sp->dim();
    size_t npts = 3 + static_cast<size_t>((t / 6) % 2);
    auto f = random_box(rng, sp, npts, n);
    int l = (t / 3) % 2;
    size_t cap = 1;
    for (int i = 0; i <= l; ++i) cap *= D + 2;
    Rat M0(0);
    for_each_subset(f.size(), std::min(cap, f.size()), 1000000, [&](const std::vector<size_t>& S) {
      MinMResult mm = lp_min_M(gamma_x_S(f, 0, S));
      if (!mm.feasible) throw Error("internal", "box fields are feasible at large M");
      M0 = std::max(M0, mm.M);
      return true;
    });
    ParamPolyhedron fp = gamma_fp(f, 0, l, 1000000);
    ++instances;
    if (is_empty(fp, M0)) ++violations;
  }
  std::ostringstream s;
  s << instances << " instances at the Helly threshold, " << violations << " with empty gamma_fp";
  return {violations == 0, s.str()};
}

Outcome criterion4() {
  auto sp = JetSpace::make(2, 1);
  std::vector<Point> E{{Rat(0)}, {Rat(1)}, {Rat(2)}};
  ShapeField f = interval_field(sp, E, {0, 1, 0}, {0, 1, 0});
  FunctionalResult k2 = finiteness_functional(f, 2), k3 = finiteness_functional(f, 3);
  Rat full = min_whitney_M(f, {0, 1, 2}).M;
  bool ok = k2.feasible && k3.feasible && k2.value == 0 && k3.value == 1 && full == 1;
  return {ok, "k=2: " + rat_to_string(k2.value) + ", k=3: " + rat_to_string(k3.value) + ", full: " + rat_to_string(full)};
}

Outcome criterion5() {
  std::mt19937_64 rng(1005);
  auto sp = JetSpace::make(2, 1);
  int violations = 0, verify_failures = 0, undefined_ratio = 0;
  Rat worst(0);
  for (int t = 0; t < 200; ++t) {
    size_t npts = 2 + static_cast<size_t>(t % 11);
    auto E = distinct_points(rng, npts, 1, -4, 4, 8);
    RatVec lo, hi;
    for (size_t i = 0; i < npts; ++i) {
      Rat a = rnd(rng, -2, 2), w = rng() % 4 == 0 ? Rat(0) : rnd(rng, 0, 1);
      lo.push_back(a);
      hi.push_back(a + w);
    }
    SelectionProblem p = interval_problem(sp, E, lo, hi);
    Json doc = problem_json(p);
    Json res = solve_document(doc, {});
    if (res["status"] != "solved") {
      ++violations;
      continue;
    }
    GluedFunction F = json_glued(sp, res["function"]);
    for (size_t i = 0; i < npts; ++i) {
      Rat v = F.value(E[i]);
      if (v < lo[i] || v > hi[i]) ++violations;
    }
    if (!verify_document(res).ok) ++verify_failures;
    if (res["ratio"].is_null()) ++undefined_ratio;
    else worst = std::max(worst, json_rat(res["ratio"]));
  }
  std::ostringstream s;
  s << "constraint violations " << violations << ", verify failures " << verify_failures << ", max ratio "
    << rat_to_string(worst) << " (~" << to_double(worst) << "), ratio undefined " << undefined_ratio;
  return {violations == 0 && verify_failures == 0, s.str()};
}

Outcome criterion6() {
  std::mt19937_64 rng(1006);
  int bad = 0;
  size_t leaves = 0, pairs = 0;
  for (int t = 0; t < 200; ++t) {
    int n = 1 + t % 2;
    size_t npts = 1 + static_cast<size_t>(rng() % 20);
    auto E = distinct_points(rng, npts, n, -3, 3, 16);
    Frame fr = frame_for(E);
    std::vector<Point> shifted;
    for (auto x : E) {
      for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] -= fr.origin[static_cast<size_t>(i)];
      shifted.push_back(x);
    }
    CZDecomposition dec = cz_decompose(fr.Q0, shifted);
    CZReport rep = check_cz_geometry(dec);
    leaves += dec.leaves.size();
    pairs += rep.pairs_checked;
    if (!rep.ok()) {
      ++bad;
      std::cerr << "set " << t << ": " << rep.violations.front() << "\n";
    }
  }
  std::ostringstream s;
  s << bad << " failing decompositions; " << leaves << " leaves, " << pairs << " pairs checked";
  return {bad == 0, s.str()};
}

Outcome criterion7() {
  std::mt19937_64 rng(1007);
  std::vector<std::shared_ptr<PartitionOfUnity>> pous;
  Rat C(0);
  for (int t = 0; t < 12; ++t) {
    int n = 1 + t % 2, m = 2 + (t / 2) % 2;
    auto E = distinct_points(rng, 1 + static_cast<size_t>(rng() % 8), n, -2, 2, 8);
    Frame fr = frame_for(E);
    for (auto& x : E)
      for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] -= fr.origin[static_cast<size_t>(i)];
    pous.push_back(std::make_shared<PartitionOfUnity>(cz_decompose(fr.Q0, E), m));
    C = std::max(C, pous.back()->derivative_bound());
  }
  const double Cd = to_double(C);
  double worst_sum = 0, worst_ratio = 0;
  long samples = 0;
  for (const auto& pou : pous) {
    const DyadicCube& root = pou->decomposition().root;
    const double side = to_double(root.side());
    const size_t n = root.corner.size();
    std::uniform_real_distribution<double> u(0, side);
    const JetSpace& w = *pou->deriv_space();
    for (int s = 0; s < 10000; ++s) {
      std::vector<double> x(n);
      for (auto& v : x) v = u(rng);
      worst_sum = std::max(worst_sum, std::abs(pou->sum_theta_sq(x) - 1));
      for (size_t leaf : pou->active(x)) {
        std::vector<double> d = pou->theta_derivs(leaf, x);
        double dq = to_double(pou->decomposition().leaves[leaf].side());
        for (size_t k = 0; k < w.dim(); ++k)
          worst_ratio = std::max(worst_ratio, std::abs(d[k]) * std::pow(dq, w.order_of(k)) / Cd);
      }
      ++samples;
    }
  }
  std::ostringstream s;
  s << samples << " points, max |sum theta^2 - 1| = " << worst_sum << ", suite C = " << Cd
    << ", max sampled |d theta| delta^|beta| / C = " << worst_ratio;
  return {worst_sum <= 1e-12 && worst_ratio <= 1 + 1e-9, s.str()};
}

Outcome criterion8() {
  std::mt19937_64 rng(1008);
  int failures = 0;
  for (int t = 0; t < 200; ++t) {
    int n = 1 + t % 3, m = 2 + (t / 3) % 2;
    auto sp = JetSpace::make(m, n);
    IndexSet A;
    for (const auto& b : sp->indices)
      if (rng() % 3 == 0) A.push_back(b);
    if (A.empty()) A.push_back(sp->indices[rng() % sp->dim()]);
    Rat C = rnd(rng, 1, 8, 1);
    RescaleInput in{sp, A, {}, C, Rat(1, 4)};
    for (const auto& alpha : A) {
      RatVec row(sp->dim());
      Rat diag = rnd(rng, 1, 3);
      if (rng() % 2) diag = -diag;
      for (size_t k = 0; k < sp->dim(); ++k) {
        const MultiIndex& beta = sp->indices[k];
        if (beta == alpha) row[k] = diag;
        else if (std::find(A.begin(), A.end(), beta) != A.end()) row[k] = 0;
        else if (mi_less(alpha, beta)) row[k] = diag * make_rat(static_cast<long>(rng() % 17) - 8, 8) * C;
        else row[k] = rnd(rng, -100, 100);
      }
      in.F.push_back(row);
    }
    try {
      if (!verify_rescale(in, rescale(in))) ++failures;
    } catch (const Error& e) {
      ++failures;
      std::cerr << "instance " << t << ": " << e.what() << "\n";
    }
  }
  return {failures == 0, std::to_string(failures) + " failures in 200 instances"};
}

// Largest |d^beta D(x0)| / (M0 delta^(m - |beta|)).
Rat diff_constant(const Jet& d, const Rat& M0, const Rat& delta) {
  Rat worst(0);
  const JetSpace& sp = *d.space;
  for (size_t k = 0; k < sp.dim(); ++k)
    worst = std::max(worst, Rat(rabs(d.coeffs[k]) / (M0 * rpow(delta, sp.m - sp.order_of(k)))));
  return worst;
}

Outcome criterion9() {
  std::mt19937_64 rng(1009);
  auto sp = JetSpace::make(2, 1);
  int control_done = 0, control_bad = 0, transport_done = 0, transport_bad = 0;
  Rat transport_C(0);
  Point x0{Rat(1, 2)};
  for (int t = 0; t < 2000 && control_done < 50; ++t) {
    RatVec w{rnd(rng, 1, 3), rnd(rng, 1, 3)};
    auto f = box_field(sp, {x0}, {{rnd(rng, -1, 1), rnd(rng, -1, 1)}}, {w});
    Rat delta = rnd(rng, 1, 2);
    Jet c0(sp, x0, {f.gammas[0].rows[0].b, f.gammas[0].rows[2].b});
    BasisCertificate c{{}, x0, Rat(1), c0, delta, Rat(4), {}, false};
    if (t % 2) {
      c.A = {{0}};
      c.basis = {jet_constant(sp, x0, 1)};
      c.CB = Rat(16);
    }
    if (!verify_basis(c, f)) continue;
    Jet P = c0;
    P.coeffs[1] += (rng() % 2 ? 1 : -1) * rnd(rng, 1, 3) * w[1];
    if (c.A.empty()) P.coeffs[0] += rnd(rng, -1, 1) * w[0];
    if (!f.gammas[0].contains(P.coeffs, c.CB * c.M0)) continue;
    if (delta * rabs(P.coeffs[1] - c0.coeffs[1]) < delta * delta * c.M0) continue;
    ControlResult res = control_gamma(c, P, f);
    ++control_done;
    Jet d = res.P0_hat - c.P0;
    bool ok = is_monotonic(res.A_hat, *sp) && subset_less(res.A_hat, c.A) && verify_basis(res.cert, f) &&
              res.cert.P0 == res.P0_hat && diff_constant(d, c.M0, delta) <= 1;
    for (const auto& b : c.A) ok = ok && d.at(b) == 0;
    if (!ok) ++control_bad;
  }
  Point o{Rat(0)};
  for (int t = 0; t < 2000 && transport_done < 50; ++t) {
    Point y0{make_rat(static_cast<long>(rng() % 33) - 16, 1024)};
    std::vector<Point> pts{o};
    if (y0 != o) pts.push_back(y0);
    pts.push_back({Rat(3)});
    std::vector<RatVec> centers, weights;
    for (size_t i = 0; i < pts.size(); ++i) {
      centers.push_back({rnd(rng, -1, 1), rnd(rng, -1, 1)});
      weights.push_back({rnd(rng, 0, 1) + Rat(1, 8), rnd(rng, 0, 1) + Rat(1, 8)});
    }
    auto prev = box_field(sp, pts, centers, weights);
    auto l0 = first_refinement(prev);
    MinMResult mm = lp_min_M(l0.gammas[0]);
    if (!mm.feasible) continue;
    Rat M0 = std::max(Rat(1, 4), mm.M);
    Jet P0(sp, o, lp_solve(l0.gammas[0], M0, RatVec{rnd(rng, -2, 2, 1), rnd(rng, -2, 2, 1)}).witness);
    Rat delta(1);
    BasisCertificate cA{{}, o, M0, P0, delta, Rat(1), {}, false};
    BasisCertificate cH{{{0}}, o, M0, P0, delta, Rat(1), {jet_constant(sp, o, 1)}, false};
    if (t % 3 == 2) {
      cH = cA;
    } else if (t % 3 == 1) {
      cA = cH;
      cA.A = {{0}, {1}};
      cA.basis.push_back(jet_monomial(sp, o, {1}, 1));
      cH.A = {{1}};
      cH.basis = {jet_monomial(sp, o, {1}, 1)};
    }
    auto ca = achieved_basis_constant(cA, l0);
    auto ch = achieved_basis_constant(cH, l0);
    if (!ca || !ch) continue;
    cA.CB = *ca;
    cH.CB = *ch;
    TransportResult res = transport(cA, cH, y0, l0, prev);
    ++transport_done;
    Jet d = recenter_jet(res.P_hash, o) - P0;
    bool ok = verify_basis(res.cert_A, prev) && verify_basis(res.cert_A_hat, prev) && res.P_hash.base == y0;
    for (const auto& b : cA.A) ok = ok && d.at(b) == 0;
    Rat Cp = diff_constant(d, M0, delta);
    transport_C = std::max(transport_C, Cp);
    // the difference constant may not exceed the returned basis constant
    ok = ok && Cp <= res.cert_A.CB;
    if (!ok) ++transport_bad;
  }
  std::ostringstream s;
  s << "control_gamma " << control_done - control_bad << "/" << control_done << " verified, transport "
    << transport_done - transport_bad << "/" << transport_done << " verified, max transport difference constant "
    << rat_to_string(transport_C);
  return {control_done == 50 && transport_done == 50 && control_bad == 0 && transport_bad == 0, s.str()};
}

Outcome criterion10() {
  std::mt19937_64 rng(1010);
  int instances = 0, bad = 0;
  Rat worst(0);
  for (int t = 0; t < 100; ++t) {
    size_t nx = 3 + static_cast<size_t>(t % 3);
    auto pos = distinct_points(rng, nx, 2, -3, 3, 4);
    RatMatrix dist(nx, RatVec(nx, Rat(0)));
    for (size_t i = 0; i < nx; ++i)
      for (size_t j = 0; j < nx; ++j) dist[i][j] = std::max(rabs(pos[i][0] - pos[j][0]), rabs(pos[i][1] - pos[j][1]));
    MetricSelectionProblem pr{dist, {}};
    for (size_t i = 0; i < nx; ++i) {
      RatVec dir{rnd(rng, -2, 2, 1), rnd(rng, -2, 2, 1)};
      if (dir[0] == 0 && dir[1] == 0) dir[0] = 1;
      pr.flats.push_back({{rnd(rng, -2, 2), rnd(rng, -2, 2)}, {dir}});
    }
    LipschitzResult sub = lipschitz_select(pr, LipNorm::Sup, 4);
    if (sub.subset_L > 0) {
      // rescale the metric so the size-4 subsets have optimum exactly 1
      for (auto& row : pr.dist)
        for (auto& v : row) v *= sub.subset_L;
    }
    LipschitzResult r = lipschitz_select(pr, LipNorm::Sup, 4);
    ++instances;
    bool ok = r.subset_L <= 1 && std::isfinite(r.L_upper);
    for (size_t i = 0; i < nx && ok; ++i) {
      const Flat& fl = pr.flats[i];
      RatVec off{r.F[i][0] - fl.offset[0], r.F[i][1] - fl.offset[1]};
      ok = off[0] * fl.basis[0][1] - off[1] * fl.basis[0][0] == 0;
      for (size_t j = 0; j < nx && ok; ++j) {
        Rat gap = std::max(rabs(r.F[i][0] - r.F[j][0]), rabs(r.F[i][1] - r.F[j][1]));
        ok = gap <= r.L * pr.dist[i][j];
      }
    }
    if (!ok) ++bad;
    worst = std::max(worst, r.L);
  }
  std::ostringstream s;
  s << instances << " metric spaces, " << bad << " failures, suite max constant " << rat_to_string(worst) << " (~"
    << to_double(worst) << ")";
  return {bad == 0, s.str()};
}

Outcome criterion11() {
  std::mt19937_64 rng(1011);
  long mismatches = 0, evaluated = 0;
  for (int t = 0; t < 50; ++t) {
    int n = 1 + t % 2, m = 2 + (t / 2) % 2;
    auto sp = JetSpace::make(m, n);
    Point zero(static_cast<size_t>(n), Rat(0));
    RatVec coeffs(sp->dim());
    for (auto& c : coeffs) c = rnd(rng, -3, 3);
    Jet P(sp, zero, coeffs);
    auto E = distinct_points(rng, 1 + static_cast<size_t>(rng() % 8), n, -2, 2, 8);
    Frame fr = frame_for(E);
    std::vector<Point> shifted;
    std::vector<Jet> jets;
    for (const auto& x : E) {
      Point u = x;
      for (int i = 0; i < n; ++i) u[static_cast<size_t>(i)] -= fr.origin[static_cast<size_t>(i)];
      shifted.push_back(u);
      jets.emplace_back(sp, u, recenter_jet(P, x).coeffs);
    }
    WhitneyField wf = WhitneyField::make(sp, shifted, jets);
    CZDecomposition dec = cz_decompose(fr.Q0, shifted);
    GluedFunction F = whitney_extend(wf, dec, jets[0]);
    F.origin = fr.origin;
    const Rat side = fr.Q0.side();
    for (int s = 0; s < 1000; ++s) {
      Point x(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i)
        x[static_cast<size_t>(i)] = fr.origin[static_cast<size_t>(i)] + side * make_rat(static_cast<long>(rng() % 1024), 1024);
      ++evaluated;
      if (F.value(x) != eval_jet_derivative(P, MultiIndex(static_cast<size_t>(n), 0), x)) ++mismatches;
    }
  }
  return {mismatches == 0, std::to_string(evaluated) + " exact evaluations, " + std::to_string(mismatches) + " mismatches"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int which = 0;
  app.add_option("--criterion", which, "criterion number; 0 runs all")->check(CLI::Range(0, 11));
  CLI11_PARSE(app, argc, argv);
  const std::vector<std::function<Outcome()>> all{criterion1, criterion2, criterion3, criterion4,
                                                  criterion5, criterion6, criterion7, criterion8,
                                                  criterion9, criterion10, criterion11};
  bool ok = true;
  for (int c = 1; c <= 11; ++c) {
    if (which != 0 && which != c) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = all[static_cast<size_t>(c - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << c << " " << (o.pass ? "PASS" : "FAIL") << ": " << o.detail << " [" << secs << " s]"
              << std::endl;
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
