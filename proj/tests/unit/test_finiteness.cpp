// SPDX-License-Identifier: MIT
#include <random>

#include "doctest.h"
#include "smoothsel/finiteness.hpp"
#include "test_util.hpp"

using namespace smoothsel;
using testutil::R;
using testutil::rand_rat;

namespace {

std::vector<Point> line_points(std::initializer_list<const char*> xs) {
  std::vector<Point> out;
  for (const char* x : xs) out.push_back({R(x)});
  return out;
}

ShapeField singleton_values(const JetSpacePtr& sp, const std::vector<Point>& pts, const RatVec& vals) {
  return interval_field(sp, pts, vals, vals);
}

ShapeField random_box_field(std::mt19937_64& rng, const JetSpacePtr& sp, size_t npts) {
  std::vector<Point> pts;
  while (pts.size() < npts) {
    Point p{rand_rat(rng, -2, 2, 4)};
    if (std::find(pts.begin(), pts.end(), p) == pts.end()) pts.push_back(p);
  }
  std::vector<RatVec> c(npts), w(npts);
  for (size_t i = 0; i < npts; ++i)
    for (size_t k = 0; k < sp->dim(); ++k) {
      c[i].push_back(rand_rat(rng, -2, 2));
      w[i].push_back(rand_rat(rng, 0, 1) + Rat(1, 8));
    }
  return box_field(sp, pts, c, w);
}

// m = 2, n = 1 written out by hand: jets are (value, slope).
bool joint_feasible_m2(const ShapeField& f, size_t x, const std::vector<size_t>& S, const RatVec& p, const Rat& M) {
  if (!f.gammas[x].contains(p, M)) return false;
  std::vector<size_t> others;
  for (size_t s : S)
    if (s != x && std::find(others.begin(), others.end(), s) == others.end()) others.push_back(s);
  const size_t w = 2 * others.size();
  std::vector<RatVec> rows;
  RatVec rhs;
  auto add = [&](RatVec a, Rat b) {
    rows.push_back(std::move(a));
    rhs.push_back(std::move(b));
  };
  for (size_t i = 0; i < others.size(); ++i)
    for (const auto& r : f.gammas[others[i]].rows) {
      RatVec a(w, Rat(0));
      a[2 * i] = r.a[0];
      a[2 * i + 1] = r.a[1];
      add(a, r.b + M * r.c);
    }
  // pairs (x, y) and (y, x), plus pairs among the others
  std::vector<long> ids{-1};
  for (size_t i = 0; i < others.size(); ++i) ids.push_back(static_cast<long>(i));
  auto coord = [&](long id) { return id < 0 ? f.points[x][0] : f.points[others[static_cast<size_t>(id)]][0]; };
  for (long a : ids)
    for (long b : ids) {
      if (a == b) continue;
      Rat h = coord(a) - coord(b);
      // value: v_a - v_b - s_b h, slope: s_a - s_b
      for (int comp = 0; comp < 2; ++comp) {
        RatVec row(w, Rat(0));
        Rat constant(0);
        auto put = [&](long id, int c, const Rat& coef) {
          if (id < 0)
            constant += coef * p[static_cast<size_t>(c)];
          else
            row[2 * static_cast<size_t>(id) + static_cast<size_t>(c)] += coef;
        };
        if (comp == 0) {
          put(a, 0, 1);
          put(b, 0, -1);
          put(b, 1, -h);
        } else {
          put(a, 1, 1);
          put(b, 1, -1);
        }
        Rat bound = M * (comp == 0 ? h * h : rabs(h));
        add(row, bound - constant);
        for (auto& v : row) v = -v;
        add(row, bound + constant);
      }
    }
  if (w == 0) return std::all_of(rhs.begin(), rhs.end(), [](const Rat& v) { return v >= 0; });
  return solve_lp_rows(rows, rhs, w, nullptr).status == LPStatus::Feasible;
}

}  // namespace

TEST_SUITE("finiteness") {
  TEST_CASE("seminorm examples") {
    auto sp = JetSpace::make(2, 1);
    auto pts = line_points({"0", "1"});
    WhitneyField one = WhitneyField::make(sp, {pts[0]}, {Jet(sp, pts[0], {R("5"), R("2")})});
    CHECK(whitney_seminorm(one) == 0);
    WhitneyField two = WhitneyField::make(sp, pts, {jet_constant(sp, pts[0], 0), jet_constant(sp, pts[1], 1)});
    CHECK(whitney_seminorm(two) == 1);
    CHECK(seminorm_at_most(two, 1));
    CHECK_FALSE(seminorm_at_most(two, R("99/100")));

    std::mt19937_64 rng(1);
    auto s2 = JetSpace::make(3, 2);
    for (int t = 0; t < 30; ++t) {
      Jet P(s2, {0, 0});
      for (auto& c : P.coeffs) c = rand_rat(rng, -3, 3);
      std::vector<Point> q;
      std::vector<Jet> js;
      for (int i = 0; i < 4; ++i) {
        Point x{rand_rat(rng, -2, 2), rand_rat(rng, -2, 2)};
        if (std::find(q.begin(), q.end(), x) != q.end()) continue;
        q.push_back(x);
        js.push_back(recenter_jet(P, x));
      }
      WhitneyField f = WhitneyField::make(s2, q, js);
      CHECK(whitney_seminorm(f) == 0);
      // homogeneity and subadditivity
      WhitneyField g = f;
      for (auto& j : g.jets)
        for (auto& c : j.coeffs) c += rand_rat(rng, -1, 1);
      WhitneyField g3 = g;
      for (auto& j : g3.jets) j = Rat(-3) * j;
      CHECK(seminorm_at_most(g3, 3 * whitney_seminorm(g)));
      WhitneyField sum = g;
      for (size_t i = 0; i < sum.jets.size(); ++i) sum.jets[i] = g.jets[i] + g3.jets[i];
      CHECK(seminorm_at_most(sum, whitney_seminorm(g) + whitney_seminorm(g3)));
    }
  }

  TEST_CASE("min_whitney_M examples") {
    auto sp = JetSpace::make(2, 1);
    auto f = singleton_values(sp, line_points({"0", "1", "2"}), {0, 1, 0});
    MinWhitney mw = min_whitney_M(f, {0, 1, 2});
    CHECK(mw.M == 1);
    CHECK(seminorm_at_most(mw.field, 1));
    CHECK(mw.field.jets[1].coeffs[0] == 1);
    for (int m : {1, 2, 3}) {
      auto s = JetSpace::make(m, 1);
      auto g = singleton_values(s, line_points({"-1/2", "3"}), {R("7/3"), R("7/3")});
      CHECK(min_whitney_M(g, {0, 1}).M == 0);
    }
    auto bad = interval_field(sp, line_points({"0"}), {1}, {1});
    bad.gammas[0].add_row({1, 0}, 0);
    CHECK_THROWS_AS(min_whitney_M(bad, {0}), Error);
  }

  TEST_CASE("min_whitney_M against a grid search") {
    // m = 1: jets are values and M* = min over choices of the largest slope
    std::mt19937_64 rng(2);
    auto sp = JetSpace::make(1, 1);
    for (int t = 0; t < 40; ++t) {
      auto pts = line_points({"0", "1", "3"});
      RatVec lo, hi;
      for (int i = 0; i < 3; ++i) {
        Rat a = make_rat(static_cast<long>(rng() % 9) - 4, 2);
        lo.push_back(a);
        hi.push_back(a + make_rat(static_cast<long>(rng() % 5), 2));
      }
      auto f = interval_field(sp, pts, lo, hi);
      Rat M = min_whitney_M(f, {0, 1, 2}).M;
      const int steps = 40;
      Rat best = -1;
      std::vector<Rat> grid[3];
      for (int i = 0; i < 3; ++i)
        for (int s = 0; s <= steps; ++s) grid[i].push_back(lo[i] + (hi[i] - lo[i]) * make_rat(s, steps));
      for (const auto& a : grid[0])
        for (const auto& b : grid[1])
          for (const auto& c : grid[2]) {
            Rat v = std::max({Rat(rabs(a - b)), Rat(rabs(b - c) / 2), Rat(rabs(a - c) / 3)});
            if (best < 0 || v < best) best = v;
          }
      CHECK(M <= best);
      CHECK(best - M <= Rat(4, steps));
    }
  }

  TEST_CASE("gamma_x_S examples and oracle") {
    auto s1 = JetSpace::make(1, 1);
    auto two = singleton_values(s1, line_points({"0", "1"}), {0, 2});
    CHECK(is_empty(gamma_x_S(two, 0, {1}), 1));
    CHECK_FALSE(is_empty(gamma_x_S(two, 0, {1}), 2));
    auto g0 = gamma_x_S(two, 0, {});
    CHECK(g0.rows.size() == two.gammas[0].rows.size());

    std::mt19937_64 rng(3);
    auto sp = JetSpace::make(2, 1);
    int in = 0, out = 0;
    for (int t = 0; t < 500; ++t) {
      auto f = random_box_field(rng, sp, 2 + t % 3);
      size_t x = static_cast<size_t>(t) % f.size();
      std::vector<size_t> S;
      for (size_t i = 0; i < f.size(); ++i)
        if (rng() % 2) S.push_back(i);
      Rat M = rand_rat(rng, 0, 2) + Rat(1, 4);
      auto g = gamma_x_S(f, x, S);
      RatVec p{rand_rat(rng, -3, 3, 8), rand_rat(rng, -3, 3, 8)};
      LPResult w = lp_solve(g, M, std::nullopt);
      if (w.status == LPStatus::Feasible && rng() % 2) p = w.witness;
      bool direct = joint_feasible_m2(f, x, S, p, M);
      CHECK(g.contains(p, M) == direct);
      (direct ? in : out)++;
    }
    CHECK(in > 50);
    CHECK(out > 50);
  }

  TEST_CASE("gamma_fp small cases and containment") {
    auto sp = JetSpace::make(2, 1);
    std::mt19937_64 rng(4);
    auto single = random_box_field(rng, sp, 1);
    auto g = gamma_fp(single, 0, 3, 10);
    for (int s = 0; s < 20; ++s) {
      RatVec p{rand_rat(rng, -3, 3), rand_rat(rng, -3, 3)};
      CHECK(g.contains(p, 1) == single.gammas[0].contains(p, 1));
    }
    int checked = 0;
    for (int t = 0; t < 30; ++t) {
      auto f = random_box_field(rng, sp, 3);
      int l = t % 3;
      auto fp = gamma_fp(f, 0, l, 64);
      // l = 0: singletons only
      if (l == 0) {
        auto direct = prune_exact(intersect({f.gammas[0], gamma_x_S(f, 0, {0}), gamma_x_S(f, 0, {1}), gamma_x_S(f, 0, {2})}));
        for (int s = 0; s < 10; ++s) {
          RatVec p{rand_rat(rng, -3, 3), rand_rat(rng, -3, 3)};
          CHECK(fp.contains(p, 1) == direct.contains(p, 1));
        }
      }
      auto ref = refine(f, l);
      MinMResult mm = lp_min_M(fp);
      if (!mm.feasible) continue;
      for (int s = 0; s < 5; ++s) {
        Rat M = mm.M + rand_rat(rng, 0, 1);
        LPResult w = lp_solve(fp, M, RatVec{rand_rat(rng, -2, 2, 1), rand_rat(rng, -2, 2, 1)});
        REQUIRE(w.status == LPStatus::Feasible);
        CHECK(ref.gammas[0].contains(w.witness, M));
        ++checked;
      }
    }
    CHECK(checked > 30);
  }

  TEST_CASE("finiteness functional") {
    auto sp = JetSpace::make(2, 1);
    auto f = singleton_values(sp, line_points({"0", "1", "2"}), {0, 1, 0});
    RatVec want{0, 0, 1, 1};
    for (size_t k = 1; k <= 4; ++k) {
      auto r = finiteness_functional(f, k);
      CHECK(r.feasible);
      CHECK(r.value == want[k - 1]);
    }
    CHECK(finiteness_functional(f, 3).subset == std::vector<size_t>{0, 1, 2});
    CHECK(finiteness_functional(f, 2).subset == std::vector<size_t>{0});

    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
      auto g = random_box_field(rng, sp, 4);
      Rat prev = -1;
      for (size_t k = 1; k <= 5; ++k) {
        auto r = finiteness_functional(g, k);
        REQUIRE(r.feasible);
        CHECK(r.value >= prev);
        prev = r.value;
      }
      CHECK(prev == min_whitney_M(g, {0, 1, 2, 3}).M);
    }

    auto clash = interval_field(sp, line_points({"0", "1"}), {0, 0}, {1, 1});
    clash.gammas[1].add_row({-1, 0}, -2);
    auto r = finiteness_functional(clash, 2);
    CHECK_FALSE(r.feasible);
    CHECK(r.subset == std::vector<size_t>{1});
  }

  TEST_CASE("clustering") {
    auto c = cluster(line_points({"0", "1"}));
    CHECK(c.parts == std::vector<std::vector<size_t>>{{0}, {1}});
    CHECK(c.c == 1);
    auto c2 = cluster(line_points({"0", "0.001", "1"}));
    CHECK(c2.parts == std::vector<std::vector<size_t>>{{0, 1}, {2}});
    CHECK_THROWS_AS(cluster(line_points({"0"})), Error);

    std::mt19937_64 rng(6);
    for (int t = 0; t < 100; ++t) {
      std::vector<Point> S;
      size_t n = 2 + rng() % 7;
      while (S.size() < n) {
        Point p{rand_rat(rng, -5, 5), rand_rat(rng, -5, 5)};
        if (std::find(S.begin(), S.end(), p) == S.end()) S.push_back(p);
      }
      auto cl = cluster(S);
      Rat diam2(0);
      for (const auto& a : S)
        for (const auto& b : S) diam2 = std::max(diam2, dist2(a, b));
      size_t total = 0;
      for (const auto& part : cl.parts) {
        CHECK(!part.empty());
        CHECK(part.size() < S.size());
        total += part.size();
      }
      CHECK(total == S.size());
      for (size_t i = 0; i < cl.parts.size(); ++i)
        for (size_t j = i + 1; j < cl.parts.size(); ++j)
          for (size_t a : cl.parts[i])
            for (size_t b : cl.parts[j]) CHECK(dist2(S[a], S[b]) >= cl.c * cl.c * diam2);
    }
  }

  TEST_CASE("field from a refined jet") {
    auto sp = JetSpace::make(2, 1);
    auto pts = line_points({"0", "10"});
    auto f = box_field(sp, pts, {{0, 0}, {1, 0}}, {{1, 1}, {1, 1}});
    auto r1 = first_refinement(f);
    Jet P0(sp, pts[0], lp_solve(r1.gammas[0], 1, std::nullopt).witness);
    auto solo = field_from_refined_jet(f, 0, P0, 1, 1, {0});
    CHECK(solo.field.jets.size() == 1);
    CHECK(solo.field.jets[0] == P0);

    auto res = field_from_refined_jet(f, 0, P0, 1, 2, {0, 1});
    CHECK(res.field.jets[0] == P0);
    CHECK(seminorm_at_most(res.field, res.C_star));
    for (size_t i = 0; i < 2; ++i) CHECK(f.gammas[i].contains(res.field.jets[i].coeffs, res.C_star));

    std::mt19937_64 rng(7);
    int done = 0;
    for (int t = 0; t < 20; ++t) {
      auto g = random_box_field(rng, sp, 3);
      auto r3 = refine(g, 3);
      MinMResult mm = lp_min_M(r3.gammas[1]);
      if (!mm.feasible) continue;
      Rat M0 = std::max(Rat(mm.M), Rat(1, 8));
      Jet P(sp, g.points[1], mm.witness);
      if (!r3.gammas[1].contains(P.coeffs, M0)) P = Jet(sp, g.points[1], lp_solve(r3.gammas[1], M0, std::nullopt).witness);
      auto out = field_from_refined_jet(g, 1, P, M0, 3, {0, 1, 2});
      CHECK(out.field.jets[1] == P);
      CHECK(seminorm_at_most(out.field, out.C_star * M0));
      for (size_t i = 0; i < 3; ++i) CHECK(g.gammas[i].contains(out.field.jets[i].coeffs, out.C_star * M0));
      ++done;
    }
    CHECK(done > 5);
    CHECK_THROWS_AS(field_from_refined_jet(f, 0, P0, 1, 1, {0, 1}), Error);
  }

  TEST_CASE("Lipschitz selection") {
    RatMatrix d{{0, 1, 2}, {1, 0, 1}, {2, 1, 0}};
    MetricSelectionProblem same{d, {}};
    for (int i = 0; i < 3; ++i) same.flats.push_back({{R("1/2"), R("3")}, {}});
    auto r = lipschitz_select(same, LipNorm::Sup, 2);
    CHECK(r.L == 0);
    CHECK(r.F[2] == RatVec{R("1/2"), R("3")});

    for (const char* h : {"1/3", "2", "7/5"}) {
      MetricSelectionProblem par{{{0, 1}, {1, 0}}, {{{0, 0}, {{1, 0}}}, {{0, R(h)}, {{1, 0}}}}};
      auto p = lipschitz_select(par, LipNorm::Sup, 2);
      CHECK(p.L == R(h));
      auto e = lipschitz_select(par, LipNorm::Euclidean, 2);
      CHECK(e.L <= R(h));
      CHECK(e.L_upper >= to_double(R(h)) - 1e-12);
      CHECK(e.L_upper <= to_double(R(h)) * 1.01);
    }
    RatMatrix bad{{0, 1, 5}, {1, 0, 1}, {5, 1, 0}};
    CHECK_THROWS_AS(check_metric(bad), Error);

    // lines through random points, d = 1 in the plane
    std::mt19937_64 rng(8);
    for (int t = 0; t < 10; ++t) {
      size_t n = 5;
      RatMatrix dist(n, RatVec(n, Rat(0)));
      std::vector<Rat> pos;
      for (size_t i = 0; i < n; ++i) pos.push_back(Rat(static_cast<long>(i)) + make_rat(static_cast<long>(rng() % 5), 10));
      for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) dist[i][j] = rabs(pos[i] - pos[j]);
      MetricSelectionProblem pr{dist, {}};
      for (size_t i = 0; i < n; ++i)
        pr.flats.push_back({{rand_rat(rng, -2, 2), rand_rat(rng, -2, 2)}, {{rand_rat(rng, -2, 2, 1), 1}}});
      auto full = lipschitz_select(pr, LipNorm::Sup, 4);
      CHECK(full.subset_L <= full.L);
      auto all = lipschitz_select(pr, LipNorm::Sup, 5);
      CHECK(all.subset_L == full.L);
    }
  }
}
