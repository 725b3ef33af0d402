// SPDX-License-Identifier: MIT
#include <algorithm>

#include "doctest.h"
#include "smoothsel/polyhedra.hpp"
#include "test_util.hpp"

using namespace smoothsel;
using testutil::rand_rat;

namespace {

// Solves a 3x3 system by Cramer's rule; false when singular.
bool solve3(const std::vector<RatVec>& a, const RatVec& b, RatVec& x) {
  auto det = [](const std::vector<RatVec>& m) -> Rat {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  Rat d = det(a);
  if (d == 0) return false;
  x.assign(3, Rat(0));
  for (int k = 0; k < 3; ++k) {
    auto mk = a;
    for (int i = 0; i < 3; ++i) mk[i][k] = b[i];
    x[k] = det(mk) / d;
  }
  return true;
}

// Brute-force vertex enumeration over a bounded polytope in R^3.
struct VertexOracle {
  bool feasible = false;
  Rat best;
};

VertexOracle vertex_oracle(const std::vector<RatVec>& rows, const RatVec& rhs, const RatVec& obj) {
  VertexOracle out;
  size_t r = rows.size();
  for (size_t i = 0; i < r; ++i)
    for (size_t j = i + 1; j < r; ++j)
      for (size_t k = j + 1; k < r; ++k) {
        RatVec x;
        if (!solve3({rows[i], rows[j], rows[k]}, {rhs[i], rhs[j], rhs[k]}, x)) continue;
        bool ok = true;
        for (size_t q = 0; q < r && ok; ++q) {
          Rat s(0);
          for (int t = 0; t < 3; ++t) s += rows[q][t] * x[t];
          ok = s <= rhs[q];
        }
        if (!ok) continue;
        Rat val = obj[0] * x[0] + obj[1] * x[1] + obj[2] * x[2];
        if (!out.feasible || val > out.best) out.best = val;
        out.feasible = true;
      }
  return out;
}

ParamPolyhedron random_poly(std::mt19937_64& rng, size_t nv, size_t nrows, bool nonneg_c) {
  ParamPolyhedron p(nv);
  for (size_t i = 0; i < nv; ++i) p.labels[i] = {0, {static_cast<int>(i)}};
  for (size_t r = 0; r < nrows; ++r) {
    RatVec a(nv);
    for (auto& v : a) v = rand_rat(rng, -3, 3, 1);
    Rat c = nonneg_c ? rand_rat(rng, 0, 2, 2) : rand_rat(rng, -2, 2, 2);
    p.add_row(a, rand_rat(rng, -2, 4, 2), c);
  }
  return p;
}

bool row_sat(const Row& r, const RatVec& v, const Rat& M) {
  Rat s(0);
  for (size_t i = 0; i < v.size(); ++i) s += r.a[i] * v[i];
  return s <= r.b + M * r.c;
}

}  // namespace

TEST_SUITE("polyhedra") {
  TEST_CASE("lp_solve small examples") {
    ParamPolyhedron p(1);
    p.add_row({Rat(1)}, Rat(1), Rat(1));
    p.add_row({Rat(-1)}, Rat(0), Rat(0));
    auto r = lp_solve(p, Rat(0), RatVec{Rat(1)});
    REQUIRE(r.status == LPStatus::Feasible);
    CHECK(*r.objective == 1);
    CHECK(r.witness == RatVec{Rat(1)});

    ParamPolyhedron q(1);
    q.add_row({Rat(1)}, Rat(0));
    q.add_row({Rat(-1)}, Rat(-1));
    CHECK(lp_solve(q, Rat(0), std::nullopt).status == LPStatus::Infeasible);

    ParamPolyhedron u(1);
    u.add_row({Rat(-1)}, Rat(0));
    CHECK(lp_solve(u, Rat(0), RatVec{Rat(1)}).status == LPStatus::Unbounded);
  }

  TEST_CASE("is_empty small examples") {
    ParamPolyhedron full(2);
    CHECK_FALSE(is_empty(full, Rat(0)));
    ParamPolyhedron bad(1);
    bad.add_row({Rat(0)}, Rat(-1));
    CHECK(is_empty(bad, Rat(0)));
  }

  TEST_CASE("lp_solve agrees with vertex enumeration on bounded 3-variable systems") {
    std::mt19937_64 rng(2024);
    int feasible_count = 0;
    for (int trial = 0; trial < 300; ++trial) {
      std::vector<RatVec> rows;
      RatVec rhs;
      for (int i = 0; i < 3; ++i) {
        RatVec e(3, Rat(0)), f(3, Rat(0));
        e[i] = 1;
        f[i] = -1;
        rows.push_back(e);
        rhs.push_back(Rat(10));
        rows.push_back(f);
        rhs.push_back(Rat(10));
      }
      int extra = 1 + trial % 6;
      for (int k = 0; k < extra; ++k) {
        RatVec a(3);
        for (auto& v : a) v = rand_rat(rng, -3, 3, 1);
        rows.push_back(a);
        rhs.push_back(rand_rat(rng, -6, 3, 2));
      }
      RatVec obj(3);
      for (auto& v : obj) v = rand_rat(rng, -2, 2, 1);
      auto oracle = vertex_oracle(rows, rhs, obj);
      auto res = solve_lp_rows(rows, rhs, 3, &obj);
      CHECK((res.status == LPStatus::Feasible) == oracle.feasible);
      if (oracle.feasible && res.status == LPStatus::Feasible) {
        ++feasible_count;
        CHECK(*res.objective == oracle.best);
        for (size_t q = 0; q < rows.size(); ++q) {
          Rat s(0);
          for (int t = 0; t < 3; ++t) s += rows[q][t] * res.witness[t];
          CHECK(s <= rhs[q]);
        }
      }
    }
    CHECK(feasible_count > 50);
  }

  TEST_CASE("lp_solve is deterministic") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
      auto p = random_poly(rng, 3, 5, true);
      auto a = lp_solve(p, Rat(2), std::nullopt);
      auto b = lp_solve(p, Rat(2), std::nullopt);
      CHECK(a.status == b.status);
      CHECK(a.witness == b.witness);
    }
  }

  TEST_CASE("lp_min_M finds the threshold") {
    ParamPolyhedron p(1);
    p.add_row({Rat(1)}, Rat(-2), Rat(1));  // v <= M - 2
    p.add_row({Rat(-1)}, Rat(0));          // v >= 0
    auto r = lp_min_M(p);
    REQUIRE(r.feasible);
    CHECK(r.M == 2);
    CHECK(p.contains(r.witness, r.M));
  }

  TEST_CASE("fm_project small examples") {
    ParamPolyhedron p(2);
    p.add_row({Rat(1), Rat(-1)}, Rat(0));
    p.add_row({Rat(0), Rat(1)}, Rat(1), Rat(1));
    auto q = fm_project(p, {0});
    REQUIRE(q.num_vars == 1);
    REQUIRE(q.rows.size() == 1);
    CHECK(q.rows[0].a == RatVec{Rat(1)});
    CHECK(q.rows[0].b == 1);
    CHECK(q.rows[0].c == 1);

    ParamPolyhedron f(2);
    f.add_row({Rat(1), Rat(1)}, Rat(3));
    CHECK(fm_project(f, {}).rows.empty());
  }

  TEST_CASE("fm_project matches witness existence") {
    std::mt19937_64 rng(77);
    int inside = 0;
    for (int trial = 0; trial < 500; ++trial) {
      size_t nv = 2 + trial % 3;
      auto p = random_poly(rng, nv, 3 + trial % 5, trial % 2 == 0);
      std::vector<size_t> keep{0};
      if (nv > 2) keep.push_back(2);
      auto proj = fm_project(p, keep);
      RatVec vk(keep.size());
      for (auto& v : vk) v = rand_rat(rng, -3, 3, 2);
      Rat M = rand_rat(rng, 0, 3, 2);
      ParamPolyhedron fixed = p;
      for (size_t i = 0; i < keep.size(); ++i) {
        RatVec e(nv, Rat(0));
        e[keep[i]] = 1;
        fixed.add_row(e, vk[i]);
        e[keep[i]] = -1;
        fixed.add_row(e, -vk[i]);
      }
      bool witness = !is_empty(fixed, M);
      bool member = proj.contains(vk, M);
      CHECK(witness == member);
      if (member) ++inside;
      // slicing commutes with projection
      CHECK(is_empty(proj, M) == is_empty(p, M));
    }
    CHECK(inside > 20);
  }

  TEST_CASE("fm_project budget") {
    std::mt19937_64 rng(1);
    auto p = random_poly(rng, 6, 40, true);
    FMConfig cfg;
    cfg.row_cap = 10;
    cfg.prune = false;
    CHECK_THROWS_AS(fm_project(p, {0}, cfg), Error);
  }

  TEST_CASE("prune_redundant") {
    ParamPolyhedron p(1);
    p.add_row({Rat(1)}, Rat(1));
    p.add_row({Rat(1)}, Rat(2));
    auto q = prune_redundant(p, {Rat(0), Rat(1)});
    REQUIRE(q.rows.size() == 1);
    CHECK(q.rows[0].b == 1);

    ParamPolyhedron box(1);
    box.add_row({Rat(1)}, Rat(1));
    box.add_row({Rat(-1)}, Rat(0));
    CHECK(prune_redundant(box, {Rat(0)}).rows.size() == 2);

    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 60; ++trial) {
      auto r = random_poly(rng, 2, 6, true);
      std::vector<Rat> samples{Rat(0), Rat(1), Rat(3)};
      auto pr = prune_redundant(r, samples);
      CHECK(pr.rows.size() <= r.rows.size());
      for (const auto& M : samples) {
        CHECK(is_empty(pr, M) == is_empty(r, M));
        if (is_empty(r, M)) continue;
        // each original row is implied by the pruned system
        for (const auto& row : r.rows) {
          auto mx = lp_solve(pr, M, row.a);
          REQUIRE(mx.status == LPStatus::Feasible);
          CHECK(*mx.objective <= row.b + M * row.c);
        }
      }
    }
  }

  TEST_CASE("intersect") {
    ParamPolyhedron full(1), up(1), down(1);
    up.add_row({Rat(1)}, Rat(1));
    down.add_row({Rat(-1)}, Rat(0));
    auto i1 = intersect({full, up});
    CHECK(i1.rows.size() == up.rows.size());
    auto box = intersect({up, down});
    CHECK(box.contains({Rat(1, 2)}, Rat(0)));
    CHECK_FALSE(box.contains({Rat(2)}, Rat(0)));
    CHECK_FALSE(box.contains({Rat(-1)}, Rat(0)));
    ParamPolyhedron other(1);
    other.labels[0] = {3, {1}};
    CHECK_THROWS(intersect({up, other}));

    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<ParamPolyhedron> fam;
      for (int k = 0; k < 3; ++k) fam.push_back(random_poly(rng, 2, 2, true));
      auto all = intersect(fam);
      RatVec v{rand_rat(rng, -2, 2), rand_rat(rng, -2, 2)};
      Rat M = rand_rat(rng, 0, 2);
      bool conj = true;
      for (const auto& f : fam) conj = conj && f.contains(v, M);
      CHECK(all.contains(v, M) == conj);
    }
  }

  TEST_CASE("minkowski_box_sum") {
    ParamPolyhedron pt(1);
    pt.add_row({Rat(1)}, Rat(0));
    pt.add_row({Rat(-1)}, Rat(0));
    auto s = minkowski_box_sum(pt, {{Rat(0), Rat(1)}});
    CHECK(s.contains({Rat(3)}, Rat(3)));
    CHECK_FALSE(s.contains({Rat(3)}, Rat(2)));
    CHECK(s.contains({Rat(-2)}, Rat(2)));

    ParamPolyhedron box(1);
    box.add_row({Rat(1)}, Rat(1));
    box.add_row({Rat(-1)}, Rat(0));
    auto z = minkowski_box_sum(box, {{Rat(0), Rat(0)}});
    CHECK(z.contains({Rat(1)}, Rat(5)));
    CHECK_FALSE(z.contains({Rat(11, 10)}, Rat(5)));

    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 150; ++trial) {
      auto p = random_poly(rng, 2, 3, true);
      std::vector<BoxRadius> radii{{rand_rat(rng, 0, 1), rand_rat(rng, 0, 1)}, {rand_rat(rng, 0, 1), rand_rat(rng, 0, 1)}};
      auto sum = minkowski_box_sum(p, radii);
      RatVec v{rand_rat(rng, -3, 3), rand_rat(rng, -3, 3)};
      Rat M = rand_rat(rng, 0, 2);
      ParamPolyhedron w = p;
      for (size_t i = 0; i < 2; ++i) {
        RatVec e(2, Rat(0));
        e[i] = 1;
        w.add_row(e, v[i] + radii[i].r, radii[i].s);
        e[i] = -1;
        w.add_row(e, -v[i] + radii[i].r, radii[i].s);
      }
      CHECK(sum.contains(v, M) == !is_empty(w, M));
    }
  }

  TEST_CASE("helly_family_check on intervals") {
    auto interval = [](Rat lo, Rat hi) {
      ParamPolyhedron p(1);
      p.add_row({Rat(1)}, hi);
      p.add_row({Rat(-1)}, -lo);
      return p;
    };
    std::vector<ParamPolyhedron> fam{interval(0, 2), interval(1, 3), interval(2, 4)};
    CHECK(helly_family_check(fam, 1, Rat(0)));
    CHECK_FALSE(is_empty(intersect(fam), Rat(0)));
    CHECK_FALSE(helly_family_check({interval(0, 1), interval(2, 3)}, 1, Rat(0)));

    std::mt19937_64 rng(99);
    int positive = 0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<ParamPolyhedron> f;
      for (int k = 0; k < 4; ++k) {
        Rat a = rand_rat(rng, 0, 4), b = rand_rat(rng, 0, 4);
        f.push_back(interval(std::min(a, b), std::max(a, b)));
      }
      bool h = helly_family_check(f, 1, Rat(0));
      if (h) {
        ++positive;
        CHECK_FALSE(is_empty(intersect(f), Rat(0)));
      }
    }
    CHECK(positive > 0);
  }

  TEST_CASE("monotonicity in M survives the operations") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 40; ++trial) {
      auto p = random_poly(rng, 3, 5, true);
      auto proj = fm_project(p, {0, 1});
      auto sum = minkowski_box_sum(proj, {{Rat(0), Rat(1)}, {Rat(1), Rat(0)}});
      for (const auto* q : {&proj, &sum}) {
        CHECK(q->all_c_nonnegative());
        auto w = lp_solve(*q, Rat(1), std::nullopt);
        if (w.status == LPStatus::Feasible) CHECK(q->contains(w.witness, Rat(2)));
      }
    }
  }
}
