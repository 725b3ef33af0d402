// SPDX-License-Identifier: MIT
#include "smoothsel/io.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace smoothsel {

namespace {

const Json& need(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw Error("parse", where + ": missing \"" + key + "\"");
  return j.at(key);
}

int need_int(const Json& j, const char* key, const std::string& where) {
  const Json& v = need(j, key, where);
  if (!v.is_number_integer()) throw Error("parse", where + ": \"" + key + "\" must be an integer");
  return v.get<int>();
}

RatVec json_ratvec(const Json& j, size_t len, const std::string& where) {
  if (!j.is_array() || j.size() != len)
    throw Error("parse", where + ": expected an array of " + std::to_string(len) + " rationals");
  RatVec out;
  for (const auto& v : j) out.push_back(json_rat(v));
  return out;
}

Json ratvec_json(const RatVec& v) {
  Json a = Json::array();
  for (const auto& r : v) a.push_back(rat_json(r));
  return a;
}

Json index_json(const std::vector<size_t>& v) {
  Json a = Json::array();
  for (size_t i : v) a.push_back(i);
  return a;
}

std::vector<size_t> json_index(const Json& j) {
  std::vector<size_t> out;
  if (!j.is_array()) throw Error("parse", "index list must be an array");
  for (const auto& v : j) out.push_back(v.get<size_t>());
  return out;
}

// Rows n with B n = 0, B given by its rows.
std::vector<RatVec> null_space(std::vector<RatVec> B, size_t cols) {
  std::vector<size_t> pivots;
  size_t r = 0;
  for (size_t c = 0; c < cols && r < B.size(); ++c) {
    size_t p = r;
    while (p < B.size() && sgn(B[p][c]) == 0) ++p;
    if (p == B.size()) continue;
    std::swap(B[p], B[r]);
    Rat inv = Rat(1) / B[r][c];
    for (auto& x : B[r]) x *= inv;
    for (size_t i = 0; i < B.size(); ++i) {
      if (i == r || sgn(B[i][c]) == 0) continue;
      Rat f = B[i][c];
      for (size_t k = 0; k < cols; ++k) B[i][k] -= f * B[r][k];
    }
    pivots.push_back(c);
    ++r;
  }
  std::vector<RatVec> out;
  for (size_t f = 0; f < cols; ++f) {
    if (std::find(pivots.begin(), pivots.end(), f) != pivots.end()) continue;
    RatVec v(cols, Rat(0));
    v[f] = 1;
    for (size_t i = 0; i < pivots.size(); ++i) v[pivots[i]] = -B[i][f];
    out.push_back(std::move(v));
  }
  return out;
}

ParamPolyhedron parse_constraint(const Json& K, const JetSpace& sp, int D, int point, const std::string& where) {
  const size_t dim = sp.dim();
  const size_t width = dim * static_cast<size_t>(D);
  ParamPolyhedron g(width);
  auto value_var = [&](int comp) { return static_cast<size_t>(comp) * dim; };
  auto bound_rows = [&](const Json& v, bool upper) {
    if (v.is_null()) return;
    RatVec vals = D == 1 && !v.is_array() ? RatVec{json_rat(v)} : json_ratvec(v, static_cast<size_t>(D), where);
    for (int c = 0; c < D; ++c) {
      RatVec a(width, Rat(0));
      a[value_var(c)] = upper ? 1 : -1;
      g.add_row(a, upper ? vals[static_cast<size_t>(c)] : Rat(-vals[static_cast<size_t>(c)]));
    }
  };
  const std::string type = need(K, "type", where).get<std::string>();
  if (type == "interval") {
    if (K.contains("lo")) bound_rows(K.at("lo"), false);
    if (K.contains("hi")) bound_rows(K.at("hi"), true);
  } else if (type == "singleton") {
    bound_rows(need(K, "value", where), false);
    bound_rows(K.at("value"), true);
  } else if (type == "hrep") {
    for (const auto& row : need(K, "rows", where)) {
      RatVec a = json_ratvec(need(row, "a", where), width, where + " row");
      Rat c = row.contains("c") ? json_rat(row.at("c")) : Rat(0);
      g.add_row(std::move(a), json_rat(need(row, "b", where)), c);
    }
  } else if (type == "affine") {
    RatVec off = json_ratvec(need(K, "offset", where), static_cast<size_t>(D), where + " offset");
    std::vector<RatVec> basis;
    for (const auto& b : need(K, "basis", where)) basis.push_back(json_ratvec(b, static_cast<size_t>(D), where + " basis"));
    for (const auto& nv : null_space(basis, static_cast<size_t>(D))) {
      RatVec a(width, Rat(0));
      Rat rhs(0);
      for (int c = 0; c < D; ++c) {
        a[value_var(c)] = nv[static_cast<size_t>(c)];
        rhs += nv[static_cast<size_t>(c)] * off[static_cast<size_t>(c)];
      }
      RatVec neg = a;
      for (auto& x : neg) x = -x;
      g.add_row(a, rhs);
      g.add_row(neg, Rat(-rhs));
    }
  } else if (type != "none") {
    throw Error("parse", where + ": unknown constraint type \"" + type + "\"");
  }
  for (auto& l : g.labels) l.point = point;
  return g;
}

Point sub(const Point& a, const Point& b) {
  Point out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s = buf;
  if (s == "-0.000000") s = "0.000000";
  return s;
}

}  // namespace

Json rat_json(const Rat& r) { return rat_to_string(r); }

Rat json_rat(const Json& j) {
  if (j.is_string()) return parse_rat(j.get<std::string>());
  if (j.is_number_integer()) return Rat(mpz_class(j.dump()));
  throw Error("parse", "rational must be a \"p/q\" string or an integer, got " + j.dump());
}

Json point_json(const Point& p) { return ratvec_json(p); }

Point json_point(const Json& j) {
  if (!j.is_array()) throw Error("parse", "point must be an array");
  Point p;
  for (const auto& v : j) p.push_back(json_rat(v));
  return p;
}

ProblemDocument parse_problem(const Json& doc) {
  const std::string where = "problem";
  if (!doc.is_object()) throw Error("parse", "problem document must be an object");
  int m = need_int(doc, "m", where), n = need_int(doc, "n", where);
  if (m < 1 || n < 1) throw Error("parse", "problem: m and n must be positive");
  int D = doc.contains("target_dim") ? need_int(doc, "target_dim", where) : 1;
  if (D < 1) throw Error("parse", "problem: target_dim must be positive");
  const Json& pts = need(doc, "points", where);
  if (!pts.is_array() || pts.empty()) throw Error("parse", "problem: \"points\" must be a nonempty array");
  ProblemDocument out;
  out.problem.space = JetSpace::make(m, n);
  out.problem.target_dim = D;
  for (size_t i = 0; i < pts.size(); ++i) {
    std::string w = "points[" + std::to_string(i) + "]";
    Point x = json_point(need(pts[i], "x", w));
    if (x.size() != static_cast<size_t>(n)) throw Error("parse", w + ": x must have n coordinates");
    for (const auto& y : out.problem.E)
      if (y == x) throw Error("parse", w + ": duplicate point");
    out.problem.E.push_back(x);
    Json K = pts[i].contains("K") ? pts[i].at("K") : Json{{"type", "none"}};
    out.problem.constraints.push_back(parse_constraint(K, *out.problem.space, D, static_cast<int>(i), w + ".K"));
  }
  out.options = doc.contains("options") ? doc.at("options") : Json::object();
  return out;
}

Json problem_json(const SelectionProblem& p, const Json& options) {
  Json doc;
  doc["m"] = p.space->m;
  doc["n"] = p.space->n;
  if (p.target_dim != 1) doc["target_dim"] = p.target_dim;
  Json pts = Json::array();
  for (size_t i = 0; i < p.E.size(); ++i) {
    Json rows = Json::array();
    for (const auto& r : p.constraints[i].rows) rows.push_back({{"a", ratvec_json(r.a)}, {"b", rat_json(r.b)}, {"c", rat_json(r.c)}});
    pts.push_back({{"x", point_json(p.E[i])}, {"K", {{"type", "hrep"}, {"rows", rows}}}});
  }
  doc["points"] = pts;
  if (!options.empty()) doc["options"] = options;
  return doc;
}

Json cube_json(const DyadicCube& q) {
  Json c = Json::array();
  for (long v : q.corner) c.push_back(v);
  return {{"level", q.level}, {"corner", c}};
}

DyadicCube json_cube(const Json& j) {
  DyadicCube q;
  q.level = need_int(j, "level", "cube");
  for (const auto& v : need(j, "corner", "cube")) q.corner.push_back(v.get<long>());
  return q;
}

Json jet_json(const Jet& p) { return {{"base", point_json(p.base)}, {"coeffs", ratvec_json(p.coeffs)}}; }

Jet json_jet(const JetSpacePtr& space, const Json& j) {
  Point b = json_point(need(j, "base", "jet"));
  if (b.size() != static_cast<size_t>(space->n)) throw Error("parse", "jet: base has the wrong dimension");
  return Jet(space, b, json_ratvec(need(j, "coeffs", "jet"), space->dim(), "jet"));
}

Json field_json(const WhitneyField& f) {
  Json pts = Json::array(), jets = Json::array();
  for (size_t i = 0; i < f.points.size(); ++i) {
    pts.push_back(point_json(f.points[i]));
    jets.push_back(ratvec_json(f.jets[i].coeffs));
  }
  return {{"points", pts}, {"jets", jets}};
}

WhitneyField json_field(const JetSpacePtr& space, const Json& j) {
  std::vector<Point> pts;
  std::vector<Jet> jets;
  const Json& P = need(j, "points", "field");
  const Json& J = need(j, "jets", "field");
  if (P.size() != J.size()) throw Error("parse", "field: points and jets differ in length");
  for (size_t i = 0; i < P.size(); ++i) {
    pts.push_back(json_point(P[i]));
    jets.emplace_back(space, pts.back(), json_ratvec(J[i], space->dim(), "field jet"));
  }
  return WhitneyField::make(space, pts, jets);
}

Json glued_json(const GluedFunction& F) {
  const CZDecomposition& dec = F.decomposition();
  Json leaves = Json::array();
  for (size_t i = 0; i < dec.leaves.size(); ++i) {
    Json leaf = cube_json(dec.leaves[i]);
    if (F.locals[i].child) leaf["child"] = glued_json(*F.locals[i].child);
    else leaf["jet"] = jet_json(F.locals[i].poly);
    leaves.push_back(std::move(leaf));
  }
  return {{"m", F.space->m},
          {"n", F.space->n},
          {"origin", point_json(F.origin)},
          {"root", cube_json(dec.root)},
          {"predicate", dec.predicate_tag},
          {"bump", "smoothstep"},
          {"margin", rat_json(bump_margin())},
          {"leaves", leaves}};
}

GluedFunction json_glued(const JetSpacePtr& space, const Json& j) {
  if (need_int(j, "m", "function") != space->m || need_int(j, "n", "function") != space->n)
    throw Error("parse", "function: m or n differs from the problem");
  if (need(j, "bump", "function") != "smoothstep" || json_rat(need(j, "margin", "function")) != bump_margin())
    throw Error("parse", "function: unsupported bump parameters");
  CZDecomposition dec;
  dec.root = json_cube(need(j, "root", "function"));
  dec.predicate_tag = j.value("predicate", "");
  GluedFunction F;
  F.space = space;
  F.origin = json_point(need(j, "origin", "function"));
  for (const auto& leaf : need(j, "leaves", "function")) {
    dec.leaves.push_back(json_cube(leaf));
    if (dec.leaves.back().corner.size() != static_cast<size_t>(space->n)) throw Error("parse", "function: bad leaf corner");
    LocalPiece piece;
    if (leaf.contains("child")) piece.child = std::make_shared<GluedFunction>(json_glued(space, leaf.at("child")));
    else piece.poly = json_jet(space, need(leaf, "jet", "leaf"));
    F.locals.push_back(std::move(piece));
  }
  F.pou = std::make_shared<PartitionOfUnity>(dec, space->m);
  return F;
}

SelectionProblem solver_problem(const SelectionProblem& p) {
  if (p.target_dim == 1) return p;
  LiftedProblem l = lift_problem(p);
  return {l.field.space, l.field.points, l.field.gammas, 1};
}

Json solve_document(const Json& problem_doc, const SolveOptions& opts) {
  ProblemDocument pd = parse_problem(problem_doc);
  SelectionProblem sp = solver_problem(pd.problem);
  Json out;
  out["format"] = "smoothsel-result/1";
  out["status"] = "error";
  out["method"] = opts.method;
  out["k"] = opts.k;
  out["grid_density"] = opts.grid_density;
  out["lifted"] = pd.problem.target_dim != 1;
  out["problem"] = problem_doc;

  SelectionResult r;
  Json stats;
  Rat constraint_M;
  if (opts.method == "select") {
    SelectConfig cfg;
    cfg.grid_density = opts.grid_density;
    r = select(sp, opts.k, cfg);
    constraint_M = r.M_full;
  } else if (opts.method == "recursive") {
    RecursiveConfig cfg;
    cfg.grid_density = opts.grid_density;
    RecursiveResult rr = recursive_select(sp, cfg);
    r = std::move(rr.result);
    Json types = Json::object();
    for (const auto& [t, c] : rr.stats.leaf_types) types[std::to_string(t)] = c;
    stats = {{"cz_levels", rr.stats.cz_levels},
             {"max_depth", rr.stats.max_depth},
             {"leaf_types", types},
             {"refine_capped", rr.stats.refine_capped}};
    if (r.feasible) {
      for (const auto& pc : r.verification.points)
        if (pc.min_M) constraint_M = std::max(constraint_M, *pc.min_M);
    }
  } else {
    throw Error("domain", "unknown method \"" + opts.method + "\"");
  }

  out["status"] = r.feasible ? "solved" : "infeasible";
  out["M0"] = r.feasible ? rat_json(r.M0) : Json();
  out["M_full"] = r.feasible && r.field ? rat_json(r.M_full) : Json();
  out["ratio"] = r.ratio ? rat_json(*r.ratio) : Json();
  out["argmax_subset"] = index_json(r.argmax_subset);
  out["infeasible_subset"] = index_json(r.infeasible_subset);
  out["frame"] = {{"origin", point_json(r.frame.origin)}, {"Q0", cube_json(r.frame.Q0)}};
  if (r.feasible) {
    out["constraint_M"] = rat_json(constraint_M);
    if (r.field) out["field"] = field_json(*r.field);
    out["function"] = glued_json(*r.F);
    Json pts = Json::array();
    for (const auto& pc : r.verification.points)
      pts.push_back({{"point", pc.point}, {"ok", pc.ok}, {"min_M", pc.min_M ? rat_json(*pc.min_M) : Json()}});
    Json sup = Json::array();
    for (const auto& [beta, v] : r.verification.derivative_sup) sup.push_back({{"beta", beta}, {"sup_approx", v}});
    out["verification"] = {{"constraints_ok", r.verification.constraints_ok},
                           {"points", pts},
                           {"derivative_sup_approx", sup},
                           {"failures", r.verification.failures}};
  }
  if (!stats.is_null()) out["stats"] = stats;
  out["notes"] = r.notes;
  return out;
}

VerifyOutcome verify_document(const Json& result) {
  VerifyOutcome vo;
  auto fail = [&](const std::string& name, const std::string& why) {
    vo.ok = false;
    vo.failure = name + ": " + why;
    return vo;
  };
  ProblemDocument pd = parse_problem(need(result, "problem", "result"));
  SelectionProblem sp = solver_problem(pd.problem);
  ShapeField field = sp.field();
  const std::string status = need(result, "status", "result").get<std::string>();
  const std::string method = result.value("method", "select");
  const size_t k = need(result, "k", "result").get<size_t>();
  std::vector<size_t> all(field.size());
  std::iota(all.begin(), all.end(), 0);

  if (status == "infeasible") {
    std::vector<size_t> S = json_index(need(result, "infeasible_subset", "result"));
    if (S.empty()) return fail("infeasible_subset", "empty subset");
    for (size_t i : S)
      if (i >= field.size()) return fail("infeasible_subset", "index out of range");
    auto feasible = [&](const std::vector<size_t>& T) {
      try {
        min_whitney_M(field, T);
        return true;
      } catch (const Error& e) {
        if (e.tag() != "infeasible") throw;
        return false;
      }
    };
    if (feasible(S)) return fail("infeasible_subset", "the reported subset admits a field");
    for (size_t drop = 0; drop < S.size() && S.size() > 1; ++drop) {
      std::vector<size_t> T;
      for (size_t i = 0; i < S.size(); ++i)
        if (i != drop) T.push_back(S[i]);
      if (!feasible(T)) return fail("infeasible_subset", "not minimal: point " + std::to_string(S[drop]) + " can be dropped");
    }
    vo.passed.push_back("infeasible_subset");
    return vo;
  }
  if (status != "solved") return fail("status", "unknown status \"" + status + "\"");

  const Rat M = json_rat(need(result, "constraint_M", "result"));
  GluedFunction F = json_glued(field.space, need(result, "function", "result"));
  for (size_t z = 0; z < field.size(); ++z) {
    Jet j = F.jet_truncated(field.points[z]);
    if (!field.gammas[z].contains(j.coeffs, M))
      return fail("function_constraints", "point " + std::to_string(z) + ": J_z(F) is outside gamma(z, " + rat_to_string(M) + ")");
  }
  vo.passed.push_back("function_constraints");

  CZReport geo = check_cz_geometry(F.decomposition());
  if (!geo.ok()) return fail("decomposition_geometry", geo.violations.front());
  vo.passed.push_back("decomposition_geometry");

  if (method == "recursive") {
    vo.passed.push_back("recursive results carry no field certificate; only F was checked");
    return vo;
  }

  const Rat M_full = json_rat(need(result, "M_full", "result"));
  if (M != M_full) return fail("constraint_M", "differs from M_full");
  WhitneyField wf = json_field(field.space, need(result, "field", "result"));
  if (wf.points != field.points) return fail("field_points", "field points differ from the problem points");
  for (size_t z = 0; z < wf.points.size(); ++z)
    if (!field.gammas[z].contains(wf.jets[z].coeffs, M_full))
      return fail("field_constraints", "point " + std::to_string(z) + ": field jet is outside gamma(z, M_full)");
  vo.passed.push_back("field_constraints");
  if (!seminorm_at_most(wf, M_full)) return fail("field_seminorm", "Whitney seminorm exceeds M_full");
  vo.passed.push_back("field_seminorm");

  Rat best = min_whitney_M(field, all).M;
  if (best != M_full) return fail("M_full_optimal", "recomputed optimum is " + rat_to_string(best));
  vo.passed.push_back("M_full_optimal");

  FunctionalResult fr = finiteness_functional(field, k);
  if (!fr.feasible) return fail("M0", "some subset of size <= k is infeasible");
  const Rat M0 = json_rat(need(result, "M0", "result"));
  if (fr.value != M0) return fail("M0", "recomputed value is " + rat_to_string(fr.value));
  vo.passed.push_back("M0");

  const Json& rj = need(result, "ratio", "result");
  if (M0 > 0) {
    if (rj.is_null() || json_rat(rj) != M_full / M0) return fail("ratio", "ratio is not M_full / M0");
  } else if (M_full == 0) {
    if (rj.is_null() || json_rat(rj) != 1) return fail("ratio", "ratio must be 1 when M0 = M_full = 0");
  } else if (!rj.is_null()) {
    return fail("ratio", "ratio must be null when M0 = 0 < M_full");
  }
  vo.passed.push_back("ratio");

  Frame fr_expected = frame_for(field.points);
  if (F.origin != fr_expected.origin || !(F.decomposition().root == fr_expected.Q0))
    return fail("construction", "origin or root cube differs from the canonical frame");
  WhitneyField shifted = wf;
  for (size_t i = 0; i < shifted.points.size(); ++i) {
    shifted.points[i] = sub(shifted.points[i], F.origin);
    shifted.jets[i].base = shifted.points[i];
  }
  CZDecomposition dec = cz_decompose(fr_expected.Q0, shifted.points);
  if (dec.leaves != F.decomposition().leaves) return fail("construction", "leaves differ from the decomposition of E");
  GluedFunction G = whitney_extend(shifted, dec, shifted.jets[0]);
  for (size_t i = 0; i < G.locals.size(); ++i)
    if (F.locals[i].child || !(F.locals[i].poly == G.locals[i].poly))
      return fail("construction", "leaf " + std::to_string(i) + " jet differs from the extension of the field");
  vo.passed.push_back("construction");
  return vo;
}

Json finiteness_table(const Json& problem_doc, size_t k_min, size_t k_max) {
  if (k_min < 1 || k_max < k_min) throw Error("domain", "need 1 <= k-min <= k-max");
  ProblemDocument pd = parse_problem(problem_doc);
  ShapeField field = solver_problem(pd.problem).field();
  Json rows = Json::array();
  std::vector<std::optional<Rat>> vals;
  Json out;
  for (size_t k = k_min; k <= k_max; ++k) {
    FunctionalResult fr;
    try {
      fr = finiteness_functional(field, k);
    } catch (const Error& e) {
      if (e.tag() != "budget") throw;
      out["warning"] = std::string("stopped at k = ") + std::to_string(k) + ": " + e.what();
      break;
    }
    rows.push_back({{"k", k},
                    {"feasible", fr.feasible},
                    {"value", fr.feasible ? rat_json(fr.value) : Json()},
                    {"subset", index_json(fr.subset)}});
    vals.push_back(fr.feasible ? std::optional<Rat>(fr.value) : std::nullopt);
  }
  Json stab;
  if (!vals.empty()) {
    size_t s = vals.size() - 1;
    while (s > 0 && vals[s - 1] == vals.back()) --s;
    stab = k_min + s;
  }
  out["points"] = field.size();
  out["rows"] = rows;
  out["stabilized_at"] = stab;
  // for k >= #E the functional equals the full optimum, so the tail is constant from there
  out["tail_certified"] = !vals.empty() && k_min + vals.size() - 1 >= field.size();
  return out;
}

Json refine_document(const Json& problem_doc, int l) {
  if (l < 0) throw Error("domain", "l must be nonnegative");
  ProblemDocument pd = parse_problem(problem_doc);
  if (pd.problem.target_dim != 1) throw Error("domain", "refine takes scalar problems");
  ShapeField r = refine(pd.problem.field(), l);
  SelectionProblem out = pd.problem;
  for (size_t i = 0; i < r.gammas.size(); ++i) {
    ParamPolyhedron g = canonicalize(prune_exact(canonicalize(r.gammas[i])));
    out.constraints[i] = g;
  }
  return problem_json(out, pd.options);
}

std::string cz_svg(const CZDecomposition& dec, const std::vector<Point>& E_frame) {
  const size_t n = dec.root.corner.size();
  if (n < 1 || n > 2) throw Error("domain", "czviz supports n = 1 or n = 2");
  RatVec lo(n), hi(n);
  {
    RatBox r = dilate(dec.root, Rat(65, 64));
    lo = r.lo;
    hi = r.hi;
  }
  for (const auto& q : dec.leaves) {
    RatBox b = dilate(q, Rat(1));
    for (size_t i = 0; i < n; ++i) {
      lo[i] = std::min(lo[i], b.lo[i]);
      hi[i] = std::max(hi[i], b.hi[i]);
    }
  }
  const double W = 800, pad = 20;
  const double span = to_double(hi[0] - lo[0]);
  auto X = [&](const Rat& v) { return pad + W * to_double(v - lo[0]) / span; };
  int depth = 0;
  for (const auto& q : dec.leaves) depth = std::max(depth, dec.root.level - q.level);
  const double band = 24;
  const double H = n == 2 ? W * to_double(hi[1] - lo[1]) / span : band * (depth + 2);
  auto Y = [&](const Rat& v) { return pad + H - W * to_double(v - lo[1]) / span; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt6(W + 2 * pad) << "\" height=\"" << fmt6(H + 2 * pad)
    << "\">\n";
  s << "<g id=\"leaves\" fill=\"none\" stroke=\"#336\" stroke-width=\"0.5\">\n";
  for (const auto& q : dec.leaves) {
    RatBox b = dilate(q, Rat(1));
    double x0 = X(b.lo[0]), x1 = X(b.hi[0]), y0, y1;
    if (n == 2) {
      y0 = Y(b.hi[1]);
      y1 = Y(b.lo[1]);
    } else {
      y0 = pad + band * (dec.root.level - q.level);
      y1 = y0 + band;
    }
    s << "<rect x=\"" << fmt6(x0) << "\" y=\"" << fmt6(y0) << "\" width=\"" << fmt6(x1 - x0) << "\" height=\""
      << fmt6(y1 - y0) << "\" data-level=\"" << q.level << "\"/>\n";
  }
  s << "</g>\n";
  {
    RatBox r = dilate(dec.root, Rat(1));
    double x0 = X(r.lo[0]), x1 = X(r.hi[0]);
    double y0 = n == 2 ? Y(r.hi[1]) : pad, y1 = n == 2 ? Y(r.lo[1]) : pad + H;
    s << "<rect id=\"Q0\" x=\"" << fmt6(x0) << "\" y=\"" << fmt6(y0) << "\" width=\"" << fmt6(x1 - x0) << "\" height=\""
      << fmt6(y1 - y0) << "\" fill=\"none\" stroke=\"#c00\" stroke-dasharray=\"4 2\"/>\n";
  }
  s << "<g id=\"points\" fill=\"#000\">\n";
  for (const auto& x : E_frame) {
    double cx = X(x[0]), cy = n == 2 ? Y(x[1]) : pad + H - band / 2;
    s << "<circle cx=\"" << fmt6(cx) << "\" cy=\"" << fmt6(cy) << "\" r=\"3.000000\"/>\n";
  }
  s << "</g>\n</svg>\n";
  return s.str();
}

}  // namespace smoothsel
