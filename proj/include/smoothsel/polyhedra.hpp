// SPDX-License-Identifier: MIT
#pragma once

#include <optional>
#include <vector>

#include "smoothsel/jets.hpp"

namespace smoothsel {

/// a . v <= b + M * c
struct Row {
  RatVec a;
  Rat b;
  Rat c;
};

struct VarLabel {
  int point = 0;
  MultiIndex alpha;
  bool operator==(const VarLabel& o) const { return point == o.point && alpha == o.alpha; }
};

struct ParamPolyhedron {
  size_t num_vars = 0;
  std::vector<Row> rows;
  std::vector<VarLabel> labels;

  ParamPolyhedron() = default;
  explicit ParamPolyhedron(size_t nv) : num_vars(nv), labels(nv) {}

  void add_row(RatVec a, Rat b, Rat c = Rat(0));
  bool contains(const RatVec& v, const Rat& M) const;
  bool all_c_nonnegative() const;
};

/// Variables of a jet space, labelled with a point tag.
ParamPolyhedron jet_polyhedron(const JetSpace& space, int point_tag);

enum class LPStatus { Feasible, Infeasible, Unbounded };

struct LPResult {
  LPStatus status = LPStatus::Infeasible;
  RatVec witness;
  std::optional<Rat> objective;
};

/// maximize obj . x subject to rows[i] . x <= rhs[i], x free. obj may be null.
LPResult solve_lp_rows(const std::vector<RatVec>& rows, const RatVec& rhs, size_t nvars, const RatVec* obj);

LPResult lp_solve(const ParamPolyhedron& poly, const Rat& M, const std::optional<RatVec>& objective);
bool is_empty(const ParamPolyhedron& poly, const Rat& M);

/// Smallest M >= 0 with a nonempty slice, plus a witness at that M.
struct MinMResult {
  bool feasible = false;
  Rat M;
  RatVec witness;
};
MinMResult lp_min_M(const ParamPolyhedron& poly);

struct FMConfig {
  size_t row_cap = 20000;
  bool prune = true;
};

ParamPolyhedron fm_project(const ParamPolyhedron& poly, const std::vector<size_t>& keep, const FMConfig& cfg = {});

/// Removes rows implied by the others at every sampled M.
ParamPolyhedron prune_redundant(const ParamPolyhedron& poly, const std::vector<Rat>& M_samples);
/// Removes rows implied by the others for all M >= 0 simultaneously.
ParamPolyhedron prune_exact(const ParamPolyhedron& poly);
/// Scales rows to a canonical form, drops duplicates and trivially true rows, sorts.
ParamPolyhedron canonicalize(const ParamPolyhedron& poly);

ParamPolyhedron intersect(const std::vector<ParamPolyhedron>& polys);

struct BoxRadius {
  Rat r;
  Rat s;
};
/// poly + {|v_i| <= r_i + M s_i}
ParamPolyhedron minkowski_box_sum(const ParamPolyhedron& poly, const std::vector<BoxRadius>& radii,
                                  const FMConfig& cfg = {});

bool helly_family_check(const std::vector<ParamPolyhedron>& family, size_t dim, const Rat& M);

/// Rows transformed by a linear change of variables: returns {u : A (T u) <= ...}.
ParamPolyhedron substitute(const ParamPolyhedron& poly, const RatMatrix& T);

}  // namespace smoothsel
