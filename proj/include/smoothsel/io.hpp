// SPDX-License-Identifier: MIT
#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "smoothsel/selection.hpp"

namespace smoothsel {

using Json = nlohmann::ordered_json;

Json rat_json(const Rat& r);
/// Accepts "p/q" strings, integers and finite decimal strings.
Rat json_rat(const Json& j);
Json point_json(const Point& p);
Point json_point(const Json& j);

/// Problem documents: {"m", "n", "target_dim"?, "points": [{"x": [...], "K": {...}}], "options"?}.
/// K types: interval {lo, hi}, singleton {value}, hrep {rows: [{a, b, c?}]}, affine {offset, basis}, none.
struct ProblemDocument {
  SelectionProblem problem;
  Json options;
};

ProblemDocument parse_problem(const Json& doc);
/// H-representation form of a problem; parse_problem(problem_json(p)) reproduces p.
Json problem_json(const SelectionProblem& p, const Json& options = Json::object());

Json cube_json(const DyadicCube& q);
DyadicCube json_cube(const Json& j);
Json jet_json(const Jet& p);
Jet json_jet(const JetSpacePtr& space, const Json& j);

Json field_json(const WhitneyField& f);
WhitneyField json_field(const JetSpacePtr& space, const Json& j);

/// Leaves in level-then-corner order with their local jets and the bump parameters.
Json glued_json(const GluedFunction& F);
GluedFunction json_glued(const JetSpacePtr& space, const Json& j);

/// Problem the solver actually ran: the lifted one for target_dim > 1.
SelectionProblem solver_problem(const SelectionProblem& p);

struct SolveOptions {
  size_t k = 3;
  std::string method = "select";  // or "recursive"
  int grid_density = 9;
};

Json solve_document(const Json& problem_doc, const SolveOptions& opts);

struct VerifyOutcome {
  bool ok = true;
  std::string failure;
  std::vector<std::string> passed;
};

/// Rechecks every claim in a result document from the serialized data alone.
VerifyOutcome verify_document(const Json& result);

Json finiteness_table(const Json& problem_doc, size_t k_min, size_t k_max);
Json refine_document(const Json& problem_doc, int l);
/// Deterministic SVG with 6-decimal coordinates; n <= 2.
std::string cz_svg(const CZDecomposition& dec, const std::vector<Point>& E_frame);

}  // namespace smoothsel
