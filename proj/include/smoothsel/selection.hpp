// SPDX-License-Identifier: MIT
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "smoothsel/finiteness.hpp"

namespace smoothsel {

/// Half-open cube prod [2^level i, 2^level (i + 1)).
struct DyadicCube {
  int level = 0;
  std::vector<long> corner;

  Rat side() const { return pow2(level); }
  DyadicCube parent() const;
  std::vector<DyadicCube> children() const;
  bool operator==(const DyadicCube& o) const { return level == o.level && corner == o.corner; }
};

/// Level first, then corner lexicographically.
bool cube_less(const DyadicCube& a, const DyadicCube& b);

/// Closed box of the dilate r Q about the centre of Q.
struct RatBox {
  RatVec lo, hi;
  bool contains(const Point& x) const;
  bool contains(const RatBox& b) const;
  bool meets(const RatBox& b) const;  // closed intersection
};
RatBox dilate(const DyadicCube& q, const Rat& r);

/// OK test for cubes already known to satisfy 5Q inside 5Q0.
struct CZPredicate {
  std::string tag;
  std::function<bool(const DyadicCube&)> ok;
};

CZPredicate simplified_predicate(std::vector<Point> E);

struct CZConfig {
  int max_depth = 40;  // levels below Q0 before the descent gives up
};

/// Leaves are the maximal OK cubes whose 65/64-dilate meets the 65/64-dilate of Q0,
/// which is the only part of the decomposition used downstream.
struct CZDecomposition {
  DyadicCube root;
  std::vector<DyadicCube> leaves;  // cube_less order
  std::string predicate_tag;
};

/// Null predicate selects the simplified rule on E.
CZDecomposition cz_decompose(const DyadicCube& Q0, const std::vector<Point>& E, const CZPredicate* predicate = nullptr,
                             const CZConfig& cfg = {});

struct CZReport {
  std::vector<std::string> violations;
  size_t pairs_checked = 0;
  bool ok() const { return violations.empty(); }
};

/// Disjointness, exact coverage of the 65/64-dilate of the root, and the neighbour ratio.
CZReport check_cz_geometry(const CZDecomposition& dec);

/// Cutoffs for one decomposition: each leaf carries a tensor-product smoothstep bump that is 1 on Q
/// and vanishes outside the 65/64-dilate.
class PartitionOfUnity {
 public:
  PartitionOfUnity(CZDecomposition dec, int m);

  const CZDecomposition& decomposition() const { return dec_; }
  int m() const { return m_; }
  /// Jet space carrying derivatives through order m.
  const JetSpacePtr& deriv_space() const { return w_; }

  /// Leaves whose closed dilate contains x.
  std::vector<size_t> active(const Point& x) const;
  std::vector<size_t> active(const std::vector<double>& x) const;

  Rat bump(size_t leaf, const Point& x) const;
  Jet bump_jet(size_t leaf, const Point& x) const;
  std::vector<double> bump_derivs(size_t leaf, const std::vector<double>& x) const;

  /// Derivatives of theta_Q at x, in deriv_space() order.
  std::vector<double> theta_derivs(size_t leaf, const std::vector<double>& x) const;
  double sum_theta_sq(const std::vector<double>& x) const;
  /// Exact at rational x.
  Rat sum_theta_sq(const Point& x) const;

  /// Certified C with |d^beta theta_Q| <= C delta_Q^-|beta| for |beta| <= m, per order.
  const std::vector<Rat>& bound_by_order() const { return bounds_; }
  Rat derivative_bound() const;

  /// Leibniz terms d^k(fg) += binom * d^g f * d^h g over deriv_space().
  struct MulTerm {
    size_t g, h, k;
    double binom;
  };
  const std::vector<MulTerm>& mul_table() const { return mul_; }

 private:
  CZDecomposition dec_;
  int m_;
  JetSpacePtr w_;
  std::vector<RatBox> boxes_;
  std::vector<std::vector<double>> dlo_, dhi_;
  std::vector<Rat> smooth_;  // smoothstep coefficients in t
  std::vector<Rat> bounds_;
  std::vector<MulTerm> mul_;
};

PartitionOfUnity build_pou(const CZDecomposition& dec, int m);

/// Margin of each ramp as a fraction of the cube side.
Rat bump_margin();

struct GluedFunction;

struct LocalPiece {
  Jet poly;  // used when child is null
  std::shared_ptr<const GluedFunction> child;
};

/// F = sum theta_Q^2 F^Q over the leaves; points are shifted by origin before evaluation.
struct GluedFunction {
  JetSpacePtr space;  // local polynomials
  Point origin;
  std::shared_ptr<const PartitionOfUnity> pou;
  std::vector<LocalPiece> locals;  // one per leaf

  const CZDecomposition& decomposition() const { return pou->decomposition(); }
  Rat value(const Point& x) const;
  /// All derivatives through order m, exact, based at x.
  Jet jet(const Point& x) const;
  /// Same as jet() but truncated to the local jet space.
  Jet jet_truncated(const Point& x) const;
  std::vector<double> derivatives(const std::vector<double>& x) const;

  // frame coordinates
  Rat value_frame(const Point& u) const;
  Jet jet_frame(const Point& u) const;
  std::vector<double> derivatives_frame(const std::vector<double>& u) const;
};

/// P0_far fills cubes with no data point in 5Q^+. Field points must lie in the root cube.
GluedFunction whitney_extend(const WhitneyField& field, const CZDecomposition& dec, const Jet& P0_far);

/// Per-multiindex supremum of |d^beta F| over a uniform grid on the root cube.
std::map<MultiIndex, double> achieved_norm(const GluedFunction& F, int grid_density);

struct SelectionProblem {
  JetSpacePtr space;
  std::vector<Point> E;
  std::vector<ParamPolyhedron> constraints;  // width dim * target_dim, component-major
  int target_dim = 1;

  ShapeField field() const;  // target_dim == 1 only
};

SelectionProblem interval_problem(const JetSpacePtr& space, const std::vector<Point>& E, const RatVec& lo,
                                  const RatVec& hi);

struct PointCheck {
  size_t point = 0;
  bool ok = false;
  std::optional<Rat> min_M;  // smallest M with J_z(F) in gamma(z, M)
};

struct VerificationReport {
  bool constraints_ok = false;
  std::vector<PointCheck> points;
  std::map<MultiIndex, double> derivative_sup;
  std::vector<std::string> failures;
};

struct Frame {
  Point origin;
  DyadicCube Q0;
};

/// Shift by the per-axis minimum and take the smallest level with all points in [0, 2^level)^n.
Frame frame_for(const std::vector<Point>& E);

struct SelectionResult {
  bool feasible = false;
  Rat M0;
  Rat M_full;
  std::optional<Rat> ratio;  // absent when M0 = 0 < M_full
  std::vector<size_t> argmax_subset;
  std::vector<size_t> infeasible_subset;
  std::optional<WhitneyField> field;
  std::optional<GluedFunction> F;
  Frame frame;
  VerificationReport verification;
  std::vector<std::string> notes;
};

struct SelectConfig {
  FiniteConfig finite;
  int grid_density = 9;
};

/// Smallest subset of E with no admissible field, searched by size.
std::vector<size_t> minimal_infeasible_subset(const ShapeField& field, const FiniteConfig& cfg = {});

VerificationReport verify_selection(const ShapeField& field, const GluedFunction& F, const Rat& M, int grid_density);

SelectionResult select(const SelectionProblem& problem, size_t k, const SelectConfig& cfg = {});

struct LiftedProblem {
  ShapeField field;
  JetSpacePtr base_space;
  int target_dim = 1;
};

struct LiftConfig {
  size_t max_dim = 15;
};

/// Gamma((x,0), M) = {P : P(x,0) = 0, grad_xi P(x,0) in K(x), |d^g P(x,0)| <= M for |g| <= m}.
LiftedProblem lift_problem(const SelectionProblem& problem, const LiftConfig& cfg = {});

/// sum_i xi_i J(F_i) as a jet at (x, 0); comps[i] lives in the base space at x.
Jet lift_jet(const LiftedProblem& lifted, const std::vector<Jet>& comps);
/// Inverse of lift_jet on the xi-linear part.
std::vector<Jet> unlift_jet(const LiftedProblem& lifted, const Jet& P);

struct RecursiveConfig {
  Rat eps = Rat(1, 1024);
  Rat A_const = Rat(1024);
  int max_refine_level = -1;  // < 0: use the label depth of the empty set
  int max_recursion = 16;
  bool derivative_box = true;  // add |d^beta P| <= M for 1 <= |beta| <= m-1 to the constraints
  LemmaConfig lemma;
  CZConfig cz;
  int grid_density = 9;
};

struct RecursiveStats {
  int cz_levels = 0;
  int max_depth = 0;
  std::map<int, int> leaf_types;  // Type 1..4 counts
  std::vector<std::string> log;
  bool refine_capped = false;
};

struct RecursiveResult {
  SelectionResult result;
  RecursiveStats stats;
};

/// Experimental induction solver. Aborts with an Error tagged by the failing step instead of returning
/// an unverified F.
RecursiveResult recursive_select(const SelectionProblem& problem, const RecursiveConfig& cfg = {});

/// One induction run from a caller-supplied basis; field and Q0 in the same coordinates, E inside Q0.
std::shared_ptr<GluedFunction> main_lemma(const ShapeField& field, const BasisCertificate& cert, const DyadicCube& Q0,
                                          const RecursiveConfig& cfg, RecursiveStats& stats);

/// Top-level decomposition recursive_select would build, for visualisation.
CZDecomposition induction_decomposition(const SelectionProblem& problem, const RecursiveConfig& cfg = {});

}  // namespace smoothsel
