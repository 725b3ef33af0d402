// SPDX-License-Identifier: MIT
#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "smoothsel/shapefields.hpp"

namespace smoothsel {

/// One jet per point; jets[i] is based at points[i].
struct WhitneyField {
  JetSpacePtr space;
  std::vector<Point> points;
  std::vector<Jet> jets;

  static WhitneyField make(JetSpacePtr space, std::vector<Point> points, std::vector<Jet> jets);
};

/// Gamma_0(x, M) = {P : lo <= P(x) <= hi}, independent of M.
ShapeField interval_field(const JetSpacePtr& space, const std::vector<Point>& points, const RatVec& lo,
                          const RatVec& hi);

/// Exact when every |x - y|^(m - |beta|) is rational; otherwise an upper bound.
Rat whitney_seminorm(const WhitneyField& f, int sqrt_bits = 64);
/// Exact test of seminorm <= M by squaring.
bool seminorm_at_most(const WhitneyField& f, const Rat& M);

/// Smallest M >= 0 with p in poly at M, if any.
std::optional<Rat> min_M_containing(const ParamPolyhedron& poly, const RatVec& p);

struct FiniteConfig {
  FMConfig fm;
  int sqrt_bits = 64;
  size_t subset_budget = 200000;  // subsets enumerated per call
};

struct MinWhitney {
  Rat M;
  WhitneyField field;
};

/// Minimises M subject to seminorm <= M and P^z in gamma(z, M) for z in S (indices into field).
/// Throws "infeasible" when no M works.
MinWhitney min_whitney_M(const ShapeField& field, const std::vector<size_t>& S, const FiniteConfig& cfg = {});

/// Jets at x extendable to S + {x} with seminorm <= M and all jets in gamma(., M); affine in M.
ParamPolyhedron gamma_x_S(const ShapeField& field, size_t x, const std::vector<size_t>& S,
                          const FiniteConfig& cfg = {});

/// Intersection of gamma_x_S over #S <= min(subset_cap, (D+2)^l), D the jet dimension.
ParamPolyhedron gamma_fp(const ShapeField& field, size_t x, int l, size_t subset_cap, const FiniteConfig& cfg = {});

/// Visits subsets of {0..n-1} with 1 <= size <= k, by size and then lexicographically.
/// Stops early when visit returns false. Throws "budget" past the limit.
void for_each_subset(size_t n, size_t k, size_t budget, const std::function<bool(const std::vector<size_t>&)>& visit);

struct FunctionalResult {
  bool feasible = true;
  Rat value;                   // meaningful when feasible
  std::vector<size_t> subset;  // argmax, or a smallest infeasible subset
};

FunctionalResult finiteness_functional(const ShapeField& field, size_t k, const FiniteConfig& cfg = {});

struct Clustering {
  std::vector<std::vector<size_t>> parts;  // indices into the input, each part ascending
  Rat c;                                   // dist(S_i, S_j) >= c diam(S)
};

/// Single-linkage cut at the longest spanning-tree edge; c = 1 / (#S - 1).
Clustering cluster(const std::vector<Point>& S);

struct RefinedField {
  WhitneyField field;
  Rat C_star;  // smallest C with all jets in gamma_0(., C M0) and seminorm <= C M0
};

/// P0 must lie in gamma_{l_star}(x0, M0); S holds field indices, contains x0 and has at most l_star points.
RefinedField field_from_refined_jet(const ShapeField& base, size_t x0, const Jet& P0, const Rat& M0, int l_star,
                                    const std::vector<size_t>& S, const FiniteConfig& cfg = {});

struct Flat {
  RatVec offset;
  std::vector<RatVec> basis;
};

struct MetricSelectionProblem {
  RatMatrix dist;
  std::vector<Flat> flats;
};

enum class LipNorm { Sup, Euclidean };

struct LipschitzResult {
  std::vector<RatVec> F;
  Rat L;            // exact optimum for Sup; lower end of the interval for Euclidean
  double L_upper;   // Euclidean: constant of the returned F; Sup: equals L
  Rat subset_L;     // max over subsets of size <= k of the subset optimum (lower end for Euclidean)
  std::vector<size_t> subset;
};

void check_metric(const RatMatrix& dist);
LipschitzResult lipschitz_select(const MetricSelectionProblem& problem, LipNorm norm, size_t k,
                                 const FiniteConfig& cfg = {});

}  // namespace smoothsel
