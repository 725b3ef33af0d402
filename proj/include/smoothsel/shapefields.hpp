// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smoothsel/polyhedra.hpp"

namespace smoothsel {

/// One polyhedron per point; gammas[i] constrains d^beta P(points[i]).
struct ShapeField {
  JetSpacePtr space;
  std::vector<Point> points;
  std::vector<ParamPolyhedron> gammas;

  /// Validates widths, c >= 0 and distinct points, and stamps variable labels.
  static ShapeField make(JetSpacePtr space, std::vector<Point> points, std::vector<ParamPolyhedron> gammas);
  size_t index_of(const Point& x) const;
  size_t size() const { return points.size(); }
};

/// Gamma(x, M) = {|d^beta P(x) - center_beta| <= M weight_beta}. Such fields are (C, 1)-convex.
ShapeField box_field(const JetSpacePtr& space, const std::vector<Point>& points, const std::vector<RatVec>& centers,
                     const std::vector<RatVec>& weights);

struct RefineConfig {
  FMConfig fm;
  int sqrt_bits = 64;
};

ShapeField first_refinement(const ShapeField& field, const RefineConfig& cfg = {});
ShapeField refine(const ShapeField& field, int l, const RefineConfig& cfg = {});

/// Upper bounds for |x - y|^(m - |beta|), exact when the distance is rational.
RatVec taylor_radii(const JetSpace& space, const Point& x, const Point& y, int sqrt_bits = 64);

/// A jet P' in gamma(y, M) with |d^beta(P - P')(x)| <= M |x - y|^(m - |beta|) for the jet P at x,
/// chosen to minimise the largest scaled discrepancy. Coefficients are returned at y.
std::optional<RatVec> refinement_witness(const ShapeField& field, size_t y_index, const Jet& p, const Rat& M,
                                         int sqrt_bits = 64);

struct ConvexityViolation {
  size_t point = 0;
  Rat delta, M;
  Jet P1, P2, Q1, Q2, P;
};

struct ConvexityReport {
  int trials = 0;
  int skipped = 0;  // trials where gamma(x, M) was empty
  std::vector<ConvexityViolation> violations;
};

ConvexityReport sample_convexity(const ShapeField& field, const Rat& Cw, const Rat& delta_max, int trials,
                                 uint64_t seed);

struct BasisCertificate {
  IndexSet A;
  Point x0;
  Rat M0;
  Jet P0;
  Rat delta;
  Rat CB;
  std::vector<Jet> basis;  // basis[i] belongs to A[i]
  bool weak = false;
};

struct BasisCheck {
  bool ok = true;
  std::string failure;
  explicit operator bool() const { return ok; }
};

BasisCheck verify_basis(const BasisCertificate& cert, const ShapeField& field);

/// Smallest power of two C with the certificate valid for C_B = C, searched up to 2^max_exp.
std::optional<Rat> achieved_basis_constant(BasisCertificate cert, const ShapeField& field, int max_exp = 64);

struct RescaleInput {
  JetSpacePtr space;
  IndexSet A;
  RatMatrix F;  // F[i][j] pairs A[i] with space->indices[j]
  Rat C;
  Rat a;
};

struct RescaleOutput {
  RatVec lambda;
  std::vector<MultiIndex> phi;  // phi[i] is the image of A[i]
};

struct RescaleConfig {
  int max_total_exponent = 96;
};

RescaleOutput rescale(const RescaleInput& in, const RescaleConfig& cfg = {});
/// Direct check of the rescaling conclusions by exact substitution.
BasisCheck verify_rescale(const RescaleInput& in, const RescaleOutput& out);

struct LemmaConfig {
  Rat a = Rat(1, 4);
  Rat cb_factor = Rat(64);
  Rat threshold = Rat(1024);
  Rat eps0 = Rat(1, 64);
  RescaleConfig rescale;
  int sqrt_bits = 64;
};

struct RelabelResult {
  IndexSet A_hat;
  BasisCertificate cert;
  bool strict = false;
  Rat achieved_C;  // smallest power of two for which the returned basis verifies
};

RelabelResult relabel(const BasisCertificate& weak_cert, const ShapeField& field, const LemmaConfig& cfg = {});

struct ControlResult {
  IndexSet A_hat;
  Jet P0_hat;
  BasisCertificate cert;
};

ControlResult control_gamma(const BasisCertificate& cert, const Jet& P, const ShapeField& field,
                            const LemmaConfig& cfg = {});

struct TransportResult {
  Jet P_hash;  // anchored at y0
  BasisCertificate cert_A;
  BasisCertificate cert_A_hat;
};

/// field_l0 must be the first refinement of field_prev; both bases are for field_l0 at x0.
TransportResult transport(const BasisCertificate& cert_A, const BasisCertificate& cert_A_hat, const Point& y0,
                          const ShapeField& field_l0, const ShapeField& field_prev, const LemmaConfig& cfg = {});

}  // namespace smoothsel
