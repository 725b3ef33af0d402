// SPDX-License-Identifier: MIT
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "smoothsel/rational.hpp"

namespace smoothsel {

using MultiIndex = std::vector<int>;
using IndexSet = std::vector<MultiIndex>;
using RatMatrix = std::vector<RatVec>;

int order(const MultiIndex& a);
MultiIndex mi_add(const MultiIndex& a, const MultiIndex& b);
bool mi_leq(const MultiIndex& a, const MultiIndex& b);  // componentwise
mpz_class mi_factorial(const MultiIndex& a);

/// Non-throwing strict comparison; false on equal arguments.
bool mi_less(const MultiIndex& a, const MultiIndex& b);

/// All multiindices of order at most m-1 in n variables, ascending.
std::vector<MultiIndex> enumerate_multiindices(int m, int n);

/// Throws on a == b.
bool multiindex_less(const MultiIndex& a, const MultiIndex& b);

/// A < B when the least element of the symmetric difference lies in A. Throws on A == B.
bool subset_less(const IndexSet& a, const IndexSet& b);

class JetSpace;
using JetSpacePtr = std::shared_ptr<const JetSpace>;

class JetSpace {
 public:
  static JetSpacePtr make(int m, int n);

  int m = 0;
  int n = 0;
  std::vector<MultiIndex> indices;

  size_t dim() const { return indices.size(); }
  /// -1 when the multiindex is not in the space.
  int index_of(const MultiIndex& a) const;
  int order_of(size_t i) const { return orders_[i]; }
  /// index of indices[i] + indices[j], or -1.
  int sum_index(size_t i, size_t j) const { return sum_[i * dim() + j]; }
  const Rat& factorial(size_t i) const { return fact_[i]; }
  const MultiIndex& unit(int coord) const;

  IndexSet normalize(IndexSet a) const;
  uint64_t mask_of(const IndexSet& a) const;
  IndexSet set_of(uint64_t mask) const;

  JetSpace(int m, int n);

 private:
  std::map<MultiIndex, int> pos_;
  std::vector<int> orders_;
  std::vector<int> sum_;
  std::vector<Rat> fact_;
  std::vector<MultiIndex> units_;
};

bool same_space(const JetSpace& a, const JetSpace& b);

bool is_monotonic(const IndexSet& a, const JetSpace& space);
/// 1 + 3 * #{monotonic A' < A}; rejects dim > 12 and non-monotonic A.
int label_depth(const IndexSet& a, const JetSpace& space);
IndexSet monotonic_span(const IndexSet& a, const JetSpace& space);

struct Jet {
  JetSpacePtr space;
  Point base;
  RatVec coeffs;  // coeffs[i] = d^{indices[i]} P(base)

  Jet() = default;
  Jet(JetSpacePtr s, Point b);
  Jet(JetSpacePtr s, Point b, RatVec c);

  const Rat& at(const MultiIndex& a) const;
  Rat& at(const MultiIndex& a);
};

Jet jet_zero(const JetSpacePtr& space, const Point& base);
Jet jet_constant(const JetSpacePtr& space, const Point& base, const Rat& c);
/// coef * (x - base)^omega
Jet jet_monomial(const JetSpacePtr& space, const Point& base, const MultiIndex& omega, const Rat& coef);

Jet operator+(const Jet& a, const Jet& b);
Jet operator-(const Jet& a, const Jet& b);
Jet operator*(const Rat& s, const Jet& a);
bool operator==(const Jet& a, const Jet& b);

/// d^beta P(y); zero when |beta| = m, throws when |beta| > m.
Rat eval_jet_derivative(const Jet& p, const MultiIndex& beta, const Point& y);
Jet recenter_jet(const Jet& p, const Point& y);
/// R with coeffs_at(to) = R * coeffs_at(from).
RatMatrix recenter_matrix(const JetSpace& space, const Point& from, const Point& to);
/// Truncated Leibniz product; both jets are recentered to x first.
Jet jet_multiply(const Jet& p, const Jet& q, const Point& x);
/// Jet of the multiplicative inverse; requires nonzero value at the base.
Jet jet_inverse(const Jet& p);
/// P(base + T(x - base)) with T = diag(lambda).
Jet jet_compose_diag(const Jet& p, const RatVec& lambda);

/// lambda^beta
Rat mono_pow(const RatVec& lambda, const MultiIndex& beta);

/// Exact Gaussian elimination. Both return nullopt on a singular matrix.
std::optional<RatVec> solve_linear(RatMatrix a, RatVec b);
std::optional<RatMatrix> invert_matrix(const RatMatrix& a);

}  // namespace smoothsel
