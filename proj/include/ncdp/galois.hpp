#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <vector>

#include <Eigen/Core>

#include "ncdp/common.hpp"

namespace ncdp {

using Symbol = std::uint16_t;
using SymbolVector = std::vector<Symbol>;

/// GF(2^n), 1 <= n <= 16, with elements in polynomial (bit-vector) form.
/// Multiplication goes through log/antilog tables built from a generator
/// of the multiplicative group, so any irreducible polynomial works, not
/// only primitive ones.
class GaloisField {
 public:
  explicit GaloisField(int degree, std::uint32_t polynomial = 0);

  /// 0x11B for n = 8, otherwise the smallest irreducible polynomial of degree n.
  static std::uint32_t default_polynomial(int degree);
  static bool is_irreducible(std::uint32_t polynomial, int degree);
  /// Carry-less product reduced modulo `polynomial`. Slow reference path.
  static Symbol multiply_reference(Symbol a, Symbol b, std::uint32_t polynomial, int degree);

  int degree() const { return degree_; }
  std::uint32_t polynomial() const { return polynomial_; }
  std::uint32_t order() const { return 1u << degree_; }
  Symbol generator() const { return generator_; }

  bool contains(std::uint32_t v) const { return v < order(); }

  Symbol add(Symbol a, Symbol b) const { return a ^ b; }

  Symbol mul(Symbol a, Symbol b) const {
    if (a == 0 || b == 0) return 0;
    return exp_[static_cast<std::size_t>(log_[a]) + log_[b]];
  }

  Symbol inv(Symbol a) const;
  Symbol div(Symbol a, Symbol b) const { return mul(a, inv(b)); }

  bool operator==(const GaloisField& o) const {
    return degree_ == o.degree_ && polynomial_ == o.polynomial_;
  }

 private:
  int degree_;
  std::uint32_t polynomial_;
  Symbol generator_ = 1;
  std::vector<std::uint32_t> log_;
  std::vector<Symbol> exp_;  // doubled so log sums never need a modulo
};

using FieldPtr = std::shared_ptr<const GaloisField>;

FieldPtr make_field(int degree, std::uint32_t polynomial = 0);

bool same_field(const FieldPtr& a, const FieldPtr& b);

/// A field element bound to its field; arithmetic checks that both operands
/// live in the same field.
class FieldElement {
 public:
  FieldElement(FieldPtr field, std::uint32_t value);

  const FieldPtr& field() const { return field_; }
  Symbol value() const { return value_; }

  friend bool operator==(const FieldElement& a, const FieldElement& b) {
    return same_field(a.field_, b.field_) && a.value_ == b.value_;
  }

 private:
  FieldPtr field_;
  Symbol value_;
};

FieldElement add(const FieldElement& a, const FieldElement& b);
FieldElement mul(const FieldElement& a, const FieldElement& b);
FieldElement inv(const FieldElement& a);

inline FieldElement operator+(const FieldElement& a, const FieldElement& b) { return add(a, b); }
inline FieldElement operator*(const FieldElement& a, const FieldElement& b) { return mul(a, b); }

using SymbolMatrix = Eigen::Matrix<Symbol, Eigen::Dynamic, Eigen::Dynamic>;

/// S x N coefficient matrix; entry (j, i) is the coefficient of terminal i in slot j.
class FieldMatrix {
 public:
  FieldMatrix(FieldPtr field, Eigen::Index rows, Eigen::Index cols);
  FieldMatrix(FieldPtr field, SymbolMatrix entries);

  const FieldPtr& field() const { return field_; }
  Eigen::Index rows() const { return entries_.rows(); }
  Eigen::Index cols() const { return entries_.cols(); }

  Symbol operator()(Eigen::Index r, Eigen::Index c) const { return entries_(r, c); }
  void set(Eigen::Index r, Eigen::Index c, Symbol v);

  const SymbolMatrix& entries() const { return entries_; }

 private:
  FieldPtr field_;
  SymbolMatrix entries_;
};

std::size_t rank(const FieldMatrix& m);

/// For each column, whether the variable is uniquely determined by the row
/// space, i.e. the unit vector e_i lies in the span of the rows.
std::vector<bool> determined_variables(const FieldMatrix& m);

struct Reduction {
  std::map<std::size_t, SymbolVector> recovered;
  std::set<std::size_t> unresolved;
};

/// Gaussian elimination on [m | rhs]. Every variable whose value is fixed by
/// the system is returned in `recovered`, the rest in `unresolved`.
/// rhs holds one length-L vector per row of m.
Reduction solve_or_reduce(const FieldMatrix& m, const std::vector<SymbolVector>& rhs);

/// Iterative clean-burst peeling: decode rows with a single unknown,
/// substitute, repeat. Returns the recovered column indices.
std::set<std::size_t> peel_clean_bursts(const FieldMatrix& m);

}  // namespace ncdp
