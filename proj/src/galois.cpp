#include "ncdp/galois.hpp"

#include <algorithm>
#include <mutex>
#include <string>
#include <utility>

namespace ncdp {

namespace {

int poly_degree(std::uint32_t p) {
  int d = -1;
  while (p) {
    p >>= 1;
    ++d;
  }
  return d;
}

std::uint32_t poly_mod(std::uint32_t a, std::uint32_t b) {
  const int db = poly_degree(b);
  for (int da = poly_degree(a); da >= db; da = poly_degree(a)) a ^= b << (da - db);
  return a;
}

void check_degree(int degree) {
  if (degree < 1 || degree > 16)
    throw ParameterError("field degree must lie in [1, 16], got " + std::to_string(degree));
}

}  // namespace

bool GaloisField::is_irreducible(std::uint32_t polynomial, int degree) {
  if (poly_degree(polynomial) != degree || degree < 1) return false;
  // Any factorization has a factor of degree <= n/2.
  for (std::uint32_t d = 2; poly_degree(d) <= degree / 2; ++d) {
    if (poly_mod(polynomial, d) == 0) return false;
  }
  return true;
}

std::uint32_t GaloisField::default_polynomial(int degree) {
  check_degree(degree);
  if (degree == 8) return 0x11B;
  for (std::uint32_t p = 1u << degree; p < (2u << degree); ++p) {
    if (is_irreducible(p, degree)) return p;
  }
  throw ParameterError("no irreducible polynomial found");  // unreachable
}

Symbol GaloisField::multiply_reference(Symbol a, Symbol b, std::uint32_t polynomial, int degree) {
  std::uint32_t acc = 0;
  std::uint32_t x = a;
  for (std::uint32_t y = b; y; y >>= 1) {
    if (y & 1u) acc ^= x;
    x <<= 1;
  }
  return static_cast<Symbol>(poly_mod(acc, polynomial) & ((1u << degree) - 1u));
}

GaloisField::GaloisField(int degree, std::uint32_t polynomial)
    : degree_(degree), polynomial_(polynomial == 0 ? default_polynomial(degree) : polynomial) {
  check_degree(degree);
  if (!is_irreducible(polynomial_, degree_))
    throw ParameterError("reduction polynomial is not irreducible of degree " +
                         std::to_string(degree_));

  const std::uint32_t units = order() - 1;
  for (std::uint32_t g = 1; g < order(); ++g) {
    std::uint32_t x = g;
    std::uint32_t k = 1;
    while (x != 1 && k <= units) {
      x = multiply_reference(static_cast<Symbol>(x), static_cast<Symbol>(g), polynomial_, degree_);
      ++k;
    }
    if (k == units) {
      generator_ = static_cast<Symbol>(g);
      break;
    }
  }

  log_.assign(order(), 0);
  exp_.assign(2 * units, 0);
  std::uint32_t x = 1;
  for (std::uint32_t i = 0; i < units; ++i) {
    exp_[i] = exp_[i + units] = static_cast<Symbol>(x);
    log_[x] = i;
    x = multiply_reference(static_cast<Symbol>(x), generator_, polynomial_, degree_);
  }
}

Symbol GaloisField::inv(Symbol a) const {
  if (a == 0) throw DivisionByZeroError("inverse of zero in GF(2^n)");
  const std::uint32_t units = order() - 1;
  return exp_[(units - log_[a]) % units];
}

FieldPtr make_field(int degree, std::uint32_t polynomial) {
  static std::mutex mu;
  static std::map<std::pair<int, std::uint32_t>, FieldPtr> cache;
  check_degree(degree);
  const std::uint32_t poly = polynomial == 0 ? GaloisField::default_polynomial(degree) : polynomial;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{degree, poly}];
  if (!slot) slot = std::make_shared<const GaloisField>(degree, poly);
  return slot;
}

bool same_field(const FieldPtr& a, const FieldPtr& b) {
  return a && b && (a == b || *a == *b);
}

FieldElement::FieldElement(FieldPtr field, std::uint32_t value)
    : field_(std::move(field)), value_(static_cast<Symbol>(value)) {
  if (!field_) throw ParameterError("field element without a field");
  if (!field_->contains(value))
    throw ParameterError("value " + std::to_string(value) + " outside GF(2^" +
                         std::to_string(field_->degree()) + ")");
}

namespace {
void require_same(const FieldElement& a, const FieldElement& b) {
  if (!same_field(a.field(), b.field())) throw SpecMismatchError("operands from different fields");
}
}  // namespace

FieldElement add(const FieldElement& a, const FieldElement& b) {
  require_same(a, b);
  return FieldElement(a.field(), a.field()->add(a.value(), b.value()));
}

FieldElement mul(const FieldElement& a, const FieldElement& b) {
  require_same(a, b);
  return FieldElement(a.field(), a.field()->mul(a.value(), b.value()));
}

FieldElement inv(const FieldElement& a) { return FieldElement(a.field(), a.field()->inv(a.value())); }

FieldMatrix::FieldMatrix(FieldPtr field, Eigen::Index rows, Eigen::Index cols)
    : field_(std::move(field)), entries_(SymbolMatrix::Zero(rows, cols)) {
  if (!field_) throw ParameterError("matrix without a field");
}

FieldMatrix::FieldMatrix(FieldPtr field, SymbolMatrix entries)
    : field_(std::move(field)), entries_(std::move(entries)) {
  if (!field_) throw ParameterError("matrix without a field");
  for (Eigen::Index i = 0; i < entries_.size(); ++i) {
    if (!field_->contains(entries_.data()[i])) throw ParameterError("matrix entry outside field");
  }
}

void FieldMatrix::set(Eigen::Index r, Eigen::Index c, Symbol v) {
  if (!field_->contains(v)) throw ParameterError("matrix entry outside field");
  entries_(r, c) = v;
}

namespace {

// Row-major working copy of [A | B] reduced in place to reduced row echelon
// form on the first `vars` columns.
struct Echelon {
  std::size_t rows = 0, width = 0, vars = 0;
  std::vector<Symbol> a;
  std::vector<std::ptrdiff_t> pivot_of_row;  // column, or -1
  std::size_t rank = 0;

  Symbol* row(std::size_t r) { return a.data() + r * width; }
};

Echelon reduce(const FieldMatrix& m, const std::vector<SymbolVector>* rhs) {
  const GaloisField& f = *m.field();
  Echelon e;
  e.rows = static_cast<std::size_t>(m.rows());
  e.vars = static_cast<std::size_t>(m.cols());
  const std::size_t extra = (rhs && !rhs->empty()) ? rhs->front().size() : 0;
  e.width = e.vars + extra;
  e.a.assign(e.rows * e.width, 0);
  for (std::size_t r = 0; r < e.rows; ++r) {
    Symbol* row = e.row(r);
    for (std::size_t c = 0; c < e.vars; ++c) row[c] = m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (std::size_t c = 0; c < extra; ++c) row[e.vars + c] = (*rhs)[r][c];
  }

  std::vector<std::size_t> nz;
  std::size_t p = 0;
  for (std::size_t c = 0; c < e.vars && p < e.rows; ++c) {
    std::size_t r = p;
    while (r < e.rows && e.row(r)[c] == 0) ++r;
    if (r == e.rows) continue;
    if (r != p) std::swap_ranges(e.row(r), e.row(r) + e.width, e.row(p));

    Symbol* prow = e.row(p);
    const Symbol scale = f.inv(prow[c]);
    nz.clear();
    for (std::size_t k = 0; k < e.width; ++k) {
      if (prow[k]) {
        prow[k] = f.mul(prow[k], scale);
        nz.push_back(k);
      }
    }
    for (std::size_t r2 = 0; r2 < e.rows; ++r2) {
      if (r2 == p) continue;
      Symbol* row = e.row(r2);
      const Symbol factor = row[c];
      if (!factor) continue;
      for (std::size_t k : nz) row[k] ^= f.mul(factor, prow[k]);
    }
    ++p;
  }
  e.rank = p;
  e.pivot_of_row.assign(e.rows, -1);
  for (std::size_t r = 0; r < e.rank; ++r) {
    const Symbol* row = e.row(r);
    for (std::size_t c = 0; c < e.vars; ++c) {
      if (row[c]) {
        e.pivot_of_row[r] = static_cast<std::ptrdiff_t>(c);
        break;
      }
    }
  }
  return e;
}

// A pivot row pins its variable iff it has no other nonzero coefficient.
bool row_is_unit(Echelon& e, std::size_t r) {
  const Symbol* row = e.row(r);
  int count = 0;
  for (std::size_t c = 0; c < e.vars; ++c) count += row[c] != 0;
  return count == 1;
}

}  // namespace

std::size_t rank(const FieldMatrix& m) { return reduce(m, nullptr).rank; }

std::vector<bool> determined_variables(const FieldMatrix& m) {
  Echelon e = reduce(m, nullptr);
  std::vector<bool> out(e.vars, false);
  for (std::size_t r = 0; r < e.rank; ++r) {
    if (row_is_unit(e, r)) out[static_cast<std::size_t>(e.pivot_of_row[r])] = true;
  }
  return out;
}

Reduction solve_or_reduce(const FieldMatrix& m, const std::vector<SymbolVector>& rhs) {
  if (rhs.size() != static_cast<std::size_t>(m.rows()))
    throw DimensionError("solve_or_reduce: " + std::to_string(rhs.size()) + " right-hand sides for " +
                         std::to_string(m.rows()) + " rows");
  const std::size_t len = rhs.empty() ? 0 : rhs.front().size();
  for (const auto& v : rhs) {
    if (v.size() != len) throw DimensionError("solve_or_reduce: ragged right-hand sides");
    for (Symbol s : v) {
      if (!m.field()->contains(s)) throw ParameterError("right-hand side symbol outside field");
    }
  }

  Echelon e = reduce(m, &rhs);
  Reduction out;
  for (std::size_t r = 0; r < e.rank; ++r) {
    if (!row_is_unit(e, r)) continue;
    const Symbol* row = e.row(r);
    out.recovered.emplace(static_cast<std::size_t>(e.pivot_of_row[r]),
                          SymbolVector(row + e.vars, row + e.width));
  }
  for (std::size_t c = 0; c < e.vars; ++c) {
    if (!out.recovered.count(c)) out.unresolved.insert(c);
  }
  return out;
}

std::set<std::size_t> peel_clean_bursts(const FieldMatrix& m) {
  const auto rows = static_cast<std::size_t>(m.rows());
  const auto cols = static_cast<std::size_t>(m.cols());
  std::vector<std::vector<std::size_t>> in_row(rows), in_col(cols);
  std::vector<std::size_t> unknown(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))) {
        in_row[r].push_back(c);
        in_col[c].push_back(r);
        ++unknown[r];
      }
    }
  }

  std::set<std::size_t> recovered;
  std::vector<std::size_t> queue;
  for (std::size_t r = 0; r < rows; ++r) {
    if (unknown[r] == 1) queue.push_back(r);
  }
  while (!queue.empty()) {
    const std::size_t r = queue.back();
    queue.pop_back();
    if (unknown[r] != 1) continue;
    std::size_t col = cols;
    for (std::size_t c : in_row[r]) {
      if (!recovered.count(c)) col = c;
    }
    recovered.insert(col);
    for (std::size_t r2 : in_col[col]) {
      if (--unknown[r2] == 1) queue.push_back(r2);
    }
  }
  return recovered;
}

}  // namespace ncdp
