#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "traintrack/rational.hpp"

namespace traintrack {

template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

  Matrix operator*(const Matrix& o) const {
    if (cols_ != o.rows_) throw std::invalid_argument("matrix dim mismatch");
    Matrix out(rows_, o.cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t k = 0; k < cols_; ++k) {
        const T& a = (*this)(i, k);
        if (a == 0) continue;
        for (std::size_t j = 0; j < o.cols_; ++j) {
          const T& b = o(k, j);
          if (b != 0) out(i, j) += a * b;
        }
      }
    return out;
  }

  std::vector<T> apply(const std::vector<T>& v) const {
    if (v.size() != cols_) throw std::invalid_argument("matrix/vector dim mismatch");
    std::vector<T> out(rows_, T(0));
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j)
        if ((*this)(i, j) != 0 && v[j] != 0) out[i] += (*this)(i, j) * v[j];
    return out;
  }

  Matrix pow(unsigned long long e) const {
    if (rows_ != cols_) throw std::invalid_argument("pow needs square matrix");
    Matrix result = identity(rows_);
    Matrix base = *this;
    while (e > 0) {
      if (e & 1ULL) result = result * base;
      base = base * base;
      e >>= 1ULL;
    }
    return result;
  }

  bool positive() const {
    for (const auto& v : data_)
      if (v <= 0) return false;
    return true;
  }

  bool nonnegative() const {
    for (const auto& v : data_)
      if (v < 0) return false;
    return true;
  }

  // Operator norm for the mass norm ||v|| = sum_b |v(b)|: max column sum.
  T column_sum_norm() const {
    T best(0);
    for (std::size_t j = 0; j < cols_; ++j) {
      T s(0);
      for (std::size_t i = 0; i < rows_; ++i) s += (*this)(i, j) < 0 ? T(-(*this)(i, j)) : (*this)(i, j);
      if (s > best) best = s;
    }
    return best;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<T> data_;
};

using IMat = Matrix<Int>;
using QMat = Matrix<Rat>;

inline QMat to_rational(const IMat& m) {
  QMat out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = Rat(m(i, j));
  return out;
}

// Least r <= cap with A^r entrywise positive, for nonnegative square A.
// Uses boolean reachability so entry growth never matters.
inline std::optional<unsigned> positivity_power(const IMat& a, unsigned cap) {
  const std::size_t n = a.rows();
  std::vector<char> cur(n * n), base(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) base[i * n + j] = a(i, j) > 0 ? 1 : 0;
  cur = base;
  for (unsigned r = 1; r <= cap; ++r) {
    if (std::all_of(cur.begin(), cur.end(), [](char c) { return c != 0; })) return r;
    std::vector<char> next(n * n, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        if (cur[i * n + k])
          for (std::size_t j = 0; j < n; ++j)
            if (base[k * n + j]) next[i * n + j] = 1;
    cur.swap(next);
  }
  return std::nullopt;
}

// Rank of a rational matrix by Gaussian elimination (exact).
inline std::size_t rank(QMat m) {
  std::size_t r = 0;
  for (std::size_t c = 0; c < m.cols() && r < m.rows(); ++c) {
    std::size_t piv = r;
    while (piv < m.rows() && m(piv, c) == 0) ++piv;
    if (piv == m.rows()) continue;
    for (std::size_t j = 0; j < m.cols(); ++j) std::swap(m(r, j), m(piv, j));
    const Rat inv = Rat(1) / m(r, c);
    for (std::size_t j = c; j < m.cols(); ++j) m(r, j) *= inv;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      if (i == r || m(i, c) == 0) continue;
      const Rat f = m(i, c);
      for (std::size_t j = c; j < m.cols(); ++j) m(i, j) -= f * m(r, j);
    }
    ++r;
  }
  return r;
}

// Basis of the right null space {x : M x = 0}, as columns.
inline std::vector<std::vector<Rat>> null_space(QMat m) {
  const std::size_t nc = m.cols();
  std::vector<std::size_t> pivot_col;
  std::size_t r = 0;
  for (std::size_t c = 0; c < nc && r < m.rows(); ++c) {
    std::size_t piv = r;
    while (piv < m.rows() && m(piv, c) == 0) ++piv;
    if (piv == m.rows()) continue;
    for (std::size_t j = 0; j < nc; ++j) std::swap(m(r, j), m(piv, j));
    const Rat inv = Rat(1) / m(r, c);
    for (std::size_t j = c; j < nc; ++j) m(r, j) *= inv;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      if (i == r || m(i, c) == 0) continue;
      const Rat f = m(i, c);
      for (std::size_t j = c; j < nc; ++j) m(i, j) -= f * m(r, j);
    }
    pivot_col.push_back(c);
    ++r;
  }
  std::vector<bool> is_pivot(nc, false);
  for (auto c : pivot_col) is_pivot[c] = true;
  std::vector<std::vector<Rat>> basis;
  for (std::size_t free = 0; free < nc; ++free) {
    if (is_pivot[free]) continue;
    std::vector<Rat> v(nc, Rat(0));
    v[free] = 1;
    for (std::size_t i = 0; i < pivot_col.size(); ++i) v[pivot_col[i]] = -m(i, free);
    basis.push_back(std::move(v));
  }
  return basis;
}

// Scale a rational vector to primitive integer form (gcd 1, first nonzero > 0).
inline std::vector<Int> primitive_integer(const std::vector<Rat>& v) {
  Int lcm_den(1);
  for (const auto& x : v) {
    const Int d = boost::multiprecision::denominator(x);
    lcm_den = boost::multiprecision::lcm(lcm_den, d);
  }
  std::vector<Int> out(v.size());
  Int g(0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = boost::multiprecision::numerator(v[i]) * (lcm_den / boost::multiprecision::denominator(v[i]));
    g = boost::multiprecision::gcd(g, out[i]);
  }
  if (g != 0)
    for (auto& x : out) x /= g;
  for (const auto& x : out) {
    if (x == 0) continue;
    if (x < 0)
      for (auto& y : out) y = -y;
    break;
  }
  return out;
}

// Characteristic polynomial coefficients (monic, degree n) via the
// Faddeev-LeVerrier recurrence, exact rationals. coeffs[k] multiplies x^k.
inline std::vector<Rat> characteristic_polynomial(const IMat& a) {
  const std::size_t n = a.rows();
  QMat A = to_rational(a);
  QMat M = QMat::identity(n);
  std::vector<Rat> c(n + 1, Rat(0));
  c[n] = 1;
  QMat AM = A;
  for (std::size_t k = 1; k <= n; ++k) {
    AM = A * M;
    Rat tr(0);
    for (std::size_t i = 0; i < n; ++i) tr += AM(i, i);
    const Rat ck = -tr / Rat(static_cast<long>(k));
    c[n - k] = ck;
    M = AM;
    for (std::size_t i = 0; i < n; ++i) M(i, i) += ck;
  }
  return c;
}

}  // namespace traintrack
