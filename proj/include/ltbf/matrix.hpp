// Dense complex matrices with profile-aware kernels, FP64 LU solves for
// baselines, and binary/CSV serialization.
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltbf/arith.hpp"

namespace ltbf {

class CMat {
 public:
  CMat() = default;
  CMat(int rows, int cols) : rows_(rows), cols_(cols), d_(std::size_t(rows) * cols) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("negative dimension");
  }

  static CMat identity(int n) {
    CMat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static CMat zeros(int rows, int cols) { return CMat(rows, cols); }
  static CMat col_vector(const std::vector<cxd>& v) {
    CMat m(int(v.size()), 1);
    m.d_ = v;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return d_.empty(); }

  cxd& operator()(int i, int j) { return d_[std::size_t(i) * cols_ + j]; }
  cxd operator()(int i, int j) const { return d_[std::size_t(i) * cols_ + j]; }

  const std::vector<cxd>& data() const { return d_; }
  std::vector<cxd>& data() { return d_; }

  std::span<const cxd> row(int i) const {
    return {d_.data() + std::size_t(i) * cols_, std::size_t(cols_)};
  }

  std::vector<cxd> col(int j) const {
    std::vector<cxd> v(rows_);
    for (int i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
    return v;
  }
  void set_col(int j, const std::vector<cxd>& v) {
    for (int i = 0; i < rows_; ++i) (*this)(i, j) = v[i];
  }

  CMat adjoint() const {
    CMat r(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) r(j, i) = std::conj((*this)(i, j));
    return r;
  }

  CMat transpose_conj_free() const {
    CMat r(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) r(j, i) = (*this)(i, j);
    return r;
  }

  CMat& operator+=(const CMat& o) {
    check_same_shape(o);
    for (std::size_t i = 0; i < d_.size(); ++i) d_[i] += o.d_[i];
    return *this;
  }
  CMat& operator-=(const CMat& o) {
    check_same_shape(o);
    for (std::size_t i = 0; i < d_.size(); ++i) d_[i] -= o.d_[i];
    return *this;
  }
  CMat& operator*=(cxd s) {
    for (auto& v : d_) v *= s;
    return *this;
  }

  friend CMat operator+(CMat a, const CMat& b) { return a += b; }
  friend CMat operator-(CMat a, const CMat& b) { return a -= b; }
  friend CMat operator*(cxd s, CMat a) { return a *= s; }

  double norm_fro() const {
    double s = 0;
    for (auto v : d_) s += std::norm(v);
    return std::sqrt(s);
  }
  double norm_max() const {
    double m = 0;
    for (auto v : d_) m = std::max(m, std::abs(v));
    return m;
  }
  cxd trace() const {
    cxd t = 0;
    for (int i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
  }

 private:
  void check_same_shape(const CMat& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw std::invalid_argument("shape mismatch");
  }
  int rows_ = 0;
  int cols_ = 0;
  std::vector<cxd> d_;
};

inline bool is_hermitian(const CMat& a, double rel_tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  double scale = std::max(a.norm_max(), 1e-300);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = i; j < a.cols(); ++j)
      if (std::abs(a(i, j) - std::conj(a(j, i))) > rel_tol * scale) return false;
  return true;
}

inline CMat symmetrize(const CMat& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("symmetrize: not square");
  CMat r(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) r(i, j) = 0.5 * (a(i, j) + std::conj(a(j, i)));
  return r;
}

// Profile-aware product; every entry is one qdot. Adds rows*cols*inner
// complex multiply-adds to the flop tally.
inline CMat matmul(const CMat& a, const CMat& b, const Profile& p = Profile::fp64(),
                   AccumulatorPolicy acc = AccumulatorPolicy::Wide) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dims disagree");
  CMat bt = b.transpose_conj_free();  // row-major access to b's columns
  CMat r(a.rows(), b.cols());
  std::vector<cxd> arow(a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    auto ar = a.row(i);
    for (int k = 0; k < a.cols(); ++k) arow[k] = std::conj(ar[k]);
    for (int j = 0; j < b.cols(); ++j)
      r(i, j) = qdot(std::span<const cxd>(arow), bt.row(j), p, acc);
  }
  return r;
}

inline std::vector<cxd> matvec(const CMat& a, const std::vector<cxd>& x,
                               const Profile& p = Profile::fp64(),
                               AccumulatorPolicy acc = AccumulatorPolicy::Wide) {
  if (a.cols() != int(x.size())) throw std::invalid_argument("matvec: dims disagree");
  std::vector<cxd> y(a.rows());
  std::vector<cxd> conj_row(a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (int k = 0; k < a.cols(); ++k) conj_row[k] = std::conj(r[k]);
    y[i] = qdot(std::span<const cxd>(conj_row), std::span<const cxd>(x), p, acc);
  }
  return y;
}

// y = x + alpha*d, elementwise under the profile.
inline std::vector<cxd> qaxpy(const std::vector<cxd>& x, cxd alpha,
                              const std::vector<cxd>& d, const Profile& p) {
  if (x.size() != d.size()) throw std::invalid_argument("qaxpy: length mismatch");
  flops_add(x.size());
  std::vector<cxd> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = quantize(x[i] + alpha * d[i], p);
  return y;
}

// FP64 LU with partial pivoting: X solving A X = B.
inline CMat lu_solve(CMat a, CMat b) {
  if (a.rows() != a.cols() || a.rows() != b.rows())
    throw std::invalid_argument("lu_solve: dims disagree");
  const int n = a.rows();
  std::vector<int> piv(n);
  for (int k = 0; k < n; ++k) {
    int pr = k;
    double best = std::abs(a(k, k));
    for (int i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > best) { best = std::abs(a(i, k)); pr = i; }
    if (best == 0.0) throw std::runtime_error("lu_solve: singular matrix");
    piv[k] = pr;
    if (pr != k) {
      for (int j = 0; j < n; ++j) std::swap(a(k, j), a(pr, j));
      for (int j = 0; j < b.cols(); ++j) std::swap(b(k, j), b(pr, j));
    }
    cxd inv_pivot = 1.0 / a(k, k);
    for (int i = k + 1; i < n; ++i) {
      cxd l = a(i, k) * inv_pivot;
      a(i, k) = l;
      for (int j = k + 1; j < n; ++j) a(i, j) -= l * a(k, j);
      for (int j = 0; j < b.cols(); ++j) b(i, j) -= l * b(k, j);
    }
  }
  for (int k = n - 1; k >= 0; --k) {
    cxd inv_pivot = 1.0 / a(k, k);
    for (int j = 0; j < b.cols(); ++j) {
      cxd s = b(k, j);
      for (int i = k + 1; i < n; ++i) s -= a(k, i) * b(i, j);
      b(k, j) = s * inv_pivot;
    }
  }
  return b;
}

inline CMat lu_inverse(const CMat& a) { return lu_solve(a, CMat::identity(a.rows())); }

// --- serialization -------------------------------------------------------
// Little-endian blob: magic "CMB1", u32 rows, u32 cols, then rows*cols
// interleaved (re, im) doubles.

inline void save_blob(const CMat& m, std::ostream& os) {
  os.write("CMB1", 4);
  std::uint32_t r = m.rows(), c = m.cols();
  os.write(reinterpret_cast<const char*>(&r), 4);
  os.write(reinterpret_cast<const char*>(&c), 4);
  for (auto v : m.data()) {
    double re = v.real(), im = v.imag();
    os.write(reinterpret_cast<const char*>(&re), 8);
    os.write(reinterpret_cast<const char*>(&im), 8);
  }
}

inline CMat load_blob(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "CMB1") throw std::runtime_error("bad matrix blob");
  std::uint32_t r = 0, c = 0;
  is.read(reinterpret_cast<char*>(&r), 4);
  is.read(reinterpret_cast<char*>(&c), 4);
  CMat m{int(r), int(c)};
  for (auto& v : m.data()) {
    double re, im;
    is.read(reinterpret_cast<char*>(&re), 8);
    is.read(reinterpret_cast<char*>(&im), 8);
    v = {re, im};
  }
  if (!is) throw std::runtime_error("truncated matrix blob");
  return m;
}

inline void save_blob(const CMat& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  save_blob(m, f);
}
inline CMat load_blob(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return load_blob(f);
}

inline std::string to_csv(const CMat& m) {
  std::ostringstream os;
  char buf[64];
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g%+.17gi", m(i, j).real(), m(i, j).imag());
      os << (j ? "," : "") << buf;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace ltbf
