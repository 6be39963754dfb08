// FP64 reference decompositions: cyclic Jacobi for complex Hermitian
// matrices, PSD square roots, dominant right-singular-vector selection and
// condition numbers. These always run in double precision; only the
// inversion step is subject to the sweep profile.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "ltbf/matrix.hpp"

namespace ltbf {

struct EigH {
  std::vector<double> values;  // real, descending
  CMat vectors;                // orthonormal columns, phase-normalized
};

namespace detail {

// Make the first entry with non-negligible magnitude real-positive.
inline void phase_normalize_col(CMat& v, int j) {
  const int n = v.rows();
  double scale = 0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(v(i, j)));
  if (scale == 0) return;
  for (int i = 0; i < n; ++i) {
    cxd e = v(i, j);
    if (std::abs(e) > 1e-12 * scale) {
      cxd ph = std::conj(e) / std::abs(e);
      for (int k = 0; k < n; ++k) v(k, j) *= ph;
      return;
    }
  }
}

inline double offdiag_norm(const CMat& a) {
  double s = 0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      if (i != j) s += std::norm(a(i, j));
  return std::sqrt(s);
}

}  // namespace detail

// Cyclic Jacobi on a Hermitian matrix. Eigenvalues descending,
// eigenvectors as columns of an (numerically) unitary matrix.
inline EigH hermitian_eig(const CMat& a_in, double herm_tol = 1e-10) {
  if (a_in.rows() != a_in.cols()) throw std::invalid_argument("hermitian_eig: not square");
  const int n = a_in.rows();
  if (n > 4096) throw std::invalid_argument("hermitian_eig: dimension above 4096");
  if (!is_hermitian(a_in, herm_tol))
    throw std::invalid_argument("hermitian_eig: input not Hermitian within tolerance");

  CMat a = symmetrize(a_in);
  CMat v = CMat::identity(n);
  const double fro = std::max(a.norm_fro(), std::numeric_limits<double>::min());
  const double stop = 1e-13 * fro;

  for (int sweep = 0; sweep < 60 && detail::offdiag_norm(a) > stop; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const cxd apq = a(p, q);
        const double mag = std::abs(apq);
        if (mag <= 1e-300) continue;
        const cxd u = apq / mag;  // phase of the pivot
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double tau = (aqq - app) / (2.0 * mag);
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // Unitary block G = [[u*c, u*s], [-s, c]]; A <- G^H A G, V <- V G.
        const cxd gpp = u * c, gpq = u * s;
        for (int k = 0; k < n; ++k) {
          const cxd akp = a(k, p), akq = a(k, q);
          a(k, p) = akp * gpp - s * akq;
          a(k, q) = akp * gpq + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const cxd apk = a(p, k), aqk = a(q, k);
          a(p, k) = std::conj(gpp) * apk - s * aqk;
          a(q, k) = std::conj(gpq) * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const cxd vkp = v(k, p), vkq = v(k, q);
          v(k, p) = vkp * gpp - s * vkq;
          v(k, q) = vkp * gpq + c * vkq;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> diag(n);
  for (int i = 0; i < n; ++i) diag[i] = a(i, i).real();
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return diag[i] > diag[j]; });

  EigH out;
  out.values.resize(n);
  out.vectors = CMat(n, n);
  for (int j = 0; j < n; ++j) {
    out.values[j] = diag[order[j]];
    for (int i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    detail::phase_normalize_col(out.vectors, j);
  }
  return out;
}

// V f(Lambda) V^H for a componentwise spectral map.
template <typename F>
inline CMat spectral_map(const EigH& e, F&& f) {
  const int n = e.vectors.rows();
  CMat scaled(n, n);
  for (int j = 0; j < n; ++j) {
    const double fj = f(e.values[j]);
    for (int i = 0; i < n; ++i) scaled(i, j) = e.vectors(i, j) * fj;
  }
  return matmul(scaled, e.vectors.adjoint());
}

inline void check_psd(const EigH& e, const char* who) {
  const double lmax = e.values.empty() ? 0.0 : std::max(e.values.front(), 0.0);
  for (double l : e.values)
    if (l < -1e-10 * std::max(lmax, 1.0))
      throw std::runtime_error(std::string(who) + ": matrix is not PSD");
}

inline CMat sqrtm_psd(const CMat& a) {
  EigH e = hermitian_eig(a);
  check_psd(e, "sqrtm_psd");
  return symmetrize(spectral_map(e, [](double l) { return std::sqrt(std::max(l, 0.0)); }));
}

// Inverse square root with eigenvalues clamped below at eig_floor before
// inversion. eig_floor < 0 selects the default 1e-6 * lambda_max.
inline CMat invsqrtm_psd(const CMat& a, double eig_floor = -1.0) {
  EigH e = hermitian_eig(a);
  check_psd(e, "invsqrtm_psd");
  const double lmax = e.values.empty() ? 0.0 : std::max(e.values.front(), 0.0);
  const double floor_val = eig_floor >= 0 ? eig_floor : 1e-6 * std::max(lmax, 1e-300);
  return symmetrize(
      spectral_map(e, [&](double l) { return 1.0 / std::sqrt(std::max(l, floor_val)); }));
}

// Rows are the r dominant right singular vectors of B (computed through
// B^H B), ties broken by the stable eigen-ordering and phase normalization.
inline CMat top_r_right_singular(const CMat& b, int r) {
  if (r < 1 || r > b.cols()) throw std::invalid_argument("top_r_right_singular: r out of range");
  EigH e = hermitian_eig(symmetrize(matmul(b.adjoint(), b)));
  CMat out(r, b.cols());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < b.cols(); ++j) out(i, j) = std::conj(e.vectors(j, i));
  // re-normalize row phases (conjugation flips the convention)
  for (int i = 0; i < r; ++i) {
    double scale = 0;
    for (int j = 0; j < b.cols(); ++j) scale = std::max(scale, std::abs(out(i, j)));
    for (int j = 0; j < b.cols(); ++j) {
      cxd v = out(i, j);
      if (std::abs(v) > 1e-12 * scale) {
        cxd ph = std::conj(v) / std::abs(v);
        for (int k = 0; k < b.cols(); ++k) out(i, k) *= ph;
        break;
      }
    }
  }
  return out;
}

// lambda_max / lambda_min; infinity sentinel when lambda_min <= 0.
inline double condition_number(const CMat& a) {
  EigH e = hermitian_eig(a);
  check_psd(e, "condition_number");
  if (e.values.empty()) return 1.0;
  const double lmin = e.values.back();
  if (lmin <= 0.0) return std::numeric_limits<double>::infinity();
  return e.values.front() / lmin;
}

}  // namespace ltbf
