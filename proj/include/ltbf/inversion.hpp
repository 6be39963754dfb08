// Hardware-friendly approximate inverses of the aggregate covariance:
// per-column conjugate gradient with a fixed iteration count and a scaled
// Neumann polynomial series, both executed through the arith layer under
// the sweep profile.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "ltbf/eig.hpp"
#include "ltbf/matrix.hpp"

namespace ltbf {

enum class InvMethod { Exact, CG, Poly };
enum class PolyScaling { SpectralBound, TraceBound };

struct InversionSpec {
  InvMethod method = InvMethod::Exact;
  int order = 1;  // CG iterations k or polynomial degree d
  Profile profile = Profile::fp64();
  PolyScaling scaling = PolyScaling::SpectralBound;
  AccumulatorPolicy acc = AccumulatorPolicy::Wide;

  std::string method_name() const {
    switch (method) {
      case InvMethod::Exact: return "exact";
      case InvMethod::CG: return "cg:" + std::to_string(order);
      case InvMethod::Poly: return "poly:" + std::to_string(order);
    }
    return "?";
  }

  // "exact", "cg:4", "poly:6"
  static InversionSpec parse_method(const std::string& s) {
    InversionSpec spec;
    if (s == "exact") {
      spec.method = InvMethod::Exact;
      return spec;
    }
    auto colon = s.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("bad method string: " + s);
    const std::string head = s.substr(0, colon);
    const int order = std::stoi(s.substr(colon + 1));
    if (order < 1) throw std::invalid_argument("method order must be >= 1");
    spec.order = order;
    if (head == "cg") spec.method = InvMethod::CG;
    else if (head == "poly") spec.method = InvMethod::Poly;
    else throw std::invalid_argument("bad method string: " + s);
    return spec;
  }
};

struct SolveStatus {
  bool stagnated = false;   // quantized curvature underflowed to zero
  bool divergent = false;   // polynomial spectral radius >= 1
  std::uint64_t flops = 0;  // complex multiply-adds

  bool ok() const { return !stagnated && !divergent; }
};

// Plain Hermitian CG from x0 = 0, exactly k iterations, no early exit.
// A quantized curvature of zero flags stagnation and returns the current
// iterate.
inline std::vector<cxd> cg_solve(const CMat& q, const std::vector<cxd>& b, int k,
                                 const Profile& p, SolveStatus* status = nullptr,
                                 AccumulatorPolicy acc = AccumulatorPolicy::Wide) {
  if (q.rows() != q.cols() || q.rows() != int(b.size()))
    throw std::invalid_argument("cg_solve: dims disagree");
  if (k < 1) throw std::invalid_argument("cg_solve: k must be >= 1");
  const int n = q.rows();

  std::vector<cxd> x(n, cxd{0, 0});
  std::vector<cxd> r(n);
  for (int i = 0; i < n; ++i) r[i] = quantize(b[i], p);
  std::vector<cxd> dir = r;
  cxd rs = qdot(r, r, p, acc);

  for (int it = 0; it < k; ++it) {
    std::vector<cxd> w = matvec(q, dir, p, acc);
    cxd curv = qdot(dir, w, p, acc);
    if (curv == cxd{0, 0}) {
      if (status) status->stagnated = true;
      break;
    }
    cxd alpha = quantize(rs / curv, p);
    flops_add(1);
    x = qaxpy(x, alpha, dir, p);
    r = qaxpy(r, -alpha, w, p);
    cxd rs_new = qdot(r, r, p, acc);
    if (it + 1 == k) break;
    if (rs == cxd{0, 0}) {
      if (status) status->stagnated = true;
      break;
    }
    cxd beta = quantize(rs_new / rs, p);
    flops_add(1);
    dir = qaxpy(r, beta, dir, p);
    rs = rs_new;
  }
  return x;
}

// Column-by-column solve of Q X = I, then symmetrization.
inline CMat cg_inverse(const CMat& q, int k, const Profile& p, SolveStatus* status = nullptr,
                       AccumulatorPolicy acc = AccumulatorPolicy::Wide) {
  const int n = q.rows();
  CMat x(n, n);
  for (int j = 0; j < n; ++j) {
    std::vector<cxd> e(n, cxd{0, 0});
    e[j] = 1.0;
    SolveStatus col;
    auto xj = cg_solve(q, e, k, p, &col, acc);
    if (status && col.stagnated) status->stagnated = true;
    x.set_col(j, xj);
  }
  return symmetrize(x);
}

// Scaled Neumann series c * sum_{j=0..d} (I - cQ)^j evaluated by Horner;
// d-1 matrix-matrix products under the profile. The scaling constant is a
// one-time FP64 design statistic.
inline CMat poly_inverse(const CMat& q, int d, const Profile& p,
                         PolyScaling scaling = PolyScaling::SpectralBound,
                         SolveStatus* status = nullptr,
                         AccumulatorPolicy acc = AccumulatorPolicy::Wide) {
  if (q.rows() != q.cols()) throw std::invalid_argument("poly_inverse: not square");
  if (d < 1) throw std::invalid_argument("poly_inverse: d must be >= 1");
  const int n = q.rows();

  EigH e = hermitian_eig(q);
  const double lmax = e.values.front();
  const double lmin = e.values.back();
  double c;
  if (scaling == PolyScaling::SpectralBound) {
    c = 2.0 / (lmax + std::max(lmin, 0.0));
  } else {
    const double mean_diag = q.trace().real() / n;
    c = 1.0 / (mean_diag + 1e-12);
  }
  const double rho = std::max(std::abs(1.0 - c * lmax), std::abs(1.0 - c * lmin));
  if (rho >= 1.0 && status) status->divergent = true;

  // T = I - cQ under the profile
  CMat t(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      cxd v = -c * q(i, j);
      if (i == j) v += 1.0;
      t(i, j) = quantize(v, p);
    }

  CMat s = CMat::identity(n);
  s += t;  // degree-1 partial sum, no product needed
  for (auto& v : s.data()) v = quantize(v, p);
  for (int j = 2; j <= d; ++j) {
    s = matmul(t, s, p, acc);
    s += CMat::identity(n);
    for (auto& v : s.data()) v = quantize(v, p);
  }
  for (auto& v : s.data()) v = quantize(c * v, p);
  return s;
}

// Dispatch plus the PSD repair every downstream square root relies on:
// symmetrize and floor eigenvalues at 1e-9.
inline std::pair<CMat, SolveStatus> approx_inverse(const CMat& q, const InversionSpec& spec) {
  SolveStatus status;
  const std::uint64_t start = flops_read();
  CMat a;
  switch (spec.method) {
    case InvMethod::Exact: a = symmetrize(lu_inverse(q)); break;
    case InvMethod::CG: a = cg_inverse(q, spec.order, spec.profile, &status, spec.acc); break;
    case InvMethod::Poly:
      a = poly_inverse(q, spec.order, spec.profile, spec.scaling, &status, spec.acc);
      a = symmetrize(a);
      break;
  }
  status.flops = flops_read() - start;
  EigH e = hermitian_eig(a);
  bool needs_floor = false;
  for (double l : e.values)
    if (l < 1e-9) { needs_floor = true; break; }
  if (needs_floor) a = symmetrize(spectral_map(e, [](double l) { return std::max(l, 1e-9); }));
  return {a, status};
}

}  // namespace ltbf
