// Long-term beamforming construction: aggregate covariance, exact and
// approximate capacity-bound projections, low-rank interference basis
// extraction, null-space projector, the O(q N^2) nulled-covariance
// expansion and the interference-reduced covariance.
#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "ltbf/eig.hpp"
#include "ltbf/inversion.hpp"
#include "ltbf/matrix.hpp"

namespace ltbf {

struct NullingConfig {
  bool enabled = false;
  int nulling_rank = 3;          // q
  double energy_threshold = -1;  // >0 selects auto-rank: smallest q capturing this fraction
};

struct CovarianceSet {
  std::vector<CMat> q_ue;        // per-UE covariance estimates
  std::vector<double> alpha_ue;  // per-UE effective SNR, linear
  std::optional<CMat> q_v;       // interferer covariance estimate (includes noise identity)
  CMat aggregate;                // Q = I + sum alpha_i Q_i + interferer contribution
};

struct BeamformerSet {
  std::vector<CMat> g_ue;  // r x N_rx per UE
  int rank = 0;            // r
  InversionSpec spec;
  NullingConfig nulling;
  double cond_q = 0.0;       // condition number of the matrix actually inverted
  double cond_q_full = 0.0;  // condition number of the non-reduced aggregate
  SolveStatus status;
  std::uint64_t flops = 0;  // complex ops spent on inversion + nulling algebra
};

// Q = I + sum_i alpha_i Q_i (+ interferer term when present). The q_v
// estimate already carries the noise identity, so its identity is removed
// before stacking.
inline CMat assemble_q(const std::vector<CMat>& q_ue, const std::vector<double>& alpha,
                       const CMat* q_v = nullptr) {
  if (q_ue.size() != alpha.size()) throw std::invalid_argument("assemble_q: size mismatch");
  int n = q_v ? q_v->rows() : (q_ue.empty() ? 0 : q_ue[0].rows());
  if (n == 0) throw std::invalid_argument("assemble_q: cannot infer dimension");
  CMat q = CMat::identity(n);
  for (std::size_t i = 0; i < q_ue.size(); ++i) {
    if (q_ue[i].rows() != n || q_ue[i].cols() != n)
      throw std::invalid_argument("assemble_q: dim mismatch");
    CMat term = q_ue[i];
    term *= cxd{alpha[i], 0.0};
    q += term;
  }
  if (q_v) {
    q += *q_v;
    q -= CMat::identity(n);  // the estimate's own noise identity
  }
  return symmetrize(q);
}

// G_i = [Qi^{1/2} Q^{-1/2}]_r Q^{-1/2}, all factors in FP64.
inline CMat exact_projection(const CMat& qi, const CMat& q, int r) {
  if (r < 1 || r > q.rows()) throw std::invalid_argument("exact_projection: bad rank");
  CMat s = invsqrtm_psd(q);
  CMat b = matmul(sqrtm_psd(qi), s);
  return matmul(top_r_right_singular(b, r), s);
}

// Same construction with the inverse computed under the sweep profile;
// the square root of the (symmetrized, floored) approximate inverse is
// extracted in FP64.
inline CMat approx_projection(const CMat& qi, const CMat& q, int r, const InversionSpec& spec,
                              SolveStatus* status_out = nullptr) {
  auto [a, status] = approx_inverse(q, spec);
  if (status_out) *status_out = status;
  CMat s = sqrtm_psd(a);
  CMat b = matmul(sqrtm_psd(qi), s);
  return matmul(top_r_right_singular(b, r), s);
}

// Variant reusing a precomputed S ~= Q^{-1/2}; the shared inverse is
// computed once and read by every UE.
inline CMat projection_from_invsqrt(const CMat& qi, const CMat& inv_sqrt, int r) {
  CMat b = matmul(sqrtm_psd(qi), inv_sqrt);
  return matmul(top_r_right_singular(b, r), inv_sqrt);
}

// H_v = U_q diag(sqrt(lambda_q)) from the top-q eigenpairs of the
// noise-stripped interferer covariance (Q_v - I, negatives clipped).
// q above the numerical rank pads from the remaining eigenvectors and
// flags a warning.
inline CMat interference_basis(const CMat& q_v, int q, bool* rank_warning = nullptr) {
  const int n = q_v.rows();
  if (q < 1 || q >= n) throw std::invalid_argument("interference_basis: bad nulling rank");
  CMat stripped = q_v;
  stripped -= CMat::identity(n);
  EigH e = hermitian_eig(symmetrize(stripped));
  const double lmax = std::max(e.values.front(), 0.0);
  CMat hv(n, q);
  for (int j = 0; j < q; ++j) {
    const double l = std::max(e.values[j], 0.0);
    if (l <= 1e-12 * std::max(lmax, 1.0) && rank_warning) *rank_warning = true;
    const double scale = std::sqrt(l);
    for (int i = 0; i < n; ++i) hv(i, j) = scale * e.vectors(i, j);
  }
  return hv;
}

// Smallest rank capturing `threshold` of the stripped spectrum's energy.
inline int auto_nulling_rank(const CMat& q_v, double threshold) {
  const int n = q_v.rows();
  CMat stripped = q_v;
  stripped -= CMat::identity(n);
  EigH e = hermitian_eig(symmetrize(stripped));
  double total = 0;
  for (double l : e.values) total += std::max(l, 0.0);
  if (total <= 0) return 1;
  double acc = 0;
  for (int j = 0; j < n - 1; ++j) {
    acc += std::max(e.values[j], 0.0);
    if (acc >= threshold * total) return j + 1;
  }
  return n - 1;
}

// M = (H_v^H H_v)^{-1}; q x q direct inverse, regularized with a warning
// when the Gram matrix is numerically singular.
inline CMat gram_inverse(const CMat& hv, bool* regularized = nullptr) {
  CMat gram = symmetrize(matmul(hv.adjoint(), hv));
  EigH e = hermitian_eig(gram);
  const double lmax = std::max(e.values.front(), 0.0);
  if (e.values.back() <= 1e-12 * std::max(lmax, 1.0)) {
    if (regularized) *regularized = true;
    CMat reg = CMat::identity(gram.rows());
    reg *= cxd{1e-12 * std::max(lmax, 1.0), 0.0};
    gram += reg;
  }
  return symmetrize(lu_inverse(gram));
}

// P_v = I - H_v M H_v^H.
inline CMat nulling_projector(const CMat& hv, bool* regularized = nullptr) {
  CMat m = gram_inverse(hv, regularized);
  CMat p = matmul(matmul(hv, m), hv.adjoint());
  p *= cxd{-1.0, 0.0};
  p += CMat::identity(hv.rows());
  return symmetrize(p);
}

// Four-term expansion of P_v Q_i P_v^H using only N_rx x q products.
inline CMat nulled_user_covariance(const CMat& qi, const CMat& hv, const CMat& m) {
  const int n = qi.rows();
  if (hv.rows() != n || m.rows() != hv.cols() || m.cols() != hv.cols())
    throw std::invalid_argument("nulled_user_covariance: dim mismatch");
  CMat a = matmul(qi, hv);                     // Q_i H_v               (N^2 q)
  CMat f = matmul(a, m);                       // Q_i H_v M             (N q^2)
  CMat term2 = matmul(f, hv.adjoint());        // Q_i H_v M H_v^H       (N^2 q)
  CMat g4 = matmul(hv.adjoint(), a);           // H_v^H Q_i H_v         (N q^2)
  CMat k = matmul(matmul(m, g4), m);           // M (.) M               (2 q^3)
  CMat term4 = matmul(matmul(hv, k), hv.adjoint());  // N q^2 + N^2 q
  CMat out = qi;
  out -= term2;
  out -= term2.adjoint();
  out += term4;
  return symmetrize(out);
}

// R_v = Q - interferer contribution, symmetrized with the noise floor
// pinned: eigenvalues clamped below at 1 - 1e-6. Flooring more than q
// eigenvalues indicates estimation mismatch.
inline CMat reduced_covariance(const CMat& q, const CMat& qv_contrib, int q_rank = 0,
                               bool* mismatch_warning = nullptr) {
  CMat r = q;
  r -= qv_contrib;
  r = symmetrize(r);
  EigH e = hermitian_eig(r);
  const double floor_val = 1.0 - 1e-6;
  int floored = 0;
  for (double l : e.values)
    if (l < floor_val) ++floored;
  if (mismatch_warning && q_rank > 0 && floored > q_rank) *mismatch_warning = true;
  if (floored == 0) return r;
  return symmetrize(spectral_map(e, [&](double l) { return std::max(l, floor_val); }));
}

// Method-independent part of the construction, computed once per
// covariance set and shared across inversion methods/precisions. With
// nulling: H_v, the O(q N^2) nulled per-UE covariances and the reduced
// design matrix R_v; without: the aggregate itself.
struct BeamformerDesign {
  CMat design;                      // matrix the inversion step acts on
  std::vector<CMat> user_cov_sqrt;  // FP64 square roots of the numerators
  CMat hv;                          // interference basis (empty when not nulling)
  CMat gram_inv;                    // M = (H_v^H H_v)^{-1}
  double cond_design = 0;
  double cond_full = 0;
  std::uint64_t prep_flops = 0;  // nulling algebra op count
  NullingConfig nulling;
};

inline BeamformerDesign prepare_design(const CovarianceSet& covs, const NullingConfig& nulling) {
  BeamformerDesign d;
  d.nulling = nulling;
  d.cond_full = condition_number(covs.aggregate);

  const std::uint64_t flops_start = flops_read();
  d.design = covs.aggregate;
  std::vector<CMat> user_covs = covs.q_ue;

  if (nulling.enabled) {
    if (!covs.q_v) throw std::invalid_argument("nulling requested without interferer estimate");
    int q_rank = nulling.nulling_rank;
    if (nulling.energy_threshold > 0)
      q_rank = auto_nulling_rank(*covs.q_v, nulling.energy_threshold);
    d.nulling.nulling_rank = q_rank;
    d.hv = interference_basis(*covs.q_v, q_rank);
    d.gram_inv = gram_inverse(d.hv);
    for (std::size_t i = 0; i < user_covs.size(); ++i)
      user_covs[i] = nulled_user_covariance(covs.q_ue[i], d.hv, d.gram_inv);
    // LTBF runs on the projected signal, so the reduced design matrix is the
    // aggregate covariance of that signal: I + sum alpha_i Qhat_i. Building it
    // from the unprojected covariances would whiten against interference the
    // projector has already removed and leave inter-user terms mismatched.
    d.design = assemble_q(user_covs, covs.alpha_ue);
  }
  d.prep_flops = flops_read() - flops_start;

  d.cond_design = condition_number(d.design);
  d.user_cov_sqrt.reserve(user_covs.size());
  for (const auto& uc : user_covs) d.user_cov_sqrt.push_back(sqrtm_psd(symmetrize(uc)));
  return d;
}

// Inversion under the sweep profile plus the per-UE projections, on a
// prepared (possibly shared) design.
inline BeamformerSet build_beamformers(const BeamformerDesign& d, int r,
                                       const InversionSpec& spec) {
  BeamformerSet out;
  out.rank = r;
  out.spec = spec;
  out.nulling = d.nulling;
  out.cond_q_full = d.cond_full;
  out.cond_q = d.cond_design;

  const std::uint64_t flops_start = flops_read();
  auto [a, status] = approx_inverse(d.design, spec);
  out.status = status;
  CMat inv_sqrt = sqrtm_psd(a);
  out.flops = d.prep_flops + (flops_read() - flops_start);

  out.g_ue.reserve(d.user_cov_sqrt.size());
  for (const auto& sq : d.user_cov_sqrt) {
    CMat b = matmul(sq, inv_sqrt);
    CMat g = matmul(top_r_right_singular(b, r), inv_sqrt);
    // nulling operates on the projected signal: the effective beamformer is
    // G P_v, applied as G - ((G H_v) M) H_v^H in O(r q N)
    if (d.nulling.enabled) g -= matmul(matmul(matmul(g, d.hv), d.gram_inv), d.hv.adjoint());
    out.g_ue.push_back(g);
  }
  return out;
}

inline BeamformerSet build_beamformers(const CovarianceSet& covs, int r,
                                       const InversionSpec& spec, const NullingConfig& nulling) {
  return build_beamformers(prepare_design(covs, nulling), r, spec);
}

}  // namespace ltbf
