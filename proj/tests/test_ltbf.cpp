#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ltbf/ltbf.hpp"

using namespace ltbf;

namespace {

std::mt19937_64 rng(2718);

cxd randc() {
  std::normal_distribution<double> n(0.0, 1.0);
  return {n(rng), n(rng)};
}

std::vector<cxd> unit_vec(int n) {
  std::vector<cxd> u(n);
  double norm = 0;
  for (auto& x : u) {
    x = randc();
    norm += std::norm(x);
  }
  norm = std::sqrt(norm);
  for (auto& x : u) x /= norm;
  return u;
}

CMat outer(const std::vector<cxd>& u, double scale = 1.0) {
  CMat m(int(u.size()), int(u.size()));
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < u.size(); ++j) m(int(i), int(j)) = scale * u[i] * std::conj(u[j]);
  return m;
}

CMat random_cov(int n, int rank) {
  CMat m(n, n);
  for (int k = 0; k < rank; ++k) m += outer(unit_vec(n));
  return symmetrize(m);
}

// orthogonal projector onto the row space of g
CMat row_space_projector(const CMat& g) {
  CMat gram = symmetrize(matmul(g, g.adjoint()));
  return symmetrize(matmul(matmul(g.adjoint(), lu_inverse(gram)), g));
}

double row_space_distance(const CMat& a, const CMat& b) {
  return (row_space_projector(a) - row_space_projector(b)).norm_fro();
}

}  // namespace

TEST_CASE("assemble_q fixtures") {
  // no users, interferer only: the estimate's identity is not double counted
  CMat qv = CMat::identity(4);
  qv(0, 0) += 9.0;
  CMat q = assemble_q({}, {}, &qv);
  CHECK((q - qv).norm_fro() <= 1e-14);

  // rank-1 user at weight beta: spectrum {1 + beta, 1, ..., 1}
  const int n = 6;
  auto u = unit_vec(n);
  CMat agg = assemble_q({outer(u)}, {5.0});
  EigH e = hermitian_eig(agg);
  CHECK(e.values[0] == doctest::Approx(6.0).epsilon(1e-12));
  for (int i = 1; i < n; ++i) CHECK(e.values[i] == doctest::Approx(1.0).epsilon(1e-12));

  // dimensions and sizes are validated
  CHECK_THROWS(assemble_q({}, {}));
  CHECK_THROWS(assemble_q({CMat::identity(3)}, {1.0, 2.0}));
  CHECK_THROWS(assemble_q({CMat::identity(3), CMat::identity(4)}, {1.0, 1.0}));
}

TEST_CASE("exact_projection fixtures") {
  const int n = 8;
  // Q = I: the projection is the dominant eigenspace of Qi
  auto u = unit_vec(n);
  CMat qi = outer(u, 4.0) + outer(unit_vec(n), 0.25);
  CMat g = exact_projection(symmetrize(qi), CMat::identity(n), 1);
  REQUIRE(g.rows() == 1);
  EigH e = hermitian_eig(symmetrize(qi));
  cxd dot = 0;
  double gn = 0;
  for (int k = 0; k < n; ++k) {
    dot += g(0, k) * e.vectors(k, 0);  // row convention is conjugated
    gn += std::norm(g(0, k));
  }
  CHECK(std::abs(dot) == doctest::Approx(std::sqrt(gn)).epsilon(1e-9));

  // r = N: G^H G recovers Q^{-1} regardless of Qi
  CMat q = assemble_q({random_cov(n, 2)}, {3.0});
  CMat gf = exact_projection(random_cov(n, 3), q, n);
  CHECK((matmul(gf.adjoint(), gf) - symmetrize(lu_inverse(q))).norm_fro() <= 1e-9);

  CHECK_THROWS(exact_projection(qi, CMat::identity(n), 0));
  CHECK_THROWS(exact_projection(qi, CMat::identity(n), n + 1));
}

TEST_CASE("exact_projection matches a dense literal oracle") {
  const int n = 6, r = 2;
  CMat qi = random_cov(n, 3);
  CMat q = assemble_q({qi, random_cov(n, 2)}, {2.0, 1.0});
  CMat g = exact_projection(qi, q, r);

  // oracle: right singular vectors of B = Qi^{1/2} Q^{-1/2} via the
  // augmented Hermitian embedding [[0, B], [B^H, 0]]
  CMat s = invsqrtm_psd(q);
  CMat b = matmul(sqrtm_psd(qi), s);
  CMat aug(2 * n, 2 * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      aug(i, n + j) = b(i, j);
      aug(n + i, j) = std::conj(b(j, i));
    }
  EigH ea = hermitian_eig(aug);
  CMat vr(r, n);  // rows: dominant right singular vectors
  for (int k = 0; k < r; ++k) {
    double norm = 0;
    for (int i = 0; i < n; ++i) norm += std::norm(ea.vectors(n + i, k));
    norm = std::sqrt(norm);
    for (int i = 0; i < n; ++i) vr(k, i) = std::conj(ea.vectors(n + i, k)) / norm;
  }
  CMat g_oracle = matmul(vr, s);
  CHECK(row_space_distance(g, g_oracle) <= 1e-6);
}

TEST_CASE("approx_projection with the exact method reproduces exact_projection") {
  const int n = 8, r = 2;
  CMat qi = random_cov(n, 3);
  CMat q = assemble_q({qi, random_cov(n, 2)}, {4.0, 2.0});
  SolveStatus status;
  CMat ga = approx_projection(qi, q, r, InversionSpec{}, &status);
  CMat ge = exact_projection(qi, q, r);
  CHECK(row_space_distance(ga, ge) <= 1e-8);
  CHECK(status.ok());

  // a generous CG budget in FP64 lands on the same subspace
  InversionSpec cg;
  cg.method = InvMethod::CG;
  cg.order = n;
  CHECK(row_space_distance(approx_projection(qi, q, r, cg), ge) <= 1e-6);
}

TEST_CASE("interference_basis fixtures") {
  const int n = 5;
  CMat qv = CMat::identity(n);
  qv(0, 0) += 9.0;
  CMat hv = interference_basis(qv, 1);
  REQUIRE(hv.rows() == n);
  REQUIRE(hv.cols() == 1);
  CHECK(std::abs(hv(0, 0) - cxd{3.0, 0.0}) <= 1e-12);
  for (int i = 1; i < n; ++i) CHECK(std::abs(hv(i, 0)) <= 1e-12);

  // exact rank-2 interferer: q = 2 reconstructs the stripped covariance
  auto u1 = unit_vec(n);
  auto u2 = unit_vec(n);
  CMat stripped = outer(u1, 8.0) + outer(u2, 2.0);
  CMat qv2 = symmetrize(stripped) + CMat::identity(n);
  CMat hv2 = interference_basis(qv2, 2);
  CHECK((matmul(hv2, hv2.adjoint()) - symmetrize(stripped)).norm_fro() <=
        1e-10 * stripped.norm_fro());

  // Eckart-Young: rank-1 truncation error equals the tail spectrum
  CMat hv1 = interference_basis(qv2, 1);
  EigH es = hermitian_eig(symmetrize(stripped));
  double resid = (symmetrize(stripped) - matmul(hv1, hv1.adjoint())).norm_fro();
  double tail = 0;
  for (std::size_t i = 1; i < es.values.size(); ++i) tail += es.values[i] * es.values[i];
  CHECK(resid == doctest::Approx(std::sqrt(tail)).epsilon(1e-9));

  // q above the numerical rank pads and warns
  bool warn = false;
  interference_basis(qv, 3, &warn);
  CHECK(warn);
  CHECK_THROWS(interference_basis(qv, 0));
  CHECK_THROWS(interference_basis(qv, n));
}

TEST_CASE("auto_nulling_rank thresholds") {
  const int n = 6;
  CMat qv = CMat::identity(n);
  qv(0, 0) += 10.0;
  qv(1, 1) += 0.1;
  CHECK(auto_nulling_rank(qv, 0.90) == 1);
  CHECK(auto_nulling_rank(qv, 0.995) == 2);
  CHECK(auto_nulling_rank(CMat::identity(n), 0.9) == 1);  // degenerate: no energy
}

TEST_CASE("nulling projector identities and Gram-Schmidt oracle") {
  const int n = 10, q = 3;
  CMat hv(n, q);
  for (auto& v : hv.data()) v = randc();
  CMat p = nulling_projector(hv);

  CHECK(matmul(p, hv).norm_fro() <= 1e-10 * hv.norm_fro());  // P H_v = 0
  CHECK((matmul(p, p) - p).norm_fro() <= 1e-10);             // idempotent
  CHECK(is_hermitian(p));

  // oracle: P = I - U U^H with U an orthonormalized basis of span(H_v)
  CMat u = hv;
  for (int j = 0; j < q; ++j) {
    auto cj = u.col(j);
    for (int k = 0; k < j; ++k) {
      auto ck = u.col(k);
      cxd proj = 0;
      for (int i = 0; i < n; ++i) proj += std::conj(ck[i]) * cj[i];
      for (int i = 0; i < n; ++i) cj[i] -= proj * ck[i];
    }
    double norm = 0;
    for (auto v : cj) norm += std::norm(v);
    norm = std::sqrt(norm);
    for (auto& v : cj) v /= norm;
    u.set_col(j, cj);
  }
  CMat p_oracle = CMat::identity(n);
  p_oracle -= matmul(u, u.adjoint());
  CHECK((p - symmetrize(p_oracle)).norm_fro() <= 1e-9);

  // vectors orthogonal to the basis pass through unchanged
  auto x = unit_vec(n);
  CMat px = matmul(p, CMat::col_vector(x));
  CMat ppx = matmul(p, px);
  CHECK((ppx - px).norm_fro() <= 1e-10);
}

TEST_CASE("nulled_user_covariance equals the direct projection") {
  const int n = 32, q = 3;
  CMat qi = random_cov(n, 4);
  CMat hv(n, q);
  for (auto& v : hv.data()) v = randc();
  CMat m = gram_inverse(hv);

  flops_reset();
  CMat fast = nulled_user_covariance(qi, hv, m);
  std::uint64_t used = flops_read();

  CMat p = nulling_projector(hv);
  CMat direct = symmetrize(matmul(matmul(p, qi), p.adjoint()));
  CHECK((fast - direct).norm_fro() <= 1e-10 * direct.norm_fro());

  // the expansion stays O(q N^2): 3 N^2 q + 3 N q^2 + 2 q^3 multiply-adds
  std::uint64_t model = 3ull * n * n * q + 3ull * n * q * q + 2ull * q * q * q;
  CHECK(used == model);
  CHECK(double(used) <= 1.15 * 3.0 * q * n * n);

  CHECK_THROWS(nulled_user_covariance(qi, CMat(n + 1, q), m));
}

TEST_CASE("reduced_covariance fixtures") {
  const int n = 8;
  auto v = unit_vec(n);
  CMat contrib = outer(v, 10000.0);

  // interferer-only aggregate reduces to the identity
  CMat q = CMat::identity(n);
  q += contrib;
  CMat r = reduced_covariance(symmetrize(q), contrib, 1);
  CHECK((r - CMat::identity(n)).norm_fro() <= 1e-9);

  // with users present: conditioning collapses by the interferer factor
  CMat q_users = assemble_q({random_cov(n, 2), random_cov(n, 2)}, {10.0, 5.0});
  CMat full = q_users + contrib;
  double cond_full = condition_number(symmetrize(full));
  double cond_red = condition_number(reduced_covariance(symmetrize(full), contrib, 1));
  CHECK(cond_full >= 100.0 * cond_red);

  // eigenvalues never drop below the pinned noise floor
  CMat over = contrib;
  over *= cxd{1.5, 0.0};  // overestimated subtraction
  bool mismatch = false;
  CMat r2 = reduced_covariance(symmetrize(q), over, 1, &mismatch);
  EigH e = hermitian_eig(r2);
  CHECK(e.values.back() >= 1.0 - 1e-6 - 1e-12);
  CHECK(!mismatch);  // only one eigenvalue floored at rank 1

  // subtracting a wrong, higher-rank contribution warns
  CMat wrong = contrib + outer(unit_vec(n), 500.0) + outer(unit_vec(n), 500.0);
  bool mismatch2 = false;
  reduced_covariance(CMat::identity(n), symmetrize(wrong), 1, &mismatch2);
  CHECK(mismatch2);
}

TEST_CASE("build_beamformers end to end") {
  const int n = 16, r = 1;
  auto v = unit_vec(n);
  // user covariances orthogonal to the interferer direction, so the
  // reduced design matrix leaves v untouched and nulling rejects exactly
  CMat p_perp = CMat::identity(n);
  p_perp -= outer(v);
  CovarianceSet covs;
  for (int i = 0; i < 3; ++i) {
    // rank-1 per user: a well-separated dominant direction keeps the r = 1
    // projection stable under approximate inversion
    CMat c = random_cov(n, 1);
    covs.q_ue.push_back(symmetrize(matmul(matmul(p_perp, c), p_perp)));
    covs.alpha_ue.push_back(4.0);
  }
  CMat qv = outer(v, 1000.0) + CMat::identity(n);
  covs.q_v = symmetrize(qv);
  covs.aggregate = assemble_q(covs.q_ue, covs.alpha_ue, &*covs.q_v);

  InversionSpec exact;
  NullingConfig off;
  NullingConfig on;
  on.enabled = true;
  on.nulling_rank = 1;

  BeamformerSet plain = build_beamformers(covs, r, exact, off);
  BeamformerSet nulled = build_beamformers(covs, r, exact, on);

  REQUIRE(plain.g_ue.size() == 3);
  REQUIRE(nulled.g_ue.size() == 3);
  for (const auto& g : nulled.g_ue) {
    CHECK(g.rows() == r);
    CHECK(g.cols() == n);
  }

  // nulling removes the dominant interferer from the design matrix
  CHECK(plain.cond_q == plain.cond_q_full);
  CHECK(nulled.cond_q_full == plain.cond_q_full);
  CHECK(nulled.cond_q_full >= 100.0 * nulled.cond_q);

  // nulled beamformers reject the interferer direction
  for (const auto& g : nulled.g_ue) {
    CMat gv = matmul(g, CMat::col_vector(v));
    CHECK(gv.norm_fro() <= 1e-6 * g.norm_fro());
  }

  // the energy-threshold auto rank picks the same single dimension
  NullingConfig auto_rank = on;
  auto_rank.energy_threshold = 0.9;
  BeamformerSet auto_set = build_beamformers(covs, r, exact, auto_rank);
  CHECK(row_space_distance(auto_set.g_ue[0], nulled.g_ue[0]) <= 1e-9);

  // approximate inversion under nulling stays close to the exact subspace
  InversionSpec cg4 = InversionSpec::parse_method("cg:4");
  cg4.profile = Profile::fp32();
  BeamformerSet approx_nulled = build_beamformers(covs, r, cg4, on);
  CHECK(approx_nulled.flops > 0);
  CHECK(row_space_distance(approx_nulled.g_ue[0], nulled.g_ue[0]) <= 0.1);

  CovarianceSet no_v = covs;
  no_v.q_v.reset();
  CHECK_THROWS(build_beamformers(no_v, r, exact, on));
}
