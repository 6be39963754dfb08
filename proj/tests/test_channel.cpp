#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ltbf/channel.hpp"
#include "ltbf/eig.hpp"

using namespace ltbf;

namespace {

ScenarioConfig small_cfg() {
  ScenarioConfig cfg;
  cfg.geometry = {4, 4, 0.5};
  cfg.n_ue = 2;
  cfg.n_subcarriers = 16;
  cfg.n_srs = 8;
  cfg.seed = 99;
  return cfg;
}

double drop_distance(const ChannelDrop& a, const ChannelDrop& b) {
  double d = 0;
  for (int i = 0; i < a.cfg.n_ue; ++i)
    for (int n = 0; n < a.cfg.n_subcarriers; ++n)
      d = std::max(d, (a.ue_channels[i][n] - b.ue_channels[i][n]).norm_max());
  return d;
}

}  // namespace

TEST_CASE("steering vector basics") {
  ArrayGeometry g{4, 4, 0.5};
  auto broadside = steering_vector(g, 0.0, 0.0);
  for (auto v : broadside) CHECK(v == cxd{1.0, 0.0});

  auto a = steering_vector(g, 0.7, -0.3);
  double norm = 0;
  for (auto v : a) norm += std::norm(v);
  CHECK(norm == doctest::Approx(double(g.n_rx())));

  ArrayGeometry line{2, 1, 0.5};
  auto endfire = steering_vector(line, kPi / 2, 0.0);
  CHECK(endfire[0] == cxd{1.0, 0.0});
  CHECK(endfire[1].real() == doctest::Approx(-1.0));
  CHECK(endfire[1].imag() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("generate_drop determinism and flat single path") {
  auto cfg = small_cfg();
  ChannelDrop a = generate_drop(cfg, 3);
  ChannelDrop b = generate_drop(cfg, 3);
  CHECK(drop_distance(a, b) == 0.0);
  ChannelDrop c = generate_drop(cfg, 4);
  CHECK(drop_distance(a, c) > 0.0);

  cfg.paths_per_source = 1;  // zero delay -> frequency flat
  ChannelDrop flat = generate_drop(cfg, 0);
  for (int n = 1; n < cfg.n_subcarriers; ++n)
    CHECK((flat.ue_channels[0][n] - flat.ue_channels[0][0]).norm_max() <= 1e-14);
}

TEST_CASE("average channel power matches the path-power budget") {
  auto cfg = small_cfg();
  cfg.n_ue = 1;
  double acc = 0;
  const int n_drops = 800;
  for (int d = 0; d < n_drops; ++d) {
    ChannelDrop drop = generate_drop(cfg, d);
    double p = 0;
    for (int n = 0; n < cfg.n_subcarriers; ++n) {
      double f = drop.ue_channels[0][n].norm_fro();
      p += f * f;
    }
    acc += p / (cfg.n_subcarriers * cfg.geometry.n_rx());
  }
  CHECK(acc / n_drops == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("srs covariance basics") {
  // single subcarrier, h = e1
  CMat h(3, 1);
  h(0, 0) = 1.0;
  CMat q = srs_covariance({h});
  CHECK(q(0, 0) == cxd{1.0, 0.0});
  CHECK(q.norm_fro() == doctest::Approx(1.0));

  // frequency flat: equals H H^H of rank N_s
  auto cfg = small_cfg();
  cfg.paths_per_source = 1;
  ChannelDrop flat = generate_drop(cfg, 1);
  CMat qf = ue_srs_covariance(flat, 0);
  EigH e = hermitian_eig(qf);
  CHECK(e.values[0] > 1e-6);
  for (int i = cfg.n_streams; i < qf.rows(); ++i)
    CHECK(std::abs(e.values[i]) <= 1e-10 * e.values[0]);

  // trace identity: tr(Q) = mean ||H||_F^2
  ChannelDrop drop = generate_drop(small_cfg(), 2);
  double mean_power = 0;
  auto pos = srs_positions(drop.cfg);
  for (int n : pos) {
    double f = drop.ue_channels[1][n].norm_fro();
    mean_power += f * f;
  }
  mean_power /= double(pos.size());
  CMat q1 = ue_srs_covariance(drop, 1);
  CHECK(q1.trace().real() == doctest::Approx(mean_power).epsilon(1e-12));

  CHECK_THROWS(srs_covariance({}));
}

TEST_CASE("srs covariance commutes with unitary array rotation") {
  auto cfg = small_cfg();
  ChannelDrop drop = generate_drop(cfg, 5);
  std::vector<CMat> h;
  for (int n : srs_positions(cfg)) h.push_back(drop.ue_channels[0][n]);
  EigH basis = hermitian_eig(ue_srs_covariance(drop, 1) + CMat::identity(cfg.geometry.n_rx()));
  const CMat& u = basis.vectors;  // some unitary

  std::vector<CMat> uh;
  for (const auto& hn : h) uh.push_back(matmul(u, hn));
  CMat lhs = srs_covariance(uh);
  CMat rhs = matmul(matmul(u, srs_covariance(h)), u.adjoint());
  CHECK((lhs - rhs).norm_fro() <= 1e-10 * rhs.norm_fro());
}

TEST_CASE("interference covariance: analytic vs Monte Carlo, PSD always") {
  auto cfg = small_cfg();
  cfg.interferer_inr_db = 20.0;
  ChannelDrop drop = generate_drop(cfg, 7);

  CMat analytic = analytic_interference_covariance(drop);
  EigH ea = hermitian_eig(analytic);
  CHECK(ea.values.back() >= 1.0 - 1e-9);  // noise identity retained

  CMat one_frame = noncoherent_interference_covariance(drop, 1);
  EigH e1 = hermitian_eig(one_frame);
  CHECK(e1.values.back() >= -1e-10 * e1.values.front());  // PSD

  CMat many = noncoherent_interference_covariance(drop, 10000);
  CHECK((many - analytic).norm_fro() <= 0.03 * analytic.norm_fro());

  CHECK_THROWS(noncoherent_interference_covariance(drop, 0));
}

TEST_CASE("noiseless flat analytic covariance is alpha_v h h^H + I") {
  auto cfg = small_cfg();
  cfg.paths_per_source = 1;
  ChannelDrop drop = generate_drop(cfg, 11);
  CMat q = analytic_interference_covariance(drop);
  const auto& hv = drop.interferer[0];
  CMat want = CMat::identity(cfg.geometry.n_rx());
  for (int i = 0; i < want.rows(); ++i)
    for (int j = 0; j < want.cols(); ++j)
      want(i, j) += drop.alpha_v * hv[i] * std::conj(hv[j]);
  CHECK((q - symmetrize(want)).norm_fro() <= 1e-10 * want.norm_fro());
}

TEST_CASE("evolve identities and phase flip") {
  auto cfg = small_cfg();
  ChannelDrop drop = generate_drop(cfg, 13);
  CHECK(drop_distance(evolve(drop, 0.0), drop) == 0.0);

  auto still = cfg;
  still.ue_speed_mps = 0.0;
  still.angle_drift_deg_per_s = 0.0;
  ChannelDrop fixed = generate_drop(still, 13);
  CHECK(drop_distance(evolve(fixed, 25.0), fixed) <= 1e-14);

  CHECK_THROWS(evolve(drop, -1.0));
}

TEST_CASE("single path half-cycle Doppler negates the channel") {
  auto cfg = small_cfg();
  cfg.paths_per_source = 1;
  cfg.angle_drift_deg_per_s = 0.0;
  ChannelDrop drop = generate_drop(cfg, 17);
  double fd = drop.ue_paths[0].paths[0].doppler_hz;
  REQUIRE(std::abs(fd) > 1e-9);
  double dt_ms = 0.5 / fd * 1e3;
  if (dt_ms < 0) dt_ms += 1.0 / fd * 1e3;  // keep dt positive
  ChannelDrop flipped = evolve(drop, dt_ms);
  // other sources rotate differently; check UE 0 only
  for (int n = 0; n < cfg.n_subcarriers; ++n)
    CHECK((flipped.ue_channels[0][n] + drop.ue_channels[0][n]).norm_max() <= 1e-9);
}

TEST_CASE("long-term stability of the dominant eigenvector") {
  auto cfg = small_cfg();
  int stable = 0, total = 0;
  for (int d = 0; d < 10; ++d) {
    ChannelDrop drop = generate_drop(cfg, 100 + d);
    ChannelDrop later = evolve(drop, cfg.t_lt_ms);
    for (int i = 0; i < cfg.n_ue; ++i) {
      EigH e0 = hermitian_eig(ue_srs_covariance(drop, i));
      EigH e1 = hermitian_eig(ue_srs_covariance(later, i));
      cxd dot = 0;
      for (int k = 0; k < cfg.geometry.n_rx(); ++k)
        dot += std::conj(e0.vectors(k, 0)) * e1.vectors(k, 0);
      double angle = std::acos(std::min(std::abs(dot), 1.0)) * 180.0 / kPi;
      if (angle <= 5.0) ++stable;
      ++total;
    }
  }
  CHECK(stable == total);
}

TEST_CASE("config validation") {
  auto cfg = small_cfg();
  cfg.n_ue = 0;
  CHECK_THROWS(generate_drop(cfg, 0));
  cfg = small_cfg();
  cfg.ue_snr_db_lo = 10;
  cfg.ue_snr_db_hi = -10;
  CHECK_THROWS(generate_drop(cfg, 0));
  cfg = small_cfg();
  cfg.n_srs = cfg.n_subcarriers + 1;
  CHECK_THROWS(generate_drop(cfg, 0));
}
