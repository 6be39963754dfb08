// Synthetic clustered-multipath channel generator on a planar array:
// per-UE frequency-selective channels, a dominant external interferer,
// Doppler evolution over the long-term window, and SRS / null-frame
// covariance estimation.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "ltbf/eig.hpp"
#include "ltbf/matrix.hpp"

namespace ltbf {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 299792458.0;

struct ArrayGeometry {
  int nx = 8;
  int ny = 8;
  double spacing = 0.5;  // element spacing in wavelengths

  int n_rx() const { return nx * ny; }
};

struct ScenarioConfig {
  ArrayGeometry geometry;
  double carrier_hz = 3.5e9;
  int n_ue = 4;
  int n_streams = 1;  // N_s per UE
  int n_subcarriers = 64;
  // spacing of the sampled tone grid across the allocated band (SRS combs
  // are sparse in frequency, so this is much larger than one subcarrier)
  double subcarrier_spacing_hz = 1.5e6;
  double ue_snr_db_lo = -6.0;
  double ue_snr_db_hi = 14.0;
  double interferer_inr_db = 30.0;
  int paths_per_source = 3;  // L
  double angle_spread_deg = 2.0;
  double t_lt_ms = 10.0;
  double ue_speed_mps = 1.0;
  int n_srs = 16;  // SRS subcarriers used for covariance estimation
  std::uint64_t seed = 1;
  double angle_drift_deg_per_s = 0.1;
  double delay_spread_s = 300e-9;
  double pdp_decay = 2.0;  // exponential power falloff per path index

  void validate() const {
    if (geometry.n_rx() < 1 || geometry.spacing <= 0) throw std::invalid_argument("bad geometry");
    if (n_ue < 1 || n_streams < 1) throw std::invalid_argument("need at least one UE/stream");
    if (n_subcarriers < 1 || n_srs < 1 || n_srs > n_subcarriers)
      throw std::invalid_argument("bad subcarrier counts");
    if (ue_snr_db_lo > ue_snr_db_hi) throw std::invalid_argument("SNR range not ordered");
    if (paths_per_source < 1) throw std::invalid_argument("need at least one path");
  }
};

// Unit-modulus planar-array response; element (p,q) phase from the
// direction cosines u = sin(theta)cos(phi), v = sin(phi).
inline std::vector<cxd> steering_vector(const ArrayGeometry& g, double theta, double phi) {
  std::vector<cxd> a(std::size_t(g.n_rx()));
  const double u = std::sin(theta) * std::cos(phi);
  const double v = std::sin(phi);
  int idx = 0;
  for (int q = 0; q < g.ny; ++q)
    for (int p = 0; p < g.nx; ++p)
      a[idx++] = std::polar(1.0, 2.0 * kPi * g.spacing * (p * u + q * v));
  return a;
}

struct PathParams {
  double theta;       // azimuth (rad)
  double phi;         // elevation (rad)
  double delay_s;
  double doppler_hz;
  std::vector<cxd> gains;  // one complex gain per stream
};

struct SourcePaths {
  std::vector<PathParams> paths;
};

struct ChannelDrop {
  ScenarioConfig cfg;
  std::uint64_t drop_index = 0;
  double time_s = 0.0;  // offset from the design instant t0

  std::vector<SourcePaths> ue_paths;  // one per UE
  SourcePaths interferer_paths;
  std::vector<double> alpha_ue;  // effective SNR per UE, linear
  double alpha_v = 0.0;          // interferer INR, linear

  // materialized at `time_s`: ue_channels[i][n] is N_rx x N_s,
  // interferer[n] is the N_rx interferer channel at subcarrier n
  std::vector<std::vector<CMat>> ue_channels;
  std::vector<std::vector<cxd>> interferer;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d4d0d3f3fca3e1ULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(seed ^ splitmix64(a + 1)) ^ splitmix64(b + 0x51ed2701));
}

inline cxd circular_gaussian(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  double re = n(rng), im = n(rng);
  return {re, im};
}

inline double laplacian_sample(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  double x = u(rng);
  return -scale * std::copysign(std::log1p(-2.0 * std::abs(x)), x);
}

// Draw one source's path set. Per-stream gain power sums to one so the
// per-source power knob stays in alpha.
inline SourcePaths draw_source(std::mt19937_64& rng, const ScenarioConfig& cfg, int n_streams) {
  std::uniform_real_distribution<double> sector(-kPi / 3.0, kPi / 3.0);
  std::uniform_real_distribution<double> elev(-kPi / 12.0, kPi / 12.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> dir(0.0, 2.0 * kPi);

  const double center_theta = sector(rng);
  const double center_phi = elev(rng);
  const double spread = cfg.angle_spread_deg * kPi / 180.0;
  const int L = cfg.paths_per_source;
  const double lambda_c = kSpeedOfLight / cfg.carrier_hz;
  const double f_d_max = cfg.ue_speed_mps / lambda_c;

  // exponential power-delay profile, normalized
  std::vector<double> power(L);
  double total = 0;
  for (int l = 0; l < L; ++l) {
    power[l] = std::exp(-cfg.pdp_decay * double(l));
    total += power[l];
  }

  SourcePaths src;
  src.paths.resize(L);
  for (int l = 0; l < L; ++l) {
    auto& path = src.paths[l];
    path.theta = std::clamp(center_theta + laplacian_sample(rng, spread), -kPi / 2, kPi / 2);
    path.phi = std::clamp(center_phi + laplacian_sample(rng, spread * 0.5), -kPi / 2, kPi / 2);
    path.delay_s = (l == 0) ? 0.0 : (0.2 + 0.8 * unit(rng)) * cfg.delay_spread_s;
    path.doppler_hz = f_d_max * std::cos(dir(rng));
    path.gains.resize(n_streams);
    const double sigma = std::sqrt(power[l] / total);
    for (int s = 0; s < n_streams; ++s) path.gains[s] = sigma * circular_gaussian(rng);
  }
  return src;
}

inline void materialize(ChannelDrop& drop) {
  const auto& cfg = drop.cfg;
  const int n_rx = cfg.geometry.n_rx();
  const double t = drop.time_s;
  const double drift = cfg.angle_drift_deg_per_s * kPi / 180.0 * t;

  auto channel_at = [&](const SourcePaths& src, int n_streams) {
    std::vector<CMat> h(cfg.n_subcarriers, CMat(n_rx, n_streams));
    for (const auto& path : src.paths) {
      auto a = steering_vector(cfg.geometry, path.theta + drift, path.phi);
      const cxd rot = std::polar(1.0, 2.0 * kPi * path.doppler_hz * t);
      for (int n = 0; n < cfg.n_subcarriers; ++n) {
        const cxd fsel =
            std::polar(1.0, -2.0 * kPi * n * cfg.subcarrier_spacing_hz * path.delay_s);
        for (int s = 0; s < n_streams; ++s) {
          const cxd g = path.gains[s] * rot * fsel;
          for (int i = 0; i < n_rx; ++i) h[n](i, s) += g * a[i];
        }
      }
    }
    return h;
  };

  drop.ue_channels.clear();
  drop.ue_channels.reserve(cfg.n_ue);
  for (int i = 0; i < cfg.n_ue; ++i)
    drop.ue_channels.push_back(channel_at(drop.ue_paths[i], cfg.n_streams));

  auto hv = channel_at(drop.interferer_paths, 1);
  drop.interferer.assign(cfg.n_subcarriers, {});
  for (int n = 0; n < cfg.n_subcarriers; ++n) drop.interferer[n] = hv[n].col(0);
}

}  // namespace detail

// Deterministic under (cfg.seed, drop_index).
inline ChannelDrop generate_drop(const ScenarioConfig& cfg, std::uint64_t drop_index) {
  cfg.validate();
  std::mt19937_64 rng(detail::mix_seed(cfg.seed, drop_index));

  ChannelDrop drop;
  drop.cfg = cfg;
  drop.drop_index = drop_index;
  drop.ue_paths.reserve(cfg.n_ue);
  for (int i = 0; i < cfg.n_ue; ++i)
    drop.ue_paths.push_back(detail::draw_source(rng, cfg, cfg.n_streams));
  drop.interferer_paths = detail::draw_source(rng, cfg, 1);

  std::uniform_real_distribution<double> snr_db(cfg.ue_snr_db_lo, cfg.ue_snr_db_hi);
  drop.alpha_ue.resize(cfg.n_ue);
  for (int i = 0; i < cfg.n_ue; ++i) drop.alpha_ue[i] = std::pow(10.0, snr_db(rng) / 10.0);
  drop.alpha_v = std::pow(10.0, cfg.interferer_inr_db / 10.0);

  detail::materialize(drop);
  return drop;
}

// Per-path Doppler rotation plus slow angle drift; dt = 0 is the identity.
inline ChannelDrop evolve(const ChannelDrop& drop, double dt_ms) {
  if (dt_ms < 0) throw std::invalid_argument("evolve: negative dt");
  ChannelDrop out = drop;
  out.time_s = drop.time_s + dt_ms * 1e-3;
  if (out.time_s != drop.time_s) detail::materialize(out);
  return out;
}

// Q = (1/N_srs) sum_n H[n] H[n]^H over the given subcarrier channels.
inline CMat srs_covariance(const std::vector<CMat>& h) {
  if (h.empty()) throw std::invalid_argument("srs_covariance: empty input");
  CMat q(h[0].rows(), h[0].rows());
  for (const auto& hn : h) {
    for (int i = 0; i < hn.rows(); ++i)
      for (int j = 0; j < hn.rows(); ++j) {
        cxd s = 0;
        for (int k = 0; k < hn.cols(); ++k) s += hn(i, k) * std::conj(hn(j, k));
        q(i, j) += s;
      }
  }
  q *= cxd{1.0 / double(h.size()), 0.0};
  return symmetrize(q);
}

// Evenly strided subset of the drop's subcarriers used as SRS positions.
inline std::vector<int> srs_positions(const ScenarioConfig& cfg) {
  std::vector<int> pos(cfg.n_srs);
  for (int k = 0; k < cfg.n_srs; ++k)
    pos[k] = int((std::int64_t(k) * cfg.n_subcarriers) / cfg.n_srs);
  return pos;
}

inline CMat ue_srs_covariance(const ChannelDrop& drop, int ue) {
  std::vector<CMat> h;
  for (int n : srs_positions(drop.cfg)) h.push_back(drop.ue_channels[ue][n]);
  return srs_covariance(h);
}

// Expectation of the null-frame covariance: alpha_v * mean_n h_v h_v^H + I.
inline CMat analytic_interference_covariance(const ChannelDrop& drop) {
  const int n_rx = drop.cfg.geometry.n_rx();
  CMat q(n_rx, n_rx);
  for (const auto& hv : drop.interferer)
    for (int i = 0; i < n_rx; ++i)
      for (int j = 0; j < n_rx; ++j) q(i, j) += hv[i] * std::conj(hv[j]);
  q *= cxd{drop.alpha_v / double(drop.interferer.size()), 0.0};
  q += CMat::identity(n_rx);
  return symmetrize(q);
}

// Sample average of v v^H over null-frame resource elements, with
// v = h_v x_v + w, unit-variance noise retained.
inline CMat noncoherent_interference_covariance(const ChannelDrop& drop, int n_frames) {
  if (n_frames < 1) throw std::invalid_argument("need n_frames >= 1");
  const int n_rx = drop.cfg.geometry.n_rx();
  std::mt19937_64 rng(detail::mix_seed(drop.cfg.seed, drop.drop_index, 0x6e66));
  CMat q(n_rx, n_rx);
  const double amp = std::sqrt(drop.alpha_v);
  std::size_t count = 0;
  std::vector<cxd> v(n_rx);
  for (int f = 0; f < n_frames; ++f) {
    for (const auto& hv : drop.interferer) {
      const cxd x = amp * detail::circular_gaussian(rng);
      for (int i = 0; i < n_rx; ++i) v[i] = hv[i] * x + detail::circular_gaussian(rng);
      for (int i = 0; i < n_rx; ++i)
        for (int j = 0; j <= i; ++j) q(i, j) += v[i] * std::conj(v[j]);
      ++count;
    }
  }
  q *= cxd{1.0 / double(count), 0.0};
  for (int i = 0; i < n_rx; ++i)
    for (int j = i + 1; j < n_rx; ++j) q(i, j) = std::conj(q(j, i));
  return q;
}

}  // namespace ltbf
