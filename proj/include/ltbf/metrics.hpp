// Per-subcarrier reduced-dimension MMSE equalization, post-equalization
// SINR and capacity, the full-dimension instantaneous MMSE baseline and
// distribution statistics. Run-time equalization is FP64.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ltbf/channel.hpp"
#include "ltbf/ltbf.hpp"
#include "ltbf/matrix.hpp"

namespace ltbf {

struct LinkMetrics {
  // per UE: capacity (bits/s/Hz, averaged over subcarriers) and mean
  // post-equalization SINR samples per subcarrier/stream
  std::vector<double> capacity_ue;
  std::vector<double> mean_sinr_ue;  // linear, averaged over subcarriers/streams
  std::vector<double> sinr_samples;  // linear, pooled over UEs/subcarriers/streams
};

struct Summary {
  double mean = 0;
  double p10 = 0;
  std::vector<std::pair<double, double>> cdf;  // (value, cumulative fraction)
};

// C_i = sigma^2 G G^H + sum_{j != i} (alpha_j / N_s) (G H_j)(G H_j)^H
//       + alpha_v (G h_v)(G h_v)^H
inline CMat effective_noise_covariance(const CMat& g, const std::vector<const CMat*>& other_h,
                                       const std::vector<double>& other_alpha,
                                       const std::vector<cxd>* interferer_h, double alpha_v,
                                       int n_streams, double noise_var = 1.0) {
  CMat c = matmul(g, g.adjoint());
  c *= cxd{noise_var, 0.0};
  for (std::size_t j = 0; j < other_h.size(); ++j) {
    CMat gh = matmul(g, *other_h[j]);
    CMat term = matmul(gh, gh.adjoint());
    term *= cxd{other_alpha[j] / n_streams, 0.0};
    c += term;
  }
  if (interferer_h) {
    auto gv = matvec(g, *interferer_h);
    for (int a = 0; a < g.rows(); ++a)
      for (int b = 0; b < g.rows(); ++b) c(a, b) += alpha_v * gv[a] * std::conj(gv[b]);
  }
  return symmetrize(c);
}

// Per-stream post-MMSE SINR:
//   SINR_s = 1 / [(I + (Ex/Ns) H^H C^{-1} H)^{-1}]_ss - 1
inline std::vector<double> mmse_sinr(const CMat& h_eff, const CMat& c, double ex_over_ns) {
  if (c.rows() != h_eff.rows()) throw std::invalid_argument("mmse_sinr: dims disagree");
  CMat cinv_h = lu_solve(c, h_eff);
  CMat gram = matmul(h_eff.adjoint(), cinv_h);
  gram *= cxd{ex_over_ns, 0.0};
  gram += CMat::identity(h_eff.cols());
  CMat inv = lu_inverse(symmetrize(gram));
  std::vector<double> sinr(h_eff.cols());
  for (int s = 0; s < h_eff.cols(); ++s)
    sinr[s] = std::max(1.0 / inv(s, s).real() - 1.0, 0.0);
  return sinr;
}

namespace detail {

// Shared SINR/capacity walk; `beam_for_ue` yields the projection applied
// for UE i (identity for the full-dimensional baseline).
template <typename BeamFn>
LinkMetrics evaluate_with(const ChannelDrop& drop, BeamFn&& beam_for_ue,
                          const std::vector<int>& subcarriers) {
  const auto& cfg = drop.cfg;
  LinkMetrics out;
  out.capacity_ue.assign(cfg.n_ue, 0.0);
  out.mean_sinr_ue.assign(cfg.n_ue, 0.0);
  for (int i = 0; i < cfg.n_ue; ++i) {
    const CMat& g = beam_for_ue(i);
    double cap_acc = 0;
    double sinr_acc = 0;
    std::size_t sinr_count = 0;
    for (int n : subcarriers) {
      CMat h_eff = matmul(g, drop.ue_channels[i][n]);
      std::vector<const CMat*> others;
      std::vector<double> alphas;
      for (int j = 0; j < cfg.n_ue; ++j) {
        if (j == i) continue;
        others.push_back(&drop.ue_channels[j][n]);
        alphas.push_back(drop.alpha_ue[j]);
      }
      CMat c = effective_noise_covariance(g, others, alphas, &drop.interferer[n], drop.alpha_v,
                                          cfg.n_streams);
      auto sinr = mmse_sinr(h_eff, c, drop.alpha_ue[i] / cfg.n_streams);
      double cap = 0;
      for (double s : sinr) {
        cap += std::log2(1.0 + s);
        out.sinr_samples.push_back(s);
        sinr_acc += s;
        ++sinr_count;
      }
      cap_acc += cap;
    }
    out.capacity_ue[i] = cap_acc / double(subcarriers.size());
    out.mean_sinr_ue[i] = sinr_count ? sinr_acc / double(sinr_count) : 0.0;
  }
  return out;
}

inline std::vector<int> eval_subcarriers(const ScenarioConfig& cfg, int n_eval) {
  if (n_eval <= 0 || n_eval > cfg.n_subcarriers) n_eval = cfg.n_subcarriers;
  std::vector<int> sc(n_eval);
  for (int k = 0; k < n_eval; ++k)
    sc[k] = int((std::int64_t(k) * cfg.n_subcarriers) / n_eval);
  return sc;
}

}  // namespace detail

// LTBF evaluation at the (possibly evolved) drop instant.
inline LinkMetrics evaluate_ltbf(const ChannelDrop& drop, const BeamformerSet& beams,
                                 int n_eval_subcarriers = 0) {
  if (int(beams.g_ue.size()) != drop.cfg.n_ue)
    throw std::invalid_argument("evaluate_ltbf: beam count != UE count");
  auto sc = detail::eval_subcarriers(drop.cfg, n_eval_subcarriers);
  return detail::evaluate_with(drop, [&](int i) -> const CMat& { return beams.g_ue[i]; }, sc);
}

// Full N_rx-dimensional instantaneous MMSE baseline (G = I).
inline LinkMetrics evaluate_mmse_baseline(const ChannelDrop& drop, int n_eval_subcarriers = 0) {
  auto sc = detail::eval_subcarriers(drop.cfg, n_eval_subcarriers);
  CMat eye = CMat::identity(drop.cfg.geometry.n_rx());
  return detail::evaluate_with(drop, [&](int) -> const CMat& { return eye; }, sc);
}

// Empirical mean, nearest-rank 10th percentile and CDF.
inline Summary summarize(std::vector<double> samples) {
  if (samples.empty()) throw std::invalid_argument("summarize: empty input");
  Summary s;
  std::sort(samples.begin(), samples.end());
  double total = 0;
  for (double v : samples) total += v;
  s.mean = total / double(samples.size());
  const std::size_t rank = std::size_t(std::ceil(0.10 * double(samples.size())));
  s.p10 = samples[std::max<std::size_t>(rank, 1) - 1];
  s.cdf.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    s.cdf.emplace_back(samples[i], double(i + 1) / double(samples.size()));
  return s;
}

}  // namespace ltbf
