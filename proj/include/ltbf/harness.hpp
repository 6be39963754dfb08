// Experiment orchestration: config parsing, sweep expansion, seeded Monte
// Carlo execution over a worker pool, CSV emission and the complexity
// regression against the counted flop models.
#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ltbf/channel.hpp"
#include "ltbf/inversion.hpp"
#include "ltbf/ltbf.hpp"
#include "ltbf/metrics.hpp"

namespace ltbf {

enum class NullingMode { Off, On, Both };

struct SweepSpec {
  ScenarioConfig scenario;
  std::vector<InversionSpec> methods;  // expanded (method, order) grid; profile filled per cell
  std::vector<Profile> precisions{Profile::fp64()};
  NullingMode nulling = NullingMode::Both;
  std::vector<int> q_grid;  // empty -> interferer path count
  int rank_r = 0;           // 0 -> N_s
  int n_drops = 50;
  int n_null_frames = 128;
  int n_eval_subcarriers = 16;
  PolyScaling scaling = PolyScaling::SpectralBound;
  AccumulatorPolicy acc = AccumulatorPolicy::Wide;

  int effective_r() const { return rank_r > 0 ? rank_r : scenario.n_streams; }
  std::vector<int> effective_q() const {
    return q_grid.empty() ? std::vector<int>{scenario.paths_per_source} : q_grid;
  }
};

struct ResultRecord {
  std::uint64_t drop = 0;
  int ue = 0;
  std::string method;     // "cg:3", "poly:5", "exact", or baselines "exact-ltbf"/"mmse"
  std::string precision;  // profile name
  int order = 0;          // k or d, 0 for exact/baselines
  bool nulled = false;
  int q_rank = 0;
  double sinr_db = 0;
  double capacity = 0;
  double cond_q = 0;   // condition number of the non-reduced aggregate
  double cond_rv = 0;  // condition number of the matrix actually inverted
  std::uint64_t flops = 0;
  std::string status = "ok";
};

struct ExperimentResult {
  SweepSpec spec;
  std::vector<ResultRecord> records;
};

// --- config file ----------------------------------------------------------
// Plain-text sections of key = value lines; '#' starts a comment.

using ConfigMap = std::map<std::string, std::string>;  // "section.key" -> value

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline ConfigMap parse_config_text(std::istream& is) {
  ConfigMap cfg;
  std::string line, section;
  while (std::getline(is, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("config: bad line: " + line);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    cfg[section.empty() ? key : section + "." + key] = value;
  }
  return cfg;
}

inline ConfigMap parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  return parse_config_text(f);
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// "cg:1..6" expands the order range; "cg:3" and "poly:4" are single cells.
inline std::vector<InversionSpec> expand_methods(const std::string& list) {
  std::vector<InversionSpec> out;
  for (const auto& item : split_list(list)) {
    auto dots = item.find("..");
    if (dots != std::string::npos) {
      auto colon = item.find(':');
      if (colon == std::string::npos || colon > dots)
        throw std::invalid_argument("bad method range: " + item);
      int lo = std::stoi(item.substr(colon + 1, dots - colon - 1));
      int hi = std::stoi(item.substr(dots + 2));
      if (lo < 1 || hi < lo) throw std::invalid_argument("bad method range: " + item);
      for (int k = lo; k <= hi; ++k)
        out.push_back(InversionSpec::parse_method(item.substr(0, colon + 1) + std::to_string(k)));
    } else {
      out.push_back(InversionSpec::parse_method(item));
    }
  }
  return out;
}

inline SweepSpec sweep_from_config(const ConfigMap& cfg) {
  SweepSpec sw;
  auto get = [&](const std::string& key, const std::string& fallback) {
    auto it = cfg.find(key);
    return it == cfg.end() ? fallback : it->second;
  };
  auto geti = [&](const std::string& key, int fallback) {
    auto it = cfg.find(key);
    return it == cfg.end() ? fallback : std::stoi(it->second);
  };
  auto getd = [&](const std::string& key, double fallback) {
    auto it = cfg.find(key);
    return it == cfg.end() ? fallback : std::stod(it->second);
  };

  auto& sc = sw.scenario;
  sc.geometry.nx = geti("scenario.nx", sc.geometry.nx);
  sc.geometry.ny = geti("scenario.ny", sc.geometry.ny);
  sc.geometry.spacing = getd("scenario.spacing", sc.geometry.spacing);
  sc.carrier_hz = getd("scenario.carrier_hz", sc.carrier_hz);
  sc.n_ue = geti("scenario.n_ue", sc.n_ue);
  sc.n_streams = geti("scenario.n_streams", sc.n_streams);
  sc.n_subcarriers = geti("scenario.n_subcarriers", sc.n_subcarriers);
  sc.subcarrier_spacing_hz = getd("scenario.subcarrier_spacing_hz", sc.subcarrier_spacing_hz);
  sc.ue_snr_db_lo = getd("scenario.ue_snr_db_lo", sc.ue_snr_db_lo);
  sc.ue_snr_db_hi = getd("scenario.ue_snr_db_hi", sc.ue_snr_db_hi);
  sc.interferer_inr_db = getd("scenario.interferer_inr_db", sc.interferer_inr_db);
  sc.paths_per_source = geti("scenario.paths_per_source", sc.paths_per_source);
  sc.angle_spread_deg = getd("scenario.angle_spread_deg", sc.angle_spread_deg);
  sc.t_lt_ms = getd("scenario.t_lt_ms", sc.t_lt_ms);
  sc.ue_speed_mps = getd("scenario.ue_speed_mps", sc.ue_speed_mps);
  sc.n_srs = geti("scenario.n_srs", sc.n_srs);
  sc.seed = std::uint64_t(std::stoull(get("scenario.seed", std::to_string(sc.seed))));
  sc.angle_drift_deg_per_s = getd("scenario.angle_drift_deg_per_s", sc.angle_drift_deg_per_s);

  sw.methods = expand_methods(get("sweep.methods", "cg:1..6"));
  sw.precisions.clear();
  for (const auto& p : split_list(get("sweep.precisions", "fp64")))
    sw.precisions.push_back(Profile::parse(p));
  const std::string nul = get("sweep.nulling", "both");
  if (nul == "on") sw.nulling = NullingMode::On;
  else if (nul == "off") sw.nulling = NullingMode::Off;
  else if (nul == "both") sw.nulling = NullingMode::Both;
  else throw std::invalid_argument("sweep.nulling must be on/off/both");
  for (const auto& q : split_list(get("sweep.q", ""))) sw.q_grid.push_back(std::stoi(q));
  sw.rank_r = geti("sweep.r", 0);
  sw.n_drops = geti("sweep.drops", sw.n_drops);
  sw.n_null_frames = geti("sweep.null_frames", sw.n_null_frames);
  sw.n_eval_subcarriers = geti("sweep.eval_subcarriers", sw.n_eval_subcarriers);
  const std::string scal = get("sweep.scaling", "spectral");
  if (scal == "spectral") sw.scaling = PolyScaling::SpectralBound;
  else if (scal == "trace") sw.scaling = PolyScaling::TraceBound;
  else throw std::invalid_argument("sweep.scaling must be spectral/trace");
  const std::string acc = get("sweep.accumulator", "wide");
  if (acc == "wide") sw.acc = AccumulatorPolicy::Wide;
  else if (acc == "narrow") sw.acc = AccumulatorPolicy::Narrow;
  else throw std::invalid_argument("sweep.accumulator must be wide/narrow");

  sc.validate();
  if (sw.methods.empty() || sw.precisions.empty() || sw.n_drops < 1)
    throw std::invalid_argument("sweep grids must be non-empty, drops >= 1");
  return sw;
}

inline void apply_override(ConfigMap& cfg, const std::string& kv) {
  auto eq = kv.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("override must be key=value: " + kv);
  cfg[trim(kv.substr(0, eq))] = trim(kv.substr(eq + 1));
}

// --- sweep execution -------------------------------------------------------

namespace detail {

inline std::string status_string(const SolveStatus& s) {
  if (s.stagnated && s.divergent) return "stagnated+divergent";
  if (s.stagnated) return "stagnated";
  if (s.divergent) return "divergent";
  return "ok";
}

inline double to_db(double linear) {
  return 10.0 * std::log10(std::max(linear, 1e-30));
}

struct DropContext {
  ChannelDrop design;
  ChannelDrop evolved;
  CovarianceSet covs;
  // designs are method/precision independent; prepare them once per drop
  BeamformerDesign plain;
  std::map<int, BeamformerDesign> nulled;  // by nulling rank q
};

inline DropContext prepare_drop(const SweepSpec& sw, std::uint64_t drop_index) {
  DropContext ctx;
  ctx.design = generate_drop(sw.scenario, drop_index);
  ctx.covs.alpha_ue = ctx.design.alpha_ue;
  for (int i = 0; i < sw.scenario.n_ue; ++i)
    ctx.covs.q_ue.push_back(ue_srs_covariance(ctx.design, i));
  ctx.covs.q_v = noncoherent_interference_covariance(ctx.design, sw.n_null_frames);
  ctx.covs.aggregate = assemble_q(ctx.covs.q_ue, ctx.covs.alpha_ue, &*ctx.covs.q_v);
  ctx.evolved = evolve(ctx.design, sw.scenario.t_lt_ms);

  // the plain design also serves the exact-ltbf baseline
  ctx.plain = prepare_design(ctx.covs, NullingConfig{});
  if (sw.nulling == NullingMode::On || sw.nulling == NullingMode::Both)
    for (int q : sw.effective_q()) {
      NullingConfig nc;
      nc.enabled = true;
      nc.nulling_rank = q;
      ctx.nulled.emplace(q, prepare_design(ctx.covs, nc));
    }
  return ctx;
}

inline void emit_variant_records(std::vector<ResultRecord>& out, const SweepSpec& sw,
                                 const DropContext& ctx, std::uint64_t drop_index,
                                 const InversionSpec& spec, bool nulled, int q_rank,
                                 const std::string& method_label) {
  ResultRecord base;
  base.drop = drop_index;
  base.method = method_label;
  base.precision = spec.profile.name();
  base.order = spec.method == InvMethod::Exact ? 0 : spec.order;
  base.nulled = nulled;
  base.q_rank = nulled ? q_rank : 0;
  try {
    const BeamformerDesign& design = nulled ? ctx.nulled.at(q_rank) : ctx.plain;
    BeamformerSet beams = build_beamformers(design, sw.effective_r(), spec);
    LinkMetrics lm = evaluate_ltbf(ctx.evolved, beams, sw.n_eval_subcarriers);
    for (int u = 0; u < sw.scenario.n_ue; ++u) {
      ResultRecord rec = base;
      rec.ue = u;
      rec.sinr_db = to_db(lm.mean_sinr_ue[u]);
      rec.capacity = lm.capacity_ue[u];
      rec.cond_q = beams.cond_q_full;
      rec.cond_rv = beams.cond_q;
      rec.flops = beams.flops;
      rec.status = status_string(beams.status);
      out.push_back(rec);
    }
  } catch (const std::exception& e) {
    // failed cells stay visible, never absent
    for (int u = 0; u < sw.scenario.n_ue; ++u) {
      ResultRecord rec = base;
      rec.ue = u;
      rec.status = std::string("error:") + e.what();
      out.push_back(rec);
    }
  }
}

inline std::vector<ResultRecord> run_drop(const SweepSpec& sw, std::uint64_t drop_index) {
  std::vector<ResultRecord> out;
  DropContext ctx = prepare_drop(sw, drop_index);

  std::vector<bool> nulling_variants;
  if (sw.nulling == NullingMode::Off || sw.nulling == NullingMode::Both)
    nulling_variants.push_back(false);
  if (sw.nulling == NullingMode::On || sw.nulling == NullingMode::Both)
    nulling_variants.push_back(true);

  for (const auto& method : sw.methods) {
    for (const auto& prof : sw.precisions) {
      InversionSpec spec = method;
      spec.profile = spec.method == InvMethod::Exact ? Profile::fp64() : prof;
      spec.scaling = sw.scaling;
      spec.acc = sw.acc;
      for (bool nulled : nulling_variants) {
        if (nulled) {
          for (int q : sw.effective_q())
            emit_variant_records(out, sw, ctx, drop_index, spec, true, q, spec.method_name());
        } else {
          emit_variant_records(out, sw, ctx, drop_index, spec, false, 0, spec.method_name());
        }
      }
      if (spec.method == InvMethod::Exact) break;  // precision-independent
    }
  }

  // baselines: exact LTBF (FP64, no nulling) and full instantaneous MMSE
  InversionSpec exact;
  emit_variant_records(out, sw, ctx, drop_index, exact, false, 0, "exact-ltbf");
  {
    LinkMetrics lm = evaluate_mmse_baseline(ctx.evolved, sw.n_eval_subcarriers);
    for (int u = 0; u < sw.scenario.n_ue; ++u) {
      ResultRecord rec;
      rec.drop = drop_index;
      rec.ue = u;
      rec.method = "mmse";
      rec.precision = "fp64";
      rec.sinr_db = to_db(lm.mean_sinr_ue[u]);
      rec.capacity = lm.capacity_ue[u];
      out.push_back(rec);
    }
  }
  return out;
}

}  // namespace detail

inline ExperimentResult run_sweep(const SweepSpec& sw, int workers = 1) {
  ExperimentResult result;
  result.spec = sw;
  std::vector<std::vector<ResultRecord>> per_drop(sw.n_drops);
  if (workers <= 1) {
    for (int d = 0; d < sw.n_drops; ++d) per_drop[d] = detail::run_drop(sw, d);
  } else {
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (int d = next.fetch_add(1); d < sw.n_drops; d = next.fetch_add(1))
        per_drop[d] = detail::run_drop(sw, d);
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min(workers, sw.n_drops); ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& recs : per_drop)
    result.records.insert(result.records.end(), recs.begin(), recs.end());
  return result;
}

// --- emission --------------------------------------------------------------

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::string coord_key(const ResultRecord& r) {
  return r.method + "," + r.precision + "," + std::to_string(r.order) + "," +
         (r.nulled ? "on" : "off") + "," + std::to_string(r.q_rank);
}

inline std::string coord_file_tag(const ResultRecord& r) {
  std::string s = r.method + "_" + r.precision + "_" + (r.nulled ? "nulled" : "plain");
  for (auto& ch : s)
    if (ch == ':' || ch == '.') ch = '-';
  return s;
}

}  // namespace detail

inline void emit(const ExperimentResult& result, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::ofstream res(fs::path(out_dir) / "results.csv");
  res << "drop,ue,method,precision,order,nulling,q,sinr_db,capacity,cond_Q,cond_Rv,flops,status\n";
  for (const auto& r : result.records) {
    res << r.drop << ',' << r.ue << ',' << r.method << ',' << r.precision << ',' << r.order << ','
        << (r.nulled ? "on" : "off") << ',' << r.q_rank << ',' << detail::fmt(r.sinr_db) << ','
        << detail::fmt(r.capacity) << ',' << detail::fmt(r.cond_q) << ','
        << detail::fmt(r.cond_rv) << ',' << r.flops << ',' << r.status << '\n';
  }

  std::map<std::string, std::vector<const ResultRecord*>> by_coord;
  for (const auto& r : result.records)
    if (r.status.rfind("error:", 0) != 0) by_coord[detail::coord_key(r)].push_back(&r);

  std::ofstream sum(fs::path(out_dir) / "summary.csv");
  sum << "method,precision,order,nulling,q,n,mean_capacity,p10_capacity,mean_flops\n";
  std::ofstream flops_csv(fs::path(out_dir) / "flops.csv");
  flops_csv << "method,precision,order,nulling,q,mean_flops\n";
  for (const auto& [key, recs] : by_coord) {
    std::vector<double> caps;
    double flop_total = 0;
    for (auto* r : recs) {
      caps.push_back(r->capacity);
      flop_total += double(r->flops);
    }
    Summary s = summarize(caps);
    sum << key << ',' << recs.size() << ',' << detail::fmt(s.mean) << ',' << detail::fmt(s.p10)
        << ',' << detail::fmt(flop_total / double(recs.size())) << '\n';
    flops_csv << key << ',' << detail::fmt(flop_total / double(recs.size())) << '\n';

    std::string tag = detail::coord_file_tag(*recs.front()) + "_" +
                      std::to_string(recs.front()->order) + "_q" +
                      std::to_string(recs.front()->q_rank);
    std::ofstream cdf(fs::path(out_dir) / ("cdf_" + tag + ".csv"));
    cdf << "capacity,cumulative\n";
    for (auto [v, c] : s.cdf) cdf << detail::fmt(v) << ',' << detail::fmt(c) << '\n';
  }

  std::ofstream schema(fs::path(out_dir) / "schema.md");
  schema << "# Output schema\n\n"
         << "## results.csv\n"
         << "One row per (drop, ue, method, precision, order, nulling, q).\n\n"
         << "- drop: Monte Carlo drop index\n"
         << "- ue: user index\n"
         << "- method: inversion method (`exact`, `cg:k`, `poly:d`) or baseline\n"
         << "  (`exact-ltbf`, `mmse`)\n"
         << "- precision: arithmetic profile (fp64, fp32, qM.F)\n"
         << "- order: CG iteration count k or polynomial degree d (0 for exact)\n"
         << "- nulling: on/off; q: nulling rank (0 when off)\n"
         << "- sinr_db: mean post-equalization SINR for the UE, dB\n"
         << "- capacity: per-UE capacity, bits/s/Hz, averaged over subcarriers\n"
         << "- cond_Q / cond_Rv: condition numbers of the aggregate covariance and\n"
         << "  of the matrix actually inverted\n"
         << "- flops: complex multiply-adds spent on inversion + nulling algebra\n"
         << "- status: ok / stagnated / divergent / error:<msg>\n\n"
         << "## summary.csv\n"
         << "Mean and nearest-rank 10th-percentile capacity per coordinate.\n\n"
         << "## cdf_<coord>.csv\n"
         << "Sorted empirical capacity CDF per coordinate, final cumulative = 1.\n\n"
         << "## flops.csv\n"
         << "Mean complex-op counts per coordinate.\n";
}

// --- complexity regression ---------------------------------------------------

struct ComplexityFit {
  std::string model;  // "cg: k*N^3", ...
  std::vector<double> coefficients;
  double max_rel_deviation = 0;
  bool within_15_percent() const { return max_rel_deviation <= 0.15; }
};

struct ComplexityReport {
  std::vector<ComplexityFit> fits;
  bool all_ok() const {
    for (const auto& f : fits)
      if (!f.within_15_percent()) return false;
    return true;
  }
};

namespace detail {

inline CMat random_spd(int n, std::uint64_t seed, double diag_boost = 1.0) {
  std::mt19937_64 rng(seed);
  CMat b(n, n);
  for (auto& v : b.data()) v = circular_gaussian(rng);
  CMat a = matmul(b, b.adjoint());
  a *= cxd{1.0 / n, 0.0};
  CMat eye = CMat::identity(n);
  eye *= cxd{diag_boost, 0.0};
  a += eye;
  return symmetrize(a);
}

inline ComplexityFit finish_fit(std::string model, std::vector<double> coeffs) {
  ComplexityFit fit;
  fit.model = std::move(model);
  fit.coefficients = std::move(coeffs);
  // minimax single-coefficient fit: the midrange minimizes the worst
  // relative deviation
  const auto [lo, hi] = std::minmax_element(fit.coefficients.begin(), fit.coefficients.end());
  const double c_star = 0.5 * (*lo + *hi);
  for (double c : fit.coefficients)
    fit.max_rel_deviation = std::max(fit.max_rel_deviation, std::abs(c - c_star) / c_star);
  return fit;
}

}  // namespace detail

// Regresses measured complex-op counts against the k*N^3 (CG), (d-1)*N^3
// (polynomial) and q*N^2 (nulled covariance) models.
inline ComplexityReport verify_complexity(const std::vector<int>& sizes = {16, 32, 64}) {
  ComplexityReport report;
  const Profile p = Profile::fp64();

  std::vector<double> cg_coeffs;
  for (int n : sizes) {
    CMat q = detail::random_spd(n, 0xC6 + n);
    for (int k : {2, 4}) {
      flops_reset();
      cg_inverse(q, k, p);
      cg_coeffs.push_back(double(flops_read()) / (double(k) * n * n * n));
    }
  }
  report.fits.push_back(detail::finish_fit("cg: k*N^3", cg_coeffs));

  std::vector<double> poly_coeffs;
  for (int n : sizes) {
    CMat q = detail::random_spd(n, 0x90 + n);
    for (int d : {3, 5}) {
      flops_reset();
      poly_inverse(q, d, p);
      poly_coeffs.push_back(double(flops_read()) / (double(d - 1) * n * n * n));
    }
  }
  report.fits.push_back(detail::finish_fit("poly: (d-1)*N^3", poly_coeffs));

  std::vector<double> null_coeffs;
  for (int n : sizes) {
    CMat qi = detail::random_spd(n, 0x417 + n);
    for (int q_rank : {2, 4}) {
      std::mt19937_64 rng(0xB0 + n + q_rank);
      CMat hv(n, q_rank);
      for (auto& v : hv.data()) v = detail::circular_gaussian(rng);
      CMat m = gram_inverse(hv);
      flops_reset();
      nulled_user_covariance(qi, hv, m);
      null_coeffs.push_back(double(flops_read()) / (double(q_rank) * n * n));
    }
  }
  report.fits.push_back(detail::finish_fit("nulled covariance: q*N^2", null_coeffs));

  return report;
}

}  // namespace ltbf
