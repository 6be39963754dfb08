// Command-line front end: sweep execution, drop inspection and the
// complexity regression.
#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ltbf/acceptance.hpp"
#include "ltbf/harness.hpp"

namespace fs = std::filesystem;
using namespace ltbf;

namespace {

SweepSpec load_sweep(const std::string& config_path, const std::vector<std::string>& overrides) {
  ConfigMap cfg = config_path.empty() ? ConfigMap{} : parse_config_file(config_path);
  for (const auto& kv : overrides) apply_override(cfg, kv);
  return sweep_from_config(cfg);
}

int cmd_simulate(const std::string& config_path, const std::vector<std::string>& overrides,
                 const std::string& out_dir, int workers, bool check) {
  SweepSpec sw = load_sweep(config_path, overrides);
  ExperimentResult result = run_sweep(sw, workers);
  emit(result, out_dir);
  std::cout << "wrote " << result.records.size() << " records to " << out_dir << "\n";
  if (!check) return 0;

  std::vector<acceptance::CheckResult> checks = acceptance::evaluate_trends(result);
  checks.push_back(acceptance::evaluate_cell_edge(result));
  checks.push_back(acceptance::evaluate_complexity());
  return acceptance::report(checks, std::cout) == 0 ? 0 : 1;
}

int cmd_dump_drop(const std::string& config_path, const std::vector<std::string>& overrides,
                  std::uint64_t drop_index, const std::string& out_dir) {
  SweepSpec sw = load_sweep(config_path, overrides);
  ChannelDrop drop = generate_drop(sw.scenario, drop_index);

  std::vector<std::pair<std::string, CMat>> covs;
  for (int i = 0; i < sw.scenario.n_ue; ++i)
    covs.emplace_back("ue" + std::to_string(i), ue_srs_covariance(drop, i));
  covs.emplace_back("interferer",
                    noncoherent_interference_covariance(drop, sw.n_null_frames));
  {
    std::vector<CMat> q_ue;
    for (int i = 0; i < sw.scenario.n_ue; ++i) q_ue.push_back(covs[i].second);
    covs.emplace_back("aggregate", assemble_q(q_ue, drop.alpha_ue, &covs[sw.scenario.n_ue].second));
  }

  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    file.open(fs::path(out_dir) / ("drop_" + std::to_string(drop_index) + "_spectra.csv"));
    if (!file) throw std::runtime_error("cannot write to " + out_dir);
    os = &file;
  }
  *os << "matrix,index,eigenvalue\n";
  for (const auto& [name, m] : covs) {
    EigH e = hermitian_eig(m);
    for (std::size_t i = 0; i < e.values.size(); ++i)
      *os << name << ',' << i << ',' << e.values[i] << '\n';
    if (!out_dir.empty())
      save_blob(m, (fs::path(out_dir) / ("drop_" + std::to_string(drop_index) + "_" + name +
                                         ".cmb")).string());
  }
  if (!out_dir.empty())
    std::cout << "wrote spectra and covariance blobs for drop " << drop_index << " to "
              << out_dir << "\n";
  return 0;
}

int cmd_verify_complexity() {
  ComplexityReport rep = verify_complexity();
  for (const auto& f : rep.fits) {
    std::cout << f.model << ": coefficients";
    for (double c : f.coefficients) std::cout << ' ' << c;
    std::cout << ", max relative deviation " << 100 * f.max_rel_deviation << "%"
              << (f.within_15_percent() ? " (ok)" : " (exceeds 15%)") << "\n";
  }
  return rep.all_ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"long-term beamforming sweep simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::vector<std::string> overrides;
  int workers = 1;
  bool check = false;
  std::uint64_t drop_index = 0;

  auto* sim = app.add_subcommand("simulate", "run a sweep and emit CSV results");
  sim->add_option("--config", config_path, "sweep config file")->required();
  sim->add_option("--override", overrides, "key=value config override (repeatable)");
  sim->add_option("--out", out_dir, "output directory")->required();
  sim->add_option("--workers", workers, "worker thread count")->check(CLI::PositiveNumber);
  sim->add_flag("--check", check, "evaluate trend assertions; nonzero exit on failure");

  auto* dump = app.add_subcommand("dump-drop", "dump one drop's covariance spectra as CSV");
  dump->add_option("--config", config_path, "sweep config file")->required();
  dump->add_option("--override", overrides, "key=value config override (repeatable)");
  dump->add_option("--drop", drop_index, "drop index")->required();
  dump->add_option("--out", out_dir, "directory for spectra CSV and covariance blobs");

  auto* verify = app.add_subcommand("verify-complexity", "regress op counts against the models");
  verify->add_option("--config", config_path, "unused scenario config (accepted for symmetry)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(config_path, overrides, out_dir, workers, check);
    if (dump->parsed()) return cmd_dump_drop(config_path, overrides, drop_index, out_dir);
    return cmd_verify_complexity();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
