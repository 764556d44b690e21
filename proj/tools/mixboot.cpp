// mixboot: posterior draws of a mixing distribution from data.
//
//   mixboot simulate  --spec discrete --n 100 --seed 1 --out data.csv
//   mixboot estimate  --data data.csv --method npmle --seed 1 --out est/
//   mixboot bootstrap --data data.csv --estimate est/estimate.json --seed 1 --out boot/
//   mixboot summarize --replicates boot/ --grid 0:6:50 --out bands.csv
//   mixboot run       --config run.cfg --seed 1 --out results/

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mixboot/mixboot.hpp"

namespace fs = std::filesystem;
using namespace mixboot;

namespace {

int fail(const char* category, int code, const std::string& what) {
  std::cerr << "mixboot: error[" << category << "]: " << what << "\n";
  return code;
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian bootstrap for nonparametric mixture models"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Full pipeline: estimate, bootstrap, summarize");
  std::string run_config_path, run_out;
  std::uint64_t run_seed = 0;
  std::size_t run_workers = 0;
  std::vector<std::string> run_sets;
  run->add_option("--config", run_config_path, "key = value config file")->required();
  auto* run_seed_opt = run->add_option("--seed", run_seed, "root seed (overrides the file)");
  run->add_option("--out", run_out, "output directory (overrides the file)");
  run->add_option("--workers", run_workers, "replicate worker threads");
  run->add_option("--set", run_sets, "extra key=value settings, applied last");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Write a simulated dataset");
  std::string sim_spec, sim_out;
  std::size_t sim_n = 0;
  std::uint64_t sim_seed = 0;
  sim->add_option("--spec", sim_spec, "discrete | normal | gamma | exponential-gamma")->required();
  sim->add_option("--n", sim_n, "sample size")->required();
  sim->add_option("--seed", sim_seed, "seed")->required();
  sim->add_option("--out", sim_out, "output CSV")->required();

  // estimate
  auto* est = app.add_subcommand("estimate", "Initial estimate of the mixing distribution");
  std::string est_data, est_method, est_out, est_kernel;
  double est_sigma = 0.1;
  std::size_t est_rmax = 8, est_grid = 300;
  std::uint64_t est_seed = 0;
  est->add_option("--data", est_data, "data file")->required();
  est->add_option("--method", est_method, "npmle | newton | em-bic")->required();
  est->add_option("--kernel", est_kernel, "kernel family (default per method)");
  est->add_option("--sigma", est_sigma, "gaussian-location sigma");
  est->add_option("--r-max", est_rmax, "largest r for em-bic");
  est->add_option("--grid-points", est_grid, "grid size for npmle/newton");
  est->add_option("--seed", est_seed, "seed")->required();
  est->add_option("--out", est_out, "output directory")->required();

  // bootstrap
  auto* boot = app.add_subcommand("bootstrap", "Posterior draws from an estimate");
  std::string boot_data, boot_est, boot_out, boot_gmode = "auto";
  std::size_t boot_m = 100, boot_iters = 10000, boot_workers = 1;
  std::optional<std::size_t> boot_offset;
  bool boot_keep_order = false;
  std::uint64_t boot_seed = 0;
  boot->add_option("--data", boot_data, "data file the estimate was computed from")->required();
  boot->add_option("--estimate", boot_est, "estimate.json")->required();
  boot->add_option("--replicates", boot_m, "number of posterior draws M");
  boot->add_option("--inner-iters", boot_iters, "stochastic-gradient steps per draw");
  boot->add_option("--g-mode", boot_gmode, "compact | fisher | auto");
  boot->add_option("--eta-offset", boot_offset, "offset in eta_m = 1/(m + offset + 1)");
  boot->add_flag("--keep-order", boot_keep_order, "newton: do not reshuffle data per replicate");
  boot->add_option("--workers", boot_workers, "worker threads");
  boot->add_option("--seed", boot_seed, "root seed")->required();
  boot->add_option("--out", boot_out, "output directory")->required();

  // summarize
  auto* summ = app.add_subcommand("summarize", "Pointwise bands over replicate CDFs and densities");
  std::string summ_dir, summ_grid, summ_out, summ_q = "0.025,0.5,0.975";
  summ->add_option("--replicates", summ_dir, "bootstrap output directory")->required();
  summ->add_option("--grid", summ_grid, "lo:hi:steps")->required();
  summ->add_option("--quantiles", summ_q, "comma-separated quantile levels");
  summ->add_option("--out", summ_out, "bands CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ConfigError::exit_code;
  }

  try {
    if (*run) {
      RunConfig cfg = parse_run_config(read_file(run_config_path));
      if (*run_seed_opt) cfg.seed = run_seed;
      if (!run_out.empty()) cfg.out = run_out;
      if (run_workers > 0) cfg.workers = run_workers;
      apply_overrides(cfg, run_sets);
      const auto a = run_pipeline(cfg);
      std::cout << "wrote " << a.estimate_json.string() << ", " << a.replicates_csv.string() << ", "
                << a.manifest_json.string() << ", " << a.bands_csv.string() << "\n";
    } else if (*sim) {
      const auto data = simulate(simulation_spec(sim_spec), sim_n, sim_seed);
      write_file(sim_out, dataset_to_csv(data));
      std::cout << "wrote " << sim_out << " (n = " << data.size() << ")\n";
    } else if (*est) {
      RunConfig cfg;
      cfg.data_path = est_data;
      cfg.estimator = parse_estimator(est_method);
      cfg.kernel = !est_kernel.empty() ? est_kernel
                   : cfg.estimator == Estimator::EmBic ? "gaussian-common-variance"
                                                       : "gaussian-location";
      cfg.sigma = est_sigma;
      cfg.em_r_max = est_rmax;
      cfg.grid_points = est_grid;
      cfg.seed = est_seed;
      cfg.validate();
      const Dataset data = ingest(cfg.data_path);
      const auto stage = run_estimate(cfg, data);
      const fs::path out(est_out);
      write_file(out / "estimate.json",
                 report_to_json(stage.report, stage.kernel, cfg.digest()).dump(2) + "\n");
      write_file(out / "estimate.csv", provenance_line(cfg.digest(), data.digest()) +
                                         mixing_csv_text(stage.report.estimate));
      std::cout << "wrote " << (out / "estimate.json").string() << "\n";
    } else if (*boot) {
      const Dataset data = ingest(boot_data);
      auto loaded = report_from_json(json::parse(read_file(boot_est)));
      if (loaded.report.data_digest != data.digest())
        throw DataError("data digest " + data.digest() + " does not match the estimate's " +
                        loaded.report.data_digest);
      RunConfig cfg;
      cfg.data_path = boot_data;
      cfg.kernel = std::string(loaded.kernel.name());
      if (loaded.kernel.family() == Family::GaussianLocation) cfg.sigma = loaded.kernel.sigma();
      cfg.estimator = parse_estimator(loaded.report.method == "em" ? "em-bic" : loaded.report.method);
      cfg.replicates = boot_m;
      cfg.inner_iters = boot_iters;
      apply_setting(cfg, "bootstrap.g_mode", boot_gmode);
      cfg.eta_offset = boot_offset;
      cfg.newton_randomize_order = !boot_keep_order;
      cfg.workers = boot_workers;
      cfg.seed = boot_seed;
      cfg.validate();
      const EstimateStage stage{std::move(loaded.report), loaded.kernel};
      const auto set = run_bootstrap(cfg, data, stage);
      const fs::path out(boot_out);
      write_file(out / "replicates.csv", replicates_to_csv(set, cfg.digest()));
      write_file(out / "manifest.json", replicates_manifest(set, cfg.digest()).dump(2) + "\n");
      std::cout << "wrote " << set.size() << " replicates to " << out.string() << "\n";
    } else if (*summ) {
      const fs::path dir(summ_dir);
      const auto manifest = json::parse(read_file(dir / "manifest.json"));
      const auto set = read_replicate_set(manifest, read_file(dir / "replicates.csv"));
      RunConfig q;
      apply_setting(q, "summary.quantiles", summ_q);
      const auto bands = run_summary(set, parse_grid_spec(summ_grid), q.quantiles);
      write_file(summ_out, bands_to_csv(bands, manifest.at("config_digest").get<std::string>(),
                                        set.data_digest));
      std::cout << "wrote " << summ_out << "\n";
    }
  } catch (const ConfigError& e) {
    return fail("config", ConfigError::exit_code, e.what());
  } catch (const DataError& e) {
    return fail("data", DataError::exit_code, e.what());
  } catch (const NumericError& e) {
    return fail("numeric", NumericError::exit_code, e.what());
  } catch (const json::exception& e) {
    return fail("data", DataError::exit_code, e.what());
  } catch (const std::invalid_argument& e) {
    return fail("config", ConfigError::exit_code, e.what());
  } catch (const std::exception& e) {
    return fail("internal", 1, e.what());
  }
  return 0;
}
