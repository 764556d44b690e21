#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mixboot/bootstrap.hpp"
#include "mixboot/config.hpp"
#include "mixboot/errors.hpp"
#include "mixboot/estimators.hpp"
#include "mixboot/io.hpp"
#include "mixboot/mixing.hpp"

namespace mixboot {

// ---------------------------------------------------------------------------
// Simulation designs. Every design uses a N(theta, 0.1^2) kernel except
// exponential-gamma, a positive-valued stand-in for squared returns.

struct SimulationSpec {
  std::string name;
  std::vector<double> atoms, weights;  // discrete G only
  double sigma = 0.1;
};

inline SimulationSpec simulation_spec(const std::string& name) {
  if (name == "discrete") return {name, {1.0, 3.0, 5.0}, {0.2, 0.5, 0.3}, 0.1};
  if (name == "normal" || name == "gamma" || name == "exponential-gamma") return {name, {}, {}, 0.1};
  throw ConfigError("unknown simulation spec '" + name +
                    "' (discrete | normal | gamma | exponential-gamma)");
}

// True mixing CDF of a design, where it has a simple closed form.
inline double true_mixing_cdf(const SimulationSpec& spec, double t) {
  if (spec.name == "discrete") {
    double s = 0.0;
    for (std::size_t j = 0; j < spec.atoms.size(); ++j)
      if (spec.atoms[j] <= t) s += spec.weights[j];
    return s;
  }
  if (spec.name == "normal") return 0.5 * std::erfc(-t / std::sqrt(2.0));
  throw ConfigError("no closed-form mixing CDF for '" + spec.name + "'");
}

inline Dataset simulate(const SimulationSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("simulate: n must be >= 1");
  Rng rng = make_rng(seed);
  std::vector<double> y(n);
  std::normal_distribution<double> z(0.0, 1.0);
  for (auto& v : y) {
    if (spec.name == "discrete") {
      if (spec.atoms.empty() || spec.atoms.size() != spec.weights.size())
        throw ConfigError("simulate: discrete spec needs matching atoms and weights");
      const double theta = spec.atoms[sample_index(spec.weights, rng)];
      v = theta + spec.sigma * z(rng);
    } else if (spec.name == "normal") {
      const double theta = z(rng);
      v = theta + spec.sigma * z(rng);
    } else if (spec.name == "gamma") {
      const double theta = std::gamma_distribution<double>(5.0, 0.5)(rng);  // shape 5, rate 2
      v = theta + spec.sigma * z(rng);
    } else if (spec.name == "exponential-gamma") {
      const double scale = std::gamma_distribution<double>(2.0, 1.0)(rng);
      v = scale * std::exponential_distribution<double>(1.0)(rng);
    } else {
      throw ConfigError("unknown simulation spec '" + spec.name + "'");
    }
  }
  return Dataset::from_values(std::move(y));
}

// ---------------------------------------------------------------------------
// Pipeline stages

// Independent streams under the user's seed. The bootstrap root is the seed
// itself so `bootstrap --seed S` reproduces the bootstrap stage of `run --seed S`.
inline std::uint64_t estimator_seed(std::uint64_t seed) { return derive_seed(seed, 0xE57ULL << 32); }
inline std::uint64_t simulation_seed(std::uint64_t seed) { return derive_seed(seed, 0x51AULL << 32); }

inline Dataset load_data(const RunConfig& cfg) {
  if (!cfg.simulate.empty())
    return simulate(simulation_spec(cfg.simulate), cfg.simulate_n, simulation_seed(*cfg.seed));
  return ingest(cfg.data_path);
}

struct EstimateStage {
  EstimatorReport report;
  Kernel kernel;  // kernel the bootstrap runs on (with sigma^2 fitted for em-bic)
};

inline EstimateStage run_estimate(const RunConfig& cfg, const Dataset& data) {
  cfg.validate();
  const Kernel kernel = cfg.make_kernel();
  switch (cfg.estimator) {
    case Estimator::Npmle: {
      NpmleOptions opt;
      opt.grid = default_grid(data.values(), kernel, cfg.grid_points);
      opt.max_iters = cfg.npmle_max_iters;
      opt.tol = cfg.npmle_tol;
      return {npmle(data, kernel, opt), kernel};
    }
    case Estimator::Newton: {
      auto g0 = GridMixing::uniform(default_grid(data.values(), kernel, cfg.grid_points));
      return {newton_estimate(data, kernel, g0), kernel};
    }
    case Estimator::EmBic: {
      EmOptions opt;
      opt.max_iters = cfg.em_max_iters;
      opt.tol = cfg.em_tol;
      opt.restarts = cfg.em_restarts;
      auto rep = bic_select(data, cfg.em_r_max, opt, estimator_seed(*cfg.seed));
      const double s2 = *rep.sigma2;
      return {std::move(rep), Kernel::gaussian_common_variance(s2)};
    }
  }
  throw ConfigError("unreachable estimator");
}

inline BootstrapConfig bootstrap_config(const RunConfig& cfg, const Dataset& data,
                                        const EstimateStage& est) {
  BootstrapConfig bc;
  bc.replicates = cfg.replicates;
  bc.inner_iters = cfg.inner_iters;
  bc.policy = StepPolicy::defaults_for(est.kernel, data.size());
  if (cfg.g_mode) bc.policy.mode = *cfg.g_mode;
  if (cfg.eta_offset) bc.policy.offset = *cfg.eta_offset;
  bc.root_seed = *cfg.seed;
  bc.workers = cfg.workers;
  if (est.report.sigma2 && est.kernel.family() == Family::GaussianCommonVariance) {
    bc.sigma2 = est.report.sigma2;
    bc.sigma2_min = 1e-8 * population_variance(data.values());
  }
  bc.scheme = std::holds_alternative<GridMixing>(est.report.estimate) ? Scheme::NewtonContinuation
                                                                      : Scheme::Bbm;
  bc.randomize_order = bc.scheme == Scheme::NewtonContinuation && cfg.newton_randomize_order;
  return bc;
}

inline ReplicateSet run_bootstrap(const RunConfig& cfg, const Dataset& data,
                                  const EstimateStage& est) {
  const auto bc = bootstrap_config(cfg, data, est);
  if (bc.scheme == Scheme::NewtonContinuation) {
    const auto& start = est.report.grid();
    const auto g0 = GridMixing::uniform(std::vector<double>(start.grid().begin(), start.grid().end()));
    return newton_run(start, est.kernel, data, g0, bc);
  }
  auto set = bbm_run(est.report.discrete(), est.kernel, bc);
  set.data_digest = data.digest();
  return set;
}

inline GridSpec default_summary_grid(const Dataset& data, const Kernel& kernel) {
  const auto g = default_grid(data.values(), kernel, 2);
  double lo = g.front();
  if (kernel.family() == Family::Exponential) lo = 0.0;
  return {lo, g.back(), 201};
}

inline Bands run_summary(const ReplicateSet& set, const GridSpec& grid,
                         const std::vector<double>& quantiles) {
  const auto points = linspace(grid.lo, grid.hi, grid.steps);
  return summarize(set, points, quantiles);
}

struct PipelineArtifacts {
  std::filesystem::path estimate_json, estimate_csv, replicates_csv, manifest_json, bands_csv;
};

inline std::string mixing_csv_text(const std::variant<DiscreteMixing, GridMixing>& g) {
  std::ostringstream os;
  std::visit([&](const auto& m) { write_mixing_csv(os, m); }, g);
  return os.str();
}

/// estimate -> bootstrap -> summarize, writing every artifact under cfg.out.
/// Output bytes depend only on (config, data, seed).
inline PipelineArtifacts run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.out.empty()) throw ConfigError("an output directory is required (out = <dir> or --out)");
  const Dataset data = load_data(cfg);
  const std::string cdig = cfg.digest();
  const std::filesystem::path out(cfg.out);
  std::filesystem::create_directories(out);
  if (!cfg.simulate.empty()) write_file(out / "data.csv", dataset_to_csv(data));

  const auto est = run_estimate(cfg, data);
  PipelineArtifacts a{out / "estimate.json", out / "estimate.csv", out / "replicates.csv",
                      out / "manifest.json", out / "bands.csv"};
  write_file(a.estimate_json, report_to_json(est.report, est.kernel, cdig).dump(2) + "\n");
  write_file(a.estimate_csv, provenance_line(cdig, data.digest()) + mixing_csv_text(est.report.estimate));

  const auto set = run_bootstrap(cfg, data, est);
  write_file(a.replicates_csv, replicates_to_csv(set, cdig));
  write_file(a.manifest_json, replicates_manifest(set, cdig).dump(2) + "\n");

  const auto grid = cfg.summary_grid ? *cfg.summary_grid : default_summary_grid(data, est.kernel);
  write_file(a.bands_csv, bands_to_csv(run_summary(set, grid, cfg.quantiles), cdig, data.digest()));
  return a;
}

}  // namespace mixboot
