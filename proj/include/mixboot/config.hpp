#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mixboot/bootstrap.hpp"
#include "mixboot/digest.hpp"
#include "mixboot/errors.hpp"
#include "mixboot/kernels.hpp"

namespace mixboot {

enum class Estimator { Npmle, Newton, EmBic };

inline std::string_view estimator_name(Estimator e) {
  switch (e) {
    case Estimator::Npmle: return "npmle";
    case Estimator::Newton: return "newton";
    case Estimator::EmBic: return "em-bic";
  }
  return "?";
}

inline Estimator parse_estimator(std::string_view s) {
  if (s == "npmle") return Estimator::Npmle;
  if (s == "newton") return Estimator::Newton;
  if (s == "em-bic") return Estimator::EmBic;
  throw ConfigError("unknown estimator '" + std::string(s) + "' (npmle | newton | em-bic)");
}

// lo:hi:steps
struct GridSpec {
  double lo = 0.0, hi = 1.0;
  std::size_t steps = 2;
};

inline GridSpec parse_grid_spec(std::string_view s) {
  GridSpec g;
  std::string text(s);
  for (char& c : text)
    if (c == ':') c = ' ';
  std::istringstream ss(text);
  std::string extra;
  if (!(ss >> g.lo >> g.hi >> g.steps) || (ss >> extra) || !(g.hi > g.lo) || g.steps < 2)
    throw ConfigError("grid spec must be lo:hi:steps with hi > lo and steps >= 2, got '" +
                      std::string(s) + "'");
  return g;
}

inline std::string grid_spec_text(const GridSpec& g) {
  return format_double(g.lo) + ":" + format_double(g.hi) + ":" + std::to_string(g.steps);
}

/// Everything a pipeline run needs. Parsed from a flat `key = value` file;
/// command-line settings are applied on top.
struct RunConfig {
  // data: either a file or a named simulation design
  std::string data_path;
  std::string simulate;  // discrete | normal | gamma | exponential-gamma
  std::size_t simulate_n = 100;

  std::string kernel = "gaussian-location";
  double sigma = 0.1;

  Estimator estimator = Estimator::Npmle;
  std::size_t grid_points = 300;
  std::size_t npmle_max_iters = 100000;
  double npmle_tol = 1e-8;
  std::size_t em_r_max = 8;
  std::size_t em_restarts = 10;
  std::size_t em_max_iters = 1000;
  double em_tol = 1e-10;
  bool newton_randomize_order = true;

  std::size_t replicates = 100;
  std::size_t inner_iters = 10000;
  std::optional<StepMode> g_mode;          // default: per kernel
  std::optional<std::size_t> eta_offset;   // default: n
  std::size_t workers = 1;

  std::optional<GridSpec> summary_grid;  // default: data range +- 3 sd, 201 points
  std::vector<double> quantiles{0.025, 0.5, 0.975};

  std::optional<std::uint64_t> seed;
  std::string out;

  Kernel make_kernel() const {
    switch (parse_family(kernel)) {
      case Family::GaussianLocation: return Kernel::gaussian_location(sigma);
      case Family::GaussianCommonVariance: return Kernel::gaussian_common_variance(1.0);
      case Family::Exponential: return Kernel::exponential();
      case Family::PointMass: break;
    }
    throw ConfigError("kernel 'point-mass' is not available in pipelines");
  }

  // Rejects bad values and incompatible estimator/kernel pairs.
  void validate() const {
    if (!seed) throw ConfigError("a seed is required (seed = <u64> or --seed)");
    if (data_path.empty() == simulate.empty())
      throw ConfigError("set exactly one of 'data' and 'simulate'");
    Family fam{};
    try {
      fam = parse_family(kernel);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (fam == Family::PointMass) throw ConfigError("kernel 'point-mass' is not available in pipelines");
    if (fam == Family::GaussianLocation && !(sigma > 0.0))
      throw ConfigError("sigma must be positive");
    switch (estimator) {
      case Estimator::Npmle:
        if (fam != Family::GaussianLocation)
          throw ConfigError("estimator npmle needs a bounded kernel (gaussian-location); '" + kernel +
                            "' is unbounded, use newton or em-bic");
        break;
      case Estimator::EmBic:
        if (fam != Family::GaussianCommonVariance)
          throw ConfigError("estimator em-bic needs kernel gaussian-common-variance");
        break;
      case Estimator::Newton:
        if (fam == Family::GaussianCommonVariance)
          throw ConfigError("estimator newton needs a kernel without a free variance");
        break;
    }
    auto positive = [](std::size_t v, const char* what) {
      if (v < 1) throw ConfigError(std::string(what) + " must be >= 1");
    };
    positive(simulate.empty() ? 1 : simulate_n, "simulate.n");
    positive(grid_points, "grid.points");
    positive(npmle_max_iters, "npmle.max_iters");
    positive(em_r_max, "em.r_max");
    positive(em_restarts, "em.restarts");
    positive(em_max_iters, "em.max_iters");
    positive(replicates, "bootstrap.replicates");
    positive(inner_iters, "bootstrap.inner_iters");
    positive(workers, "bootstrap.workers");
    if (!(npmle_tol > 0.0) || !(em_tol > 0.0)) throw ConfigError("tolerances must be positive");
    for (double q : quantiles)
      if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("quantiles must lie in [0, 1]");
  }

  // Canonical text of every result-affecting setting. Excludes the output
  // directory, the data path (the data digest covers content) and the worker
  // count.
  std::string canonical() const {
    std::ostringstream os;
    os << "simulate=" << simulate << "\nsimulate.n=" << simulate_n << "\nkernel=" << kernel
       << "\nsigma=" << format_double(sigma) << "\nestimator=" << estimator_name(estimator)
       << "\ngrid.points=" << grid_points << "\nnpmle.max_iters=" << npmle_max_iters
       << "\nnpmle.tol=" << format_double(npmle_tol) << "\nem.r_max=" << em_r_max
       << "\nem.restarts=" << em_restarts << "\nem.max_iters=" << em_max_iters
       << "\nem.tol=" << format_double(em_tol)
       << "\nnewton.randomize_order=" << newton_randomize_order
       << "\nbootstrap.replicates=" << replicates << "\nbootstrap.inner_iters=" << inner_iters
       << "\nbootstrap.g_mode=" << (g_mode ? step_mode_name(*g_mode) : "auto")
       << "\nbootstrap.eta_offset=" << (eta_offset ? std::to_string(*eta_offset) : "n")
       << "\nsummary.grid=" << (summary_grid ? grid_spec_text(*summary_grid) : "auto")
       << "\nsummary.quantiles=";
    for (std::size_t i = 0; i < quantiles.size(); ++i)
      os << (i ? "," : "") << format_double(quantiles[i]);
    os << "\nseed=" << (seed ? std::to_string(*seed) : "") << "\n";
    return os.str();
  }

  std::string digest() const { return digest_hex(canonical()); }
};

namespace detail {

inline std::string strip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

template <typename T>
T parse_value(const std::string& key, const std::string& v) {
  std::istringstream ss(v);
  T out{};
  std::string rest;
  if constexpr (std::is_unsigned_v<T>) {
    if (!v.empty() && v.front() == '-') throw ConfigError(key + ": expected a nonnegative integer");
  }
  if (!(ss >> out) || (ss >> rest)) throw ConfigError(key + ": cannot parse '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

}  // namespace detail

// Applies one `key = value` setting.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_value;
  const std::string& v = value;
  if (key == "data") c.data_path = v;
  else if (key == "simulate") c.simulate = v;
  else if (key == "simulate.n") c.simulate_n = parse_value<std::size_t>(key, v);
  else if (key == "kernel") c.kernel = v;
  else if (key == "sigma") c.sigma = parse_value<double>(key, v);
  else if (key == "estimator") c.estimator = parse_estimator(v);
  else if (key == "grid.points") c.grid_points = parse_value<std::size_t>(key, v);
  else if (key == "npmle.max_iters") c.npmle_max_iters = parse_value<std::size_t>(key, v);
  else if (key == "npmle.tol") c.npmle_tol = parse_value<double>(key, v);
  else if (key == "em.r_max") c.em_r_max = parse_value<std::size_t>(key, v);
  else if (key == "em.restarts") c.em_restarts = parse_value<std::size_t>(key, v);
  else if (key == "em.max_iters") c.em_max_iters = parse_value<std::size_t>(key, v);
  else if (key == "em.tol") c.em_tol = parse_value<double>(key, v);
  else if (key == "newton.randomize_order") c.newton_randomize_order = detail::parse_bool(key, v);
  else if (key == "bootstrap.replicates") c.replicates = parse_value<std::size_t>(key, v);
  else if (key == "bootstrap.inner_iters") c.inner_iters = parse_value<std::size_t>(key, v);
  else if (key == "bootstrap.g_mode") {
    if (v == "auto") c.g_mode.reset();
    else {
      try {
        c.g_mode = parse_step_mode(v);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  } else if (key == "bootstrap.eta_offset") {
    if (v == "n") c.eta_offset.reset();
    else c.eta_offset = parse_value<std::size_t>(key, v);
  } else if (key == "bootstrap.workers") c.workers = parse_value<std::size_t>(key, v);
  else if (key == "summary.grid") {
    if (v == "auto") c.summary_grid.reset();
    else c.summary_grid = parse_grid_spec(v);
  } else if (key == "summary.quantiles") {
    c.quantiles.clear();
    std::stringstream ss(v);
    for (std::string tok; std::getline(ss, tok, ',');)
      c.quantiles.push_back(parse_value<double>(key, detail::strip(tok)));
  } else if (key == "seed") c.seed = parse_value<std::uint64_t>(key, v);
  else if (key == "out") c.out = v;
  else throw ConfigError("unknown config key '" + key + "'");
}

inline void apply_settings(RunConfig& c, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::strip(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    apply_setting(c, detail::strip(t.substr(0, eq)), detail::strip(t.substr(eq + 1)));
  }
}

inline RunConfig parse_run_config(std::string_view text) {
  RunConfig c;
  apply_settings(c, text);
  return c;
}

}  // namespace mixboot
