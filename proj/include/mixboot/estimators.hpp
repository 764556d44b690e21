#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mixboot/digest.hpp"
#include "mixboot/errors.hpp"
#include "mixboot/kernels.hpp"
#include "mixboot/mixing.hpp"
#include "mixboot/numeric.hpp"
#include "mixboot/random.hpp"

namespace mixboot {

/// Observed sample y_1..y_n with a provenance digest.
class Dataset {
 public:
  Dataset(std::vector<double> values, std::string digest)
      : values_(std::move(values)), digest_(std::move(digest)) {
    for (double v : values_)
      if (!std::isfinite(v)) throw DataError("dataset contains a non-finite value");
  }

  // Digest computed over the 17-digit text rendering of the values.
  static Dataset from_values(std::vector<double> values) {
    Fnv1a h;
    for (double v : values) h.update(format_double(v)).update("\n");
    std::string d = h.hex();
    return Dataset(std::move(values), std::move(d));
  }

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  std::span<const double> values() const noexcept { return values_; }
  const std::string& digest() const noexcept { return digest_; }

 private:
  std::vector<double> values_;
  std::string digest_;
};

struct BicRow {
  std::size_t r = 0;
  bool ok = false;  // false when EM collapsed for every restart
  double log_likelihood = 0.0;
  std::size_t dof = 0;
  double bic = 0.0;
};

struct EstimatorReport {
  EstimatorReport(std::string method_name, std::variant<DiscreteMixing, GridMixing> est)
      : method(std::move(method_name)), estimate(std::move(est)) {}

  std::string method;
  std::variant<DiscreteMixing, GridMixing> estimate;
  double log_likelihood = 0.0;
  std::size_t iterations = 0;
  std::optional<double> optimality_gap;    // npmle
  std::optional<double> sigma2;            // em / em-bic
  std::optional<std::size_t> r_selected;   // em-bic
  std::vector<BicRow> bic_table;           // em-bic
  std::vector<double> log_likelihood_trace;  // em: per-iteration, best restart
  std::string step_rule;                   // newton
  std::optional<std::uint64_t> seed;
  std::string data_digest;

  const DiscreteMixing& discrete() const { return std::get<DiscreteMixing>(estimate); }
  const GridMixing& grid() const { return std::get<GridMixing>(estimate); }
};

template <MixingDistribution G>
double log_likelihood(const G& g, const Kernel& kernel, std::span<const double> data) {
  double ll = 0.0;
  for (double y : data) ll += log_mixture_density(g, kernel, y);
  return ll;
}

// ---------------------------------------------------------------------------
// NPMLE by the averaged-posterior fixed-point iteration on a grid.

struct NpmleOptions {
  std::vector<double> grid;  // empty: default_grid(data)
  std::size_t max_iters = 100000;
  double tol = 1e-8;          // on the max absolute mass change
  double prune_below = 1e-4;  // atoms with mass <= this are dropped
};

// max over grid theta of sum_i k(y_i | theta) / f_G(y_i), minus n. Nonpositive
// at the exact maximizer over measures supported on the grid.
inline double npmle_optimality_gap(const DiscreteMixing& g, std::span<const double> data,
                                   const Kernel& kernel, std::span<const double> grid) {
  std::vector<double> logf(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) logf[i] = log_mixture_density(g, kernel, data[i]);
  double best = -std::numeric_limits<double>::infinity();
  for (double theta : grid) {
    double s = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
      s += std::exp(kernel.log_density(data[i], theta) - logf[i]);
    best = std::max(best, s);
  }
  return best - static_cast<double>(data.size());
}

inline EstimatorReport npmle(const Dataset& data, const Kernel& kernel, NpmleOptions opt = {}) {
  if (!kernel.is_bounded())
    throw ConfigError("npmle needs a bounded kernel; '" + std::string(kernel.name()) +
                      "' is unbounded, use the newton estimator or em-bic instead");
  if (data.empty()) throw DataError("npmle: empty dataset");
  if (opt.grid.empty()) opt.grid = default_grid(data.values(), kernel);

  const std::size_t n = data.size();
  const std::size_t K = opt.grid.size();
  const auto y = data.values();

  // Row-scaled kernel matrix: lik[i*K + k] = k(y_i | g_k) / max_k k(y_i | g_k).
  // The per-row scale cancels in every posterior ratio.
  std::vector<double> lik(n * K);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = kNegInf;
    for (std::size_t k = 0; k < K; ++k) {
      lik[i * K + k] = kernel.log_density(y[i], opt.grid[k]);
      mx = std::max(mx, lik[i * K + k]);
    }
    for (std::size_t k = 0; k < K; ++k) lik[i * K + k] = std::exp(lik[i * K + k] - mx);
  }

  // One averaged-posterior sweep over the columns in `cols`; returns the max
  // absolute mass change.
  std::vector<double> acc(K);
  auto sweep = [&](std::vector<double>& mass, const std::vector<std::size_t>& cols) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = &lik[i * K];
      double f = 0.0;
      for (std::size_t c : cols) f += row[c] * mass[c];
      const double inv = 1.0 / f;
      for (std::size_t c : cols) acc[c] += row[c] * inv;
    }
    double change = 0.0;
    for (std::size_t c : cols) {
      const double next = mass[c] * acc[c] / static_cast<double>(n);
      change = std::max(change, std::abs(next - mass[c]));
      mass[c] = next;
    }
    return change;
  };

  std::vector<double> mass(K, 1.0 / static_cast<double>(K));
  std::vector<std::size_t> cols(K);
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  std::size_t iters = 0;
  while (iters < opt.max_iters) {
    ++iters;
    if (sweep(mass, cols) < opt.tol) break;
  }

  // Prune, renormalize, then continue the same iteration on the kept atoms so
  // the returned weights are a fixed point of the reduced problem.
  std::vector<std::size_t> kept;
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k)
    if (mass[k] > opt.prune_below) kept.push_back(k), total += mass[k];
  if (!kept.empty()) {
    std::vector<double> reduced(K, 0.0);
    for (std::size_t k : kept) reduced[k] = mass[k] / total;
    mass = std::move(reduced);
    while (iters < opt.max_iters) {
      ++iters;
      if (sweep(mass, kept) < opt.tol) break;
    }
  }

  std::vector<double> atoms, weights;
  for (std::size_t k : kept) {
    atoms.push_back(opt.grid[k]);
    weights.push_back(mass[k]);
  }
  if (atoms.empty()) throw NumericError("npmle: every grid mass fell below the pruning threshold");
  if (atoms.size() > n)
    throw NumericError("npmle: " + std::to_string(atoms.size()) + " atoms retained for n = " +
                       std::to_string(n) +
                        "; the grid optimum is not unique or has not converged");
  auto est = DiscreteMixing::normalized(std::move(atoms), std::move(weights));

  EstimatorReport rep("npmle", est);
  rep.log_likelihood = log_likelihood(est, kernel, y);
  rep.iterations = iters;
  rep.optimality_gap = npmle_optimality_gap(est, y, kernel, opt.grid);
  rep.data_digest = data.digest();
  return rep;
}

// ---------------------------------------------------------------------------
// Newton's recursive estimator on a fixed grid.

// Step size of the recursion at index i (0-based).
inline double newton_step_size(std::size_t i) { return 1.0 / (static_cast<double>(i) + 2.0); }

// One recursion step: masses <- (1 - eta) masses + eta * posterior(. | y).
// `scratch` must have g.size() elements.
inline void newton_update(std::vector<double>& masses, std::span<const double> grid,
                          const Kernel& kernel, double y, double eta, std::span<double> scratch) {
  for (std::size_t k = 0; k < masses.size(); ++k)
    scratch[k] = (masses[k] > 0.0 ? std::log(masses[k]) : kNegInf) + kernel.log_density(y, grid[k]);
  responsibilities(scratch);
  blend_toward(masses, scratch, eta);
}

inline EstimatorReport newton_estimate(const Dataset& data, const Kernel& kernel,
                                       const GridMixing& g0,
                                       std::optional<std::uint64_t> order_seed = std::nullopt) {
  std::vector<double> y(data.values().begin(), data.values().end());
  if (order_seed) {
    Rng rng = make_rng(*order_seed);
    std::shuffle(y.begin(), y.end(), rng);
  }
  std::vector<double> masses(g0.weights().begin(), g0.weights().end());
  std::vector<double> scratch(masses.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    newton_update(masses, g0.grid(), kernel, y[i], newton_step_size(i), scratch);

  GridMixing est(std::vector<double>(g0.grid().begin(), g0.grid().end()), std::move(masses));
  EstimatorReport rep("newton", est);
  rep.log_likelihood = data.empty() ? 0.0 : log_likelihood(est, kernel, data.values());
  rep.iterations = y.size();
  rep.step_rule = "eta_i = 1/(i+2)";
  rep.seed = order_seed;
  rep.data_digest = data.digest();
  return rep;
}

// ---------------------------------------------------------------------------
// EM for a Gaussian location mixture with one shared variance.

struct EmOptions {
  std::size_t max_iters = 1000;
  double tol = 1e-10;  // stop when the log-likelihood gain falls below this
  std::size_t restarts = 10;
  double collapse_ratio = 1e-6;  // sigma^2 below ratio * var(data) is a collapse
};

namespace detail {

struct EmRun {
  bool ok = false;
  std::vector<double> means, weights;
  double sigma2 = 0.0;
  double ll = -std::numeric_limits<double>::infinity();
  std::vector<double> trace;
};

// Expects sorted y.
inline EmRun em_single_start(std::span<const double> y, std::size_t r, const EmOptions& opt,
                             double data_var, Rng& rng) {
  const std::size_t n = y.size();
  EmRun run;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  run.means.resize(r);
  for (std::size_t j = 0; j < r; ++j) run.means[j] = y[idx[j]];
  run.weights.assign(r, 1.0 / static_cast<double>(r));
  run.sigma2 = data_var;

  const double floor = opt.collapse_ratio * data_var;
  std::vector<double> resp(n * r), nk(r), sum_y(r);
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    // E-step
    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * run.sigma2);
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::span<double> row(&resp[i * r], r);
      for (std::size_t j = 0; j < r; ++j) {
        const double z = y[i] - run.means[j];
        row[j] = (run.weights[j] > 0.0 ? std::log(run.weights[j]) : kNegInf) + log_norm -
                 z * z / (2.0 * run.sigma2);
      }
      ll += responsibilities(row);
    }
    run.trace.push_back(ll);
    run.ll = ll;
    if (ll - prev < opt.tol && it > 0) break;
    prev = ll;

    // M-step
    std::fill(nk.begin(), nk.end(), 0.0);
    std::fill(sum_y.begin(), sum_y.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < r; ++j) {
        nk[j] += resp[i * r + j];
        sum_y[j] += resp[i * r + j] * y[i];
      }
    for (std::size_t j = 0; j < r; ++j) {
      run.weights[j] = nk[j] / static_cast<double>(n);
      if (nk[j] > 0.0) run.means[j] = sum_y[j] / nk[j];
    }
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < r; ++j) {
        const double z = y[i] - run.means[j];
        ss += resp[i * r + j] * z * z;
      }
    run.sigma2 = ss / static_cast<double>(n);
    if (!(run.sigma2 >= floor)) return run;  // collapsed, ok stays false
  }
  run.ok = std::isfinite(run.ll);
  return run;
}

}  // namespace detail

inline EstimatorReport em_common_variance(const Dataset& data, std::size_t r,
                                          const EmOptions& opt, std::uint64_t seed) {
  const std::size_t n = data.size();
  if (r < 1 || r > n)
    throw ConfigError("em: need 1 <= r <= n (r = " + std::to_string(r) +
                      ", n = " + std::to_string(n) + ")");
  std::vector<double> y(data.values().begin(), data.values().end());
  std::sort(y.begin(), y.end());
  const double var = population_variance(y);
  if (!(var > 0.0)) throw NumericError("em: data have zero variance, sigma^2 collapses for every r");

  detail::EmRun best;
  const std::size_t starts = std::max<std::size_t>(1, opt.restarts);
  for (std::size_t s = 0; s < starts; ++s) {
    Rng rng = make_rng(derive_seed(seed, s));
    auto run = detail::em_single_start(y, r, opt, var, rng);
    if (run.ok && (!best.ok || run.ll > best.ll)) best = std::move(run);
  }
  if (!best.ok)
    throw NumericError("em: shared variance collapsed below " + format_double(opt.collapse_ratio) +
                       " x var(data) in every restart (r = " + std::to_string(r) +
                       " is too large)");

  auto est = DiscreteMixing::normalized(best.means, best.weights);
  EstimatorReport rep("em", est);
  rep.log_likelihood = best.ll;
  rep.iterations = best.trace.size();
  rep.sigma2 = best.sigma2;
  rep.log_likelihood_trace = std::move(best.trace);
  rep.seed = seed;
  rep.data_digest = data.digest();
  return rep;
}

// Free parameters of an r-component shared-variance mixture:
// (r - 1) weights + r means + 1 variance.
inline std::size_t bic_degrees_of_freedom(std::size_t r) { return 2 * r; }

// Fits r = 1..r_max and keeps the maximizer of 2 log L - log(n) d. Ties go to
// the smaller r. Collapsed fits become rows with ok = false.
inline EstimatorReport bic_select(const Dataset& data, std::size_t r_max, const EmOptions& opt,
                                  std::uint64_t seed) {
  if (r_max < 1) throw ConfigError("bic_select: r_max must be >= 1");
  const double logn = std::log(static_cast<double>(data.size()));
  std::vector<BicRow> table;
  std::optional<EstimatorReport> best;
  double best_bic = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 1; r <= std::min(r_max, data.size()); ++r) {
    BicRow row;
    row.r = r;
    row.dof = bic_degrees_of_freedom(r);
    try {
      auto rep = em_common_variance(data, r, opt, derive_seed(seed, r));
      row.ok = true;
      row.log_likelihood = rep.log_likelihood;
      row.bic = 2.0 * rep.log_likelihood - logn * static_cast<double>(row.dof);
      if (row.bic > best_bic) {
        best_bic = row.bic;
        best = std::move(rep);
      }
    } catch (const NumericError&) {
      row.ok = false;
    }
    table.push_back(row);
  }
  if (!best) throw NumericError("bic_select: EM collapsed for every r in 1.." + std::to_string(r_max));
  best->method = "em-bic";
  best->r_selected = best->discrete().size();
  best->bic_table = std::move(table);
  best->seed = seed;
  return std::move(*best);
}

}  // namespace mixboot
