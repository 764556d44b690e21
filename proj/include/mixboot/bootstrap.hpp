#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "mixboot/estimators.hpp"
#include "mixboot/kernels.hpp"
#include "mixboot/mixing.hpp"
#include "mixboot/numeric.hpp"
#include "mixboot/random.hpp"

namespace mixboot {

// ---------------------------------------------------------------------------
// Step sizes

enum class StepMode {
  Compact,       // g = 1
  FisherScaled,  // g = 1 / sqrt(I(theta_m) I(theta_n) w_m)
};

inline std::string_view step_mode_name(StepMode m) {
  return m == StepMode::Compact ? "compact" : "fisher";
}

inline StepMode parse_step_mode(std::string_view s) {
  if (s == "compact") return StepMode::Compact;
  if (s == "fisher" || s == "fisher-scaled") return StepMode::FisherScaled;
  throw std::invalid_argument("unknown g-mode '" + std::string(s) + "'");
}

/// eta_m = 1 / (m + offset + 1), with offset = n by default.
struct StepPolicy {
  StepMode mode = StepMode::Compact;
  std::size_t offset = 0;

  double eta(std::size_t m) const noexcept {
    return 1.0 / (static_cast<double>(m) + static_cast<double>(offset) + 1.0);
  }

  // Compact for bounded location families, Fisher-scaled where the parameter
  // space is not compact.
  static StepPolicy defaults_for(const Kernel& kernel, std::size_t n) {
    return {kernel.prefers_fisher_steps() ? StepMode::FisherScaled : StepMode::Compact, n};
  }

  friend bool operator==(const StepPolicy&, const StepPolicy&) = default;
};

// ---------------------------------------------------------------------------
// BBM state

struct BbmDiagnostics {
  std::size_t clamps = 0;              // domain projections of locations or sigma^2
  double max_weight_change_tail = 0.0;  // max |dw| over the last 100 steps
  bool converged = false;               // max_weight_change_tail < 10 * eta_final
};

/// One replicate's evolving mixing distribution. Owned by a single worker.
struct BbmState {
  std::size_t m = 0;
  std::vector<double> weights;
  std::vector<double> locations;  // r x dim, row-major
  std::size_t dim = 1;
  std::optional<double> sigma2;   // shared variance (gaussian-common-variance)
  double sigma2_min = 0.0;
  std::vector<double> fisher_ref;  // I(theta_{j,n}), frozen at the start
  // Running sum over steps of beta_j^2 w_j I(theta_j): the per-atom bound on
  // Var(theta_{j,m}) evaluated along this path.
  std::vector<double> variance_bound;
  std::size_t clamps = 0;

  std::size_t size() const noexcept { return weights.size(); }

  static BbmState start(const DiscreteMixing& g, const Kernel& kernel,
                        std::optional<double> sigma2 = std::nullopt, double sigma2_min = 0.0) {
    BbmState s;
    s.weights.assign(g.weights().begin(), g.weights().end());
    s.locations.assign(g.atom_values().begin(), g.atom_values().end());
    s.dim = g.dim();
    s.sigma2 = sigma2;
    s.sigma2_min = sigma2_min;
    if (sigma2 && !kernel.is_gaussian())
      throw std::invalid_argument("a shared variance needs a gaussian kernel");
    const Kernel k = sigma2 ? kernel.with_variance(*sigma2) : kernel;
    s.fisher_ref.assign(g.size(), 0.0);
    if (kernel.family() != Family::PointMass)
      for (std::size_t j = 0; j < g.size(); ++j) s.fisher_ref[j] = k.fisher_info(g.location(j));
    s.variance_bound.assign(g.size(), 0.0);
    return s;
  }

  Kernel kernel_at(const Kernel& base) const { return sigma2 ? base.with_variance(*sigma2) : base; }

  DiscreteMixing mixing() const { return DiscreteMixing(locations, weights, dim); }

  double weight_sum() const noexcept {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
};

// alpha_j = eta_m w_j and beta_j = eta_m g_j for the state's current m.
inline void step_sizes(const BbmState& s, const Kernel& kernel, const StepPolicy& policy,
                       std::span<double> alpha, std::span<double> beta) {
  const double eta = policy.eta(s.m);
  const Kernel k = s.kernel_at(kernel);
  for (std::size_t j = 0; j < s.size(); ++j) {
    alpha[j] = eta * s.weights[j];
    if (policy.mode == StepMode::Compact) {
      beta[j] = eta;
      continue;
    }
    if (s.weights[j] <= 0.0) {
      beta[j] = 0.0;  // the atom receives zero responsibility anyway
      continue;
    }
    const double info = k.fisher_info(s.locations[j * s.dim]);
    if (!(info > 0.0) || !(s.fisher_ref[j] > 0.0))
      throw std::domain_error("fisher-scaled step needs positive Fisher information");
    beta[j] = eta / std::sqrt(info * s.fisher_ref[j] * s.weights[j]);
  }
}

namespace detail {

struct BbmScratch {
  std::vector<double> resp, alpha, beta, score;
  void resize(std::size_t r) {
    resp.resize(r);
    alpha.resize(r);
    beta.resize(r);
    score.resize(r);
  }
};

inline void bbm_step_impl(BbmState& s, const Kernel& base, const StepPolicy& policy, Rng& rng,
                          BbmScratch& w, std::optional<double> forced_y) {
  const std::size_t r = s.size();
  w.resize(r);
  const Kernel k = s.kernel_at(base);
  const double eta = policy.eta(s.m);

  // Draw y from the current mixture.
  double y = 0.0;
  if (forced_y) {
    y = *forced_y;
  } else {
    const std::size_t j = sample_index(s.weights, rng);
    y = k.sample(std::span<const double>(&s.locations[j * s.dim], s.dim), rng);
  }

  // Responsibilities w_j k_j / sum_i w_i k_i, shared by all three updates.
  for (std::size_t j = 0; j < r; ++j)
    w.resp[j] = (s.weights[j] > 0.0 ? std::log(s.weights[j]) : kNegInf) +
                k.log_density(y, std::span<const double>(&s.locations[j * s.dim], s.dim));
  responsibilities(w.resp);

  step_sizes(s, base, policy, w.alpha, w.beta);

  const bool has_info = base.family() != Family::PointMass;
  for (std::size_t j = 0; j < r; ++j) {
    const double theta = s.locations[j * s.dim];
    w.score[j] = w.resp[j] > 0.0 ? k.score(y, theta) : 0.0;
    if (has_info)
      s.variance_bound[j] += w.beta[j] * w.beta[j] * s.weights[j] * k.fisher_info(theta);
  }

  // Shared variance: score update with step eta * sigma^4. The score in
  // sigma^2 times sigma^4 is ((y - mu)^2 - sigma^2) / 2.
  if (s.sigma2) {
    const double v = *s.sigma2;
    double drift = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      if (w.resp[j] <= 0.0) continue;
      const double z = y - s.locations[j * s.dim];
      drift += w.resp[j] * (z * z - v);
    }
    double next = v + eta * 0.5 * drift;
    if (!(next >= s.sigma2_min)) {
      next = s.sigma2_min;
      ++s.clamps;
    }
    s.sigma2 = next;
  }

  // Locations: theta_j += beta_j w_j grad k_j / p = beta_j resp_j score_j.
  const double lo = base.domain_min();
  for (std::size_t j = 0; j < r; ++j) {
    double& theta = s.locations[j * s.dim];
    theta += w.beta[j] * w.resp[j] * w.score[j];
    if (theta < lo) {
      theta = lo;
      ++s.clamps;
    }
  }

  // Weights: w_j += alpha_j (k_j / p - 1), written as w_j + eta (resp_j - w_j).
  blend_toward(s.weights, w.resp, eta);
  ++s.m;
}

}  // namespace detail

/// One stochastic-gradient step: draw y from the current mixture, then move
/// weights, locations and (if present) the shared variance along the one-step
/// log-likelihood gradient.
inline void bbm_step(BbmState& s, const Kernel& kernel, const StepPolicy& policy, Rng& rng) {
  thread_local detail::BbmScratch scratch;
  detail::bbm_step_impl(s, kernel, policy, rng, scratch, std::nullopt);
}

// Same update with y supplied by the caller instead of drawn.
inline void bbm_step_at(BbmState& s, const Kernel& kernel, const StepPolicy& policy, double y) {
  thread_local detail::BbmScratch scratch;
  Rng unused;
  detail::bbm_step_impl(s, kernel, policy, unused, scratch, y);
}

// ---------------------------------------------------------------------------
// Classic Bayesian bootstrap (point-mass kernel)

// Polya-urn weight recursion started from uniform weights on n points:
// w <- w + (e_i - w) / (m + prior_offset), i ~ w, for m = n .. n + iters - 1.
inline std::vector<double> bb_classic_replicate(std::size_t n, std::size_t iters, Rng& rng,
                                                double prior_offset = 1.0) {
  if (n < 1) throw std::invalid_argument("bb_classic_replicate: n must be >= 1");
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  std::vector<double> hit(n, 0.0);
  for (std::size_t m = n; m < n + iters; ++m) {
    const std::size_t i = sample_index(w, rng);
    hit[i] = 1.0;
    blend_toward(w, hit, 1.0 / (static_cast<double>(m) + prior_offset));
    hit[i] = 0.0;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Replicates

struct BbmDraw {
  DiscreteMixing mixing;
  std::optional<double> sigma2;
  BbmDiagnostics diagnostics;
};

struct BbmOptions {
  std::size_t inner_iters = 10000;
  std::optional<double> sigma2;  // start value of the shared variance, if updated
  double sigma2_min = 0.0;
};

inline BbmDraw bbm_replicate(const DiscreteMixing& g, const Kernel& kernel,
                             const StepPolicy& policy, const BbmOptions& opt, Rng& rng) {
  auto s = BbmState::start(g, kernel, opt.sigma2, opt.sigma2_min);
  constexpr std::size_t kTail = 100;
  std::vector<double> prev(s.size());
  double tail_change = 0.0;
  for (std::size_t it = 0; it < opt.inner_iters; ++it) {
    const bool in_tail = it + kTail >= opt.inner_iters;
    if (in_tail) prev = s.weights;
    bbm_step(s, kernel, policy, rng);
    if (in_tail)
      for (std::size_t j = 0; j < s.size(); ++j)
        tail_change = std::max(tail_change, std::abs(s.weights[j] - prev[j]));
  }
  BbmDraw out{s.mixing(), s.sigma2, {}};
  out.diagnostics.clamps = s.clamps;
  out.diagnostics.max_weight_change_tail = tail_change;
  out.diagnostics.converged = tail_change < 10.0 * policy.eta(s.m);
  return out;
}

// Continues Newton's recursion past the data: y ~ G_m, then G_{m+1} by the
// same update with eta_m = 1/(m + 2), for m = n .. n + inner_iters - 1.
inline GridMixing newton_continuation_replicate(const GridMixing& g, const Kernel& kernel,
                                                std::size_t n, std::size_t inner_iters, Rng& rng) {
  std::vector<double> masses(g.weights().begin(), g.weights().end());
  std::vector<double> scratch(masses.size());
  const auto grid = g.grid();
  for (std::size_t m = n; m < n + inner_iters; ++m) {
    const double y = kernel.sample(grid[sample_index(masses, rng)], rng);
    newton_update(masses, grid, kernel, y, newton_step_size(m), scratch);
  }
  return GridMixing(std::vector<double>(grid.begin(), grid.end()), std::move(masses));
}

enum class Scheme { Bbm, NewtonContinuation };

inline std::string_view scheme_name(Scheme s) {
  return s == Scheme::Bbm ? "bbm" : "newton-continuation";
}

struct Replicate {
  std::uint64_t seed = 0;
  std::variant<DiscreteMixing, GridMixing> draw;
  std::optional<double> sigma2;
  BbmDiagnostics diagnostics;

  std::span<const double> weights() const {
    return std::visit([](const auto& g) { return g.weights(); }, draw);
  }
};

struct BootstrapConfig {
  Scheme scheme = Scheme::Bbm;
  std::size_t replicates = 100;
  std::size_t inner_iters = 10000;
  StepPolicy policy;
  std::uint64_t root_seed = 0;
  std::optional<double> sigma2;
  double sigma2_min = 0.0;
  bool randomize_order = false;  // newton: re-estimate per replicate on shuffled data
  std::size_t workers = 1;
};

/// M posterior draws of the mixing distribution plus their provenance.
struct ReplicateSet {
  BootstrapConfig config;
  Kernel kernel;
  std::variant<DiscreteMixing, GridMixing> source;
  std::string data_digest;
  std::vector<Replicate> replicates;

  std::size_t size() const noexcept { return replicates.size(); }
};

namespace detail {

// Runs body(k) for k in [0, count) on `workers` threads. Each k writes only its
// own output slot, so the result is independent of the schedule.
inline void parallel_for(std::size_t count, std::size_t workers,
                         const std::function<void(std::size_t)>& body) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::mutex error_mutex;
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t k; !failed && (k = next.fetch_add(1)) < count;) {
        try {
          body(k);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

inline ReplicateSet bbm_run(const DiscreteMixing& g, const Kernel& kernel,
                            const BootstrapConfig& cfg) {
  if (cfg.replicates < 1) throw std::invalid_argument("bbm_run: need at least one replicate");
  std::vector<std::optional<Replicate>> slots(cfg.replicates);
  const BbmOptions opt{cfg.inner_iters, cfg.sigma2, cfg.sigma2_min};
  detail::parallel_for(cfg.replicates, cfg.workers, [&](std::size_t k) {
    const std::uint64_t seed = derive_seed(cfg.root_seed, k);
    Rng rng = make_rng(seed);
    auto d = bbm_replicate(g, kernel, cfg.policy, opt, rng);
    slots[k] = Replicate{seed, std::move(d.mixing), d.sigma2, d.diagnostics};
  });
  ReplicateSet out{cfg, kernel, g, {}, {}};
  out.config.scheme = Scheme::Bbm;
  for (auto& s : slots) out.replicates.push_back(std::move(*s));
  return out;
}

/// Newton-continuation replicates from `start`. With cfg.randomize_order, each
/// replicate first re-runs Newton's estimator from `g0` on its own shuffle of
/// `data`, then continues from that estimate.
inline ReplicateSet newton_run(const GridMixing& start, const Kernel& kernel, const Dataset& data,
                               const GridMixing& g0, const BootstrapConfig& cfg) {
  if (cfg.replicates < 1) throw std::invalid_argument("newton_run: need at least one replicate");
  std::vector<std::optional<Replicate>> slots(cfg.replicates);
  detail::parallel_for(cfg.replicates, cfg.workers, [&](std::size_t k) {
    const std::uint64_t seed = derive_seed(cfg.root_seed, k);
    Rng rng = make_rng(seed);
    std::optional<GridMixing> reordered;
    if (cfg.randomize_order)
      reordered = newton_estimate(data, kernel, g0, derive_seed(seed, 0)).grid();
    const GridMixing& from = reordered ? *reordered : start;
    slots[k] = Replicate{seed,
                         newton_continuation_replicate(from, kernel, data.size(), cfg.inner_iters, rng),
                         std::nullopt,
                         {}};
  });
  ReplicateSet out{cfg, kernel, start, data.digest(), {}};
  out.config.scheme = Scheme::NewtonContinuation;
  for (auto& s : slots) out.replicates.push_back(std::move(*s));
  return out;
}

// ---------------------------------------------------------------------------
// Bands

struct BandRow {
  std::string stat;
  std::vector<double> values;  // one per grid point
};

struct Bands {
  std::vector<double> grid;
  std::vector<BandRow> rows;

  const std::vector<double>& at(std::string_view stat) const {
    for (const auto& r : rows)
      if (r.stat == stat) return r.values;
    throw std::out_of_range("no band named '" + std::string(stat) + "'");
  }
};

inline std::string quantile_label(double q) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "q%g", q);
  return buf;
}

// Pointwise min, max and quantiles of the replicate mixing CDFs ("cdf_*") and
// predictive densities ("density_*") over `grid`.
inline Bands summarize(const ReplicateSet& set, std::span<const double> grid,
                       const std::vector<double>& quantiles = {0.025, 0.5, 0.975}) {
  if (set.replicates.empty()) throw std::invalid_argument("summarize: no replicates");
  const std::size_t M = set.size();
  const std::size_t P = grid.size();
  std::vector<double> cdf(M * P), dens(M * P);
  for (std::size_t k = 0; k < M; ++k) {
    const auto& rep = set.replicates[k];
    const Kernel kern = rep.sigma2 ? set.kernel.with_variance(*rep.sigma2) : set.kernel;
    std::visit(
        [&](const auto& g) {
          for (std::size_t p = 0; p < P; ++p) {
            cdf[p * M + k] = mixing_cdf(g, grid[p]);
            dens[p * M + k] = mixture_density(g, kern, grid[p]);
          }
        },
        rep.draw);
  }

  Bands out;
  out.grid.assign(grid.begin(), grid.end());
  auto emit = [&](const std::string& prefix, std::vector<double>& values) {
    std::vector<BandRow> rows;
    rows.push_back({prefix + "_min", {}});
    for (double q : quantiles) rows.push_back({prefix + "_" + quantile_label(q), {}});
    rows.push_back({prefix + "_max", {}});
    for (std::size_t p = 0; p < P; ++p) {
      std::span<double> col(&values[p * M], M);
      std::sort(col.begin(), col.end());
      rows.front().values.push_back(col.front());
      for (std::size_t qi = 0; qi < quantiles.size(); ++qi)
        rows[qi + 1].values.push_back(quantile_sorted(col, quantiles[qi]));
      rows.back().values.push_back(col.back());
    }
    for (auto& r : rows) out.rows.push_back(std::move(r));
  };
  emit("cdf", cdf);
  emit("density", dens);
  return out;
}

}  // namespace mixboot
