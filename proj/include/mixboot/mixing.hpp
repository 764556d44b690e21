#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixboot/kernels.hpp"
#include "mixboot/numeric.hpp"
#include "mixboot/random.hpp"

namespace mixboot {

inline constexpr double kSimplexTolerance = 1e-12;

// Shortest form is not guaranteed by printf; 17 significant digits always
// round-trips an IEEE double.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

inline void check_simplex(std::span<const double> w, const char* what) {
  if (w.empty()) throw std::invalid_argument(std::string(what) + ": needs at least one weight");
  double s = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string(what) + ": weights must be finite and nonnegative");
    s += v;
  }
  if (std::abs(s - 1.0) > kSimplexTolerance)
    throw std::invalid_argument(std::string(what) + ": weights sum to " + format_double(s) +
                                ", not 1");
}

}  // namespace detail

/// Finitely supported mixing distribution sum_j w_j 1(theta = theta_j).
///
/// Atoms are stored flat (r x d, row-major). Duplicate atoms are allowed and
/// never merged.
class DiscreteMixing {
 public:
  DiscreteMixing(std::vector<double> atoms, std::vector<double> weights, std::size_t dim = 1)
      : atoms_(std::move(atoms)), weights_(std::move(weights)), dim_(dim) {
    if (dim_ == 0) throw std::invalid_argument("DiscreteMixing: dimension must be >= 1");
    if (atoms_.size() != weights_.size() * dim_)
      throw std::invalid_argument("DiscreteMixing: atom/weight count mismatch");
    detail::check_simplex(weights_, "DiscreteMixing");
    for (double a : atoms_)
      if (!std::isfinite(a)) throw std::invalid_argument("DiscreteMixing: non-finite atom");
  }

  // Renormalizes `weights` (which must have positive total) before validation.
  static DiscreteMixing normalized(std::vector<double> atoms, std::vector<double> weights,
                                   std::size_t dim = 1) {
    double s = 0.0;
    for (double w : weights) s += w;
    if (!(s > 0.0)) throw std::invalid_argument("DiscreteMixing: weights have zero total");
    for (double& w : weights) w /= s;
    return DiscreteMixing(std::move(atoms), std::move(weights), dim);
  }

  std::size_t size() const noexcept { return weights_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const double> atom_values() const noexcept { return atoms_; }
  std::span<const double> atom(std::size_t j) const { return {atoms_.data() + j * dim_, dim_}; }
  double location(std::size_t j) const { return atoms_[j * dim_]; }
  double weight(std::size_t j) const { return weights_[j]; }

  friend bool operator==(const DiscreteMixing&, const DiscreteMixing&) = default;

 private:
  std::vector<double> atoms_;
  std::vector<double> weights_;
  std::size_t dim_;
};

/// Masses on a fixed, strictly increasing grid; approximates a continuous G.
class GridMixing {
 public:
  GridMixing(std::vector<double> grid, std::vector<double> masses)
      : grid_(std::move(grid)), masses_(std::move(masses)) {
    if (grid_.size() != masses_.size())
      throw std::invalid_argument("GridMixing: grid/mass count mismatch");
    detail::check_simplex(masses_, "GridMixing");
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      if (!std::isfinite(grid_[i])) throw std::invalid_argument("GridMixing: non-finite grid point");
      if (i > 0 && !(grid_[i] > grid_[i - 1]))
        throw std::invalid_argument("GridMixing: grid must be strictly increasing");
    }
  }

  static GridMixing uniform(std::vector<double> grid) {
    std::vector<double> m(grid.size(), 1.0 / static_cast<double>(grid.size()));
    return GridMixing(std::move(grid), std::move(m));
  }

  std::size_t size() const noexcept { return masses_.size(); }
  std::size_t dim() const noexcept { return 1; }
  std::span<const double> weights() const noexcept { return masses_; }
  std::span<const double> atom_values() const noexcept { return grid_; }
  std::span<const double> grid() const noexcept { return grid_; }
  std::span<const double> atom(std::size_t j) const { return {grid_.data() + j, 1}; }
  double location(std::size_t j) const { return grid_[j]; }
  double weight(std::size_t j) const { return masses_[j]; }

  friend bool operator==(const GridMixing&, const GridMixing&) = default;

 private:
  std::vector<double> grid_;
  std::vector<double> masses_;
};

template <typename G>
concept MixingDistribution = requires(const G& g, std::size_t j) {
  { g.size() } -> std::convertible_to<std::size_t>;
  { g.dim() } -> std::convertible_to<std::size_t>;
  { g.weights() } -> std::convertible_to<std::span<const double>>;
  { g.atom(j) } -> std::convertible_to<std::span<const double>>;
};

// log p(y) = log sum_j w_j k(y | theta_j).
template <MixingDistribution G>
double log_mixture_density(const G& g, const Kernel& kernel, double y) {
  std::vector<double> terms(g.size());
  const auto w = g.weights();
  for (std::size_t j = 0; j < g.size(); ++j)
    terms[j] = (w[j] > 0.0 ? std::log(w[j]) : kNegInf) + kernel.log_density(y, g.atom(j));
  return log_sum_exp(terms);
}

// p(y). Summed directly; switches to log-sum-exp when the direct sum is not a
// normal double.
template <MixingDistribution G>
double mixture_density(const G& g, const Kernel& kernel, double y) {
  const auto w = g.weights();
  double s = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j)
    if (w[j] > 0.0) s += w[j] * kernel.density(y, g.atom(j));
  if (std::isnormal(s)) return s;
  return std::exp(log_mixture_density(g, kernel, y));
}

// Posterior membership probabilities of y over the atoms of g, written to
// `out`. Returns log p(y).
template <MixingDistribution G>
double posterior_weights(const G& g, const Kernel& kernel, double y, std::span<double> out) {
  const auto w = g.weights();
  for (std::size_t j = 0; j < g.size(); ++j)
    out[j] = (w[j] > 0.0 ? std::log(w[j]) : kNegInf) + kernel.log_density(y, g.atom(j));
  return responsibilities(out);
}

// G(t) = sum_{theta_j <= t} w_j. Right-continuous; d = 1 only.
template <MixingDistribution G>
double mixing_cdf(const G& g, double t) {
  if (g.dim() != 1) throw std::invalid_argument("mixing_cdf is defined for d = 1 only");
  const auto w = g.weights();
  double s = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j)
    if (g.atom(j)[0] <= t) s += w[j];
  return std::min(s, 1.0);
}

// P(y) = sum_j w_j K(y | theta_j).
template <MixingDistribution G>
double predictive_cdf(const G& g, const Kernel& kernel, double y) {
  const auto w = g.weights();
  double s = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j)
    if (w[j] > 0.0) s += w[j] * kernel.cdf(y, g.atom(j));
  return std::min(s, 1.0);
}

template <MixingDistribution G>
double sample_y(const G& g, const Kernel& kernel, Rng& rng) {
  return kernel.sample(g.atom(sample_index(g.weights(), rng)), rng);
}

// 300 equally spaced points on [min(y) - 3s, max(y) + 3s], s the sample
// standard deviation. For the exponential family the lower end is clipped to
// stay inside the scale domain.
inline std::vector<double> default_grid(std::span<const double> data, const Kernel& kernel,
                                        std::size_t points = 300) {
  if (data.empty()) throw std::invalid_argument("default_grid: empty data");
  const auto [mn, mx] = std::minmax_element(data.begin(), data.end());
  double s = sample_sd(data);
  if (!(s > 0.0)) s = std::max(1.0, std::abs(*mn)) * 1e-3;
  double lo = *mn - 3.0 * s;
  const double hi = *mx + 3.0 * s;
  if (kernel.family() == Family::Exponential) lo = std::max(lo, s / 100.0);
  if (points == 1) return {0.5 * (lo + hi)};
  return linspace(lo, hi, points);
}

// CSV with header `atom,weight` (d = 1) or `atom_1,...,atom_d,weight`.
template <MixingDistribution G>
void write_mixing_csv(std::ostream& os, const G& g) {
  if (g.dim() == 1) {
    os << "atom,weight\n";
  } else {
    for (std::size_t c = 0; c < g.dim(); ++c) os << "atom_" << c + 1 << ',';
    os << "weight\n";
  }
  for (std::size_t j = 0; j < g.size(); ++j) {
    for (double a : g.atom(j)) os << format_double(a) << ',';
    os << format_double(g.weights()[j]) << '\n';
  }
}

namespace detail {

struct MixingColumns {
  std::vector<double> atoms, weights;
  std::size_t dim = 1;
};

inline MixingColumns read_mixing_columns(std::istream& is) {
  std::string line;
  MixingColumns out;
  bool header_seen = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (!header_seen) {
      if (cells.size() < 2 || cells.back() != "weight")
        throw std::runtime_error("mixing CSV: expected header ending in 'weight'");
      out.dim = cells.size() - 1;
      header_seen = true;
      continue;
    }
    if (cells.size() != out.dim + 1)
      throw std::runtime_error("mixing CSV: wrong column count on line " + std::to_string(lineno));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cells[c], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cells[c].size())
        throw std::runtime_error("mixing CSV: bad number on line " + std::to_string(lineno));
      (c + 1 == cells.size() ? out.weights : out.atoms).push_back(v);
    }
  }
  if (!header_seen) throw std::runtime_error("mixing CSV: empty input");
  return out;
}

}  // namespace detail

inline DiscreteMixing read_discrete_mixing_csv(std::istream& is) {
  auto cols = detail::read_mixing_columns(is);
  return DiscreteMixing(std::move(cols.atoms), std::move(cols.weights), cols.dim);
}

inline GridMixing read_grid_mixing_csv(std::istream& is) {
  auto cols = detail::read_mixing_columns(is);
  if (cols.dim != 1) throw std::runtime_error("grid mixing CSV must have one atom column");
  return GridMixing(std::move(cols.atoms), std::move(cols.weights));
}

}  // namespace mixboot
