#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mixboot/numeric.hpp"
#include "mixboot/random.hpp"

namespace mixboot {

enum class Family {
  GaussianLocation,        // N(theta, sigma^2), sigma fixed
  GaussianCommonVariance,  // N(theta, sigma^2), sigma^2 shared and estimated
  Exponential,             // exp(-y/theta)/theta, theta = scale > 0
  PointMass,               // indicator 1(y = theta); recovers the classic Bayesian bootstrap
};

inline std::string_view family_name(Family f) {
  switch (f) {
    case Family::GaussianLocation: return "gaussian-location";
    case Family::GaussianCommonVariance: return "gaussian-common-variance";
    case Family::Exponential: return "exponential";
    case Family::PointMass: return "point-mass";
  }
  return "unknown";
}

inline Family parse_family(std::string_view name) {
  if (name == "gaussian-location" || name == "gaussian") return Family::GaussianLocation;
  if (name == "gaussian-common-variance") return Family::GaussianCommonVariance;
  if (name == "exponential") return Family::Exponential;
  if (name == "point-mass") return Family::PointMass;
  throw std::invalid_argument("unknown kernel family '" + std::string(name) + "'");
}

/// A parametric density family k(y | theta) with its score, Fisher information,
/// sampler and distribution function.
///
/// Parameters are spans of length d; every shipped family has d = 1 and also
/// offers scalar overloads. Immutable and cheap to copy.
class Kernel {
 public:
  static Kernel gaussian_location(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
      throw std::invalid_argument("gaussian-location kernel needs sigma > 0");
    return Kernel(Family::GaussianLocation, sigma * sigma);
  }
  static Kernel gaussian_common_variance(double sigma2) {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
      throw std::domain_error("gaussian-common-variance kernel needs sigma^2 > 0");
    return Kernel(Family::GaussianCommonVariance, sigma2);
  }
  static Kernel exponential() { return Kernel(Family::Exponential, 0.0); }
  static Kernel point_mass() { return Kernel(Family::PointMass, 0.0); }

  Family family() const noexcept { return family_; }
  std::string_view name() const noexcept { return family_name(family_); }
  std::size_t dim() const noexcept { return 1; }

  bool is_gaussian() const noexcept {
    return family_ == Family::GaussianLocation || family_ == Family::GaussianCommonVariance;
  }
  // Bounded families admit an NPMLE.
  bool is_bounded() const noexcept {
    return family_ == Family::GaussianLocation || family_ == Family::PointMass;
  }
  // Whether the location parameter lives on a non-compact space where the
  // Fisher-scaled step size is the default.
  bool prefers_fisher_steps() const noexcept {
    return family_ == Family::Exponential || family_ == Family::GaussianCommonVariance;
  }

  double variance() const noexcept { return var_; }
  double sigma() const noexcept { return std::sqrt(var_); }

  // Copy with a different shared variance (gaussian families only).
  Kernel with_variance(double sigma2) const {
    if (!is_gaussian()) throw std::logic_error("with_variance on a non-gaussian kernel");
    if (!(sigma2 > 0.0)) throw std::domain_error("sigma^2 must be positive");
    Kernel k = *this;
    k.var_ = sigma2;
    return k;
  }

  // Smallest admissible parameter value (exponential scale); -inf otherwise.
  double domain_min() const noexcept {
    return family_ == Family::Exponential ? 1e-10 : -std::numeric_limits<double>::infinity();
  }

  bool in_domain(double theta) const noexcept {
    if (!std::isfinite(theta)) return false;
    return family_ != Family::Exponential || theta > 0.0;
  }
  bool in_domain(std::span<const double> theta) const noexcept {
    return theta.size() == dim() && in_domain(theta[0]);
  }

  double log_density(double y, double theta) const {
    check(theta);
    switch (family_) {
      case Family::GaussianLocation:
      case Family::GaussianCommonVariance: {
        const double z = y - theta;
        return -0.5 * std::log(2.0 * std::numbers::pi * var_) - z * z / (2.0 * var_);
      }
      case Family::Exponential:
        return y < 0.0 ? kNegInf : -y / theta - std::log(theta);
      case Family::PointMass:
        return y == theta ? 0.0 : kNegInf;
    }
    return kNegInf;
  }

  double density(double y, double theta) const { return std::exp(log_density(y, theta)); }

  // d/dtheta log k(y | theta). Zero wherever k(y | theta) = 0.
  double score(double y, double theta) const {
    check(theta);
    switch (family_) {
      case Family::GaussianLocation:
      case Family::GaussianCommonVariance:
        return (y - theta) / var_;
      case Family::Exponential:
        return y < 0.0 ? 0.0 : (y - theta) / (theta * theta);
      case Family::PointMass:
        return 0.0;
    }
    return 0.0;
  }

  double grad_theta(double y, double theta) const {
    const double s = score(y, theta);
    return s == 0.0 ? 0.0 : s * density(y, theta);
  }

  // d/d(sigma^2) log k(y | theta, sigma^2), gaussian families only.
  double score_variance(double y, double theta) const {
    if (!is_gaussian()) throw std::logic_error("score_variance on a non-gaussian kernel");
    const double z = y - theta;
    return (z * z - var_) / (2.0 * var_ * var_);
  }

  double fisher_info(double theta) const {
    check(theta);
    switch (family_) {
      case Family::GaussianLocation:
      case Family::GaussianCommonVariance:
        return 1.0 / var_;
      case Family::Exponential:
        return 1.0 / (theta * theta);
      case Family::PointMass:
        break;
    }
    throw std::domain_error("point-mass kernel has no Fisher information");
  }

  double cdf(double y, double theta) const {
    check(theta);
    switch (family_) {
      case Family::GaussianLocation:
      case Family::GaussianCommonVariance:
        return 0.5 * std::erfc(-(y - theta) / std::sqrt(2.0 * var_));
      case Family::Exponential:
        return y <= 0.0 ? 0.0 : -std::expm1(-y / theta);
      case Family::PointMass:
        return y >= theta ? 1.0 : 0.0;
    }
    return 0.0;
  }

  double sample(double theta, Rng& rng) const {
    check(theta);
    switch (family_) {
      case Family::GaussianLocation:
      case Family::GaussianCommonVariance:
        return theta + std::sqrt(var_) * std::normal_distribution<double>(0.0, 1.0)(rng);
      case Family::Exponential:
        return theta * std::exponential_distribution<double>(1.0)(rng);
      case Family::PointMass:
        return theta;
    }
    return theta;
  }

  // Vector forms (d = dim()).
  double log_density(double y, std::span<const double> theta) const { return log_density(y, scalar(theta)); }
  double density(double y, std::span<const double> theta) const { return density(y, scalar(theta)); }
  double cdf(double y, std::span<const double> theta) const { return cdf(y, scalar(theta)); }
  double sample(std::span<const double> theta, Rng& rng) const { return sample(scalar(theta), rng); }
  void grad_theta(double y, std::span<const double> theta, std::span<double> out) const {
    out[0] = grad_theta(y, scalar(theta));
  }
  void score(double y, std::span<const double> theta, std::span<double> out) const {
    out[0] = score(y, scalar(theta));
  }
  // Row-major d x d.
  std::vector<double> fisher_information(std::span<const double> theta) const {
    return {fisher_info(scalar(theta))};
  }

  friend bool operator==(const Kernel&, const Kernel&) = default;

 private:
  Kernel(Family f, double var) : family_(f), var_(var) {}

  void check(double theta) const {
    if (!in_domain(theta))
      throw std::domain_error(std::string(name()) + ": parameter " + std::to_string(theta) +
                              " outside the family domain");
  }
  double scalar(std::span<const double> theta) const {
    if (theta.size() != dim()) throw std::invalid_argument("kernel parameter has wrong dimension");
    return theta[0];
  }

  Family family_;
  double var_;  // sigma^2 for gaussian families, unused otherwise
};

}  // namespace mixboot
