#pragma once

// Closed-form capacities used as reference values for the integral
// equation solver: K, mu, Groetzsch, annulus, hyperbolic disk and segment.

#include <cmath>
#include <numbers>
#include <string>

#include "hypcap/errors.hpp"

namespace hypcap {

/// A closed-form capacity together with the name of the formula it came from.
struct ExactCapacity {
  double value;
  std::string source;
};

namespace detail {

inline double agm(double a, double b) {
  for (int it = 0; it < 64; ++it) {
    const double an = 0.5 * (a + b);
    const double bn = std::sqrt(a * b);
    if (std::abs(an - bn) <= 1e-16 * an) return an;
    a = an;
    b = bn;
  }
  return 0.5 * (a + b);
}

/// sqrt(1 - r^2) without cancellation near r = 1.
inline double complementary(double r) { return std::sqrt((1.0 - r) * (1.0 + r)); }

}  // namespace detail

/// Complete elliptic integral of the first kind, K(r) = pi / (2 AGM(1, r')).
inline double ellip_K(double r) {
  if (!(r >= 0.0 && r < 1.0)) throw DomainError("ellip_K: need 0 <= r < 1");
  return std::numbers::pi / (2.0 * detail::agm(1.0, detail::complementary(r)));
}

/// Modulus of the Groetzsch ring, mu(r) = (pi/2) K(r') / K(r).
inline double mu(double r) {
  if (!(r > 0.0 && r < 1.0)) throw DomainError("mu: need 0 < r < 1");
  constexpr double half_pi = 0.5 * std::numbers::pi;
  const double rc = detail::complementary(r);
  if (r > std::numbers::sqrt2 / 2.0) {
    // mu(r) mu(r') = pi^2 / 4
    return half_pi * half_pi / (half_pi * ellip_K(r) / ellip_K(rc));
  }
  return half_pi * ellip_K(rc) / ellip_K(r);
}

/// Capacity of the Groetzsch condenser (B^2, [0, r]).
inline double grotzsch_capacity(double r) {
  if (!(r > 0.0 && r < 1.0)) throw DomainError("grotzsch_capacity: need 0 < r < 1");
  return 2.0 * std::numbers::pi / mu(r);
}

/// Capacity of the annulus a < |z| < b.
inline double annulus_capacity(double a, double b) {
  if (!(a > 0.0 && a < b)) throw DomainError("annulus_capacity: need 0 < a < b");
  return 2.0 * std::numbers::pi / std::log(b / a);
}

/// Capacity of (B^2, B_rho(x, R)); independent of the center x.
inline double hyp_disk_capacity(double R) {
  if (!(R > 0.0)) throw DomainError("hyp_disk_capacity: need R > 0");
  return -2.0 * std::numbers::pi / std::log(std::tanh(0.5 * R));
}

/// Capacity of (B^2, I) for a hyperbolic segment I of length l.
inline double segment_capacity(double l) {
  if (!(l > 0.0)) throw DomainError("segment_capacity: need l > 0");
  return 2.0 * std::numbers::pi / mu(std::tanh(0.5 * l));
}

/// Capacity of five radial segments of length l that meet at the origin.
inline double star_capacity_5(double l) {
  if (!(l > 0.0)) throw DomainError("star_capacity_5: need l > 0");
  return 10.0 * std::numbers::pi / mu(std::pow(std::tanh(0.5 * l), 5));
}

/// Hyperbolic radius R of the centered disk whose capacity equals c,
/// R = 2 arth(exp(-2 pi / c)).
inline double condense_radius(double c) {
  if (!(c > 0.0)) throw DomainError("condense_radius: need c > 0");
  return 2.0 * std::atanh(std::exp(-2.0 * std::numbers::pi / c));
}

inline ExactCapacity exact_hyp_disk_capacity(double R) {
  return {hyp_disk_capacity(R), "hyperbolic disk: 2 pi / log(1 / th(R/2))"};
}

inline ExactCapacity exact_annulus_capacity(double a, double b) {
  return {annulus_capacity(a, b), "annulus: 2 pi / log(b / a)"};
}

inline ExactCapacity exact_segment_capacity(double l) {
  return {segment_capacity(l), "segment: 2 pi / mu(th(l/2))"};
}

}  // namespace hypcap
