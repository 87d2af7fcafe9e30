#pragma once

// Hyperbolic geometry of the Poincare unit disk: distances, conversion
// between geodesic disks and Euclidean circles, overlap and constraint tests.

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hypcap/errors.hpp"

namespace hypcap {

using Complex = std::complex<double>;

namespace detail {

inline void require_in_unit_disk(Complex z, const char* what) {
  if (!(std::abs(z) < 1.0)) {
    std::ostringstream os;
    os << what << ": point " << z << " is not inside the unit disk";
    throw DomainError(os.str());
  }
}

}  // namespace detail

/// Hyperbolic distance rho(a, b) in the unit disk, evaluated in the
/// 2*arsh form, which stays accurate for nearly coincident points.
inline double hyp_distance(Complex a, Complex b) {
  detail::require_in_unit_disk(a, "hyp_distance");
  detail::require_in_unit_disk(b, "hyp_distance");
  const double na = std::norm(a);
  const double nb = std::norm(b);
  const double q = std::abs(a - b) / std::sqrt((1.0 - na) * (1.0 - nb));
  return 2.0 * std::asinh(q);
}

/// Gradient of hyp_distance with respect to (Re a, Im a) and (Re b, Im b),
/// packed as complex numbers d/dx + i d/dy. Undefined for a == b.
inline std::pair<Complex, Complex> hyp_distance_gradient(Complex a, Complex b) {
  const Complex d = a - b;
  const double s2 = std::norm(d);
  const double pa = 1.0 - std::norm(a);
  const double pb = 1.0 - std::norm(b);
  const double q = std::sqrt(s2 / (pa * pb));
  const double scale = 2.0 * q / std::sqrt(1.0 + q * q);
  return {scale * (d / s2 + a / pa), scale * (-d / s2 + b / pb)};
}

class EuclideanCircle {
 public:
  EuclideanCircle(Complex center, double radius) : center_(center), radius_(radius) {
    if (!(radius > 0.0) || !std::isfinite(radius)) {
      throw DomainError("EuclideanCircle: radius must be positive and finite");
    }
  }

  Complex center() const noexcept { return center_; }
  double radius() const noexcept { return radius_; }

  /// Strictly inside the unit circle (no contact).
  bool inside_unit_disk() const noexcept { return std::abs(center_) + radius_ < 1.0; }

 private:
  Complex center_;
  double radius_;
};

/// Geodesic disk B_rho(center, radius) of the Poincare disk.
class HyperbolicDisk {
 public:
  HyperbolicDisk(Complex center, double radius) : center_(center), radius_(radius) {
    detail::require_in_unit_disk(center, "HyperbolicDisk");
    if (!(radius > 0.0) || !std::isfinite(radius)) {
      throw DomainError("HyperbolicDisk: radius must be positive and finite");
    }
  }

  Complex center() const noexcept { return center_; }
  double radius() const noexcept { return radius_; }

 private:
  Complex center_;
  double radius_;
};

/// The Euclidean disk that coincides with a hyperbolic one: with
/// t = th(R/2), y = x(1-t^2)/(1-|x|^2 t^2), r = (1-|x|^2) t/(1-|x|^2 t^2).
inline EuclideanCircle hyp_to_euclidean(const HyperbolicDisk& d) {
  const double t = std::tanh(0.5 * d.radius());
  const double x2 = std::norm(d.center());
  const double den = 1.0 - x2 * t * t;
  return {d.center() * ((1.0 - t * t) / den), (1.0 - x2) * t / den};
}

/// Inverse of hyp_to_euclidean. The hyperbolic center is the hyperbolic
/// midpoint of the two points where the circle meets its diameter.
inline HyperbolicDisk euclidean_to_hyp(const EuclideanCircle& c) {
  if (!c.inside_unit_disk()) {
    throw DomainError("euclidean_to_hyp: circle touches or crosses the unit circle");
  }
  const double dist = std::abs(c.center());
  const Complex dir = dist > 0.0 ? c.center() / dist : Complex{1.0, 0.0};
  const double lo = std::atanh(dist - c.radius());
  const double hi = std::atanh(dist + c.radius());
  return {dir * std::tanh(0.5 * (lo + hi)), hi - lo};
}

inline double hyp_area(double r) {
  const double s = std::sinh(0.5 * r);
  return 4.0 * std::numbers::pi * s * s;
}

inline double hyp_perimeter(double r) { return 2.0 * std::numbers::pi * std::sinh(r); }

/// Smallest half-angle theta for which two disks of hyperbolic radius r
/// centered at R e^{+-i theta} do not overlap; they touch at theta_min.
inline double min_separation_angle(double R, double r) {
  if (!(R > 0.0 && R < 1.0) || !(r > 0.0)) {
    throw DomainError("min_separation_angle: need 0 < R < 1 and r > 0");
  }
  const double arg = (1.0 - R * R) * std::sinh(r) / (2.0 * R);
  if (arg > 1.0) {
    throw GeometryError("min_separation_angle: two disks of this radius cannot both sit on |z| = R");
  }
  return std::asin(arg);
}

/// Closed disks are disjoint iff their centers are farther apart than the
/// radius sum; tangent disks count as overlapping.
inline bool disks_disjoint(const HyperbolicDisk& d1, const HyperbolicDisk& d2) {
  return hyp_distance(d1.center(), d2.center()) > d1.radius() + d2.radius();
}

enum class ConstraintKind { DiskCenters, IntervalCenters };

struct ConstraintSpec {
  ConstraintKind kind = ConstraintKind::DiskCenters;
  double R = 0.75;
  /// Require the whole Euclidean realization of each disk inside |z| <= R
  /// instead of only its center. Off by default.
  bool whole_disk = false;

  void validate() const {
    if (!(R > 0.0 && R < 1.0)) throw DomainError("ConstraintSpec: R must lie in (0, 1)");
  }
};

/// A non-empty ordered family of pairwise disjoint hyperbolic disks.
class Constellation {
 public:
  explicit Constellation(std::vector<HyperbolicDisk> disks) : disks_(std::move(disks)) {
    if (disks_.empty()) throw GeometryError("Constellation: need at least one disk");
    for (std::size_t i = 0; i < disks_.size(); ++i) {
      for (std::size_t j = i + 1; j < disks_.size(); ++j) {
        if (!disks_disjoint(disks_[i], disks_[j])) {
          std::ostringstream os;
          os << "Constellation: disks " << i << " and " << j << " overlap or touch";
          throw GeometryError(os.str());
        }
      }
    }
  }

  static Constellation from_centers(std::span<const Complex> centers, std::span<const double> radii) {
    if (centers.size() != radii.size()) {
      throw GeometryError("Constellation: center and radius counts differ");
    }
    std::vector<HyperbolicDisk> disks;
    disks.reserve(centers.size());
    for (std::size_t i = 0; i < centers.size(); ++i) disks.emplace_back(centers[i], radii[i]);
    return Constellation(std::move(disks));
  }

  std::size_t size() const noexcept { return disks_.size(); }
  const HyperbolicDisk& operator[](std::size_t i) const { return disks_[i]; }
  const std::vector<HyperbolicDisk>& disks() const noexcept { return disks_; }

  std::vector<Complex> centers() const {
    std::vector<Complex> out;
    out.reserve(disks_.size());
    for (const auto& d : disks_) out.push_back(d.center());
    return out;
  }

  std::vector<EuclideanCircle> euclidean_circles() const {
    std::vector<EuclideanCircle> out;
    out.reserve(disks_.size());
    for (const auto& d : disks_) out.push_back(hyp_to_euclidean(d));
    return out;
  }

 private:
  std::vector<HyperbolicDisk> disks_;
};

/// Closed containment test (|center| <= R). Interval kind also requires
/// real centers. With whole_disk set, the Euclidean circle must fit.
/// Radii are compared with a slack of 1e-12 so that centers placed on
/// |z| = R by polar() still count.
inline bool satisfies_constraint(const Constellation& c, const ConstraintSpec& spec) {
  constexpr double slack = 1e-12;
  for (const auto& d : c.disks()) {
    const Complex z = d.center();
    if (spec.kind == ConstraintKind::IntervalCenters && z.imag() != 0.0) return false;
    if (spec.whole_disk) {
      const EuclideanCircle e = hyp_to_euclidean(d);
      if (std::abs(e.center()) + e.radius() > spec.R + slack) return false;
    } else if (std::abs(z) > spec.R + slack) {
      return false;
    }
  }
  return true;
}

/// Hyperbolic distances between neighbouring centers, in the order given
/// and closing the cycle when `cyclic` is set.
inline std::vector<double> adjacent_distances(std::span<const Complex> centers, bool cyclic) {
  std::vector<double> out;
  const std::size_t m = centers.size();
  if (m < 2) return out;
  const std::size_t count = cyclic ? m : m - 1;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(hyp_distance(centers[i], centers[(i + 1) % m]));
  }
  return out;
}

}  // namespace hypcap
