#pragma once

// Capacity of (B^2, E) for a union E of disjoint disks, computed from the
// boundary integral equation with the generalized Neumann kernel.
//
// Boundary: the unit circle eta_0(t) = e^{it} (counterclockwise) followed by
// the inner circles eta_j(t) = c_j + r_j e^{-it} (clockwise), each sampled at
// n equispaced parameters. For k = 1..m the equation
//     (I - N) mu_k = -M gamma_k,   gamma_k = log|eta - z_k|
// is discretized by the Nystrom method with the trapezoidal rule. The
// Cauchy part of M on each circle is treated with the alternate-point rule.
// h_k = [M mu_k - (I - N) gamma_k] / 2 is piecewise constant, and its
// constants feed an (m+1) x (m+1) system whose solution gives cap = 2 pi sum a_k.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hypcap/errors.hpp"
#include "hypcap/geometry.hpp"
#include "hypcap/gmres.hpp"

namespace hypcap {

struct DiscretizedBoundary {
  int n = 0;
  int m = 0;
  std::vector<double> t;
  std::vector<Complex> eta;
  std::vector<Complex> etap;
  std::vector<Complex> etapp;
  std::vector<EuclideanCircle> circles;
  Complex alpha{0.0, 0.0};

  int size() const noexcept { return (m + 1) * n; }
  int component_of(int node) const noexcept { return node / n; }
};

namespace detail {

/// 1/z for z != 0 without the inf/nan recovery of the library division.
inline Complex reciprocal(Complex z) {
  const double den = z.real() * z.real() + z.imag() * z.imag();
  return {z.real() / den, -z.imag() / den};
}

/// Distance from z to the nearest boundary curve, negative when z is
/// outside the domain (inside a disk or outside the unit disk).
inline double clearance(Complex z, std::span<const EuclideanCircle> circles) {
  double d = 1.0 - std::abs(z);
  for (const auto& c : circles) d = std::min(d, std::abs(z - c.center()) - c.radius());
  return d;
}

/// Smallest gap between circle j and every other boundary curve.
inline double gap_of(std::size_t j, std::span<const EuclideanCircle> circles) {
  const auto& cj = circles[j];
  double g = 1.0 - std::abs(cj.center()) - cj.radius();
  for (std::size_t i = 0; i < circles.size(); ++i) {
    if (i == j) continue;
    g = std::min(g, std::abs(cj.center() - circles[i].center()) - cj.radius() - circles[i].radius());
  }
  return g;
}

inline void validate_circles(std::span<const EuclideanCircle> circles) {
  if (circles.empty()) throw GeometryError("parameterize: need at least one inner circle");
  for (std::size_t j = 0; j < circles.size(); ++j) {
    if (!circles[j].inside_unit_disk()) {
      std::ostringstream os;
      os << "parameterize: circle " << j + 1 << " touches or crosses the unit circle";
      throw GeometryError(os.str());
    }
    for (std::size_t i = j + 1; i < circles.size(); ++i) {
      const double gap =
          std::abs(circles[j].center() - circles[i].center()) - circles[j].radius() - circles[i].radius();
      if (!(gap > 0.0)) {
        std::ostringstream os;
        os << "parameterize: circles " << j + 1 << " and " << i + 1 << " intersect or touch";
        throw GeometryError(os.str());
      }
    }
  }
}

}  // namespace detail

/// Auxiliary point alpha in the domain. The origin when it keeps at least
/// half the smallest boundary gap from every curve; otherwise a point on
/// the diameter through the disk nearest the origin, stepped out of that
/// disk by half of its gap to the other curves.
inline Complex choose_alpha(std::span<const EuclideanCircle> circles) {
  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < circles.size(); ++j) min_gap = std::min(min_gap, detail::gap_of(j, circles));
  if (detail::clearance(Complex{0.0, 0.0}, circles) >= 0.5 * min_gap) return {0.0, 0.0};

  std::size_t nearest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < circles.size(); ++j) {
    const double d = std::abs(circles[j].center()) - circles[j].radius();
    if (d < best) {
      best = d;
      nearest = j;
    }
  }
  const auto& c = circles[nearest];
  const double step = c.radius() + 0.5 * detail::gap_of(nearest, circles);
  const double dist = std::abs(c.center());
  const Complex dir = dist > 0.0 ? c.center() / dist : Complex{1.0, 0.0};

  Complex pick = c.center() + step * dir;
  double pick_clear = detail::clearance(pick, circles);
  const Complex other = c.center() - step * dir;
  if (detail::clearance(other, circles) > pick_clear) {
    pick = other;
    pick_clear = detail::clearance(other, circles);
  }
  // both ends of the diameter blocked: fall back to a ring of directions
  for (int q = 1; pick_clear <= 0.0 && q < 32; ++q) {
    const Complex cand = c.center() + step * dir * std::polar(1.0, std::numbers::pi * q / 16.0);
    if (detail::clearance(cand, circles) > pick_clear) {
      pick = cand;
      pick_clear = detail::clearance(cand, circles);
    }
  }
  if (!(pick_clear > 0.0)) throw GeometryError("choose_alpha: no admissible auxiliary point found");
  return pick;
}

/// Samples the unit circle and the inner circles at n points each.
inline DiscretizedBoundary parameterize(std::span<const EuclideanCircle> circles, int n,
                                        std::optional<Complex> alpha = std::nullopt) {
  if (n < 16 || n % 2 != 0) throw DomainError("parameterize: n must be even and at least 16");
  detail::validate_circles(circles);

  DiscretizedBoundary db;
  db.n = n;
  db.m = static_cast<int>(circles.size());
  db.circles.assign(circles.begin(), circles.end());
  db.t.resize(n);
  for (int i = 0; i < n; ++i) db.t[i] = 2.0 * std::numbers::pi * i / n;

  const int total = db.size();
  db.eta.resize(total);
  db.etap.resize(total);
  db.etapp.resize(total);
  const Complex I{0.0, 1.0};
  for (int i = 0; i < n; ++i) {
    const Complex e = std::polar(1.0, db.t[i]);
    db.eta[i] = e;
    db.etap[i] = I * e;
    db.etapp[i] = -e;
  }
  for (int j = 0; j < db.m; ++j) {
    const Complex c = circles[j].center();
    const double r = circles[j].radius();
    for (int i = 0; i < n; ++i) {
      const Complex e = std::polar(r, -db.t[i]);
      const int node = (j + 1) * n + i;
      db.eta[node] = c + e;
      db.etap[node] = -I * e;
      db.etapp[node] = -e;
    }
  }

  if (alpha) {
    if (!(detail::clearance(*alpha, circles) > 0.0)) {
      throw GeometryError("parameterize: auxiliary point is not inside the domain");
    }
    db.alpha = *alpha;
  } else {
    db.alpha = choose_alpha(circles);
  }
  return db;
}

inline DiscretizedBoundary parameterize(const Constellation& c, int n,
                                        std::optional<Complex> alpha = std::nullopt) {
  const auto circles = c.euclidean_circles();
  return parameterize(std::span<const EuclideanCircle>(circles), n, alpha);
}

namespace detail {

/// A(s)/A(t) * eta'(t) / (eta(t) - eta(s)) for s = node i, t = node j,
/// replaced on the diagonal by its limit eta''/(2 eta') - A'/A.
inline Complex neumann_core(int i, int j, const DiscretizedBoundary& db) {
  if (i == j) {
    const Complex a = db.eta[i] - db.alpha;
    return db.etapp[i] / (2.0 * db.etap[i]) - db.etap[i] / a;
  }
  const Complex as = db.eta[i] - db.alpha;
  const Complex at = db.eta[j] - db.alpha;
  return (as / at) * db.etap[j] / (db.eta[j] - db.eta[i]);
}

}  // namespace detail

/// N(s, t) at two nodes of the discretization (no quadrature weight).
inline double neumann_kernel(int s_node, int t_node, const DiscretizedBoundary& db) {
  return std::imag(detail::neumann_core(s_node, t_node, db)) / std::numbers::pi;
}

/// M(s, t) at two distinct nodes, or the diagonal limit of its smooth part
/// M_1 when s == t.
inline double m_kernel(int s_node, int t_node, const DiscretizedBoundary& db) {
  return std::real(detail::neumann_core(s_node, t_node, db)) / std::numbers::pi;
}

/// Discrete N and M on a fixed boundary. Small systems keep both as dense
/// matrices; large ones are applied on the fly from the Cauchy sums.
/// Quadrature weights are folded in: the trapezoidal rule everywhere, plus
/// the alternate-point rule for the cotangent part of M on each circle.
class BoundaryOperators {
 public:
  // two dense D x D matrices of doubles; 10000 nodes is about 1.6 GB
  static constexpr int kDenseLimit = 10000;

  explicit BoundaryOperators(const DiscretizedBoundary& db) : BoundaryOperators(db, db.size() <= kDenseLimit) {}

  BoundaryOperators(const DiscretizedBoundary& db, bool dense) : db_(&db), dense_(dense) {
    const int n = db.n;
    const int total = db.size();
    // cotangent weights by index offset d = (i - j) mod n: +1/n on even
    // offsets (smooth part M_1 = M + cot/2pi) and -1/n on odd ones (Wittich)
    cot_.assign(n, 0.0);
    for (int d = 1; d < n; ++d) {
      cot_[d] = (d % 2 == 0 ? 1.0 : -1.0) / (n * std::tan(std::numbers::pi * d / n));
    }
    weight_.resize(total);
    anchor_.resize(total);
    diag_.resize(total);
    for (int j = 0; j < total; ++j) {
      anchor_[j] = db.eta[j] - db.alpha;
      weight_[j] = db.etap[j] / anchor_[j];
      diag_[j] = detail::neumann_core(j, j, db);
    }
    if (dense_) build_dense();
  }

  BoundaryOperators(const BoundaryOperators&) = delete;
  BoundaryOperators& operator=(const BoundaryOperators&) = delete;

  bool dense() const noexcept { return dense_; }
  const DiscretizedBoundary& boundary() const noexcept { return *db_; }

  /// N applied to every column of x.
  Eigen::MatrixXd apply_N(const Eigen::MatrixXd& x) const {
    if (dense_) return n_ * x;
    Eigen::MatrixXd nx(x.rows(), x.cols()), mx;
    apply_free(x, &nx, nullptr);
    return nx;
  }

  /// M applied to every column of x.
  Eigen::MatrixXd apply_M(const Eigen::MatrixXd& x) const {
    if (dense_) return m_ * x;
    Eigen::MatrixXd nx, mx(x.rows(), x.cols());
    apply_free(x, nullptr, &mx);
    return mx;
  }

  Eigen::MatrixXd apply_I_minus_N(const Eigen::MatrixXd& x) const { return x - apply_N(x); }

  /// Empty unless the operator is dense.
  const Eigen::MatrixXd& n_matrix() const noexcept { return n_; }
  const Eigen::MatrixXd& m_matrix() const noexcept { return m_; }

 private:
  void build_dense() {
    const DiscretizedBoundary& db = *db_;
    const int n = db.n;
    const int total = db.size();
    const double w = 2.0 / n;
    n_.resize(total, total);
    m_.resize(total, total);
    for (int j = 0; j < total; ++j) {
      const Complex wt = weight_[j];
      const Complex et = db.eta[j];
      const int cj = j / n;
      for (int i = 0; i < total; ++i) {
        const Complex z = i == j ? diag_[i] : anchor_[i] * wt * detail::reciprocal(et - db.eta[i]);
        n_(i, j) = w * z.imag();
        double mv = w * z.real();
        if (i != j && i / n == cj) mv += cot_[((i - j) % n + n) % n];
        m_(i, j) = mv;
      }
    }
  }

  void apply_free(const Eigen::MatrixXd& x, Eigen::MatrixXd* nx, Eigen::MatrixXd* mx) const {
    const DiscretizedBoundary& db = *db_;
    const int n = db.n;
    const int total = db.size();
    const Eigen::Index cols = x.cols();
    const double w = 2.0 / n;
    // wx(c, j) = weight_j x_j for column c; row-major access per node j
    std::vector<Complex> wx(static_cast<std::size_t>(total) * cols);
    for (int j = 0; j < total; ++j) {
      for (Eigen::Index c = 0; c < cols; ++c) wx[j * cols + c] = weight_[j] * x(j, c);
    }
    std::vector<Complex> sum(cols);
    for (int i = 0; i < total; ++i) {
      const Complex es = db.eta[i];
      std::fill(sum.begin(), sum.end(), Complex{0.0, 0.0});
      for (int j = 0; j < total; ++j) {
        if (j == i) continue;
        const Complex r = detail::reciprocal(db.eta[j] - es);
        const Complex* row = &wx[j * cols];
        for (Eigen::Index c = 0; c < cols; ++c) sum[c] += row[c] * r;
      }
      const int base = (i / n) * n;
      const int li = i - base;
      for (Eigen::Index c = 0; c < cols; ++c) {
        const Complex z = anchor_[i] * sum[c] + diag_[i] * x(i, c);
        if (nx) (*nx)(i, c) = w * z.imag();
        if (mx) {
          double v = w * z.real();
          for (int lj = 0; lj < n; ++lj) {
            if (lj != li) v += cot_[((li - lj) % n + n) % n] * x(base + lj, c);
          }
          (*mx)(i, c) = v;
        }
      }
    }
  }

  const DiscretizedBoundary* db_;
  bool dense_;
  std::vector<double> cot_;
  std::vector<Complex> weight_;
  std::vector<Complex> anchor_;
  std::vector<Complex> diag_;
  Eigen::MatrixXd n_;
  Eigen::MatrixXd m_;
};

/// Applies the discrete M operator once (builds the operator).
inline Eigen::VectorXd apply_M(const Eigen::VectorXd& f, const DiscretizedBoundary& db) {
  return BoundaryOperators(db).apply_M(Eigen::MatrixXd(f)).col(0);
}

struct SolverOptions {
  double gmres_tol = 1e-14;
  /// 0 selects m * n.
  int gmres_maxit = 0;
  std::optional<Complex> alpha;
};

/// Output of one integral-equation solve for disk k.
struct KernelSolution {
  Eigen::VectorXd gamma;
  Eigen::VectorXd mu;
  Eigen::VectorXd h;
  /// Mean of h over each boundary component, components 0..m.
  std::vector<double> h_const;
  /// Largest (max - min) of h within a component.
  double spread = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

namespace detail {

inline std::vector<KernelSolution> solve_block(const std::vector<int>& disks, const BoundaryOperators& ops,
                                               const SolverOptions& opts) {
  const DiscretizedBoundary& db = ops.boundary();
  const int total = db.size();
  const auto cols = static_cast<Eigen::Index>(disks.size());

  Eigen::MatrixXd gamma(total, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    const int k = disks[c];
    if (k < 1 || k > db.m) throw DomainError("solve_ie: disk index out of range");
    const Complex zk = db.circles[k - 1].center();
    for (int i = 0; i < total; ++i) gamma(i, c) = std::log(std::abs(db.eta[i] - zk));
  }

  const Eigen::MatrixXd rhs = -ops.apply_M(gamma);
  const int maxit = opts.gmres_maxit > 0 ? opts.gmres_maxit : db.m * db.n;
  auto op = [&ops](const Eigen::MatrixXd& v) -> Eigen::MatrixXd { return ops.apply_I_minus_N(v); };
  std::vector<GmresResult> solved = gmres_batch(op, rhs, opts.gmres_tol, maxit);

  Eigen::MatrixXd mu(total, cols);
  for (Eigen::Index c = 0; c < cols; ++c) mu.col(c) = solved[c].x;
  const Eigen::MatrixXd h = 0.5 * (ops.apply_M(mu) - ops.apply_I_minus_N(gamma));

  std::vector<KernelSolution> out(cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    KernelSolution& s = out[c];
    s.gamma = gamma.col(c);
    s.mu = std::move(solved[c].x);
    s.h = h.col(c);
    s.iterations = solved[c].iterations;
    s.residual = solved[c].residual;
    s.h_const.resize(db.m + 1);
    for (int j = 0; j <= db.m; ++j) {
      const auto seg = s.h.segment(j * db.n, db.n);
      s.h_const[j] = seg.mean();
      s.spread = std::max(s.spread, seg.maxCoeff() - seg.minCoeff());
    }
  }
  return out;
}

}  // namespace detail

/// Solves the integral equation for disk k (1-based) and forms h_k.
inline KernelSolution solve_ie(int k, const BoundaryOperators& ops, const SolverOptions& opts = {}) {
  return std::move(detail::solve_block({k}, ops, opts).front());
}

inline KernelSolution solve_ie(int k, const DiscretizedBoundary& db, const SolverOptions& opts = {}) {
  const BoundaryOperators ops(db);
  return solve_ie(k, ops, opts);
}

/// Solves the integral equations for k = 1..m together. Each column runs
/// its own GMRES recurrence; only the operator application is shared.
inline std::vector<KernelSolution> solve_all(const BoundaryOperators& ops, const SolverOptions& opts = {}) {
  std::vector<int> disks(ops.boundary().m);
  for (int k = 0; k < ops.boundary().m; ++k) disks[k] = k + 1;
  return detail::solve_block(disks, ops, opts);
}

struct CapacityResult {
  double cap = 0.0;
  std::vector<double> a;
  std::vector<double> b;
  /// The auxiliary unknown of the (m+1) x (m+1) system.
  double c_const = 0.0;
  /// h(j, k-1) = h_{j,k}
  Eigen::MatrixXd h;
  std::vector<double> h_spread;
  std::vector<int> gmres_iterations;
  std::vector<double> gmres_residuals;
  int n = 0;
  Complex alpha{0.0, 0.0};
  std::vector<std::string> warnings;
};

inline constexpr double kSpreadWarning = 1e-6;

/// Capacity of (B^2, union of the circles' disks).
inline CapacityResult capacity(std::span<const EuclideanCircle> circles, int n, const SolverOptions& opts = {}) {
  const DiscretizedBoundary db = parameterize(circles, n, opts.alpha);
  const BoundaryOperators ops(db);
  const int m = db.m;

  CapacityResult res;
  res.n = n;
  res.alpha = db.alpha;
  res.h.resize(m + 1, m);
  const std::vector<KernelSolution> sols = solve_all(ops, opts);
  for (int k = 1; k <= m; ++k) {
    const KernelSolution& sol = sols[k - 1];
    for (int j = 0; j <= m; ++j) res.h(j, k - 1) = sol.h_const[j];
    res.h_spread.push_back(sol.spread);
    res.gmres_iterations.push_back(sol.iterations);
    res.gmres_residuals.push_back(sol.residual);
    if (sol.spread > kSpreadWarning) {
      std::ostringstream os;
      os << "h_" << k << " varies by " << sol.spread << " within a boundary component; geometry is near-singular";
      res.warnings.push_back(os.str());
    }
  }

  Eigen::MatrixXd sys(m + 1, m + 1);
  sys.leftCols(m) = res.h;
  sys.col(m).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Ones(m + 1);
  rhs(0) = 0.0;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys);
  if (!(lu.rcond() > 1e-14)) throw SolverError("capacity: the (m+1) x (m+1) system is singular");
  const Eigen::VectorXd sol = lu.solve(rhs);

  res.a.resize(m);
  res.b.resize(m);
  double sum = 0.0;
  for (int k = 0; k < m; ++k) {
    res.a[k] = sol(k);
    res.b[k] = 2.0 * std::numbers::pi * sol(k);
    sum += sol(k);
  }
  res.c_const = sol(m);
  res.cap = 2.0 * std::numbers::pi * sum;
  return res;
}

inline CapacityResult capacity(const Constellation& c, int n, const SolverOptions& opts = {}) {
  const auto circles = c.euclidean_circles();
  return capacity(std::span<const EuclideanCircle>(circles), n, opts);
}

}  // namespace hypcap
