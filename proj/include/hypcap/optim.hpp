#pragma once

// Local maximization of cap(B^2, E) over the disk centers with the
// hyperbolic radii held fixed.
//
// The inequality set is
//     rho(z_i, z_j) - r_i - r_j - margin >= 0     (pairs)
//     R_j^2 - |z_j|^2 >= 0                        (containment)
// and each inner problem minimizes -cap - mu sum log g over the interior.
// Steps come from a structured quasi-Newton model: an SR1 matrix for -cap
// (which is not convex, so BFGS curvature conditions fail) plus the
// primal-dual barrier Hessian. Gradients of cap are central differences.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hypcap/bie.hpp"
#include "hypcap/errors.hpp"
#include "hypcap/geometry.hpp"
#include "hypcap/specialfn.hpp"

namespace hypcap {

struct OptimizationProblem {
  std::vector<double> radii;
  ConstraintSpec constraint;
  /// Keep center 1 on the real axis (disk constraint only); removes the
  /// rotational symmetry of the problem.
  bool symmetry_pin = true;
  int n_solver = 64;
  int n_polish = 256;
  double margin = 1e-6;

  std::size_t size() const noexcept { return radii.size(); }

  void validate() const {
    if (radii.empty()) throw DomainError("OptimizationProblem: need at least one disk");
    constraint.validate();
    for (std::size_t j = 0; j < radii.size(); ++j) {
      if (!(radii[j] > 0.0) || !std::isfinite(radii[j])) {
        throw DomainError("OptimizationProblem: radii must be positive and finite");
      }
      if (constraint.whole_disk && !(radii[j] < 2.0 * std::atanh(constraint.R))) {
        std::ostringstream os;
        os << "OptimizationProblem: disk " << j + 1 << " does not fit inside |z| <= " << constraint.R;
        throw InfeasibleError(os.str());
      }
    }
    if (!(margin >= 0.0)) throw DomainError("OptimizationProblem: margin must be nonnegative");
    if (n_solver < 16 || n_polish < 16 || n_solver % 2 || n_polish % 2) {
      throw DomainError("OptimizationProblem: n_solver and n_polish must be even and at least 16");
    }
  }

  bool interval() const noexcept { return constraint.kind == ConstraintKind::IntervalCenters; }

  /// Largest admissible |z_j| for the center of disk j.
  double containment_radius(std::size_t j) const {
    if (!constraint.whole_disk) return constraint.R;
    // the far end of the disk sits at th(arth|z| + r/2)
    return std::tanh(std::atanh(constraint.R) - 0.5 * radii[j]);
  }
};

struct MaximizeOptions {
  double mu0 = 0.1;
  double mu_factor = 10.0;
  double mu_min = 1e-6;
  double grad_step = 1e-5;
  /// Inner loops stop at ||grad phi||_inf <= max(inner_tol, 10 mu).
  double inner_tol = 1e-5;
  int max_inner = 200;
  int max_iterations = 1000;
  int max_polish = 30;
  /// Longest step in center coordinates.
  double max_step = 0.1;
  /// Each constraint keeps at least this fraction of its value per step.
  double boundary_fraction = 0.01;
  double stationarity_tol = 1e-4;
  /// Constraints with g below this enter the projected-gradient test.
  double active_tol = 1e-4;
  bool polish = true;
};

struct TraceEntry {
  int iteration = 0;
  std::vector<Complex> centers;
  double cap = 0.0;
  double violation = 0.0;
  double mu = 0.0;
  int n = 0;
  bool one_sided = false;
  /// Capacity at least that of every earlier accepted entry at the same n.
  bool accepted = false;
};

struct OptimizationResult {
  std::vector<Complex> centers;
  double cap = 0.0;
  /// Discretization size behind `cap`.
  int n = 0;
  std::vector<double> b;
  std::vector<TraceEntry> trace;
  int evaluations = 0;
  int iterations = 0;
  bool converged = false;
  double projected_gradient = 0.0;
  double violation = 0.0;
  bool one_sided = false;
};

struct Gradient {
  Eigen::VectorXd value;
  bool one_sided = false;
  int evaluations = 0;
};

namespace detail {

inline std::vector<EuclideanCircle> circles_of(std::span<const Complex> centers, const std::vector<double>& radii) {
  std::vector<EuclideanCircle> out;
  out.reserve(centers.size());
  for (std::size_t j = 0; j < centers.size(); ++j) out.push_back(hyp_to_euclidean({centers[j], radii[j]}));
  return out;
}

/// Variables of the optimizer. Disk kind: (x_j, y_j) per disk, without y_1
/// when pinned. Interval kind: x_j only.
class Layout {
 public:
  explicit Layout(const OptimizationProblem& p) : m_(static_cast<int>(p.size())) {
    interval_ = p.interval();
    pinned_ = !interval_ && p.symmetry_pin;
    xi_.resize(m_);
    yi_.resize(m_, -1);
    int k = 0;
    for (int j = 0; j < m_; ++j) {
      xi_[j] = k++;
      if (!interval_ && !(pinned_ && j == 0)) yi_[j] = k++;
    }
    dim_ = k;
  }

  int dim() const noexcept { return dim_; }
  int size() const noexcept { return m_; }
  int x_index(int j) const { return xi_[j]; }
  int y_index(int j) const { return yi_[j]; }

  std::vector<Complex> centers(const Eigen::VectorXd& v) const {
    std::vector<Complex> out(m_);
    for (int j = 0; j < m_; ++j) out[j] = {v(xi_[j]), yi_[j] >= 0 ? v(yi_[j]) : 0.0};
    return out;
  }

  Eigen::VectorXd pack(std::span<const Complex> z) const {
    Eigen::VectorXd v(dim_);
    for (int j = 0; j < m_; ++j) {
      v(xi_[j]) = z[j].real();
      if (yi_[j] >= 0) v(yi_[j]) = z[j].imag();
    }
    return v;
  }

  /// Accumulates a gradient with respect to center j, given as d/dx + i d/dy.
  void scatter(int j, Complex g, Eigen::Ref<Eigen::VectorXd> out) const {
    out(xi_[j]) += g.real();
    if (yi_[j] >= 0) out(yi_[j]) += g.imag();
  }

 private:
  int m_;
  int dim_ = 0;
  bool interval_ = false;
  bool pinned_ = false;
  std::vector<int> xi_, yi_;
};

/// Constraint values, ordered as m containment entries and then the pairs
/// (i, j), i < j. Non-finite when a center leaves the unit disk.
inline Eigen::VectorXd constraint_values(std::span<const Complex> z, const OptimizationProblem& p) {
  const int m = static_cast<int>(z.size());
  Eigen::VectorXd g(m + m * (m - 1) / 2);
  bool inside = true;
  for (int j = 0; j < m; ++j) {
    const double rj = p.containment_radius(j);
    g(j) = rj * rj - std::norm(z[j]);
    inside = inside && std::abs(z[j]) < 1.0;
  }
  int k = m;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j, ++k) {
      g(k) = inside ? hyp_distance(z[i], z[j]) - p.radii[i] - p.radii[j] - p.margin
                    : -std::numeric_limits<double>::infinity();
    }
  }
  return g;
}

/// Column c holds the gradient of constraint c in layout coordinates.
inline Eigen::MatrixXd constraint_jacobian(std::span<const Complex> z, const Layout& layout) {
  const int m = layout.size();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(layout.dim(), m + m * (m - 1) / 2);
  for (int j = 0; j < m; ++j) layout.scatter(j, -2.0 * z[j], jac.col(j));
  int k = m;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j, ++k) {
      const auto [gi, gj] = hyp_distance_gradient(z[i], z[j]);
      layout.scatter(i, gi, jac.col(k));
      layout.scatter(j, gj, jac.col(k));
    }
  }
  return jac;
}

inline double violation_of(const Eigen::VectorXd& g) {
  return g.size() == 0 ? 0.0 : std::max(0.0, -g.minCoeff());
}

/// Lawson-Hanson nonnegative least squares: argmin ||A x - b||, x >= 0.
inline Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const Eigen::Index n = A.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (n == 0) return x;
  std::vector<bool> passive(n, false);
  const double tol = 1e-12 * std::max(1.0, A.norm() * b.norm());

  auto solve_passive = [&]() {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[j]) idx.push_back(j);
    }
    Eigen::MatrixXd sub(A.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) sub.col(c) = A.col(idx[c]);
    const Eigen::VectorXd zs = sub.colPivHouseholderQr().solve(b);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    for (std::size_t c = 0; c < idx.size(); ++c) z(idx[c]) = zs(c);
    return z;
  };

  for (int outer = 0; outer < 3 * n + 10; ++outer) {
    const Eigen::VectorXd w = A.transpose() * (b - A * x);
    Eigen::Index pick = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[j] && w(j) > best) {
        best = w(j);
        pick = j;
      }
    }
    if (pick < 0) break;
    passive[pick] = true;
    for (int inner = 0; inner < 3 * n + 10; ++inner) {
      const Eigen::VectorXd z = solve_passive();
      double alpha = 1.0;
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && z(j) <= 0.0) {
          feasible = false;
          alpha = std::min(alpha, x(j) / (x(j) - z(j)));
        }
      }
      if (feasible) {
        x = z;
        break;
      }
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && x(j) <= tol) {
          passive[j] = false;
          x(j) = 0.0;
        }
      }
    }
  }
  return x;
}

/// Largest h_k spread for which a capacity value is trusted. Near-tangent
/// disks at a coarse n spread far beyond this and the value drifts upward,
/// which an ascent method would follow.
inline constexpr double kMaxTrustedSpread = 1e-2;

/// Capacity at fidelity n, or nothing when the disks overlap or leave B^2
/// or the discretization does not resolve them: h_k spread above
/// kMaxTrustedSpread, a failed solve, or a value outside
/// [max_j cap(B_j), sum_j cap(B_j)].
inline std::optional<double> evaluate(std::span<const Complex> z, const OptimizationProblem& p, int n) {
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!(std::abs(z[i]) < 1.0)) return std::nullopt;
  }
  for (std::size_t i = 0; i < z.size(); ++i) {
    for (std::size_t j = i + 1; j < z.size(); ++j) {
      if (!(hyp_distance(z[i], z[j]) > p.radii[i] + p.radii[j])) return std::nullopt;
    }
  }
  const auto circles = circles_of(z, p.radii);
  CapacityResult res;
  try {
    res = capacity(std::span<const EuclideanCircle>(circles), n);
  } catch (const SolverError&) {
    return std::nullopt;
  }
  if (!(*std::max_element(res.h_spread.begin(), res.h_spread.end()) <= kMaxTrustedSpread)) return std::nullopt;
  double lo = 0.0, hi = 0.0;
  for (const double r : p.radii) {
    lo = std::max(lo, hyp_disk_capacity(r));
    hi += hyp_disk_capacity(r);
  }
  if (!(res.cap >= lo * (1.0 - 1e-9) && res.cap <= hi * (1.0 + 1e-9))) return std::nullopt;
  return res.cap;
}

/// Central differences in layout coordinates; one-sided next to an
/// overlap. f0 is the value at v, used only by the fallback.
inline Gradient layout_gradient(const Layout& layout, const Eigen::VectorXd& v, double f0,
                                const OptimizationProblem& p, double h, int n) {
  Gradient out;
  out.value.resize(layout.dim());
  for (int k = 0; k < layout.dim(); ++k) {
    Eigen::VectorXd vp = v, vm = v;
    vp(k) += h;
    vm(k) -= h;
    const auto fp = evaluate(layout.centers(vp), p, n);
    const auto fm = evaluate(layout.centers(vm), p, n);
    out.evaluations += 2;
    if (fp && fm) {
      out.value(k) = (*fp - *fm) / (2.0 * h);
    } else if (fp) {
      out.value(k) = (*fp - f0) / h;
      out.one_sided = true;
    } else if (fm) {
      out.value(k) = (f0 - *fm) / h;
      out.one_sided = true;
    } else {
      throw GeometryError("numerical_gradient: both stencil points overlap");
    }
  }
  return out;
}

/// Inverse of a symmetric matrix with its eigenvalues replaced by their
/// absolute values, floored relative to the largest one.
class ModifiedInverse {
 public:
  explicit ModifiedInverse(const Eigen::MatrixXd& h) : eig_(h) {
    const Eigen::VectorXd lam = eig_.eigenvalues().cwiseAbs();
    const double floor = 1e-8 * std::max(1.0, lam.maxCoeff());
    inv_ = lam.cwiseMax(floor).cwiseInverse();
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& v) const {
    const Eigen::MatrixXd& q = eig_.eigenvectors();
    return q * inv_.cwiseProduct(q.transpose() * v);
  }

 private:
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_;
  Eigen::VectorXd inv_;
};

/// One primal-dual barrier run. The working point follows the barrier
/// steps; a step is accepted when it does not lower the capacity of the
/// incumbent, which is what the run reports.
class BarrierRun {
 public:
  BarrierRun(const OptimizationProblem& p, const MaximizeOptions& o, std::vector<Complex> start)
      : p_(p), o_(o), layout_(p), n_(p.n_solver) {
    p_.validate();
    if (start.size() != p_.size()) throw InfeasibleError("maximize: start has the wrong number of centers");
    if (p_.interval()) {
      for (const Complex z : start) {
        if (z.imag() != 0.0) throw InfeasibleError("maximize: interval constraint needs real centers");
      }
    } else if (p_.symmetry_pin && std::abs(start[0]) > 0.0) {
      const Complex turn = std::conj(start[0]) / std::abs(start[0]);
      for (Complex& z : start) z *= turn;
    }
    const Eigen::VectorXd g = constraint_values(start, p_);
    for (Eigen::Index c = 0; c < g.size(); ++c) {
      if (!(g(c) > 0.0)) {
        std::ostringstream os;
        os << "maximize: start is not strictly feasible (constraint " << c << " has value " << g(c) << ")";
        throw InfeasibleError(os.str());
      }
    }
    x_ = layout_.pack(start);
    lambda_ = o_.mu0 * g.cwiseInverse();
    B_ = Eigen::MatrixXd::Zero(layout_.dim(), layout_.dim());
    mu_ = o_.mu0;
    refresh();
  }

  /// Barrier continuation at n_solver down to mu_min.
  void solve_levels() {
    for (double mu = o_.mu0;; mu /= o_.mu_factor) {
      mu_ = std::max(mu, o_.mu_min);
      inner(std::max(o_.inner_tol, 10.0 * mu_), o_.max_inner);
      if (mu_ <= o_.mu_min || capped_) break;
    }
  }

  /// Continues at mu_min on the polish discretization. Capacities at the
  /// two fidelities are not compared, so the incumbent restarts here.
  void polish() {
    if (n_ == p_.n_polish) return;
    n_ = p_.n_polish;
    mu_ = o_.mu_min;
    refresh();
    inner(o_.inner_tol, o_.max_polish);
  }

  double cap() const noexcept { return best_f_; }

  OptimizationResult result() {
    OptimizationResult r;
    std::vector<Complex> z = layout_.centers(best_x_);
    const Eigen::VectorXd g = constraint_values(z, p_);
    r.violation = violation_of(g);
    r.projected_gradient = projected_gradient(z, g, best_grad_);

    const auto circles = circles_of(z, p_.radii);
    const CapacityResult full = capacity(std::span<const EuclideanCircle>(circles), n_);
    ++evaluations_;
    r.cap = full.cap;
    r.b = full.b;
    r.n = n_;
    if (!p_.interval() && p_.symmetry_pin && z[0].real() < 0.0) {
      for (Complex& c : z) c = -c;
    }
    r.centers = std::move(z);
    r.trace = trace_;
    r.evaluations = evaluations_;
    r.iterations = iterations_;
    r.one_sided = one_sided_;
    r.converged = r.projected_gradient <= o_.stationarity_tol && r.violation <= 1e-9;
    return r;
  }

 private:
  struct Step {
    Eigen::VectorXd x;
    double f;
  };

  /// Evaluates the working point afresh and makes it the incumbent.
  void refresh() {
    const auto f = evaluate(layout_.centers(x_), p_, n_);
    ++evaluations_;
    if (!f) {
      throw InfeasibleError("maximize: capacity not resolvable at n = " + std::to_string(n_) +
                            "; disks overlap or nearly touch");
    }
    f_ = *f;
    grad_ = gradient(x_, f_);
    best_f_ = -std::numeric_limits<double>::infinity();
    record();
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& v, double f0) {
    Gradient gr = layout_gradient(layout_, v, f0, p_, o_.grad_step, n_);
    evaluations_ += gr.evaluations;
    step_one_sided_ = gr.one_sided;
    one_sided_ = one_sided_ || gr.one_sided;
    return gr.value;
  }

  void record() {
    TraceEntry e;
    e.iteration = iterations_;
    e.centers = layout_.centers(x_);
    e.cap = f_;
    e.violation = violation_of(constraint_values(e.centers, p_));
    e.mu = mu_;
    e.n = n_;
    e.one_sided = step_one_sided_;
    e.accepted = f_ >= best_f_;
    if (e.accepted) {
      best_x_ = x_;
      best_f_ = f_;
      best_grad_ = grad_;
    }
    trace_.push_back(std::move(e));
  }

  /// B plus the primal-dual barrier Hessian, in which the multiplier
  /// estimates stand in for mu / g.
  Eigen::MatrixXd model_hessian(const Eigen::VectorXd& g, const Eigen::MatrixXd& jac) const {
    Eigen::MatrixXd h = B_;
    for (Eigen::Index c = 0; c < g.size(); ++c) {
      h.noalias() += (lambda_(c) / g(c)) * jac.col(c) * jac.col(c).transpose();
    }
    // containment g = R^2 - |z|^2 has Hessian -2 I
    for (int j = 0; j < layout_.size(); ++j) {
      h(layout_.x_index(j), layout_.x_index(j)) += 2.0 * lambda_(j);
      if (layout_.y_index(j) >= 0) h(layout_.y_index(j), layout_.y_index(j)) += 2.0 * lambda_(j);
    }
    return h;
  }

  /// Newton step on lambda_c g_c = mu, cut back to keep lambda positive and
  /// then held within a wide band around mu / g.
  void update_multipliers(const Eigen::VectorXd& g, const Eigen::VectorXd& dg, const Eigen::VectorXd& gnew) {
    const Eigen::VectorXd dl = ((mu_ - lambda_.cwiseProduct(dg).array()) / g.array()).matrix() - lambda_;
    double alpha = 1.0;
    for (Eigen::Index c = 0; c < dl.size(); ++c) {
      if (dl(c) < 0.0) alpha = std::min(alpha, -(1.0 - o_.boundary_fraction) * lambda_(c) / dl(c));
    }
    lambda_ += alpha * dl;
    constexpr double kappa = 1e10;
    for (Eigen::Index c = 0; c < dl.size(); ++c) {
      lambda_(c) = std::clamp(lambda_(c), mu_ / (kappa * gnew(c)), kappa * mu_ / gnew(c));
    }
  }

  /// Symmetric rank-one update of the model of -cap; unlike BFGS it can
  /// carry the negative curvature of -cap along outward moves.
  void update_model(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
    const Eigen::VectorXd r = y - B_ * s;
    const double sr = s.dot(r);
    if (std::abs(sr) > 1e-8 * s.norm() * r.norm()) B_ += r * r.transpose() / sr;
  }

  double barrier(const Eigen::VectorXd& g) const { return g.array().log().sum(); }

  /// Backtracking with a fraction-to-boundary rule and Armijo on phi.
  std::optional<Step> search(const Eigen::VectorXd& d, const Eigen::VectorXd& g, double slope) {
    constexpr double armijo = 1e-4;
    const double phi0 = -f_ - mu_ * barrier(g);
    for (double alpha = 1.0; alpha > 1e-12; alpha *= 0.5) {
      Eigen::VectorXd xt = x_ + alpha * d;
      const std::vector<Complex> zt = layout_.centers(xt);
      const Eigen::VectorXd gt = constraint_values(zt, p_);
      if (!((gt.array() >= o_.boundary_fraction * g.array()).all())) continue;
      const auto f = evaluate(zt, p_, n_);
      ++evaluations_;
      if (f && -*f - mu_ * barrier(gt) <= phi0 + armijo * alpha * slope) return Step{std::move(xt), *f};
    }
    return std::nullopt;
  }

  bool inner(double tol, int max_iter) {
    for (int it = 0; it < max_iter; ++it) {
      if (iterations_ >= o_.max_iterations) {
        capped_ = true;
        return false;
      }
      const std::vector<Complex> z = layout_.centers(x_);
      const Eigen::VectorXd g = constraint_values(z, p_);
      const Eigen::MatrixXd jac = constraint_jacobian(z, layout_);
      const Eigen::VectorXd gphi = -grad_ - jac * (mu_ * g.cwiseInverse());
      if (gphi.lpNorm<Eigen::Infinity>() <= tol) return true;

      Eigen::VectorXd d = ModifiedInverse(model_hessian(g, jac)).solve(-gphi);
      if (!d.allFinite() || gphi.dot(d) >= 0.0) d = -gphi;
      if (d.norm() > o_.max_step) d *= o_.max_step / d.norm();
      std::optional<Step> step = search(d, g, gphi.dot(d));
      if (!step) return false;

      const Eigen::VectorXd s = step->x - x_;
      update_multipliers(g, jac.transpose() * s, constraint_values(layout_.centers(step->x), p_));
      const Eigen::VectorXd gnew = gradient(step->x, step->f);
      update_model(s, grad_ - gnew);
      x_ = std::move(step->x);
      f_ = step->f;
      grad_ = gnew;
      ++iterations_;
      record();
    }
    return false;
  }

  double projected_gradient(std::span<const Complex> z, const Eigen::VectorXd& g, const Eigen::VectorXd& grad) const {
    const Eigen::MatrixXd jac = constraint_jacobian(z, layout_);
    std::vector<Eigen::Index> active;
    for (Eigen::Index c = 0; c < g.size(); ++c) {
      if (g(c) <= o_.active_tol) active.push_back(c);
    }
    Eigen::MatrixXd A(layout_.dim(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t c = 0; c < active.size(); ++c) A.col(c) = jac.col(active[c]);
    // grad cap = -sum lambda_c grad g_c with lambda >= 0 at a KKT point
    const Eigen::VectorXd lambda = nnls(A, -grad);
    return (grad + A * lambda).norm();
  }

  OptimizationProblem p_;
  MaximizeOptions o_;
  Layout layout_;
  int n_;
  double mu_ = 0.0;
  Eigen::VectorXd x_, grad_, lambda_;
  double f_ = 0.0;
  Eigen::VectorXd best_x_, best_grad_;
  double best_f_ = 0.0;
  Eigen::MatrixXd B_;
  bool capped_ = false;
  bool one_sided_ = false;
  bool step_one_sided_ = false;
  int iterations_ = 0;
  int evaluations_ = 0;
  std::vector<TraceEntry> trace_;
};

}  // namespace detail

/// cap(B^2, E) for the given centers at fidelity n (default n_solver).
/// Empty when two disks overlap or touch, a center leaves B^2, or the
/// disks are too close for fidelity n to resolve. Containment is not
/// checked.
inline std::optional<double> objective(std::span<const Complex> centers, const OptimizationProblem& problem,
                                       int n = 0) {
  if (centers.size() != problem.size()) throw DomainError("objective: center and radius counts differ");
  return detail::evaluate(centers, problem, n > 0 ? n : problem.n_solver);
}

/// Derivative of the objective with respect to (x_1, y_1, ..., x_m, y_m),
/// or (x_1, ..., x_m) for the interval constraint.
inline Gradient numerical_gradient(std::span<const Complex> centers, const OptimizationProblem& problem,
                                   double h = 1e-5, int n = 0) {
  if (!(h > 0.0)) throw DomainError("numerical_gradient: h must be positive");
  OptimizationProblem free = problem;
  free.symmetry_pin = false;
  const detail::Layout layout(free);
  if (centers.size() != free.size()) throw DomainError("numerical_gradient: center and radius counts differ");
  const int fid = n > 0 ? n : problem.n_solver;
  const auto f0 = detail::evaluate(centers, free, fid);
  if (!f0) throw GeometryError("numerical_gradient: disks overlap at the base point");
  Gradient g = detail::layout_gradient(layout, layout.pack(centers), *f0, free, h, fid);
  ++g.evaluations;
  return g;
}

/// Local maximizer from a strictly feasible start.
inline OptimizationResult maximize(std::span<const Complex> start, const OptimizationProblem& problem,
                                   const MaximizeOptions& opts = {}) {
  detail::BarrierRun run(problem, opts, {start.begin(), start.end()});
  run.solve_levels();
  if (opts.polish) run.polish();
  return run.result();
}

/// Random strictly feasible centers: each attempt places the disks one by
/// one, redrawing a center up to 200 times; 200 attempts in all. Attempts
/// that n_solver cannot resolve are dropped.
template <class Rng>
std::vector<Complex> random_start(const OptimizationProblem& problem, Rng& rng) {
  problem.validate();
  constexpr int kAttempts = 200;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t m = problem.size();
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    std::vector<Complex> z;
    for (std::size_t j = 0; j < m; ++j) {
      const double rj = problem.containment_radius(j);
      bool placed = false;
      for (int draw = 0; draw < kAttempts && !placed; ++draw) {
        Complex c;
        if (problem.interval()) {
          c = {rj * (2.0 * unit(rng) - 1.0), 0.0};
        } else {
          const double rad = rj * std::sqrt(unit(rng));
          c = std::polar(rad, 2.0 * std::numbers::pi * unit(rng));
        }
        if (!(std::abs(c) < rj)) continue;
        placed = true;
        for (std::size_t i = 0; i < z.size() && placed; ++i) {
          placed = hyp_distance(c, z[i]) > problem.radii[i] + problem.radii[j] + problem.margin;
        }
        if (placed) z.push_back(c);
      }
      if (!placed) break;
    }
    if (z.size() == m) {
      if (!problem.interval() && problem.symmetry_pin && std::abs(z[0]) > 0.0) {
        const double r0 = std::abs(z[0]);
        const Complex turn = std::conj(z[0]) / r0;
        for (Complex& c : z) c *= turn;
        z[0] = {r0, 0.0};
      }
      if (detail::evaluate(z, problem, problem.n_solver)) return z;
    }
  }
  throw InfeasibleError("random_start: no feasible configuration found in 200 attempts");
}

/// Throws InfeasibleError when the sampler cannot place the disks.
inline void probe_feasibility(const OptimizationProblem& problem) {
  std::mt19937_64 rng(0);
  (void)random_start(problem, rng);
}

/// Groups results whose capacities differ by at most tol, keeping the best
/// of each group, sorted by decreasing capacity.
inline std::vector<OptimizationResult> dedup_by_capacity(std::vector<OptimizationResult> runs, double tol) {
  std::stable_sort(runs.begin(), runs.end(), [](const auto& a, const auto& b) { return a.cap > b.cap; });
  std::vector<OptimizationResult> out;
  for (auto& r : runs) {
    const bool seen = std::any_of(out.begin(), out.end(), [&](const auto& o) { return std::abs(o.cap - r.cap) <= tol; });
    if (!seen) out.push_back(std::move(r));
  }
  return out;
}

/// k seeded runs from random starts. The runs stop at n_solver; the best
/// run of each capacity level is then polished and the levels are merged
/// again after the polish.
inline std::vector<OptimizationResult> multistart(const OptimizationProblem& problem, int k, std::uint64_t seed,
                                                  const MaximizeOptions& opts = {}, double dedup_tol = 1e-3) {
  if (k < 1) throw DomainError("multistart: need at least one start");
  problem.validate();
  std::mt19937_64 rng(seed);
  std::vector<std::vector<Complex>> starts;
  for (int s = 0; s < k; ++s) starts.push_back(random_start(problem, rng));

  std::vector<detail::BarrierRun> runs;
  runs.reserve(k);
  for (const auto& s : starts) {
    runs.emplace_back(problem, opts, s);
    runs.back().solve_levels();
  }

  std::vector<std::size_t> order(runs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return runs[a].cap() > runs[b].cap(); });
  std::vector<std::size_t> reps;
  for (const std::size_t i : order) {
    const bool seen = std::any_of(reps.begin(), reps.end(),
                                  [&](auto r) { return std::abs(runs[r].cap() - runs[i].cap()) <= dedup_tol; });
    if (!seen) reps.push_back(i);
  }

  std::vector<OptimizationResult> out;
  for (const std::size_t i : reps) {
    if (opts.polish) runs[i].polish();
    out.push_back(runs[i].result());
  }
  return dedup_by_capacity(std::move(out), dedup_tol);
}

/// Hyperbolic distances between neighbours: angular order around the
/// origin for the disk constraint (cyclic), left to right on the interval.
inline std::vector<double> neighbour_distances(std::span<const Complex> centers, ConstraintKind kind) {
  std::vector<Complex> z(centers.begin(), centers.end());
  if (kind == ConstraintKind::IntervalCenters) {
    std::stable_sort(z.begin(), z.end(), [](Complex a, Complex b) { return a.real() < b.real(); });
    return adjacent_distances(z, false);
  }
  // start at center 1 and go counterclockwise
  const double base = std::arg(z.front());
  auto angle = [base](Complex c) {
    double a = std::arg(c) - base;
    while (a < 0.0) a += 2.0 * std::numbers::pi;
    return a;
  };
  std::stable_sort(z.begin() + 1, z.end(), [&](Complex a, Complex b) { return angle(a) < angle(b); });
  return adjacent_distances(z, true);
}

/// Smallest max-deviation between two distance patterns, allowing cyclic
/// shifts and reversal (cyclic) or only reversal (open chains).
inline double pattern_deviation(const std::vector<double>& got, const std::vector<double>& want, bool cyclic) {
  if (got.size() != want.size()) return std::numeric_limits<double>::infinity();
  const std::size_t n = got.size();
  double best = std::numeric_limits<double>::infinity();
  for (int rev = 0; rev < 2; ++rev) {
    for (std::size_t shift = 0; shift < (cyclic ? n : 1); ++shift) {
      double dev = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        // a reversed cycle visits the gaps backwards
        const std::size_t k = rev ? (n + shift - 1 - i) % n : (i + shift) % n;
        dev = std::max(dev, std::abs(got[k] - want[i]));
      }
      best = std::min(best, dev);
    }
  }
  return best;
}

}  // namespace hypcap
