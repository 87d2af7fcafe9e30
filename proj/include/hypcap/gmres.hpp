#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "hypcap/errors.hpp"

namespace hypcap {

struct GmresResult {
  Eigen::VectorXd x;
  int iterations = 0;
  /// ||rhs - A x|| / ||rhs|| recomputed from the returned x.
  double residual = 0.0;
  /// Residual estimate carried by the Givens rotations.
  double estimated_residual = 0.0;
};

template <class Op>
concept LinearOperator = requires(const Op& op, const Eigen::VectorXd& v) {
  { op(v) } -> std::convertible_to<Eigen::VectorXd>;
};

template <class Op>
concept BlockLinearOperator = requires(const Op& op, const Eigen::MatrixXd& v) {
  { op(v) } -> std::convertible_to<Eigen::MatrixXd>;
};

namespace detail {

/// Arnoldi process with Givens rotations for one right-hand side. The
/// caller supplies A v for the current basis vector; the class does the
/// modified Gram-Schmidt step and tracks the least-squares residual.
class ArnoldiState {
 public:
  ArnoldiState(const Eigen::VectorXd& rhs, double tol, int maxit)
      : tol_(tol), maxit_(maxit), beta_(rhs.norm()) {
    if (beta_ == 0.0) {
      done_ = true;
      est_ = 0.0;
      return;
    }
    cap_ = std::min(maxit_, 64);
    hess_ = Eigen::MatrixXd::Zero(cap_ + 1, cap_);
    cs_ = Eigen::VectorXd::Zero(cap_);
    sn_ = Eigen::VectorXd::Zero(cap_);
    g_ = Eigen::VectorXd::Zero(cap_ + 1);
    g_(0) = beta_;
    basis_.push_back(rhs / beta_);
  }

  bool done() const noexcept { return done_; }
  const Eigen::VectorXd& current() const { return basis_.back(); }

  void step(Eigen::VectorXd w) {
    const int k = k_;
    if (k == cap_) grow();
    for (int i = 0; i <= k; ++i) {
      hess_(i, k) = basis_[i].dot(w);
      w -= hess_(i, k) * basis_[i];
    }
    const double wnorm = w.norm();
    hess_(k + 1, k) = wnorm;
    for (int i = 0; i < k; ++i) {
      const double a = hess_(i, k);
      const double b = hess_(i + 1, k);
      hess_(i, k) = cs_(i) * a + sn_(i) * b;
      hess_(i + 1, k) = -sn_(i) * a + cs_(i) * b;
    }
    const double den = std::hypot(hess_(k, k), hess_(k + 1, k));
    cs_(k) = hess_(k, k) / den;
    sn_(k) = hess_(k + 1, k) / den;
    hess_(k, k) = den;
    hess_(k + 1, k) = 0.0;
    g_(k + 1) = -sn_(k) * g_(k);
    g_(k) = cs_(k) * g_(k);
    k_ = k + 1;
    est_ = std::abs(g_(k_)) / beta_;
    // wnorm == 0: the Krylov space is invariant and the solution exact
    if (est_ <= tol_ || wnorm == 0.0 || k_ >= maxit_) {
      done_ = true;
    } else {
      basis_.push_back(w / wnorm);
    }
  }

  /// Assembles x; throws when the residual estimate missed the tolerance.
  /// The true residual is left for the caller.
  GmresResult finish(Eigen::Index dim) const {
    GmresResult out;
    out.x = Eigen::VectorXd::Zero(dim);
    if (beta_ == 0.0) return out;
    const Eigen::VectorXd y =
        hess_.topLeftCorner(k_, k_).triangularView<Eigen::Upper>().solve(g_.head(k_));
    for (int i = 0; i < k_; ++i) out.x += y(i) * basis_[i];
    out.iterations = k_;
    out.estimated_residual = est_;
    if (est_ > tol_) {
      std::ostringstream os;
      os << "gmres: no convergence after " << k_ << " iterations (relative residual " << est_ << ", tol "
         << tol_ << ")";
      throw SolverError(os.str(), est_, k_);
    }
    return out;
  }

 private:
  void grow() {
    const int grown = std::min(maxit_, 2 * cap_);
    hess_.conservativeResizeLike(Eigen::MatrixXd::Zero(grown + 1, grown));
    cs_.conservativeResizeLike(Eigen::VectorXd::Zero(grown));
    sn_.conservativeResizeLike(Eigen::VectorXd::Zero(grown));
    g_.conservativeResizeLike(Eigen::VectorXd::Zero(grown + 1));
    cap_ = grown;
  }

  double tol_;
  int maxit_;
  double beta_;
  double est_ = 1.0;
  bool done_ = false;
  int k_ = 0;
  int cap_ = 0;
  std::vector<Eigen::VectorXd> basis_;
  Eigen::MatrixXd hess_;
  Eigen::VectorXd cs_, sn_, g_;
};

inline int clamp_maxit(int maxit, Eigen::Index dim) {
  if (maxit <= 0) throw SolverError("gmres: maxit must be positive");
  return static_cast<int>(std::min<Eigen::Index>(maxit, std::max<Eigen::Index>(dim, 1)));
}

}  // namespace detail

/// Unrestarted GMRES with modified Gram-Schmidt orthogonalization and a
/// zero initial guess. Throws SolverError when the relative residual is
/// still above `tol` after `maxit` iterations.
template <LinearOperator Op>
GmresResult gmres(const Op& apply, const Eigen::VectorXd& rhs, double tol, int maxit) {
  detail::ArnoldiState state(rhs, tol, detail::clamp_maxit(maxit, rhs.size()));
  while (!state.done()) state.step(apply(state.current()));
  GmresResult out = state.finish(rhs.size());
  const double beta = rhs.norm();
  if (beta > 0.0) out.residual = (rhs - apply(out.x)).norm() / beta;
  return out;
}

/// Independent GMRES solves for every column of `rhs`, advanced in lockstep
/// so that each step applies the operator to a block of vectors. Each
/// column follows the single-vector recurrence.
template <BlockLinearOperator Op>
std::vector<GmresResult> gmres_batch(const Op& apply, const Eigen::MatrixXd& rhs, double tol, int maxit) {
  const Eigen::Index cols = rhs.cols();
  maxit = detail::clamp_maxit(maxit, rhs.rows());
  std::vector<detail::ArnoldiState> states;
  states.reserve(cols);
  for (Eigen::Index c = 0; c < cols; ++c) states.emplace_back(rhs.col(c), tol, maxit);

  std::vector<Eigen::Index> active;
  for (;;) {
    active.clear();
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!states[c].done()) active.push_back(c);
    }
    if (active.empty()) break;
    Eigen::MatrixXd block(rhs.rows(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t a = 0; a < active.size(); ++a) block.col(a) = states[active[a]].current();
    const Eigen::MatrixXd image = apply(block);
    for (std::size_t a = 0; a < active.size(); ++a) states[active[a]].step(image.col(a));
  }

  std::vector<GmresResult> out;
  out.reserve(cols);
  Eigen::MatrixXd x(rhs.rows(), cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    out.push_back(states[c].finish(rhs.rows()));
    x.col(c) = out.back().x;
  }
  const Eigen::MatrixXd resid = rhs - Eigen::MatrixXd(apply(x));
  for (Eigen::Index c = 0; c < cols; ++c) {
    const double beta = rhs.col(c).norm();
    if (beta > 0.0) out[c].residual = resid.col(c).norm() / beta;
  }
  return out;
}

}  // namespace hypcap
