#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "hypcap/bie.hpp"
#include "hypcap/specialfn.hpp"

using namespace hypcap;

namespace {

constexpr double pi = std::numbers::pi;

std::vector<EuclideanCircle> ring(int m, double R, double r, double phase = 0.0) {
  std::vector<EuclideanCircle> out;
  for (int j = 0; j < m; ++j) out.emplace_back(std::polar(R, phase + 2.0 * pi * j / m), r);
  return out;
}

double cap_of(const std::vector<EuclideanCircle>& c, int n, const SolverOptions& o = {}) {
  return capacity(std::span<const EuclideanCircle>(c), n, o).cap;
}

}  // namespace

TEST(Parameterize, SingleCenteredDisk) {
  const std::vector<EuclideanCircle> c{{0.0, 0.1}};
  const DiscretizedBoundary db = parameterize(std::span<const EuclideanCircle>(c), 16);
  ASSERT_EQ(db.size(), 32);
  for (int i = 0; i < 16; ++i) {
    EXPECT_NEAR(std::abs(db.eta[i]), 1.0, 1e-15);
    EXPECT_NEAR(std::abs(db.eta[16 + i]), 0.1, 1e-15);
    EXPECT_EQ(db.component_of(i), 0);
    EXPECT_EQ(db.component_of(16 + i), 1);
    // counterclockwise outside, clockwise inside
    EXPECT_GT(std::imag(std::conj(db.eta[i]) * db.etap[i]), 0.0);
    EXPECT_LT(std::imag(std::conj(db.eta[16 + i]) * db.etap[16 + i]), 0.0);
  }
  // the origin lies inside the disk, so alpha has to move off it
  EXPECT_GT(std::abs(db.alpha), 0.1);
  EXPECT_LT(std::abs(db.alpha), 1.0);
}

TEST(Parameterize, NodeCountForFiveDisks) {
  const auto c = ring(5, 0.5, 0.1);
  EXPECT_EQ(parameterize(std::span<const EuclideanCircle>(c), 64).size(), 6 * 64);
}

TEST(Parameterize, DerivativesMatchFiniteDifferences) {
  const std::vector<EuclideanCircle> c{{Complex(0.2, -0.3), 0.15}};
  const int n = 64;
  const DiscretizedBoundary db = parameterize(std::span<const EuclideanCircle>(c), n);
  const double h = 2.0 * pi / n;
  for (int i = 1; i + 1 < n; ++i) {
    for (int k : {0, 1}) {
      const int node = k * n + i;
      const Complex d1 = (db.eta[node + 1] - db.eta[node - 1]) / (2.0 * h);
      EXPECT_NEAR(std::abs(d1 - db.etap[node]), 0.0, 2e-3 * std::abs(db.etap[node]));
      const Complex d2 = (db.etap[node + 1] - db.etap[node - 1]) / (2.0 * h);
      EXPECT_NEAR(std::abs(d2 - db.etapp[node]), 0.0, 2e-3 * std::abs(db.etapp[node]));
    }
  }
}

TEST(Parameterize, RejectsTangentAndEscapingCircles) {
  const std::vector<EuclideanCircle> tangent{{-0.2, 0.2}, {0.2, 0.2}};
  EXPECT_THROW(parameterize(std::span<const EuclideanCircle>(tangent), 32), GeometryError);
  const std::vector<EuclideanCircle> out{{0.7, 0.3}};
  EXPECT_THROW(parameterize(std::span<const EuclideanCircle>(out), 32), GeometryError);
  const std::vector<EuclideanCircle> ok{{0.0, 0.3}};
  EXPECT_THROW(parameterize(std::span<const EuclideanCircle>(ok), 15), DomainError);
  EXPECT_THROW(parameterize(std::span<const EuclideanCircle>(ok), 32, Complex(0.1, 0.0)), GeometryError);
}

TEST(Parameterize, AlphaLeavesTheDiskCoveringTheOrigin) {
  const std::vector<EuclideanCircle> c{{Complex(0.05, 0.0), 0.3}, {Complex(-0.6, 0.2), 0.1}};
  const DiscretizedBoundary db = parameterize(std::span<const EuclideanCircle>(c), 32);
  EXPECT_GT(std::abs(db.alpha - c[0].center()), c[0].radius());
  EXPECT_GT(std::abs(db.alpha - c[1].center()), c[1].radius());
  EXPECT_LT(std::abs(db.alpha), 1.0);
}

TEST(Kernel, DiagonalOnTheUnitCircle) {
  // with alpha = 0 the limit eta''/(2 eta') - A'/A is -i/2 everywhere
  const std::vector<EuclideanCircle> c{{0.5, 0.1}};
  const DiscretizedBoundary db = parameterize(std::span<const EuclideanCircle>(c), 32);
  ASSERT_EQ(db.alpha, Complex(0.0, 0.0));
  for (int i = 0; i < 32; ++i) {
    EXPECT_NEAR(neumann_kernel(i, i, db), -0.5 / pi, 1e-15);
    EXPECT_NEAR(m_kernel(i, i, db), 0.0, 1e-15);
  }
}

TEST(Kernel, DiagonalOnAnInnerCircle) {
  const Complex cc{0.3, 0.2};
  const double r = 0.15;
  const std::vector<EuclideanCircle> c{{cc, r}};
  const int n = 32;
  const DiscretizedBoundary db = parameterize(std::span<const EuclideanCircle>(c), n);
  for (int i = 0; i < n; ++i) {
    // eta = c + r e^{-it}: eta''/(2 eta') = -i/2 and A'/A = -i r e^{-it}/(eta - alpha)
    const double t = 2.0 * pi * i / n;
    const Complex e = std::polar(r, -t);
    const Complex lim = Complex(0.0, -0.5) + Complex(0.0, 1.0) * e / (cc + e - db.alpha);
    EXPECT_NEAR(neumann_kernel(n + i, n + i, db), lim.imag() / pi, 1e-14);
    EXPECT_NEAR(m_kernel(n + i, n + i, db), lim.real() / pi, 1e-14);
  }
}

TEST(Kernel, OffComponentValuesAreFinite) {
  const auto c = ring(3, 0.5, 0.1);
  const DiscretizedBoundary db = parameterize(std::span<const EuclideanCircle>(c), 32);
  for (int i = 0; i < db.size(); i += 7) {
    for (int j = 0; j < db.size(); j += 5) {
      if (db.component_of(i) == db.component_of(j)) continue;
      EXPECT_TRUE(std::isfinite(neumann_kernel(i, j, db)));
      EXPECT_TRUE(std::isfinite(m_kernel(i, j, db)));
    }
  }
}

TEST(Operators, ConjugationIsExactOnTheUnitCircle) {
  // with alpha = 0 the unit-circle block of M is -(1/2pi) cot((s-t)/2):
  // cos(kt) maps to -sin(ks) for every k < n/2
  const std::vector<EuclideanCircle> c{{0.5, 0.1}};
  const int n = 64;
  const DiscretizedBoundary db = parameterize(std::span<const EuclideanCircle>(c), n);
  const BoundaryOperators ops(db);
  ASSERT_TRUE(ops.dense());
  const Eigen::MatrixXd block = ops.m_matrix().topLeftCorner(n, n);
  for (int k = 1; k < n / 2; ++k) {
    Eigen::VectorXd f(n), g(n);
    for (int i = 0; i < n; ++i) {
      f(i) = std::cos(k * db.t[i]);
      g(i) = -std::sin(k * db.t[i]);
    }
    EXPECT_LT((block * f - g).cwiseAbs().maxCoeff(), 1e-12) << "k = " << k;
  }
}

TEST(Operators, DenseAndMatrixFreeAgree) {
  const auto c = ring(3, 0.5, 0.12);
  const DiscretizedBoundary db = parameterize(std::span<const EuclideanCircle>(c), 64);
  const BoundaryOperators dense(db, true), lazy(db, false);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(db.size(), 3);
  EXPECT_LT((dense.apply_N(x) - lazy.apply_N(x)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((dense.apply_M(x) - lazy.apply_M(x)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Operators, ConstantsConvergeUnderRefinement) {
  // N 1 and M 1 at n against the same nodes of a 4n grid
  const auto c = ring(5, 0.5, 0.1);
  const int n = 128;
  const DiscretizedBoundary coarse = parameterize(std::span<const EuclideanCircle>(c), n);
  const DiscretizedBoundary fine = parameterize(std::span<const EuclideanCircle>(c), 4 * n);
  const BoundaryOperators oc(coarse), of(fine);
  const Eigen::MatrixXd one_c = Eigen::MatrixXd::Ones(coarse.size(), 1);
  const Eigen::MatrixXd one_f = Eigen::MatrixXd::Ones(fine.size(), 1);
  const Eigen::MatrixXd nc = oc.apply_N(one_c), nf = of.apply_N(one_f);
  const Eigen::MatrixXd mc = oc.apply_M(one_c), mf = of.apply_M(one_f);
  double dn = 0.0, dm = 0.0;
  for (int i = 0; i < coarse.size(); ++i) {
    const int comp = i / n, local = i % n;
    const int j = comp * 4 * n + 4 * local;
    dn = std::max(dn, std::abs(nc(i, 0) - nf(j, 0)));
    dm = std::max(dm, std::abs(mc(i, 0) - mf(j, 0)));
  }
  EXPECT_LT(dn, 1e-10);
  EXPECT_LT(dm, 1e-10);
}

TEST(Operators, SmoothDataSelfConverges) {
  const auto c = ring(5, 0.5, 0.1);
  auto apply = [&](int n) {
    const DiscretizedBoundary db = parameterize(std::span<const EuclideanCircle>(c), n);
    Eigen::VectorXd f(db.size());
    for (int i = 0; i < db.size(); ++i) f(i) = std::real(db.eta[i] * db.eta[i]) + std::imag(db.eta[i]);
    return apply_M(f, db);
  };
  const Eigen::VectorXd a = apply(128), b = apply(256);
  double d = 0.0;
  for (int i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a(i) - b((i / 128) * 256 + 2 * (i % 128))));
  EXPECT_LT(d, 1e-10);
}

TEST(SolveIe, HIsPiecewiseConstant) {
  const auto c = ring(5, 0.5, 0.1);
  const DiscretizedBoundary db = parameterize(std::span<const EuclideanCircle>(c), 256);
  const BoundaryOperators ops(db);
  for (int k = 1; k <= 5; ++k) {
    const KernelSolution s = solve_ie(k, ops);
    EXPECT_LT(s.spread, 1e-8) << "k = " << k;
    EXPECT_LT(s.residual, 1e-13);
  }
  EXPECT_THROW(solve_ie(6, ops), DomainError);
}

TEST(SolveIe, IterationsAlmostIndependentOfN) {
  const auto c = ring(5, 0.5, 0.1);
  std::vector<int> its;
  for (int n : {64, 128, 256, 512}) {
    const DiscretizedBoundary db = parameterize(std::span<const EuclideanCircle>(c), n);
    its.push_back(solve_ie(1, db).iterations);
  }
  const auto [lo, hi] = std::minmax_element(its.begin(), its.end());
  EXPECT_LE(*hi - *lo, 4);
  EXPECT_LT(*hi, 60);
}

TEST(Capacity, CenteredDiskIsAnAnnulus) {
  const std::vector<EuclideanCircle> c{{0.0, 0.1}};
  EXPECT_NEAR(cap_of(c, 256), annulus_capacity(0.1, 1.0), 1e-10);
}

TEST(Capacity, OffCenterDiskMatchesClosedForm) {
  const EuclideanCircle e = hyp_to_euclidean({Complex(0.4, 0.2), 0.5});
  EXPECT_NEAR(cap_of({e}, 256), hyp_disk_capacity(0.5), 1e-8);
}

TEST(Capacity, FivePointRing) {
  const auto res = capacity(std::span<const EuclideanCircle>(ring(5, 0.5, 0.1)), 1024);
  EXPECT_NEAR(res.cap, 9.47487674904924, 1e-9);
  EXPECT_EQ(res.n, 1024);
  double sum = 0.0;
  for (int k = 0; k < 5; ++k) {
    EXPECT_NEAR(res.b[k], 2.0 * pi * res.a[k], 1e-14);
    EXPECT_GT(res.b[k], 0.0);
    sum += res.b[k];
  }
  EXPECT_NEAR(sum, res.cap, 1e-12);
  EXPECT_TRUE(res.warnings.empty());
}

TEST(Capacity, SymmetricRingHasEqualContributions) {
  const auto res = capacity(std::span<const EuclideanCircle>(ring(6, 0.5, 0.1)), 256);
  for (double b : res.b) EXPECT_NEAR(b, res.b[0], 1e-8);
  for (double s : res.h_spread) EXPECT_LT(s, 1e-8);
}

TEST(Capacity, RotationInvariant) {
  const double a = cap_of(ring(4, 0.6, 0.15), 256);
  for (double phase : {0.1, 1.0, 2.5}) EXPECT_NEAR(cap_of(ring(4, 0.6, 0.15, phase), 256), a, 1e-9);
}

TEST(Capacity, IndependentOfAuxiliaryPoint) {
  const auto c = ring(5, 0.5, 0.1);
  SolverOptions a, b;
  a.alpha = Complex(0.0, 0.0);
  b.alpha = Complex(0.0, 0.8);
  EXPECT_NEAR(cap_of(c, 256, a), cap_of(c, 256, b), 1e-9);
}

TEST(Capacity, BoundsOnRandomConstellations) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int tested = 0;
  while (tested < 8) {
    const int m = 2 + static_cast<int>(3 * u(rng));
    std::vector<HyperbolicDisk> d;
    for (int tries = 0; tries < 500 && static_cast<int>(d.size()) < m; ++tries) {
      const HyperbolicDisk cand(std::polar(0.7 * std::sqrt(u(rng)), 2 * pi * u(rng)), 0.1 + 0.6 * u(rng));
      bool ok = true;
      for (const auto& o : d) ok = ok && hyp_distance(o.center(), cand.center()) > o.radius() + cand.radius() + 0.2;
      if (ok) d.push_back(cand);
    }
    if (static_cast<int>(d.size()) < m) continue;
    const CapacityResult res = capacity(Constellation(d), 256);
    double sum = 0.0, best = 0.0;
    for (const auto& x : d) {
      sum += hyp_disk_capacity(x.radius());
      best = std::max(best, hyp_disk_capacity(x.radius()));
    }
    EXPECT_LE(res.cap, sum + 1e-8);
    EXPECT_GE(res.cap, best - 1e-8);
    ++tested;
  }
}

TEST(Capacity, ExponentialSelfConvergence) {
  const auto c = ring(5, 0.5, 0.1);
  const double ref = cap_of(c, 1024);
  std::vector<double> err;
  for (int n : {16, 32, 64, 128}) err.push_back(std::abs(cap_of(c, n) - ref));
  for (std::size_t i = 1; i < err.size(); ++i) {
    if (err[i - 1] < 1e-12) break;
    // each doubling gains at least a factor 10 until the rounding floor
    EXPECT_LT(err[i], 0.1 * err[i - 1]) << "step " << i;
  }
  EXPECT_LT(err.back(), 1e-11);
}

TEST(Capacity, NearTangencyWarns) {
  // two disks 1e-4 apart at a coarse grid
  const std::vector<EuclideanCircle> c{{Complex(-0.25005, 0.0), 0.25}, {Complex(0.25005, 0.0), 0.25}};
  const auto res = capacity(std::span<const EuclideanCircle>(c), 32);
  EXPECT_FALSE(res.warnings.empty());
}
