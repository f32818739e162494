#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "memoc/errors.hpp"
#include "memoc/kernel.hpp"

using namespace memoc;

namespace {

Eigen::VectorXd scalar(double v) {
  Eigen::VectorXd x(1);
  x << v;
  return x;
}

GridFunction sampled_exp(double h, int nodes, double amp, double rate) {
  return GridFunction::exponential(h, nodes, amp, rate);
}

}  // namespace

TEST_CASE("kernel norms: closed forms for exponentials") {
  const KernelNorms n1 = kernel_norms(Kernel::exponential(1.0, 1.0));
  CHECK(n1.l1 == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(n1.l2 == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  REQUIRE(n1.dl2.has_value());
  CHECK(*n1.dl2 == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));

  const KernelNorms n2 = kernel_norms(Kernel::exponential(3.0, 2.0));
  CHECK(n2.l1 == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(n2.l2 == doctest::Approx(2.0 / std::sqrt(6.0)).epsilon(1e-14));
  CHECK(*n2.dl2 == doctest::Approx(6.0 / std::sqrt(6.0)).epsilon(1e-14));
}

TEST_CASE("kernel norms: zero tabulated kernel") {
  const KernelNorms n = kernel_norms(Kernel::zero(1, 1));
  CHECK(n.l1 == 0.0);
  CHECK(n.l2 == 0.0);
  REQUIRE(n.dl2.has_value());
  CHECK(*n.dl2 == 0.0);
}

TEST_CASE("kernel norms: multi-term L1 quadrature matches a same-sign sum") {
  // same-sign terms: ||A||_L1 = sum of the term integrals exactly
  const Kernel a = Kernel::sum_of_exponentials(
      {{1.0, Eigen::MatrixXd::Constant(1, 1, 0.5)},
       {2.0, Eigen::MatrixXd::Constant(1, 1, 1.5)}});
  const KernelNorms n = kernel_norms(a);
  CHECK(n.l1 == doctest::Approx(0.5 / 1.0 + 1.5 / 2.0).epsilon(1e-10));  // quadrature route
  const double l2sq = 0.25 / 2.0 + 2.0 * 0.5 * 1.5 / 3.0 + 2.25 / 4.0;
  CHECK(n.l2 == doctest::Approx(std::sqrt(l2sq)).epsilon(1e-14));
}

TEST_CASE("kernel norms: tabulated dl2 absent when not smooth") {
  std::vector<Eigen::MatrixXd> samples(3, Eigen::MatrixXd::Constant(1, 1, 1.0));
  const Kernel rough = Kernel::tabulated(0.5, samples, false);
  CHECK_FALSE(kernel_norms(rough).dl2.has_value());
  const Kernel smooth = Kernel::tabulated(0.5, samples, true);
  CHECK(kernel_norms(smooth).dl2.has_value());
}

TEST_CASE("memory integral: zero history and trajectory") {
  const Kernel a = Kernel::exponential(1.0, 1.0);
  const HistoryState alpha(scalar(0.0), GridFunction::zero(1e-2, 1001, 1));
  const Eigen::MatrixXd traj = Eigen::MatrixXd::Zero(11, 1);
  const Eigen::VectorXd g = memory_integral(a, alpha, traj, 0.1, 1.0);
  CHECK(g.norm() == 0.0);
}

TEST_CASE("memory integral: exponential history at t = 0") {
  // A = e^{-s}, z = e^{-s}: int e^{-2s} = 1/2
  const Kernel a = Kernel::exponential(1.0, 1.0);
  const HistoryState alpha(scalar(1.0), sampled_exp(1e-3, 10001, 1.0, 1.0));
  const Eigen::MatrixXd traj = Eigen::MatrixXd::Ones(1, 1);
  const Eigen::VectorXd g = memory_integral(a, alpha, traj, 1e-3, 0.0);
  CHECK(g(0) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("memory integral: constant past gives the full kernel mass") {
  // x(t) = 1 for all past and present: G(t) = int A = 1 for any t
  const Kernel a = Kernel::exponential(1.0, 1.0);
  Eigen::MatrixXd samples = Eigen::MatrixXd::Ones(10001, 1);
  const GridFunction z(1e-3, samples, Tail::exponential(0.0));
  const HistoryState alpha(scalar(1.0), z);
  const int n = 101;
  const Eigen::MatrixXd traj = Eigen::MatrixXd::Ones(n, 1);
  for (double t : {0.0, 0.5, 1.0}) {
    const Eigen::VectorXd g = memory_integral(a, alpha, traj, 1e-2, t);
    CHECK(g(0) == doctest::Approx(1.0).epsilon(1e-5));  // trapezoid at h = 1e-2
  }
}

TEST_CASE("memory integral is linear in the (history, trajectory) pair") {
  const Kernel a = Kernel::exponential(0.7, 1.3);
  std::mt19937_64 rng(42);
  auto noise = [&](int n) {
    Eigen::MatrixXd m(n, 1);
    for (int i = 0; i < n; ++i)
      m(i, 0) = std::uniform_real_distribution<double>(-1, 1)(rng);
    return m;
  };
  const int nz = 101, nt = 21;
  const double hz = 0.1, h = 0.05;
  const Eigen::MatrixXd z1 = noise(nz), z2 = noise(nz);
  const Eigen::MatrixXd y1 = noise(nt), y2 = noise(nt);
  const double c1 = 2.0, c2 = -3.0;  // exact in floating point

  const HistoryState a1(scalar(0.0), GridFunction(hz, z1));
  const HistoryState a2(scalar(0.0), GridFunction(hz, z2));
  const HistoryState ac(scalar(0.0), GridFunction(hz, c1 * z1 + c2 * z2));
  const double t = 1.0;
  const Eigen::VectorXd lhs =
      memory_integral(a, ac, c1 * y1 + c2 * y2, h, t);
  const Eigen::VectorXd rhs = c1 * memory_integral(a, a1, y1, h, t) +
                              c2 * memory_integral(a, a2, y2, h, t);
  CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("memory tail obeys the Cauchy-Schwarz bound") {
  // |int A(t+s) z(s) ds| <= ||A||_L2 ||z||_L2
  const Kernel a = Kernel::exponential(1.0, 1.0);
  const KernelNorms norms = kernel_norms(a);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd samples(2001, 1);
    for (int i = 0; i < samples.rows(); ++i)
      samples(i, 0) = std::uniform_real_distribution<double>(-1, 1)(rng);
    const GridFunction z(5e-3, samples);
    const double lhs = memory_history_piece(a, z, 0.3).lpNorm<Eigen::Infinity>();
    CHECK(lhs <= norms.l2 * z.l2_norm() * (1.0 + 1e-9));
  }
}

TEST_CASE("exp memory channel: pure decay and steady state") {
  // x = 0, m0 = 1: m(1) = e^{-1}
  const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(1001, 1);
  const Eigen::VectorXd m1 =
      exp_memory_channel(1.0, zeros, 1e-3, scalar(1.0));
  CHECK(m1(0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

  // x = 1, m0 = 0: m -> 1
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(30001, 1);
  const Eigen::VectorXd m2 =
      exp_memory_channel(1.0, ones, 1e-3, scalar(0.0));
  CHECK(m2(0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("exp memory channel rejects nonpositive rates") {
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(11, 1);
  CHECK_THROWS_AS(exp_memory_channel(0.0, ones, 0.1, scalar(0.0)),
                  DomainError);
  CHECK_THROWS_AS(exp_memory_channel(-1.0, ones, 0.1, scalar(0.0)),
                  DomainError);
}

TEST_CASE("exp memory channel agrees with the direct quadrature") {
  // initial history e^{-s}; trajectory from the same decaying seed
  const double h = 1e-3;
  const int n = 1001;
  const GridFunction z = sampled_exp(h, 10001, 1.0, 1.0);
  const HistoryState alpha(scalar(1.0), z);
  Eigen::MatrixXd y(n, 1);
  for (int i = 0; i < n; ++i) y(i, 0) = std::exp(-i * h);
  const Kernel a = Kernel::exponential(1.0, 1.0);

  const Eigen::VectorXd m0 = exp_moment(z, 1.0);
  const Eigen::MatrixXd channel = exp_memory_channel_path(1.0, y, h, m0);
  for (int i : {100, 500, 1000}) {
    const Eigen::VectorXd direct = memory_integral(a, alpha, y, h, i * h);
    CHECK(std::abs(channel(i, 0) - direct(0)) < 1e-6);
  }
}

TEST_CASE("exp recursion vs quadrature converges at second order") {
  // halving the trajectory step shrinks the recursion-vs-trapezoid gap by ~4
  const GridFunction z = sampled_exp(1e-3, 10001, 1.0, 1.0);
  const HistoryState alpha(scalar(1.0), z);
  const Kernel a = Kernel::exponential(1.0, 1.0);
  auto gap_at = [&](double h) {
    const int n = static_cast<int>(std::round(1.0 / h)) + 1;
    Eigen::MatrixXd y(n, 1);
    for (int i = 0; i < n; ++i) y(i, 0) = std::cos(2.0 * i * h);
    const Eigen::MatrixXd channel =
        exp_memory_channel_path(1.0, y, h, exp_moment(z, 1.0));
    double worst = 0.0;
    for (int i = 0; i < n; i += std::max(1, (n - 1) / 10)) {
      const Eigen::VectorXd direct = memory_integral(a, alpha, y, h, i * h);
      worst = std::max(worst, std::abs(channel(i, 0) - direct(0)));
    }
    return worst;
  };
  const double g1 = gap_at(4e-2);
  const double g2 = gap_at(2e-2);
  CHECK(g1 / g2 > 3.2);
  CHECK(g1 / g2 < 4.8);
}

TEST_CASE("history state: E0 membership predicate") {
  const GridFunction z = sampled_exp(1e-2, 1001, 1.0, 1.0);
  CHECK(HistoryState(scalar(1.0), z).in_E0(1e-9));
  CHECK_FALSE(HistoryState(scalar(0.5), z).in_E0(1e-9));
}

TEST_CASE("tabulated kernel CSV loader") {
  std::stringstream ss;
  ss << "0,1\n0.5,0.5\n1,0.25\n";
  const Kernel a = load_tabulated_kernel_csv(ss, 1, 1, true);
  CHECK(a.at(0.25)(0, 0) == doctest::Approx(0.75));
  CHECK(a.at(2.0)(0, 0) == 0.0);
  CHECK(a.support() == doctest::Approx(1.0));

  std::stringstream bad;
  bad << "0,1\n0.5,0.5\n0.9,0.25\n";
  CHECK_THROWS_AS(load_tabulated_kernel_csv(bad, 1, 1, true), ConfigError);
}

TEST_CASE("tabulated kernel CSV loader: matrix rows are row-major") {
  // k = 1, d = 2: each row is s, A11, A12
  std::stringstream ss;
  ss << "0,1,2\n0.5,0.5,1\n1,0.25,0.5\n";
  const Kernel a = load_tabulated_kernel_csv(ss, 1, 2, true);
  CHECK(a.rows() == 1);
  CHECK(a.cols() == 2);
  CHECK(a.at(0.0)(0, 0) == 1.0);
  CHECK(a.at(0.0)(0, 1) == 2.0);
  CHECK(a.at(0.75)(0, 1) == doctest::Approx(0.75));
}

TEST_CASE("memory integral with a 1x2 kernel contracts a planar past") {
  // A(s) = e^{-s} [1, 2]: G(0) = int e^{-s} (z1 + 2 z2) ds
  Eigen::MatrixXd coef(1, 2);
  coef << 1.0, 2.0;
  const Kernel a = Kernel::exponential(1.0, coef);
  const int nodes = 10001;
  Eigen::MatrixXd z(nodes, 2);
  for (int i = 0; i < nodes; ++i) {
    z(i, 0) = std::exp(-i * 1e-3);
    z(i, 1) = std::exp(-2.0 * i * 1e-3);
  }
  const HistoryState alpha(Eigen::VectorXd::Ones(2),
                           GridFunction(1e-3, std::move(z)));
  const Eigen::MatrixXd traj = Eigen::MatrixXd::Ones(1, 2);
  const Eigen::VectorXd g = memory_integral(a, alpha, traj, 1e-3, 0.0);
  // int e^{-2s} + 2 int e^{-3s} = 1/2 + 2/3
  CHECK(g(0) == doctest::Approx(0.5 + 2.0 / 3.0).epsilon(1e-4));
}

TEST_CASE("grid function basics") {
  const GridFunction z = sampled_exp(1e-3, 10001, 1.0, 1.0);
  // trapezoid + exponential tail reproduces ||e^{-s}||_L2^2 = 1/2
  CHECK(z.l2_norm_sq() == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(z.value1(0.0005) == doctest::Approx(0.9995).epsilon(1e-6));
  // constant continuation is not square integrable
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(11, 1);
  const GridFunction c(1.0, ones, Tail::exponential(0.0));
  CHECK(std::isinf(c.l2_norm_sq()));
}
