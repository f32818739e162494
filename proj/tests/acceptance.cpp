// Acceptance suite: runs the numbered verification criteria and prints one
// pass/fail line per criterion. Usage: acceptance [n ...] runs a subset.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "memoc/dynamics.hpp"
#include "memoc/hilbert_ops.hpp"
#include "memoc/kernel.hpp"
#include "memoc/problems.hpp"
#include "memoc/reduced.hpp"
#include "memoc/value.hpp"

using namespace memoc;

namespace {

Eigen::VectorXd scalar(double v) {
  Eigen::VectorXd x(1);
  x << v;
  return x;
}

struct Outcome {
  bool pass;
  std::string detail;
};

Dynamics memory_driven() {
  Dynamics d;
  d.F = [](const Eigen::VectorXd&, double, const Eigen::VectorXd& a,
           Eigen::VectorXd& out) { out = a; };
  d.C1 = 1.0;
  d.K = {0.0};
  return d;
}

double linear_memory_oracle(double t) {
  Eigen::Matrix2d sys;
  sys << 0.0, 1.0, 1.0, -1.0;
  const Eigen::EigenSolver<Eigen::Matrix2d> eig(sys);
  const Eigen::Vector2cd lam = eig.eigenvalues();
  const Eigen::Matrix2cd v = eig.eigenvectors();
  const Eigen::Vector2cd coef = v.colPivHouseholderQr().solve(
      Eigen::Vector2cd(std::complex<double>(1.0, 0.0),
                       std::complex<double>(0.0, 0.0)));
  return (coef(0) * v(0, 0) * std::exp(lam(0) * t) +
          coef(1) * v(0, 1) * std::exp(lam(1) * t))
      .real();
}

ReducedProblem reduced_of(const Problem& p, double lo, double hi, int n) {
  ReducedProblem rp;
  rp.delta = p.kernel_rate;
  rp.F = p.reduced_F;
  rp.cost = p.cost;
  rp.K = p.dynamics.K;
  rp.x_min = lo;
  rp.x_max = hi;
  rp.y_min = lo;
  rp.y_max = hi;
  rp.nx = n;
  rp.ny = n;
  return rp;
}

// --------------------------------------------------------------------------
// 1. solve_cauchy vs picard_solve on the smoke problems, plus the iterate
//    distance ratios against the contraction bound.
Outcome criterion1() {
  const Kernel a = Kernel::exponential(1.0, 1.0);
  const double T = 1.0, h = 1e-3;
  const HistoryState alpha(scalar(1.0),
                           GridFunction::exponential(h, 10001, 1.0, 1.0));
  const ControlLaw u = ControlLaw::constant(0.0, T);

  Dynamics frozen;
  frozen.F = [](const Eigen::VectorXd&, double, const Eigen::VectorXd&,
                Eigen::VectorXd& out) { out.setZero(); };
  frozen.C1 = 0.0;
  frozen.K = {0.0};
  Dynamics decay;
  decay.F = [](const Eigen::VectorXd& x, double, const Eigen::VectorXd&,
               Eigen::VectorXd& out) { out = -x; };
  decay.C1 = 1.0;
  decay.K = {0.0};

  double worst_gap = 0.0, worst_ratio_excess = -1.0;
  for (const Dynamics& dyn : {frozen, decay, memory_driven()}) {
    const double theta = picard_default_theta(dyn, a);
    const double bound = picard_contraction_bound(dyn, a, theta);
    const Trajectory direct = solve_cauchy(dyn, a, alpha, u, T, h);
    const PicardResult fixed = picard_solve(dyn, a, alpha, u, T, h, theta);
    if (!fixed.converged) return {false, "picard did not converge"};
    worst_gap = std::max(
        worst_gap, (direct.y - fixed.trajectory.y).lpNorm<Eigen::Infinity>());
    for (size_t i = 1; i < fixed.distances.size(); ++i) {
      if (fixed.distances[i - 1] < 1e-12) break;
      worst_ratio_excess =
          std::max(worst_ratio_excess,
                   fixed.distances[i] / fixed.distances[i - 1] - bound);
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "sup gap %.3g (<= 1e-6), ratio excess over bound %.3g (<= 0)",
                worst_gap, worst_ratio_excess);
  return {worst_gap <= 1e-6 && worst_ratio_excess <= 0.0, buf};
}

// 2. linear-memory trajectory against the independent eigen-decomposition
Outcome criterion2() {
  const Kernel a = Kernel::exponential(1.0, 1.0);
  const HistoryState alpha(scalar(1.0), GridFunction::zero(1e-3, 10001, 1));
  const Trajectory t =
      solve_cauchy(memory_driven(), a, alpha, ControlLaw::constant(0.0, 1.0),
                   1.0, 1e-3);
  const double gap = std::abs(t.y(t.steps(), 0) - linear_memory_oracle(1.0));
  char buf[120];
  std::snprintf(buf, sizeof buf, "|y(1) - oracle| = %.3g (<= 1e-6)", gap);
  return {gap <= 1e-6, buf};
}

// 3. Gronwall continuity: ratios bounded, no sample above 3x the median
Outcome criterion3() {
  const Kernel a = Kernel::exponential(1.0, 1.0);
  const Dynamics dyn = memory_driven();
  const double theta = growth_rate_estimate(dyn, a);
  const HistoryState base(scalar(1.0),
                          GridFunction::exponential(1e-2, 1001, 1.0, 1.0));
  const ControlLaw u = ControlLaw::constant(0.0, 1.0);

  std::mt19937_64 rng(101);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> ratios;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd pert = base.z.samples();
    for (int i = 0; i < pert.rows(); ++i) pert(i, 0) += 0.3 * g(rng);
    const HistoryState moved(scalar(1.0 + g(rng)),
                             GridFunction(1e-2, pert, Tail::zero()));
    ratios.push_back(
        continuity_ratio(dyn, a, base, moved, u, 1.0, 1e-2, theta));
  }
  std::sort(ratios.begin(), ratios.end());
  const double median = ratios[ratios.size() / 2];
  const double maxr = ratios.back();
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "measured C = %.3g, median %.3g, max/median %.2f (<= 3)",
                maxr, median, maxr / median);
  return {maxr <= 3.0 * median, buf};
}

// 4. dynamic programming principle: exact splits and refinement trend
Outcome criterion4() {
  // midpoint split: outer and inner family pieces refine at the same scale,
  // so the family-restriction residual telescopes under refinement
  const double h = 1e-2, T = 20.0, split = 5.0;
  double residual_const, residual_lq;
  {
    const Problem cc = make_problem("constant_cost");
    const HistoryState alpha(scalar(1.0), GridFunction::zero(h, 1001, 1));
    residual_const = dpp_residual(cc.dynamics, cc.kernel, cc.cost, alpha,
                                  split, ControlFamily{2, cc.dynamics.K}, T,
                                  h);
  }
  {
    const Problem lq = make_problem("uncontrolled_lq");
    const HistoryState alpha(scalar(1.0), GridFunction::zero(h, 1001, 1));
    residual_lq = dpp_residual(lq.dynamics, lq.kernel, lq.cost, alpha, split,
                               ControlFamily{2, lq.dynamics.K}, T, h);
  }
  // controlled memory-LQ, exhaustive inner search at two refinement levels;
  // horizon 10 keeps the family pieces on the transient (tail 4.1 e^{-10})
  double res_coarse, res_fine;
  {
    const double tc = 10.0;
    const Problem p = make_problem("memory_lq");
    const HistoryState alpha(scalar(1.0),
                             GridFunction::exponential(h, 1001, 1.0, 1.0));
    res_coarse = dpp_residual(p.dynamics, p.kernel, p.cost, alpha, split,
                              ControlFamily{2, {-1.0, 0.0, 1.0}}, tc, h);
    const std::vector<double> k5 = {-1.0, -0.5, 0.0, 0.5, 1.0};
    Problem p5 = make_problem("memory_lq", {}, &k5);
    res_fine = dpp_residual(p5.dynamics, p5.kernel, p5.cost, alpha, split,
                            ControlFamily{4, k5}, tc, h);
  }
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "residuals: const %.2g, lq %.2g (<= 1e-9); controlled %.4g -> "
                "%.4g (decreasing)",
                residual_const, residual_lq, res_coarse, res_fine);
  return {residual_const <= 1e-9 && residual_lq <= 1e-9 &&
              res_fine < res_coarse,
          buf};
}

// 5. operator identities at 1000 random points plus the closed-form values
Outcome criterion5() {
  const double h = 1e-3;
  const int nodes = 10001;
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto smooth_z = [&]() {
    double r1 = 0.3 + 0.5 * std::abs(u(rng));
    double r2 = 1.2 + 1.2 * std::abs(u(rng));
    return GridFunction::exponential(
        h, nodes, {ExpTerm{scalar(u(rng)), r1}, ExpTerm{scalar(u(rng)), r2}});
  };
  auto rough_z = [&]() {
    Eigen::MatrixXd s(nodes, 1);
    for (int i = 0; i < nodes; ++i)
      s(i, 0) = 0.7 * u(rng) * std::exp(-0.4 * i * h);
    return GridFunction(h, std::move(s));
  };

  double max_rel = 0.0, min_tb = 1e300, max_contr = -1e300;
  for (int i = 0; i < 1000; ++i) {
    GridFunction z = (i % 2 == 0) ? smooth_z() : rough_z();
    const double x = (i % 4 >= 2) ? z.node1(0) : 2.0 * u(rng);
    const EPoint alpha(scalar(x), z);
    const double r1 = b_norm_sq(alpha);
    const double r2 = b_norm_sq_identity(alpha);
    max_rel = std::max(max_rel, std::abs(r1 - r2) / std::max(1.0, r1));
    min_tb = std::min(min_tb, tb_form(alpha));
    max_contr =
        std::max(max_contr, b_image_norm(alpha) - std::sqrt(r1));
  }

  const EPoint e1(scalar(1.0), GridFunction::zero(h, nodes, 1));
  const EPoint mixed(scalar(1.0),
                     GridFunction::exponential(h, nodes, 1.0, 1.0));
  const double v1 = std::abs(b_norm_sq(e1) - 2.0 / 3.0);
  const double v2 = std::abs(b_norm_sq(mixed) - 31.0 / 24.0);
  const double v3 = std::abs(tb_form(mixed) - 3.0 / 8.0);

  char buf[220];
  std::snprintf(buf, sizeof buf,
                "rel gap %.2g (<=1e-7), min <TBa,a> %.2g (>=-1e-9), "
                "contraction excess %.2g (<=1e-9), closed-form errs %.2g/%.2g/"
                "%.2g (<=1e-5)",
                max_rel, min_tb, max_contr, v1, v2, v3);
  return {max_rel <= 1e-7 && min_tb >= -1e-9 && max_contr <= 1e-9 &&
              v1 <= 1e-5 && v2 <= 1e-5 && v3 <= 1e-5,
          buf};
}

// 6. boundary value problem: residuals at h_z = 1e-3 and the route order
Outcome criterion6() {
  const double h = 1e-3;
  const int nodes = 10001;
  const BResult homo =
      apply_B(EPoint(scalar(1.0), GridFunction::zero(h, nodes, 1)));
  const BResult decayed =
      apply_B(EPoint(scalar(0.0), GridFunction::exponential(h, nodes, 1.0, 1.0)));
  const double res =
      std::max({homo.interior_residual, homo.robin_residual,
                decayed.interior_residual, decayed.robin_residual});

  auto gap_at = [](double hh) {
    const int nn = static_cast<int>(std::round(10.0 / hh)) + 1;
    return apply_B(EPoint(scalar(0.7),
                          GridFunction::exponential(hh, nn, 1.0, 1.0)))
        .route_gap;
  };
  const double o1 = std::log2(gap_at(2e-3) / gap_at(1e-3));
  const double o2 = std::log2(gap_at(1e-3) / gap_at(5e-4));
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "max residual %.2g (<= 1e-8), route orders %.2f, %.2f (>= 1.9)",
                res, o1, o2);
  return {res <= 1e-8 && o1 >= 1.9 && o2 >= 1.9, buf};
}

// 7. Hamiltonian regularity: no violation of the three moduli at 1000 pairs
Outcome criterion7() {
  const Problem lq = make_problem("memory_lq");
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto smooth = [&]() {
    double r1 = 0.4 + 0.4 * std::abs(u(rng));
    double r2 = 1.3 + 0.8 * std::abs(u(rng));
    return GridFunction::exponential(
        1e-3, 10001,
        {ExpTerm{scalar(u(rng)), r1}, ExpTerm{scalar(u(rng)), r2}});
  };
  std::vector<RegularitySample> samples;
  samples.reserve(1000);
  for (int i = 0; i < 1000; ++i)
    samples.push_back(RegularitySample{
        HistoryState(scalar(2.0 * u(rng)), smooth()),
        HistoryState(scalar(2.0 * u(rng)), smooth()), scalar(3.0 * u(rng)),
        scalar(3.0 * u(rng))});
  const RegularityGaps gaps =
      hamiltonian_regularity_gap(lq.cost, lq.dynamics, lq.kernel, samples);
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "max gaps: state %.2g, momentum %.2g, dual %.2g (all <= 0)",
                gaps.state_bound, gaps.momentum_bound,
                gaps.dual_bound.value_or(-1.0));
  return {gaps.state_bound <= 0.0 && gaps.momentum_bound <= 0.0 &&
              gaps.dual_bound.has_value() && *gaps.dual_bound <= 0.0,
          buf};
}

// 8. reduced HJB: contraction, pinned LQ accuracy, refinement behaviour
Outcome criterion8() {
  const Problem lq = make_problem("uncontrolled_lq");
  auto run = [&](int n, double dt) {
    const ReducedProblem rp = reduced_of(lq, -2.0, 2.0, n);
    const ReducedValueGrid grid = solve_reduced_hjb(rp, dt, 1e-10, 200000);
    double err = 0.0;
    for (int i = 1; i + 1 < grid.nx(); ++i)
      for (int j = 1; j + 1 < grid.ny(); ++j) {
        const double x = grid.x_min + i * grid.dx();
        err = std::max(err, std::abs(grid.w(i, j) - x * x / 3.0));
      }
    double worst_ratio = 0.0;
    const double gamma = std::exp(-lq.cost.lambda * dt);
    for (size_t i = 1; i < grid.update_history.size(); ++i) {
      if (grid.update_history[i - 1] < 1e-13) break;
      worst_ratio = std::max(worst_ratio, grid.update_history[i] /
                                              grid.update_history[i - 1]);
    }
    return std::tuple<double, double, double>(
        err, worst_ratio - gamma, reduced_pde_residual(grid, rp));
  };
  const auto [err1, contr1, res1] = run(201, 1e-2);
  const auto [err2, contr2, res2] = run(401, 5e-3);
  char buf[220];
  std::snprintf(buf, sizeof buf,
                "LQ error %.4g (<= 2e-2) -> %.4g (<= 0.6x), contraction "
                "excess %.2g (<= 1e-12), residual %.3g -> %.3g (shrinking)",
                err1, err2, std::max(contr1, contr2), res1, res2);
  return {err1 <= 2e-2 && err2 <= 0.6 * err1 && contr1 <= 1e-12 &&
              contr2 <= 1e-12 && res2 < res1,
          buf};
}

// 9. reduction identity v(x,z) = w(x, y(z)) across the two routes
Outcome criterion9() {
  double lq_gap;
  {
    const Problem lq = make_problem("uncontrolled_lq");
    const ReducedValueGrid grid =
        solve_reduced_hjb(reduced_of(lq, -2.0, 2.0, 201), 1e-2, 1e-10,
                          200000);
    const HistoryState alpha(scalar(1.0), GridFunction::zero(1e-2, 1001, 1));
    lq_gap = cross_validate(lq.dynamics, lq.cost, 1.0, alpha, grid,
                            ControlFamily{1, lq.dynamics.K}, 20.0, 1e-2)
                 .gap;
  }
  // controlled problem at two joint refinement levels; the estimate horizon
  // stays at 10 so the control pieces keep covering the transient (the tail
  // there is 4.1 e^{-10}, far below the gaps measured)
  auto controlled_gap = [&](int n, double dt, int m,
                            const std::vector<double>& k, double h) {
    Problem p = make_problem("memory_lq", {}, &k);
    const ReducedValueGrid grid =
        solve_reduced_hjb(reduced_of(p, -2.0, 2.0, n), dt, 1e-10, 400000);
    const int hist_nodes = static_cast<int>(std::round(10.0 / h)) + 1;
    const HistoryState alpha(
        scalar(1.0), GridFunction::exponential(h, hist_nodes, 1.0, 1.0));
    return cross_validate(p.dynamics, p.cost, 1.0, alpha, grid,
                          ControlFamily{m, k}, 10.0, h)
        .gap;
  };
  const double g1 =
      controlled_gap(101, 2e-2, 2, {-1.0, 0.0, 1.0}, 2e-2);
  const double g2 =
      controlled_gap(201, 1e-2, 5, {-1.0, -0.5, 0.0, 0.5, 1.0}, 1e-2);
  char buf[180];
  std::snprintf(buf, sizeof buf,
                "LQ gap %.4g (<= 3e-2); controlled gap %.4g -> %.4g "
                "(decreasing)",
                lq_gap, g1, g2);
  return {lq_gap <= 3e-2 && g2 < g1, buf};
}

// 10. Hoelder exponent of the value against min(1, lambda/theta-hat)
Outcome criterion10() {
  auto slope_at = [](double lambda) {
    const Problem ex = make_problem("expander", {{"lambda", lambda}});
    ControlFamily fam{1, ex.dynamics.K};
    const double T = 4.0, h = 1e-3;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (int j = 4; j <= 10; ++j) {
      const double delta = std::pow(2.0, -j);
      const HistoryState alpha(scalar(delta),
                               GridFunction::zero(1e-2, 1001, 1));
      const double v = value_estimate(ex.dynamics, ex.kernel, ex.cost, alpha,
                                      fam, T, h)
                           .value;
      const double lx = std::log(delta), ly = std::log(v);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++n;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
  };
  const Problem probe = make_problem("expander");
  const double theta_hat =
      growth_rate_estimate(probe.dynamics, probe.kernel);
  const double s_low = slope_at(0.5 * theta_hat);
  const double s_high = slope_at(2.0 * theta_hat);
  const double p_low = std::min(1.0, 0.5);
  const double p_high = 1.0;
  char buf[180];
  std::snprintf(buf, sizeof buf,
                "slopes %.3f vs %.2f and %.3f vs %.2f (within 0.2)", s_low,
                p_low, s_high, p_high);
  return {std::abs(s_low - p_low) <= 0.2 && std::abs(s_high - p_high) <= 0.2,
          buf};
}

const std::map<int, std::pair<const char*, std::function<Outcome()>>>
    kCriteria = {
        {1, {"solver agreement and Picard contraction", criterion1}},
        {2, {"linear-memory eigen oracle", criterion2}},
        {3, {"Gronwall continuity ratios", criterion3}},
        {4, {"dynamic programming principle", criterion4}},
        {5, {"operator identities", criterion5}},
        {6, {"B boundary value problem", criterion6}},
        {7, {"Hamiltonian regularity bounds", criterion7}},
        {8, {"reduced HJB solver", criterion8}},
        {9, {"reduction identity v = w(x, y(z))", criterion9}},
        {10, {"Hoelder exponent of the value", criterion10}},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> picks;
  for (int i = 1; i < argc; ++i) picks.push_back(std::atoi(argv[i]));
  if (picks.empty())
    for (const auto& [n, _] : kCriteria) picks.push_back(n);

  bool all_pass = true;
  for (int n : picks) {
    const auto it = kCriteria.find(n);
    if (it == kCriteria.end()) {
      std::printf("[FAIL] criterion %d: unknown\n", n);
      all_pass = false;
      continue;
    }
    try {
      const Outcome o = it->second.second();
      std::printf("[%s] criterion %d: %s — %s\n", o.pass ? "PASS" : "FAIL", n,
                  it->second.first, o.detail.c_str());
      all_pass = all_pass && o.pass;
    } catch (const std::exception& e) {
      std::printf("[FAIL] criterion %d: %s — exception: %s\n", n,
                  it->second.first, e.what());
      all_pass = false;
    }
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
