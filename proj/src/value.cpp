#include "memoc/value.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "memoc/errors.hpp"
#include "memoc/hilbert_ops.hpp"

namespace memoc {

double discounted_cost(const Trajectory& traj, const CostModel& cost,
                       double T) {
  if (!(cost.lambda > 0.0))
    throw DomainError("discount rate must be positive");
  if (T > traj.T + 1e-12)
    throw DomainError("discounted_cost horizon exceeds the trajectory");
  const double h = traj.h;
  const int n = static_cast<int>(std::round(T / h));
  const double lam = cost.lambda;
  double acc = 0.0;
  for (int j = 0; j < n; ++j) {
    const double u = traj.control.at((j + 0.5) * h);
    const double left = cost.L(traj.y.row(j).transpose(), u);
    const double right = cost.L(traj.y.row(j + 1).transpose(), u);
    acc += 0.5 * h *
           (std::exp(-lam * j * h) * left +
            std::exp(-lam * (j + 1) * h) * right);
  }
  return acc;
}

double quadrature_slack(const CostModel& cost, double h) {
  return cost.sup_bound * cost.lambda * h * h / 8.0 + 1e-12;
}

namespace {

ControlLaw family_law(const ControlFamily& family, double T,
                      const std::vector<int>& choice) {
  std::vector<double> breaks(family.intervals + 1);
  std::vector<double> values(family.intervals);
  for (int i = 0; i <= family.intervals; ++i)
    breaks[i] = T * i / family.intervals;
  for (int i = 0; i < family.intervals; ++i)
    values[i] = family.values[choice[i]];
  return ControlLaw(std::move(breaks), std::move(values));
}

double evaluate_law(const Dynamics& dyn, const Kernel& a,
                    const CostModel& cost, const HistoryState& alpha,
                    const ControlLaw& law, double T, double h) {
  const Trajectory traj = solve_cauchy(dyn, a, alpha, law, T, h);
  return discounted_cost(traj, cost, T);
}

}  // namespace

ValueEstimate value_estimate(const Dynamics& dyn, const Kernel& a,
                             const CostModel& cost, const HistoryState& alpha,
                             const ControlFamily& family, double T, double h,
                             ValueMode mode, long max_evals) {
  if (family.intervals < 1 || family.values.empty())
    throw DomainError("control family needs >= 1 interval and >= 1 value");
  const int m = family.intervals;
  const int nv = static_cast<int>(family.values.size());

  ValueEstimate est;
  est.horizon = T;
  est.tail_bound = cost.sup_bound * std::exp(-cost.lambda * T) / cost.lambda;
  est.family = family;

  std::vector<int> choice(m, 0);
  if (mode == ValueMode::Exhaustive) {
    double count = 1.0;
    for (int i = 0; i < m; ++i) count *= nv;
    if (count > static_cast<double>(max_evals))
      throw DomainError(
          "control family too large for exhaustive enumeration (" +
          std::to_string(count) + " sequences > " +
          std::to_string(max_evals) + "); select improvement mode explicitly");

    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_choice = choice;
    bool done = false;
    while (!done) {
      const double v =
          evaluate_law(dyn, a, cost, alpha, family_law(family, T, choice), T,
                       h);
      ++est.trace.evaluations;
      if (v < best) {
        best = v;
        best_choice = choice;
      }
      // odometer, last interval fastest; first sequence in declared order
      // wins ties through the strict comparison above
      int pos = m - 1;
      while (pos >= 0 && ++choice[pos] == nv) choice[pos--] = 0;
      done = pos < 0;
    }
    est.value = best;
    choice = best_choice;
  } else {
    est.trace.exhaustive = false;
    // best constant control as the baseline
    double best = std::numeric_limits<double>::infinity();
    int best_v = 0;
    for (int v = 0; v < nv; ++v) {
      std::fill(choice.begin(), choice.end(), v);
      const double val = evaluate_law(dyn, a, cost, alpha,
                                      family_law(family, T, choice), T, h);
      ++est.trace.evaluations;
      if (val < best) {
        best = val;
        best_v = v;
      }
    }
    std::fill(choice.begin(), choice.end(), best_v);
    // coordinate descent over intervals, sweeping the control values
    bool improved = true;
    while (improved && est.trace.sweeps < 64) {
      improved = false;
      ++est.trace.sweeps;
      for (int i = 0; i < m; ++i) {
        const int keep = choice[i];
        int pick = keep;
        for (int v = 0; v < nv; ++v) {
          if (v == keep) continue;
          choice[i] = v;
          const double val = evaluate_law(dyn, a, cost, alpha,
                                          family_law(family, T, choice), T, h);
          ++est.trace.evaluations;
          if (val < best) {
            best = val;
            pick = v;
            improved = true;
          }
        }
        choice[i] = pick;
      }
    }
    est.value = best;
  }

  est.best_controls.resize(m);
  for (int i = 0; i < m; ++i) est.best_controls[i] = family.values[choice[i]];

  const double bound =
      cost.sup_bound / cost.lambda + est.tail_bound + quadrature_slack(cost, h);
  if (std::abs(est.value) > bound)
    throw ConsistencyError("value estimate " + std::to_string(est.value) +
                           " violates the boundedness invariant " +
                           std::to_string(bound));
  return est;
}

double dpp_residual(const Dynamics& dyn, const Kernel& a,
                    const CostModel& cost, const HistoryState& alpha,
                    double split_t, const ControlFamily& family, double T,
                    double h) {
  if (!(split_t > 0.0) || !(split_t < T))
    throw DomainError("split time must lie strictly inside (0, T)");
  const double pos = split_t / h;
  if (std::abs(pos - std::round(pos)) > 1e-6)
    throw DomainError("split time must sit on the step grid");

  const double lhs =
      value_estimate(dyn, a, cost, alpha, family, T, h).value;

  const int m = family.intervals;
  const int nv = static_cast<int>(family.values.size());
  std::vector<int> choice(m, 0);
  double rhs = std::numeric_limits<double>::infinity();
  bool done = false;
  while (!done) {
    const ControlLaw outer = family_law(family, split_t, choice);
    const Trajectory seg = solve_cauchy(dyn, a, alpha, outer, split_t, h);
    const double seg_cost = discounted_cost(seg, cost, split_t);
    const HistoryState flowed = shift_history(seg, split_t);
    const double inner =
        value_estimate(dyn, a, cost, flowed, family, T - split_t, h).value;
    rhs = std::min(rhs,
                   seg_cost + std::exp(-cost.lambda * split_t) * inner);
    int p = m - 1;
    while (p >= 0 && ++choice[p] == nv) choice[p--] = 0;
    done = p < 0;
  }
  return std::abs(lhs - rhs);
}

double hamiltonian(const CostModel& cost, const Dynamics& dyn, const Kernel& a,
                   const HistoryState& alpha, const Eigen::VectorXd& p) {
  if (dyn.K.empty()) throw DomainError("hamiltonian needs a finite control set");
  const Eigen::VectorXd q = memory_history_piece(a, alpha.z, 0.0);
  Eigen::VectorXd f(dyn.d);
  double best = -std::numeric_limits<double>::infinity();
  for (double u : dyn.K) {
    dyn.F(alpha.x, u, q, f);
    const double cand = -cost.L(alpha.x, u) - p.dot(f);
    if (cand > best) best = cand;  // strict: first control wins ties
  }
  return best;
}

RegularityGaps hamiltonian_regularity_gap(
    const CostModel& cost, const Dynamics& dyn, const Kernel& a,
    const std::vector<RegularitySample>& samples) {
  const KernelNorms norms = kernel_norms(a);
  // Grid Cauchy-Schwarz pairs the trapezoid memory integral with the
  // trapezoid L2 norm of A on the sample grid, so the constant takes the
  // larger of the closed-form and grid readings of ||A||_L2.
  double grid_l2 = norms.l2;
  if (!samples.empty()) {
    const GridFunction& z0 = samples.front().a.z;
    double acc = 0.0;
    for (int i = 0; i < z0.nodes(); ++i) {
      const double w = (i == 0 || i == z0.nodes() - 1) ? 0.5 : 1.0;
      acc += w * z0.step() * a.at(i * z0.step()).squaredNorm();
    }
    grid_l2 = std::max(grid_l2, std::sqrt(acc));
  }
  double f0 = 0.0;
  {
    Eigen::VectorXd f(dyn.d);
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(dyn.d);
    const Eigen::VectorXd a0 = Eigen::VectorXd::Zero(dyn.k);
    for (double u : dyn.K) {
      dyn.F(x0, u, a0, f);
      f0 = std::max(f0, f.norm());
    }
  }
  const double c_state = std::max(cost.C2, dyn.C1 * std::max(1.0, grid_l2));
  const double c_momentum = std::max(f0, dyn.C1 * std::max(1.0, grid_l2));
  std::optional<double> c_dual;
  if (norms.dl2)
    c_dual = std::max(cost.C2,
                      dyn.C1 * std::max(1.0, std::hypot(norms.l2, *norms.dl2)));

  RegularityGaps gaps;
  gaps.state_bound = -std::numeric_limits<double>::infinity();
  gaps.momentum_bound = -std::numeric_limits<double>::infinity();
  if (c_dual) gaps.dual_bound = -std::numeric_limits<double>::infinity();

  for (const auto& s : samples) {
    const double h_ap = hamiltonian(cost, dyn, a, s.a, s.p);
    const double h_bp = hamiltonian(cost, dyn, a, s.b, s.p);
    const double h_aq = hamiltonian(cost, dyn, a, s.a, s.q);
    const double dx = (s.a.x - s.b.x).norm();
    const GridFunction dz =
        GridFunction::linear_combination(1.0, s.a.z, -1.0, s.b.z);
    const double dz_l2 = dz.l2_norm();

    gaps.state_bound =
        std::max(gaps.state_bound,
                 std::abs(h_ap - h_bp) -
                     c_state * (dx + dz_l2) * (1.0 + s.p.norm()));
    gaps.momentum_bound =
        std::max(gaps.momentum_bound,
                 std::abs(h_ap - h_aq) -
                     c_momentum * (s.p - s.q).norm() *
                         (1.0 + s.a.x.norm() + s.a.z.l2_norm()));
    if (c_dual) {
      const double dz_dual = dual_h1_norm(dz);
      gaps.dual_bound =
          std::max(*gaps.dual_bound,
                   std::abs(h_ap - h_bp) -
                       *c_dual * (dx + dz_dual) * (1.0 + s.p.norm()));
    }
  }
  return gaps;
}

}  // namespace memoc
